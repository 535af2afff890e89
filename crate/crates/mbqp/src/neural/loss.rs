//! Loss functions: weighted cross-entropy, contrastive, and their
//! combination, plus the weighted Brier score used for model selection.
//!
//! Each loss exists twice: a plain function of prediction vectors (used by
//! tests as an independent route and by anything that only needs values) and
//! a tape builder used for gradients. Both share the same stabilized
//! primitives, so their values agree to machine precision.
//!
//! Cross-entropy terms use `-log sigmoid(z) = softplus(-z)`; contrastive
//! terms use a max-shifted log-sum-exp. Logits are clipped to +-30 inside
//! the losses, which is inert at any logit scale the model can produce.
//!
//! The contrastive temperature of a positive is `1 / exp(obj_norm / w)` with
//! `w < 0` and objectives min-max normalized over S+ and S-, so better
//! positives get lower temperatures.

use super::forward::forward_on_tape;
use super::tape::{softplus, NodeId, Tape, Tensor};
use crate::datagen::{normalize_objective, objective_norm_bounds, SampleSet};
use crate::error::{Error, Result};
use crate::instance::{MbqpInstance, Solution};

pub const LOGIT_CLIP: f64 = 30.0;

fn clip(z: f64) -> f64 {
    z.clamp(-LOGIT_CLIP, LOGIT_CLIP)
}

/// Temperature of a positive given its normalized objective:
/// `tau = 1 / exp(obj_norm / w) = exp(-obj_norm / w)`.
pub fn temperature(obj_norm: f64, temperature_w: f64) -> f64 {
    (-obj_norm / temperature_w).exp()
}

fn check_w(temperature_w: f64) -> Result<()> {
    if temperature_w >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "temperature scale must be negative, got {temperature_w}"
        )));
    }
    Ok(())
}

/// Weighted cross-entropy over the positives:
/// `-sum_p w_p sum_d [t_d log sigmoid(z_d) + (1-t_d) log(1-sigmoid(z_d))]`.
/// `logits` and `binary` align elementwise.
pub fn loss_wce(
    logits: &[f64],
    positives: &[Solution],
    weights: &[f64],
    binary: &[usize],
) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("WCE over empty positive set".into()));
    }
    if positives.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} positives vs {} weights",
            positives.len(),
            weights.len()
        )));
    }
    if logits.len() != binary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logits vs {} binaries",
            logits.len(),
            binary.len()
        )));
    }
    let mut total = 0.0;
    for (p, &w) in positives.iter().zip(weights) {
        let mut ce = 0.0;
        for (i, &d) in binary.iter().enumerate() {
            let sign = 1.0 - 2.0 * p.x[d];
            ce += softplus(sign * clip(logits[i]));
        }
        total += w * ce;
    }
    Ok(total)
}

/// Per-positive contrastive terms against the encoded negatives:
/// `L+ = -x+.p/tau + log sum_neg exp(x~.p/tau)` with -1/1 encoding.
fn cl_terms(
    signed_preds: &[f64],
    positives: &[Solution],
    negatives: &[Solution],
    binary: &[usize],
    temperature_w: f64,
) -> Result<Vec<f64>> {
    check_w(temperature_w)?;
    if negatives.is_empty() {
        return Err(Error::InvalidArgument(
            "contrastive loss needs at least one negative".into(),
        ));
    }
    if signed_preds.len() != binary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} binaries",
            signed_preds.len(),
            binary.len()
        )));
    }
    let (norm_min, norm_range) = objective_norm_bounds(positives, negatives);
    let encode_dot = |sol: &Solution| -> f64 {
        binary
            .iter()
            .enumerate()
            .map(|(i, &d)| (2.0 * sol.x[d] - 1.0) * signed_preds[i])
            .sum()
    };
    let neg_dots: Vec<f64> = negatives.iter().map(encode_dot).collect();
    let mut terms = Vec::with_capacity(positives.len());
    for pos in positives {
        let tau = temperature(
            normalize_objective(pos.objective, norm_min, norm_range),
            temperature_w,
        );
        let pos_score = encode_dot(pos) / tau;
        let scaled: Vec<f64> = neg_dots.iter().map(|&s| s / tau).collect();
        let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
        terms.push(lse - pos_score);
    }
    Ok(terms)
}

/// Contrastive loss summed over positives. `signed_preds` are tanh outputs
/// in [-1, 1] aligned with `binary`.
pub fn loss_cl(
    signed_preds: &[f64],
    positives: &[Solution],
    negatives: &[Solution],
    binary: &[usize],
    temperature_w: f64,
) -> Result<f64> {
    Ok(cl_terms(signed_preds, positives, negatives, binary, temperature_w)?
        .into_iter()
        .sum())
}

/// Combined loss: per positive, `lambda * CL` (all variables; by
/// construction it only depends on those outside U) plus the
/// energy-weighted cross-entropy restricted to U.
pub fn loss_combined(
    logits: &[f64],
    set: &SampleSet,
    binary: &[usize],
    lambda_cl: f64,
    temperature_w: f64,
) -> Result<f64> {
    check_w(temperature_w)?;
    if set.u_sets.len() != set.positives.len() {
        return Err(Error::InvalidArgument(format!(
            "{} U-sets for {} positives",
            set.u_sets.len(),
            set.positives.len()
        )));
    }
    if logits.len() != binary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logits vs {} binaries",
            logits.len(),
            binary.len()
        )));
    }
    let mut pos_of = std::collections::BTreeMap::new();
    for (i, &d) in binary.iter().enumerate() {
        pos_of.insert(d, i);
    }
    let signed: Vec<f64> = logits.iter().map(|&z| clip(z).tanh()).collect();
    let cl = if set.negatives.is_empty() {
        vec![0.0; set.positives.len()]
    } else {
        cl_terms(&signed, &set.positives, &set.negatives, binary, temperature_w)?
    };
    let mut total = 0.0;
    for ((pos, u), (&w, &cl_term)) in set
        .positives
        .iter()
        .zip(&set.u_sets)
        .zip(set.weights.iter().zip(&cl))
    {
        let mut ce = 0.0;
        for &d in u {
            let i = *pos_of.get(&d).ok_or_else(|| {
                Error::InvalidArgument(format!("U-set index {d} is not a binary variable"))
            })?;
            let sign = 1.0 - 2.0 * pos.x[d];
            ce += softplus(sign * clip(logits[i]));
        }
        total += lambda_cl * cl_term + w * ce;
    }
    Ok(total)
}

/// Weighted Brier score of probability predictions against the positives:
/// `sum_p sum_d w_p (prob_d - t_d)^2`.
pub fn weighted_brier_probs(probs: &[f64], set: &SampleSet, binary: &[usize]) -> Result<f64> {
    if probs.len() != binary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities vs {} binaries",
            probs.len(),
            binary.len()
        )));
    }
    let mut total = 0.0;
    for (pos, &w) in set.positives.iter().zip(&set.weights) {
        for (i, &d) in binary.iter().enumerate() {
            let diff = probs[i] - pos.x[d];
            total += w * diff * diff;
        }
    }
    Ok(total)
}

// ---- tape builders ----------------------------------------------------

/// WCE on the tape; `logits` is a column of binary logits.
pub(crate) fn wce_on_tape(
    tape: &mut Tape,
    logits: NodeId,
    positives: &[Solution],
    weights: &[f64],
    binary: &[usize],
) -> NodeId {
    let clipped = tape.clip(logits, -LOGIT_CLIP, LOGIT_CLIP);
    let mut acc: Option<NodeId> = None;
    for (pos, &w) in positives.iter().zip(weights) {
        let signs: Vec<f64> = binary.iter().map(|&d| 1.0 - 2.0 * pos.x[d]).collect();
        let sign_col = tape.leaf(Tensor::column(signs));
        let prod = tape.mul(clipped, sign_col);
        let sp = tape.softplus_node(prod);
        let ce = tape.sum_all(sp);
        let scaled = tape.scale(ce, w);
        acc = Some(match acc {
            None => scaled,
            Some(a) => tape.add(a, scaled),
        });
    }
    acc.expect("positives checked non-empty")
}

/// CL on the tape. Requires non-empty negatives.
pub(crate) fn cl_on_tape(
    tape: &mut Tape,
    logits: NodeId,
    positives: &[Solution],
    negatives: &[Solution],
    binary: &[usize],
    temperature_w: f64,
) -> NodeId {
    let clipped = tape.clip(logits, -LOGIT_CLIP, LOGIT_CLIP);
    let preds = tape.tanh(clipped);
    let (norm_min, norm_range) = objective_norm_bounds(positives, negatives);
    let encoded: Vec<f64> = negatives
        .iter()
        .flat_map(|neg| binary.iter().map(|&d| 2.0 * neg.x[d] - 1.0))
        .collect();
    let neg_matrix = tape.leaf(Tensor::from_vec(negatives.len(), binary.len(), encoded));
    let neg_dots = tape.matmul(neg_matrix, preds);
    let mut acc: Option<NodeId> = None;
    for pos in positives {
        let tau = temperature(
            normalize_objective(pos.objective, norm_min, norm_range),
            temperature_w,
        );
        let pos_row: Vec<f64> = binary.iter().map(|&d| 2.0 * pos.x[d] - 1.0).collect();
        let pos_leaf = tape.leaf(Tensor::from_vec(1, binary.len(), pos_row));
        let pos_dot = tape.matmul(pos_leaf, preds);
        let pos_term = tape.scale(pos_dot, -1.0 / tau);
        let scaled_negs = tape.scale(neg_dots, 1.0 / tau);
        let lse = tape.log_sum_exp(scaled_negs);
        let term = tape.add(lse, pos_term);
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term),
        });
    }
    acc.expect("positives checked non-empty")
}

/// Combined loss on the tape, mirroring [`loss_combined`].
pub(crate) fn combined_on_tape(
    tape: &mut Tape,
    logits: NodeId,
    set: &SampleSet,
    binary: &[usize],
    lambda_cl: f64,
    temperature_w: f64,
) -> NodeId {
    let mut pos_of = std::collections::BTreeMap::new();
    for (i, &d) in binary.iter().enumerate() {
        pos_of.insert(d, i);
    }
    let clipped = tape.clip(logits, -LOGIT_CLIP, LOGIT_CLIP);
    let mut acc: Option<NodeId> = None;
    if !set.negatives.is_empty() {
        let cl = cl_on_tape(
            tape,
            logits,
            &set.positives,
            &set.negatives,
            binary,
            temperature_w,
        );
        acc = Some(tape.scale(cl, lambda_cl));
    }
    for (pos, (u, &w)) in set
        .positives
        .iter()
        .zip(set.u_sets.iter().zip(&set.weights))
    {
        if u.is_empty() {
            continue;
        }
        let idx: Vec<usize> = u.iter().map(|d| pos_of[d]).collect();
        let signs: Vec<f64> = u.iter().map(|&d| 1.0 - 2.0 * pos.x[d]).collect();
        let z_u = tape.gather(clipped, idx);
        let sign_col = tape.leaf(Tensor::column(signs));
        let prod = tape.mul(z_u, sign_col);
        let sp = tape.softplus_node(prod);
        let ce = tape.sum_all(sp);
        let scaled = tape.scale(ce, w);
        acc = Some(match acc {
            None => scaled,
            Some(a) => tape.add(a, scaled),
        });
    }
    match acc {
        Some(a) => a,
        // degenerate: no negatives and all U empty; constant zero loss
        None => tape.leaf(Tensor::scalar(0.0)),
    }
}

/// Convenience wrapper: builds forward plus the requested loss for one
/// instance on an existing tape.
pub(crate) fn instance_loss_on_tape(
    tape: &mut Tape,
    model: &super::params::BoundModel,
    inst: &MbqpInstance,
    graph: &crate::graph::TripartiteGraph,
    set: &SampleSet,
    kind: super::LossKind,
    lambda_cl: f64,
    temperature_w: f64,
) -> Result<NodeId> {
    let logits = forward_on_tape(tape, model, graph)?;
    let loss = match kind {
        super::LossKind::Wce => {
            wce_on_tape(tape, logits, &set.positives, &set.weights, &inst.binary)
        }
        super::LossKind::Cl => {
            if set.negatives.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "instance {} has no negatives for the contrastive loss",
                    inst.name
                )));
            }
            cl_on_tape(
                tape,
                logits,
                &set.positives,
                &set.negatives,
                &inst.binary,
                temperature_w,
            )
        }
        super::LossKind::ClWce => {
            combined_on_tape(tape, logits, set, &inst.binary, lambda_cl, temperature_w)
        }
    };
    Ok(loss)
}
