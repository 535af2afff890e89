//! Four rounds of attention over the tripartite graph.
//!
//! Round 1: quadratic-term nodes attend over their variables. Round 2:
//! variables attend over the updated terms. Round 3: constraints attend over
//! the updated variables. Round 4: variables attend over the updated
//! constraints. Scoring follows the shared-linear-then-attention-vector
//! scheme: `a . leaky_relu(W_q x_t + W_k x_s + coef * w_e)`, with the edge
//! term only present on constraint edges, which carry an A coefficient.
//! Head outputs are concatenated, projected, masked to nodes that actually
//! have neighbors, and added residually, so isolated nodes pass through
//! unchanged. The MLP head emits one logit per binary variable.

use super::params::{BoundModel, BoundRound, ModelParams};
use super::tape::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::{TripartiteGraph, F_C, F_Q, F_V};

const LEAKY_SLOPE: f64 = 0.2;

/// One attention round: `targets` attend over `sources` along `edges`
/// (target, source, coefficient). Edges must be sorted by target.
fn attend(
    tape: &mut Tape,
    round: &BoundRound,
    targets: NodeId,
    sources: NodeId,
    edges: &[(usize, usize, f64)],
    n_targets: usize,
) -> NodeId {
    let tgt_idx: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let src_idx: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let coefs: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let has_coefs = coefs.iter().any(|&c| c != 0.0);

    let mut mask = vec![0.0; n_targets];
    for &t in &tgt_idx {
        mask[t] = 1.0;
    }

    let mut head_outs = Vec::with_capacity(round.heads.len());
    for head in &round.heads {
        let q = tape.matmul(targets, head.w_q);
        let k = tape.matmul(sources, head.w_k);
        let v = tape.matmul(sources, head.w_v);
        let q_e = tape.gather(q, tgt_idx.clone());
        let k_e = tape.gather(k, src_idx.clone());
        let mut pre = tape.add(q_e, k_e);
        if has_coefs {
            let coef_col = tape.leaf(Tensor::column(coefs.clone()));
            let edge_term = tape.matmul(coef_col, head.edge);
            pre = tape.add(pre, edge_term);
        }
        let act = tape.leaky_relu(pre, LEAKY_SLOPE);
        let score = tape.matmul(act, head.attn);
        let alpha = tape.segment_softmax(score, tgt_idx.clone());
        let v_e = tape.gather(v, src_idx.clone());
        let weighted = tape.col_mul(v_e, alpha);
        head_outs.push(tape.segment_sum(weighted, tgt_idx.clone(), n_targets));
    }
    let cat = tape.concat_cols(head_outs);
    let proj = tape.matmul(cat, round.w_o);
    let biased = tape.add_row(proj, round.b_o);
    let masked = tape.row_scale(biased, mask);
    tape.add(targets, masked)
}

/// Builds the forward pass on an existing tape and returns the logits node,
/// one row per binary variable in ascending variable order.
pub fn forward_on_tape(
    tape: &mut Tape,
    model: &BoundModel,
    graph: &TripartiteGraph,
) -> Result<NodeId> {
    {
        let ev = tape.value(model.embed_v);
        let ec = tape.value(model.embed_c);
        let eq = tape.value(model.embed_q);
        if ev.rows != F_V || ec.rows != F_C || eq.rows != F_Q {
            return Err(Error::DimensionMismatch(format!(
                "embedding widths ({}, {}, {}) do not match feature widths ({F_V}, {F_C}, {F_Q})",
                ev.rows, ec.rows, eq.rows
            )));
        }
    }

    let x_v = tape.leaf(Tensor::from_vec(graph.n_v, F_V, graph.v_feats.clone()));
    let x_c = tape.leaf(Tensor::from_vec(graph.n_c, F_C, graph.c_feats.clone()));
    let x_q = tape.leaf(Tensor::from_vec(graph.n_q, F_Q, graph.q_feats.clone()));

    let v1 = {
        let p = tape.matmul(x_v, model.embed_v);
        tape.add_row(p, model.embed_v_b)
    };
    let c1 = {
        let p = tape.matmul(x_c, model.embed_c);
        tape.add_row(p, model.embed_c_b)
    };
    let q1 = {
        let p = tape.matmul(x_q, model.embed_q);
        tape.add_row(p, model.embed_q_b)
    };

    // quadratic edges carry no coefficient; constraint edges carry A_ij
    // normalized by the largest magnitude in the graph
    let qv: Vec<(usize, usize, f64)> =
        graph.qv_edges.iter().map(|&(q, v)| (q, v, 0.0)).collect();
    let mut vq: Vec<(usize, usize, f64)> =
        graph.qv_edges.iter().map(|&(q, v)| (v, q, 0.0)).collect();
    vq.sort_unstable_by_key(|&(t, s, _)| (t, s));

    let coef_norm = graph
        .cv_edges
        .iter()
        .fold(0.0f64, |acc, &(_, _, c)| acc.max(c.abs()))
        .max(1e-300);
    let cv: Vec<(usize, usize, f64)> = graph
        .cv_edges
        .iter()
        .map(|&(c, v, coef)| (c, v, coef / coef_norm))
        .collect();
    let mut vc: Vec<(usize, usize, f64)> = graph
        .cv_edges
        .iter()
        .map(|&(c, v, coef)| (v, c, coef / coef_norm))
        .collect();
    vc.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let q2 = attend(tape, &model.rounds[0], q1, v1, &qv, graph.n_q);
    let v2 = attend(tape, &model.rounds[1], v1, q2, &vq, graph.n_v);
    let c2 = attend(tape, &model.rounds[2], c1, v2, &cv, graph.n_c);
    let v3 = attend(tape, &model.rounds[3], v2, c2, &vc, graph.n_v);

    let h1 = {
        let p = tape.matmul(v3, model.mlp.w1);
        let b = tape.add_row(p, model.mlp.b1);
        tape.relu(b)
    };
    let h2 = {
        let p = tape.matmul(h1, model.mlp.w2);
        let b = tape.add_row(p, model.mlp.b2);
        tape.relu(b)
    };
    let out = {
        let p = tape.matmul(h2, model.mlp.w3);
        tape.add_row(p, model.mlp.b3)
    };
    Ok(tape.gather(out, graph.binary_indices()))
}

/// Runs the model and returns one logit per binary variable.
pub fn forward(params: &ModelParams, graph: &TripartiteGraph) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let logits = forward_on_tape(&mut tape, &model, graph)?;
    Ok(tape.value(logits).data.clone())
}
