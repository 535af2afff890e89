//! Randomized relax-search training-data collection.
//!
//! From a relaxation point, K randomized partial fixings of the least
//! fractional binaries each spawn a sub-MBQP. The complete solver harvests
//! the best (positive) and worst (negative) feasible point of every
//! subproblem. Negatives are then filtered to be strictly worse than every
//! positive, and per-positive U-sets record the variables on which a positive
//! and all surviving negatives agree.

use crate::bnb;
use crate::error::{Error, Result};
use crate::instance::{MbqpInstance, Solution, FEASIBILITY_TOL};
use crate::relaxation::{fractionality, solve_relaxation};
use crate::rng::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Positive/negative sample sets for one instance, with per-positive U-sets
/// and training weights.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub instance_name: String,
    pub binary_count: usize,
    pub positives: Vec<Solution>,
    /// Post-filter negatives: strictly worse than every positive.
    pub negatives: Vec<Solution>,
    /// Aligned with `positives`; sorted variable indices.
    pub u_sets: Vec<Vec<usize>>,
    /// Softmax of negated normalized objectives; sums to 1.
    pub weights: Vec<f64>,
}

/// Rounds a relaxation value of a binary to its nearest integer, half up.
pub fn round_binary(v: f64) -> f64 {
    if v >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Runs the K randomized fixings and returns raw (deduplicated) positive and
/// negative solution sets. Subproblems without a feasible point contribute
/// nothing. Per-k randomness comes from independent derived streams, so the
/// first K results never change when K grows.
pub fn randomized_relax_search(
    inst: &MbqpInstance,
    relax_budget: usize,
    node_budget: u64,
    k_count: usize,
    p1: f64,
    p2: f64,
    seed: u64,
) -> Result<(Vec<Solution>, Vec<Solution>)> {
    if inst.binary.is_empty() {
        return Err(Error::InvalidArgument(
            "instance has no binary variables to fix".into(),
        ));
    }
    if !(0.0 < p2 && p2 < p1 && p1 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fixing ratios must satisfy 0 < p2 < p1 <= 1, got p1={p1}, p2={p2}"
        )));
    }
    if k_count < 1 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }

    let relax = solve_relaxation(inst, relax_budget, FEASIBILITY_TOL)?;
    let frac = fractionality(&relax.x_bar);

    // candidate set: floor(p1 |B|) least fractional binaries, ties by index
    let mut by_frac: Vec<usize> = inst.binary.clone();
    by_frac.sort_by(|&p, &q| frac[p].partial_cmp(&frac[q]).unwrap().then(p.cmp(&q)));
    let n_bin = inst.binary.len();
    let candidate_len = ((p1 * n_bin as f64).floor() as usize).min(n_bin);
    let candidates = &by_frac[..candidate_len];
    let fix_len = ((p2 * n_bin as f64).floor() as usize).min(candidate_len);

    let per_k: Vec<Option<(Solution, Solution)>> = (1..=k_count)
        .into_par_iter()
        .map(|k| {
            let mut rng = SplitMix64::derive(seed, k as u64);
            let chosen = rng.choose(candidates, fix_len);
            let assignments: Vec<(usize, f64)> = chosen
                .iter()
                .map(|&i| (i, round_binary(relax.x_bar[i])))
                .collect();
            let sub = inst.fix_variables(&assignments).expect("candidates are binary");
            let res = bnb::solve(&sub, node_budget).expect("subproblem shares dimensions");
            match (res.best, res.worst) {
                (Some(best), Some(worst)) => {
                    // re-evaluate against the original instance
                    let best = Solution::evaluate(inst, best.x, FEASIBILITY_TOL)
                        .expect("dimensions match");
                    let worst = Solution::evaluate(inst, worst.x, FEASIBILITY_TOL)
                        .expect("dimensions match");
                    Some((best, worst))
                }
                _ => None,
            }
        })
        .collect();

    let mut s_plus: Vec<Solution> = Vec::new();
    let mut s_minus: Vec<Solution> = Vec::new();
    for pair in per_k.into_iter().flatten() {
        let (best, worst) = pair;
        if !s_plus.iter().any(|s| s.x == best.x) {
            s_plus.push(best);
        }
        if !s_minus.iter().any(|s| s.x == worst.x) {
            s_minus.push(worst);
        }
    }
    Ok((s_plus, s_minus))
}

/// Keeps only negatives strictly worse than the worst positive:
/// `{x in S- : obj(x) > max_{x+} obj(x+)}`.
pub fn filter_negatives(s_plus: &[Solution], s_minus: &[Solution]) -> Result<Vec<Solution>> {
    if s_plus.is_empty() {
        return Err(Error::InvalidArgument("cannot filter against empty S+".into()));
    }
    let v_prime = s_plus
        .iter()
        .map(|s| s.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(s_minus
        .iter()
        .filter(|s| s.objective > v_prime)
        .cloned()
        .collect())
}

/// Indices in B where the positive and every negative take the same value.
/// With no negatives every index agrees trivially, so U = B.
pub fn compute_u_set(x_plus: &Solution, s_minus: &[Solution], binary: &[usize]) -> Vec<usize> {
    binary
        .iter()
        .copied()
        .filter(|&d| s_minus.iter().all(|neg| neg.x[d] == x_plus.x[d]))
        .collect()
}

/// Normalization bounds (min, range) over the objectives of S+ and S-.
/// A zero range maps every objective to 0.
pub fn objective_norm_bounds(positives: &[Solution], negatives: &[Solution]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in positives.iter().chain(negatives) {
        lo = lo.min(s.objective);
        hi = hi.max(s.objective);
    }
    (lo, hi - lo)
}

pub fn normalize_objective(obj: f64, min: f64, range: f64) -> f64 {
    if range > 0.0 {
        (obj - min) / range
    } else {
        0.0
    }
}

/// Training weights of the positives: softmax of negated min-max-normalized
/// objectives. Normalizing over S+ and S- keeps the exponents in [-1, 0]
/// while preserving the quality ordering the weights encode.
pub fn training_weights(positives: &[Solution], negatives: &[Solution]) -> Result<Vec<f64>> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("weights of empty positive set".into()));
    }
    let (min, range) = objective_norm_bounds(positives, negatives);
    let exps: Vec<f64> = positives
        .iter()
        .map(|s| (-normalize_objective(s.objective, min, range)).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Bundles filtered negatives, U-sets, and weights into a [`SampleSet`].
pub fn assemble_sample_set(
    inst: &MbqpInstance,
    s_plus: Vec<Solution>,
    s_minus: Vec<Solution>,
) -> Result<SampleSet> {
    if s_plus.is_empty() {
        return Err(Error::Infeasible(format!(
            "no positive solutions collected for {}",
            inst.name
        )));
    }
    if let Some(bad) = s_plus.iter().position(|s| !s.feasible) {
        return Err(Error::Infeasible(format!("positive {bad} is infeasible")));
    }
    let negatives = filter_negatives(&s_plus, &s_minus)?;
    let u_sets: Vec<Vec<usize>> = s_plus
        .iter()
        .map(|p| compute_u_set(p, &negatives, &inst.binary))
        .collect();
    let weights = training_weights(&s_plus, &negatives)?;
    Ok(SampleSet {
        instance_name: inst.name.clone(),
        binary_count: inst.binary.len(),
        positives: s_plus,
        negatives,
        u_sets,
        weights,
    })
}

/// Full collection pipeline for one instance.
#[allow(clippy::too_many_arguments)]
pub fn collect(
    inst: &MbqpInstance,
    relax_budget: usize,
    node_budget: u64,
    k_count: usize,
    p1: f64,
    p2: f64,
    seed: u64,
) -> Result<SampleSet> {
    let (s_plus, s_minus) =
        randomized_relax_search(inst, relax_budget, node_budget, k_count, p1, p2, seed)?;
    assemble_sample_set(inst, s_plus, s_minus)
}

/// Aggregate statistics over a dataset of sample sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_positive_count: f64,
    pub mean_best_objective: f64,
    /// Mean over instances of the mean |U| / |B| across positives.
    pub frac_u: f64,
}

pub fn dataset_stats(sets: &[SampleSet]) -> Result<DatasetStats> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("dataset_stats of empty dataset".into()));
    }
    let n = sets.len() as f64;
    let mean_positive_count = sets.iter().map(|s| s.positives.len() as f64).sum::<f64>() / n;
    let mean_best_objective = sets
        .iter()
        .map(|s| {
            s.positives
                .iter()
                .map(|p| p.objective)
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / n;
    let frac_u = sets
        .iter()
        .map(|s| {
            let per_positive: f64 = s
                .u_sets
                .iter()
                .map(|u| u.len() as f64 / s.binary_count as f64)
                .sum();
            per_positive / s.positives.len() as f64
        })
        .sum::<f64>()
        / n;
    Ok(DatasetStats {
        mean_positive_count,
        mean_best_objective,
        frac_u,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionWire {
    x: Vec<f64>,
    obj: f64,
}

/// On-disk dataset: the instance inline plus the sample sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub instance: MbqpInstance,
    positives: Vec<SolutionWire>,
    negatives: Vec<SolutionWire>,
    u_sets: BTreeMap<usize, Vec<usize>>,
    weights: Vec<f64>,
}

impl DatasetFile {
    pub fn new(instance: MbqpInstance, set: &SampleSet) -> Self {
        Self {
            positives: set
                .positives
                .iter()
                .map(|s| SolutionWire {
                    x: s.x.clone(),
                    obj: s.objective,
                })
                .collect(),
            negatives: set
                .negatives
                .iter()
                .map(|s| SolutionWire {
                    x: s.x.clone(),
                    obj: s.objective,
                })
                .collect(),
            u_sets: set
                .u_sets
                .iter()
                .enumerate()
                .map(|(i, u)| (i, u.clone()))
                .collect(),
            weights: set.weights.clone(),
            instance,
        }
    }

    /// Rebuilds the sample set, re-checking feasibility of every solution.
    pub fn sample_set(&self) -> Result<SampleSet> {
        let rebuild = |w: &SolutionWire| -> Result<Solution> {
            let sol = Solution::evaluate(&self.instance, w.x.clone(), FEASIBILITY_TOL)?;
            if (sol.objective - w.obj).abs() > 1e-9 * (1.0 + w.obj.abs()) {
                return Err(Error::InvalidInstance(format!(
                    "stored objective {} disagrees with evaluation {}",
                    w.obj, sol.objective
                )));
            }
            Ok(sol)
        };
        let positives = self.positives.iter().map(rebuild).collect::<Result<Vec<_>>>()?;
        let negatives = self.negatives.iter().map(rebuild).collect::<Result<Vec<_>>>()?;
        let u_sets: Vec<Vec<usize>> = (0..positives.len())
            .map(|i| self.u_sets.get(&i).cloned().unwrap_or_default())
            .collect();
        Ok(SampleSet {
            instance_name: self.instance.name.clone(),
            binary_count: self.instance.binary.len(),
            positives,
            negatives,
            u_sets,
            weights: self.weights.clone(),
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, Family, GenConfig};

    fn sol(x: Vec<f64>, obj: f64) -> Solution {
        Solution {
            x,
            objective: obj,
            feasible: true,
            max_violation: 0.0,
        }
    }

    #[test]
    fn fully_determined_subproblem_collapses_to_one_point() {
        // every binary pre-fixed by bounds: each subproblem is the same
        // single point, so positives and negatives coincide
        let inst = MbqpInstance::new(
            "fixed",
            3,
            vec![(0, 1, 1.0)],
            vec![1.0, 0.0, -1.0],
            vec![],
            vec![],
            vec![0, 1, 2],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0],
        )
        .unwrap();
        let (s_plus, s_minus) =
            randomized_relax_search(&inst, 100, 100, 1, 0.9, 0.5, 42).unwrap();
        assert_eq!(s_plus.len(), 1);
        assert_eq!(s_minus.len(), 1);
        assert_eq!(s_plus[0].x, s_minus[0].x);
        assert_eq!(s_plus[0].x, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn desk_scale_cbqp_collection_contract() {
        let inst = generate(&GenConfig::new(Family::Cbqp, 50, 0.25, 7)).unwrap();
        let (s_plus, _) =
            randomized_relax_search(&inst, 2000, 50_000, 10, 0.9, 0.7, 3).unwrap();
        assert!(!s_plus.is_empty());
        assert!(s_plus.len() <= 10);
        for p in &s_plus {
            assert!(p.feasible);
            // cardinality row satisfied exactly: sum x = k = 13
            let total: f64 = p.x.iter().sum();
            assert_eq!(total, 13.0);
        }
        // dedup by exact equality
        for i in 0..s_plus.len() {
            for j in (i + 1)..s_plus.len() {
                assert_ne!(s_plus[i].x, s_plus[j].x);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_sets() {
        let inst = generate(&GenConfig::new(Family::Cqkp, 20, 0.3, 2)).unwrap();
        let a = randomized_relax_search(&inst, 500, 20_000, 5, 0.9, 0.6, 11).unwrap();
        let b = randomized_relax_search(&inst, 500, 20_000, 5, 0.9, 0.6, 11).unwrap();
        assert_eq!(a.0.len(), b.0.len());
        for (p, q) in a.0.iter().zip(&b.0) {
            assert_eq!(p.x, q.x);
        }
        for (p, q) in a.1.iter().zip(&b.1) {
            assert_eq!(p.x, q.x);
        }
    }

    #[test]
    fn growing_k_only_extends_s_plus() {
        let inst = generate(&GenConfig::new(Family::Qmkp, 20, 0.3, 6)).unwrap();
        let (small, _) = randomized_relax_search(&inst, 500, 20_000, 3, 0.9, 0.6, 4).unwrap();
        let (large, _) = randomized_relax_search(&inst, 500, 20_000, 8, 0.9, 0.6, 4).unwrap();
        assert!(large.len() >= small.len());
        for p in &small {
            assert!(large.iter().any(|q| q.x == p.x));
        }
    }

    #[test]
    fn ratio_validation() {
        let inst = generate(&GenConfig::new(Family::Cbqp, 10, 0.3, 1)).unwrap();
        assert!(randomized_relax_search(&inst, 100, 100, 1, 0.5, 0.7, 0).is_err());
        assert!(randomized_relax_search(&inst, 100, 100, 1, 1.1, 0.5, 0).is_err());
        assert!(randomized_relax_search(&inst, 100, 100, 0, 0.9, 0.5, 0).is_err());
        assert!(randomized_relax_search(&inst, 100, 100, 1, 0.9, 0.0, 0).is_err());
    }

    #[test]
    fn filter_negatives_strictness() {
        let plus = vec![sol(vec![0.0], 1.0), sol(vec![1.0], 2.0)];
        let minus = vec![sol(vec![0.0], 2.0), sol(vec![1.0], 3.0)];
        let kept = filter_negatives(&plus, &minus).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].objective, 3.0);

        assert!(filter_negatives(&plus, &[]).unwrap().is_empty());
        let all_better = vec![sol(vec![0.0], 0.5)];
        assert!(filter_negatives(&plus, &all_better).unwrap().is_empty());
        assert!(filter_negatives(&[], &minus).is_err());
    }

    #[test]
    fn u_set_cases() {
        let binary = vec![0, 1, 2];
        let plus = sol(vec![1.0, 0.0, 1.0], 0.0);
        let neg = sol(vec![1.0, 1.0, 0.0], 5.0);
        assert_eq!(compute_u_set(&plus, &[neg], &binary), vec![0]);

        // the positive itself as the only negative: everything agrees
        let same = sol(vec![1.0, 0.0, 1.0], 5.0);
        assert_eq!(compute_u_set(&plus, &[same], &binary), vec![0, 1, 2]);

        // two negatives that disagree with each other at every index
        let n1 = sol(vec![0.0, 1.0, 0.0], 5.0);
        let n2 = sol(vec![1.0, 0.0, 1.0], 6.0);
        assert!(compute_u_set(&plus, &[n1, n2], &binary).is_empty());
    }

    #[test]
    fn u_set_empty_negatives_gives_all_binaries() {
        let binary = vec![0, 1];
        let plus = sol(vec![1.0, 0.0], 0.0);
        assert_eq!(compute_u_set(&plus, &[], &binary), vec![0, 1]);
    }

    #[test]
    fn stats_cases() {
        let mk_set = |u_len: usize, n_bin: usize| SampleSet {
            instance_name: "s".into(),
            binary_count: n_bin,
            positives: vec![sol(vec![0.0; n_bin], -1.0)],
            negatives: vec![],
            u_sets: vec![(0..u_len).collect()],
            weights: vec![1.0],
        };
        // single positive whose U covers all binaries
        let s = dataset_stats(&[mk_set(4, 4)]).unwrap();
        assert_eq!(s.frac_u, 1.0);
        assert_eq!(s.mean_positive_count, 1.0);
        assert_eq!(s.mean_best_objective, -1.0);
        // |U| = |B| / 2
        let s = dataset_stats(&[mk_set(2, 4)]).unwrap();
        assert_eq!(s.frac_u, 0.5);
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn weights_sum_to_one_and_prefer_better() {
        let plus = vec![sol(vec![0.0], -10.0), sol(vec![1.0], 5.0)];
        let minus = vec![sol(vec![1.0], 20.0)];
        let w = training_weights(&plus, &minus).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn assemble_and_round_trip() {
        let inst = generate(&GenConfig::new(Family::Cbqp, 16, 0.3, 9)).unwrap();
        let set = collect(&inst, 500, 100_000, 6, 0.9, 0.5, 17).unwrap();
        assert_eq!(set.positives.len(), set.u_sets.len());
        assert_eq!(set.positives.len(), set.weights.len());
        assert!((set.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // filter contract: strict separation
        let worst_pos = set
            .positives
            .iter()
            .map(|p| p.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        for neg in &set.negatives {
            assert!(neg.objective > worst_pos);
        }
        // U-set contract against S- and the positive itself
        for (p, u) in set.positives.iter().zip(&set.u_sets) {
            for &d in u {
                for neg in &set.negatives {
                    assert_eq!(neg.x[d], p.x[d]);
                }
            }
        }

        let file = DatasetFile::new(inst, &set);
        let s = file.to_json_string().unwrap();
        let back = DatasetFile::from_json_str(&s).unwrap();
        let set2 = back.sample_set().unwrap();
        assert_eq!(set2.positives.len(), set.positives.len());
        assert_eq!(set2.u_sets, set.u_sets);
        assert_eq!(s, back.to_json_string().unwrap());
    }
}
