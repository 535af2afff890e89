//! Tripartite graph encoding of an instance.
//!
//! Three node families: constraints (C), variables (V), and quadratic terms
//! (Q). A C-V edge carries the coefficient `A_ij` of a variable appearing in
//! a row; a Q-V edge links a quadratic term to each participating variable,
//! so off-diagonal terms have two edges and diagonal terms one. Features are
//! normalized per instance by max-abs (with a 0 -> 1 guard) so every feature
//! stays in [-10, 10] regardless of coefficient scale.

use crate::instance::MbqpInstance;
use serde::{Deserialize, Serialize};

pub const F_V: usize = 6;
pub const F_C: usize = 5;
pub const F_Q: usize = 5;

/// Featured tripartite graph. Feature matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripartiteGraph {
    pub n_v: usize,
    pub n_c: usize,
    pub n_q: usize,
    pub v_feats: Vec<f64>,
    pub c_feats: Vec<f64>,
    pub q_feats: Vec<f64>,
    /// (constraint row, variable, A coefficient), sorted by (row, variable).
    pub cv_edges: Vec<(usize, usize, f64)>,
    /// (quadratic term, variable), sorted by construction.
    pub qv_edges: Vec<(usize, usize)>,
    pub binary_mask: Vec<bool>,
}

fn max_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let m = values.fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Builds the featured graph. Q nodes follow the stored order of H entries
/// (upper triangle, sorted); C nodes follow row order.
pub fn build_tripartite(inst: &MbqpInstance) -> TripartiteGraph {
    let n = inst.n;
    let m = inst.m();
    let n_q = inst.h.len();

    let c_norm = max_abs(inst.c.iter());
    let b_norm = max_abs(inst.b.iter());
    let a_norm = max_abs(inst.a.iter().map(|(_, _, v)| v));
    let h_norm = max_abs(inst.h.iter().map(|(_, _, v)| v));

    // per-variable degrees
    let mut a_degree = vec![0usize; n];
    for &(_, j, _) in &inst.a {
        a_degree[j] += 1;
    }
    let mut q_degree = vec![0usize; n]; // stored H entries touching the variable
    for &(i, j, _) in &inst.h {
        q_degree[i] += 1;
        if i != j {
            q_degree[j] += 1;
        }
    }

    let binary_mask: Vec<bool> = {
        let mut mask = vec![false; n];
        for &j in &inst.binary {
            mask[j] = true;
        }
        mask
    };

    let mut v_feats = Vec::with_capacity(n * F_V);
    for j in 0..n {
        v_feats.push(inst.c[j] / c_norm);
        v_feats.push(if m > 0 { a_degree[j] as f64 / m as f64 } else { 0.0 });
        v_feats.push(if n_q > 0 { q_degree[j] as f64 / n_q as f64 } else { 0.0 });
        v_feats.push(if binary_mask[j] { 1.0 } else { 0.0 });
        v_feats.push(inst.lb[j].clamp(-10.0, 10.0));
        v_feats.push(inst.ub[j].clamp(-10.0, 10.0));
    }

    // per-row aggregates
    let mut row_degree = vec![0usize; m];
    let mut row_abs_sum = vec![0.0f64; m];
    let mut row_abs_max = vec![0.0f64; m];
    for &(r, _, v) in &inst.a {
        row_degree[r] += 1;
        row_abs_sum[r] += v.abs();
        row_abs_max[r] = row_abs_max[r].max(v.abs());
    }
    let mut c_feats = Vec::with_capacity(m * F_C);
    for r in 0..m {
        let deg = row_degree[r] as f64;
        c_feats.push(inst.b[r] / b_norm);
        c_feats.push(deg / n as f64);
        c_feats.push(if row_degree[r] > 0 { row_abs_sum[r] / deg / a_norm } else { 0.0 });
        c_feats.push(row_abs_max[r] / a_norm);
        c_feats.push(1.0); // sense flag: all rows are <=
    }

    let mut q_feats = Vec::with_capacity(n_q * F_Q);
    let mut qv_edges = Vec::new();
    for (q, &(i, j, v)) in inst.h.iter().enumerate() {
        q_feats.push(v / h_norm);
        q_feats.push(v.abs() / h_norm);
        q_feats.push(v.signum());
        q_feats.push(if i == j { 1.0 } else { 0.0 });
        q_feats.push((q_degree[i] + q_degree[j]) as f64 / (2.0 * n as f64));
        qv_edges.push((q, i));
        if i != j {
            qv_edges.push((q, j));
        }
    }

    let cv_edges: Vec<(usize, usize, f64)> = inst.a.clone();

    TripartiteGraph {
        n_v: n,
        n_c: m,
        n_q,
        v_feats,
        c_feats,
        q_feats,
        cv_edges,
        qv_edges,
        binary_mask,
    }
}

impl TripartiteGraph {
    pub fn v_row(&self, j: usize) -> &[f64] {
        &self.v_feats[j * F_V..(j + 1) * F_V]
    }

    pub fn c_row(&self, r: usize) -> &[f64] {
        &self.c_feats[r * F_C..(r + 1) * F_C]
    }

    pub fn q_row(&self, q: usize) -> &[f64] {
        &self.q_feats[q * F_Q..(q + 1) * F_Q]
    }

    /// Indices of the binary variable rows, in ascending order.
    pub fn binary_indices(&self) -> Vec<usize> {
        self.binary_mask
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| if b { Some(j) } else { None })
            .collect()
    }

    pub fn to_json_string(&self) -> crate::error::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, Family, GenConfig};

    #[test]
    fn node_and_edge_counts() {
        let inst = MbqpInstance::new(
            "g",
            4,
            vec![(0, 1, 1.0), (1, 2, -2.0), (3, 3, 0.5)],
            vec![1.0, 0.0, 0.0, -1.0],
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, -1.0), (1, 2, 1.0), (1, 3, 1.0)],
            vec![2.0, 1.0],
            vec![0, 1, 2, 3],
            vec![0.0; 4],
            vec![1.0; 4],
        )
        .unwrap();
        let g = build_tripartite(&inst);
        assert_eq!(g.n_q, 3);
        assert_eq!(g.cv_edges.len(), 5);
        // off-diagonal terms get two edges, diagonal one
        assert_eq!(g.qv_edges.len(), 5);
        for (q, &(i, j, _)) in inst.h.iter().enumerate() {
            let deg = g.qv_edges.iter().filter(|(qq, _)| *qq == q).count();
            assert_eq!(deg, if i == j { 1 } else { 2 });
        }
    }

    #[test]
    fn linear_instance_degenerates_to_bipartite() {
        let inst = MbqpInstance::new(
            "lin",
            3,
            vec![],
            vec![1.0, -1.0, 2.0],
            vec![(0, 0, 1.0), (0, 2, 1.0)],
            vec![1.0],
            vec![0, 1, 2],
            vec![0.0; 3],
            vec![1.0; 3],
        )
        .unwrap();
        let g = build_tripartite(&inst);
        assert_eq!(g.n_q, 0);
        assert!(g.qv_edges.is_empty());
        assert!(g.q_feats.is_empty());
        assert_eq!(g.cv_edges.len(), 2);
    }

    #[test]
    fn features_bounded_and_finite() {
        for family in [Family::Cbqp, Family::Qmkp, Family::Cqkp, Family::Wflop] {
            let inst = generate(&GenConfig::new(family, 30, 0.3, 5)).unwrap();
            let g = build_tripartite(&inst);
            for v in g.v_feats.iter().chain(&g.c_feats).chain(&g.q_feats) {
                assert!(v.is_finite());
                assert!(v.abs() <= 10.0, "feature {v} out of range");
            }
        }
    }

    #[test]
    fn variable_permutation_permutes_v_rows() {
        let inst = generate(&GenConfig::new(Family::Cqkp, 8, 0.5, 3)).unwrap();
        // rotate variables: sigma(j) = (j + 3) % 8
        let n = inst.n;
        let sigma = |j: usize| (j + 3) % n;
        let h: Vec<(usize, usize, f64)> =
            inst.h.iter().map(|&(i, j, v)| (sigma(i), sigma(j), v)).collect();
        let mut c = vec![0.0; n];
        let mut lb = vec![0.0; n];
        let mut ub = vec![0.0; n];
        for j in 0..n {
            c[sigma(j)] = inst.c[j];
            lb[sigma(j)] = inst.lb[j];
            ub[sigma(j)] = inst.ub[j];
        }
        let a: Vec<(usize, usize, f64)> =
            inst.a.iter().map(|&(r, j, v)| (r, sigma(j), v)).collect();
        let permuted = MbqpInstance::new(
            "perm",
            n,
            h,
            c,
            a,
            inst.b.clone(),
            inst.binary.iter().map(|&j| sigma(j)).collect(),
            lb,
            ub,
        )
        .unwrap();

        let g0 = build_tripartite(&inst);
        let g1 = build_tripartite(&permuted);
        for j in 0..n {
            assert_eq!(g0.v_row(j), g1.v_row(sigma(j)), "row {j}");
        }
        // constraint rows keep their identity
        assert_eq!(g0.c_feats, g1.c_feats);
        // every original Q node has a twin with identical features
        for (q, &(i, j, _)) in inst.h.iter().enumerate() {
            let (pi, pj) = (sigma(i).min(sigma(j)), sigma(i).max(sigma(j)));
            let q2 = permuted
                .h
                .iter()
                .position(|&(a, b, _)| (a, b) == (pi, pj))
                .unwrap();
            assert_eq!(g0.q_row(q), g1.q_row(q2));
        }
    }
}
