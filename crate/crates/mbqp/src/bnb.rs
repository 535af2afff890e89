//! Depth-first branch-and-bound over binary variables, plus an exhaustive
//! enumeration oracle.
//!
//! The node bound is an interval bound on the unconstrained objective: fixed
//! terms contribute exactly, every still-free pair contributes
//! `min(0, 2 H_ij)`, and every free variable contributes
//! `min(0, H_jj) + min(0, lin_j)` where `lin_j` folds the cross terms against
//! already-fixed variables into the linear coefficient. Constraints are
//! relaxed in the bound; a separate test prunes nodes whose rows cannot be
//! satisfied by any completion. Search order is fixed (root-relaxation
//! fractionality, ties by index; preferred child first), and "time" is the
//! node counter, so identical inputs give identical results.

use crate::error::{Error, Result};
use crate::instance::{MbqpInstance, Solution, FEASIBILITY_TOL};
use crate::relaxation::{fractionality, solve_relaxation};
use serde::{Deserialize, Serialize};

/// Iteration budget for the root relaxation that seeds branching scores and
/// child value order.
const ROOT_RELAX_BUDGET: usize = 1000;

/// Search outcome. `trajectory` records `(nodes_explored, objective)` at
/// every strict incumbent improvement; `worst` is the worst-objective
/// feasible point seen anywhere in the search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub best: Option<Solution>,
    pub worst: Option<Solution>,
    pub trajectory: Vec<(u64, f64)>,
    pub nodes_explored: u64,
    pub proven_optimal: bool,
}

struct Dfs<'a> {
    inst: &'a MbqpInstance,
    order: Vec<usize>,
    prefer: Vec<f64>,
    budget: u64,
    nodes: u64,
    truncated: bool,
    x: Vec<f64>,
    fixed: Vec<bool>,
    best: Option<Solution>,
    worst: Option<Solution>,
    trajectory: Vec<(u64, f64)>,
}

/// Interval lower bound on the objective over completions of the partial
/// assignment, with constraints relaxed. Valid for arbitrary fixed values and
/// binary free variables.
fn interval_bound(inst: &MbqpInstance, fixed: &[bool], x: &[f64]) -> f64 {
    let n = inst.n;
    let mut bound = 0.0;
    let mut lin: Vec<f64> = inst.c.clone();
    for j in 0..n {
        if fixed[j] {
            bound += inst.c[j] * x[j];
        }
    }
    for &(i, j, v) in &inst.h {
        match (fixed[i], fixed[j]) {
            (true, true) => {
                bound += if i == j { v * x[i] * x[i] } else { 2.0 * v * x[i] * x[j] };
            }
            (true, false) => lin[j] += 2.0 * v * x[i],
            (false, true) => lin[i] += 2.0 * v * x[j],
            (false, false) => {
                if i == j {
                    // binary: x^2 = x
                    bound += v.min(0.0);
                } else {
                    bound += (2.0 * v).min(0.0);
                }
            }
        }
    }
    for j in 0..n {
        if !fixed[j] {
            bound += lin[j].min(0.0);
        }
    }
    bound
}

/// True when some row cannot be satisfied by any completion: even with every
/// free binary set favorably, the least achievable left side exceeds b + tol.
fn rows_unsatisfiable(inst: &MbqpInstance, fixed: &[bool], x: &[f64], tol: f64) -> bool {
    let mut lhs = vec![0.0f64; inst.m()];
    for &(r, j, v) in &inst.a {
        if fixed[j] {
            lhs[r] += v * x[j];
        } else {
            lhs[r] += v.min(0.0);
        }
    }
    lhs.iter().zip(&inst.b).any(|(&l, &b)| l > b + tol)
}

impl<'a> Dfs<'a> {
    /// Returns false when the node budget ran out and the search must stop.
    fn dive(&mut self, depth: usize) -> bool {
        if self.nodes >= self.budget {
            self.truncated = true;
            return false;
        }
        self.nodes += 1;

        if let Some(best) = &self.best {
            if interval_bound(self.inst, &self.fixed, &self.x) >= best.objective {
                return true;
            }
        }
        if rows_unsatisfiable(self.inst, &self.fixed, &self.x, FEASIBILITY_TOL) {
            return true;
        }

        if depth == self.order.len() {
            let sol = Solution::evaluate(self.inst, self.x.clone(), FEASIBILITY_TOL)
                .expect("dimensions fixed during search");
            if sol.feasible {
                if self.worst.as_ref().map_or(true, |w| sol.objective > w.objective) {
                    self.worst = Some(sol.clone());
                }
                if self.best.as_ref().map_or(true, |b| sol.objective < b.objective) {
                    self.trajectory.push((self.nodes, sol.objective));
                    self.best = Some(sol);
                }
            }
            return true;
        }

        let j = self.order[depth];
        let first = self.prefer[j];
        for value in [first, 1.0 - first] {
            self.fixed[j] = true;
            self.x[j] = value;
            let keep_going = self.dive(depth + 1);
            self.fixed[j] = false;
            self.x[j] = 0.0;
            if !keep_going {
                return false;
            }
        }
        true
    }
}

/// Depth-first branch-and-bound. Every unfixed variable must be binary.
/// Exhausting the tree within the budget proves optimality; exhausting the
/// budget returns the incumbents found so far.
pub fn solve(inst: &MbqpInstance, node_budget: u64) -> Result<SolveResult> {
    if node_budget == 0 {
        return Err(Error::InvalidArgument("node budget must be >= 1".into()));
    }
    for j in 0..inst.n {
        if inst.lb[j] < inst.ub[j] && inst.binary.binary_search(&j).is_err() {
            return Err(Error::NotBinary(j));
        }
    }
    let free = inst.free_binaries();

    // Branching order: most fractional root-relaxation value first, ties by
    // ascending index. Child order dives toward the rounded relaxation.
    let relax = solve_relaxation(inst, ROOT_RELAX_BUDGET, FEASIBILITY_TOL)?;
    let frac = fractionality(&relax.x_bar);
    let mut order = free.clone();
    order.sort_by(|&p, &q| {
        frac[q].partial_cmp(&frac[p]).unwrap().then(p.cmp(&q))
    });
    let prefer: Vec<f64> = relax
        .x_bar
        .iter()
        .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect();

    let mut x = vec![0.0f64; inst.n];
    let mut fixed = vec![false; inst.n];
    for j in 0..inst.n {
        if inst.lb[j] == inst.ub[j] {
            fixed[j] = true;
            x[j] = inst.lb[j];
        }
    }

    let mut dfs = Dfs {
        inst,
        order,
        prefer,
        budget: node_budget,
        nodes: 0,
        truncated: false,
        x,
        fixed,
        best: None,
        worst: None,
        trajectory: Vec::new(),
    };
    dfs.dive(0);

    let proven_optimal = !dfs.truncated && dfs.best.is_some();
    Ok(SolveResult {
        best: dfs.best,
        worst: dfs.worst,
        trajectory: dfs.trajectory,
        nodes_explored: dfs.nodes,
        proven_optimal,
    })
}

/// Enumerates every assignment of the free binaries (at most 20), filters by
/// feasibility, and returns the argmin and argmax objective. Ties keep the
/// first point in ascending bit order. Errors when nothing is feasible.
pub fn enumerate_exact(inst: &MbqpInstance) -> Result<(Solution, Solution)> {
    for j in 0..inst.n {
        if inst.lb[j] < inst.ub[j] && inst.binary.binary_search(&j).is_err() {
            return Err(Error::NotBinary(j));
        }
    }
    let free = inst.free_binaries();
    if free.len() > 20 {
        return Err(Error::InvalidArgument(format!(
            "{} free binaries exceed the enumeration limit of 20",
            free.len()
        )));
    }
    let mut x = vec![0.0f64; inst.n];
    for j in 0..inst.n {
        if inst.lb[j] == inst.ub[j] {
            x[j] = inst.lb[j];
        }
    }
    let mut best: Option<Solution> = None;
    let mut worst: Option<Solution> = None;
    for bits in 0u64..(1u64 << free.len()) {
        for (pos, &j) in free.iter().enumerate() {
            x[j] = ((bits >> pos) & 1) as f64;
        }
        let sol = Solution::evaluate(inst, x.clone(), FEASIBILITY_TOL)?;
        if !sol.feasible {
            continue;
        }
        if best.as_ref().map_or(true, |b| sol.objective < b.objective) {
            best = Some(sol.clone());
        }
        if worst.as_ref().map_or(true, |w| sol.objective > w.objective) {
            worst = Some(sol);
        }
    }
    match (best, worst) {
        (Some(b), Some(w)) => Ok((b, w)),
        _ => Err(Error::Infeasible(format!(
            "no feasible assignment of {} exists",
            inst.name
        ))),
    }
}
