//! Mixed binary quadratic program data model.
//!
//! An instance is `min x^T H x + c^T x  s.t.  A x <= b`, with a subset of
//! variables restricted to {0,1} and box bounds on the rest. `H` is
//! symmetric and stored as an upper-triangle coordinate list: an off-diagonal
//! entry `(i, j, v)` stands for both `H_ij` and `H_ji`, so it contributes
//! `2 v x_i x_j` to the objective. Every row of `A` is a `<=` row; equality
//! constraints are stored as two opposed `<=` rows. Maximization problems are
//! negated into this form at generation time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute tolerance on row, bound, and integrality violations.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Sparse MBQP in minimization form. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbqpInstance {
    pub name: String,
    pub n: usize,
    /// Always "min"; kept in the wire format for clarity.
    pub sense: String,
    /// Upper-triangle coordinate list (i <= j), no explicit zeros.
    #[serde(rename = "H")]
    pub h: Vec<(usize, usize, f64)>,
    pub c: Vec<f64>,
    /// Row-major coordinate list, no explicit zeros.
    #[serde(rename = "A")]
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    /// Sorted indices of binary variables.
    pub binary: Vec<usize>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl MbqpInstance {
    /// Builds and validates an instance. Off-diagonal `H` entries given with
    /// i > j are normalized to the upper triangle; entries are sorted.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n: usize,
        h: Vec<(usize, usize, f64)>,
        c: Vec<f64>,
        a: Vec<(usize, usize, f64)>,
        b: Vec<f64>,
        binary: Vec<usize>,
        lb: Vec<f64>,
        ub: Vec<f64>,
    ) -> Result<Self> {
        let mut h: Vec<(usize, usize, f64)> = h
            .into_iter()
            .map(|(i, j, v)| if i > j { (j, i, v) } else { (i, j, v) })
            .collect();
        h.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut binary = binary;
        binary.sort_unstable();
        binary.dedup();
        let inst = Self {
            name: name.into(),
            n,
            sense: "min".to_string(),
            h,
            c,
            a: {
                let mut a = a;
                a.sort_unstable_by_key(|&(r, j, _)| (r, j));
                a
            },
            b,
            binary,
            lb,
            ub,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Number of linear rows.
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.n || self.lb.len() != self.n || self.ub.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "c/lb/ub must have length n={}",
                self.n
            )));
        }
        if self.sense != "min" {
            return Err(Error::InvalidInstance(format!(
                "sense must be \"min\", got {:?}",
                self.sense
            )));
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.h {
            if i > j || j >= self.n {
                return Err(Error::InvalidInstance(format!(
                    "H entry ({i},{j}) outside upper triangle of {}x{0}",
                    self.n
                )));
            }
            if v == 0.0 || !v.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "H entry ({i},{j}) has invalid value {v}"
                )));
            }
            if prev == Some((i, j)) {
                return Err(Error::InvalidInstance(format!("duplicate H entry ({i},{j})")));
            }
            prev = Some((i, j));
        }
        let m = self.m();
        let mut prev_a: Option<(usize, usize)> = None;
        for &(r, j, v) in &self.a {
            if r >= m || j >= self.n {
                return Err(Error::InvalidInstance(format!(
                    "A entry ({r},{j}) outside {m}x{}",
                    self.n
                )));
            }
            if v == 0.0 || !v.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "A entry ({r},{j}) has invalid value {v}"
                )));
            }
            if prev_a == Some((r, j)) {
                return Err(Error::InvalidInstance(format!("duplicate A entry ({r},{j})")));
            }
            prev_a = Some((r, j));
        }
        for w in self.binary.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInstance("binary indices not strictly sorted".into()));
            }
        }
        for &j in &self.binary {
            if j >= self.n {
                return Err(Error::InvalidInstance(format!("binary index {j} out of range")));
            }
            let fixed_binary = self.lb[j] == self.ub[j] && (self.lb[j] == 0.0 || self.lb[j] == 1.0);
            let free_binary = self.lb[j] == 0.0 && self.ub[j] == 1.0;
            if !free_binary && !fixed_binary {
                return Err(Error::InvalidInstance(format!(
                    "binary variable {j} must have bounds [0,1] or be fixed to 0/1, got [{},{}]",
                    self.lb[j], self.ub[j]
                )));
            }
        }
        for j in 0..self.n {
            if self.lb[j] > self.ub[j] {
                return Err(Error::InvalidInstance(format!(
                    "lb[{j}]={} exceeds ub[{j}]={}",
                    self.lb[j], self.ub[j]
                )));
            }
        }
        Ok(())
    }

    /// x^T H x + c^T x, counting each stored off-diagonal entry twice.
    pub fn evaluate_objective(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "x has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        let mut quad = 0.0;
        for &(i, j, v) in &self.h {
            if i == j {
                quad += v * x[i] * x[i];
            } else {
                quad += 2.0 * v * x[i] * x[j];
            }
        }
        let lin: f64 = self.c.iter().zip(x).map(|(ci, xi)| ci * xi).sum();
        Ok(quad + lin)
    }

    /// Maximum violation over linear rows, box bounds, and integrality of the
    /// binaries; feasible iff it does not exceed `tol`.
    pub fn check_feasibility(&self, x: &[f64], tol: f64) -> Result<(bool, f64)> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "x has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        if tol < 0.0 {
            return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
        }
        let mut worst = 0.0f64;
        let mut row_lhs = vec![0.0f64; self.m()];
        for &(r, j, v) in &self.a {
            row_lhs[r] += v * x[j];
        }
        for (r, lhs) in row_lhs.iter().enumerate() {
            worst = worst.max(lhs - self.b[r]);
        }
        for j in 0..self.n {
            worst = worst.max(self.lb[j] - x[j]).max(x[j] - self.ub[j]);
        }
        for &j in &self.binary {
            worst = worst.max(x[j].abs().min((x[j] - 1.0).abs()));
        }
        Ok((worst <= tol, worst))
    }

    /// Sub-MBQP with the given binaries fixed by bound tightening
    /// (lb = ub = value). Indexing is preserved, so objectives of the
    /// original and the sub-instance agree on every completion.
    pub fn fix_variables(&self, assignments: &[(usize, f64)]) -> Result<MbqpInstance> {
        let mut sub = self.clone();
        let mut seen = vec![false; self.n];
        for &(j, v) in assignments {
            if self.binary.binary_search(&j).is_err() {
                return Err(Error::NotBinary(j));
            }
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "fixing value for variable {j} must be 0 or 1, got {v}"
                )));
            }
            if seen[j] {
                return Err(Error::InvalidArgument(format!("variable {j} fixed twice")));
            }
            seen[j] = true;
            sub.lb[j] = v;
            sub.ub[j] = v;
        }
        Ok(sub)
    }

    /// True for binaries still free to branch on (not fixed by bounds).
    pub fn free_binaries(&self) -> Vec<usize> {
        self.binary
            .iter()
            .copied()
            .filter(|&j| self.lb[j] < self.ub[j])
            .collect()
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: MbqpInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// A full variable assignment with its cached objective and feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub feasible: bool,
    pub max_violation: f64,
}

impl Solution {
    /// Evaluates `x` against the instance at the given tolerance.
    pub fn evaluate(inst: &MbqpInstance, x: Vec<f64>, tol: f64) -> Result<Self> {
        let objective = inst.evaluate_objective(&x)?;
        let (feasible, max_violation) = inst.check_feasibility(&x, tol)?;
        Ok(Self {
            x,
            objective,
            feasible,
            max_violation,
        })
    }
}

/// Softmax of negated objectives over a set of feasible solutions:
/// `w_k = exp(-obj_k) / sum_l exp(-obj_l)`, computed with min-shift
/// stabilization (subtracting the minimum objective leaves the weights
/// unchanged). Errors on an empty list or any infeasible entry, whose
/// energy would be infinite.
pub fn energy_weights(solutions: &[Solution]) -> Result<Vec<f64>> {
    if solutions.is_empty() {
        return Err(Error::InvalidArgument("energy_weights of empty set".into()));
    }
    if let Some(bad) = solutions.iter().position(|s| !s.feasible) {
        return Err(Error::Infeasible(format!(
            "solution {bad} is infeasible; filter before weighting"
        )));
    }
    let min_obj = solutions
        .iter()
        .map(|s| s.objective)
        .fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = solutions
        .iter()
        .map(|s| (-(s.objective - min_obj)).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
