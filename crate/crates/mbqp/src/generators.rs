//! Seedable generators for the four benchmark families.
//!
//! All families emit pure-binary minimization instances. Coefficients are
//! drawn from integer grids through the crate's counter-based generator, so
//! identical configs serialize byte-identically on every platform. Families
//! that are natively maximization (QMKP, CQKP, WFLOP power terms) are negated
//! into minimization at generation time.
//!
//! Draw order is fixed per family and documented inline; changing it is a
//! format-breaking change.

use crate::error::{Error, Result};
use crate::instance::MbqpInstance;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// Benchmark family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Cardinality-constrained binary quadratic program.
    Cbqp,
    /// Quadratic multidimensional knapsack.
    Qmkp,
    /// Cardinality-constrained quadratic knapsack.
    Cqkp,
    /// Wind-farm layout with synthetic wake interactions.
    Wflop,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbqp" => Ok(Family::Cbqp),
            "qmkp" => Ok(Family::Qmkp),
            "cqkp" => Ok(Family::Cqkp),
            "wflop" => Ok(Family::Wflop),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Cbqp => "cbqp",
            Family::Qmkp => "qmkp",
            Family::Cqkp => "cqkp",
            Family::Wflop => "wflop",
        }
    }
}

/// Per-family knobs. Unset fields fall back to the documented defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FamilyParams {
    /// Cardinality bound k (CBQP equality, CQKP upper bound). Default ceil(n/4).
    pub k: Option<usize>,
    /// Knapsack dimension for QMKP. Default 5.
    pub m: Option<usize>,
    /// WFLOP grid width/height; must multiply to n. Default: squarest factor
    /// pair of n with width <= height.
    pub grid_w: Option<usize>,
    pub grid_h: Option<usize>,
    /// WFLOP minimum turbine separation radius (grid units). Default 1.5.
    pub separation_radius: Option<f64>,
    /// WFLOP synthetic wind scenario count. Default 4.
    pub scenario_count: Option<usize>,
    /// WFLOP cap on total turbines. Default max(1, n/5).
    pub max_turbines: Option<usize>,
}

/// Generator configuration shared by all families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub family: Family,
    pub n: usize,
    /// Target fraction of nonzero off-diagonal upper-triangle H entries.
    pub density: f64,
    pub seed: u64,
    #[serde(default)]
    pub params: FamilyParams,
}

impl GenConfig {
    pub fn new(family: Family, n: usize, density: f64, seed: u64) -> Self {
        Self {
            family,
            n,
            density,
            seed,
            params: FamilyParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument("n must be >= 2".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "density must be in (0, 1], got {}",
                self.density
            )));
        }
        Ok(())
    }

    fn default_k(&self) -> usize {
        self.params.k.unwrap_or(self.n.div_ceil(4))
    }
}

/// Dispatch on `cfg.family`.
pub fn generate(cfg: &GenConfig) -> Result<MbqpInstance> {
    match cfg.family {
        Family::Cbqp => gen_cbqp(cfg),
        Family::Qmkp => gen_qmkp(cfg),
        Family::Cqkp => gen_cqkp(cfg),
        Family::Wflop => gen_wflop(cfg),
    }
}

fn instance_name(cfg: &GenConfig) -> String {
    format!("{}_n{}_s{}", cfg.family.as_str(), cfg.n, cfg.seed)
}

/// Random symmetric objective on an integer grid. Draw order: off-diagonal
/// pairs (i < j) lexicographic, then diagonal, then c.
fn random_quadratic(
    rng: &mut SplitMix64,
    n: usize,
    density: f64,
    value_lo: i64,
    value_hi: i64,
) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let mut h = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.bernoulli(density) {
                h.push((i, j, rng.nonzero_int_in(value_lo, value_hi) as f64));
            }
        }
    }
    for j in 0..n {
        if rng.bernoulli(density) {
            h.push((j, j, rng.nonzero_int_in(value_lo, value_hi) as f64));
        }
    }
    let c: Vec<f64> = (0..n).map(|_| rng.int_in(value_lo, value_hi) as f64).collect();
    (h, c)
}

/// One knapsack row with integer weights in [1, 50] and a capacity drawn
/// uniformly from [ceil(S/4), floor(3S/4)] where S is the weight sum, so the
/// zero vector is feasible and the all-ones vector is not.
fn knapsack_row(rng: &mut SplitMix64, n: usize) -> (Vec<f64>, f64) {
    let weights: Vec<f64> = (0..n).map(|_| rng.int_in(1, 50) as f64).collect();
    let total: f64 = weights.iter().sum();
    let lo = (total / 4.0).ceil() as i64;
    let hi = (3.0 * total / 4.0).floor() as i64;
    let cap = rng.int_in(lo, hi.max(lo)) as f64;
    (weights, cap)
}

/// Cardinality-constrained BQP: free-sign quadratic objective plus one
/// equality row `sum x = k`, stored as two opposed `<=` rows.
pub fn gen_cbqp(cfg: &GenConfig) -> Result<MbqpInstance> {
    cfg.validate()?;
    let n = cfg.n;
    let k = cfg.default_k();
    if k > n {
        return Err(Error::InvalidArgument(format!("k={k} exceeds n={n}")));
    }
    let mut rng = SplitMix64::derive(cfg.seed, 0x0b);
    let (h, c) = random_quadratic(&mut rng, n, cfg.density, -100, 100);
    let mut a = Vec::with_capacity(2 * n);
    for j in 0..n {
        a.push((0, j, 1.0)); // sum x <= k
    }
    for j in 0..n {
        a.push((1, j, -1.0)); // -sum x <= -k
    }
    MbqpInstance::new(
        instance_name(cfg),
        n,
        h,
        c,
        a,
        vec![k as f64, -(k as f64)],
        (0..n).collect(),
        vec![0.0; n],
        vec![1.0; n],
    )
}

/// Quadratic multidimensional knapsack: nonnegative pair/linear profits
/// (negated into minimization) under m knapsack rows.
pub fn gen_qmkp(cfg: &GenConfig) -> Result<MbqpInstance> {
    cfg.validate()?;
    let n = cfg.n;
    let m = cfg.params.m.unwrap_or(5);
    if m == 0 {
        return Err(Error::InvalidArgument("knapsack dimension m must be >= 1".into()));
    }
    let mut rng = SplitMix64::derive(cfg.seed, 0x9c);
    // profits first (off-diag pairs, diagonal, linear), then the m rows
    let mut h = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.bernoulli(cfg.density) {
                h.push((i, j, -(rng.int_in(1, 100) as f64)));
            }
        }
    }
    for j in 0..n {
        if rng.bernoulli(cfg.density) {
            h.push((j, j, -(rng.int_in(1, 100) as f64)));
        }
    }
    let c: Vec<f64> = (0..n).map(|_| -(rng.int_in(1, 100) as f64)).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for row in 0..m {
        let (weights, cap) = knapsack_row(&mut rng, n);
        for (j, w) in weights.iter().enumerate() {
            a.push((row, j, *w));
        }
        b.push(cap);
    }
    MbqpInstance::new(
        instance_name(cfg),
        n,
        h,
        c,
        a,
        b,
        (0..n).collect(),
        vec![0.0; n],
        vec![1.0; n],
    )
}

/// Cardinality-constrained quadratic knapsack: nonnegative profits (negated),
/// one knapsack row, and one cardinality row `sum x <= k`.
pub fn gen_cqkp(cfg: &GenConfig) -> Result<MbqpInstance> {
    cfg.validate()?;
    let n = cfg.n;
    let k = cfg.default_k();
    if k > n {
        return Err(Error::InvalidArgument(format!("k={k} exceeds n={n}")));
    }
    let mut rng = SplitMix64::derive(cfg.seed, 0xc9);
    let mut h = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.bernoulli(cfg.density) {
                h.push((i, j, -(rng.int_in(1, 100) as f64)));
            }
        }
    }
    for j in 0..n {
        if rng.bernoulli(cfg.density) {
            h.push((j, j, -(rng.int_in(1, 100) as f64)));
        }
    }
    let c: Vec<f64> = (0..n).map(|_| -(rng.int_in(1, 100) as f64)).collect();
    let (weights, cap) = knapsack_row(&mut rng, n);
    let mut a = Vec::new();
    for (j, w) in weights.iter().enumerate() {
        a.push((0, j, *w));
    }
    for j in 0..n {
        a.push((1, j, 1.0));
    }
    MbqpInstance::new(
        instance_name(cfg),
        n,
        h,
        c,
        a,
        vec![cap, k as f64],
        (0..n).collect(),
        vec![0.0; n],
        vec![1.0; n],
    )
}

/// Squarest factor pair (w, h) of n with w <= h.
fn default_grid(n: usize) -> (usize, usize) {
    let mut w = (n as f64).sqrt().floor() as usize;
    while w > 1 && n % w != 0 {
        w -= 1;
    }
    let w = w.max(1);
    (w, n / w)
}

/// Smallest radius whose closed disc captures at least `density` of all cell
/// pairs, found by exact pair counting on the grid.
fn wake_radius_for_density(grid_w: usize, grid_h: usize, density: f64) -> f64 {
    let n = grid_w * grid_h;
    let cell = |idx: usize| ((idx % grid_w) as f64, (idx / grid_w) as f64);
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let (xi, yi) = cell(i);
            let (xj, yj) = cell(j);
            dists.push(((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt());
        }
    }
    dists.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let want = ((density * dists.len() as f64).ceil() as usize).clamp(1, dists.len());
    dists[want - 1]
}

/// Wind-farm layout: per-cell power (negated) plus pairwise wake penalties
/// that decay linearly inside a wake radius and scale with the alignment of
/// the pair axis against each synthetic wind scenario. Cells closer than the
/// separation radius exclude each other, and one row caps the turbine count.
pub fn gen_wflop(cfg: &GenConfig) -> Result<MbqpInstance> {
    cfg.validate()?;
    let n = cfg.n;
    let (gw, gh) = match (cfg.params.grid_w, cfg.params.grid_h) {
        (Some(w), Some(h)) => (w, h),
        (None, None) => default_grid(n),
        _ => {
            return Err(Error::InvalidArgument(
                "grid_w and grid_h must be given together".into(),
            ))
        }
    };
    if gw * gh != n {
        return Err(Error::InvalidArgument(format!(
            "grid {gw}x{gh} does not cover n={n} cells"
        )));
    }
    let sep_radius = cfg.params.separation_radius.unwrap_or(1.5);
    let scenarios = cfg.params.scenario_count.unwrap_or(4).max(1);
    let max_turbines = cfg.params.max_turbines.unwrap_or((n / 5).max(1));
    let wake_radius = wake_radius_for_density(gw, gh, cfg.density);

    let mut rng = SplitMix64::derive(cfg.seed, 0x3f);
    // draw order: per-cell power, then per-scenario (direction ints, weight int)
    let power: Vec<f64> = (0..n).map(|_| rng.int_in(50, 100) as f64).collect();
    let mut dirs: Vec<(f64, f64)> = Vec::with_capacity(scenarios);
    let mut weights_raw: Vec<f64> = Vec::with_capacity(scenarios);
    for _ in 0..scenarios {
        let (mut ax, mut ay) = (0i64, 0i64);
        while ax == 0 && ay == 0 {
            ax = rng.int_in(-3, 3);
            ay = rng.int_in(-3, 3);
        }
        let norm = ((ax * ax + ay * ay) as f64).sqrt();
        dirs.push((ax as f64 / norm, ay as f64 / norm));
        weights_raw.push(rng.int_in(1, 10) as f64);
    }
    let weight_sum: f64 = weights_raw.iter().sum();
    let scen_w: Vec<f64> = weights_raw.iter().map(|w| w / weight_sum).collect();

    let cell = |idx: usize| ((idx % gw) as f64, (idx / gw) as f64);
    let mut h: Vec<(usize, usize, f64)> = Vec::new();
    let mut a: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let (xi, yi) = cell(i);
            let (xj, yj) = cell(j);
            let (dx, dy) = (xj - xi, yj - yi);
            let dist = (dx * dx + dy * dy).sqrt();
            if dist < sep_radius {
                a.push((row, i, 1.0));
                a.push((row, j, 1.0));
                b.push(1.0);
                row += 1;
            }
            let decay = 1.0 - dist / wake_radius;
            if decay > 0.0 {
                let mut wake = 0.0;
                for (s, (ux, uy)) in dirs.iter().enumerate() {
                    let align = (dx * ux + dy * uy).abs() / dist;
                    wake += scen_w[s] * decay * align;
                }
                // scale to the power grid and halve: stored H_ij counts twice
                let h_val = 0.5 * 100.0 * wake;
                if h_val > 0.0 {
                    h.push((i, j, h_val));
                }
            }
        }
    }
    for j in 0..n {
        a.push((row, j, 1.0));
    }
    b.push(max_turbines as f64);

    let c: Vec<f64> = power.iter().map(|p| -p).collect();
    MbqpInstance::new(
        instance_name(cfg),
        n,
        h,
        c,
        a,
        b,
        (0..n).collect(),
        vec![0.0; n],
        vec![1.0; n],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::FEASIBILITY_TOL;

    fn cfg(family: Family, n: usize, seed: u64) -> GenConfig {
        GenConfig::new(family, n, 0.25, seed)
    }

    #[test]
    fn cbqp_determinism() {
        let a = gen_cbqp(&cfg(Family::Cbqp, 50, 7)).unwrap();
        let b = gen_cbqp(&cfg(Family::Cbqp, 50, 7)).unwrap();
        assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
        let c = gen_cbqp(&cfg(Family::Cbqp, 50, 8)).unwrap();
        assert_ne!(a.to_json_string().unwrap(), c.to_json_string().unwrap());
    }

    #[test]
    fn cbqp_density_near_target() {
        let inst = gen_cbqp(&cfg(Family::Cbqp, 50, 7)).unwrap();
        let off_diag = inst.h.iter().filter(|(i, j, _)| i != j).count() as f64;
        let pairs = (50.0 * 49.0) / 2.0;
        let realized = off_diag / pairs;
        assert!(
            (realized - 0.25).abs() / 0.25 <= 0.2,
            "realized off-diagonal density {realized} not within 20% of 0.25"
        );
    }

    #[test]
    fn cbqp_cardinality_enforced() {
        let inst = gen_cbqp(&cfg(Family::Cbqp, 10, 3)).unwrap();
        let k = 3; // ceil(10/4)
        let mut x = vec![0.0; 10];
        for slot in x.iter_mut().take(k - 1) {
            *slot = 1.0;
        }
        let (ok, v) = inst.check_feasibility(&x, FEASIBILITY_TOL).unwrap();
        assert!(!ok);
        assert_eq!(v, 1.0); // -sum x <= -k violated by exactly 1
        x[k - 1] = 1.0;
        let (ok, _) = inst.check_feasibility(&x, FEASIBILITY_TOL).unwrap();
        assert!(ok);
    }

    #[test]
    fn cbqp_k_too_large_errors() {
        let mut c = cfg(Family::Cbqp, 10, 3);
        c.params.k = Some(11);
        assert!(gen_cbqp(&c).is_err());
    }

    #[test]
    fn qmkp_zero_feasible_ones_not() {
        let inst = gen_qmkp(&cfg(Family::Qmkp, 30, 5)).unwrap();
        let zeros = vec![0.0; 30];
        let ones = vec![1.0; 30];
        assert!(inst.check_feasibility(&zeros, FEASIBILITY_TOL).unwrap().0);
        assert!(!inst.check_feasibility(&ones, FEASIBILITY_TOL).unwrap().0);
        // profits all negative in min form
        assert!(inst.h.iter().all(|(_, _, v)| *v < 0.0));
        assert!(inst.c.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn qmkp_determinism() {
        let a = gen_qmkp(&cfg(Family::Qmkp, 30, 5)).unwrap();
        let b = gen_qmkp(&cfg(Family::Qmkp, 30, 5)).unwrap();
        assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
    }

    #[test]
    fn cqkp_shape_and_feasibility() {
        let inst = gen_cqkp(&cfg(Family::Cqkp, 24, 11)).unwrap();
        assert_eq!(inst.m(), 2); // knapsack + cardinality
        let zeros = vec![0.0; 24];
        assert!(inst.check_feasibility(&zeros, FEASIBILITY_TOL).unwrap().0);
        let a = gen_cqkp(&cfg(Family::Cqkp, 24, 11)).unwrap();
        assert_eq!(a.to_json_string().unwrap(), inst.to_json_string().unwrap());
    }

    #[test]
    fn cqkp_density_near_target() {
        let inst = gen_cqkp(&cfg(Family::Cqkp, 50, 2)).unwrap();
        let off_diag = inst.h.iter().filter(|(i, j, _)| i != j).count() as f64;
        let realized = off_diag / ((50.0 * 49.0) / 2.0);
        assert!((realized - 0.25).abs() / 0.25 <= 0.2);
    }

    #[test]
    fn wflop_separation_and_wake_signs() {
        let c = cfg(Family::Wflop, 50, 9);
        let inst = gen_wflop(&c).unwrap();
        // adjacent cells: 0 and 1 share an edge on the 5x10 grid
        let mut x = vec![0.0; 50];
        x[0] = 1.0;
        x[1] = 1.0;
        assert!(!inst.check_feasibility(&x, FEASIBILITY_TOL).unwrap().0);
        assert!(inst.h.iter().all(|(_, _, v)| *v > 0.0));
        let zeros = vec![0.0; 50];
        assert!(inst.check_feasibility(&zeros, FEASIBILITY_TOL).unwrap().0);
    }

    #[test]
    fn wflop_single_turbine_matches_power_argmax() {
        let c = cfg(Family::Wflop, 20, 4);
        let inst = gen_wflop(&c).unwrap();
        // enumerate all single placements; the best must be the max-power cell
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..20 {
            let mut x = vec![0.0; 20];
            x[j] = 1.0;
            let (ok, _) = inst.check_feasibility(&x, FEASIBILITY_TOL).unwrap();
            assert!(ok);
            let obj = inst.evaluate_objective(&x).unwrap();
            if obj < best {
                best = obj;
                best_j = j;
            }
        }
        let max_power_j = (0..20)
            .max_by(|&p, &q| inst.c[p].abs().partial_cmp(&inst.c[q].abs()).unwrap())
            .unwrap();
        assert_eq!(best_j, max_power_j);
        assert_eq!(best, inst.c[max_power_j]);
    }

    #[test]
    fn wflop_grid_must_cover_n() {
        let mut c = cfg(Family::Wflop, 50, 9);
        c.params.grid_w = Some(7);
        c.params.grid_h = Some(7);
        assert!(gen_wflop(&c).is_err());
    }

    #[test]
    fn generate_dispatches() {
        for family in [Family::Cbqp, Family::Qmkp, Family::Cqkp, Family::Wflop] {
            let inst = generate(&cfg(family, 20, 1)).unwrap();
            assert_eq!(inst.n, 20);
            assert_eq!(inst.binary.len(), 20);
            inst.validate().unwrap();
        }
    }
}
