//! Brute-force certification of supermodular dominance on truncated grids.
//!
//! Dominance means `E[Φ(X)] <= E[Φ(Y)]` for every supermodular `Φ`. On the
//! integer box `{0..m}^d` the supermodular cone is cut out by the local
//! square inequalities `Φ(x+e_i+e_j) + Φ(x) >= Φ(x+e_i) + Φ(x+e_j)`, so
//! minimising `sum (p_Y - p_X) Φ` over that cone intersected with the unit
//! box `|Φ| <= 1` is a small linear program whose optimum `v*` certifies the
//! ordering: nonnegative up to tolerance means no supermodular function
//! separates the truncated laws, decisively negative exhibits one. Mass
//! lost to truncation widens the tolerance band explicitly.
//!
//! The randomized battery estimate is the sampling-based cousin: it flags
//! any battery member whose estimated expectation gap is more than five
//! standard errors below zero.

use serde::Serialize;

use num_traits::{One, Zero};

use crate::battery::BatteryFn;
use crate::error::{Error, Result};
use crate::models::{coordinate_tail_cap, exact_truncated_pmf, sample_stream, VectorModel};
use crate::rational::{to_f64, Rat};
use crate::simplex::{solve_lp, LpProblem, LpScalar};

/// Upper bound on LP size, variables plus constraint rows.
pub const LP_SIZE_BUDGET: usize = 50_000;

/// Largest tolerable total mass defect before certification refuses to run.
pub const MASS_DEFECT_MAX: f64 = 1e-4;

/// Coordinate tail target for the default grid cap. Together with the
/// per-component truncation target this keeps the combined mass defect of a
/// model pair under 1e-9.
pub const GRID_TAIL_TARGET: f64 = 2.5e-10;

/// The lattice `{0..cap}^dim` in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedGrid {
    pub dim: usize,
    pub cap: u32,
}

impl TruncatedGrid {
    pub fn new(dim: usize, cap: u32) -> Self {
        TruncatedGrid { dim, cap }
    }

    pub fn point_count(&self) -> usize {
        (self.cap as usize + 1).pow(self.dim as u32)
    }

    pub fn index(&self, point: &[u32]) -> usize {
        let base = self.cap as usize + 1;
        point.iter().fold(0usize, |acc, &v| acc * base + v as usize)
    }

    pub fn points(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(self.point_count());
        let mut point = vec![0u32; self.dim];
        loop {
            out.push(point.clone());
            let mut pos = self.dim;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if point[pos] < self.cap {
                    point[pos] += 1;
                    break;
                }
                point[pos] = 0;
            }
        }
    }

    pub fn contains(&self, point: &[u32]) -> bool {
        point.iter().all(|&v| v <= self.cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    Certified,
    Violated,
    Inconclusive,
}

/// Outcome of one grid certification.
#[derive(Debug, Clone, Serialize)]
pub struct LpCertificate {
    pub verdict: OracleVerdict,
    /// Optimal value of `sum (p_Y - p_X) Φ` over the feasible cone.
    pub value: f64,
    /// Exact optimal value when the run was exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_exact: Option<String>,
    pub tolerance: f64,
    pub mass_defect_x: f64,
    pub mass_defect_y: f64,
    pub grid_cap: u32,
    pub grid_dim: usize,
    pub monotone: bool,
    pub exact: bool,
    pub lp_iterations: usize,
    /// The optimizing function on the grid, lexicographic point order.
    pub phi: Vec<f64>,
}

fn grid_constraints<S: LpScalar>(grid: &TruncatedGrid, monotone: bool) -> Vec<Vec<(usize, S)>> {
    let d = grid.dim;
    let mut rows = Vec::new();
    let points = grid.points();
    for point in &points {
        for i in 0..d {
            if point[i] >= grid.cap {
                continue;
            }
            // monotonicity: Φ(x) − Φ(x+e_i) <= 0
            if monotone {
                let mut up = point.clone();
                up[i] += 1;
                rows.push(vec![
                    (grid.index(point), S::one()),
                    (grid.index(&up), -S::one()),
                ]);
            }
            for j in (i + 1)..d {
                if point[j] >= grid.cap {
                    continue;
                }
                // supermodularity as a <=-row:
                // Φ(x+e_i) + Φ(x+e_j) − Φ(x) − Φ(x+e_i+e_j) <= 0
                let mut up_i = point.clone();
                up_i[i] += 1;
                let mut up_j = point.clone();
                up_j[j] += 1;
                let mut up_ij = up_i.clone();
                up_ij[j] += 1;
                rows.push(vec![
                    (grid.index(&up_i), S::one()),
                    (grid.index(&up_j), S::one()),
                    (grid.index(point), -S::one()),
                    (grid.index(&up_ij), -S::one()),
                ]);
            }
        }
    }
    rows
}

fn dense_rows<S: LpScalar>(sparse: Vec<Vec<(usize, S)>>, n: usize) -> Vec<Vec<S>> {
    sparse
        .into_iter()
        .map(|row| {
            let mut dense = vec![S::zero(); n];
            for (idx, v) in row {
                dense[idx] = v;
            }
            dense
        })
        .collect()
}

/// Certifies or refutes supermodular dominance of `y` over `x` on a
/// truncated grid. `grid_cap = None` picks the cap from the coordinate tail
/// policy of both models. `monotone` adds the nondecreasing constraints
/// (the increasing-supermodular variant). `exact` solves in rationals, which
/// requires finite-support (binomial) inputs.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    x: &VectorModel,
    y: &VectorModel,
    grid_cap: Option<u32>,
    monotone: bool,
    exact: bool,
    state_budget: u64,
    tolerance: f64,
) -> Result<LpCertificate> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let d = x.dim();
    let cap = match grid_cap {
        Some(c) => c,
        None => {
            coordinate_tail_cap(x, GRID_TAIL_TARGET)?.max(coordinate_tail_cap(y, GRID_TAIL_TARGET)?)
        }
    };
    let grid = TruncatedGrid::new(d, cap);

    let pmf_x = exact_truncated_pmf(x, None, state_budget)?;
    let pmf_y = exact_truncated_pmf(y, None, state_budget)?;

    let n = grid.point_count();
    let mut objective = vec![0.0f64; n];
    let mut in_grid_x = 0.0;
    let mut in_grid_y = 0.0;
    for (point, p) in pmf_x.entries() {
        if grid.contains(point) {
            objective[grid.index(point)] -= p;
            in_grid_x += p;
        }
    }
    for (point, p) in pmf_y.entries() {
        if grid.contains(point) {
            objective[grid.index(point)] += p;
            in_grid_y += p;
        }
    }
    let defect_x = 1.0 - in_grid_x;
    let defect_y = 1.0 - in_grid_y;
    let defect = defect_x + defect_y;
    if defect > MASS_DEFECT_MAX {
        return Err(Error::DegenerateMass {
            defect_x,
            defect_y,
            allowed: MASS_DEFECT_MAX,
        });
    }

    let sparse = grid_constraints::<f64>(&grid, monotone);
    if n + sparse.len() > LP_SIZE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: (n + sparse.len()) as u128,
            budget: LP_SIZE_BUDGET as u64,
        });
    }

    let (value, value_exact, phi, iterations) = if exact {
        if !pmf_x.has_exact() || !pmf_y.has_exact() {
            return Err(Error::UnsupportedFamily {
                family: x.family_name().into(),
                operation: "exact-mode certification (needs finite support)".into(),
            });
        }
        let mut objective_exact = vec![Rat::zero(); n];
        for (point, _) in pmf_x.entries() {
            if grid.contains(point) {
                let p = pmf_x.exact_prob(point).expect("exact mode");
                objective_exact[grid.index(point)] -= p;
            }
        }
        for (point, _) in pmf_y.entries() {
            if grid.contains(point) {
                let p = pmf_y.exact_prob(point).expect("exact mode");
                objective_exact[grid.index(point)] += p;
            }
        }
        let rows = dense_rows(grid_constraints::<Rat>(&grid, monotone), n);
        let rhs = vec![Rat::zero(); rows.len()];
        let problem = LpProblem {
            objective: objective_exact,
            rows,
            rhs,
            lower: vec![-Rat::one(); n],
            upper: vec![Rat::one(); n],
        };
        let sol = solve_lp(&problem)?;
        if !num_traits::Zero::is_zero(&sol.duality_gap) {
            return Err(Error::NumericalFailure(
                "exact solve ended with nonzero duality gap".into(),
            ));
        }
        (
            to_f64(&sol.value),
            Some(crate::rational::format_rat(&sol.value)),
            sol.x.iter().map(to_f64).collect::<Vec<f64>>(),
            sol.iterations,
        )
    } else {
        let rows = dense_rows(sparse, n);
        let rhs = vec![0.0f64; rows.len()];
        let problem = LpProblem {
            objective,
            rows,
            rhs,
            lower: vec![-1.0; n],
            upper: vec![1.0; n],
        };
        let sol = solve_lp(&problem)?;
        if sol.duality_gap > 1e-9 * (1.0 + sol.value.abs()) {
            return Err(Error::NumericalFailure(format!(
                "duality gap {} too large",
                sol.duality_gap
            )));
        }
        (sol.value, None, sol.x, sol.iterations)
    };

    let threshold = tolerance + defect;
    let verdict = if value >= -threshold {
        OracleVerdict::Certified
    } else if -value > 10.0 * defect + tolerance {
        OracleVerdict::Violated
    } else {
        OracleVerdict::Inconclusive
    };
    Ok(LpCertificate {
        verdict,
        value,
        value_exact,
        tolerance,
        mass_defect_x: defect_x,
        mass_defect_y: defect_y,
        grid_cap: cap,
        grid_dim: d,
        monotone,
        exact,
        lp_iterations: iterations,
        phi,
    })
}

/// One battery member's Monte Carlo estimate of `E[Φ(Y)] − E[Φ(X)]`.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryRow {
    pub name: String,
    pub monotone: bool,
    pub estimate: f64,
    pub std_error: f64,
    /// Estimate below minus five standard errors.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<BatteryRow>,
}

impl BatteryReport {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }
}

/// Estimates every battery member's expectation gap from `n_samples`
/// independent draws of each model (streams 0 and 1 of the seed).
pub fn battery_estimate(
    x: &VectorModel,
    y: &VectorModel,
    battery: &[BatteryFn],
    n_samples: usize,
    seed: u64,
) -> Result<BatteryReport> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let xs = sample_stream(x, n_samples, seed, 0);
    let ys = sample_stream(y, n_samples, seed, 1);
    let mut rows = Vec::with_capacity(battery.len());
    for phi in battery {
        let mut sum_x = 0.0;
        let mut sumsq_x = 0.0;
        for row in &xs {
            let v = phi.eval_f64(row);
            sum_x += v;
            sumsq_x += v * v;
        }
        let mut sum_y = 0.0;
        let mut sumsq_y = 0.0;
        for row in &ys {
            let v = phi.eval_f64(row);
            sum_y += v;
            sumsq_y += v * v;
        }
        let nf = n_samples as f64;
        let mean_x = sum_x / nf;
        let mean_y = sum_y / nf;
        let var_x = (sumsq_x / nf - mean_x * mean_x).max(0.0) * nf / (nf - 1.0);
        let var_y = (sumsq_y / nf - mean_y * mean_y).max(0.0) * nf / (nf - 1.0);
        let estimate = mean_y - mean_x;
        let std_error = ((var_x + var_y) / nf).sqrt();
        rows.push(BatteryRow {
            name: phi.name.clone(),
            monotone: phi.monotone,
            estimate,
            std_error,
            flagged: estimate < -5.0 * std_error,
        });
    }
    Ok(BatteryReport {
        samples: n_samples,
        seed,
        rows,
    })
}
