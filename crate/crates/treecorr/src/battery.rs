//! A battery of closed-form supermodular test functions.
//!
//! Every member satisfies `f(x∨y) + f(x∧y) >= f(x) + f(y)` under the
//! componentwise lattice operations: upper-orthant indicators, convex
//! functions of nonnegative-weight sums (squares, positive parts and their
//! powers, a capped-degree polynomial exponential), pairwise minima and
//! products, and nonnegative mixtures of those. Members evaluate exactly on
//! integer points and in floats on real points, so the same battery drives
//! exact four-atom checks and Monte Carlo estimates.

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::rational::{rat, rat_int, to_f64, Rat};

#[derive(Debug, Clone)]
enum Kind {
    /// `prod_i 1{x_i >= t_i}` over the coordinates with a threshold.
    OrthantIndicator {
        thresholds: Vec<Option<i64>>,
    },
    /// `g(max(0, sum c_i x_i - shift))` with `c >= 0` and `g` convex
    /// nondecreasing on the nonnegative axis.
    ConvexOfSum {
        coeffs: Vec<Rat>,
        shift: Rat,
        g: ConvexG,
    },
    PairMin {
        i: usize,
        j: usize,
    },
    PairProduct {
        i: usize,
        j: usize,
    },
    Mixture {
        weights: Vec<Rat>,
        parts: Vec<Kind>,
    },
}

#[derive(Debug, Clone)]
enum ConvexG {
    Identity,
    Square,
    /// Truncated exponential series `sum_{t<=degree} s^t / t!`; convex and
    /// nondecreasing for `s >= 0`, and exactly rational.
    ExpSeries {
        degree: u32,
    },
}

#[derive(Debug, Clone)]
pub struct BatteryFn {
    pub name: String,
    /// Nondecreasing in every coordinate.
    pub monotone: bool,
    kind: Kind,
}

fn eval_g_rat(g: &ConvexG, s: &Rat) -> Rat {
    match g {
        ConvexG::Identity => s.clone(),
        ConvexG::Square => s * s,
        ConvexG::ExpSeries { degree } => {
            let mut term = Rat::one();
            let mut total = Rat::one();
            for t in 1..=*degree {
                term = term * s / rat_int(t as i64);
                total += &term;
            }
            total
        }
    }
}

fn eval_g_f64(g: &ConvexG, s: f64) -> f64 {
    match g {
        ConvexG::Identity => s,
        ConvexG::Square => s * s,
        ConvexG::ExpSeries { degree } => {
            let mut term = 1.0;
            let mut total = 1.0;
            for t in 1..=*degree {
                term *= s / t as f64;
                total += term;
            }
            total
        }
    }
}

fn eval_kind_rat(kind: &Kind, x: &[Rat]) -> Rat {
    match kind {
        Kind::OrthantIndicator { thresholds } => {
            let inside = thresholds
                .iter()
                .zip(x)
                .all(|(t, xi)| t.map_or(true, |t| *xi >= rat_int(t)));
            if inside {
                Rat::one()
            } else {
                Rat::zero()
            }
        }
        Kind::ConvexOfSum { coeffs, shift, g } => {
            let mut s = -shift.clone();
            for (c, xi) in coeffs.iter().zip(x) {
                s += c * xi;
            }
            if s.is_negative() {
                s = Rat::zero();
            }
            eval_g_rat(g, &s)
        }
        Kind::PairMin { i, j } => x[*i - 1].clone().min(x[*j - 1].clone()),
        Kind::PairProduct { i, j } => &x[*i - 1] * &x[*j - 1],
        Kind::Mixture { weights, parts } => {
            let mut total = Rat::zero();
            for (w, part) in weights.iter().zip(parts) {
                total += w * eval_kind_rat(part, x);
            }
            total
        }
    }
}

fn eval_kind_f64(kind: &Kind, x: &[f64]) -> f64 {
    match kind {
        Kind::OrthantIndicator { thresholds } => {
            let inside = thresholds
                .iter()
                .zip(x)
                .all(|(t, xi)| t.map_or(true, |t| *xi >= t as f64));
            if inside {
                1.0
            } else {
                0.0
            }
        }
        Kind::ConvexOfSum { coeffs, shift, g } => {
            let mut s = -to_f64(shift);
            for (c, xi) in coeffs.iter().zip(x) {
                s += to_f64(c) * xi;
            }
            eval_g_f64(g, s.max(0.0))
        }
        Kind::PairMin { i, j } => x[*i - 1].min(x[*j - 1]),
        Kind::PairProduct { i, j } => x[*i - 1] * x[*j - 1],
        Kind::Mixture { weights, parts } => weights
            .iter()
            .zip(parts)
            .map(|(w, part)| to_f64(w) * eval_kind_f64(part, x))
            .sum(),
    }
}

impl BatteryFn {
    pub fn eval_rat(&self, x: &[Rat]) -> Rat {
        eval_kind_rat(&self.kind, x)
    }

    pub fn eval_int(&self, x: &[i64]) -> Rat {
        let xs: Vec<Rat> = x.iter().map(|&v| rat_int(v)).collect();
        self.eval_rat(&xs)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        eval_kind_f64(&self.kind, x)
    }

    /// The pairwise product `x_i * x_j`, the witness function whose
    /// expectation gap equals the covariance gap at fixed means.
    pub fn pair_product(dim: usize, i: usize, j: usize) -> Self {
        assert!(i >= 1 && j >= 1 && i <= dim && j <= dim);
        BatteryFn {
            name: format!("product_x{i}_x{j}"),
            monotone: false,
            kind: Kind::PairProduct { i, j },
        }
    }
}

/// The standard battery at a given arity: deterministic members for every
/// coordinate pair plus seeded random orthants, convex-of-sum members and
/// nonnegative mixtures.
pub fn standard_battery(dim: usize, seed: u64) -> Vec<BatteryFn> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x42617474);
    let mut out = Vec::new();

    for i in 1..=dim {
        for j in (i + 1)..=dim {
            out.push(BatteryFn {
                name: format!("min_x{i}_x{j}"),
                monotone: true,
                kind: Kind::PairMin { i, j },
            });
            out.push(BatteryFn::pair_product(dim, i, j));
        }
    }

    for variant in 0..3 {
        let thresholds: Vec<Option<i64>> = (0..dim)
            .map(|_| {
                if rng.random_bool(0.75) {
                    Some(rng.random_range(0..=2))
                } else {
                    None
                }
            })
            .collect();
        out.push(BatteryFn {
            name: format!("orthant_{variant}"),
            monotone: true,
            kind: Kind::OrthantIndicator { thresholds },
        });
    }

    let random_coeffs = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<Rat> {
        (0..dim)
            .map(|_| {
                if rng.random_bool(0.8) {
                    rat(rng.random_range(1..=3), rng.random_range(1..=2))
                } else {
                    Rat::zero()
                }
            })
            .collect()
    };
    for (name, g, shift) in [
        ("sum_positive_part", ConvexG::Identity, rat_int(1)),
        ("sum_square", ConvexG::Square, Rat::zero()),
        ("sum_positive_part_square", ConvexG::Square, rat_int(2)),
        (
            "sum_exp_series",
            ConvexG::ExpSeries { degree: 4 },
            Rat::zero(),
        ),
    ] {
        out.push(BatteryFn {
            name: name.into(),
            monotone: true,
            kind: Kind::ConvexOfSum {
                coeffs: random_coeffs(&mut rng),
                shift,
                g,
            },
        });
    }

    // two nonnegative mixtures of monotone members
    for variant in 0..2 {
        let parts: Vec<Kind> = vec![
            Kind::OrthantIndicator {
                thresholds: (0..dim).map(|_| Some(rng.random_range(0..=1))).collect(),
            },
            Kind::ConvexOfSum {
                coeffs: random_coeffs(&mut rng),
                shift: rat_int(rng.random_range(0..=2)),
                g: ConvexG::Identity,
            },
        ];
        let weights = vec![
            rat(rng.random_range(1..=3), 2),
            rat(rng.random_range(1..=3), 3),
        ];
        out.push(BatteryFn {
            name: format!("mixture_{variant}"),
            monotone: true,
            kind: Kind::Mixture { weights, parts },
        });
    }
    out
}
