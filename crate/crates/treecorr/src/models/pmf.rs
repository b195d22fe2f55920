//! Exact truncated joint probability mass functions for the lattice oracle.
//!
//! Each count component is truncated to `{0..cap}`, the product of component
//! probabilities is enumerated, and mass accumulates on the summed coordinate
//! vector. Binomial components carry exact rational probabilities alongside
//! the float path; Poisson probabilities are floats (their values are
//! irrational) with caps chosen so the dropped tail is auditable.

use std::collections::{BTreeMap, HashMap};

use num_integer::binomial as binom_coeff;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::models::VectorModel;
use crate::rational::{to_f64, Rat};
use crate::tree::Pair;

/// Default enumeration budget in product states.
pub const DEFAULT_STATE_BUDGET: u64 = 100_000_000;

/// Per-component tail target: each truncated component keeps all but
/// `1e-10 / #components` of its mass.
const COMPONENT_TAIL_MASS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TruncatedPmf {
    dim: usize,
    entries: HashMap<Vec<u32>, f64>,
    exact: Option<HashMap<Vec<u32>, Rat>>,
    captured_mass: f64,
    component_caps: BTreeMap<Pair, u32>,
}

impl TruncatedPmf {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn prob(&self, point: &[u32]) -> f64 {
        self.entries.get(point).copied().unwrap_or(0.0)
    }

    pub fn exact_prob(&self, point: &[u32]) -> Option<Rat> {
        self.exact
            .as_ref()
            .map(|m| m.get(point).cloned().unwrap_or_else(Rat::zero))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Total enumerated mass; `1 - captured_mass()` is the truncation defect.
    pub fn captured_mass(&self) -> f64 {
        self.captured_mass
    }

    pub fn component_caps(&self) -> &BTreeMap<Pair, u32> {
        &self.component_caps
    }

    /// Marginal mass function of one coordinate on `{0..}`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for (point, p) in &self.entries {
            let k = point[i - 1] as usize;
            if out.len() <= k {
                out.resize(k + 1, 0.0);
            }
            out[k] += p;
        }
        out
    }
}

fn binomial_pmf_exact(n: u64, p: &Rat) -> Vec<Rat> {
    let q = Rat::one() - p;
    (0..=n)
        .map(|k| {
            let coeff = Rat::from_integer(binom_coeff(
                num_bigint::BigInt::from(n),
                num_bigint::BigInt::from(k),
            ));
            let mut v = coeff;
            for _ in 0..k {
                v *= p;
            }
            for _ in 0..(n - k) {
                v *= &q;
            }
            v
        })
        .collect()
}

fn poisson_pmf(lambda: f64, cap: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(cap as usize + 1);
    let mut term = (-lambda).exp();
    out.push(term);
    for k in 1..=cap {
        term *= lambda / k as f64;
        out.push(term);
    }
    out
}

/// Smallest cap whose Poisson tail mass is below `target`.
fn poisson_tail_cap(lambda: f64, target: f64) -> Result<u32> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let mut term = (-lambda).exp();
    let mut cum = term;
    for k in 1..=4000u32 {
        term *= lambda / k as f64;
        cum += term;
        if 1.0 - cum <= target {
            return Ok(k);
        }
    }
    Err(Error::NumericalFailure(format!(
        "poisson tail cap not reached for lambda = {lambda}"
    )))
}

/// Enumerates the joint mass function of the coordinate vector with every
/// component truncated to `{0..cap}` (component support caps apply first for
/// binomials). `cap = None` picks Poisson caps by the per-component tail
/// policy. Supported for the count families only.
pub fn exact_truncated_pmf(
    model: &VectorModel,
    cap: Option<u32>,
    budget: u64,
) -> Result<TruncatedPmf> {
    let tree = model.tree();
    let d = tree.dim();

    enum Comp {
        Binomial { n: u64, p: Rat },
        Poisson { lambda: Rat },
    }
    let mut comps: Vec<(Pair, Comp)> = Vec::new();
    match model {
        VectorModel::Binomial(m) => {
            for (pair, &n) in &m.counts {
                comps.push((*pair, Comp::Binomial { n, p: m.p.clone() }));
            }
        }
        VectorModel::Poisson(m) => {
            for (pair, a) in &m.intensities {
                comps.push((*pair, Comp::Poisson { lambda: a.clone() }));
            }
        }
        other => {
            return Err(Error::UnsupportedFamily {
                family: other.family_name().into(),
                operation: "exact_truncated_pmf".into(),
            })
        }
    }

    let active = comps
        .iter()
        .filter(|(_, c)| match c {
            Comp::Binomial { n, p } => *n > 0 && !p.is_zero(),
            Comp::Poisson { lambda } => !lambda.is_zero(),
        })
        .count()
        .max(1);
    let tail_target = COMPONENT_TAIL_MASS / active as f64;

    // per-component caps and probability tables
    let mut caps: BTreeMap<Pair, u32> = BTreeMap::new();
    let mut tables_f64: Vec<Vec<f64>> = Vec::new();
    let mut tables_exact: Vec<Vec<Rat>> = Vec::new();
    let exact_mode = matches!(model, VectorModel::Binomial(_));
    let mut states: u128 = 1;
    for (pair, comp) in &comps {
        let (cap_c, probs_f64, probs_exact) = match comp {
            Comp::Binomial { n, p } => {
                let bound = cap.map_or(*n, |c| (c as u64).min(*n));
                let exact = binomial_pmf_exact(*n, p);
                let kept: Vec<Rat> = exact[..=bound as usize].to_vec();
                let kept_f64: Vec<f64> = kept.iter().map(to_f64).collect();
                (bound as u32, kept_f64, kept)
            }
            Comp::Poisson { lambda } => {
                let l = to_f64(lambda);
                let cap_c = match cap {
                    Some(c) => c,
                    None => poisson_tail_cap(l, tail_target)?,
                };
                (cap_c, poisson_pmf(l, cap_c), Vec::new())
            }
        };
        states = states.saturating_mul(cap_c as u128 + 1);
        caps.insert(*pair, cap_c);
        tables_f64.push(probs_f64);
        if exact_mode {
            tables_exact.push(probs_exact);
        }
    }
    if states > budget as u128 {
        return Err(Error::BudgetExceeded {
            needed: states,
            budget,
        });
    }

    // odometer over component values, accumulating on the summed vector
    let membership = tree.membership();
    let incidence: Vec<Vec<usize>> = comps
        .iter()
        .map(|(pair, _)| {
            (1..=d)
                .filter(|&i| membership.row(i).contains(pair))
                .collect()
        })
        .collect();

    let n_comp = comps.len();
    let mut values = vec![0u32; n_comp];
    let mut entries: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut exact: HashMap<Vec<u32>, Rat> = HashMap::new();
    let mut captured = 0.0f64;
    loop {
        let mut point = vec![0u32; d];
        let mut prob = 1.0f64;
        for (c, &v) in values.iter().enumerate() {
            prob *= tables_f64[c][v as usize];
            for &i in &incidence[c] {
                point[i - 1] += v;
            }
        }
        captured += prob;
        *entries.entry(point.clone()).or_insert(0.0) += prob;
        if exact_mode {
            let mut prob_exact = Rat::one();
            for (c, &v) in values.iter().enumerate() {
                prob_exact *= &tables_exact[c][v as usize];
            }
            *exact.entry(point).or_insert_with(Rat::zero) += prob_exact;
        }

        // advance odometer
        let mut pos = 0;
        loop {
            if pos == n_comp {
                return Ok(TruncatedPmf {
                    dim: d,
                    entries,
                    exact: exact_mode.then_some(exact),
                    captured_mass: captured,
                    component_caps: caps,
                });
            }
            let pair_cap = caps[&comps[pos].0];
            if values[pos] < pair_cap {
                values[pos] += 1;
                break;
            }
            values[pos] = 0;
            pos += 1;
        }
    }
}

/// Smallest coordinate cap `m` with `sum_i P(X_i > m) <= target`, by scalar
/// quantile computation on the marginals.
pub fn coordinate_tail_cap(model: &VectorModel, target: f64) -> Result<u32> {
    let d = model.dim();
    let per_coord = target / d as f64;
    let mut cap = 0u32;
    for i in 1..=d {
        let c = match crate::models::marginal_law(model, i)? {
            crate::models::MarginalLaw::Binomial { n, .. } => {
                u32::try_from(n).map_err(|_| Error::NumericalFailure("count overflow".into()))?
            }
            crate::models::MarginalLaw::Poisson { lambda } => {
                poisson_tail_cap(to_f64(&lambda), per_coord)?
            }
        };
        cap = cap.max(c);
    }
    Ok(cap)
}
