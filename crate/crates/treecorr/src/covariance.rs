//! Exact maps between component variances and vector covariances.
//!
//! On a dependence tree, giving every component `(k, l)` a variance
//! `sigma2[k, l]` determines the vector covariance entrywise:
//!
//! ```text
//! cov[i][j] = sum of sigma2[k, l] over pairs with node(i,j) ⊆ node(k,l)
//! ```
//!
//! with the diagonal reading `var[i] = sum of sigma2 over nodes containing i`.
//! The map is triangular with unit diagonal when pairs are ordered by vertex
//! size, so it inverts exactly over the rationals. [`invert_covariance`]
//! computes the inverse along two independent routes — the Möbius-weighted
//! sum over ancestors and a root-to-leaves subtraction — and insists they
//! agree. A decomposition is feasible for a distribution family when its
//! entries can be realised as that family's component variances, which is
//! nonnegativity everywhere, plus integrality of `sigma2/(pq)` for count
//! parameters in the Bernoulli-sum case.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{as_u64, format_rat, Rat};
use crate::tree::{DependencyTree, Pair};

/// Symmetric matrix of exact target covariances, with optional means.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovarianceSpec {
    dim: usize,
    entries: Vec<Vec<Rat>>,
    means: Option<Vec<Rat>>,
}

impl CovarianceSpec {
    pub fn new(entries: Vec<Vec<Rat>>) -> Result<Self> {
        let dim = entries.len();
        if dim == 0 {
            return Err(Error::InvalidInput("empty covariance matrix".into()));
        }
        for row in &entries {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        for i in 0..dim {
            if entries[i][i].is_negative() {
                return Err(Error::InvalidInput(format!(
                    "negative diagonal entry at {}",
                    i + 1
                )));
            }
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::InvalidInput(format!(
                        "matrix not symmetric at ({},{})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(CovarianceSpec {
            dim,
            entries,
            means: None,
        })
    }

    pub fn with_means(mut self, means: Vec<Rat>) -> Result<Self> {
        if means.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: means.len(),
            });
        }
        self.means = Some(means);
        Ok(self)
    }

    pub fn zero(dim: usize) -> Self {
        CovarianceSpec {
            dim,
            entries: vec![vec![Rat::zero(); dim]; dim],
            means: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry by 1-based coordinate indices.
    pub fn entry(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i - 1][j - 1]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, value: Rat) {
        self.entries[i - 1][j - 1] = value.clone();
        self.entries[j - 1][i - 1] = value;
    }

    pub fn means(&self) -> Option<&[Rat]> {
        self.means.as_deref()
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.entries
    }
}

/// Component variances indexed by pair. Negative entries are representable
/// but flag the decomposition as infeasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarianceDecomposition {
    dim: usize,
    sigma2: BTreeMap<Pair, Rat>,
}

impl VarianceDecomposition {
    pub fn new(dim: usize, sigma2: BTreeMap<Pair, Rat>) -> Result<Self> {
        for pair in Pair::all(dim) {
            if !sigma2.contains_key(&pair) {
                return Err(Error::InvalidInput(format!(
                    "decomposition misses pair {pair}"
                )));
            }
        }
        if sigma2.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                found: sigma2.len(),
            });
        }
        Ok(VarianceDecomposition { dim, sigma2 })
    }

    pub fn zero(dim: usize) -> Self {
        let sigma2 = Pair::all(dim).map(|p| (p, Rat::zero())).collect();
        VarianceDecomposition { dim, sigma2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, pair: Pair) -> &Rat {
        &self.sigma2[&pair]
    }

    pub fn set(&mut self, pair: Pair, value: Rat) {
        self.sigma2.insert(pair, value);
    }

    pub fn entries(&self) -> impl Iterator<Item = (Pair, &Rat)> {
        self.sigma2.iter().map(|(p, r)| (*p, r))
    }

    /// All component variances nonnegative.
    pub fn is_feasible(&self) -> bool {
        self.sigma2.values().all(|v| !v.is_negative())
    }
}

/// Covariance of the vector built from `dec` on `tree`:
/// entry `(i, j)` sums `sigma2` over the ancestors of `node(i, j)`.
pub fn forward_covariance(
    tree: &DependencyTree,
    dec: &VarianceDecomposition,
) -> Result<CovarianceSpec> {
    if tree.dim() != dec.dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.dim(),
            found: dec.dim(),
        });
    }
    let d = tree.dim();
    let mut cov = CovarianceSpec::zero(d);
    for i in 1..=d {
        for j in i..=d {
            let base = tree.node(Pair::new(i, j)).expect("valid tree is total");
            let mut total = Rat::zero();
            for (pair, vertex) in tree.entries() {
                if base.is_subset_of(&vertex) {
                    total += dec.get(pair);
                }
            }
            cov.set_entry(i, j, total);
        }
    }
    Ok(cov)
}

/// Recovers the component variances that reproduce `cov` on `tree`.
///
/// Two routes are evaluated: the Möbius form
/// `sigma2[k,l] = sum over ancestors (i,j) of mu(node(i,j), node(k,l)) * cov[i][j]`
/// and a recursive route that starts from `cov[k][l] = sigma2[k,l]` at each
/// root and subtracts resolved ancestors while moving down. They must agree;
/// a mandatory forward re-check then guards representability.
pub fn invert_covariance(
    tree: &DependencyTree,
    cov: &CovarianceSpec,
) -> Result<VarianceDecomposition> {
    if tree.dim() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.dim(),
            found: cov.dim(),
        });
    }
    let d = tree.dim();

    // Möbius route.
    let mut sigma2: BTreeMap<Pair, Rat> = BTreeMap::new();
    for lower in Pair::all(d) {
        let lower_v = tree.node(lower).unwrap();
        let mut total = Rat::zero();
        for (upper, upper_v) in tree.entries() {
            if lower_v.is_subset_of(&upper_v) {
                let weight = tree.moebius_entry(upper, lower);
                if weight != 0 {
                    total += Rat::from_integer(weight.into()) * cov.entry(upper.k(), upper.l());
                }
            }
        }
        sigma2.insert(lower, total);
    }

    // Recursive route: pairs in decreasing vertex size are resolved before
    // anything below them.
    let mut order: Vec<Pair> = Pair::all(d).collect();
    order.sort_by_key(|p| std::cmp::Reverse(tree.node(*p).unwrap().len()));
    let mut recursive: BTreeMap<Pair, Rat> = BTreeMap::new();
    for pair in order {
        let vertex = tree.node(pair).unwrap();
        let mut value = cov.entry(pair.k(), pair.l()).clone();
        for (other, other_v) in tree.entries() {
            if other != pair && vertex.is_subset_of(&other_v) {
                value -= recursive.get(&other).expect("ancestors resolved first");
            }
        }
        recursive.insert(pair, value);
    }

    if sigma2 != recursive {
        return Err(Error::Inconsistency {
            context: "invert_covariance".into(),
            detail: "Möbius route and recursive route disagree".into(),
        });
    }

    let dec = VarianceDecomposition::new(d, sigma2)?;
    let back = forward_covariance(tree, &dec)?;
    for i in 1..=d {
        for j in i..=d {
            if back.entry(i, j) != cov.entry(i, j) {
                let residual = back.entry(i, j) - cov.entry(i, j);
                return Err(Error::NotRepresentable {
                    detail: format!("residual {} at entry ({i},{j})", format_rat(&residual)),
                });
            }
        }
    }
    Ok(dec)
}

/// Distribution family a decomposition can be realised in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// Sums of shared coin flips with success probability `p`.
    Binomial {
        p: Rat,
    },
    Poisson,
    Gaussian,
    /// Shape–scale with a common scale `theta`; component sums add shapes.
    Gamma {
        theta: Rat,
    },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Binomial { p } => write!(f, "binomial(p={})", format_rat(p)),
            Family::Poisson => write!(f, "poisson"),
            Family::Gaussian => write!(f, "gaussian"),
            Family::Gamma { theta } => write!(f, "gamma(theta={})", format_rat(theta)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilityDefect {
    /// A negative component variance; fatal for every family.
    Negative { pair: String, value: String },
    /// `sigma2/(pq)` is not a nonnegative integer.
    NonIntegerCount { pair: String, ratio: String },
}

/// Everything the feasibility check learned; carries all defects rather than
/// stopping at the first.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub family: String,
    pub feasible: bool,
    pub defects: Vec<FeasibilityDefect>,
    /// Component counts `sigma2/(pq)` when the family is binomial and
    /// feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
}

/// Decides whether `dec` is realisable in `family` and localises every
/// defect. Gaussian, Poisson and gamma need nonnegativity only; binomial
/// additionally needs each `sigma2/(pq)` to be a nonnegative integer count.
pub fn feasibility(dec: &VarianceDecomposition, family: &Family) -> FeasibilityReport {
    let mut defects = Vec::new();
    for (pair, value) in dec.entries() {
        if value.is_negative() {
            defects.push(FeasibilityDefect::Negative {
                pair: pair.to_string(),
                value: format_rat(value),
            });
        }
    }
    let mut counts = None;
    if let Family::Binomial { p } = family {
        let pq = p.clone() * (Rat::from_integer(1.into()) - p.clone());
        let mut map = BTreeMap::new();
        let mut integral = true;
        for (pair, value) in dec.entries() {
            if value.is_negative() {
                integral = false;
                continue;
            }
            if pq.is_zero() {
                // degenerate coin: only the zero decomposition is realisable
                if value.is_zero() {
                    map.insert(pair.to_string(), 0);
                } else {
                    integral = false;
                    defects.push(FeasibilityDefect::NonIntegerCount {
                        pair: pair.to_string(),
                        ratio: "infinite (pq = 0)".into(),
                    });
                }
                continue;
            }
            let ratio = value / &pq;
            match as_u64(&ratio) {
                Some(n) => {
                    map.insert(pair.to_string(), n);
                }
                None => {
                    integral = false;
                    defects.push(FeasibilityDefect::NonIntegerCount {
                        pair: pair.to_string(),
                        ratio: format_rat(&ratio),
                    });
                }
            }
        }
        if integral && defects.is_empty() {
            counts = Some(map);
        }
    }
    FeasibilityReport {
        family: family.to_string(),
        feasible: defects.is_empty(),
        defects,
        counts,
    }
}
