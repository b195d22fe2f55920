//! Binomial-to-Gaussian bridge.
//!
//! A centered Gaussian model with component variances `v[k, l]` is the
//! distributional limit of standardized binomial models: give component
//! `(k, l)` about `n·v[k,l]/(pq)` coin flips, then shift each coordinate by
//! its mean and divide by `sqrt(n)`. The standardized mean is exactly zero,
//! and the standardized covariance differs from the target by at most
//! `pq/(2n)` per component from count rounding.

use std::collections::BTreeMap;

use num_traits::{One, Signed};

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::models::{exact_moments, sample_stream, BinomialModel, VectorModel};
use crate::rational::{rat_int, round_to_int, to_f64, Rat};
use crate::tree::Pair;

#[derive(Debug, Clone)]
pub struct CltBridge {
    binomial: BinomialModel,
    n: u64,
    /// Coordinate means of the underlying binomial, the standardization shifts.
    shifts: Vec<Rat>,
}

/// Builds the standardized binomial approximation of `target` at level `n`,
/// with coin probability `p` (1/2 unless there is a reason to skew).
pub fn clt_bridge(target: &crate::models::GaussianModel, n: u64, p: Rat) -> Result<CltBridge> {
    if n == 0 {
        return Err(Error::InvalidInput("bridge level n must be >= 1".into()));
    }
    let pq = p.clone() * (Rat::one() - p.clone());
    if !pq.is_positive() {
        return Err(Error::InvalidInput(
            "bridge needs p strictly inside (0,1)".into(),
        ));
    }
    let mut counts: BTreeMap<Pair, u64> = BTreeMap::new();
    for (pair, v) in &target.variances {
        let scaled = rat_int(n as i64) * v / &pq;
        let rounded = round_to_int(&scaled);
        let count = u64::try_from(rounded)
            .map_err(|_| Error::InvalidInput("negative variance in bridge target".into()))?;
        counts.insert(*pair, count);
    }
    let binomial = BinomialModel::new(target.tree.clone(), p, counts)?;
    let moments = exact_moments(&VectorModel::Binomial(binomial.clone()));
    Ok(CltBridge {
        binomial,
        n,
        shifts: moments.means,
    })
}

impl CltBridge {
    pub fn binomial(&self) -> &BinomialModel {
        &self.binomial
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    pub fn shifts(&self) -> &[Rat] {
        &self.shifts
    }

    /// Exactly zero in every coordinate.
    pub fn standardized_mean(&self) -> Vec<Rat> {
        vec![Rat::from_integer(0.into()); self.binomial.tree.dim()]
    }

    /// Covariance of the standardized vector: the binomial covariance over `n`.
    pub fn standardized_covariance(&self) -> CovarianceSpec {
        let moments = exact_moments(&VectorModel::Binomial(self.binomial.clone()));
        let d = self.binomial.tree.dim();
        let mut cov = CovarianceSpec::zero(d);
        let n = rat_int(self.n as i64);
        for i in 1..=d {
            for j in i..=d {
                cov.set_entry(i, j, moments.covariance.entry(i, j) / &n);
            }
        }
        cov
    }

    /// Entrywise bound on |standardized covariance − target covariance| from
    /// count rounding: half a flip per component, `pq/(2n)` each.
    pub fn covariance_error_bound(&self) -> Rat {
        let d = self.binomial.tree.dim();
        let pq = self.binomial.p.clone() * (Rat::one() - self.binomial.p.clone());
        let pairs = rat_int((d * (d + 1) / 2) as i64);
        pairs * pq / (rat_int(2) * rat_int(self.n as i64))
    }

    /// Standardized samples `(x - shift) / sqrt(n)`.
    pub fn sample_standardized(&self, n_samples: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
        let scale = (self.n as f64).sqrt();
        let shifts: Vec<f64> = self.shifts.iter().map(to_f64).collect();
        let mut rows = sample_stream(
            &VectorModel::Binomial(self.binomial.clone()),
            n_samples,
            seed,
            stream,
        );
        for row in &mut rows {
            for (x, s) in row.iter_mut().zip(&shifts) {
                *x = (*x - s) / scale;
            }
        }
        rows
    }

    /// Component variance and fourth-moment maps of the standardized vector,
    /// for exact standard errors (variance scales by `1/n`, fourth moment by
    /// `1/n^2`).
    pub fn standardized_component_moments(&self) -> (BTreeMap<Pair, Rat>, BTreeMap<Pair, Rat>) {
        let model = VectorModel::Binomial(self.binomial.clone());
        let n = rat_int(self.n as i64);
        let n2 = n.clone() * &n;
        let vars = model
            .component_variances()
            .into_iter()
            .map(|(p, v)| (p, v / &n))
            .collect();
        let mu4 = model
            .component_fourth_moments()
            .into_iter()
            .map(|(p, v)| (p, v / &n2))
            .collect();
        (vars, mu4)
    }
}
