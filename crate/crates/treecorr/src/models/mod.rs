//! Concrete random-vector models on a dependence tree.
//!
//! Every model is one independent scalar component per tree pair plus the
//! membership sums: coordinate `i` adds up the components whose vertex
//! contains `i`. Four component families are supported — sums of shared
//! coin flips (binomial), Poisson counts, Gaussians, and gammas with a
//! common scale. Binomial, Poisson and gamma means are forced by the
//! variance data; Gaussian means ride on the leaf components.
//!
//! [`construct`] builds the model matching a target covariance exactly, by
//! exact inversion plus a family feasibility check. [`exact_moments`] returns
//! the implied means and covariance as rationals, and the fourth-moment
//! helpers give exact standard errors for the samplers' empirical moments.

mod bridge;
mod pmf;
mod sampling;

pub use bridge::{clt_bridge, CltBridge};
pub use pmf::{coordinate_tail_cap, exact_truncated_pmf, TruncatedPmf, DEFAULT_STATE_BUDGET};
pub(crate) use sampling::stream_rng as sampling_stream_rng;
pub use sampling::{sample, sample_stream};

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::covariance::{
    feasibility, invert_covariance, CovarianceSpec, Family, VarianceDecomposition,
};
use crate::error::{Error, Result};
use crate::rational::{format_rat, rat_int, Rat};
use crate::tree::{DependencyTree, Pair};

/// Sums of disjoint blocks of independent coin flips: component `(k, l)`
/// is a binomial with `counts[k, l]` trials and success probability `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinomialModel {
    pub tree: DependencyTree,
    pub p: Rat,
    pub counts: BTreeMap<Pair, u64>,
}

/// Independent Poisson components; equivalently the point mass weights of a
/// discrete measure on the tree's vertices (the model's Lévy data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonModel {
    pub tree: DependencyTree,
    pub intensities: BTreeMap<Pair, Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussianModel {
    pub tree: DependencyTree,
    pub variances: BTreeMap<Pair, Rat>,
    pub component_means: BTreeMap<Pair, Rat>,
}

/// Shape–scale gamma components with one shared scale; coordinate sums stay
/// gamma because shapes add at fixed scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaModel {
    pub tree: DependencyTree,
    pub theta: Rat,
    pub shapes: BTreeMap<Pair, Rat>,
}

fn check_total<T>(tree: &DependencyTree, map: &BTreeMap<Pair, T>) -> Result<()> {
    for pair in tree.pairs() {
        if !map.contains_key(&pair) {
            return Err(Error::InvalidInput(format!("missing component {pair}")));
        }
    }
    if map.len() != tree.pairs().count() {
        return Err(Error::InvalidInput(
            "component map has extra entries".into(),
        ));
    }
    Ok(())
}

fn check_nonnegative(map: &BTreeMap<Pair, Rat>, what: &str) -> Result<()> {
    for (pair, v) in map {
        if v.is_negative() {
            return Err(Error::InvalidInput(format!("negative {what} at {pair}")));
        }
    }
    Ok(())
}

impl BinomialModel {
    pub fn new(tree: DependencyTree, p: Rat, counts: BTreeMap<Pair, u64>) -> Result<Self> {
        if p.is_negative() || p > Rat::one() {
            return Err(Error::InvalidInput(format!(
                "p must lie in [0,1], got {}",
                format_rat(&p)
            )));
        }
        check_total(&tree, &counts)?;
        Ok(BinomialModel { tree, p, counts })
    }

    /// Total number of underlying coin flips.
    pub fn total_flips(&self) -> u64 {
        self.counts.values().sum()
    }
}

impl PoissonModel {
    pub fn new(tree: DependencyTree, intensities: BTreeMap<Pair, Rat>) -> Result<Self> {
        check_total(&tree, &intensities)?;
        check_nonnegative(&intensities, "intensity")?;
        Ok(PoissonModel { tree, intensities })
    }

    /// The point-mass weights on vertices: vertex of `(k, l)` carries
    /// `intensities[k, l]`.
    pub fn levy_measure(&self) -> BTreeMap<crate::hypercube::Vertex, Rat> {
        self.tree
            .entries()
            .map(|(pair, vertex)| (vertex, self.intensities[&pair].clone()))
            .filter(|(_, a)| !a.is_zero())
            .collect()
    }
}

impl GaussianModel {
    pub fn new(
        tree: DependencyTree,
        variances: BTreeMap<Pair, Rat>,
        component_means: BTreeMap<Pair, Rat>,
    ) -> Result<Self> {
        check_total(&tree, &variances)?;
        check_total(&tree, &component_means)?;
        check_nonnegative(&variances, "variance")?;
        Ok(GaussianModel {
            tree,
            variances,
            component_means,
        })
    }

    pub fn centered(tree: DependencyTree, variances: BTreeMap<Pair, Rat>) -> Result<Self> {
        let zeros = tree.pairs().map(|p| (p, Rat::zero())).collect();
        GaussianModel::new(tree, variances, zeros)
    }
}

impl GammaModel {
    pub fn new(tree: DependencyTree, theta: Rat, shapes: BTreeMap<Pair, Rat>) -> Result<Self> {
        if !theta.is_positive() {
            return Err(Error::InvalidInput("scale theta must be positive".into()));
        }
        check_total(&tree, &shapes)?;
        check_nonnegative(&shapes, "shape")?;
        Ok(GammaModel {
            tree,
            theta,
            shapes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorModel {
    Binomial(BinomialModel),
    Poisson(PoissonModel),
    Gaussian(GaussianModel),
    Gamma(GammaModel),
}

impl VectorModel {
    pub fn tree(&self) -> &DependencyTree {
        match self {
            VectorModel::Binomial(m) => &m.tree,
            VectorModel::Poisson(m) => &m.tree,
            VectorModel::Gaussian(m) => &m.tree,
            VectorModel::Gamma(m) => &m.tree,
        }
    }

    pub fn dim(&self) -> usize {
        self.tree().dim()
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            VectorModel::Binomial(_) => "binomial",
            VectorModel::Poisson(_) => "poisson",
            VectorModel::Gaussian(_) => "gaussian",
            VectorModel::Gamma(_) => "gamma",
        }
    }

    /// Component variance per pair, whatever the family.
    pub fn component_variances(&self) -> BTreeMap<Pair, Rat> {
        match self {
            VectorModel::Binomial(m) => {
                let pq = m.p.clone() * (Rat::one() - m.p.clone());
                m.counts
                    .iter()
                    .map(|(pair, &c)| (*pair, pq.clone() * rat_int(c as i64)))
                    .collect()
            }
            VectorModel::Poisson(m) => m.intensities.clone(),
            VectorModel::Gaussian(m) => m.variances.clone(),
            VectorModel::Gamma(m) => m
                .shapes
                .iter()
                .map(|(pair, s)| (*pair, s * &m.theta * &m.theta))
                .collect(),
        }
    }

    /// Component mean per pair.
    pub fn component_means(&self) -> BTreeMap<Pair, Rat> {
        match self {
            VectorModel::Binomial(m) => m
                .counts
                .iter()
                .map(|(pair, &c)| (*pair, m.p.clone() * rat_int(c as i64)))
                .collect(),
            VectorModel::Poisson(m) => m.intensities.clone(),
            VectorModel::Gaussian(m) => m.component_means.clone(),
            VectorModel::Gamma(m) => m
                .shapes
                .iter()
                .map(|(pair, s)| (*pair, s * &m.theta))
                .collect(),
        }
    }

    /// Component central fourth moment per pair, used for exact standard
    /// errors of empirical moments.
    pub fn component_fourth_moments(&self) -> BTreeMap<Pair, Rat> {
        match self {
            VectorModel::Binomial(m) => {
                // n p q (1 + 3 (n - 2) p q)
                let pq = m.p.clone() * (Rat::one() - m.p.clone());
                m.counts
                    .iter()
                    .map(|(pair, &c)| {
                        let n = rat_int(c as i64);
                        let mu4 = n
                            * pq.clone()
                            * (Rat::one()
                                + rat_int(3) * (rat_int(c as i64) - rat_int(2)) * pq.clone());
                        (*pair, mu4)
                    })
                    .collect()
            }
            // lambda + 3 lambda^2
            VectorModel::Poisson(m) => m
                .intensities
                .iter()
                .map(|(pair, a)| (*pair, a + rat_int(3) * a * a))
                .collect(),
            // 3 sigma^4
            VectorModel::Gaussian(m) => m
                .variances
                .iter()
                .map(|(pair, v)| (*pair, rat_int(3) * v * v))
                .collect(),
            // 3 k (k + 2) theta^4
            VectorModel::Gamma(m) => {
                let t4 = m.theta.clone() * &m.theta * &m.theta * &m.theta;
                m.shapes
                    .iter()
                    .map(|(pair, k)| (*pair, rat_int(3) * k * (k + rat_int(2)) * t4.clone()))
                    .collect()
            }
        }
    }
}

/// Exact means and covariance of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Moments {
    pub means: Vec<Rat>,
    pub covariance: CovarianceSpec,
}

/// Exact moments via the membership sums: coordinate mean adds component
/// means over the row, covariance entry adds component variances over pairs
/// whose vertex contains both coordinates.
pub fn exact_moments(model: &VectorModel) -> Moments {
    let tree = model.tree();
    let d = tree.dim();
    let comp_means = model.component_means();
    let comp_vars = model.component_variances();
    let mut means = vec![Rat::zero(); d];
    let mut cov = CovarianceSpec::zero(d);
    for (pair, vertex) in tree.entries() {
        for i in 1..=d {
            if !vertex.contains(i) {
                continue;
            }
            means[i - 1] += &comp_means[&pair];
            for j in i..=d {
                if vertex.contains(j) {
                    let updated = cov.entry(i, j) + &comp_vars[&pair];
                    cov.set_entry(i, j, updated);
                }
            }
        }
    }
    Moments {
        means,
        covariance: cov,
    }
}

/// Exact variance of the centered product `(X_i - E X_i)(X_j - E X_j)`,
/// from component second and fourth moments. Divided by the sample count
/// this is the squared standard error of the empirical covariance entry.
pub fn covariance_product_variance(model: &VectorModel, i: usize, j: usize) -> Rat {
    product_variance_from_parts(
        model.tree(),
        &model.component_variances(),
        &model.component_fourth_moments(),
        i,
        j,
    )
}

/// Same, from explicit component variance and fourth-moment maps (used for
/// affinely rescaled vectors, whose maps scale but whose tree is unchanged).
pub fn product_variance_from_parts(
    tree: &DependencyTree,
    vars: &BTreeMap<Pair, Rat>,
    mu4: &BTreeMap<Pair, Rat>,
    i: usize,
    j: usize,
) -> Rat {
    let in_i: Vec<Pair> = tree
        .entries()
        .filter(|(_, v)| v.contains(i))
        .map(|(p, _)| p)
        .collect();
    let in_j: Vec<Pair> = tree
        .entries()
        .filter(|(_, v)| v.contains(j))
        .map(|(p, _)| p)
        .collect();
    let both: Vec<Pair> = in_i.iter().copied().filter(|p| in_j.contains(p)).collect();

    let mut total = Rat::zero();
    for p in &both {
        total += &mu4[p] - &vars[p] * &vars[p];
    }
    for u in &in_i {
        for v in &in_j {
            if u != v {
                total += &vars[u] * &vars[v];
            }
        }
    }
    for u in &both {
        for v in &both {
            if u != v {
                total += &vars[u] * &vars[v];
            }
        }
    }
    total
}

/// Builds the model of the requested family whose covariance matrix equals
/// `cov` exactly on `tree`. When `cov` carries means they must match the
/// family's implied means (binomial, Poisson, gamma) or are assigned to the
/// leaf components (Gaussian).
pub fn construct(
    tree: &DependencyTree,
    cov: &CovarianceSpec,
    family: &Family,
) -> Result<VectorModel> {
    let dec = invert_covariance(tree, cov)?;
    let report = feasibility(&dec, family);
    if !report.feasible {
        return Err(Error::InfeasibleDecomposition {
            family: family.to_string(),
            report,
        });
    }
    let model = match family {
        Family::Binomial { p } => {
            let counts: BTreeMap<Pair, u64> = report
                .counts
                .expect("feasible binomial report carries counts")
                .iter()
                .map(|(key, &n)| Ok((Pair::parse(key)?, n)))
                .collect::<Result<_>>()?;
            VectorModel::Binomial(BinomialModel::new(tree.clone(), p.clone(), counts)?)
        }
        Family::Poisson => {
            let intensities = dec.entries().map(|(p, v)| (p, v.clone())).collect();
            VectorModel::Poisson(PoissonModel::new(tree.clone(), intensities)?)
        }
        Family::Gaussian => {
            let variances: BTreeMap<Pair, Rat> =
                dec.entries().map(|(p, v)| (p, v.clone())).collect();
            let mut component_means: BTreeMap<Pair, Rat> =
                tree.pairs().map(|p| (p, Rat::zero())).collect();
            if let Some(means) = cov.means() {
                for (i, m) in means.iter().enumerate() {
                    component_means.insert(Pair::new(i + 1, i + 1), m.clone());
                }
            }
            VectorModel::Gaussian(GaussianModel::new(
                tree.clone(),
                variances,
                component_means,
            )?)
        }
        Family::Gamma { theta } => {
            let shapes = dec
                .entries()
                .map(|(p, v)| (p, v / (theta * theta)))
                .collect();
            VectorModel::Gamma(GammaModel::new(tree.clone(), theta.clone(), shapes)?)
        }
    };
    if !matches!(family, Family::Gaussian) {
        if let Some(requested) = cov.means() {
            let implied = exact_moments(&model).means;
            for (idx, (want, have)) in requested.iter().zip(&implied).enumerate() {
                if want != have {
                    return Err(Error::MeanMismatch {
                        index: idx + 1,
                        left: format_rat(want),
                        right: format_rat(have),
                    });
                }
            }
        }
    }
    Ok(model)
}

/// The decomposition a model lives on, back as covariance-calculus data.
pub fn decomposition_of(model: &VectorModel) -> VarianceDecomposition {
    let sigma2 = model.component_variances();
    VarianceDecomposition::new(model.dim(), sigma2).expect("models are total")
}

/// Marginal law of one coordinate, for tail quantile policies.
#[derive(Debug, Clone)]
pub enum MarginalLaw {
    Binomial { n: u64, p: Rat },
    Poisson { lambda: Rat },
}

pub fn marginal_law(model: &VectorModel, i: usize) -> Result<MarginalLaw> {
    let tree = model.tree();
    match model {
        VectorModel::Binomial(m) => {
            let n = tree
                .entries()
                .filter(|(_, v)| v.contains(i))
                .map(|(p, _)| m.counts[&p])
                .sum();
            Ok(MarginalLaw::Binomial { n, p: m.p.clone() })
        }
        VectorModel::Poisson(m) => {
            let mut lambda = Rat::zero();
            for (pair, vertex) in tree.entries() {
                if vertex.contains(i) {
                    lambda += &m.intensities[&pair];
                }
            }
            Ok(MarginalLaw::Poisson { lambda })
        }
        other => Err(Error::UnsupportedFamily {
            family: other.family_name().into(),
            operation: "marginal_law".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::forward_covariance;
    use crate::fixtures;
    use crate::rational::rat;
    use crate::tree::random_tree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform_poisson(tree: &DependencyTree, a: Rat) -> PoissonModel {
        let intensities = tree.pairs().map(|p| (p, a.clone())).collect();
        PoissonModel::new(tree.clone(), intensities).unwrap()
    }

    #[test]
    fn construct_pairwise_d2_examples() {
        let tree = DependencyTree::pairwise(2).unwrap();
        let cov = CovarianceSpec::new(vec![
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(1), rat_int(2)],
        ])
        .unwrap();
        let poisson = construct(&tree, &cov, &Family::Poisson).unwrap();
        let VectorModel::Poisson(m) = &poisson else {
            panic!()
        };
        for pair in tree.pairs() {
            assert_eq!(m.intensities[&pair], rat_int(1));
        }
        let binomial = construct(&tree, &cov, &Family::Binomial { p: rat(1, 2) }).unwrap();
        let VectorModel::Binomial(b) = &binomial else {
            panic!()
        };
        for pair in tree.pairs() {
            assert_eq!(b.counts[&pair], 4);
        }
    }

    #[test]
    fn construct_zero_matrix() {
        let tree = fixtures::pairwise_d4();
        let cov = CovarianceSpec::zero(4);
        for family in [
            Family::Poisson,
            Family::Gaussian,
            Family::Binomial { p: rat(1, 3) },
            Family::Gamma { theta: rat(2, 1) },
        ] {
            let model = construct(&tree, &cov, &family).unwrap();
            let m = exact_moments(&model);
            assert!(m.means.iter().all(|x| x.is_zero()));
            for i in 1..=4 {
                for j in 1..=4 {
                    assert!(m.covariance.entry(i, j).is_zero());
                }
            }
        }
    }

    #[test]
    fn construct_infeasible_reports() {
        let tree = DependencyTree::pairwise(2).unwrap();
        // off-diagonal bigger than variances: sigma2 at a leaf goes negative
        let cov = CovarianceSpec::new(vec![
            vec![rat_int(1), rat_int(2)],
            vec![rat_int(2), rat_int(1)],
        ])
        .unwrap();
        let err = construct(&tree, &cov, &Family::Poisson).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDecomposition { .. }));
    }

    #[test]
    fn worked_example_poisson_mean() {
        // unit intensities: coordinate 3 sums seven components
        let tree = fixtures::worked_example_d5();
        let model = VectorModel::Poisson(uniform_poisson(&tree, rat_int(1)));
        let m = exact_moments(&model);
        assert_eq!(m.means[2], rat_int(7));
    }

    #[test]
    fn binomial_variance_additivity() {
        let tree = fixtures::pairwise_d4();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let counts: BTreeMap<Pair, u64> =
            tree.pairs().map(|p| (p, rng.random_range(0..6))).collect();
        let model = BinomialModel::new(tree.clone(), rat(1, 3), counts.clone()).unwrap();
        let moments = exact_moments(&VectorModel::Binomial(model));
        let pq = rat(1, 3) * rat(2, 3);
        for i in 1..=4 {
            let n_i: u64 = tree
                .entries()
                .filter(|(_, v)| v.contains(i))
                .map(|(p, _)| counts[&p])
                .sum();
            assert_eq!(
                moments.covariance.entry(i, i),
                &(pq.clone() * rat_int(n_i as i64))
            );
            assert_eq!(moments.means[i - 1], rat(1, 3) * rat_int(n_i as i64));
        }
    }

    #[test]
    fn moments_match_forward_covariance_on_random_trees() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..40 {
            let d = rng.random_range(1..=7);
            let tree = random_tree(d, &mut rng);
            let intensities: BTreeMap<Pair, Rat> = tree
                .pairs()
                .map(|p| (p, rat(rng.random_range(0..5), rng.random_range(1..4))))
                .collect();
            let model = VectorModel::Poisson(PoissonModel::new(tree.clone(), intensities).unwrap());
            let moments = exact_moments(&model);
            let via_forward = forward_covariance(&tree, &decomposition_of(&model)).unwrap();
            assert_eq!(moments.covariance, via_forward);
        }
    }

    #[test]
    fn poisson_mean_equals_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let tree = random_tree(5, &mut rng);
        let model = VectorModel::Poisson(uniform_poisson(&tree, rat(3, 7)));
        let m = exact_moments(&model);
        for i in 1..=5 {
            assert_eq!(&m.means[i - 1], m.covariance.entry(i, i));
        }
    }

    #[test]
    fn gaussian_roundtrip_covariance() {
        let tree = fixtures::worked_example_d5();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let dec: BTreeMap<Pair, Rat> = tree
            .pairs()
            .map(|p| (p, rat(rng.random_range(0..9), rng.random_range(1..5))))
            .collect();
        let target =
            forward_covariance(&tree, &VarianceDecomposition::new(5, dec.clone()).unwrap())
                .unwrap();
        let model = construct(&tree, &target, &Family::Gaussian).unwrap();
        assert_eq!(exact_moments(&model).covariance, target);
    }

    #[test]
    fn mean_mismatch_detected() {
        let tree = DependencyTree::pairwise(2).unwrap();
        let cov = CovarianceSpec::new(vec![
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(1), rat_int(2)],
        ])
        .unwrap()
        .with_means(vec![rat_int(5), rat_int(2)])
        .unwrap();
        let err = construct(&tree, &cov, &Family::Poisson).unwrap_err();
        assert!(matches!(err, Error::MeanMismatch { index: 1, .. }));
    }

    #[test]
    fn product_variance_matches_expansion_for_disjoint_and_shared() {
        // single shared Poisson component: X_1 = X_2 = W, product variance
        // is the fourth central moment minus the squared variance
        let tree = DependencyTree::nested_prefix(2).unwrap();
        let mut intensities: BTreeMap<Pair, Rat> = tree.pairs().map(|p| (p, Rat::zero())).collect();
        intensities.insert(Pair::new(1, 2), rat_int(2));
        let model = VectorModel::Poisson(PoissonModel::new(tree.clone(), intensities).unwrap());
        let v = covariance_product_variance(&model, 1, 2);
        // mu4 - var^2 = (lambda + 3 lambda^2) - lambda^2 = lambda + 2 lambda^2
        assert_eq!(v, rat_int(2) + rat_int(2) * rat_int(4));
    }
}
