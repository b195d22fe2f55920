//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them). Every tolerance is pinned here.

use std::collections::BTreeMap;
use std::time::Instant;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use treecorr::battery::standard_battery;
use treecorr::covariance::{forward_covariance, invert_covariance, VarianceDecomposition};
use treecorr::fixtures;
use treecorr::hypercube::{moebius, Vertex};
use treecorr::models::{
    clt_bridge, covariance_product_variance, exact_moments, product_variance_from_parts, sample,
    BinomialModel, GaussianModel, PoissonModel, VectorModel, DEFAULT_STATE_BUDGET,
};
use treecorr::oracle::{certify, OracleVerdict};
use treecorr::ordering::{
    bracket, check_convex, check_supermodular, convex_witness, couple_binomial_increment,
    levy_difference, levy_functional, Holds, Witness,
};
use treecorr::rational::{rat, rat_int, to_f64, Rat};
use treecorr::tree::{random_tree, Pair};

fn pass(criterion: u32, started: Instant, detail: &str) {
    println!(
        "acceptance criterion {criterion}: PASS ({detail}; {:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_worked_family_membership_rows() {
    let t0 = Instant::now();
    let tree = fixtures::worked_example_d5();

    let expected: [&[(usize, usize)]; 5] = [
        &[(1, 1), (1, 2), (1, 3), (1, 4), (1, 5)],
        &[
            (2, 2),
            (1, 2),
            (1, 3),
            (1, 4),
            (2, 3),
            (2, 4),
            (2, 5),
            (3, 4),
            (3, 5),
            (4, 5),
        ],
        &[(3, 3), (1, 3), (1, 4), (2, 3), (3, 4), (3, 5), (4, 5)],
        &[(4, 4), (1, 4), (2, 4), (3, 4), (4, 5)],
        &[
            (5, 5),
            (1, 2),
            (1, 3),
            (1, 4),
            (1, 5),
            (2, 5),
            (3, 5),
            (4, 5),
        ],
    ];
    let table = tree.membership();
    for i in 1..=5 {
        let mut got: Vec<(usize, usize)> = table.row(i).iter().map(|p| (p.k(), p.l())).collect();
        got.sort();
        let mut want = expected[i - 1].to_vec();
        want.sort();
        assert_eq!(got, want, "coordinate {i} sums the displayed components");
    }
    assert_eq!(table.row(3).len(), 7);
    pass(1, t0, "table validates; all five coordinate sums verbatim");
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_moebius_pattern_on_worked_family() {
    let t0 = Instant::now();
    let tree = fixtures::worked_example_d5();
    let family = tree.vertices();

    let mut checked = 0;
    for pair in tree.pairs().filter(|p| !p.is_diagonal()) {
        let Some(g) = tree.grandchild(pair) else {
            continue;
        };
        checked += 1;
        let node = tree.node(pair).unwrap();
        let (ck, cl) = tree.children(pair).unwrap();
        assert_eq!(moebius(&node, &node, &family).unwrap(), 1);
        assert_eq!(
            moebius(&node, &tree.node(ck).unwrap(), &family).unwrap(),
            -1
        );
        assert_eq!(
            moebius(&node, &tree.node(cl).unwrap(), &family).unwrap(),
            -1
        );
        assert_eq!(moebius(&node, &tree.node(g).unwrap(), &family).unwrap(), 1);
        for (other, vertex) in tree.entries() {
            if other == pair || other == ck || other == cl || other == g {
                continue;
            }
            if vertex.is_subset_of(&node) && vertex != node {
                assert_eq!(
                    moebius(&node, &vertex, &family).unwrap(),
                    0,
                    "strict descendant {other:?} of {pair:?}"
                );
            }
        }
    }
    assert!(checked >= 6, "the fixture has nodes with full squares");
    pass(
        2,
        t0,
        "pattern (1,-1,-1,1) and zero elsewhere on every full square",
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_inversion_roundtrip_200_instances() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC3);
    for case in 0..200 {
        let d = rng.random_range(1..=8);
        let tree = random_tree(d, &mut rng);
        let sigma2: BTreeMap<Pair, Rat> = tree
            .pairs()
            .map(|p| (p, rat(rng.random_range(0..=30), rng.random_range(1..=9))))
            .collect();
        let dec = VarianceDecomposition::new(d, sigma2).unwrap();
        let cov = forward_covariance(&tree, &dec).unwrap();
        // invert_covariance computes the Möbius route and the root-to-leaves
        // route and errors unless they agree exactly
        let back = invert_covariance(&tree, &cov).unwrap();
        assert_eq!(back, dec, "case {case}");
    }
    pass(3, t0, "200 exact roundtrips, both inversion routes agree");
}

// ---------------------------------------------------------------- criterion 4

fn empirical_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut means = vec![0.0; d];
    for r in rows {
        for i in 0..d {
            means[i] += r[i];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    (means, cov)
}

#[test]
fn criterion_4_moment_fidelity_with_sampling() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC4);
    let n = 1_000_000usize;

    for family in ["binomial", "poisson", "gaussian"] {
        let d = rng.random_range(2..=5);
        let tree = random_tree(d, &mut rng);
        let model = match family {
            "binomial" => {
                let counts: BTreeMap<Pair, u64> =
                    tree.pairs().map(|p| (p, rng.random_range(0..=3))).collect();
                VectorModel::Binomial(BinomialModel::new(tree.clone(), rat(1, 2), counts).unwrap())
            }
            "poisson" => {
                let intensities: BTreeMap<Pair, Rat> = tree
                    .pairs()
                    .map(|p| (p, rat(rng.random_range(0..=6), 4)))
                    .collect();
                VectorModel::Poisson(PoissonModel::new(tree.clone(), intensities).unwrap())
            }
            _ => {
                let variances: BTreeMap<Pair, Rat> = tree
                    .pairs()
                    .map(|p| (p, rat(rng.random_range(0..=8), 4)))
                    .collect();
                VectorModel::Gaussian(GaussianModel::centered(tree.clone(), variances).unwrap())
            }
        };
        // exact moments equal the forward covariance of the decomposition
        let moments = exact_moments(&model);
        let dec = treecorr::models::decomposition_of(&model);
        let target = forward_covariance(&tree, &dec).unwrap();
        for i in 1..=d {
            for j in i..=d {
                assert_eq!(moments.covariance.entry(i, j), target.entry(i, j));
            }
        }
        // empirical covariance within five exact standard errors per entry
        let rows = sample(&model, n, 0xFEED ^ d as u64);
        let (_, emp) = empirical_covariance(&rows);
        for i in 1..=d {
            for j in i..=d {
                let exact = to_f64(moments.covariance.entry(i, j));
                let se = (to_f64(&covariance_product_variance(&model, i, j)) / n as f64).sqrt();
                let diff = (emp[i - 1][j - 1] - exact).abs();
                assert!(
                    diff <= 5.0 * se + 1e-12,
                    "{family} entry ({i},{j}): |{}| > 5*{se}",
                    emp[i - 1][j - 1] - exact
                );
            }
        }
    }
    pass(
        4,
        t0,
        "exact moments equal targets; 10^6-sample covariances within 5 SE",
    );
}

// ---------------------------------------------------------------- criterion 5

/// Adds a covariance quantum at an eligible pair while preserving every
/// mean: the alternating pattern on (pair, children, grandchild), or on
/// (pair, leaf k, leaf l) when the node is exactly {k, l}.
fn bump_poisson(model: &PoissonModel, rng: &mut ChaCha12Rng) -> Option<(PoissonModel, Pair, Rat)> {
    let tree = &model.tree;
    let mut eligible: Vec<(Pair, Vec<(Pair, i32)>)> = Vec::new();
    for pair in tree.pairs().filter(|p| !p.is_diagonal()) {
        let (ck, cl) = tree.children(pair).unwrap();
        if let Some(g) = tree.grandchild(pair) {
            if model.intensities[&ck].is_positive() && model.intensities[&cl].is_positive() {
                eligible.push((pair, vec![(pair, 1), (ck, -1), (cl, -1), (g, 1)]));
            }
        } else if tree.node(pair).unwrap().len() == 2
            && model.intensities[&ck].is_positive()
            && model.intensities[&cl].is_positive()
        {
            eligible.push((pair, vec![(pair, 1), (ck, -1), (cl, -1)]));
        }
    }
    if eligible.is_empty() {
        return None;
    }
    let (pair, moves) = eligible[rng.random_range(0..eligible.len())].clone();
    let mut cap: Option<Rat> = None;
    for (p, sign) in &moves {
        if *sign < 0 {
            let v = model.intensities[p].clone();
            cap = Some(match cap {
                None => v,
                Some(c) => c.min(v),
            });
        }
    }
    let delta = cap.unwrap() / rat_int(2);
    if !delta.is_positive() {
        return None;
    }
    let mut intensities = model.intensities.clone();
    for (p, sign) in moves {
        let updated = intensities[&p].clone() + rat_int(sign as i64) * delta.clone();
        intensities.insert(p, updated);
    }
    let bumped = PoissonModel::new(tree.clone(), intensities).unwrap();
    Some((bumped, pair, delta))
}

fn bump_binomial(model: &BinomialModel, rng: &mut ChaCha12Rng) -> Option<BinomialModel> {
    let tree = &model.tree;
    let mut eligible: Vec<Vec<(Pair, i64)>> = Vec::new();
    for pair in tree.pairs().filter(|p| !p.is_diagonal()) {
        let (ck, cl) = tree.children(pair).unwrap();
        let pattern = if let Some(g) = tree.grandchild(pair) {
            vec![(pair, 1), (ck, -1), (cl, -1), (g, 1)]
        } else if tree.node(pair).unwrap().len() == 2 {
            vec![(pair, 1), (ck, -1), (cl, -1)]
        } else {
            continue;
        };
        if pattern.iter().all(|(p, s)| *s > 0 || model.counts[p] >= 1) {
            eligible.push(pattern);
        }
    }
    if eligible.is_empty() {
        return None;
    }
    let pattern = eligible[rng.random_range(0..eligible.len())].clone();
    let mut counts = model.counts.clone();
    for (p, s) in pattern {
        let c = counts[&p] as i64 + s;
        counts.insert(p, c as u64);
    }
    Some(BinomialModel::new(tree.clone(), model.p.clone(), counts).unwrap())
}

#[test]
fn criterion_5_oracle_agrees_with_criterion_100_cases() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC5);
    let mut cases: Vec<(VectorModel, VectorModel, Holds)> = Vec::new();

    // 50 Poisson pairs
    let mut produced = 0;
    while produced < 50 {
        let d = if produced % 10 < 7 { 2 } else { 3 };
        let tree = random_tree(d, &mut rng);
        // strictly positive intensities, scaled so coordinate means stay
        // small enough for tight grids
        let mean_target = if d == 2 { rat(1, 2) } else { rat(1, 8) };
        let mut intensities: BTreeMap<Pair, Rat> = tree
            .pairs()
            .map(|p| (p, rat(rng.random_range(1..=4), 8)))
            .collect();
        let base_tmp = PoissonModel::new(tree.clone(), intensities.clone()).unwrap();
        let max_mean = exact_moments(&VectorModel::Poisson(base_tmp))
            .means
            .into_iter()
            .max()
            .unwrap();
        if max_mean > mean_target {
            let scale = mean_target.clone() / max_mean;
            for v in intensities.values_mut() {
                *v = v.clone() * scale.clone();
            }
        }
        let base = PoissonModel::new(tree.clone(), intensities).unwrap();
        let Some((bumped, _, _)) = bump_poisson(&base, &mut rng) else {
            continue;
        };
        match produced % 5 {
            // ordered: criterion holds
            0 | 1 => cases.push((
                VectorModel::Poisson(base),
                VectorModel::Poisson(bumped),
                Holds::Yes,
            )),
            // reversed: covariance dominance fails
            2 | 3 => cases.push((
                VectorModel::Poisson(bumped),
                VectorModel::Poisson(base),
                Holds::No,
            )),
            // mean bump: mean equality fails
            _ => {
                let mut intensities = base.intensities.clone();
                let leaf = Pair::new(1, 1);
                intensities.insert(leaf, intensities[&leaf].clone() + rat(1, 16));
                let shifted = PoissonModel::new(tree.clone(), intensities).unwrap();
                cases.push((
                    VectorModel::Poisson(base),
                    VectorModel::Poisson(shifted),
                    Holds::No,
                ));
            }
        }
        produced += 1;
    }

    // 50 binomial pairs
    let mut produced = 0;
    while produced < 50 {
        let d = if produced % 10 < 7 { 2 } else { 3 };
        let tree = random_tree(d, &mut rng);
        let counts: BTreeMap<Pair, u64> = tree
            .pairs()
            .map(|p| (p, if rng.random_bool(0.6) { 1 } else { 0 }))
            .collect();
        let base = BinomialModel::new(tree.clone(), rat(1, 2), counts).unwrap();
        let Some(bumped) = bump_binomial(&base, &mut rng) else {
            continue;
        };
        match produced % 5 {
            0 | 1 => cases.push((
                VectorModel::Binomial(base),
                VectorModel::Binomial(bumped),
                Holds::Yes,
            )),
            2 | 3 => cases.push((
                VectorModel::Binomial(bumped),
                VectorModel::Binomial(base),
                Holds::No,
            )),
            _ => {
                let mut counts = base.counts.clone();
                let leaf = Pair::new(1, 1);
                counts.insert(leaf, counts[&leaf] + 1);
                let shifted = BinomialModel::new(tree.clone(), rat(1, 2), counts).unwrap();
                cases.push((
                    VectorModel::Binomial(base),
                    VectorModel::Binomial(shifted),
                    Holds::No,
                ));
            }
        }
        produced += 1;
    }

    assert_eq!(cases.len(), 100);
    let mut agreements = 0;
    for (idx, (x, y, expected)) in cases.iter().enumerate() {
        let verdict = check_supermodular(x, y).unwrap();
        assert_eq!(verdict.holds, *expected, "criterion verdict, case {idx}");
        let cert = certify(x, y, None, false, false, DEFAULT_STATE_BUDGET, 1e-9).unwrap();
        let defect = cert.mass_defect_x + cert.mass_defect_y;
        assert!(defect < 1e-9, "case {idx}: mass defect {defect:e}");
        let expected_oracle = match expected {
            Holds::Yes => OracleVerdict::Certified,
            _ => OracleVerdict::Violated,
        };
        assert_eq!(
            cert.verdict, expected_oracle,
            "case {idx}: oracle vs criterion (value {})",
            cert.value
        );
        agreements += 1;
    }
    assert_eq!(agreements, 100);
    pass(5, t0, "oracle matched the criterion in 100/100 cases");
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_coupling_inequality() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC6);
    let n = 1_000_000usize;
    let mut done = 0;
    while done < 20 {
        let d = rng.random_range(3..=5);
        let tree = random_tree(d, &mut rng);
        let counts: BTreeMap<Pair, u64> =
            tree.pairs().map(|p| (p, rng.random_range(1..=2))).collect();
        let b = BinomialModel::new(tree.clone(), rat(1, 2), counts).unwrap();
        let eligible: Vec<Pair> = tree
            .pairs()
            .filter(|p| !p.is_diagonal() && tree.grandchild(*p).is_some())
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let pair = eligible[rng.random_range(0..eligible.len())];
        let coupling = couple_binomial_increment(&b, pair).unwrap();
        done += 1;

        // exact four-atom inequality for every battery member at the
        // reduced arity
        let arity = coupling.reduced_coordinates().len();
        let battery = standard_battery(arity, 0xBA7 + done as u64);
        for phi in &battery {
            let diff = coupling.four_atom_difference(phi);
            assert!(
                !diff.is_negative(),
                "coupling {done}, {}: four-atom difference negative",
                phi.name
            );
        }

        // coupled Monte Carlo: paired estimates never dip below -5 SE
        let battery_full = standard_battery(d, 0xBA8 + done as u64);
        let draws = coupling.sample(n, 0xC0FFEE ^ done as u64, 0);
        let mut xa_f = vec![0.0f64; d];
        let mut xb_f = vec![0.0f64; d];
        let mut sums = vec![0.0f64; battery_full.len()];
        let mut sumsq = vec![0.0f64; battery_full.len()];
        for (xa, xb) in &draws {
            for i in 0..d {
                xa_f[i] = xa[i] as f64;
                xb_f[i] = xb[i] as f64;
            }
            for (f, phi) in battery_full.iter().enumerate() {
                let diff = phi.eval_f64(&xb_f) - phi.eval_f64(&xa_f);
                sums[f] += diff;
                sumsq[f] += diff * diff;
            }
        }
        for (f, phi) in battery_full.iter().enumerate() {
            let mean = sums[f] / n as f64;
            let var = (sumsq[f] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                mean >= -5.0 * se - 1e-12,
                "coupling {done}, {}: paired mean {mean} below -5 SE ({se})",
                phi.name
            );
        }
    }
    pass(
        6,
        t0,
        "20 couplings: exact four-atom inequality and 10^6-draw paired checks",
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_levy_identity_1000_instances() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC7);
    for case in 0..1000 {
        let d = rng.random_range(1..=6);
        let tree = random_tree(d, &mut rng);
        let intensities: BTreeMap<Pair, Rat> = tree
            .pairs()
            .map(|p| (p, rat(rng.random_range(0..=12), rng.random_range(1..=6))))
            .collect();
        let model = PoissonModel::new(tree.clone(), intensities.clone()).unwrap();
        // random rational test function on all vertices, zero at the origin
        let mut values: std::collections::HashMap<u64, Rat> = std::collections::HashMap::new();
        for bits in 0..(1u64 << d) {
            let v = if bits == 0 {
                Rat::zero()
            } else {
                rat(rng.random_range(-20..=20), rng.random_range(1..=7))
            };
            values.insert(bits, v);
        }
        let phi = move |v: &Vertex| values[&v.bits()].clone();
        // levy_functional evaluates the raw sum and the moment expansion and
        // errors unless they agree exactly
        let value = levy_functional(&model, &phi).unwrap();
        let direct: Rat = tree
            .entries()
            .map(|(p, v)| intensities[&p].clone() * phi(&v))
            .sum();
        assert_eq!(value, direct, "case {case}");
    }
    pass(
        7,
        t0,
        "raw sum equals moment expansion on 1000 random instances",
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_convex_detection() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC8);
    let mut done = 0;
    while done < 25 {
        let d = rng.random_range(2..=5);
        let tree = random_tree(d, &mut rng);
        let intensities: BTreeMap<Pair, Rat> = tree
            .pairs()
            .map(|p| (p, rat(rng.random_range(1..=6), 4)))
            .collect();
        let base = PoissonModel::new(tree.clone(), intensities).unwrap();
        let Some((bumped, pair, delta)) = bump_poisson(&base, &mut rng) else {
            continue;
        };
        done += 1;

        // single strict covariance increase at `pair`, equal means
        let mx = exact_moments(&VectorModel::Poisson(base.clone()));
        let my = exact_moments(&VectorModel::Poisson(bumped.clone()));
        assert_eq!(mx.means, my.means);
        let gap = my.covariance.entry(pair.k(), pair.l()) - mx.covariance.entry(pair.k(), pair.l());
        assert_eq!(gap, delta);

        // the witness integrates to exactly minus the gap, driven by its
        // bracket of -1 at the pair
        let phi = convex_witness(&tree, pair, false).unwrap();
        let node = tree.node(pair).unwrap();
        assert_eq!(
            bracket(&*phi, &node, pair.k(), pair.l()).unwrap(),
            rat_int(-1)
        );
        let diff = levy_difference(&base, &bumped, &*phi).unwrap();
        assert_eq!(diff, -delta.clone());

        // convex order fails with that certificate; identical laws hold
        let verdict = check_convex(
            &VectorModel::Poisson(base.clone()),
            &VectorModel::Poisson(bumped),
        )
        .unwrap();
        assert_eq!(verdict.holds, Holds::No);
        match verdict.evidence.witness {
            Some(Witness::ConvexFunction { k, l, .. }) => {
                assert_eq!((k, l), (pair.k(), pair.l()));
            }
            other => panic!("expected a convex witness, got {other:?}"),
        }
        let same = check_convex(
            &VectorModel::Poisson(base.clone()),
            &VectorModel::Poisson(base),
        )
        .unwrap();
        assert_eq!(same.holds, Holds::Yes);
    }
    pass(
        8,
        t0,
        "25 single-gap pairs: exact -gap integrals and convex refutation",
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_clt_bridge() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC9);
    let d = 4;
    let tree = random_tree(d, &mut rng);
    let variances: BTreeMap<Pair, Rat> = tree
        .pairs()
        .map(|p| (p, rat(rng.random_range(1..=6), 4)))
        .collect();
    let target = GaussianModel::centered(tree.clone(), variances).unwrap();
    let target_cov = exact_moments(&VectorModel::Gaussian(target.clone())).covariance;

    for n in [100u64, 10_000] {
        let bridge = clt_bridge(&target, n, rat(1, 2)).unwrap();
        for m in bridge.standardized_mean() {
            assert!(m.is_zero(), "standardized mean exactly zero");
        }
        let cov = bridge.standardized_covariance();
        let bound = bridge.covariance_error_bound();
        for i in 1..=d {
            for j in i..=d {
                let diff = cov.entry(i, j) - target_cov.entry(i, j);
                assert!(
                    diff.abs() <= bound,
                    "n={n} entry ({i},{j}): {} beyond O(1/n) bound {}",
                    diff,
                    bound
                );
            }
        }
    }

    // empirical covariance of standardized samples at n = 10^4
    let bridge = clt_bridge(&target, 10_000, rat(1, 2)).unwrap();
    let n_samples = 1_000_000usize;
    let rows = bridge.sample_standardized(n_samples, 0xB41D6E, 0);
    let (_, emp) = empirical_covariance(&rows);
    let exact_cov = bridge.standardized_covariance();
    let (vars, mu4) = bridge.standardized_component_moments();
    for i in 1..=d {
        for j in i..=d {
            let exact = to_f64(exact_cov.entry(i, j));
            let pv = product_variance_from_parts(&tree, &vars, &mu4, i, j);
            let se = (to_f64(&pv) / n_samples as f64).sqrt();
            let diff = (emp[i - 1][j - 1] - exact).abs();
            assert!(diff <= 5.0 * se + 1e-12, "entry ({i},{j}): {diff} > 5*{se}");
        }
    }
    pass(
        9,
        t0,
        "exact zero means, O(1/n) covariance bounds, 10^6-sample check at n=10^4",
    );
}
