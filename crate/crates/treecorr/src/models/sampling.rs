//! Seeded, stream-deterministic samplers.
//!
//! Each draw generates the independent components in pair order and sums
//! them along the membership rows. A `(seed, stream)` pair fully determines
//! the output, so parallel callers get independent, reproducible streams by
//! varying the stream index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};

use crate::models::VectorModel;
use crate::rational::to_f64;
use crate::tree::Pair;

enum ComponentSampler {
    Constant(f64),
    Binomial(Binomial),
    Poisson(Poisson<f64>),
    Normal(Normal<f64>),
    Gamma(Gamma<f64>),
}

impl ComponentSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ComponentSampler::Constant(c) => *c,
            ComponentSampler::Binomial(d) => d.sample(rng) as f64,
            ComponentSampler::Poisson(d) => d.sample(rng),
            ComponentSampler::Normal(d) => d.sample(rng),
            ComponentSampler::Gamma(d) => d.sample(rng),
        }
    }
}

fn component_samplers(model: &VectorModel) -> Vec<(Pair, ComponentSampler)> {
    match model {
        VectorModel::Binomial(m) => {
            let p = to_f64(&m.p);
            m.counts
                .iter()
                .map(|(pair, &n)| {
                    let sampler = if n == 0 || p == 0.0 {
                        ComponentSampler::Constant(0.0)
                    } else if p == 1.0 {
                        ComponentSampler::Constant(n as f64)
                    } else {
                        ComponentSampler::Binomial(Binomial::new(n, p).expect("p in (0,1)"))
                    };
                    (*pair, sampler)
                })
                .collect()
        }
        VectorModel::Poisson(m) => m
            .intensities
            .iter()
            .map(|(pair, a)| {
                let lambda = to_f64(a);
                let sampler = if lambda == 0.0 {
                    ComponentSampler::Constant(0.0)
                } else {
                    ComponentSampler::Poisson(Poisson::new(lambda).expect("lambda > 0"))
                };
                (*pair, sampler)
            })
            .collect(),
        VectorModel::Gaussian(m) => m
            .variances
            .iter()
            .map(|(pair, v)| {
                let mean = to_f64(&m.component_means[pair]);
                let sd = to_f64(v).sqrt();
                let sampler = if sd == 0.0 {
                    ComponentSampler::Constant(mean)
                } else {
                    ComponentSampler::Normal(Normal::new(mean, sd).expect("finite params"))
                };
                (*pair, sampler)
            })
            .collect(),
        VectorModel::Gamma(m) => {
            let theta = to_f64(&m.theta);
            m.shapes
                .iter()
                .map(|(pair, k)| {
                    let shape = to_f64(k);
                    let sampler = if shape == 0.0 {
                        ComponentSampler::Constant(0.0)
                    } else {
                        ComponentSampler::Gamma(
                            Gamma::new(shape, theta).expect("positive shape and scale"),
                        )
                    };
                    (*pair, sampler)
                })
                .collect()
        }
    }
}

/// `n_samples` i.i.d. draws of the vector, stream 0.
pub fn sample(model: &VectorModel, n_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_stream(model, n_samples, seed, 0)
}

/// Same, on an explicit stream index. Distinct streams are independent.
pub fn sample_stream(
    model: &VectorModel,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, stream);
    let samplers = component_samplers(model);
    let membership = model.tree().membership();
    let d = model.dim();
    // incidence[c] lists the coordinates fed by component c
    let incidence: Vec<Vec<usize>> = samplers
        .iter()
        .map(|(pair, _)| {
            (1..=d)
                .filter(|&i| membership.row(i).contains(pair))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut row = vec![0.0f64; d];
        for (c, (_, sampler)) in samplers.iter().enumerate() {
            let value = sampler.draw(&mut rng);
            for &i in &incidence[c] {
                row[i - 1] += value;
            }
        }
        out.push(row);
    }
    out
}

/// The crate-wide seeded generator for a `(seed, stream)` pair.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
