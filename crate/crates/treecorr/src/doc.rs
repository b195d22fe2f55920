//! JSON document forms of the domain types.
//!
//! Rationals travel as strings `"p/q"` (or integer / decimal strings); JSON
//! numbers are accepted on input, with float-typed numbers flagged so the
//! CLI can warn that they were read through their decimal rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::covariance::{CovarianceSpec, Family, VarianceDecomposition};
use crate::error::{Error, Result};
use crate::models::{BinomialModel, GammaModel, GaussianModel, PoissonModel, VectorModel};
use crate::rational::{format_rat, rat_from_json, Rat};
use crate::tree::{Pair, TreeDoc};

/// Tracks whether any float-typed JSON number was coerced to a rational.
#[derive(Debug, Default, Clone, Copy)]
pub struct CoercionLog {
    pub float_coercions: usize,
}

fn read_rat(v: &Value, log: &mut CoercionLog) -> Result<Rat> {
    let (r, coerced) = rat_from_json(v)?;
    if coerced {
        log.float_coercions += 1;
    }
    Ok(r)
}

/// `{ "dim": d, "matrix": [[..]], "means": [..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovDoc {
    pub dim: usize,
    pub matrix: Vec<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Value>>,
}

impl CovDoc {
    pub fn from_spec(spec: &CovarianceSpec) -> Self {
        CovDoc {
            dim: spec.dim(),
            matrix: spec
                .rows()
                .iter()
                .map(|row| row.iter().map(|v| Value::String(format_rat(v))).collect())
                .collect(),
            means: spec
                .means()
                .map(|m| m.iter().map(|v| Value::String(format_rat(v))).collect()),
        }
    }

    pub fn into_spec(&self, log: &mut CoercionLog) -> Result<CovarianceSpec> {
        if self.matrix.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.matrix.len(),
            });
        }
        let entries = self
            .matrix
            .iter()
            .map(|row| row.iter().map(|v| read_rat(v, log)).collect())
            .collect::<Result<Vec<Vec<Rat>>>>()?;
        let spec = CovarianceSpec::new(entries)?;
        match &self.means {
            Some(means) => {
                let means = means
                    .iter()
                    .map(|v| read_rat(v, log))
                    .collect::<Result<Vec<Rat>>>()?;
                spec.with_means(means)
            }
            None => Ok(spec),
        }
    }
}

/// `{ "dim": d, "sigma2": { "k,l": .. }, "feasible": bool }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionDoc {
    pub dim: usize,
    pub sigma2: BTreeMap<String, Value>,
    #[serde(default)]
    pub feasible: Option<bool>,
}

impl DecompositionDoc {
    pub fn from_decomposition(dec: &VarianceDecomposition) -> Self {
        DecompositionDoc {
            dim: dec.dim(),
            sigma2: dec
                .entries()
                .map(|(p, v)| (p.to_string(), Value::String(format_rat(v))))
                .collect(),
            feasible: Some(dec.is_feasible()),
        }
    }

    pub fn into_decomposition(&self, log: &mut CoercionLog) -> Result<VarianceDecomposition> {
        let mut sigma2 = BTreeMap::new();
        for (key, value) in &self.sigma2 {
            sigma2.insert(Pair::parse(key)?, read_rat(value, log)?);
        }
        // absent pairs read as zero
        for pair in Pair::all(self.dim) {
            sigma2.entry(pair).or_insert_with(num_traits::Zero::zero);
        }
        VarianceDecomposition::new(self.dim, sigma2)
    }
}

/// `{ "family": .., "tree": .., "params": {..}, "components": { "k,l": .. } }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub family: String,
    pub tree: TreeDoc,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub components: BTreeMap<String, Value>,
}

impl ModelDoc {
    pub fn from_model(model: &VectorModel) -> Self {
        let tree = TreeDoc::from_tree(model.tree());
        let mut params = BTreeMap::new();
        let components: BTreeMap<String, Value> = match model {
            VectorModel::Binomial(m) => {
                params.insert("p".into(), Value::String(format_rat(&m.p)));
                m.counts
                    .iter()
                    .map(|(p, &c)| (p.to_string(), Value::String(c.to_string())))
                    .collect()
            }
            VectorModel::Poisson(m) => m
                .intensities
                .iter()
                .map(|(p, v)| (p.to_string(), Value::String(format_rat(v))))
                .collect(),
            VectorModel::Gaussian(m) => {
                let means: BTreeMap<String, Value> = m
                    .component_means
                    .iter()
                    .filter(|(_, v)| !num_traits::Zero::is_zero(*v))
                    .map(|(p, v)| (p.to_string(), Value::String(format_rat(v))))
                    .collect();
                if !means.is_empty() {
                    params.insert("means".into(), serde_json::to_value(means).unwrap());
                }
                m.variances
                    .iter()
                    .map(|(p, v)| (p.to_string(), Value::String(format_rat(v))))
                    .collect()
            }
            VectorModel::Gamma(m) => {
                params.insert("theta".into(), Value::String(format_rat(&m.theta)));
                m.shapes
                    .iter()
                    .map(|(p, v)| (p.to_string(), Value::String(format_rat(v))))
                    .collect()
            }
        };
        ModelDoc {
            family: model.family_name().into(),
            tree,
            params,
            components,
        }
    }

    pub fn into_model(&self, log: &mut CoercionLog) -> Result<VectorModel> {
        let tree = self.tree.into_tree()?;
        let mut components: BTreeMap<Pair, Rat> = BTreeMap::new();
        for (key, value) in &self.components {
            components.insert(Pair::parse(key)?, read_rat(value, log)?);
        }
        for pair in tree.pairs() {
            components
                .entry(pair)
                .or_insert_with(num_traits::Zero::zero);
        }
        match self.family.as_str() {
            "binomial" => {
                let p = self
                    .params
                    .get("p")
                    .ok_or_else(|| Error::Parse("binomial model needs params.p".into()))?;
                let p = read_rat(p, log)?;
                let counts = components
                    .into_iter()
                    .map(|(pair, v)| {
                        crate::rational::as_u64(&v)
                            .map(|n| (pair, n))
                            .ok_or_else(|| {
                                Error::Parse(format!(
                                    "count at {pair} must be a nonnegative integer"
                                ))
                            })
                    })
                    .collect::<Result<BTreeMap<Pair, u64>>>()?;
                Ok(VectorModel::Binomial(BinomialModel::new(tree, p, counts)?))
            }
            "poisson" => Ok(VectorModel::Poisson(PoissonModel::new(tree, components)?)),
            "gaussian" => {
                let mut means: BTreeMap<Pair, Rat> = tree
                    .pairs()
                    .map(|p| (p, num_traits::Zero::zero()))
                    .collect();
                if let Some(value) = self.params.get("means") {
                    let map: BTreeMap<String, Value> = serde_json::from_value(value.clone())
                        .map_err(|e| Error::Parse(format!("bad means map: {e}")))?;
                    for (key, v) in &map {
                        means.insert(Pair::parse(key)?, read_rat(v, log)?);
                    }
                }
                Ok(VectorModel::Gaussian(GaussianModel::new(
                    tree, components, means,
                )?))
            }
            "gamma" => {
                let theta = self
                    .params
                    .get("theta")
                    .ok_or_else(|| Error::Parse("gamma model needs params.theta".into()))?;
                let theta = read_rat(theta, log)?;
                Ok(VectorModel::Gamma(GammaModel::new(
                    tree, theta, components,
                )?))
            }
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Parses a family argument such as `binomial`, `poisson`, `gaussian`,
/// `gamma`, with `p`/`theta` supplied separately.
pub fn family_from_args(name: &str, p: Option<&str>, theta: Option<&str>) -> Result<Family> {
    match name {
        "binomial" => {
            let p = p.unwrap_or("1/2");
            Ok(Family::Binomial {
                p: crate::rational::parse_rat(p)?,
            })
        }
        "poisson" => Ok(Family::Poisson),
        "gaussian" => Ok(Family::Gaussian),
        "gamma" => {
            let theta = theta.unwrap_or("1");
            Ok(Family::Gamma {
                theta: crate::rational::parse_rat(theta)?,
            })
        }
        other => Err(Error::Parse(format!("unknown family {other:?}"))),
    }
}
