//! Command-line front end.
//!
//! Machine-readable JSON goes to stdout, a one-line human summary to stderr.
//! Exit codes: 0 for success / verdict-yes / certified, 1 for verdict-no /
//! violated (and for undecided outcomes), 2 for input or usage errors.
//! `TREECORR_BUDGET` overrides the enumeration budget.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use serde_json::json;

use crate::battery::standard_battery;
use crate::covariance::{feasibility, forward_covariance, invert_covariance, Family};
use crate::doc::{family_from_args, CoercionLog, CovDoc, DecompositionDoc, ModelDoc};
use crate::error::Error;
use crate::hypercube::Vertex;
use crate::models::{construct, exact_moments, sample_stream, VectorModel, DEFAULT_STATE_BUDGET};
use crate::oracle::{battery_estimate, certify, OracleVerdict};
use crate::ordering::{
    check_convex, check_increasing_supermodular, check_supermodular, couple_binomial_increment,
    Holds,
};
use crate::rational::format_rat;
use crate::tree::{DependencyTree, Pair, TreeDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "treecorr",
    about = "Tree-structured random vectors with prescribed covariance, and stochastic-order certification",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Tree documents: validation and builders.
    Tree {
        #[command(subcommand)]
        cmd: TreeCmd,
    },
    /// Covariance matrix of a decomposition on a tree.
    Forward {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        dec: PathBuf,
    },
    /// Decomposition recovering a covariance matrix on a tree.
    Invert {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        cov: PathBuf,
        /// Coin probability for the binomial feasibility block.
        #[arg(long, default_value = "1/2")]
        p: String,
        /// Scale for the gamma feasibility block.
        #[arg(long, default_value = "1")]
        theta: String,
    },
    /// Model of a family matching a covariance matrix exactly.
    Construct {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        cov: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        theta: Option<String>,
        /// Write the model JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded samples of a model as CSV (header X1..Xd).
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ordering decisions, couplings and the grid oracle.
    Order {
        #[command(subcommand)]
        cmd: OrderCmd,
    },
    /// Component-measure reports.
    Levy {
        #[command(subcommand)]
        cmd: LevyCmd,
    },
}

#[derive(Subcommand, Debug)]
enum TreeCmd {
    /// Validate a tree document; exit 0/1 and print the defect report.
    Validate { file: PathBuf },
    /// Emit a named structure as a tree document.
    Build {
        #[arg(long, value_enum)]
        kind: TreeKind,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TreeKind {
    Pairwise,
    Prior,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Binomial,
    Poisson,
    Gaussian,
    Gamma,
}

impl FamilyArg {
    fn name(self) -> &'static str {
        match self {
            FamilyArg::Binomial => "binomial",
            FamilyArg::Poisson => "poisson",
            FamilyArg::Gaussian => "gaussian",
            FamilyArg::Gamma => "gamma",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RelationArg {
    Sm,
    Ism,
    Cx,
}

#[derive(Subcommand, Debug)]
enum OrderCmd {
    /// Decide an ordering by the exact covariance criterion.
    Check {
        #[arg(long, value_enum)]
        relation: RelationArg,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// One-step coupled sampler at a pair (columns XA1..XAd,XB1..XBd).
    Couple {
        /// Binomial model taken as the larger side.
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        pair: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid LP certification of supermodular dominance.
    Oracle {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Grid cap per coordinate; tail policy when omitted.
        #[arg(long)]
        cap: Option<u32>,
        /// Add monotonicity rows (increasing-supermodular variant).
        #[arg(long)]
        monotone: bool,
        /// Solve in exact rationals (finite-support models only).
        #[arg(long)]
        exact: bool,
    },
    /// Monte Carlo battery estimates as CSV.
    Battery {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum LevyCmd {
    /// Expand a Poisson model's component measure through its moments.
    Decompose {
        #[arg(long)]
        model: PathBuf,
    },
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    budget: u64,
    log: CoercionLog,
}

impl Ctx<'_> {
    fn warn_coercions(&mut self) {
        if self.log.float_coercions > 0 {
            let _ = writeln!(
                self.err,
                "warning: {} float-typed JSON numbers were read through their decimal rendering; prefer \"p/q\" strings in exact workflows",
                self.log.float_coercions
            );
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("cannot parse {}: {e}", path.display())))
}

fn emit(ctx: &mut Ctx, value: &serde_json::Value) {
    let _ = writeln!(ctx.out, "{}", serde_json::to_string_pretty(value).unwrap());
}

fn write_text(path: &Option<PathBuf>, text: &str, ctx: &mut Ctx) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Parse(format!("cannot write {}: {e}", p.display()))),
        None => {
            let _ = write!(ctx.out, "{text}");
            Ok(())
        }
    }
}

/// Runs the CLI on explicit arguments and writers; returns the exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    let budget = std::env::var("TREECORR_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_STATE_BUDGET);
    let mut ctx = Ctx {
        out,
        err,
        budget,
        log: CoercionLog::default(),
    };
    match dispatch(cli.cmd, &mut ctx) {
        Ok(code) => {
            ctx.warn_coercions();
            code
        }
        Err(e) => {
            ctx.warn_coercions();
            let _ = writeln!(ctx.err, "error: {e}");
            let payload = json!({ "error": e.to_string() });
            let _ = writeln!(
                ctx.out,
                "{}",
                serde_json::to_string_pretty(&payload).unwrap()
            );
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Cmd, ctx: &mut Ctx) -> Result<i32, Error> {
    match cmd {
        Cmd::Tree { cmd } => match cmd {
            TreeCmd::Validate { file } => {
                let doc: TreeDoc = read_json(&file)?;
                match doc.into_tree() {
                    Ok(tree) => {
                        emit(
                            ctx,
                            &json!({
                                "valid": true,
                                "dim": tree.dim(),
                                "nodes": tree.pairs().count(),
                            }),
                        );
                        let _ = writeln!(ctx.err, "valid tree, dim {}", tree.dim());
                        Ok(EXIT_OK)
                    }
                    Err(Error::InvalidTree { defects }) => {
                        emit(ctx, &json!({ "valid": false, "defects": defects }));
                        let _ = writeln!(ctx.err, "invalid tree: {} defects", defects.len());
                        Ok(EXIT_NEGATIVE)
                    }
                    Err(e) => Err(e),
                }
            }
            TreeCmd::Build { kind, dim, out } => {
                let tree = match kind {
                    TreeKind::Pairwise => DependencyTree::pairwise(dim)?,
                    TreeKind::Prior => DependencyTree::nested_prefix(dim)?,
                };
                let doc = TreeDoc::from_tree(&tree);
                let text = serde_json::to_string_pretty(&doc).unwrap();
                write_text(&out, &format!("{text}\n"), ctx)?;
                let _ = writeln!(ctx.err, "built {kind:?} tree, dim {dim}");
                Ok(EXIT_OK)
            }
        },
        Cmd::Forward { tree, dec } => {
            let tree = read_json::<TreeDoc>(&tree)?.into_tree()?;
            let dec = read_json::<DecompositionDoc>(&dec)?.into_decomposition(&mut ctx.log)?;
            let cov = forward_covariance(&tree, &dec)?;
            emit(ctx, &serde_json::to_value(CovDoc::from_spec(&cov)).unwrap());
            let _ = writeln!(ctx.err, "forward covariance computed, dim {}", cov.dim());
            Ok(EXIT_OK)
        }
        Cmd::Invert {
            tree,
            cov,
            p,
            theta,
        } => {
            let tree = read_json::<TreeDoc>(&tree)?.into_tree()?;
            let cov = read_json::<CovDoc>(&cov)?.into_spec(&mut ctx.log)?;
            let dec = invert_covariance(&tree, &cov)?;
            let binomial = family_from_args("binomial", Some(&p), None)?;
            let gamma = family_from_args("gamma", None, Some(&theta))?;
            let feas = json!({
                "gaussian": feasibility(&dec, &Family::Gaussian),
                "poisson": feasibility(&dec, &Family::Poisson),
                "binomial": feasibility(&dec, &binomial),
                "gamma": feasibility(&dec, &gamma),
            });
            let mut payload =
                serde_json::to_value(DecompositionDoc::from_decomposition(&dec)).unwrap();
            payload["feasibility"] = feas;
            emit(ctx, &payload);
            let _ = writeln!(
                ctx.err,
                "decomposition {}",
                if dec.is_feasible() {
                    "feasible"
                } else {
                    "has negative entries"
                }
            );
            Ok(EXIT_OK)
        }
        Cmd::Construct {
            tree,
            cov,
            family,
            p,
            theta,
            out,
        } => {
            let tree = read_json::<TreeDoc>(&tree)?.into_tree()?;
            let cov = read_json::<CovDoc>(&cov)?.into_spec(&mut ctx.log)?;
            let family = family_from_args(family.name(), p.as_deref(), theta.as_deref())?;
            let model = construct(&tree, &cov, &family)?;
            let doc = ModelDoc::from_model(&model);
            let text = serde_json::to_string_pretty(&doc).unwrap();
            write_text(&out, &format!("{text}\n"), ctx)?;
            let _ = writeln!(ctx.err, "constructed {} model", model.family_name());
            Ok(EXIT_OK)
        }
        Cmd::Sample {
            model,
            n,
            seed,
            stream,
            out,
        } => {
            let model = read_json::<ModelDoc>(&model)?.into_model(&mut ctx.log)?;
            let rows = sample_stream(&model, n, seed, stream);
            let mut text = String::new();
            let d = model.dim();
            let header: Vec<String> = (1..=d).map(|i| format!("X{i}")).collect();
            text.push_str(&header.join(","));
            text.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_text(&out, &text, ctx)?;
            let _ = writeln!(ctx.err, "wrote {n} samples (seed {seed}, stream {stream})");
            Ok(EXIT_OK)
        }
        Cmd::Order { cmd } => order(cmd, ctx),
        Cmd::Levy { cmd } => levy(cmd, ctx),
    }
}

fn order(cmd: OrderCmd, ctx: &mut Ctx) -> Result<i32, Error> {
    match cmd {
        OrderCmd::Check { relation, x, y } => {
            let x = read_json::<ModelDoc>(&x)?.into_model(&mut ctx.log)?;
            let y = read_json::<ModelDoc>(&y)?.into_model(&mut ctx.log)?;
            let verdict = match relation {
                RelationArg::Sm => check_supermodular(&x, &y)?,
                RelationArg::Ism => check_increasing_supermodular(&x, &y)?,
                RelationArg::Cx => check_convex(&x, &y)?,
            };
            emit(ctx, &serde_json::to_value(&verdict).unwrap());
            let _ = writeln!(ctx.err, "verdict: {:?}", verdict.holds);
            Ok(match verdict.holds {
                Holds::Yes => EXIT_OK,
                _ => EXIT_NEGATIVE,
            })
        }
        OrderCmd::Couple {
            x,
            pair,
            n,
            seed,
            out,
        } => {
            let model = read_json::<ModelDoc>(&x)?.into_model(&mut ctx.log)?;
            let VectorModel::Binomial(b) = model else {
                return Err(Error::FamilyMismatch(
                    "coupling needs a binomial model".into(),
                ));
            };
            let pair = Pair::parse(&pair)?;
            let coupling = couple_binomial_increment(&b, pair)?;
            let draws = coupling.sample(n, seed, 0);
            let d = coupling.b.tree.dim();
            let mut text = String::new();
            let mut header: Vec<String> = (1..=d).map(|i| format!("XA{i}")).collect();
            header.extend((1..=d).map(|i| format!("XB{i}")));
            text.push_str(&header.join(","));
            text.push('\n');
            for (xa, xb) in draws {
                let cells: Vec<String> =
                    xa.iter().chain(xb.iter()).map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_text(&out, &text, ctx)?;
            let _ = writeln!(
                ctx.err,
                "wrote {n} coupled draws at pair {pair} (seed {seed})"
            );
            Ok(EXIT_OK)
        }
        OrderCmd::Oracle {
            x,
            y,
            cap,
            monotone,
            exact,
        } => {
            let x = read_json::<ModelDoc>(&x)?.into_model(&mut ctx.log)?;
            let y = read_json::<ModelDoc>(&y)?.into_model(&mut ctx.log)?;
            let cert = certify(&x, &y, cap, monotone, exact, ctx.budget, 1e-9)?;
            emit(ctx, &serde_json::to_value(&cert).unwrap());
            let _ = writeln!(
                ctx.err,
                "oracle: {:?} (value {:.3e}, grid cap {})",
                cert.verdict, cert.value, cert.grid_cap
            );
            Ok(match cert.verdict {
                OracleVerdict::Certified => EXIT_OK,
                _ => EXIT_NEGATIVE,
            })
        }
        OrderCmd::Battery { x, y, n, seed, out } => {
            let x = read_json::<ModelDoc>(&x)?.into_model(&mut ctx.log)?;
            let y = read_json::<ModelDoc>(&y)?.into_model(&mut ctx.log)?;
            let battery = standard_battery(x.dim(), seed);
            let report = battery_estimate(&x, &y, &battery, n, seed)?;
            let mut text = String::from("function,estimate,std_error,flagged\n");
            for row in &report.rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    row.name, row.estimate, row.std_error, row.flagged
                ));
            }
            write_text(&out, &text, ctx)?;
            let _ = writeln!(
                ctx.err,
                "battery: {} functions, {} flagged",
                report.rows.len(),
                report.rows.iter().filter(|r| r.flagged).count()
            );
            Ok(if report.any_flagged() {
                EXIT_NEGATIVE
            } else {
                EXIT_OK
            })
        }
    }
}

fn levy(cmd: LevyCmd, ctx: &mut Ctx) -> Result<i32, Error> {
    match cmd {
        LevyCmd::Decompose { model } => {
            let model = read_json::<ModelDoc>(&model)?.into_model(&mut ctx.log)?;
            let VectorModel::Poisson(poisson) = &model else {
                return Err(Error::FamilyMismatch(
                    "component-measure reports need a Poisson model".into(),
                ));
            };
            let tree = &poisson.tree;
            let d = tree.dim();
            let moments = exact_moments(&model);

            // the raw measure and its mean/covariance expansion, as signed
            // weights per vertex (origin excluded)
            let mut raw: BTreeMap<Vertex, crate::rational::Rat> = BTreeMap::new();
            for (pair, vertex) in tree.entries() {
                let a = &poisson.intensities[&pair];
                if !a.is_zero() {
                    *raw.entry(vertex).or_insert_with(Zero::zero) += a;
                }
            }
            let mut expanded: BTreeMap<Vertex, crate::rational::Rat> = BTreeMap::new();
            for i in 1..=d {
                let weight = moments.covariance.entry(i, i).clone();
                if !weight.is_zero() {
                    *expanded
                        .entry(Vertex::singleton(d, i)?)
                        .or_insert_with(Zero::zero) += weight;
                }
            }
            for i in 1..=d {
                for j in (i + 1)..=d {
                    let weight = moments.covariance.entry(i, j).clone();
                    if weight.is_zero() {
                        continue;
                    }
                    let v = tree.node(Pair::new(i, j)).expect("total");
                    let vi = v.remove(i)?;
                    let vj = v.remove(j)?;
                    let vij = vi.remove(j)?;
                    for (vertex, sign) in [(v, 1), (vij, 1), (vi, -1), (vj, -1)] {
                        if vertex.is_empty() {
                            continue;
                        }
                        let delta = crate::rational::rat_int(sign) * weight.clone();
                        *expanded.entry(vertex).or_insert_with(Zero::zero) += delta;
                    }
                }
            }
            expanded.retain(|_, w| !w.is_zero());
            raw.retain(|_, w| !w.is_zero());
            let identity_ok = raw == expanded;

            let to_map = |m: &BTreeMap<Vertex, crate::rational::Rat>| {
                m.iter()
                    .map(|(v, w)| (v.to_string(), format_rat(w)))
                    .collect::<BTreeMap<String, String>>()
            };
            emit(
                ctx,
                &json!({
                    "dim": d,
                    "means": moments.means.iter().map(format_rat).collect::<Vec<_>>(),
                    "covariance": CovDoc::from_spec(&moments.covariance),
                    "measure": to_map(&raw),
                    "expansion": to_map(&expanded),
                    "identity": if identity_ok { "ok" } else { "mismatch" },
                }),
            );
            let _ = writeln!(
                ctx.err,
                "component measure expansion: {}",
                if identity_ok {
                    "identity holds"
                } else {
                    "MISMATCH"
                }
            );
            if identity_ok {
                Ok(EXIT_OK)
            } else {
                Err(Error::Inconsistency {
                    context: "levy decompose".into(),
                    detail: "expansion does not match the raw measure".into(),
                })
            }
        }
    }
}
