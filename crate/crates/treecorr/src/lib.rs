//! Tree-structured dependence for random vectors with prescribed
//! covariance, and exact stochastic-order certification.
//!
//! The crate builds binomial, Poisson, Gaussian and gamma random vectors
//! whose covariance matrix is given in advance. The device is a binary
//! dependence tree on the hypercube: one independent scalar component per
//! index pair, each attached to a vertex, with coordinate `i` summing the
//! components whose vertex contains `i`. Covariances are then sums of
//! component variances over vertex ancestors, a triangular system that
//! inverts exactly over the rationals by Möbius inversion on the node
//! family.
//!
//! On top of the construction sit order decisions: within a family on a
//! common tree, supermodular dominance is decided by equal means plus
//! entrywise covariance dominance; the increasing variant relaxes means to
//! dominance; convex dominance of Poisson vectors degenerates to equality
//! of laws, refuted by an explicit convex witness. A brute-force linear
//! program over locally supermodular functions on a truncated lattice
//! certifies the same decisions independently, and seeded samplers plus a
//! battery of supermodular test functions give Monte Carlo cross-checks.
//!
//! Start with [`tree::DependencyTree`], [`covariance::invert_covariance`],
//! [`models::construct`] and [`ordering::check_supermodular`]. The `book/`
//! guide walks through every concept with runnable examples; the same
//! examples compile here as doctests.

pub mod battery;
pub mod cli;
pub mod covariance;
pub mod doc;
pub mod error;
pub mod fixtures;
pub mod hypercube;
pub mod models;
pub mod oracle;
pub mod ordering;
pub mod rational;
pub mod simplex;
pub mod tree;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    //! Chapters of the mdbook guide, compiled so every snippet in the book
    //! runs under `cargo test --doc`.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(hypercube, "../../../book/src/hypercube.md");
    chapter!(trees, "../../../book/src/trees.md");
    chapter!(covariance, "../../../book/src/covariance.md");
    chapter!(models, "../../../book/src/models.md");
    chapter!(ordering, "../../../book/src/ordering.md");
    chapter!(oracle, "../../../book/src/oracle.md");
    chapter!(cli, "../../../book/src/cli.md");
}
