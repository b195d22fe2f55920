//! Vertices of the discrete hypercube, the inclusion order, and Möbius
//! inversion on finite sub-posets.
//!
//! A vertex of the `d`-dimensional unit hypercube is identified with the
//! subset of `{1..d}` of coordinates equal to one. Vertices are stored as
//! fixed-width bitmasks (`d <= 64`) so that subset tests are O(1) and
//! equality is unambiguous. The text form is a bitstring whose leftmost
//! character is index 1, e.g. `11001` is `{1, 2, 5}` in dimension 5.
//!
//! The Möbius function here is always the Möbius function of an explicit
//! finite sub-poset: `mu(x, x) = 1` and
//! `mu(x, y) = -sum_{y < z <= x} mu(x, z)`, where `z` ranges over the
//! supplied ambient family. The value genuinely depends on that family, so
//! every entry point takes it explicitly.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

/// A vertex of the hypercube: a subset of `{1..dim}` as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    dim: usize,
    bits: u64,
}

impl Vertex {
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Vertex { dim, bits: 0 })
    }

    /// The singleton `{i}`, i.e. the i-th standard basis vertex.
    pub fn singleton(dim: usize, i: usize) -> Result<Self> {
        Vertex::empty(dim)?.insert(i)
    }

    pub fn from_indices(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut v = Vertex::empty(dim)?;
        for &i in indices {
            v = v.insert(i)?;
        }
        Ok(v)
    }

    /// Parses the bitstring form; leftmost character is index 1.
    pub fn parse_bits(s: &str) -> Result<Self> {
        let dim = s.len();
        let mut v = Vertex::empty(dim)?;
        for (pos, ch) in s.chars().enumerate() {
            match ch {
                '1' => v = v.insert(pos + 1)?,
                '0' => {}
                other => {
                    return Err(Error::Parse(format!(
                        "invalid bitstring {s:?}: unexpected {other:?}"
                    )))
                }
            }
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && i <= self.dim && (self.bits >> (i - 1)) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    /// Number of indices in the subset.
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.dim).filter(move |&i| self.contains(i))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < 1 || i > self.dim {
            Err(Error::IndexOutOfRange {
                index: i,
                dim: self.dim,
            })
        } else {
            Ok(())
        }
    }

    pub fn insert(&self, i: usize) -> Result<Self> {
        self.check_index(i)?;
        Ok(Vertex {
            dim: self.dim,
            bits: self.bits | 1 << (i - 1),
        })
    }

    /// Masks out index `a`; idempotent when `a` is absent.
    pub fn remove(&self, a: usize) -> Result<Self> {
        self.check_index(a)?;
        Ok(Vertex {
            dim: self.dim,
            bits: self.bits & !(1 << (a - 1)),
        })
    }

    pub fn union(&self, other: &Vertex) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Vertex {
            dim: self.dim,
            bits: self.bits | other.bits,
        })
    }

    pub fn is_subset_of(&self, other: &Vertex) -> bool {
        self.bits & !other.bits == 0
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.dim {
            write!(f, "{}", if self.contains(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn check_same_dim(x: &Vertex, y: &Vertex) -> Result<()> {
    if x.dim() != y.dim() {
        Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        })
    } else {
        Ok(())
    }
}

/// `x <= y` in the inclusion order.
pub fn precedes(x: &Vertex, y: &Vertex) -> Result<bool> {
    check_same_dim(x, y)?;
    Ok(x.is_subset_of(y))
}

/// `x < y`: inclusion and not equal.
pub fn strictly_precedes(x: &Vertex, y: &Vertex) -> Result<bool> {
    Ok(precedes(x, y)? && x != y)
}

/// Möbius function `mu(x, y)` of the sub-poset induced by
/// `within ∪ {x, y}` under inclusion.
///
/// Requires `y <= x`. Memoized per call; deterministic.
pub fn moebius(x: &Vertex, y: &Vertex, within: &[Vertex]) -> Result<i64> {
    check_same_dim(x, y)?;
    if !y.is_subset_of(x) {
        return Err(Error::OrderViolation(format!("{y} does not precede {x}")));
    }
    let mut family: Vec<Vertex> = within
        .iter()
        .copied()
        .filter(|v| y.is_subset_of(v) && v.is_subset_of(x))
        .collect();
    for extra in [*x, *y] {
        if !family.contains(&extra) {
            family.push(extra);
        }
    }
    // Descending by size, ties by bits: every z > w comes before w.
    family.sort_by(|a, b| (b.len(), b.bits()).cmp(&(a.len(), a.bits())));
    family.dedup();

    let mut memo: HashMap<u64, i64> = HashMap::new();
    memo.insert(x.bits(), 1);
    for idx in 0..family.len() {
        let z = family[idx];
        if z == *x {
            continue;
        }
        let mut sum = 0i64;
        for w in &family[..idx] {
            if z.is_subset_of(w) && z != *w {
                sum += memo[&w.bits()];
            }
        }
        memo.insert(z.bits(), -sum);
    }
    Ok(memo[&y.bits()])
}

/// Full Möbius table of a finite family of vertices (the sub-poset is the
/// family itself). Entry `(upper, lower)` is present iff `lower <= upper`.
pub fn moebius_table(family: &[Vertex]) -> HashMap<(Vertex, Vertex), i64> {
    let mut sorted = family.to_vec();
    sorted.sort_by(|a, b| (b.len(), b.bits()).cmp(&(a.len(), a.bits())));
    sorted.dedup();
    let mut table = HashMap::new();
    for (ui, upper) in sorted.iter().enumerate() {
        table.insert((*upper, *upper), 1i64);
        for lower in &sorted[ui + 1..] {
            if !lower.is_subset_of(upper) {
                continue;
            }
            let mut sum = 0i64;
            for mid in &sorted[..] {
                if lower.is_subset_of(mid) && *mid != *lower && mid.is_subset_of(upper) {
                    sum += table[&(*upper, *mid)];
                }
            }
            table.insert((*upper, *lower), -sum);
        }
    }
    table
}
