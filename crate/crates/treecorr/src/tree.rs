//! Binary dependence trees on the hypercube.
//!
//! A dependence tree of dimension `d` assigns to every index pair
//! `(k, l)` with `1 <= k <= l <= d` a hypercube vertex `node(k, l)`, with the
//! diagonal forced to the basis vertices `node(i, i) = {i}`. The family must
//! satisfy the two-children closure condition: for every `k < l`, masking
//! either label out of `node(k, l)` lands on another member of the family.
//! Together with `k, l ∈ node(k, l)` and pairwise distinct vertices this
//! makes the `d(d+1)/2` vertices a binary tree of height at most `d` under
//! inclusion, and makes the pair -> vertex map invertible.
//!
//! The tree is the index structure for everything else in the crate: a
//! vector is built from one independent scalar component per pair, and
//! coordinate `i` sums the components whose vertex contains `i`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::{moebius_table, Vertex};

/// An unordered index pair `{k, l}` with `k <= l`, the label of a tree node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    k: usize,
    l: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Self {
        Pair {
            k: a.min(b),
            l: a.max(b),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn is_diagonal(&self) -> bool {
        self.k == self.l
    }

    /// All pairs of dimension `d` in lexicographic order.
    pub fn all(d: usize) -> impl Iterator<Item = Pair> {
        (1..=d).flat_map(move |k| (k..=d).map(move |l| Pair::new(k, l)))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("pair must look like \"k,l\", got {s:?}")))?;
        let k: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad pair index {a:?}")))?;
        let l: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad pair index {b:?}")))?;
        if k == 0 || l == 0 {
            return Err(Error::Parse("pair indices start at 1".into()));
        }
        Ok(Pair::new(k, l))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.k, self.l)
    }
}

impl fmt::Debug for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.l)
    }
}

/// One violated clause found while validating a candidate family.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeDefect {
    MissingEntry { pair: String },
    UnexpectedEntry { pair: String },
    WrongLeaf { index: usize, found: String },
    LabelNotMember { pair: String, missing_index: usize },
    ChildMissing { pair: String, child: String },
    DuplicateVertex { pairs: Vec<String>, vertex: String },
    WrongDimension { pair: String, found: usize },
}

/// A validated dependence tree. Immutable after construction; mutation means
/// rebuild and revalidate.
#[derive(Clone)]
pub struct DependencyTree {
    dim: usize,
    nodes: BTreeMap<Pair, Vertex>,
    by_vertex: HashMap<u64, Pair>,
    moebius: OnceLock<HashMap<(Pair, Pair), i64>>,
}

impl PartialEq for DependencyTree {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.nodes == other.nodes
    }
}
impl Eq for DependencyTree {}

impl fmt::Debug for DependencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DependencyTree")
            .field("dim", &self.dim)
            .field("nodes", &self.nodes)
            .finish()
    }
}

impl DependencyTree {
    /// Validates a candidate family. Diagonal entries may be omitted (they
    /// are implied to be the basis vertices); when present they must match.
    /// On failure, every violated clause is reported.
    pub fn validate(dim: usize, candidate: &BTreeMap<Pair, Vertex>) -> Result<Self> {
        if dim == 0 || dim > crate::hypercube::MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "tree dimension must be in 1..={}, got {dim}",
                crate::hypercube::MAX_DIM
            )));
        }
        let mut defects = Vec::new();
        let mut nodes: BTreeMap<Pair, Vertex> = BTreeMap::new();

        for (pair, vertex) in candidate {
            if pair.l > dim {
                defects.push(TreeDefect::UnexpectedEntry {
                    pair: pair.to_string(),
                });
                continue;
            }
            if vertex.dim() != dim {
                defects.push(TreeDefect::WrongDimension {
                    pair: pair.to_string(),
                    found: vertex.dim(),
                });
                continue;
            }
            nodes.insert(*pair, *vertex);
        }

        for i in 1..=dim {
            let leaf = Vertex::singleton(dim, i)?;
            let diag = Pair::new(i, i);
            match nodes.get(&diag) {
                Some(v) if *v != leaf => defects.push(TreeDefect::WrongLeaf {
                    index: i,
                    found: v.to_string(),
                }),
                Some(_) => {}
                None => {
                    nodes.insert(diag, leaf);
                }
            }
        }

        for pair in Pair::all(dim) {
            if !nodes.contains_key(&pair) {
                defects.push(TreeDefect::MissingEntry {
                    pair: pair.to_string(),
                });
            }
        }

        // Remaining clauses need the full entry set.
        if defects.is_empty() {
            let mut seen: HashMap<u64, Vec<Pair>> = HashMap::new();
            for (pair, vertex) in &nodes {
                seen.entry(vertex.bits()).or_default().push(*pair);
            }
            for pairs in seen.values() {
                if pairs.len() > 1 {
                    let vertex = nodes[&pairs[0]];
                    defects.push(TreeDefect::DuplicateVertex {
                        pairs: pairs.iter().map(|p| p.to_string()).collect(),
                        vertex: vertex.to_string(),
                    });
                }
            }
            for (pair, vertex) in &nodes {
                for idx in [pair.k, pair.l] {
                    if !vertex.contains(idx) {
                        defects.push(TreeDefect::LabelNotMember {
                            pair: pair.to_string(),
                            missing_index: idx,
                        });
                    }
                }
                if pair.is_diagonal() {
                    continue;
                }
                for idx in [pair.k, pair.l] {
                    if !vertex.contains(idx) {
                        continue;
                    }
                    let child = vertex.remove(idx)?;
                    if !seen.contains_key(&child.bits()) {
                        defects.push(TreeDefect::ChildMissing {
                            pair: pair.to_string(),
                            child: child.to_string(),
                        });
                    }
                }
            }
        }

        if !defects.is_empty() {
            return Err(Error::InvalidTree { defects });
        }
        let by_vertex = nodes.iter().map(|(p, v)| (v.bits(), *p)).collect();
        Ok(DependencyTree {
            dim,
            nodes,
            by_vertex,
            moebius: OnceLock::new(),
        })
    }

    /// The flat structure: `node(k, l) = {k, l}` for every pair.
    pub fn pairwise(dim: usize) -> Result<Self> {
        let mut candidate = BTreeMap::new();
        for pair in Pair::all(dim) {
            candidate.insert(pair, Vertex::from_indices(dim, &[pair.k, pair.l])?);
        }
        DependencyTree::validate(dim, &candidate)
    }

    /// The nested structure `node(i, j) = {1..i} ∪ {j}` for `i < j`.
    pub fn nested_prefix(dim: usize) -> Result<Self> {
        let mut candidate = BTreeMap::new();
        for pair in Pair::all(dim).filter(|p| !p.is_diagonal()) {
            let mut idx: Vec<usize> = (1..=pair.k).collect();
            idx.push(pair.l);
            candidate.insert(pair, Vertex::from_indices(dim, &idx)?);
        }
        DependencyTree::validate(dim, &candidate)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, pair: Pair) -> Option<Vertex> {
        self.nodes.get(&pair).copied()
    }

    pub fn pair_of(&self, vertex: &Vertex) -> Option<Pair> {
        self.by_vertex.get(&vertex.bits()).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.nodes.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Pair, Vertex)> + '_ {
        self.nodes.iter().map(|(p, v)| (*p, *v))
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        self.nodes.values().copied().collect()
    }

    /// Same family of vertex values (labels may differ).
    pub fn same_vertex_family(&self, other: &DependencyTree) -> bool {
        self.dim == other.dim
            && self
                .by_vertex
                .keys()
                .all(|b| other.by_vertex.contains_key(b))
    }

    /// The two children pairs of an off-diagonal node: the pairs whose
    /// vertices are `node \ {k}` and `node \ {l}`. Located by vertex value.
    pub fn children(&self, pair: Pair) -> Option<(Pair, Pair)> {
        if pair.is_diagonal() {
            return None;
        }
        let v = self.node(pair)?;
        let c_k = self.pair_of(&v.remove(pair.k).ok()?)?;
        let c_l = self.pair_of(&v.remove(pair.l).ok()?)?;
        Some((c_k, c_l))
    }

    /// The pair whose vertex is `node \ {k, l}`, when that vertex is in the
    /// family (it need not be: the closure condition only demands children).
    pub fn grandchild(&self, pair: Pair) -> Option<Pair> {
        if pair.is_diagonal() {
            return None;
        }
        let v = self.node(pair)?;
        let g = v.remove(pair.k).ok()?.remove(pair.l).ok()?;
        self.pair_of(&g)
    }

    /// Möbius table of the node family, computed once per tree.
    pub fn moebius_entry(&self, upper: Pair, lower: Pair) -> i64 {
        let table = self.moebius.get_or_init(|| {
            let vertices = self.vertices();
            let raw = moebius_table(&vertices);
            raw.into_iter()
                .map(|((u, w), m)| ((self.by_vertex[&u.bits()], self.by_vertex[&w.bits()]), m))
                .collect()
        });
        table.get(&(upper, lower)).copied().unwrap_or(0)
    }

    /// Rows of the membership table: row `i` lists the pairs whose vertex
    /// contains `i`, i.e. the components summed by coordinate `i`.
    pub fn membership(&self) -> MembershipTable {
        let mut rows = vec![Vec::new(); self.dim];
        for (pair, vertex) in &self.nodes {
            for i in vertex.indices() {
                rows[i - 1].push(*pair);
            }
        }
        MembershipTable { rows }
    }
}

/// For each coordinate, the set of component pairs feeding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipTable {
    rows: Vec<Vec<Pair>>,
}

impl MembershipTable {
    pub fn row(&self, i: usize) -> &[Pair] {
        &self.rows[i - 1]
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }
}

/// JSON document form of a tree: `{ "dim": d, "nodes": { "k,l": "bits" } }`.
/// Diagonal entries may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDoc {
    pub dim: usize,
    pub nodes: BTreeMap<String, String>,
}

impl TreeDoc {
    pub fn from_tree(tree: &DependencyTree) -> Self {
        let nodes = tree
            .entries()
            .filter(|(p, _)| !p.is_diagonal())
            .map(|(p, v)| (p.to_string(), v.to_string()))
            .collect();
        TreeDoc {
            dim: tree.dim(),
            nodes,
        }
    }

    pub fn into_tree(&self) -> Result<DependencyTree> {
        let mut candidate = BTreeMap::new();
        for (key, bits) in &self.nodes {
            let pair = Pair::parse(key)?;
            let vertex = Vertex::parse_bits(bits)?;
            candidate.insert(pair, vertex);
        }
        DependencyTree::validate(self.dim, &candidate)
    }
}

/// Draws a random valid tree by repeated index insertion.
///
/// Starting from a single leaf, each step introduces a fresh index `m` and
/// attaches one new node per existing index `j`, built as `{m} ∪ f(j)` where
/// the sets `f(j)` are existing vertices forming a removal-closed family.
/// Every tree produced this way validates, every off-diagonal node has its
/// masked grandchild in the family (or empty), and the family includes the
/// flat and nested structures as extreme cases.
pub fn random_tree<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DependencyTree {
    assert!(dim >= 1, "dimension must be positive");
    let mut order: Vec<usize> = (1..=dim).collect();
    order.shuffle(rng);

    let mut nodes: BTreeMap<Pair, Vertex> = BTreeMap::new();
    let first = order[0];
    nodes.insert(
        Pair::new(first, first),
        Vertex::singleton(dim, first).unwrap(),
    );
    let mut support = vec![first];

    for &m in &order[1..] {
        // Choose f(j) for every current index j: a vertex of the current
        // family such that removing j lands on an already-chosen f-value or
        // on the empty set. Unassigned leaves always qualify, so the greedy
        // draw cannot get stuck.
        let vertices: Vec<Vertex> = nodes.values().copied().collect();
        let empty = Vertex::empty(dim).unwrap();
        let mut chosen: HashMap<usize, Vertex> = HashMap::new();
        let mut frontier: Vec<Vertex> = vec![empty];
        let mut unassigned: Vec<usize> = support.clone();
        while !unassigned.is_empty() {
            let mut candidates: Vec<(Vertex, usize)> = Vec::new();
            for v in &vertices {
                if chosen.values().any(|c| c == v) {
                    continue;
                }
                for &j in &unassigned {
                    if v.contains(j) && frontier.contains(&v.remove(j).unwrap()) {
                        candidates.push((*v, j));
                    }
                }
            }
            let &(v, j) = candidates
                .choose(rng)
                .expect("leaf candidates always exist");
            chosen.insert(j, v);
            frontier.push(v);
            unassigned.retain(|&u| u != j);
        }
        nodes.insert(Pair::new(m, m), Vertex::singleton(dim, m).unwrap());
        for (&j, f) in &chosen {
            nodes.insert(Pair::new(m, j), f.insert(m).unwrap());
        }
        support.push(m);
    }

    DependencyTree::validate(dim, &nodes).expect("generator produces valid trees")
}
