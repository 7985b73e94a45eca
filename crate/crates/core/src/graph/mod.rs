//! Finite weighted graphs with killing.
//!
//! A [`KilledWeightedGraph`] is the finite stand-in for a transient weighted
//! graph: every vertex `x` carries a kill weight `κ_x` (conductance to an
//! implicit absorbing ghost state) and optionally a self-loop weight. The
//! random walk moves from `x` to `y` with probability `a_{x,y} / a_x`, where
//! `a_x` sums the incident conductances, the self-loop and the kill weight.
//! Being absorbed by the ghost plays the role of escaping to infinity.

mod format;
mod generators;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub use format::{read_graph, write_graph};
pub use generators::{
    make_biased_z, make_exhaustion, make_lattice_box, make_regular_tree, ExhaustionFamily,
    ExhaustionLevel, ModelFamily, ModelKind, BIASED_Z_EXTERIOR_RETURN,
};

/// Dense vertex identifier, valid in `[0, vertex_count)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i)
    }
}

/// Sorted, deduplicated set of vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct VertexSet(Vec<VertexId>);

impl VertexSet {
    pub fn new<I: IntoIterator<Item = VertexId>>(ids: I) -> Self {
        let mut v: Vec<VertexId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        Self::new(ids.into_iter().map(VertexId))
    }

    pub fn singleton(x: VertexId) -> Self {
        VertexSet(vec![x])
    }

    pub fn contains(&self, x: VertexId) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }

    /// Membership mask over `n` vertices.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.0 {
            m[x.0] = true;
        }
        m
    }

    /// Position of `x` within the sorted set.
    pub fn position(&self, x: VertexId) -> Option<usize> {
        self.0.binary_search(&x).ok()
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet::new(iter)
    }
}

/// The two collapsed ends of a quasi-one-dimensional graph. Killing at
/// `minus` means escaping towards `-∞`, killing at `plus` towards `+∞`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DirectionEnds {
    pub minus: VertexId,
    pub plus: VertexId,
}

/// Escape direction on a graph with [`DirectionEnds`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Minus,
    Plus,
}

impl Direction {
    pub fn end(self, ends: &DirectionEnds) -> VertexId {
        match self {
            Direction::Minus => ends.minus,
            Direction::Plus => ends.plus,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Minus => write!(f, "-inf"),
            Direction::Plus => write!(f, "+inf"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "-inf" | "minus" | "-" => Ok(Direction::Minus),
            "+inf" | "plus" | "+" | "inf" => Ok(Direction::Plus),
            _ => Err(Error::InvalidParameter(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KilledWeightedGraph {
    edges: Vec<(usize, usize, f64)>,
    neighbors: Vec<Vec<(usize, f64)>>,
    kill: Vec<f64>,
    self_loop: Vec<f64>,
    total: Vec<f64>,
    coords: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    family: ModelFamily,
    ends: Option<DirectionEnds>,
    wrapper: Vec<bool>,
}

impl KilledWeightedGraph {
    pub fn vertex_count(&self) -> usize {
        self.kill.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_count()).map(VertexId)
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet::from_indices(0..self.vertex_count())
    }

    /// Undirected edges `(u, v, a_{u,v})` with `u < v`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, x: VertexId) -> &[(usize, f64)] {
        &self.neighbors[x.0]
    }

    /// Total weight `a_x`, including self-loop and kill weight.
    pub fn total_weight(&self, x: VertexId) -> f64 {
        self.total[x.0]
    }

    pub fn total_weights(&self) -> &[f64] {
        &self.total
    }

    pub fn kill_weight(&self, x: VertexId) -> f64 {
        self.kill[x.0]
    }

    pub fn kill_weights(&self) -> &[f64] {
        &self.kill
    }

    pub fn self_loop_weight(&self, x: VertexId) -> f64 {
        self.self_loop[x.0]
    }

    pub fn conductance(&self, x: VertexId, y: VertexId) -> f64 {
        if x == y {
            return self.self_loop[x.0];
        }
        self.neighbors[x.0]
            .iter()
            .find(|&&(z, _)| z == y.0)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn transition_probability(&self, x: VertexId, y: VertexId) -> f64 {
        self.conductance(x, y) / self.total[x.0]
    }

    pub fn kill_probability(&self, x: VertexId) -> f64 {
        self.kill[x.0] / self.total[x.0]
    }

    /// `|Σ_y p_{x,y} + p_{x,ghost} − 1|`.
    pub fn row_sum_defect(&self, x: VertexId) -> f64 {
        let a = self.total[x.0];
        let s: f64 = self.neighbors[x.0].iter().map(|&(_, w)| w / a).sum::<f64>()
            + self.self_loop[x.0] / a
            + self.kill[x.0] / a;
        (s - 1.0).abs()
    }

    pub fn check_vertex(&self, x: VertexId) -> Result<()> {
        if x.0 < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(x.0))
        }
    }

    pub fn check_set(&self, set: &VertexSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        set.iter().try_for_each(|x| self.check_vertex(x))
    }

    /// Model coordinates of `x` (lattice point, integer on ℤ, heap index on a tree).
    pub fn coordinate(&self, x: VertexId) -> &[i64] {
        &self.coords[x.0]
    }

    pub fn locate(&self, coord: &[i64]) -> Option<VertexId> {
        self.index.get(coord).copied().map(VertexId)
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn direction_ends(&self) -> Option<DirectionEnds> {
        self.ends
    }

    /// True for vertices whose weights were rewritten by an exterior collapse.
    pub fn is_wrapper(&self, x: VertexId) -> bool {
        self.wrapper[x.0]
    }
}

/// Incremental construction of a [`KilledWeightedGraph`]; all invariants are
/// checked in [`GraphBuilder::build`].
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    kill: Vec<f64>,
    self_loop: Vec<f64>,
    coords: Option<Vec<Vec<i64>>>,
    family: ModelFamily,
    ends: Option<DirectionEnds>,
    wrapper: Vec<bool>,
    out_of_range: Option<usize>,
}

impl GraphBuilder {
    pub fn new(vertex_count: usize) -> Self {
        GraphBuilder {
            n: vertex_count,
            edges: Vec::new(),
            kill: vec![0.0; vertex_count],
            self_loop: vec![0.0; vertex_count],
            coords: None,
            family: ModelFamily::Custom,
            ends: None,
            wrapper: vec![false; vertex_count],
            out_of_range: None,
        }
    }

    pub fn edge(&mut self, u: usize, v: usize, weight: f64) -> &mut Self {
        self.edges.push((u, v, weight));
        self
    }

    pub fn kill(&mut self, x: usize, weight: f64) -> &mut Self {
        match self.kill.get_mut(x) {
            Some(k) => *k += weight,
            None => self.out_of_range = self.out_of_range.or(Some(x)),
        }
        self
    }

    pub fn self_loop(&mut self, x: usize, weight: f64) -> &mut Self {
        match self.self_loop.get_mut(x) {
            Some(l) => *l += weight,
            None => self.out_of_range = self.out_of_range.or(Some(x)),
        }
        self
    }

    pub(crate) fn coordinates(&mut self, coords: Vec<Vec<i64>>) -> &mut Self {
        self.coords = Some(coords);
        self
    }

    pub(crate) fn family(&mut self, family: ModelFamily) -> &mut Self {
        self.family = family;
        self
    }

    pub(crate) fn ends(&mut self, ends: DirectionEnds) -> &mut Self {
        self.ends = Some(ends);
        self
    }

    pub(crate) fn mark_wrapper(&mut self, x: usize) -> &mut Self {
        self.wrapper[x] = true;
        self
    }

    pub fn build(&self) -> Result<KilledWeightedGraph> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if let Some(x) = self.out_of_range {
            return Err(Error::UnknownVertex(x));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in &self.edges {
            if u >= n {
                return Err(Error::UnknownVertex(u));
            }
            if v >= n {
                return Err(Error::UnknownVertex(v));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) is a loop; use a self-loop weight"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) has nonpositive or non-finite weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            match merged.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric duplicate weights on edge ({},{}): {prev} vs {w}",
                        key.0, key.1
                    )))
                }
                _ => {
                    merged.insert(key, w);
                }
            }
        }
        for x in 0..n {
            for (name, w) in [("kill", self.kill[x]), ("self-loop", self.self_loop[x])] {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "{name} weight at vertex {x} is negative or non-finite: {w}"
                    )));
                }
            }
        }
        if self.kill.iter().all(|&k| k == 0.0) {
            return Err(Error::InvalidGraph(
                "all kill weights are zero; the walk would never be absorbed".into(),
            ));
        }

        let edges: Vec<(usize, usize, f64)> = merged.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v, w) in &edges {
            neighbors[u].push((v, w));
            neighbors[v].push((u, w));
        }
        let total: Vec<f64> = (0..n)
            .map(|x| neighbors[x].iter().map(|&(_, w)| w).sum::<f64>() + self.self_loop[x] + self.kill[x])
            .collect();
        if let Some(x) = total.iter().position(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::InvalidGraph(format!("total weight at vertex {x} is not positive")));
        }

        // connectivity, ignoring the ghost
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &neighbors[x] {
                if !seen[y] {
                    seen[y] = true;
                    reached += 1;
                    queue.push_back(y);
                }
            }
        }
        if reached != n {
            return Err(Error::InvalidGraph(format!(
                "graph is disconnected: {reached} of {n} vertices reachable from vertex 0"
            )));
        }

        let coords = match &self.coords {
            Some(c) if c.len() == n => c.clone(),
            Some(_) => return Err(Error::InvalidGraph("coordinate table has wrong length".into())),
            None => (0..n).map(|i| vec![i as i64]).collect(),
        };
        let index: HashMap<Vec<i64>, usize> =
            coords.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        if index.len() != n {
            return Err(Error::InvalidGraph("duplicate vertex coordinates".into()));
        }

        Ok(KilledWeightedGraph {
            edges,
            neighbors,
            kill: self.kill.clone(),
            self_loop: self.self_loop.clone(),
            total,
            coords,
            index,
            family: self.family.clone(),
            ends: self.ends,
            wrapper: self.wrapper.clone(),
        })
    }
}

/// Builds and validates a graph from an edge list and kill weights.
pub fn build_graph(
    vertex_count: usize,
    edges: &[(usize, usize, f64)],
    kills: &[(usize, f64)],
) -> Result<KilledWeightedGraph> {
    let mut b = GraphBuilder::new(vertex_count);
    for &(u, v, w) in edges {
        b.edge(u, v, w);
    }
    for &(x, k) in kills {
        b.kill(x, k);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex_is_killed_immediately() {
        let g = build_graph(1, &[], &[(0, 1.0)]).unwrap();
        assert_eq!(g.total_weight(VertexId(0)), 1.0);
        assert_eq!(g.kill_probability(VertexId(0)), 1.0);
    }

    #[test]
    fn two_vertex_path_weights() {
        let g = build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(g.total_weight(VertexId(0)), 2.0);
        assert_eq!(g.total_weight(VertexId(1)), 2.0);
        assert_eq!(g.transition_probability(VertexId(0), VertexId(1)), 0.5);
        assert!(g.row_sum_defect(VertexId(0)) < 1e-12);
    }

    #[test]
    fn asymmetric_duplicate_is_rejected() {
        let err = build_graph(2, &[(0, 1, 1.0), (1, 0, 2.0)], &[(0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn symmetric_restatement_is_accepted() {
        let g = build_graph(2, &[(0, 1, 1.5), (1, 0, 1.5)], &[(0, 1.0)]).unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn validation_errors() {
        assert!(build_graph(2, &[(0, 1, 0.0)], &[(0, 1.0)]).is_err());
        assert!(build_graph(2, &[(0, 1, -1.0)], &[(0, 1.0)]).is_err());
        assert!(build_graph(3, &[(0, 1, 1.0)], &[(0, 1.0)]).is_err()); // disconnected
        assert!(build_graph(2, &[(0, 1, 1.0)], &[]).is_err()); // no kills
        assert!(build_graph(1, &[], &[]).is_err());
        assert!(matches!(build_graph(2, &[(0, 5, 1.0)], &[(0, 1.0)]), Err(Error::UnknownVertex(5))));
    }

    #[test]
    fn vertex_set_is_sorted_and_deduplicated() {
        let s = VertexSet::from_indices([3, 1, 3, 2]);
        assert_eq!(s.as_slice(), &[VertexId(1), VertexId(2), VertexId(3)]);
        assert!(s.contains(VertexId(2)));
        assert!(!s.contains(VertexId(0)));
        assert_eq!(s.position(VertexId(3)), Some(2));
    }
}
