use std::fmt;
use std::str::FromStr;

use super::{DirectionEnds, GraphBuilder, KilledWeightedGraph, VertexId, VertexSet};
use crate::error::{Error, Result};

/// Probability that the biased walk stepping outward with probability 2/3
/// ever comes back after one outward step: gambler's ruin `q/p`.
pub const BIASED_Z_EXTERIOR_RETURN: f64 = (1.0 / 3.0) / (2.0 / 3.0);

/// The infinite model a finite graph stands for.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFamily {
    Custom,
    /// Nearest-neighbour chain on ℤ with `a_{n,n+1} = a_{-n-1,-n} = 2^n`.
    BiasedZ { radius: usize },
    /// Rooted tree in which every vertex has `branching` children.
    RegularTree { branching: usize, depth: usize },
    /// `{-R..R}^d` box of ℤ^d with an absorbing halo.
    LatticeBox { dimension: usize, radius: usize },
}

/// Family selector for exhaustions, independent of the truncation size.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    BiasedZ,
    RegularTree { branching: usize },
    LatticeBox { dimension: usize },
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::BiasedZ => write!(f, "biased_z"),
            ModelKind::RegularTree { branching } => write!(f, "tree:{branching}"),
            ModelKind::LatticeBox { dimension } => write!(f, "lattice:{dimension}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Accepts `biased_z`, `tree:<branching>`, `lattice:<dimension>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let arg = parts
            .next()
            .map(|a| a.parse::<usize>().map_err(|e| Error::InvalidParameter(format!("{s}: {e}"))))
            .transpose()?;
        match (name, arg) {
            ("biased_z", None) => Ok(ModelKind::BiasedZ),
            ("tree", Some(b)) => Ok(ModelKind::RegularTree { branching: b }),
            ("tree", None) => Ok(ModelKind::RegularTree { branching: 2 }),
            ("lattice", Some(d)) => Ok(ModelKind::LatticeBox { dimension: d }),
            ("lattice", None) => Ok(ModelKind::LatticeBox { dimension: 3 }),
            _ => Err(Error::UnsupportedFamily(s.to_string())),
        }
    }
}

/// Biased ℤ chain truncated to `{-radius..radius}` with an exact exterior
/// collapse at both ends. Returns the graph and the exterior return
/// probability used by the collapse.
pub fn make_biased_z(radius: usize) -> Result<(KilledWeightedGraph, f64)> {
    if radius < 1 {
        return Err(Error::InvalidParameter("biased-Z radius must be at least 1".into()));
    }
    let r = radius as i64;
    let id = |k: i64| (k + r) as usize;
    let n = 2 * radius + 1;
    let mut b = GraphBuilder::new(n);
    for k in 0..r {
        let w = 2f64.powi(k as i32);
        b.edge(id(k), id(k + 1), w);
        b.edge(id(-k - 1), id(-k), w);
    }
    let outward = 2f64.powi(radius as i32);
    let ret = BIASED_Z_EXTERIOR_RETURN;
    for end in [id(-r), id(r)] {
        b.self_loop(end, outward * ret);
        b.kill(end, outward * (1.0 - ret));
        b.mark_wrapper(end);
    }
    b.coordinates((-r..=r).map(|k| vec![k]).collect())
        .family(ModelFamily::BiasedZ { radius })
        .ends(DirectionEnds { minus: VertexId(id(-r)), plus: VertexId(id(r)) });
    Ok((b.build()?, ret))
}

fn tree_level_offset(branching: usize, depth: usize) -> usize {
    (0..depth).map(|d| branching.pow(d as u32)).sum()
}

/// Regular rooted tree (each vertex has `branching` children, unit
/// conductances) truncated at `depth`; every leaf carries the exact collapse
/// of its infinite subtree.
pub fn make_regular_tree(branching: usize, depth: usize) -> Result<KilledWeightedGraph> {
    if branching < 2 {
        return Err(Error::InvalidParameter("tree branching must be at least 2".into()));
    }
    if depth < 1 {
        return Err(Error::InvalidParameter("tree depth must be at least 1".into()));
    }
    let n = tree_level_offset(branching, depth + 1);
    let leaves_from = tree_level_offset(branching, depth);
    let mut b = GraphBuilder::new(n);
    for parent in 0..leaves_from {
        for j in 0..branching {
            b.edge(parent, branching * parent + 1 + j, 1.0);
        }
    }
    // depth process below a leaf: p = b/(b+1) outward, return prob q/p = 1/b
    let ret = 1.0 / branching as f64;
    let outward = branching as f64;
    for leaf in leaves_from..n {
        b.self_loop(leaf, outward * ret);
        b.kill(leaf, outward * (1.0 - ret));
        b.mark_wrapper(leaf);
    }
    b.coordinates((0..n as i64).map(|i| vec![i]).collect())
        .family(ModelFamily::RegularTree { branching, depth });
    b.build()
}

#[cfg(test)]
/// Depth of heap index `i` in a `branching`-ary tree.
pub(crate) fn tree_depth(branching: usize, mut i: usize) -> usize {
    let mut d = 0;
    while i > 0 {
        i = (i - 1) / branching;
        d += 1;
    }
    d
}

/// Box `{-radius..radius}^dimension` of ℤ^d with unit conductances; each
/// edge leaving the box becomes a unit kill weight. This is an
/// approximation of the infinite lattice, not an exact collapse.
pub fn make_lattice_box(dimension: usize, radius: usize) -> Result<KilledWeightedGraph> {
    if dimension < 3 {
        return Err(Error::InvalidParameter(
            "lattice dimension must be at least 3 (the walk is recurrent otherwise)".into(),
        ));
    }
    let side = 2 * radius + 1;
    let n = side
        .checked_pow(dimension as u32)
        .ok_or_else(|| Error::InvalidParameter("lattice box too large".into()))?;
    let r = radius as i64;
    let coord = |mut i: usize| -> Vec<i64> {
        let mut c = vec![0i64; dimension];
        for k in (0..dimension).rev() {
            c[k] = (i % side) as i64 - r;
            i /= side;
        }
        c
    };
    let mut b = GraphBuilder::new(n);
    let stride: Vec<usize> = (0..dimension).map(|k| side.pow((dimension - 1 - k) as u32)).collect();
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let c = coord(i);
        let mut halo = 0usize;
        for k in 0..dimension {
            if c[k] < r {
                b.edge(i, i + stride[k], 1.0);
            } else {
                halo += 1;
            }
            if c[k] == -r {
                halo += 1;
            }
        }
        if halo > 0 {
            b.kill(i, halo as f64);
            b.mark_wrapper(i);
        }
        coords.push(c);
    }
    b.coordinates(coords).family(ModelFamily::LatticeBox { dimension, radius });
    b.build()
}

/// One truncation level of an exhaustion.
#[derive(Clone, Debug)]
pub struct ExhaustionLevel {
    pub parameter: usize,
    pub graph: KilledWeightedGraph,
    pub window: VertexSet,
}

impl ExhaustionLevel {
    pub fn locate(&self, site: &[i64]) -> Result<VertexId> {
        self.graph
            .locate(site)
            .filter(|&x| self.window.contains(x))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "site {site:?} is outside window of level {}",
                    self.parameter
                ))
            })
    }
}

#[derive(Clone, Debug)]
pub struct ExhaustionFamily {
    pub model: ModelKind,
    pub levels: Vec<ExhaustionLevel>,
}

/// Windows `K_n` for the given level parameters: `{-n..n}` on biased ℤ,
/// the depth-`n` ball on trees, the radius-`n` box on lattices. Exactly
/// collapsed families use a one-layer buffer; lattices use a two-layer buffer (radius `n + 2`).
pub fn make_exhaustion(model: ModelKind, levels: &[usize]) -> Result<ExhaustionFamily> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("exhaustion needs at least one level".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "exhaustion levels must be strictly increasing, got {levels:?}"
        )));
    }
    let levels = levels
        .iter()
        .map(|&n| -> Result<ExhaustionLevel> {
            let (graph, window) = match model {
                ModelKind::BiasedZ => {
                    if n < 1 {
                        return Err(Error::InvalidParameter("biased-Z levels start at 1".into()));
                    }
                    let (g, _) = make_biased_z(n + 1)?;
                    let w = (-(n as i64)..=n as i64)
                        .map(|k| g.locate(&[k]).expect("inside radius"))
                        .collect();
                    (g, w)
                }
                ModelKind::RegularTree { branching } => {
                    let g = make_regular_tree(branching, n + 1)?;
                    let w = VertexSet::from_indices(0..tree_level_offset(branching, n + 1));
                    (g, w)
                }
                ModelKind::LatticeBox { dimension } => {
                    let g = make_lattice_box(dimension, n + 2)?;
                    let r = n as i64;
                    let w = g
                        .vertices()
                        .filter(|&x| g.coordinate(x).iter().all(|c| c.abs() <= r))
                        .collect();
                    (g, w)
                }
            };
            Ok(ExhaustionLevel { parameter: n, graph, window })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExhaustionFamily { model, levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biased_z_radius_one() {
        let (g, r) = make_biased_z(1).unwrap();
        assert_eq!(g.vertex_count(), 3);
        let o = g.locate(&[0]).unwrap();
        let p = g.locate(&[1]).unwrap();
        let m = g.locate(&[-1]).unwrap();
        assert_eq!(g.total_weight(o), 2.0);
        assert_eq!(g.transition_probability(o, p), 0.5);
        assert_eq!(g.transition_probability(o, m), 0.5);
        assert_eq!(r, 0.5);
        // outward step of the uncollapsed chain has probability 2/3
        let out = g.kill_probability(p) + g.transition_probability(p, p);
        assert!((out - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.kill_probability(p) - (2.0 / 3.0) * 0.5).abs() < 1e-15);
    }

    #[test]
    fn biased_z_radius_zero_rejected() {
        assert!(make_biased_z(0).is_err());
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let graphs = [
            make_biased_z(6).unwrap().0,
            make_regular_tree(3, 3).unwrap(),
            make_lattice_box(3, 2).unwrap(),
        ];
        for g in &graphs {
            for x in g.vertices() {
                assert!(g.row_sum_defect(x) < 1e-12);
            }
        }
    }

    #[test]
    fn binary_tree_depth_one_collapse() {
        let g = make_regular_tree(2, 1).unwrap();
        assert_eq!(g.vertex_count(), 3);
        let leaf = VertexId(1);
        assert_eq!(g.total_weight(leaf), 3.0);
        assert!((g.kill_probability(leaf) - (2.0 / 3.0) * 0.5).abs() < 1e-15);
        assert!((g.transition_probability(leaf, leaf) - (2.0 / 3.0) * 0.5).abs() < 1e-15);
    }

    #[test]
    fn ternary_tree_vertex_count() {
        assert_eq!(make_regular_tree(3, 2).unwrap().vertex_count(), 13);
        assert!(make_regular_tree(2, 0).is_err());
        assert_eq!(tree_depth(3, 0), 0);
        assert_eq!(tree_depth(3, 3), 1);
        assert_eq!(tree_depth(3, 4), 2);
    }

    #[test]
    fn lattice_single_vertex() {
        let g = make_lattice_box(3, 0).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.kill_weight(VertexId(0)), 6.0);
        assert!(make_lattice_box(2, 3).is_err());
    }

    #[test]
    fn lattice_degrees() {
        let g = make_lattice_box(3, 1).unwrap();
        for x in g.vertices() {
            assert_eq!(g.total_weight(x), 6.0);
        }
        let o = g.locate(&[0, 0, 0]).unwrap();
        assert_eq!(g.kill_weight(o), 0.0);
        let corner = g.locate(&[1, 1, -1]).unwrap();
        assert_eq!(g.kill_weight(corner), 3.0);
    }

    #[test]
    fn exhaustion_levels() {
        let e = make_exhaustion(ModelKind::BiasedZ, &[1, 2, 3]).unwrap();
        for lvl in &e.levels {
            let n = lvl.parameter as i64;
            assert_eq!(lvl.window.len(), 2 * lvl.parameter + 1);
            assert!(lvl.locate(&[n]).is_ok());
            assert!(lvl.locate(&[n + 1]).is_err());
            assert!(lvl.window.iter().all(|x| !lvl.graph.is_wrapper(x)));
        }
        let t = make_exhaustion(ModelKind::RegularTree { branching: 2 }, &[1, 2]).unwrap();
        assert_eq!(t.levels[0].window.len(), 3);
        assert_eq!(t.levels[1].window.len(), 7);
        assert!(t.levels[1].window.iter().all(|x| !t.levels[1].graph.is_wrapper(x)));
        assert!(make_exhaustion(ModelKind::BiasedZ, &[2, 1]).is_err());
        assert!(make_exhaustion(ModelKind::BiasedZ, &[2, 2]).is_err());
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("biased_z".parse::<ModelKind>().unwrap(), ModelKind::BiasedZ);
        assert_eq!("tree:3".parse::<ModelKind>().unwrap(), ModelKind::RegularTree { branching: 3 });
        assert!("torus".parse::<ModelKind>().is_err());
    }
}
