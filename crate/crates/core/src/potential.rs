//! Exact potential theory of the killed walk.
//!
//! Every quantity is obtained from linear solves against the reduced
//! operator `M = diag(a) − W` (see [`crate::linalg`]):
//!
//! * avoidance `q(z) = P_z[absorbed before τ_K]` solves `M_{V∖K} q = κ`;
//! * escape `P_x[τ_K^+ = ∞] = κ_x/a_x + Σ_{z∉K} p_{x,z} q(z)` for `x ∈ K`;
//! * Green's function `g(x,y) = (M^{-1})_{x,y} a_y`, so that
//!   `a_x g(x,y) = a_y g(y,x)`;
//! * last exit `P_x[X_{λ_L} = y] = g(x,y) P_y[τ_L^+ = ∞]`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::coupling::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::graph::{Direction, KilledWeightedGraph, VertexId, VertexSet};
use crate::linalg::{ReducedSystem, SolverConfig};

/// Escape probabilities at or below this value are treated as zero when
/// deciding membership of the inner escape boundary.
pub const BOUNDARY_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct EquilibriumProfile {
    pub set: VertexSet,
    /// `e_K(x)` indexed by vertex, zero outside `K`.
    pub measure: Vec<f64>,
    pub capacity: f64,
    /// `e_K / cap(K)`; empty when the capacity vanishes.
    pub harmonic: DiscreteDistribution<VertexId>,
    /// Inner escape boundary `{x ∈ K : P_x[τ_K^+ = ∞] > 0}`.
    pub boundary: VertexSet,
    /// `P_x[τ_K^+ = ∞]` for `x ∈ K`, zero elsewhere.
    pub escape: Vec<f64>,
}

impl EquilibriumProfile {
    pub fn mass(&self, x: VertexId) -> f64 {
        self.measure[x.0]
    }
}

/// Symmetric hinge measure `h_K(x,y) = e_K(x) P_x[X_{λ_K} = y]` on
/// `∂_X K × ∂_X K`.
#[derive(Clone, Debug)]
pub struct HingeMeasure {
    pub set: VertexSet,
    pub boundary: VertexSet,
    /// Row-major over `boundary × boundary`.
    values: Vec<f64>,
}

impl HingeMeasure {
    pub fn get(&self, x: VertexId, y: VertexId) -> f64 {
        match (self.boundary.position(x), self.boundary.position(y)) {
            (Some(i), Some(j)) => self.values[i * self.boundary.len() + j],
            _ => 0.0,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (VertexId, VertexId, f64)> + '_ {
        let b = self.boundary.as_slice();
        let m = b.len();
        self.values.iter().enumerate().map(move |(k, &v)| (b[k / m], b[k % m], v))
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sum(&self, x: VertexId) -> f64 {
        self.boundary.iter().map(|y| self.get(x, y)).sum()
    }

    pub fn column_sum(&self, y: VertexId) -> f64 {
        self.boundary.iter().map(|x| self.get(x, y)).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.entries()
            .map(|(x, y, v)| (v - self.get(y, x)).abs())
            .fold(0.0, f64::max)
    }

    /// `h_K / cap(K)` as a probability on hinge couples.
    pub fn normalized(&self) -> Result<DiscreteDistribution<(VertexId, VertexId)>> {
        DiscreteDistribution::measure(self.entries().map(|(x, y, v)| ((x, y), v)))?.normalized()
    }
}

/// Green's function of the killed walk, dense.
#[derive(Clone, Debug)]
pub struct GreenMatrix {
    n: usize,
    values: Vec<f64>,
}

impl GreenMatrix {
    pub fn get(&self, x: VertexId, y: VertexId) -> f64 {
        self.values[x.0 * self.n + y.0]
    }

    pub fn size(&self) -> usize {
        self.n
    }
}

/// Hitting probabilities and entrance laws of a set `K`.
#[derive(Clone, Debug)]
pub struct HittingProfile {
    pub set: VertexSet,
    /// `P_x[τ_K < ∞]`.
    pub prob: Vec<f64>,
    /// `entry[x][i] = P_x[X_{τ_K} = K_i, τ_K < ∞]` with `K_i` the i-th element of `set`.
    entry: Vec<Vec<f64>>,
}

impl HittingProfile {
    pub fn entry_mass(&self, x: VertexId, k: VertexId) -> f64 {
        self.set.position(k).map_or(0.0, |i| self.entry[x.0][i])
    }

    pub fn entry_distribution(&self, x: VertexId) -> Result<DiscreteDistribution<VertexId>> {
        DiscreteDistribution::measure(self.set.iter().zip(self.entry[x.0].iter().copied()))
    }
}

/// `e_{K,A→B}` and its total mass `cap_{A→B}(K)`.
#[derive(Clone, Debug)]
pub struct RestrictedEquilibrium {
    pub from: Direction,
    pub to: Direction,
    pub measure: Vec<f64>,
    pub capacity: f64,
}

/// One endpoint of a directed flow edge.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowNode {
    Vertex(VertexId),
    Ghost,
}

/// Antisymmetric edge flow, stored on ordered pairs.
#[derive(Clone, Debug, Default)]
pub struct Flow {
    values: BTreeMap<(FlowNode, FlowNode), f64>,
}

impl Flow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `θ(from, to) = value`; the reverse direction is implied.
    pub fn set(&mut self, from: FlowNode, to: FlowNode, value: f64) -> &mut Self {
        self.values.insert((from, to), value);
        self
    }

    pub fn get(&self, from: FlowNode, to: FlowNode) -> f64 {
        self.values
            .get(&(from, to))
            .copied()
            .or_else(|| self.values.get(&(to, from)).map(|v| -v))
            .unwrap_or(0.0)
    }
}

/// Residual allowed in flow conservation checks.
const FLOW_TOLERANCE: f64 = 1e-10;

/// Solver bound to one graph. The factorization of the full operator used
/// by Green's function queries is computed once and then shared read-only.
pub struct Potential<'g> {
    graph: &'g KilledWeightedGraph,
    config: SolverConfig,
    full: OnceLock<ReducedSystem>,
}

struct Avoidance {
    /// `P_z[killed (at the selected channel) before τ_K]` for `z ∉ K`.
    avoid: Vec<f64>,
    /// Same event started from `x ∈ K` and counted from time 1.
    escape: Vec<f64>,
}

impl<'g> Potential<'g> {
    pub fn new(graph: &'g KilledWeightedGraph) -> Self {
        Self::with_config(graph, SolverConfig::default())
    }

    pub fn with_config(graph: &'g KilledWeightedGraph, config: SolverConfig) -> Self {
        Potential { graph, config, full: OnceLock::new() }
    }

    pub fn graph(&self) -> &'g KilledWeightedGraph {
        self.graph
    }

    fn full_system(&self) -> Result<&ReducedSystem> {
        if let Some(sys) = self.full.get() {
            return Ok(sys);
        }
        let sys = ReducedSystem::new(self.graph, &vec![true; self.graph.vertex_count()], self.config)?;
        Ok(self.full.get_or_init(|| sys))
    }

    /// `M^{-1} e_x`, i.e. `g(·, x) / a_x` and `g(x, ·) / a_·`.
    fn resolvent_column(&self, x: VertexId) -> Result<Vec<f64>> {
        self.graph.check_vertex(x)?;
        let n = self.graph.vertex_count();
        let mut rhs = vec![0.0; n];
        rhs[x.0] = 1.0;
        self.full_system()?.solve(&rhs)
    }

    /// Avoidance of `K` where only kills at `channel` (or any kill when
    /// `None`) count as escape.
    fn avoidance(&self, set: &VertexSet, channel: Option<VertexId>) -> Result<Avoidance> {
        self.graph.check_set(set)?;
        let g = self.graph;
        let n = g.vertex_count();
        let in_k = set.mask(n);
        let outside: Vec<bool> = in_k.iter().map(|&b| !b).collect();
        let counts = |z: usize| match channel {
            None => g.kill_weights()[z],
            Some(c) if c.0 == z => g.kill_weights()[z],
            Some(_) => 0.0,
        };
        let sys = ReducedSystem::new(g, &outside, self.config)?;
        let rhs: Vec<f64> = sys.indices().iter().map(|&z| counts(z)).collect();
        let avoid = sys.solve_global(&rhs, n)?;
        let mut escape = vec![0.0; n];
        for x in set.iter() {
            let a = g.total_weight(x);
            let through: f64 = g
                .neighbors(x)
                .iter()
                .filter(|&&(z, _)| !in_k[z])
                .map(|&(z, w)| w * avoid[z])
                .sum();
            escape[x.0] = ((counts(x.0) + through) / a).clamp(0.0, 1.0);
        }
        Ok(Avoidance { avoid, escape })
    }

    /// `P_x[τ_K^+ = ∞]` for `x ∈ K` (zero outside `K`).
    pub fn escape_probability(&self, set: &VertexSet) -> Result<Vec<f64>> {
        Ok(self.avoidance(set, None)?.escape)
    }

    /// `P_z[τ_K = ∞]` for `z ∉ K` (zero on `K`).
    pub fn avoidance_probability(&self, set: &VertexSet) -> Result<Vec<f64>> {
        Ok(self.avoidance(set, None)?.avoid)
    }

    pub fn equilibrium(&self, set: &VertexSet) -> Result<EquilibriumProfile> {
        let escape = self.escape_probability(set)?;
        Ok(self.profile_from_escape(set, escape))
    }

    fn profile_from_escape(&self, set: &VertexSet, escape: Vec<f64>) -> EquilibriumProfile {
        let g = self.graph;
        let measure: Vec<f64> = g.vertices().map(|x| g.total_weight(x) * escape[x.0]).collect();
        let boundary: VertexSet = set.iter().filter(|x| escape[x.0] > BOUNDARY_THRESHOLD).collect();
        let capacity: f64 = set.iter().map(|x| measure[x.0]).sum();
        let harmonic = if capacity > 0.0 {
            DiscreteDistribution::measure(boundary.iter().map(|x| (x, measure[x.0])))
                .and_then(|m| m.normalized())
                .unwrap_or_default()
        } else {
            DiscreteDistribution::default()
        };
        EquilibriumProfile { set: set.clone(), measure, capacity, harmonic, boundary, escape }
    }

    pub fn hitting(&self, set: &VertexSet) -> Result<HittingProfile> {
        self.graph.check_set(set)?;
        let g = self.graph;
        let n = g.vertex_count();
        let in_k = set.mask(n);
        let outside: Vec<bool> = in_k.iter().map(|&b| !b).collect();
        let sys = ReducedSystem::new(g, &outside, self.config)?;
        let mut entry = vec![vec![0.0; set.len()]; n];
        for (i, k) in set.iter().enumerate() {
            entry[k.0][i] = 1.0;
            let rhs: Vec<f64> = sys.indices().iter().map(|&z| g.conductance(VertexId(z), k)).collect();
            let sol = sys.solve(&rhs)?;
            for (l, &z) in sys.indices().iter().enumerate() {
                entry[z][i] = sol[l].max(0.0);
            }
        }
        let prob = entry.iter().map(|row| row.iter().sum::<f64>().min(1.0)).collect();
        Ok(HittingProfile { set: set.clone(), prob, entry })
    }

    /// `g(·, y)`: expected visits to `y` from every start.
    pub fn green_column(&self, y: VertexId) -> Result<Vec<f64>> {
        let a = self.graph.total_weight(y);
        Ok(self.resolvent_column(y)?.into_iter().map(|v| v * a).collect())
    }

    /// `g(x, ·)`: expected visits from `x` to every vertex.
    pub fn green_row(&self, x: VertexId) -> Result<Vec<f64>> {
        let col = self.resolvent_column(x)?;
        Ok(col.iter().zip(self.graph.total_weights()).map(|(v, a)| v * a).collect())
    }

    pub fn greens(&self) -> Result<GreenMatrix> {
        let n = self.graph.vertex_count();
        let mut values = Vec::with_capacity(n * n);
        for x in self.graph.vertices() {
            values.extend(self.green_row(x)?);
        }
        Ok(GreenMatrix { n, values })
    }

    /// `P_z[τ_x < ∞] = g(z,x) / g(x,x)` for every `z`.
    pub fn hitting_probability_of(&self, x: VertexId) -> Result<Vec<f64>> {
        let col = self.resolvent_column(x)?;
        let gxx = col[x.0];
        Ok(col.iter().map(|v| (v / gxx).min(1.0)).collect())
    }

    /// `P_x[X_{λ_L} = ·]` over `∂_X L` (total mass `P_x[τ_L < ∞]`).
    pub fn last_exit_distribution(&self, set: &VertexSet, x: VertexId) -> Result<DiscreteDistribution<VertexId>> {
        let eq = self.equilibrium(set)?;
        let row = self.green_row(x)?;
        let dist = DiscreteDistribution::measure(eq.boundary.iter().map(|y| (y, row[y.0] * eq.escape[y.0])))?;
        if dist.total() <= 0.0 {
            return Err(Error::ZeroProbability(format!("vertex {x} cannot reach the target set")));
        }
        Ok(dist)
    }

    /// Rows `P_{x}[X_{λ_L} = y]` for each source `x`, `y` ranging over `eq.boundary`.
    pub(crate) fn last_exit_rows(&self, eq: &EquilibriumProfile, sources: &[VertexId]) -> Result<Vec<Vec<f64>>> {
        sources
            .iter()
            .map(|&x| {
                let row = self.green_row(x)?;
                Ok(eq.boundary.iter().map(|y| row[y.0] * eq.escape[y.0]).collect())
            })
            .collect()
    }

    pub fn hinge(&self, set: &VertexSet) -> Result<HingeMeasure> {
        let eq = self.equilibrium(set)?;
        self.hinge_from(&eq)
    }

    pub(crate) fn hinge_from(&self, eq: &EquilibriumProfile) -> Result<HingeMeasure> {
        let rows = self.last_exit_rows(eq, eq.boundary.as_slice())?;
        let values = eq
            .boundary
            .iter()
            .zip(rows)
            .flat_map(|(x, row)| {
                let ex = eq.measure[x.0];
                row.into_iter().map(move |p| ex * p)
            })
            .collect();
        Ok(HingeMeasure { set: eq.set.clone(), boundary: eq.boundary.clone(), values })
    }

    /// `Σ_{x∈L} e_L(x) P_x[X_{τ_K} = ·, τ_K < ∞]`, indexed by vertex.
    pub fn consistency_pushforward(&self, inner: &VertexSet, outer: &VertexSet) -> Result<Vec<f64>> {
        self.graph.check_set(inner)?;
        if !inner.is_subset(outer) {
            return Err(Error::NotNested("K", "L"));
        }
        let eq_l = self.equilibrium(outer)?;
        let hit = self.hitting(inner)?;
        let mut out = vec![0.0; self.graph.vertex_count()];
        for x in eq_l.boundary.iter() {
            let e = eq_l.measure[x.0];
            for k in inner.iter() {
                out[k.0] += e * hit.entry_mass(x, k);
            }
        }
        Ok(out)
    }

    /// `P_{x'}[τ_x < ∞ | X_{λ_L} = y']`, using the strong-Markov factorization
    /// of the numerator `P_{x'}[τ_x < ∞] P_x[X_{λ_L} = y']`.
    pub fn conditional_hit_given_last_exit(
        &self,
        set: &VertexSet,
        x: VertexId,
        start: VertexId,
        last: VertexId,
    ) -> Result<f64> {
        self.graph.check_vertex(start)?;
        if !set.contains(x) {
            return Err(Error::InvalidParameter(format!("vertex {x} is not in L")));
        }
        let eq = self.equilibrium(set)?;
        let esc = eq.escape[last.0];
        let denom = self.green_row(start)?[last.0] * esc;
        if !(denom > 0.0) {
            return Err(Error::ZeroProbability(format!(
                "P_{start}[X_lambda_L = {last}] vanishes"
            )));
        }
        let hit = self.hitting_probability_of(x)?[start.0];
        let numer = hit * self.green_row(x)?[last.0] * esc;
        Ok((numer / denom).min(1.0))
    }

    /// `e_{K,A→B}(x) = a_x P_x[A, τ_K^+ = ∞] P_x[B]` on a graph with
    /// labeled escape ends.
    pub fn restricted_equilibrium(
        &self,
        set: &VertexSet,
        from: Direction,
        to: Direction,
    ) -> Result<RestrictedEquilibrium> {
        let g = self.graph;
        let ends = g.direction_ends().ok_or_else(|| {
            Error::UnsupportedFamily("direction atoms need a graph with labeled ends".into())
        })?;
        let from_end = from.end(&ends);
        let to_end = to.end(&ends);
        let esc_a = self.avoidance(set, Some(from_end))?.escape;
        // P_x[killed at the B end] = (M^{-1})_{x,b} κ_b
        let col = self.resolvent_column(to_end)?;
        let kb = g.kill_weight(to_end);
        let measure: Vec<f64> = g
            .vertices()
            .map(|x| g.total_weight(x) * esc_a[x.0] * (col[x.0] * kb).min(1.0))
            .collect();
        let capacity = set.iter().map(|x| measure[x.0]).sum();
        Ok(RestrictedEquilibrium { from, to, measure, capacity })
    }

    /// Unit current flow from `K` to the ghost: `θ(x,y) = a_{x,y}(v(x) − v(y)) / cap(K)`
    /// with `v = P_·[τ_K < ∞]`.
    pub fn harmonic_flow(&self, set: &VertexSet) -> Result<Flow> {
        let g = self.graph;
        let cap = self.equilibrium(set)?.capacity;
        let v = self.hitting(set)?.prob;
        let mut flow = Flow::new();
        for &(x, y, w) in g.edges() {
            flow.set(FlowNode::Vertex(VertexId(x)), FlowNode::Vertex(VertexId(y)), w * (v[x] - v[y]) / cap);
        }
        for x in g.vertices() {
            let k = g.kill_weight(x);
            if k > 0.0 {
                flow.set(FlowNode::Vertex(x), FlowNode::Ghost, k * v[x.0] / cap);
            }
        }
        Ok(flow)
    }

    /// Energy `Σ θ(x,y)² / a_{x,y}` over ordered pairs (each undirected edge
    /// counted twice), after validating that `flow` is a unit flow from `K`
    /// to the ghost. Every valid flow satisfies `energy ≥ 2 / cap(K)`.
    pub fn flow_energy_bound(&self, set: &VertexSet, flow: &Flow) -> Result<f64> {
        let g = self.graph;
        g.check_set(set)?;
        let n = g.vertex_count();
        let in_k = set.mask(n);
        let conductance = |a: FlowNode, b: FlowNode| -> f64 {
            match (a, b) {
                (FlowNode::Vertex(x), FlowNode::Vertex(y)) if x != y => g.conductance(x, y),
                (FlowNode::Vertex(x), FlowNode::Ghost) | (FlowNode::Ghost, FlowNode::Vertex(x)) => g.kill_weight(x),
                _ => 0.0,
            }
        };
        let mut antisym: BTreeMap<(FlowNode, FlowNode), f64> = BTreeMap::new();
        for (&(a, b), &v) in &flow.values {
            if !v.is_finite() {
                return Err(Error::InvalidFlow(format!("non-finite value on {a:?}→{b:?}")));
            }
            if v != 0.0 && conductance(a, b) <= 0.0 {
                return Err(Error::InvalidFlow(format!("flow on {a:?}→{b:?}, which is not an edge")));
            }
            if let Some(&r) = flow.values.get(&(b, a)) {
                if (r + v).abs() > FLOW_TOLERANCE {
                    return Err(Error::InvalidFlow(format!(
                        "not antisymmetric on {a:?}↔{b:?}: {v} vs {r}"
                    )));
                }
            }
            antisym.insert((a, b), v);
            antisym.insert((b, a), -v);
        }
        let mut divergence = vec![0.0; n];
        for (&(a, b), &v) in &antisym {
            if let FlowNode::Vertex(x) = a {
                divergence[x.0] += v;
                if let FlowNode::Vertex(y) = b {
                    if in_k[x.0] && in_k[y.0] && v.abs() > FLOW_TOLERANCE {
                        return Err(Error::InvalidFlow(format!(
                            "nonzero flow {v} on internal edge {x}→{y} of K"
                        )));
                    }
                }
            }
        }
        for x in g.vertices() {
            if !in_k[x.0] && divergence[x.0].abs() > FLOW_TOLERANCE {
                return Err(Error::InvalidFlow(format!(
                    "divergence {} at vertex {x} outside K",
                    divergence[x.0]
                )));
            }
        }
        let out_of_k: f64 = set.iter().map(|x| divergence[x.0]).sum();
        if (out_of_k - 1.0).abs() > FLOW_TOLERANCE {
            return Err(Error::InvalidFlow(format!("total flow out of K is {out_of_k}, expected 1")));
        }
        Ok(antisym
            .iter()
            .map(|(&(a, b), &v)| if v == 0.0 { 0.0 } else { v * v / conductance(a, b) })
            .sum())
    }
}

// Thin free-function forms of the solver methods.

pub fn escape_probability(graph: &KilledWeightedGraph, set: &VertexSet) -> Result<Vec<f64>> {
    Potential::new(graph).escape_probability(set)
}

pub fn equilibrium(graph: &KilledWeightedGraph, set: &VertexSet) -> Result<EquilibriumProfile> {
    Potential::new(graph).equilibrium(set)
}

pub fn hitting(graph: &KilledWeightedGraph, set: &VertexSet) -> Result<HittingProfile> {
    Potential::new(graph).hitting(set)
}

pub fn greens(graph: &KilledWeightedGraph) -> Result<GreenMatrix> {
    Potential::new(graph).greens()
}

pub fn hinge(graph: &KilledWeightedGraph, set: &VertexSet) -> Result<HingeMeasure> {
    Potential::new(graph).hinge(set)
}

pub fn last_exit_distribution(
    graph: &KilledWeightedGraph,
    set: &VertexSet,
    x: VertexId,
) -> Result<DiscreteDistribution<VertexId>> {
    Potential::new(graph).last_exit_distribution(set, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, make_biased_z, make_regular_tree};

    fn two_path() -> KilledWeightedGraph {
        build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0), (1, 1.0)]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_vertex() {
        let g = build_graph(1, &[], &[(0, 1.0)]).unwrap();
        let p = Potential::new(&g);
        let k = VertexSet::from_indices([0]);
        assert_eq!(p.escape_probability(&k).unwrap()[0], 1.0);
        assert_eq!(p.equilibrium(&k).unwrap().capacity, 1.0);
        assert_eq!(p.greens().unwrap().get(VertexId(0), VertexId(0)), 1.0);
    }

    #[test]
    fn two_vertex_path_hand_values() {
        let g = two_path();
        let p = Potential::new(&g);
        let u = VertexSet::from_indices([0]);
        let uv = VertexSet::from_indices([0, 1]);
        assert!(close(p.escape_probability(&u).unwrap()[0], 0.75, 1e-14));
        let esc = p.escape_probability(&uv).unwrap();
        assert!(close(esc[0], 0.5, 1e-14) && close(esc[1], 0.5, 1e-14));
        assert!(close(p.equilibrium(&u).unwrap().capacity, 1.5, 1e-14));
        assert!(close(p.equilibrium(&uv).unwrap().capacity, 2.0, 1e-14));

        let gm = p.greens().unwrap();
        assert!(close(gm.get(VertexId(0), VertexId(0)), 4.0 / 3.0, 1e-14));
        assert!(close(gm.get(VertexId(0), VertexId(1)), 2.0 / 3.0, 1e-14));

        let le = p.last_exit_distribution(&uv, VertexId(0)).unwrap();
        assert!(close(le.mass(&VertexId(0)), 2.0 / 3.0, 1e-14));
        assert!(close(le.mass(&VertexId(1)), 1.0 / 3.0, 1e-14));
        assert!(close(le.total(), 1.0, 1e-14));

        let h = p.hinge(&uv).unwrap();
        assert!(close(h.get(VertexId(0), VertexId(0)), 2.0 / 3.0, 1e-14));
        assert!(close(h.get(VertexId(0), VertexId(1)), 1.0 / 3.0, 1e-14));
        assert!(close(h.get(VertexId(1), VertexId(0)), 1.0 / 3.0, 1e-14));
        assert!(close(h.row_sum(VertexId(0)), 1.0, 1e-14));

        let push = p.consistency_pushforward(&u, &uv).unwrap();
        assert!(close(push[0], 1.5, 1e-14));
    }

    #[test]
    fn singleton_hinge_and_last_exit() {
        let (g, _) = make_biased_z(3).unwrap();
        let p = Potential::new(&g);
        let o = g.locate(&[0]).unwrap();
        let k = VertexSet::singleton(o);
        let h = p.hinge(&k).unwrap();
        let cap = p.equilibrium(&k).unwrap().capacity;
        assert!(close(h.get(o, o), cap, 1e-12));
        let le = p.last_exit_distribution(&k, o).unwrap();
        assert!(close(le.mass(&o), 1.0, 1e-12));
    }

    #[test]
    fn biased_z_gamblers_ruin() {
        let (g, _) = make_biased_z(8).unwrap();
        let p = Potential::new(&g);
        let o = g.locate(&[0]).unwrap();
        let hit = p.hitting(&VertexSet::singleton(o)).unwrap();
        for n in 1..=8i64 {
            let x = g.locate(&[n]).unwrap();
            assert!(close(hit.prob[x.0], 0.5f64.powi(n as i32), 1e-12), "n={n}");
            assert!(close(hit.entry_mass(x, o), hit.prob[x.0], 1e-15));
        }
        assert_eq!(hit.prob[o.0], 1.0);
    }

    #[test]
    fn biased_z_escape_from_origin() {
        let (g, _) = make_biased_z(2).unwrap();
        let o = g.locate(&[0]).unwrap();
        let esc = escape_probability(&g, &VertexSet::singleton(o)).unwrap();
        assert!(close(esc[o.0], 0.5, 1e-14));
    }

    #[test]
    fn biased_z_restricted_capacity() {
        let (g, _) = make_biased_z(8).unwrap();
        let p = Potential::new(&g);
        let o = VertexSet::singleton(g.locate(&[0]).unwrap());
        let mp = p.restricted_equilibrium(&o, Direction::Minus, Direction::Plus).unwrap();
        assert!(close(mp.capacity, 0.25, 1e-12));
        let pp = p.restricted_equilibrium(&o, Direction::Plus, Direction::Plus).unwrap();
        assert!(close(pp.capacity, 0.25, 1e-12));
        let total: f64 = [Direction::Minus, Direction::Plus]
            .iter()
            .flat_map(|&a| [Direction::Minus, Direction::Plus].map(move |b| (a, b)))
            .map(|(a, b)| p.restricted_equilibrium(&o, a, b).unwrap().capacity)
            .sum();
        let cap = p.equilibrium(&o).unwrap().capacity;
        assert!(close(total, cap, 1e-12));
    }

    #[test]
    fn restricted_equilibrium_needs_ends() {
        let g = two_path();
        let err = Potential::new(&g)
            .restricted_equilibrium(&VertexSet::from_indices([0]), Direction::Minus, Direction::Plus)
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedFamily(_)));
    }

    #[test]
    fn conditional_hit_on_the_line() {
        let (g, _) = make_biased_z(5).unwrap();
        let p = Potential::new(&g);
        let l: VertexSet = (-4..=4).map(|k| g.locate(&[k]).unwrap()).collect();
        let o = g.locate(&[0]).unwrap();
        let left = g.locate(&[-4]).unwrap();
        let right = g.locate(&[4]).unwrap();
        let c = p.conditional_hit_given_last_exit(&l, o, left, right).unwrap();
        assert!(close(c, 1.0, 1e-10));
        assert_eq!(p.conditional_hit_given_last_exit(&l, o, o, right).unwrap(), 1.0);
    }

    #[test]
    fn conditional_hit_on_the_tree_decreases_with_depth() {
        // x = root, x' and y' sibling leaves in the same subtree of the root
        let mut prev = f64::INFINITY;
        for n in 2..=5usize {
            let g = make_regular_tree(2, n + 1).unwrap();
            let p = Potential::new(&g);
            let ball = VertexSet::from_indices(0..(1 << (n + 1)) - 1);
            let first_leaf = (1 << n) - 1;
            let c = p
                .conditional_hit_given_last_exit(&ball, VertexId(0), VertexId(first_leaf), VertexId(first_leaf + 1))
                .unwrap();
            assert!(c < prev, "n={n}: {c} !< {prev}");
            assert!(c < 2f64.powi(-(n as i32 - 1)));
            prev = c;
        }
    }

    #[test]
    fn flow_energy_examples() {
        let g = two_path();
        let p = Potential::new(&g);
        let k = VertexSet::from_indices([0]);
        let u = FlowNode::Vertex(VertexId(0));
        let v = FlowNode::Vertex(VertexId(1));
        let mut flow = Flow::new();
        flow.set(u, FlowNode::Ghost, 0.5).set(u, v, 0.5).set(v, FlowNode::Ghost, 0.5);
        let e = p.flow_energy_bound(&k, &flow).unwrap();
        assert!(close(e, 1.5, 1e-14));
        let cap = p.equilibrium(&k).unwrap().capacity;
        assert!(e >= 2.0 / cap);
        let harmonic = p.harmonic_flow(&k).unwrap();
        let eh = p.flow_energy_bound(&k, &harmonic).unwrap();
        assert!(close(eh, 4.0 / 3.0, 1e-12), "{eh}");
    }

    #[test]
    fn flow_validation_errors() {
        let g = two_path();
        let p = Potential::new(&g);
        let k = VertexSet::from_indices([0]);
        let u = FlowNode::Vertex(VertexId(0));
        let v = FlowNode::Vertex(VertexId(1));
        let mut leaky = Flow::new();
        leaky.set(u, FlowNode::Ghost, 0.5).set(u, v, 0.5);
        assert!(p.flow_energy_bound(&k, &leaky).unwrap_err().to_string().contains("divergence"));
        let mut short = Flow::new();
        short.set(u, FlowNode::Ghost, 0.5);
        assert!(p.flow_energy_bound(&k, &short).unwrap_err().to_string().contains("total flow"));
        let mut asym = Flow::new();
        asym.set(u, FlowNode::Ghost, 1.0).set(u, v, 0.1).set(v, u, 0.2);
        assert!(p.flow_energy_bound(&k, &asym).unwrap_err().to_string().contains("antisymmetric"));
    }
}
