//! Sampling the interlacement process seen from a finite window.
//!
//! Trajectories hitting `K` form a Poisson process of intensity `cap(K)`;
//! each one enters `K` at a point drawn from `harm_K`, its past is a walk
//! conditioned never to return to `K`, and its future is a free walk. Both
//! legs are followed until the walk is absorbed by the ghost, so a stored
//! trajectory is complete and can be re-anchored on any larger window.
//!
//! Conditioned walks use the Doob transform by `q(z) = P_z[τ_K = ∞]`.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Poisson;

use crate::coupling::{DiscreteDistribution, WeightedSampler};
use crate::error::{Error, Result};
use crate::fmt17;
use crate::graph::{KilledWeightedGraph, VertexId, VertexSet};
use crate::potential::{EquilibriumProfile, Potential};
use crate::rng::RngStream;

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 1_000_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Terminal {
    /// Ends where the walk was absorbed by the ghost.
    Killed,
    /// Cut at the last visit to the window.
    LastVisit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinitePath {
    pub vertices: Vec<VertexId>,
    pub terminal: Terminal,
}

impl FinitePath {
    pub fn start(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn end(&self) -> VertexId {
        *self.vertices.last().expect("paths are nonempty")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// A trajectory split at its first visit to the window. Both legs start at
/// the entry point; the backward leg is stored in reversed time.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrajectory {
    pub backward: FinitePath,
    pub entry: VertexId,
    pub forward: FinitePath,
    pub mark: Option<f64>,
}

impl LabeledTrajectory {
    /// The whole trajectory in forward time.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.backward.vertices.iter().rev().chain(self.forward.vertices.iter().skip(1)).copied()
    }

    /// `(first, last)` visit to `set`, if the trajectory meets it.
    pub fn hinge_couple(&self, set: &VertexSet) -> Option<(VertexId, VertexId)> {
        let first = self.vertices().find(|&v| set.contains(v))?;
        let last = self.vertices().filter(|&v| set.contains(v)).last()?;
        Some((first, last))
    }

    /// Splits the same path at its first visit to `set`.
    pub fn reanchored(&self, set: &VertexSet) -> Option<LabeledTrajectory> {
        let path: Vec<VertexId> = self.vertices().collect();
        let i = path.iter().position(|&v| set.contains(v))?;
        let mut back: Vec<VertexId> = path[..=i].to_vec();
        back.reverse();
        Some(LabeledTrajectory {
            backward: FinitePath { vertices: back, terminal: Terminal::Killed },
            entry: path[i],
            forward: FinitePath { vertices: path[i..].to_vec(), terminal: Terminal::Killed },
            mark: self.mark,
        })
    }
}

/// Occupation of the window, indexed by position in the window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationFields {
    pub window: VertexSet,
    pub indicator: Vec<bool>,
    /// Number of distinct trajectories visiting each vertex.
    pub trajectory_count: Vec<u32>,
    /// Total number of visits, the entry point counted once per trajectory.
    pub visit_count: Vec<u64>,
}

impl OccupationFields {
    fn empty(window: &VertexSet) -> Self {
        let m = window.len();
        OccupationFields {
            window: window.clone(),
            indicator: vec![false; m],
            trajectory_count: vec![0; m],
            visit_count: vec![0; m],
        }
    }

    fn slot(&self, x: VertexId) -> usize {
        self.window.position(x).unwrap_or_else(|| panic!("vertex {x} is outside the window"))
    }

    pub fn occupied(&self, x: VertexId) -> bool {
        self.indicator[self.slot(x)]
    }

    pub fn trajectories(&self, x: VertexId) -> u32 {
        self.trajectory_count[self.slot(x)]
    }

    pub fn visits(&self, x: VertexId) -> u64 {
        self.visit_count[self.slot(x)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,indicator,trajectories,visits\n");
        for (i, x) in self.window.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                x.0, self.indicator[i] as u8, self.trajectory_count[i], self.visit_count[i]
            );
        }
        out
    }
}

pub fn occupation_fields(window: &VertexSet, trajectories: &[LabeledTrajectory]) -> OccupationFields {
    let mut f = OccupationFields::empty(window);
    let mut seen = vec![usize::MAX; window.len()];
    for (t, w) in trajectories.iter().enumerate() {
        for v in w.vertices() {
            if let Some(i) = window.position(v) {
                f.visit_count[i] += 1;
                if seen[i] != t {
                    seen[i] = t;
                    f.trajectory_count[i] += 1;
                    f.indicator[i] = true;
                }
            }
        }
    }
    f
}

#[derive(Clone, Debug)]
pub struct WindowSample {
    pub window: VertexSet,
    pub trajectories: Vec<LabeledTrajectory>,
    pub fields: OccupationFields,
}

impl WindowSample {
    pub fn new(window: VertexSet, trajectories: Vec<LabeledTrajectory>) -> Self {
        let fields = occupation_fields(&window, &trajectories);
        WindowSample { window, trajectories, fields }
    }

    pub fn is_vacant(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Trajectories with mark at most `u`; unmarked ones are kept.
    pub fn at_level(&self, u: f64) -> WindowSample {
        let kept = self
            .trajectories
            .iter()
            .filter(|w| w.mark.is_none_or(|m| m <= u))
            .cloned()
            .collect();
        WindowSample::new(self.window.clone(), kept)
    }

    /// Trajectories meeting `set ⊆ window`, split at their first visit to it.
    pub fn restricted(&self, set: &VertexSet) -> Result<WindowSample> {
        if !set.is_subset(&self.window) {
            return Err(Error::NotNested("K", "window"));
        }
        let kept = self.trajectories.iter().filter_map(|w| w.reanchored(set)).collect();
        Ok(WindowSample::new(set.clone(), kept))
    }

    /// One line per trajectory: `mark entry | backward | forward`, with `-`
    /// standing for a missing mark.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for w in &self.trajectories {
            let mark = w.mark.map_or_else(|| "-".to_string(), fmt17);
            let join = |p: &FinitePath| p.vertices.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "{mark} {} | {} | {}", w.entry.0, join(&w.backward), join(&w.forward));
        }
        out
    }
}

#[derive(Copy, Clone, Debug)]
enum Step {
    To(usize),
    Ghost,
}

/// Per-vertex weighted step tables.
#[derive(Clone, Debug)]
struct StepTable {
    steps: Vec<Vec<Step>>,
    index: Vec<Option<WeightedIndex<f64>>>,
}

impl StepTable {
    fn from_weights(rows: Vec<Vec<(Step, f64)>>) -> Self {
        let mut steps = Vec::with_capacity(rows.len());
        let mut index = Vec::with_capacity(rows.len());
        for row in rows {
            let row: Vec<(Step, f64)> = row.into_iter().filter(|&(_, w)| w > 0.0).collect();
            index.push(WeightedIndex::new(row.iter().map(|&(_, w)| w)).ok());
            steps.push(row.into_iter().map(|(s, _)| s).collect());
        }
        StepTable { steps, index }
    }

    fn step(&self, x: usize, rng: &mut RngStream) -> Step {
        let idx = self.index[x].as_ref().expect("vertex has outgoing weight");
        self.steps[x][idx.sample(rng)]
    }

    fn walk(&self, x: usize, budget: u64, rng: &mut RngStream) -> Result<FinitePath> {
        let mut vertices = vec![VertexId(x)];
        let mut cur = x;
        for _ in 0..budget {
            match self.step(cur, rng) {
                Step::Ghost => return Ok(FinitePath { vertices, terminal: Terminal::Killed }),
                Step::To(y) => {
                    vertices.push(VertexId(y));
                    cur = y;
                }
            }
        }
        Err(Error::StepBudget(budget))
    }
}

fn free_rows(graph: &KilledWeightedGraph) -> Vec<Vec<(Step, f64)>> {
    graph
        .vertices()
        .map(|x| {
            let mut row: Vec<(Step, f64)> = graph.neighbors(x).iter().map(|&(y, w)| (Step::To(y), w)).collect();
            row.push((Step::To(x.0), graph.self_loop_weight(x)));
            row.push((Step::Ghost, graph.kill_weight(x)));
            row
        })
        .collect()
}

/// The free walk `p_{x,y} = a_{x,y} / a_x`.
#[derive(Clone, Debug)]
pub struct ForwardKernel {
    table: StepTable,
    budget: u64,
}

impl ForwardKernel {
    pub fn new(graph: &KilledWeightedGraph) -> Self {
        ForwardKernel { table: StepTable::from_weights(free_rows(graph)), budget: DEFAULT_STEP_BUDGET }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn sample(&self, x: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
        self.table.walk(x.0, self.budget, rng)
    }
}

/// The walk conditioned on `τ_K^+ = ∞` (from `K`) or `τ_K = ∞` (from outside).
#[derive(Clone, Debug)]
pub struct NoReturnKernel {
    set: VertexSet,
    /// `P_z[τ_K = ∞]` off `K`, `P_x[τ_K^+ = ∞]` on `K`.
    h: Vec<f64>,
    table: StepTable,
    budget: u64,
}

impl NoReturnKernel {
    pub fn new(potential: &Potential<'_>, set: &VertexSet) -> Result<Self> {
        let graph = potential.graph();
        let n = graph.vertex_count();
        let in_k = set.mask(n);
        let avoid = potential.avoidance_probability(set)?;
        let escape = potential.escape_probability(set)?;
        let h: Vec<f64> = (0..n).map(|i| if in_k[i] { escape[i] } else { avoid[i] }).collect();
        let rows = graph
            .vertices()
            .map(|x| {
                if h[x.0] <= 0.0 {
                    return Vec::new();
                }
                let mut row: Vec<(Step, f64)> = graph
                    .neighbors(x)
                    .iter()
                    .filter(|&&(z, _)| !in_k[z])
                    .map(|&(z, w)| (Step::To(z), w * avoid[z]))
                    .collect();
                if !in_k[x.0] {
                    row.push((Step::To(x.0), graph.self_loop_weight(x) * avoid[x.0]));
                }
                row.push((Step::Ghost, graph.kill_weight(x)));
                row
            })
            .collect();
        Ok(NoReturnKernel { set: set.clone(), h, table: StepTable::from_weights(rows), budget: DEFAULT_STEP_BUDGET })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// `|Σ_z p̂(y,z) + p̂(y, ghost) − 1|` for the transformed row at `y`.
    pub fn row_defect(&self, graph: &KilledWeightedGraph, y: VertexId) -> f64 {
        let in_k = self.set.contains(y);
        let a = graph.total_weight(y);
        let hy = self.h[y.0];
        let mut s = graph.kill_weight(y) / (a * hy);
        for &(z, w) in graph.neighbors(y) {
            if !self.set.contains(VertexId(z)) {
                s += w * self.h[z] / (a * hy);
            }
        }
        if !in_k {
            s += graph.self_loop_weight(y) * self.h[y.0] / (a * hy);
        }
        (s - 1.0).abs()
    }

    /// First-step law from `x`: neighbors and `None` for the ghost.
    pub fn step_law(&self, graph: &KilledWeightedGraph, x: VertexId) -> Vec<(Option<VertexId>, f64)> {
        let a = graph.total_weight(x);
        let hx = self.h[x.0];
        let mut law: Vec<(Option<VertexId>, f64)> = graph
            .neighbors(x)
            .iter()
            .filter(|&&(z, _)| !self.set.contains(VertexId(z)))
            .map(|&(z, w)| (Some(VertexId(z)), w * self.h[z] / (a * hx)))
            .collect();
        if !self.set.contains(x) && graph.self_loop_weight(x) > 0.0 {
            law.push((Some(x), graph.self_loop_weight(x) / a));
        }
        law.push((None, graph.kill_weight(x) / (a * hx)));
        law
    }

    pub fn sample(&self, x: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
        if !(self.h[x.0] > 0.0) {
            return Err(Error::ZeroProbability(format!("vertex {x} cannot avoid the set")));
        }
        self.table.walk(x.0, self.budget, rng)
    }
}

pub fn sample_forward(graph: &KilledWeightedGraph, x: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
    graph.check_vertex(x)?;
    ForwardKernel::new(graph).sample(x, rng)
}

pub fn sample_no_return(graph: &KilledWeightedGraph, set: &VertexSet, x: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
    if !set.contains(x) {
        return Err(Error::InvalidParameter(format!("vertex {x} is not in K")));
    }
    NoReturnKernel::new(&Potential::new(graph), set)?.sample(x, rng)
}

fn poisson_count(lambda: f64, rng: &mut RngStream) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let law = Poisson::new(lambda).map_err(|e| Error::InvalidParameter(format!("Poisson({lambda}): {e}")))?;
    Ok(law.sample(rng) as u64)
}

/// Everything needed to draw repeatedly from the process seen from `K`.
pub struct WindowSampler<'g> {
    graph: &'g KilledWeightedGraph,
    set: VertexSet,
    equilibrium: EquilibriumProfile,
    harmonic: WeightedSampler<VertexId>,
    no_return: NoReturnKernel,
    forward: ForwardKernel,
}

impl<'g> WindowSampler<'g> {
    pub fn new(graph: &'g KilledWeightedGraph, set: &VertexSet) -> Result<Self> {
        Self::with_potential(&Potential::new(graph), set)
    }

    pub fn with_potential(potential: &Potential<'g>, set: &VertexSet) -> Result<Self> {
        let graph = potential.graph();
        let equilibrium = potential.equilibrium(set)?;
        if !(equilibrium.capacity > 0.0) {
            return Err(Error::ZeroProbability("window has zero capacity".into()));
        }
        let harmonic = equilibrium.harmonic.sampler()?;
        let no_return = NoReturnKernel::new(potential, set)?;
        Ok(WindowSampler {
            graph,
            set: set.clone(),
            equilibrium,
            harmonic,
            no_return,
            forward: ForwardKernel::new(graph),
        })
    }

    pub fn graph(&self) -> &'g KilledWeightedGraph {
        self.graph
    }

    pub fn window(&self) -> &VertexSet {
        &self.set
    }

    pub fn capacity(&self) -> f64 {
        self.equilibrium.capacity
    }

    pub fn equilibrium(&self) -> &EquilibriumProfile {
        &self.equilibrium
    }

    pub fn no_return(&self) -> &NoReturnKernel {
        &self.no_return
    }

    pub fn forward(&self) -> &ForwardKernel {
        &self.forward
    }

    fn trajectory(&self, rng: &mut RngStream, mark: Option<f64>) -> Result<LabeledTrajectory> {
        let entry = *self.harmonic.sample(rng);
        let backward = self.no_return.sample(entry, rng)?;
        let forward = self.forward.sample(entry, rng)?;
        Ok(LabeledTrajectory { backward, entry, forward, mark })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<WindowSample> {
        let count = poisson_count(self.capacity(), rng)?;
        let trajectories = (0..count).map(|_| self.trajectory(rng, None)).collect::<Result<_>>()?;
        Ok(WindowSample::new(self.set.clone(), trajectories))
    }

    /// One marked process at level `u_max` with marks uniform on `(0, u_max]`.
    pub fn sample_marked(&self, u_max: f64, rng: &mut RngStream) -> Result<WindowSample> {
        if !(u_max >= 0.0 && u_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("level must be finite and nonnegative, got {u_max}")));
        }
        let count = poisson_count(u_max * self.capacity(), rng)?;
        let trajectories = (0..count)
            .map(|_| {
                let mark = (1.0 - rng.uniform()) * u_max;
                self.trajectory(rng, Some(mark))
            })
            .collect::<Result<_>>()?;
        Ok(WindowSample::new(self.set.clone(), trajectories))
    }

    /// Samples at every level from a single marked process, so that the
    /// sample at `u` is contained in the sample at `v ≥ u`.
    pub fn sample_levels(&self, levels: &[f64], rng: &mut RngStream) -> Result<Vec<(f64, WindowSample)>> {
        if levels.iter().any(|u| !(*u >= 0.0)) || levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(format!(
                "levels must be nonnegative and sorted, got {levels:?}"
            )));
        }
        let u_max = levels.last().copied().unwrap_or(0.0);
        let top = self.sample_marked(u_max, rng)?;
        Ok(levels.iter().map(|&u| (u, top.at_level(u))).collect())
    }
}

pub fn sample_window(graph: &KilledWeightedGraph, set: &VertexSet, rng: &mut RngStream) -> Result<WindowSample> {
    WindowSampler::new(graph, set)?.sample(rng)
}

pub fn sample_levels(
    graph: &KilledWeightedGraph,
    set: &VertexSet,
    levels: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<(f64, WindowSample)>> {
    WindowSampler::new(graph, set)?.sample_levels(levels, rng)
}

/// Poisson process of hinge couples with intensity `h_K`.
pub struct HingeSampler {
    capacity: f64,
    couples: WeightedSampler<(VertexId, VertexId)>,
}

impl HingeSampler {
    pub fn new(potential: &Potential<'_>, set: &VertexSet) -> Result<Self> {
        let h = potential.hinge(set)?;
        let law = h.normalized()?;
        Ok(HingeSampler { capacity: h.total_mass(), couples: law.sampler()? })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<(VertexId, VertexId)>> {
        let count = poisson_count(self.capacity, rng)?;
        Ok((0..count).map(|_| *self.couples.sample(rng)).collect())
    }
}

pub fn sample_hinge_process(
    graph: &KilledWeightedGraph,
    set: &VertexSet,
    rng: &mut RngStream,
) -> Result<Vec<(VertexId, VertexId)>> {
    HingeSampler::new(&Potential::new(graph), set)?.sample(rng)
}

/// Walk from `x` cut at its last visit to `K`, conditioned to end at `y`,
/// by rejection. Acceptance probability is [`bridge_acceptance`].
pub struct BridgeSampler<'g> {
    set: VertexSet,
    mask: Vec<bool>,
    forward: ForwardKernel,
    attempts: u64,
    graph: &'g KilledWeightedGraph,
}

impl<'g> BridgeSampler<'g> {
    pub fn new(graph: &'g KilledWeightedGraph, set: &VertexSet) -> Result<Self> {
        graph.check_set(set)?;
        Ok(BridgeSampler {
            set: set.clone(),
            mask: set.mask(graph.vertex_count()),
            forward: ForwardKernel::new(graph),
            attempts: DEFAULT_ATTEMPT_BUDGET,
            graph,
        })
    }

    pub fn with_attempt_budget(mut self, attempts: u64) -> Self {
        self.attempts = attempts;
        self
    }

    /// The unconditioned proposal: a forward walk cut at its last `K`-visit,
    /// or `None` if it never visits `K`.
    pub fn propose(&self, x: VertexId, rng: &mut RngStream) -> Result<Option<FinitePath>> {
        let mut path = self.forward.sample(x, rng)?;
        match path.vertices.iter().rposition(|v| self.mask[v.0]) {
            Some(i) => {
                path.vertices.truncate(i + 1);
                path.terminal = Terminal::LastVisit;
                Ok(Some(path))
            }
            None => Ok(None),
        }
    }

    pub fn sample(&self, x: VertexId, y: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
        self.graph.check_vertex(x)?;
        if !self.set.contains(y) {
            return Err(Error::InvalidParameter(format!("endpoint {y} is not in K")));
        }
        for _ in 0..self.attempts {
            if let Some(path) = self.propose(x, rng)? {
                if path.end() == y {
                    return Ok(path);
                }
            }
        }
        Err(Error::AttemptBudget(self.attempts))
    }
}

/// `P_x[X_{λ_K} = y]`, the acceptance rate of the bridge sampler.
pub fn bridge_acceptance(graph: &KilledWeightedGraph, set: &VertexSet, x: VertexId, y: VertexId) -> Result<f64> {
    Ok(Potential::new(graph).last_exit_distribution(set, x)?.mass(&y))
}

pub fn sample_bridge(
    graph: &KilledWeightedGraph,
    set: &VertexSet,
    x: VertexId,
    y: VertexId,
    rng: &mut RngStream,
) -> Result<FinitePath> {
    if !(bridge_acceptance(graph, set, x, y)? > 0.0) {
        return Err(Error::ZeroProbability(format!("no path from {x} last visits K at {y}")));
    }
    BridgeSampler::new(graph, set)?.sample(x, y, rng)
}

/// Extends samples from `K` to `L ⊇ K`.
///
/// Stored trajectories are complete, so those hitting `K` are re-split at
/// their first visit to `L`. Trajectories meeting `L` but not `K` are added
/// as an independent Poisson process: `Poisson(cap L − cap K)` many, entry
/// law `∝ e_L(x) P_x[τ_K = ∞]`, backward leg conditioned never to return to
/// `L`, forward leg drawn by rejection until it avoids `K`.
pub struct WindowExtender<'g> {
    inner: VertexSet,
    outer: VertexSet,
    inner_mask: Vec<bool>,
    added_rate: f64,
    entry: Option<WeightedSampler<VertexId>>,
    no_return: NoReturnKernel,
    forward: ForwardKernel,
    attempts: u64,
    _graph: &'g KilledWeightedGraph,
}

impl<'g> WindowExtender<'g> {
    pub fn new(potential: &Potential<'g>, inner: &VertexSet, outer: &VertexSet) -> Result<Self> {
        let graph = potential.graph();
        graph.check_set(inner)?;
        if !inner.is_subset(outer) {
            return Err(Error::NotNested("K", "L"));
        }
        let eq_l = potential.equilibrium(outer)?;
        let avoid_k = potential.avoidance_probability(inner)?;
        let weights = DiscreteDistribution::measure(
            eq_l.boundary.iter().filter(|&x| !inner.contains(x)).map(|x| (x, eq_l.measure[x.0] * avoid_k[x.0])),
        )?;
        let added_rate = weights.total();
        let entry = if added_rate > 0.0 { Some(weights.sampler()?) } else { None };
        Ok(WindowExtender {
            inner: inner.clone(),
            outer: outer.clone(),
            inner_mask: inner.mask(graph.vertex_count()),
            added_rate,
            entry,
            no_return: NoReturnKernel::new(potential, outer)?,
            forward: ForwardKernel::new(graph),
            attempts: DEFAULT_ATTEMPT_BUDGET,
            _graph: graph,
        })
    }

    /// `cap(L) − cap(K)`, the rate of added trajectories.
    pub fn added_rate(&self) -> f64 {
        self.added_rate
    }

    fn avoiding_walk(&self, x: VertexId, rng: &mut RngStream) -> Result<FinitePath> {
        for _ in 0..self.attempts {
            let path = self.forward.sample(x, rng)?;
            if !path.vertices.iter().any(|v| self.inner_mask[v.0]) {
                return Ok(path);
            }
        }
        Err(Error::AttemptBudget(self.attempts))
    }

    pub fn extend(&self, sample: &WindowSample, rng: &mut RngStream) -> Result<WindowSample> {
        if sample.window != self.inner {
            return Err(Error::InvalidParameter("sample window differs from K".into()));
        }
        let mut trajectories: Vec<LabeledTrajectory> = sample
            .trajectories
            .iter()
            .map(|w| w.reanchored(&self.outer).expect("trajectories meeting K meet L"))
            .collect();
        if let Some(entry) = &self.entry {
            let count = poisson_count(self.added_rate, rng)?;
            for _ in 0..count {
                let x = *entry.sample(rng);
                let backward = self.no_return.sample(x, rng)?;
                let forward = self.avoiding_walk(x, rng)?;
                trajectories.push(LabeledTrajectory { backward, entry: x, forward, mark: None });
            }
        }
        Ok(WindowSample::new(self.outer.clone(), trajectories))
    }
}

pub fn extend_window(
    graph: &KilledWeightedGraph,
    inner: &VertexSet,
    outer: &VertexSet,
    sample: &WindowSample,
    rng: &mut RngStream,
) -> Result<WindowSample> {
    WindowExtender::new(&Potential::new(graph), inner, outer)?.extend(sample, rng)
}
