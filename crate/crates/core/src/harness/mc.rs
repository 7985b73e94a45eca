//! Monte Carlo checks of the sampler against exact references.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{Direction, KilledWeightedGraph, VertexId, VertexSet};
use crate::potential::Potential;
use crate::sampler::{BridgeSampler, OccupationFields, WindowExtender, WindowSampler};
use crate::stats::{chi_square, covariance, poisson_dispersion, Moments};

use super::config::{locate_site, parse_site};
use super::replicate;
use super::report::{Rule, StatReport};

/// Sample size, seed and acceptance thresholds shared by all checks.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    pub sigma: f64,
    pub min_p_value: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { samples: 100_000, seed: 1, sigma: 4.0, min_p_value: 1e-3 }
    }
}

fn finish(report: StatReport, mc: &McSettings, start: Instant) -> StatReport {
    report.with_run(mc.samples, mc.seed).timed(start.elapsed())
}

/// Nondecreasing functionals of the occupation fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Functional {
    /// `1{S ⊆ 𝓘}`.
    Occupied(VertexSet),
    /// `min_{x∈S}` visit count.
    MinVisits(VertexSet),
    /// `1{at least k trajectories visit v}`.
    TrajectoriesAtLeast(u32, VertexId),
    Constant,
}

impl std::fmt::Display for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |s: &VertexSet| s.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(";");
        match self {
            Functional::Occupied(s) => write!(f, "occupied@{}", list(s)),
            Functional::MinVisits(s) => write!(f, "min_visits@{}", list(s)),
            Functional::TrajectoriesAtLeast(k, v) => write!(f, "trajectories>={k}@{}", v.0),
            Functional::Constant => write!(f, "constant"),
        }
    }
}

impl Functional {
    /// Parses `occupied@S`, `min_visits@S`, `trajectories>=k@v` or
    /// `constant`, with `S` a `;`-separated list of sites.
    pub fn parse(spec: &str, graph: &KilledWeightedGraph) -> Result<Self> {
        let spec = spec.trim();
        if spec == "constant" {
            return Ok(Functional::Constant);
        }
        let (head, sites) = spec
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("functional `{spec}` is not in the monotone catalog")))?;
        let set = || -> Result<VertexSet> {
            sites.split(';').map(|s| locate_site(graph, &parse_site(s)?)).collect()
        };
        match head {
            "occupied" => Ok(Functional::Occupied(set()?)),
            "min_visits" => Ok(Functional::MinVisits(set()?)),
            _ => match head.strip_prefix("trajectories>=") {
                Some(k) => {
                    let k = u32::from_str(k).map_err(|_| Error::Config(format!("bad threshold in `{spec}`")))?;
                    Ok(Functional::TrajectoriesAtLeast(k, locate_site(graph, &parse_site(sites)?)?))
                }
                None => Err(Error::Config(format!("functional `{spec}` is not in the monotone catalog"))),
            },
        }
    }

    fn vertices(&self) -> Vec<VertexId> {
        match self {
            Functional::Occupied(s) | Functional::MinVisits(s) => s.iter().collect(),
            Functional::TrajectoriesAtLeast(_, v) => vec![*v],
            Functional::Constant => Vec::new(),
        }
    }

    pub fn evaluate(&self, fields: &OccupationFields) -> f64 {
        match self {
            Functional::Occupied(s) => s.iter().all(|x| fields.occupied(x)) as u8 as f64,
            Functional::MinVisits(s) => s.iter().map(|x| fields.visits(x)).min().unwrap_or(0) as f64,
            Functional::TrajectoriesAtLeast(k, v) => (fields.trajectories(*v) >= *k) as u8 as f64,
            Functional::Constant => 1.0,
        }
    }
}

/// Empirical `P[𝓘^u ∩ K = ∅]` against `exp(−u cap K)`.
pub fn vacancy_test(graph: &KilledWeightedGraph, window: &VertexSet, level: f64, mc: &McSettings) -> Result<StatReport> {
    let start = Instant::now();
    let sampler = WindowSampler::new(graph, window)?;
    let vacant = replicate(mc.samples, mc.seed, |rng| {
        let s = if level == 1.0 { sampler.sample(rng)? } else { sampler.sample_marked(level, rng)? };
        Ok(s.is_vacant())
    })?;
    let hits = vacant.iter().filter(|&&v| v).count() as f64;
    let n = mc.samples as f64;
    let p = (-level * sampler.capacity()).exp();
    let report = StatReport::z_test(
        format!("vacancy u={level} |K|={}", window.len()),
        hits / n,
        (p * (1.0 - p) / n).sqrt(),
        p,
        "exp(-u cap K), cap K from an exact linear solve",
        Rule::TwoSided { sigma: mc.sigma },
    )
    .with_note(format!("cap K = {}", crate::fmt17(sampler.capacity())));
    Ok(finish(report, mc, start))
}

/// Covariance of two catalog functionals, one-sided. When both are the
/// indicator of the same single vertex a second, two-sided report compares
/// with the exact Bernoulli variance.
pub fn fkg_test(
    graph: &KilledWeightedGraph,
    window: &VertexSet,
    f: &Functional,
    g: &Functional,
    mc: &McSettings,
) -> Result<Vec<StatReport>> {
    fkg_test_many(graph, window, &[f.clone(), g.clone()], &[(0, 1)], mc)
}

/// [`fkg_test`] for several pairs `(i, j)` of `functionals`, all evaluated
/// on the same draws.
pub fn fkg_test_many(
    graph: &KilledWeightedGraph,
    window: &VertexSet,
    functionals: &[Functional],
    pairs: &[(usize, usize)],
    mc: &McSettings,
) -> Result<Vec<StatReport>> {
    let start = Instant::now();
    for v in functionals.iter().flat_map(|f| f.vertices()) {
        if !window.contains(v) {
            return Err(Error::Config(format!("functional vertex {v} lies outside the window")));
        }
    }
    let potential = Potential::new(graph);
    let sampler = WindowSampler::with_potential(&potential, window)?;
    let rows = replicate(mc.samples, mc.seed, |rng| {
        let s = sampler.sample(rng)?;
        Ok(functionals.iter().map(|f| f.evaluate(&s.fields)).collect::<Vec<f64>>())
    })?;
    let column = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    let mut out = Vec::new();
    for &(i, j) in pairs {
        let (f, g) = (&functionals[i], &functionals[j]);
        let (cov, se) = covariance(&column(i), &column(j));
        let name = format!("fkg {f} x {g}");
        out.push(finish(
            StatReport::z_test(name.clone(), cov, se, 0.0, "covariance is nonnegative", Rule::OneSided { sigma: mc.sigma }),
            mc,
            start,
        ));
        if let (Functional::Occupied(a), Functional::Occupied(b)) = (f, g) {
            if a == b && a.len() == 1 {
                let v = a.iter().next().expect("one vertex");
                let cap = potential.equilibrium(&VertexSet::singleton(v))?.capacity;
                let p = 1.0 - (-cap).exp();
                out.push(finish(
                    StatReport::z_test(
                        format!("{name} exact"),
                        cov,
                        se,
                        p * (1.0 - p),
                        "p(1-p) with p = 1 - exp(-cap {v}), exact capacity",
                        Rule::TwoSided { sigma: mc.sigma },
                    ),
                    mc,
                    start,
                ));
            }
        }
    }
    Ok(out)
}

fn counts_against<T: Ord + Clone>(
    name: &str,
    observed: &BTreeMap<T, u64>,
    law: &[(T, f64)],
    mc: &McSettings,
    start: Instant,
) -> Result<StatReport> {
    let mut counts: Vec<u64> = law.iter().map(|(k, _)| observed.get(k).copied().unwrap_or(0)).collect();
    let mut probs: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
    let stray: u64 = observed.iter().filter(|(k, _)| !law.iter().any(|(j, _)| j == *k)).map(|(_, c)| c).sum();
    counts.push(stray);
    probs.push(0.0);
    let r = chi_square(&counts, &probs)?;
    let report = StatReport::p_value_test(name, r.statistic, r.p_value, mc.min_p_value)
        .with_note(format!("dof = {}", r.dof))
        .with_note(format!("merged cells = {}", r.merged_cells));
    Ok(finish(report, mc, start))
}

fn count_reports(name: &str, counts: &[u64], cap: f64, mc: &McSettings, start: Instant) -> Vec<StatReport> {
    let m = Moments::from_values(counts.iter().map(|&c| c as f64));
    let n = counts.len() as f64;
    let d = poisson_dispersion(counts);
    vec![
        finish(
            StatReport::z_test(
                format!("{name} mean count"),
                m.mean(),
                (cap / n).sqrt(),
                cap,
                "capacity, exact linear solve",
                Rule::TwoSided { sigma: mc.sigma },
            ),
            mc,
            start,
        ),
        finish(
            StatReport::z_test(
                format!("{name} dispersion"),
                d.z,
                1.0,
                0.0,
                "Poisson dispersion index, chi-square normal approximation",
                Rule::TwoSided { sigma: mc.sigma },
            )
            .with_note(format!("variance/mean = {}", crate::fmt17(d.ratio))),
            mc,
            start,
        ),
    ]
}

fn harmonic_law(potential: &Potential<'_>, set: &VertexSet) -> Result<Vec<(VertexId, f64)>> {
    let eq = potential.equilibrium(set)?;
    Ok(eq.harmonic.iter().map(|(v, p)| (*v, p)).collect())
}

/// `L`-samples restricted to `K ⊆ L`: entry law against `harm_K`, hit
/// counts against `Poisson(cap K)`.
pub fn consistency_test(
    graph: &KilledWeightedGraph,
    inner: &VertexSet,
    outer: &VertexSet,
    mc: &McSettings,
) -> Result<Vec<StatReport>> {
    let start = Instant::now();
    if !inner.is_subset(outer) {
        return Err(Error::NotNested("K", "L"));
    }
    let potential = Potential::new(graph);
    let sampler = WindowSampler::with_potential(&potential, outer)?;
    let draws = replicate(mc.samples, mc.seed, |rng| {
        let s = sampler.sample(rng)?.restricted(inner)?;
        Ok(s.trajectories.iter().map(|w| w.entry).collect::<Vec<_>>())
    })?;
    let mut entries = BTreeMap::new();
    for e in draws.iter().flatten() {
        *entries.entry(*e).or_insert(0u64) += 1;
    }
    let counts: Vec<u64> = draws.iter().map(|d| d.len() as u64).collect();
    let law = harmonic_law(&potential, inner)?;
    let cap = potential.equilibrium(inner)?.capacity;
    let mut out = vec![counts_against("consistency entry law", &entries, &law, mc, start)?];
    out.extend(count_reports("consistency", &counts, cap, mc, start));
    Ok(out)
}

/// `K`-samples extended to `L ⊇ K`: entry law against `harm_L`, hit counts
/// against `Poisson(cap L)`.
pub fn extension_test(
    graph: &KilledWeightedGraph,
    inner: &VertexSet,
    outer: &VertexSet,
    mc: &McSettings,
) -> Result<Vec<StatReport>> {
    let start = Instant::now();
    let potential = Potential::new(graph);
    let sampler = WindowSampler::with_potential(&potential, inner)?;
    let extender = WindowExtender::new(&potential, inner, outer)?;
    let draws = replicate(mc.samples, mc.seed, |rng| {
        let s = extender.extend(&sampler.sample(rng)?, rng)?;
        Ok(s.trajectories.iter().map(|w| w.entry).collect::<Vec<_>>())
    })?;
    let mut entries = BTreeMap::new();
    for e in draws.iter().flatten() {
        *entries.entry(*e).or_insert(0u64) += 1;
    }
    let counts: Vec<u64> = draws.iter().map(|d| d.len() as u64).collect();
    let law = harmonic_law(&potential, outer)?;
    let cap = potential.equilibrium(outer)?.capacity;
    let mut out = vec![counts_against("extension entry law", &entries, &law, mc, start)?];
    out.extend(count_reports("extension", &counts, cap, mc, start));
    Ok(out)
}

/// First and last `K`-visits of sampled trajectories against `h_K / cap K`.
pub fn hinge_law_test(graph: &KilledWeightedGraph, window: &VertexSet, mc: &McSettings) -> Result<StatReport> {
    let start = Instant::now();
    let potential = Potential::new(graph);
    let sampler = WindowSampler::with_potential(&potential, window)?;
    let draws = replicate(mc.samples, mc.seed, |rng| {
        let s = sampler.sample(rng)?;
        Ok(s.trajectories.iter().filter_map(|w| w.hinge_couple(window)).collect::<Vec<_>>())
    })?;
    let mut couples = BTreeMap::new();
    for c in draws.iter().flatten() {
        *couples.entry(*c).or_insert(0u64) += 1;
    }
    let law: Vec<_> = potential.hinge(window)?.normalized()?.iter().map(|(c, p)| (*c, p)).collect();
    counts_against("hinge couple law", &couples, &law, mc, start)
}

/// Walks from `x` cut at their last `K`-visit: endpoint law against the
/// normalized last-exit distribution and the acceptance rate against
/// `P_x[τ_K < ∞]`.
pub fn bridge_test(graph: &KilledWeightedGraph, window: &VertexSet, x: VertexId, mc: &McSettings) -> Result<Vec<StatReport>> {
    let start = Instant::now();
    let potential = Potential::new(graph);
    let last_exit = potential.last_exit_distribution(window, x)?;
    let bridge = BridgeSampler::new(graph, window)?;
    let ends = replicate(mc.samples, mc.seed, |rng| Ok(bridge.propose(x, rng)?.map(|p| p.end())))?;
    let mut observed = BTreeMap::new();
    for e in ends.iter().flatten() {
        *observed.entry(*e).or_insert(0u64) += 1;
    }
    let accepted: u64 = observed.values().sum();
    let law: Vec<_> = last_exit.normalized()?.iter().map(|(v, p)| (*v, p)).collect();
    let mut out = vec![counts_against("bridge endpoint law", &observed, &law, mc, start)?];
    let p = last_exit.total().clamp(0.0, 1.0);
    let n = mc.samples as f64;
    out.push(finish(
        StatReport::z_test(
            "bridge acceptance rate",
            accepted as f64 / n,
            (p * (1.0 - p) / n).sqrt(),
            p,
            "P_x[hit K], exact linear solve",
            Rule::TwoSided { sigma: mc.sigma },
        ),
        mc,
        start,
    ));
    Ok(out)
}

/// Nested levels from one marked process: inclusion on every draw (exact)
/// and vacancy per level against `exp(−u cap K)`.
pub fn level_test(graph: &KilledWeightedGraph, window: &VertexSet, levels: &[f64], mc: &McSettings) -> Result<Vec<StatReport>> {
    let start = Instant::now();
    let sampler = WindowSampler::new(graph, window)?;
    let draws = replicate(mc.samples, mc.seed, |rng| {
        let samples = sampler.sample_levels(levels, rng)?;
        let nested = samples.windows(2).all(|w| {
            let (lo, hi) = (&w[0].1, &w[1].1);
            lo.fields.indicator.iter().zip(&hi.fields.indicator).all(|(a, b)| !a || *b)
                && lo.trajectories.iter().all(|t| hi.trajectories.contains(t))
        });
        Ok((nested, samples.iter().map(|(_, s)| s.is_vacant()).collect::<Vec<_>>()))
    })?;
    let violations = draws.iter().filter(|(ok, _)| !ok).count();
    let mut out = vec![finish(
        StatReport::exact("level nesting violations", violations as f64, 0.0, "inclusion holds on every draw", 0.5),
        mc,
        start,
    )];
    let n = mc.samples as f64;
    for (i, &u) in levels.iter().enumerate() {
        let vacant = draws.iter().filter(|(_, v)| v[i]).count() as f64;
        let p = (-u * sampler.capacity()).exp();
        out.push(finish(
            StatReport::z_test(
                format!("vacancy at level u={u}"),
                vacant / n,
                (p * (1.0 - p) / n).sqrt(),
                p,
                "exp(-u cap K), exact capacity",
                Rule::TwoSided { sigma: mc.sigma },
            ),
            mc,
            start,
        ));
    }
    Ok(out)
}

/// Mean number of trajectories through `K` coming from the `from` end and
/// escaping through the `to` end, against the restricted capacity.
pub fn direction_flow_test(
    graph: &KilledWeightedGraph,
    window: &VertexSet,
    from: Direction,
    to: Direction,
    reference: f64,
    reference_source: &str,
    mc: &McSettings,
) -> Result<StatReport> {
    let start = Instant::now();
    let ends = graph
        .direction_ends()
        .ok_or_else(|| Error::UnsupportedFamily("direction classification needs labeled ends".into()))?;
    let (a, b) = (from.end(&ends), to.end(&ends));
    let sampler = WindowSampler::new(graph, window)?;
    let counts = replicate(mc.samples, mc.seed, |rng| {
        let s = sampler.sample(rng)?;
        Ok(s.trajectories.iter().filter(|w| w.backward.end() == a && w.forward.end() == b).count() as f64)
    })?;
    let m = Moments::from_values(counts);
    Ok(finish(
        StatReport::z_test(
            format!("trajectories {from} -> {to}"),
            m.mean(),
            m.std_error(),
            reference,
            reference_source,
            Rule::TwoSided { sigma: mc.sigma },
        ),
        mc,
        start,
    ))
}
