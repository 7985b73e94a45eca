//! 0-1 law criteria evaluated along exhaustions.
//!
//! For a site `x` and a window `L ∋ x` the strong criterion is
//!
//! ```text
//! S_L = Σ_{x',y' ∈ ∂L} h_L(x',y') (P_{x'}[τ_x < ∞ | X_{λ_L} = y'] − ε)_+
//! ```
//!
//! and the weak criterion is `W_L = Σ_{x' ∈ ∂L} e_L(x') (P_{x'}[τ_x < ∞] − ε)_+`.
//! Both are computed exactly from linear solves; whether they vanish as `L`
//! grows is judged by a trend verdict with explicit thresholds.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt17;
use crate::graph::{Direction, ExhaustionFamily, ExhaustionLevel, KilledWeightedGraph, VertexId, VertexSet};
use crate::linalg::{ReducedSystem, SolverConfig};
use crate::potential::Potential;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    VanishingTrend,
    BoundedBelow,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::VanishingTrend => "vanishing-trend",
            Verdict::BoundedBelow => "bounded-below",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VerdictThresholds {
    /// Last value must fall below this for a vanishing trend.
    pub vanish: f64,
    /// Trailing values must all exceed this to count as bounded below.
    pub floor: f64,
    /// Largest relative spread `(max − min) / max` of a bounded-below tail.
    pub relative_spread: f64,
    /// Number of trailing levels examined.
    pub window: usize,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds { vanish: 1e-2, floor: 1e-1, relative_spread: 0.1, window: 3 }
    }
}

impl VerdictThresholds {
    pub fn classify(&self, values: &[f64]) -> Verdict {
        let Some(&last) = values.last() else {
            return Verdict::Inconclusive;
        };
        let tail = &values[values.len().saturating_sub(self.window)..];
        let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        if last < self.vanish && nonincreasing {
            return Verdict::VanishingTrend;
        }
        let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if tail.len() == self.window && lo > self.floor && (hi - lo) / hi < self.relative_spread {
            return Verdict::BoundedBelow;
        }
        Verdict::Inconclusive
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CriterionKind {
    Strong,
    Weak,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionKind::Strong => "strong",
            CriterionKind::Weak => "weak",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub level: usize,
    pub window_size: usize,
    pub eps: f64,
    pub value: f64,
    /// `cap(L_n)`.
    pub cap: f64,
    /// `|Σ_{x'} e_L(x') P_{x'}[τ_x < ∞] − cap({x})|`.
    pub aux_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionTrace {
    pub kind: CriterionKind,
    pub family: String,
    pub site: Vec<i64>,
    pub eps: f64,
    pub records: Vec<LevelRecord>,
    pub thresholds: VerdictThresholds,
    pub verdict: Verdict,
}

impl CriterionTrace {
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,eps,value,cap,aux_residual\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.level, fmt17(r.eps), fmt17(r.value), fmt17(r.cap), fmt17(r.aux_residual));
        }
        out
    }

    /// Flat `key = value` summary.
    pub fn to_report(&self) -> String {
        let t = &self.thresholds;
        let levels: Vec<String> = self.records.iter().map(|r| r.level.to_string()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "criterion = {}", self.kind);
        let _ = writeln!(out, "family = {}", self.family);
        let _ = writeln!(out, "site = {:?}", self.site);
        let _ = writeln!(out, "eps = {}", fmt17(self.eps));
        let _ = writeln!(out, "levels = {}", levels.join(","));
        let _ = writeln!(out, "last_value = {}", fmt17(self.records.last().map_or(0.0, |r| r.value)));
        let _ = writeln!(out, "vanish_threshold = {}", fmt17(t.vanish));
        let _ = writeln!(out, "floor_threshold = {}", fmt17(t.floor));
        let _ = writeln!(out, "relative_spread = {}", fmt17(t.relative_spread));
        let _ = writeln!(out, "trend_window = {}", t.window);
        let _ = writeln!(out, "verdict = {}", self.verdict);
        out
    }
}

/// Quantities shared by both criteria at one level.
struct LevelData {
    cap: f64,
    cap_site: f64,
    boundary: Vec<VertexId>,
    /// `e_L(x')` on the boundary.
    e: Vec<f64>,
    /// `P_{x'}[τ_x < ∞]` on the boundary.
    hit: Vec<f64>,
}

fn level_data(p: &Potential<'_>, window: &VertexSet, x: VertexId) -> Result<(LevelData, crate::potential::EquilibriumProfile)> {
    let eq = p.equilibrium(window)?;
    let cap_site = p.equilibrium(&VertexSet::singleton(x))?.capacity;
    let hit_all = p.hitting_probability_of(x)?;
    let boundary: Vec<VertexId> = eq.boundary.iter().collect();
    let e = boundary.iter().map(|b| eq.measure[b.0]).collect();
    let hit = boundary.iter().map(|b| hit_all[b.0]).collect();
    Ok((
        LevelData { cap: eq.capacity, cap_site, boundary, e, hit },
        eq,
    ))
}

impl LevelData {
    fn cap_identity_residual(&self) -> f64 {
        let s: f64 = self.e.iter().zip(&self.hit).map(|(e, h)| e * h).sum();
        (s - self.cap_site).abs()
    }
}

fn site_in(level: &ExhaustionLevel, site: &[i64]) -> Result<VertexId> {
    level.locate(site)
}

fn family_name(ex: &ExhaustionFamily) -> String {
    ex.model.to_string()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Strong criterion value at one window.
pub fn strong_value(p: &Potential<'_>, window: &VertexSet, x: VertexId, eps: f64) -> Result<(f64, f64, f64)> {
    let (d, eq) = level_data(p, window, x)?;
    let le_x = p.last_exit_rows(&eq, &[x])?.remove(0);
    let h = p.hinge_from(&eq)?;
    let m = d.boundary.len();
    let mut value = 0.0;
    for i in 0..m {
        for j in 0..m {
            let hij = h.get(d.boundary[i], d.boundary[j]);
            // h(x',y') P_{x'}[τ_x<∞ | X_λ = y'] = e(x') P_{x'}[τ_x<∞] P_x[X_λ = y']
            if hij > 0.0 {
                let conditional = (d.e[i] * d.hit[i] * le_x[j] / hij).min(1.0);
                value += hij * (conditional - eps).max(0.0);
            }
        }
    }
    Ok((value, d.cap, d.cap_identity_residual()))
}

/// Weak criterion value at one window.
pub fn weak_value(p: &Potential<'_>, window: &VertexSet, x: VertexId, eps: f64) -> Result<(f64, f64, f64)> {
    let (d, _) = level_data(p, window, x)?;
    let value = d.e.iter().zip(&d.hit).map(|(e, h)| e * (h - eps).max(0.0)).sum();
    Ok((value, d.cap, d.cap_identity_residual()))
}

fn trace(
    kind: CriterionKind,
    ex: &ExhaustionFamily,
    site: &[i64],
    eps: f64,
    thresholds: VerdictThresholds,
) -> Result<CriterionTrace> {
    check_eps(eps)?;
    let records = ex
        .levels
        .par_iter()
        .map(|level| -> Result<LevelRecord> {
            let x = site_in(level, site)?;
            let p = Potential::new(&level.graph);
            let (value, cap, aux_residual) = match kind {
                CriterionKind::Strong => strong_value(&p, &level.window, x, eps)?,
                CriterionKind::Weak => weak_value(&p, &level.window, x, eps)?,
            };
            Ok(LevelRecord { level: level.parameter, window_size: level.window.len(), eps, value, cap, aux_residual })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = records.iter().map(|r| r.value).collect();
    Ok(CriterionTrace {
        kind,
        family: family_name(ex),
        site: site.to_vec(),
        eps,
        verdict: thresholds.classify(&values),
        records,
        thresholds,
    })
}

pub fn strong_criterion(ex: &ExhaustionFamily, site: &[i64], eps: f64, thresholds: VerdictThresholds) -> Result<CriterionTrace> {
    trace(CriterionKind::Strong, ex, site, eps, thresholds)
}

pub fn weak_criterion(ex: &ExhaustionFamily, site: &[i64], eps: f64, thresholds: VerdictThresholds) -> Result<CriterionTrace> {
    trace(CriterionKind::Weak, ex, site, eps, thresholds)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CapIdentityRecord {
    pub level: usize,
    pub sum: f64,
    pub cap_site: f64,
    pub residual: f64,
}

/// `Σ_{x'} e_L(x') P_{x'}[τ_x < ∞]` against `cap({x})` at every level.
pub fn cap_identity(ex: &ExhaustionFamily, site: &[i64]) -> Result<Vec<CapIdentityRecord>> {
    ex.levels
        .par_iter()
        .map(|level| {
            let x = site_in(level, site)?;
            let p = Potential::new(&level.graph);
            let (d, _) = level_data(&p, &level.window, x)?;
            let sum = d.e.iter().zip(&d.hit).map(|(e, h)| e * h).sum();
            Ok(CapIdentityRecord { level: level.parameter, sum, cap_site: d.cap_site, residual: d.cap_identity_residual() })
        })
        .collect()
}

/// Same identity on a single graph and window.
pub fn cap_identity_residual(graph: &KilledWeightedGraph, window: &VertexSet, x: VertexId) -> Result<f64> {
    if !window.contains(x) {
        return Err(Error::InvalidParameter(format!("vertex {x} is not in L")));
    }
    let p = Potential::new(graph);
    Ok(level_data(&p, window, x)?.0.cap_identity_residual())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AtomVerdict {
    FiniteLimit,
    Diverging,
    Inconclusive,
}

impl fmt::Display for AtomVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomVerdict::FiniteLimit => "finite-limit",
            AtomVerdict::Diverging => "diverging",
            AtomVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AtomThresholds {
    /// Trailing increments below this indicate a finite limit.
    pub increment: f64,
    /// Ratio last/first above which the sequence counts as diverging.
    pub growth: f64,
}

impl Default for AtomThresholds {
    fn default() -> Self {
        AtomThresholds { increment: 1e-6, growth: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomFlowTrace {
    pub from: Direction,
    pub to: Direction,
    /// `(level, cap_{A→B}(K_n))`.
    pub values: Vec<(usize, f64)>,
    pub thresholds: AtomThresholds,
    pub verdict: AtomVerdict,
}

impl AtomFlowTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,cap_restricted\n");
        for &(n, v) in &self.values {
            let _ = writeln!(out, "{n},{}", fmt17(v));
        }
        out
    }
}

/// `cap_{A→B}(K_n)` along an exhaustion of a graph with labeled ends.
pub fn atom_flow(ex: &ExhaustionFamily, from: Direction, to: Direction, thresholds: AtomThresholds) -> Result<AtomFlowTrace> {
    let values = ex
        .levels
        .par_iter()
        .map(|level| {
            let p = Potential::new(&level.graph);
            Ok((level.parameter, p.restricted_equilibrium(&level.window, from, to)?.capacity))
        })
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = values.iter().map(|&(_, c)| c).collect();
    let increments: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &increments[increments.len().saturating_sub(3)..];
    let verdict = if !tail.is_empty() && tail.iter().all(|d| d.abs() < thresholds.increment) {
        AtomVerdict::FiniteLimit
    } else if v.len() >= 2 && v[v.len() - 1] > thresholds.growth * v[0] && tail.iter().all(|&d| d > 0.0) {
        AtomVerdict::Diverging
    } else {
        AtomVerdict::Inconclusive
    };
    Ok(AtomFlowTrace { from, to, values, thresholds, verdict })
}

/// `p_L^x(x',y') = P_x[X_{λ_L} = x' | τ_x^+ = ∞] P_x[X_{λ_L} = y' | τ_x^+ = ∞]`
/// against `h_L(x',y') P_{x'}[τ_x < ∞ | X_{λ_L} = y'] / (a_x P_x[τ_x^+ = ∞])`;
/// returns the largest absolute difference over `∂L × ∂L`.
///
/// The left side is computed from the walk killed on returning to `x`, the
/// right side from the Green's function and hinge measure of `L`.
pub fn hinge_identity_check(graph: &KilledWeightedGraph, window: &VertexSet, x: VertexId) -> Result<f64> {
    if !window.contains(x) {
        return Err(Error::InvalidParameter(format!("vertex {x} is not in L")));
    }
    let p = Potential::new(graph);
    let eq = p.equilibrium(window)?;
    let site = VertexSet::singleton(x);
    let esc_x = p.escape_probability(&site)?[x.0];
    let cap_x = graph.total_weight(x) * esc_x;
    if !(cap_x > 0.0) {
        return Err(Error::ZeroProbability(format!("vertex {x} has zero capacity")));
    }

    // E_x[visits to z in [1, τ_x^+)] = (a_z / a_x) (M_{V∖x}^{-1} b)_z, b_w = a_{x,w}
    let n = graph.vertex_count();
    let mut mask = vec![true; n];
    mask[x.0] = false;
    let sys = ReducedSystem::new(graph, &mask, SolverConfig::default())?;
    let rhs: Vec<f64> = sys.indices().iter().map(|&w| graph.conductance(x, VertexId(w))).collect();
    let u = sys.solve_global(&rhs, n)?;
    let ax = graph.total_weight(x);
    let cond_last = |z: VertexId| -> f64 {
        let visits = if z == x { 1.0 } else { graph.total_weight(z) * u[z.0] / ax };
        visits * eq.escape[z.0] / esc_x
    };

    let boundary: Vec<VertexId> = eq.boundary.iter().collect();
    let lhs_marg: Vec<f64> = boundary.iter().map(|&z| cond_last(z)).collect();
    let h = p.hinge_from(&eq)?;
    let le = p.last_exit_rows(&eq, &boundary)?;
    let le_x = p.last_exit_rows(&eq, &[x])?.remove(0);
    let hit = p.hitting_probability_of(x)?;

    let mut worst = 0.0f64;
    for (i, &xp) in boundary.iter().enumerate() {
        for (j, &yp) in boundary.iter().enumerate() {
            let lhs = lhs_marg[i] * lhs_marg[j];
            let hij = h.get(xp, yp);
            let denom = le[i][j];
            let rhs = if denom > 0.0 {
                let conditional = hit[xp.0] * le_x[j] / denom;
                hij * conditional / cap_x
            } else if lhs.abs() > 1e-14 {
                return Err(Error::ZeroProbability(format!(
                    "P_{xp}[X_lambda_L = {yp}] vanishes while p_L^x({xp},{yp}) = {lhs}"
                )));
            } else {
                0.0
            };
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Floor on the strong criterion for biased ℤ with `L = {−n..n}` and `x = 0`.
///
/// Every path from `−n` whose last visit to `L` is `+n` crosses `0`, and
/// conversely, so both crossing couples have conditional hitting probability
/// one. Each carries hinge mass `h_L(−n, n) = e_L(−n) P_{−n}[X_{λ_L} = n]`
/// `= 2^{n−1} · s / (1 + s)` with `s = 2^{−n} / (2 − 2^{−n})`, which is
/// exactly `1/4` for every `n`.
pub const BIASED_Z_CROSSING_HINGE: f64 = 0.25;

pub fn biased_z_crossing_floor(eps: f64) -> f64 {
    2.0 * BIASED_Z_CROSSING_HINGE * (1.0 - eps).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, make_biased_z, make_exhaustion, ModelKind};

    #[test]
    fn classify_examples() {
        let t = VerdictThresholds::default();
        assert_eq!(t.classify(&[0.5, 0.1, 0.005]), Verdict::VanishingTrend);
        assert_eq!(t.classify(&[0.5, 0.001, 0.005]), Verdict::Inconclusive);
        assert_eq!(t.classify(&[0.35, 0.35, 0.35]), Verdict::BoundedBelow);
        assert_eq!(t.classify(&[0.3, 0.5, 0.4]), Verdict::Inconclusive);
        assert_eq!(t.classify(&[0.0, 0.0, 0.0]), Verdict::VanishingTrend);
    }

    #[test]
    fn two_vertex_cap_identity() {
        let g = build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0), (1, 1.0)]).unwrap();
        let r = cap_identity_residual(&g, &VertexSet::from_indices([0, 1]), VertexId(0)).unwrap();
        assert!(r < 1e-14);
        assert!(cap_identity_residual(&g, &VertexSet::from_indices([1]), VertexId(0)).is_err());
        let h = hinge_identity_check(&g, &VertexSet::from_indices([0, 1]), VertexId(0)).unwrap();
        assert!(h < 1e-12, "{h}");
    }

    #[test]
    fn crossing_hinge_is_a_quarter() {
        for n in 1..=8i64 {
            let (g, _) = make_biased_z(n as usize + 1).unwrap();
            let l: VertexSet = (-n..=n).map(|k| g.locate(&[k]).unwrap()).collect();
            let h = Potential::new(&g).hinge(&l).unwrap();
            let a = g.locate(&[-n]).unwrap();
            let b = g.locate(&[n]).unwrap();
            assert!((h.get(a, b) - BIASED_Z_CROSSING_HINGE).abs() < 1e-12, "n={n}: {}", h.get(a, b));
            assert!((h.get(b, a) - BIASED_Z_CROSSING_HINGE).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_at_least_one_gives_zero() {
        let ex = make_exhaustion(ModelKind::BiasedZ, &[1, 2, 3]).unwrap();
        let s = strong_criterion(&ex, &[0], 1.0, VerdictThresholds::default()).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
        let w = weak_criterion(&ex, &[0], 1.5, VerdictThresholds::default()).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
        assert!(strong_criterion(&ex, &[0], 0.0, VerdictThresholds::default()).is_err());
    }

    #[test]
    fn site_outside_level_is_rejected() {
        let ex = make_exhaustion(ModelKind::BiasedZ, &[1, 2]).unwrap();
        assert!(weak_criterion(&ex, &[2], 0.1, VerdictThresholds::default()).is_err());
    }

    #[test]
    fn crossing_atom_is_constant() {
        let ex = make_exhaustion(ModelKind::BiasedZ, &[1, 2, 3, 4, 5]).unwrap();
        let t = atom_flow(&ex, Direction::Minus, Direction::Plus, AtomThresholds::default()).unwrap();
        for &(_, v) in &t.values {
            assert!((v - 0.25).abs() < 1e-10);
        }
        assert_eq!(t.verdict, AtomVerdict::FiniteLimit);
        let up = atom_flow(&ex, Direction::Plus, Direction::Plus, AtomThresholds::default()).unwrap();
        assert_eq!(up.verdict, AtomVerdict::Diverging);
    }

    #[test]
    fn csv_header() {
        let ex = make_exhaustion(ModelKind::BiasedZ, &[1]).unwrap();
        let t = weak_criterion(&ex, &[0], 0.1, VerdictThresholds::default()).unwrap();
        assert!(t.to_csv().starts_with("level,eps,value,cap,aux_residual\n1,0.1,"));
        assert!(t.to_report().contains("verdict = "));
    }
}
