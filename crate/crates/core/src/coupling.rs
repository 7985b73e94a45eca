//! Finite distributions, total variation and couplings.
//!
//! Besides the elementary `d_TV`, this module evaluates the Poisson shift
//! distance `d_TV(Poi(λ), Poi(λ) + 1)`, the gap functional
//! `Σ_x (π(x) − ε ν(x))_+` governing `d_TV(PPP(ν) ⊕ π, PPP(ν))`, the upper
//! bound `½ √(ε / (1 − a)) + a` on that distance, and its exact value on
//! small supports by enumeration of count vectors.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use statrs::distribution::{DiscreteCDF, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Allowed deviation of a probability's total mass from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum MeasureKind {
    Probability,
    #[default]
    FiniteMeasure,
}

/// Nonnegative masses on a finite ordered support.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution<T: Ord> {
    masses: BTreeMap<T, f64>,
    kind: MeasureKind,
}

impl<T: Ord> Default for DiscreteDistribution<T> {
    fn default() -> Self {
        DiscreteDistribution { masses: BTreeMap::new(), kind: MeasureKind::FiniteMeasure }
    }
}

impl<T: Ord + Clone> DiscreteDistribution<T> {
    /// Finite measure; repeated keys accumulate.
    pub fn measure<I: IntoIterator<Item = (T, f64)>>(entries: I) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (k, m) in entries {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Distribution(format!("mass {m} is not a finite nonnegative number")));
            }
            *masses.entry(k).or_insert(0.0) += m;
        }
        Ok(DiscreteDistribution { masses, kind: MeasureKind::FiniteMeasure })
    }

    /// Probability measure; the total must be one within [`NORMALIZATION_TOLERANCE`].
    pub fn probability<I: IntoIterator<Item = (T, f64)>>(entries: I) -> Result<Self> {
        let mut d = Self::measure(entries)?;
        let total = d.total();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Distribution(format!("total mass {total} is not 1")));
        }
        d.kind = MeasureKind::Probability;
        Ok(d)
    }

    /// Rescaled to total mass one.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Distribution("cannot normalize a zero measure".into()));
        }
        let masses = self.masses.iter().map(|(k, &m)| (k.clone(), m / total)).collect();
        Ok(DiscreteDistribution { masses, kind: MeasureKind::Probability })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn is_probability(&self) -> bool {
        self.kind == MeasureKind::Probability
    }

    pub fn mass(&self, key: &T) -> f64 {
        self.masses.get(key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.masses.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.masses.iter().map(|(k, &m)| (k, m))
    }

    /// Reusable sampler proportional to the masses.
    pub fn sampler(&self) -> Result<WeightedSampler<T>> {
        let keys: Vec<T> = self.masses.keys().cloned().collect();
        let index = WeightedIndex::new(self.masses.values().copied())
            .map_err(|e| Error::Distribution(format!("cannot sample: {e}")))?;
        Ok(WeightedSampler { keys, index })
    }

    fn require_probability(&self, name: &str) -> Result<()> {
        if !self.is_probability() {
            return Err(Error::Distribution(format!("{name} must be a probability distribution")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WeightedSampler<T> {
    keys: Vec<T>,
    index: WeightedIndex<f64>,
}

impl<T> WeightedSampler<T> {
    pub fn sample(&self, rng: &mut RngStream) -> &T {
        &self.keys[self.index.sample(rng)]
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TotalVariation {
    /// `½ Σ |p − q|`.
    pub distance: f64,
    /// `Σ_{p > q} (p − q)`.
    pub positive_excess: f64,
}

fn union_keys<'a, T: Ord + Clone>(p: &'a DiscreteDistribution<T>, q: &'a DiscreteDistribution<T>) -> BTreeSet<&'a T> {
    p.support().chain(q.support()).collect()
}

pub fn tv<T: Ord + Clone>(p: &DiscreteDistribution<T>, q: &DiscreteDistribution<T>) -> Result<TotalVariation> {
    p.require_probability("p")?;
    q.require_probability("q")?;
    let mut half_l1 = 0.0;
    let mut excess = 0.0;
    for k in union_keys(p, q) {
        let d = p.mass(k) - q.mass(k);
        half_l1 += d.abs();
        if d > 0.0 {
            excess += d;
        }
    }
    half_l1 *= 0.5;
    // The two forms differ by half the normalization defects at most.
    let slack = 0.5 * ((p.total() - 1.0).abs() + (q.total() - 1.0).abs()) + 1e-12;
    if (half_l1 - excess).abs() > slack {
        return Err(Error::Distribution(format!(
            "total variation forms disagree: {half_l1} vs {excess}"
        )));
    }
    Ok(TotalVariation { distance: half_l1, positive_excess: excess })
}

/// Draw `(X, Y)` with `X ~ p`, `Y ~ q` and `P(X ≠ Y) = d_TV(p, q)`.
pub fn optimal_coupling<T: Ord + Clone>(
    p: &DiscreteDistribution<T>,
    q: &DiscreteDistribution<T>,
    rng: &mut RngStream,
) -> Result<(T, T)> {
    Ok(OptimalCoupling::new(p, q)?.sample(rng))
}

/// Precomputed maximal coupling of two laws, for repeated draws.
#[derive(Clone, Debug)]
pub struct OptimalCoupling<T> {
    distance: f64,
    overlap: Option<WeightedSampler<T>>,
    excess_p: Option<WeightedSampler<T>>,
    excess_q: Option<WeightedSampler<T>>,
}

impl<T: Ord + Clone> OptimalCoupling<T> {
    pub fn new(p: &DiscreteDistribution<T>, q: &DiscreteDistribution<T>) -> Result<Self> {
        let distance = tv(p, q)?.distance;
        let keys = union_keys(p, q);
        let part = |f: &dyn Fn(f64, f64) -> f64| -> Result<Option<WeightedSampler<T>>> {
            let m = DiscreteDistribution::measure(keys.iter().map(|&k| ((*k).clone(), f(p.mass(k), q.mass(k)))))?;
            if m.total() > 0.0 {
                m.sampler().map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(OptimalCoupling {
            distance,
            overlap: part(&|a, b| a.min(b))?,
            excess_p: part(&|a, b| (a - b).max(0.0))?,
            excess_q: part(&|a, b| (b - a).max(0.0))?,
        })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn sample(&self, rng: &mut RngStream) -> (T, T) {
        let u = rng.uniform();
        match (&self.overlap, &self.excess_p, &self.excess_q) {
            (Some(o), _, _) if u >= self.distance || self.excess_p.is_none() || self.excess_q.is_none() => {
                let k = o.sample(rng).clone();
                (k.clone(), k)
            }
            (_, Some(a), Some(b)) => (a.sample(rng).clone(), b.sample(rng).clone()),
            _ => unreachable!("probability laws always have an overlap or two excess parts"),
        }
    }
}

/// `ln P(Poi(λ) = k)`.
fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -lambda + k as f64 * lambda.ln() - ln_gamma(k as f64 + 1.0)
}

/// Smallest `k ≥ λ` with `P(Poi(λ) > k) ≤ tail`.
pub fn poisson_truncation(lambda: f64, tail: f64) -> u64 {
    if lambda == 0.0 {
        return 0;
    }
    let law = Poisson::new(lambda).expect("positive rate");
    let mut k = lambda.ceil() as u64;
    while law.sf(k) > tail {
        k += 1;
    }
    k
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PoissonShiftTv {
    pub exact: f64,
    /// `1 / (2 √λ)`.
    pub bound: f64,
    /// Last count summed explicitly; the decreasing tail beyond it telescopes.
    pub truncation: u64,
}

/// Relative tail mass at which Poisson sums are cut.
pub const POISSON_TAIL: f64 = 1e-15;

/// `d_TV(Poi(λ), Poi(λ) + 1)` by direct summation.
pub fn poisson_shift_tv(lambda: f64) -> Result<PoissonShiftTv> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("Poisson parameter must be positive, got {lambda}")));
    }
    let cut = poisson_truncation(lambda, POISSON_TAIL);
    let mut sum = 0.0;
    let mut prev = 0.0;
    for k in 0..=cut {
        let p = poisson_ln_pmf(lambda, k).exp();
        sum += (p - prev).abs();
        prev = p;
    }
    // beyond the mode the pmf decreases, so Σ_{k>cut} (p_{k−1} − p_k) = p_cut
    sum += prev;
    Ok(PoissonShiftTv { exact: 0.5 * sum, bound: 0.5 / lambda.sqrt(), truncation: cut })
}

/// `Σ_x (π(x) − ε ν(x))_+`.
pub fn ppp_gap<T: Ord + Clone>(nu: &DiscreteDistribution<T>, pi: &DiscreteDistribution<T>, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    pi.require_probability("pi")?;
    Ok(pi.iter().map(|(k, p)| (p - eps * nu.mass(k)).max(0.0)).sum())
}

/// `½ √(ε / (1 − a)) + a`, valid whenever the gap is at most `a`.
pub fn ppp_tv_upper<T: Ord + Clone>(
    nu: &DiscreteDistribution<T>,
    pi: &DiscreteDistribution<T>,
    eps: f64,
    a: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("a must lie in [0, 1), got {a}")));
    }
    let gap = ppp_gap(nu, pi, eps)?;
    if gap > a {
        return Err(Error::InvalidParameter(format!("gap {gap} exceeds a = {a}")));
    }
    Ok(0.5 * (eps / (1.0 - a)).sqrt() + a)
}

/// Exact `d_TV(PPP(ν) ⊕ π, PPP(ν))` by enumerating count vectors, each
/// coordinate cut where its Poisson tail drops below `tail / |support|`.
pub fn ppp_oplus_tv<T: Ord + Clone>(
    nu: &DiscreteDistribution<T>,
    pi: &DiscreteDistribution<T>,
    tail: f64,
) -> Result<f64> {
    pi.require_probability("pi")?;
    let keys: Vec<&T> = union_keys(nu, pi).into_iter().collect();
    let m = keys.len();
    let lambdas: Vec<f64> = keys.iter().map(|k| nu.mass(k)).collect();
    let weights: Vec<f64> = keys.iter().map(|k| pi.mass(k)).collect();
    let cuts: Vec<u64> = lambdas.iter().map(|&l| poisson_truncation(l, tail / m as f64) + 1).collect();
    let cells: f64 = cuts.iter().map(|&c| (c + 1) as f64).product();
    if cells > 5e7 {
        return Err(Error::InvalidParameter(format!("enumeration over {cells} count vectors is too large")));
    }
    let pmf: Vec<Vec<f64>> = lambdas
        .iter()
        .zip(&cuts)
        .map(|(&l, &c)| (0..=c).map(|k| poisson_ln_pmf(l, k).exp()).collect())
        .collect();
    let mut counts = vec![0usize; m];
    let mut sum = 0.0;
    loop {
        let base: f64 = counts.iter().enumerate().map(|(i, &c)| pmf[i][c]).product();
        // P(PPP(ν) ⊕ π = n) = Σ_j π(j) P(PPP(ν) = n − e_j)
        let shifted: f64 = (0..m)
            .filter(|&j| counts[j] > 0 && weights[j] > 0.0)
            .map(|j| {
                weights[j]
                    * (0..m)
                        .map(|i| pmf[i][if i == j { counts[i] - 1 } else { counts[i] }])
                        .product::<f64>()
            })
            .sum();
        sum += (shifted - base).abs();
        let mut i = 0;
        loop {
            if i == m {
                return Ok(0.5 * sum);
            }
            counts[i] += 1;
            if counts[i] as u64 <= cuts[i] {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LowerConstant {
    pub value: f64,
    pub argmin_lambda: f64,
    pub grid_step: f64,
}

/// Grid minimum of `d_TV(Poi(λ) + Ber(p), Poi(λ))` over
/// `{λ ≥ 0, p ≤ 1, ελ + a ≤ p}`.
///
/// The distance equals `p · d_TV(Poi(λ) + 1, Poi(λ))`, increasing in `p`,
/// so only `p = a + ελ` needs scanning; `λ` runs over `[0, (1 − a)/ε]`.
pub fn lower_constant(eps: f64, a: f64, grid_step: f64) -> Result<LowerConstant> {
    if !(eps > 0.0) || !(a > 0.0 && a <= 1.0) || !(grid_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0, a in (0, 1], step > 0; got eps={eps}, a={a}, step={grid_step}"
        )));
    }
    let lmax = (1.0 - a) / eps;
    let steps = (lmax / grid_step).floor() as u64;
    let mut best = LowerConstant { value: f64::INFINITY, argmin_lambda: 0.0, grid_step };
    for i in 0..=steps + 1 {
        let lambda = (i as f64 * grid_step).min(lmax);
        let shift = if lambda == 0.0 { 1.0 } else { poisson_mode_mass(lambda) };
        let v = (a + eps * lambda) * shift;
        if v < best.value {
            best.value = v;
            best.argmin_lambda = lambda;
        }
    }
    Ok(best)
}

/// `max_k P(Poi(λ) = k)`, which equals `d_TV(Poi(λ), Poi(λ) + 1)`: the
/// positive part of `p_k − p_{k−1}` telescopes up to the mode.
fn poisson_mode_mass(lambda: f64) -> f64 {
    let k = (lambda.ceil() - 1.0).max(0.0) as u64;
    poisson_ln_pmf(lambda, k).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64, b: f64) -> DiscreteDistribution<u8> {
        DiscreteDistribution::probability([(0u8, a), (1u8, b)]).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = two_point(0.5, 0.5);
        assert_eq!(tv(&p, &p).unwrap().distance, 0.0);
        let q = two_point(1.0, 0.0);
        let d = tv(&p, &q).unwrap();
        assert_eq!(d.distance, 0.5);
        assert_eq!(d.positive_excess, 0.5);
    }

    #[test]
    fn tv_rejects_measures() {
        let m = DiscreteDistribution::measure([(0u8, 2.0)]).unwrap();
        assert!(tv(&m, &m).is_err());
        assert!(DiscreteDistribution::probability([(0u8, 0.5)]).is_err());
        assert!(DiscreteDistribution::measure([(0u8, -0.5)]).is_err());
    }

    #[test]
    fn truncated_poisson_shift_via_tv() {
        let cut = poisson_truncation(1.0, 1e-15);
        let p = DiscreteDistribution::measure((0..=cut).map(|k| (k, poisson_ln_pmf(1.0, k).exp()))).unwrap();
        let p = p.normalized().unwrap();
        let q = DiscreteDistribution::probability(p.iter().map(|(&k, m)| (k + 1, m))).unwrap();
        let d = tv(&p, &q).unwrap().distance;
        assert!((d - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn poisson_shift_matches_mode_mass() {
        for &l in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 1e4] {
            let r = poisson_shift_tv(l).unwrap();
            assert!((r.exact - poisson_mode_mass(l)).abs() < 1e-12, "λ={l}");
            assert!(r.exact <= r.bound, "λ={l}");
        }
        assert!((poisson_shift_tv(1.0).unwrap().exact - (-1.0f64).exp()).abs() < 1e-12);
        assert!(poisson_shift_tv(0.0).is_err());
    }

    #[test]
    fn ppp_gap_examples() {
        let nu = DiscreteDistribution::measure((0..4).map(|i| (i, 1.0))).unwrap();
        let pi = DiscreteDistribution::probability((0..4).map(|i| (i, 0.25))).unwrap();
        assert!((ppp_gap(&nu, &pi, 1.0 / 8.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ppp_gap(&nu, &pi, 1.0).unwrap(), 0.0);
        let zero = DiscreteDistribution::<i32>::default();
        assert!((ppp_gap(&zero, &pi, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!(ppp_gap(&nu, &pi, 0.0).is_err());
    }

    #[test]
    fn ppp_upper_bound_arithmetic() {
        let nu = DiscreteDistribution::measure([(0, 100.0)]).unwrap();
        let pi = DiscreteDistribution::probability([(0, 1.0)]).unwrap();
        let b = ppp_tv_upper(&nu, &pi, 0.01, 0.1).unwrap();
        assert!((b - (0.5 * (0.01f64 / 0.9).sqrt() + 0.1)).abs() < 1e-15);
        assert!(ppp_tv_upper(&nu, &pi, 0.01, 1.0).is_err());
        let thin = DiscreteDistribution::measure([(0, 0.0)]).unwrap();
        assert!(ppp_tv_upper(&thin, &pi, 0.01, 0.1).is_err());
    }

    #[test]
    fn ppp_oplus_single_site_is_poisson_shift() {
        let nu = DiscreteDistribution::measure([(0, 2.0)]).unwrap();
        let pi = DiscreteDistribution::probability([(0, 1.0)]).unwrap();
        let exact = ppp_oplus_tv(&nu, &pi, 1e-12).unwrap();
        assert!((exact - poisson_shift_tv(2.0).unwrap().exact).abs() < 1e-10);
    }

    #[test]
    fn ppp_oplus_within_upper_bound() {
        let nu = DiscreteDistribution::measure((0..3).map(|i| (i, 1.0))).unwrap();
        let pi = DiscreteDistribution::probability((0..3).map(|i| (i, 1.0 / 3.0))).unwrap();
        let eps = 1.0 / 3.0;
        let gap = ppp_gap(&nu, &pi, eps).unwrap();
        assert!(gap < 1e-15);
        let exact = ppp_oplus_tv(&nu, &pi, 1e-9).unwrap();
        let bound = ppp_tv_upper(&nu, &pi, eps, gap).unwrap();
        assert!(exact <= bound, "{exact} > {bound}");
        // three sites of rate one sum to one site of rate three
        assert!((exact - poisson_shift_tv(3.0).unwrap().exact).abs() < 1e-8);
    }

    #[test]
    fn ppp_oplus_zero_intensity_site() {
        let nu = DiscreteDistribution::measure([(0, 0.0), (1, 1.0)]).unwrap();
        let pi = DiscreteDistribution::probability([(0, 1.0)]).unwrap();
        // the extra point lands where PPP(ν) never puts one
        assert!((ppp_oplus_tv(&nu, &pi, 1e-12).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lower_constant_is_positive_and_below_values() {
        let c = lower_constant(0.1, 0.2, 1e-3).unwrap();
        assert!(c.value > 0.0);
        for &l in &[0.0, 1.0, 3.0, 8.0] {
            let p = 0.2 + 0.1 * l;
            let shift = if l == 0.0 { 1.0 } else { poisson_shift_tv(l).unwrap().exact };
            assert!(c.value <= p * shift + 1e-12);
        }
    }

    #[test]
    fn coupling_identical_laws_never_differ() {
        let p = two_point(0.3, 0.7);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let (x, y) = optimal_coupling(&p, &p, &mut rng).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn coupling_disjoint_laws_always_differ() {
        let p = two_point(1.0, 0.0);
        let q = two_point(0.0, 1.0);
        let c = OptimalCoupling::new(&p, &q).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..100 {
            assert_eq!(c.sample(&mut rng), (0, 1));
        }
    }
}
