//! Test statistics used by the Monte Carlo suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Smallest expected count a chi-square cell may have before merging.
pub const MIN_EXPECTED: f64 = 5.0;

/// Mean and standard error of i.i.d. values.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut m = Moments::default();
        for v in values {
            m.push(v);
        }
        m
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// `(k/n − p) / √(p(1−p)/n)`; infinite when `p ∈ {0,1}` and the frequency differs.
pub fn binomial_z(successes: u64, n: u64, p: f64) -> f64 {
    let freq = successes as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se == 0.0 {
        return if freq == p { 0.0 } else { f64::INFINITY.copysign(freq - p) };
    }
    (freq - p) / se
}

/// Sample covariance of paired values and the standard error of that
/// estimate, from the variance of the centred products.
pub fn covariance(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products = Moments::from_values(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let cov = products.sum / (n - 1.0);
    (cov, products.std_error())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of sparse cells folded into neighbors.
    pub merged_cells: usize,
}

/// Pearson goodness of fit of `observed` counts against cell probabilities.
///
/// Cells are visited in order; consecutive cells with expected count below
/// [`MIN_EXPECTED`] are pooled until the pool is large enough, and a
/// leftover pool is folded into the last retained cell. Observations in a
/// cell of probability zero make the p-value zero.
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(Error::InvalidParameter("observed and expected cells differ in number".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = probabilities.iter().sum();
    if n == 0 || !(total_p > 0.0) {
        return Err(Error::InvalidParameter("chi-square needs observations and positive mass".into()));
    }
    if observed.iter().zip(probabilities).any(|(&o, &p)| o > 0 && p <= 0.0) {
        return Ok(ChiSquareResult { statistic: f64::INFINITY, dof: observed.len() - 1, p_value: 0.0, merged_cells: 0 });
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    let mut pooled = 0usize;
    let mut merged = 0usize;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p <= 0.0 {
            continue;
        }
        pool.0 += o as f64;
        pool.1 += n as f64 * p / total_p;
        pooled += 1;
        if pool.1 >= MIN_EXPECTED {
            cells.push(pool);
            merged += pooled - 1;
            pool = (0.0, 0.0);
            pooled = 0;
        }
    }
    if pooled > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += pool.0;
                last.1 += pool.1;
                merged += pooled;
            }
            None => {
                cells.push(pool);
                merged += pooled - 1;
            }
        }
    }
    if cells.len() < 2 {
        return Ok(ChiSquareResult { statistic: 0.0, dof: 0, p_value: 1.0, merged_cells: merged });
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let law = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquareResult { statistic, dof, p_value: law.sf(statistic), merged_cells: merged })
}

/// Poisson dispersion of counts: the index `Σ (c − c̄)² / c̄` is close to
/// `χ²_{n−1}`, normalized here to a z-score.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dispersion {
    pub mean: f64,
    /// Sample variance over mean.
    pub ratio: f64,
    pub z: f64,
}

pub fn poisson_dispersion(counts: &[u64]) -> Dispersion {
    let m = Moments::from_values(counts.iter().map(|&c| c as f64));
    let mean = m.mean();
    let k = (m.n - 1) as f64;
    if mean == 0.0 {
        return Dispersion { mean, ratio: 1.0, z: 0.0 };
    }
    let index = m.variance() * k / mean;
    Dispersion { mean, ratio: m.variance() / mean, z: (index - k) / (2.0 * k).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let m = Moments::from_values([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_z_edges() {
        assert_eq!(binomial_z(0, 10, 0.0), 0.0);
        assert!(binomial_z(1, 10, 0.0).is_infinite());
        assert!((binomial_z(60, 100, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square(&[250, 250, 500], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_merges_sparse_cells() {
        let r = chi_square(&[95, 2, 1, 2], &[0.95, 0.02, 0.01, 0.02]).unwrap();
        assert_eq!(r.dof, 1);
        assert_eq!(r.merged_cells, 2);
        let impossible = chi_square(&[10, 1], &[1.0, 0.0]).unwrap();
        assert_eq!(impossible.p_value, 0.0);
    }

    #[test]
    fn chi_square_detects_misfit() {
        let r = chi_square(&[600, 400], &[0.5, 0.5]).unwrap();
        assert!(r.p_value < 1e-9);
    }

    #[test]
    fn dispersion_of_constant_counts() {
        let d = poisson_dispersion(&[3, 3, 3, 3]);
        assert_eq!(d.ratio, 0.0);
        assert!(d.z < 0.0);
    }

    #[test]
    fn covariance_of_identical_columns_is_variance() {
        let xs = [0.0, 1.0, 1.0, 0.0, 1.0];
        let (c, se) = covariance(&xs, &xs);
        assert!((c - Moments::from_values(xs).variance()).abs() < 1e-15);
        assert!(se > 0.0);
    }
}
