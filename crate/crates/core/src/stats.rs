//! Small statistical helpers: Poisson masses, KS statistics, least squares.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub fn poisson_ln_pmf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as f64;
    n * lambda.ln() - lambda - ln_gamma(n + 1.0)
}

pub fn poisson_pmf(lambda: f64, n: u64) -> f64 {
    poisson_ln_pmf(lambda, n).exp()
}

/// Cumulative Poisson masses up to a cap far in the right tail.
#[derive(Debug, Clone)]
pub struct PoissonTable {
    lambda: f64,
    cdf: Vec<f64>,
}

impl PoissonTable {
    pub fn new(lambda: f64) -> Self {
        let cap = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as u64;
        let mut acc = 0.0;
        let cdf = (0..=cap)
            .map(|n| {
                acc += poisson_pmf(lambda, n);
                acc
            })
            .collect();
        PoissonTable { lambda, cdf }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `P(N ≤ n)`; `0` for negative `n`.
    pub fn cdf(&self, n: i64) -> f64 {
        if n < 0 {
            0.0
        } else {
            let last = *self.cdf.last().unwrap();
            self.cdf.get(n as usize).copied().unwrap_or(last).min(1.0)
        }
    }

    /// `P(lo ≤ N ≤ hi)` for integer bounds.
    pub fn mass_between(&self, lo: i64, hi: i64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo - 1)).max(0.0)
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `level`.
pub fn ks_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

pub fn binomial_std_err(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateFit("regressor has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    Ok(LinearFit {
        slope,
        intercept,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_table_sums_to_one() {
        let t = PoissonTable::new(20.0);
        assert!((t.cdf(10_000) - 1.0).abs() < 1e-12);
        assert!((t.mass_between(20, 20) - poisson_pmf(20.0, 20)).abs() < 1e-15);
        // direct summation
        let direct: f64 = (0..=11).map(|n| poisson_pmf(20.0, n)).sum();
        assert!((t.cdf(11) - direct).abs() < 1e-14);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.5, 0.3, 0.9];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert!((ks_critical(10_000, 10_000, 0.01) - 1.6276 * (2e-4f64).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn least_squares_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
