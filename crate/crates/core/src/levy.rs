//! Sampling α-stable Lévy paths, 0 < α < 1.
//!
//! The Lévy measure is `ν(du) = (d₁ 𝟙_{u>0} + d₂ 𝟙_{u<0}) |u|^{−1−α} du` and
//! the expected number of jumps with `|u| > ε` per unit time is
//! `G(ε) = (d₁ + d₂) ε^{−α} / α`. Jumps above a level form a compound Poisson
//! process, so both halves of the split `X = X^ε + X_ε` are simulated exactly;
//! the small half is truncated below `η`.

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Result};
use crate::rng::{domain, task_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub drift: f64,
}

impl StableParams {
    pub fn new(alpha: f64, d1: f64, d2: f64, drift: f64) -> Result<Self> {
        let p = StableParams { alpha, d1, d2, drift };
        p.validate()?;
        Ok(p)
    }

    /// `d₁ = d₂ = ½`, no drift.
    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.5, 0.5, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.d1 >= 0.0 && self.d2 >= 0.0) || !(self.d1 + self.d2 > 0.0) {
            return Err(invalid(
                "d1/d2",
                format!("need d1, d2 >= 0 with d1 + d2 > 0, got {} and {}", self.d1, self.d2),
            ));
        }
        if !(self.d1 + self.d2).is_finite() || !self.drift.is_finite() {
            return Err(invalid("d1/d2/drift", "must be finite"));
        }
        Ok(())
    }

    /// `G(1) = (d₁ + d₂)/α`.
    pub fn unit_intensity(&self) -> f64 {
        (self.d1 + self.d2) / self.alpha
    }

    pub(crate) fn g(&self, eps: f64) -> f64 {
        self.unit_intensity() * eps.powf(-self.alpha)
    }

    /// `G(ε)`, the mean number of jumps with `|u| > ε` on `[0, 1]`.
    pub fn intensity_above(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(invalid("eps", format!("must be > 0, got {eps}")));
        }
        Ok(self.g(eps))
    }

    /// Expected total absolute mass of the jumps below `η` on `[0, 1]`:
    /// `(d₁ + d₂) η^{1−α}/(1 − α)`. Bounds the expected sup-norm error of
    /// dropping them.
    pub fn truncation_error(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return Err(invalid("eta", format!("must be > 0, got {eta}")));
        }
        Ok((self.d1 + self.d2) * eta.powf(1.0 - self.alpha) / (1.0 - self.alpha))
    }

    /// The `η` whose truncation error equals `budget`.
    pub fn eta_for_error(&self, budget: f64) -> Result<f64> {
        if !(budget > 0.0) {
            return Err(invalid("budget", "must be > 0"));
        }
        Ok((budget * (1.0 - self.alpha) / (self.d1 + self.d2)).powf(1.0 / (1.0 - self.alpha)))
    }

    /// Default truncation for an experiment whose smallest scale is
    /// `eps_min`: truncation error at most `0.01 eps_min`.
    pub fn default_eta(&self, eps_min: f64) -> Result<f64> {
        if !(eps_min > 0.0) {
            return Err(invalid("eps", "must be > 0"));
        }
        self.eta_for_error(0.01 * eps_min)
    }

    fn positive_probability(&self) -> f64 {
        self.d1 / (self.d1 + self.d2)
    }
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    // lambda is finite and positive here
    Poisson::new(lambda).expect("valid Poisson rate").sample(rng) as u64
}

fn uniform_time<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = Open01.sample(rng);
        let t = u * horizon;
        if t > 0.0 && t < horizon {
            return t;
        }
    }
}

fn sign<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    if rng.random::<f64>() < params.positive_probability() {
        1.0
    } else {
        -1.0
    }
}

/// `X^ε`: drift plus the compound Poisson process of jumps with `|u| > ε`.
///
/// Count `~ Poisson(G(ε))`, times i.i.d. uniform (then sorted), magnitudes
/// `ε U^{−1/α}` from the Pareto tail `P(|u| > x | |u| > ε) = (x/ε)^{−α}`.
pub fn sample_large<R: Rng + ?Sized>(params: &StableParams, eps: f64, rng: &mut R) -> Result<StepFunction> {
    params.validate()?;
    let lambda = params.intensity_above(eps)?;
    let n = poisson(lambda, rng);
    let inv_alpha = 1.0 / params.alpha;
    let mut jumps = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let t = uniform_time(1.0, rng);
        let magnitude = loop {
            let u: f64 = Open01.sample(rng);
            let m = eps * u.powf(-inv_alpha);
            if m.is_finite() && m > eps {
                break m;
            }
        };
        jumps.push((t, sign(params, rng) * magnitude));
    }
    StepFunction::from_unsorted(1.0, params.drift, 0.0, jumps)
}

/// Driftless compound Poisson path of the jumps with `lo < |u| ≤ hi` on
/// `[0, horizon]`, magnitudes by inverse CDF of `ν` restricted to the band.
pub fn sample_band<R: Rng + ?Sized>(
    params: &StableParams,
    lo: f64,
    hi: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<StepFunction> {
    params.validate()?;
    if !(lo > 0.0 && lo < hi) {
        return Err(invalid(
            "eta",
            format!("need 0 < eta < eps, got eta = {lo}, eps = {hi}"),
        ));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be > 0"));
    }
    let a = params.alpha;
    let (lo_pow, hi_pow) = (lo.powf(-a), hi.powf(-a));
    let lambda = (params.g(lo) - params.g(hi)) * horizon;
    let n = poisson(lambda, rng);
    let mut jumps = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let t = uniform_time(horizon, rng);
        let magnitude = loop {
            let u: f64 = rng.random();
            let m = (hi_pow + u * (lo_pow - hi_pow)).powf(-1.0 / a).min(hi);
            if m > lo {
                break m;
            }
        };
        jumps.push((t, sign(params, rng) * magnitude));
    }
    StepFunction::from_unsorted(horizon, 0.0, 0.0, jumps)
}

/// `X_ε` on `[0, 1]` with jumps in `(η, ε]`.
pub fn sample_small<R: Rng + ?Sized>(params: &StableParams, eps: f64, eta: f64, rng: &mut R) -> Result<StepFunction> {
    sample_band(params, eta, eps, 1.0, rng)
}

/// Deterministic path map `t ↦ ε·f(t ε^{−α})`: values scale by `ε`, times
/// by `ε^α`. In distribution it sends the unit-level small-jump process on
/// `[0, ε^{−α}]` to `X_ε` on `[0, 1]`.
pub fn rescale(f: &StepFunction, eps: f64, alpha: f64) -> Result<StepFunction> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be > 0"));
    }
    f.rescaled(eps, eps.powf(alpha))
}

/// Inverse of [`rescale`].
pub fn inverse_rescale(f: &StepFunction, eps: f64, alpha: f64) -> Result<StepFunction> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be > 0"));
    }
    f.rescaled(1.0 / eps, eps.powf(-alpha))
}

/// `X = X^ε + X_ε` sampled on independent streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub large: StepFunction,
    pub small: StepFunction,
    pub split: f64,
    pub truncation: f64,
}

impl PathPair {
    pub fn full(&self) -> Result<StepFunction> {
        self.large.add(&self.small)
    }
}

/// Path `index` under `master`; the large and small halves use separate domains.
pub fn sample_pair(params: &StableParams, eps: f64, eta: f64, master: u64, index: u64) -> Result<PathPair> {
    let large = sample_large(params, eps, &mut task_rng(master, domain::LARGE_JUMPS, index))?;
    let small = sample_small(params, eps, eta, &mut task_rng(master, domain::SMALL_JUMPS, index))?;
    Ok(PathPair {
        large,
        small,
        split: eps,
        truncation: eta,
    })
}

/// Large-jump path `index` under `master`.
pub fn sample_large_seeded(params: &StableParams, eps: f64, master: u64, index: u64) -> Result<StepFunction> {
    sample_large(params, eps, &mut task_rng(master, domain::LARGE_JUMPS, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_var;

    fn sym() -> StableParams {
        StableParams::symmetric(0.5).unwrap()
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(StableParams::new(1.0, 0.5, 0.5, 0.0).is_err());
        assert!(StableParams::new(0.0, 0.5, 0.5, 0.0).is_err());
        assert!(StableParams::new(1.5, 0.5, 0.5, 0.0).is_err());
        assert!(StableParams::new(0.5, 0.0, 0.0, 0.0).is_err());
        assert!(StableParams::new(0.5, -0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn intensity_examples() {
        let p = sym();
        assert!((p.intensity_above(1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((p.intensity_above(0.01).unwrap() - 20.0).abs() < 1e-12);
        let q = StableParams::new(0.5, 1.5, 1.5, 0.0).unwrap();
        assert!((q.intensity_above(0.01).unwrap() - 3.0 * 20.0).abs() < 1e-12);
        assert!(p.intensity_above(0.0).is_err());
    }

    #[test]
    fn truncation_error_examples() {
        let p = sym();
        assert!((p.truncation_error(1e-6).unwrap() - 2e-3).abs() < 1e-15);
        assert!(p.truncation_error(1e-300).unwrap() < 1e-140);
        let q = StableParams::new(0.5, 1.0, 1.0, 0.0).unwrap();
        assert!((q.truncation_error(1e-6).unwrap() - 4e-3).abs() < 1e-15);
        let eta = p.eta_for_error(2e-3).unwrap();
        assert!((eta - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn large_jumps_exceed_eps_and_respect_sign_law() {
        let p = StableParams::new(0.5, 1.0, 0.0, 0.3).unwrap();
        for k in 0..50 {
            let f = sample_large_seeded(&p, 0.05, 11, k).unwrap();
            assert_eq!(f.drift(), 0.3);
            assert!(f.jumps().iter().all(|j| j.size > 0.05));
        }
    }

    #[test]
    fn small_jumps_stay_in_band() {
        let p = sym();
        let mut rng = task_rng(3, 0, 0);
        for _ in 0..50 {
            let f = sample_small(&p, 0.05, 1e-3, &mut rng).unwrap();
            assert_eq!(f.drift(), 0.0);
            assert!(f.jumps().iter().all(|j| j.size.abs() > 1e-3 && j.size.abs() <= 0.05));
        }
        assert!(sample_small(&p, 0.05, 0.05, &mut rng).is_err());
    }

    #[test]
    fn vanishing_band_gives_empty_paths() {
        let p = sym();
        let mut rng = task_rng(5, 0, 0);
        let empty = (0..200)
            .filter(|_| {
                sample_small(&p, 0.05, 0.05 * (1.0 - 1e-9), &mut rng)
                    .unwrap()
                    .jump_count()
                    == 0
            })
            .count();
        assert!(empty >= 199);
    }

    #[test]
    fn small_count_mean_matches_intensity() {
        let p = sym();
        let (eps, eta) = (0.05, 0.005);
        let expected = p.g(eta) - p.g(eps);
        let counts: Vec<f64> = (0..4000)
            .map(|k| sample_small(&p, eps, eta, &mut task_rng(9, 2, k)).unwrap().jump_count() as f64)
            .collect();
        let (mean, _) = mean_var(&counts);
        assert!((mean - expected).abs() < 5.0 * (expected / 4000.0).sqrt());
    }

    #[test]
    fn rescale_examples() {
        let f = StepFunction::new(4.0, 0.0, 0.0, vec![(2.0, 3.0)]).unwrap();
        let g = rescale(&f, 0.25, 0.5).unwrap();
        assert_eq!(g, StepFunction::new(2.0, 0.0, 0.0, vec![(1.0, 0.75)]).unwrap());
        assert_eq!(rescale(&f, 1.0, 0.5).unwrap(), f);
        assert_eq!(inverse_rescale(&g, 0.25, 0.5).unwrap(), f);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = sym();
        let a = sample_pair(&p, 0.05, 1e-4, 17, 3).unwrap();
        let b = sample_pair(&p, 0.05, 1e-4, 17, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_pair(&p, 0.05, 1e-4, 17, 4).unwrap());
    }
}
