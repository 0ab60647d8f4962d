//! Band-crossing quantizer for the small-jump part.
//!
//! At unit level (`X₁`, jumps of size at most 1) the integer path `Y` holds
//! the nearest integer `K` to `X₁` and moves only when `|X₁ − K| ≥ 1`, so
//! `|Y − X₁| < 1` and every move is at most 2. A driftless step path changes
//! only at its jumps, so the crossing times are exact. Flooring the crossing
//! times to the grid `ε^β ℕ` gives `Ỹ` with `|Y − Ỹ| ≤ 2` as long as
//! consecutive crossings are more than `2ε^β` apart.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};
use crate::levy::{inverse_rescale, StableParams};
use crate::rng::{domain, task_rng};
use crate::stats::mean_var;

use super::{FailureFlag, NetCode, NetElement, QuantizeOutcome};

/// Absolute tolerance (in grid units) when flooring times to the grid.
const GRID_SNAP: f64 = 1e-9;
/// Relative tolerance on the unit jump-size bound.
const UNIT_SLACK: f64 = 1e-9;

/// Start level, per-crossing increments in `{−2, …, 2}` and grid indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmallCode {
    pub start: i64,
    pub increments: Vec<i8>,
    pub grid: Vec<u64>,
}

impl SmallCode {
    /// `Ỹ` at unit level on `[0, horizon]` with grid step `h`.
    pub fn unit_path(&self, h: f64, horizon: f64) -> Result<StepFunction> {
        StepFunction::new(
            horizon,
            0.0,
            self.start as f64,
            self.grid
                .iter()
                .zip(&self.increments)
                .map(|(&k, &d)| (k as f64 * h, d as f64))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallJumpQuantizer {
    pub alpha: f64,
    pub eps: f64,
    pub b: f64,
    pub beta: f64,
    /// Step-count constant `A`: at most `A ε^{−α}` crossings are encoded.
    pub a_cap: f64,
}

impl SmallJumpQuantizer {
    pub fn new(alpha: f64, eps: f64, b: f64, a_cap: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
        }
        let beta = b - alpha;
        if !(beta > alpha) {
            return Err(invalid("B", format!("must exceed 2 alpha = {}, got {b}", 2.0 * alpha)));
        }
        if !(a_cap > 0.0 && a_cap.is_finite()) {
            return Err(invalid("A", format!("must be positive, got {a_cap}")));
        }
        Ok(SmallJumpQuantizer {
            alpha,
            eps,
            b,
            beta,
            a_cap,
        })
    }

    /// Grid step `ε^β` at unit level.
    pub fn grid_step(&self) -> f64 {
        self.eps.powf(self.beta)
    }

    /// Unit-level horizon `ε^{−α}`.
    pub fn unit_horizon(&self) -> f64 {
        self.eps.powf(-self.alpha)
    }

    pub fn max_steps(&self) -> f64 {
        self.a_cap * self.unit_horizon()
    }

    /// Element `t ↦ ε Ỹ(t ε^{−α})` on `[0, 1]`.
    pub fn decode(&self, code: &SmallCode) -> Result<StepFunction> {
        if code.grid.len() != code.increments.len() {
            return Err(invalid("code", "grid and increments differ in length"));
        }
        if code.increments.iter().any(|&d| d == 0 || d.abs() > 2) {
            return Err(invalid("code", "increments must lie in {-2, -1, 1, 2}"));
        }
        if code.grid.windows(2).any(|w| w[1] < w[0] + 2) {
            return Err(invalid("code", "grid indices must increase by at least 2"));
        }
        let step = self.eps.powf(self.b);
        StepFunction::new(
            1.0,
            0.0,
            self.eps * code.start as f64,
            code.grid
                .iter()
                .zip(&code.increments)
                .map(|(&k, &d)| (k as f64 * step, self.eps * d as f64))
                .collect(),
        )
    }

    /// `n (ln 5 + ln(#grid indices))` for a code with `n` crossings.
    pub fn code_length_nats(&self, code: &SmallCode) -> f64 {
        let indices = (self.eps.powf(-self.b).floor() - 1.0).max(1.0);
        code.increments.len() as f64 * (5f64.ln() + indices.ln())
    }
}

/// Crossing times `τ₀ = 0 < τ₁ < …` and levels `K_j` of `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPath {
    pub horizon: f64,
    pub tau: Vec<f64>,
    pub k: Vec<i64>,
}

impl BandPath {
    pub fn steps(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn to_step(&self) -> Result<StepFunction> {
        StepFunction::new(
            self.horizon,
            0.0,
            self.k[0] as f64,
            self.tau[1..]
                .iter()
                .zip(self.k.windows(2))
                .map(|(&t, w)| (t, (w[1] - w[0]) as f64))
                .collect(),
        )
    }
}

fn nearest_level(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Builds `Y` from a driftless unit-level path on its own horizon.
pub fn build_y(x1: &StepFunction) -> Result<BandPath> {
    if x1.drift() != 0.0 {
        return Err(Error::Precondition("band path needs a driftless path".into()));
    }
    if let Some(j) = x1.jumps().iter().find(|j| j.size.abs() > 1.0 + UNIT_SLACK) {
        return Err(Error::Precondition(format!(
            "unit-level jumps must not exceed 1, got {} at {}",
            j.size, j.time
        )));
    }
    let mut x = x1.x0();
    let mut level = nearest_level(x);
    let mut tau = vec![0.0];
    let mut k = vec![level];
    for j in x1.jumps() {
        x += j.size;
        if (x - level as f64).abs() >= 1.0 {
            level = nearest_level(x);
            tau.push(j.time);
            k.push(level);
        }
    }
    Ok(BandPath {
        horizon: x1.horizon(),
        tau,
        k,
    })
}

/// Floors the crossings of `y` to the grid `ε^β ℕ`, or flags `E₁` / `E₂`.
pub fn discretize_y(y: &BandPath, q: &SmallJumpQuantizer) -> Result<QuantizeOutcome> {
    if y.steps() as f64 > q.max_steps() {
        return Ok(QuantizeOutcome::Failed(FailureFlag::TooManySteps));
    }
    let h = q.grid_step();
    if y.tau.windows(2).any(|w| w[1] - w[0] <= 2.0 * h) {
        return Ok(QuantizeOutcome::Failed(FailureFlag::ShortStep));
    }
    let grid: Vec<u64> = y.tau[1..].iter().map(|&t| (t / h + GRID_SNAP).floor() as u64).collect();
    if grid.first().is_some_and(|&g| g < 2) || grid.windows(2).any(|w| w[1] < w[0] + 2) {
        return Ok(QuantizeOutcome::Failed(FailureFlag::ShortStep));
    }
    let code = SmallCode {
        start: y.k[0],
        increments: y.k.windows(2).map(|w| (w[1] - w[0]) as i8).collect(),
        grid,
    };
    Ok(QuantizeOutcome::Element(NetElement {
        path: q.decode(&code)?,
        code: NetCode::Small(code),
        radius: 3.0 * q.eps,
    }))
}

/// Quantizes `X_ε` on `[0, 1]`. On success the element is within `3ε` in
/// the sup norm and its oscillation over windows of length `2ε^B` is at
/// most `2ε`.
pub fn quantize_small(x_small: &StepFunction, q: &SmallJumpQuantizer) -> Result<QuantizeOutcome> {
    if (x_small.horizon() - 1.0).abs() > 1e-12 {
        return Err(Error::HorizonMismatch(x_small.horizon(), 1.0));
    }
    if x_small.drift() != 0.0 || x_small.x0() != 0.0 {
        return Err(Error::Precondition(
            "small-jump path must be driftless and start at 0".into(),
        ));
    }
    if let Some(j) = x_small
        .jumps()
        .iter()
        .find(|j| j.size.abs() > q.eps * (1.0 + UNIT_SLACK))
    {
        return Err(Error::Precondition(format!(
            "small-jump path has a jump of size {} above eps = {}",
            j.size, q.eps
        )));
    }
    let x1 = inverse_rescale(x_small, q.eps, q.alpha)?;
    discretize_y(&build_y(&x1)?, q)
}

/// `A ε^{−α} ln 5 + A ε^{−α} (α+β) |ln ε|`.
pub fn log_card_small(q: &SmallJumpQuantizer) -> f64 {
    let n = q.max_steps();
    n * 5f64.ln() + n * (q.alpha + q.beta) * q.eps.ln().abs()
}

/// Monte Carlo estimate of `𝔼σ₀` and the resulting `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AEstimate {
    pub a: f64,
    pub mean_sigma: f64,
    pub std_err: f64,
    pub safety: f64,
    pub n_samples: usize,
}

/// `A = 2 / 𝔼σ₀ × 2` with `σ₀` the first time the unit-level small-jump
/// process moves by `½`.
pub fn estimate_a(params: &StableParams, n_samples: usize, seed: u64) -> Result<AEstimate> {
    estimate_a_with(params, n_samples, seed, 2.0, 1e-4)
}

/// [`estimate_a`] with an explicit safety factor and jump truncation `η₁`.
///
/// Between jumps the path is constant, so `σ₀` is the arrival time of the
/// first jump that takes the running sum to `|x| ≥ ½`; jumps in `(η₁, 1]`
/// arrive at rate `G(η₁) − G(1)`.
pub fn estimate_a_with(
    params: &StableParams,
    n_samples: usize,
    seed: u64,
    safety: f64,
    eta1: f64,
) -> Result<AEstimate> {
    params.validate()?;
    if n_samples < 100 {
        return Err(invalid("n_samples", format!("need at least 100, got {n_samples}")));
    }
    if !(safety >= 1.0) {
        return Err(invalid("safety", "must be >= 1"));
    }
    if !(eta1 > 0.0 && eta1 < 1.0) {
        return Err(invalid("eta1", "must lie in (0, 1)"));
    }
    let rate = params.intensity_above(eta1)? - params.intensity_above(1.0)?;
    let wait = Exp::new(rate).map_err(|e| invalid("eta1", e.to_string()))?;
    let a = params.alpha;
    let (lo_pow, hi_pow) = (eta1.powf(-a), 1.0);
    let p_up = params.d1 / (params.d1 + params.d2);
    let mut rng = task_rng(seed, domain::SIGMA_ESTIMATE, 0);
    let sigmas: Vec<f64> = (0..n_samples)
        .map(|_| {
            let (mut t, mut x) = (0.0, 0.0f64);
            loop {
                t += wait.sample(&mut rng);
                let u: f64 = rng.random();
                let m = (hi_pow + u * (lo_pow - hi_pow)).powf(-1.0 / a).min(1.0);
                x += if rng.random::<f64>() < p_up { m } else { -m };
                if x.abs() >= 0.5 {
                    return t;
                }
            }
        })
        .collect();
    let (mean, var) = mean_var(&sigmas);
    Ok(AEstimate {
        a: 2.0 / mean * safety,
        mean_sigma: mean,
        std_err: (var / n_samples as f64).sqrt(),
        safety,
        n_samples,
    })
}
