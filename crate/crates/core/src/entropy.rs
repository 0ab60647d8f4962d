//! Empirical mm-entropy: greedy covering of sampled paths, the counting
//! lower-bound curve, typical-set frequencies, the ball-mass Monte Carlo check
//! and scaling regressions against `ε^{−α}|ln ε|`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};
use crate::levy::{sample_large, sample_small, StableParams};
use crate::rng::{domain, task_rng};
use crate::skorokhod::within;
use crate::stats::{binomial_std_err, least_squares, mean_var, poisson_pmf};

pub const BOOTSTRAP_RESAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverEstimate {
    pub eps: f64,
    pub delta: f64,
    pub n_centers: usize,
    pub covered_fraction: f64,
    pub sample_size: usize,
    pub seed: u64,
    pub method: String,
    pub centers: Vec<usize>,
}

/// Symmetric `ρ ≤ ε` relation on a sample, as neighbor lists (self included).
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub eps: f64,
    neighbors: Vec<Vec<u32>>,
}

impl Adjacency {
    /// All pairs in parallel. Pairs violating the jump-count chain
    /// `N_ε(y) ≥ K_ε(x)` in either direction are rejected without running
    /// the matcher; undecided pairs (nonzero drift) count as not covered.
    pub fn build(paths: &[StepFunction], eps: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(eps > 0.0) {
            return Err(invalid("eps", format!("must be > 0, got {eps}")));
        }
        let first = &paths[0];
        for p in paths {
            if p.drift() != first.drift() {
                return Err(Error::DriftMismatch(p.drift(), first.drift()));
            }
        }
        let n_eps: Vec<usize> = paths.iter().map(|p| p.count_jumps_above(eps)).collect();
        let k_eps: Vec<usize> = paths.iter().map(|p| p.count_jumps_above(3.0 * eps)).collect();
        let n = paths.len();
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| -> Result<Vec<u32>> {
                let mut row = Vec::new();
                for j in i + 1..n {
                    if n_eps[j] < k_eps[i] || n_eps[i] < k_eps[j] {
                        continue;
                    }
                    if within(&paths[i], &paths[j], eps)?.is_yes() {
                        row.push(j as u32);
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut neighbors: Vec<Vec<u32>> = (0..n as u32).map(|i| vec![i]).collect();
        for (i, row) in rows.into_iter().enumerate() {
            for j in row {
                neighbors[i].push(j);
                neighbors[j as usize].push(i as u32);
            }
        }
        for row in &mut neighbors {
            row.sort_unstable();
        }
        Ok(Adjacency { eps, neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    /// Greedy cover of the multiset `sample` (indices into the adjacency,
    /// repeats allowed). Returns the chosen positions within `sample`.
    fn greedy(&self, sample: &[usize], delta: f64) -> (Vec<usize>, usize) {
        let m = sample.len();
        let target = ((1.0 - delta) * m as f64 - 1e-9).ceil().max(0.0) as usize;
        // multiplicity of each path in the sample, and one representative
        let mut weight = vec![0usize; self.len()];
        let mut first_pos = vec![usize::MAX; self.len()];
        for (pos, &i) in sample.iter().enumerate() {
            weight[i] += 1;
            first_pos[i] = first_pos[i].min(pos);
        }
        let mut covered = vec![false; self.len()];
        let mut covered_count = 0;
        let mut centers = Vec::new();
        while covered_count < target {
            let mut best: Option<(usize, usize)> = None;
            for (pos, &i) in sample.iter().enumerate() {
                if first_pos[i] != pos {
                    continue;
                }
                let gain: usize = self.neighbors[i]
                    .iter()
                    .filter(|&&j| !covered[j as usize])
                    .map(|&j| weight[j as usize])
                    .sum();
                if best.map_or(true, |(_, g)| gain > g) {
                    best = Some((pos, gain));
                }
            }
            let Some((pos, gain)) = best else { break };
            if gain == 0 {
                break;
            }
            centers.push(pos);
            for &j in &self.neighbors[sample[pos]] {
                if !covered[j as usize] {
                    covered[j as usize] = true;
                    covered_count += weight[j as usize];
                }
            }
        }
        (centers, covered_count)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Greedy maximum coverage with centers restricted to the sample: pick the
/// path whose `ε`-ball holds the most uncovered paths (ties to the lowest
/// index) until at least `(1 − δ)N` paths are covered.
pub fn empirical_cover(paths: &[StepFunction], eps: f64, delta: f64) -> Result<CoverEstimate> {
    check_delta(delta)?;
    let adj = Adjacency::build(paths, eps)?;
    cover_from_adjacency(&adj, delta, 0)
}

/// [`empirical_cover`] on a precomputed adjacency; `seed` is recorded only.
pub fn cover_from_adjacency(adj: &Adjacency, delta: f64, seed: u64) -> Result<CoverEstimate> {
    check_delta(delta)?;
    if adj.is_empty() {
        return Err(Error::EmptySample);
    }
    let sample: Vec<usize> = (0..adj.len()).collect();
    let (centers, covered) = adj.greedy(&sample, delta);
    Ok(CoverEstimate {
        eps: adj.eps,
        delta,
        n_centers: centers.len(),
        covered_fraction: covered as f64 / adj.len() as f64,
        sample_size: adj.len(),
        seed,
        method: "greedy".into(),
        centers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub resamples: Vec<usize>,
    pub mean: f64,
    pub std: f64,
}

/// Center counts on `BOOTSTRAP_RESAMPLES` resamples (with replacement) of
/// the sample, reusing the adjacency.
pub fn bootstrap(adj: &Adjacency, delta: f64, seed: u64) -> Result<BootstrapSummary> {
    check_delta(delta)?;
    if adj.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = adj.len();
    let resamples: Vec<usize> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, domain::BOOTSTRAP, r);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            adj.greedy(&sample, delta).0.len()
        })
        .collect();
    let xs: Vec<f64> = resamples.iter().map(|&c| c as f64).collect();
    let (mean, var) = mean_var(&xs);
    Ok(BootstrapSummary {
        resamples,
        mean,
        std: var.sqrt(),
    })
}

/// `μ_{M,ε} = G(5ε)`, the mean count of jumps above `5ε`.
pub fn mu_m(params: &StableParams, eps: f64) -> f64 {
    params.unit_intensity() * (5.0 * eps).powf(-params.alpha)
}

/// `m_ε (1−α) |ln ε|` with `m_ε = μ_{M,ε} − √(6μ_{M,ε}/δ)`; the `(1+o(1))`
/// factor is dropped.
pub fn lower_bound_curve(eps: f64, delta: f64, params: &StableParams) -> Result<f64> {
    params.validate()?;
    check_delta(delta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    let mu = mu_m(params, eps);
    let m_eps = mu - (6.0 * mu / delta).sqrt();
    if m_eps <= 0.0 {
        return Err(Error::CurveNotApplicable { eps, m_eps });
    }
    Ok(m_eps * (1.0 - params.alpha) * eps.ln().abs())
}

/// `c̃ = (μ_{N,ε} + √(6μ_{N,ε}/δ)) ε^{α}`: the cap on `N_ε` over `T_{N,ε}`
/// in units of `ε^{−α}`.
pub fn c_tilde(eps: f64, delta: f64, params: &StableParams) -> f64 {
    let mu = params.unit_intensity() * eps.powf(-params.alpha);
    (mu + (6.0 * mu / delta).sqrt()) * eps.powf(params.alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalSetStats {
    pub sample_size: usize,
    pub fraction_m: f64,
    pub fraction_k: f64,
    pub fraction_n: f64,
    pub fraction_all: f64,
    /// `1 − δ/6 − 3σ` with `σ` the binomial standard error at `1 − δ/6`.
    pub threshold: f64,
    pub violation: bool,
}

/// Membership in `T_{M,ε}`, `T_{K,ε}`, `T_{N,ε}`: jump counts above `5ε`,
/// `3ε`, `ε` within `√(6μ/δ)` of their Poisson means.
pub fn typical_set_stats(
    paths: &[StepFunction],
    eps: f64,
    delta: f64,
    params: &StableParams,
) -> Result<TypicalSetStats> {
    if paths.is_empty() {
        return Err(Error::EmptySample);
    }
    check_delta(delta)?;
    let member = |x: &StepFunction, level: f64| {
        let mu = params.unit_intensity() * level.powf(-params.alpha);
        (x.count_jumps_above(level) as f64 - mu).abs() <= (6.0 * mu / delta).sqrt()
    };
    let n = paths.len();
    let (mut m, mut k, mut nn, mut all) = (0usize, 0usize, 0usize, 0usize);
    for x in paths {
        let (a, b, c) = (member(x, 5.0 * eps), member(x, 3.0 * eps), member(x, eps));
        m += a as usize;
        k += b as usize;
        nn += c as usize;
        all += (a && b && c) as usize;
    }
    let frac = |c: usize| c as f64 / n as f64;
    let p = 1.0 - delta / 6.0;
    let threshold = p - 3.0 * binomial_std_err(p, n);
    let (fm, fk, fn_) = (frac(m), frac(k), frac(nn));
    Ok(TypicalSetStats {
        sample_size: n,
        fraction_m: fm,
        fraction_k: fk,
        fraction_n: fn_,
        fraction_all: frac(all),
        threshold,
        violation: fm < threshold || fk < threshold || fn_ < threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub hits: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub std_err: f64,
    pub holds: bool,
}

/// Frequency of `{ρ(X, x) ≤ ε, N_ε(X) = n}` against
/// `P(N_ε = n) nᵏ (2ε)ᵏ`, `k = K_ε(x)`. The small jumps of `X` are
/// truncated at `ε/20`.
pub fn lemma1_mc_check(
    params: &StableParams,
    x: &StepFunction,
    eps: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Lemma1Check> {
    params.validate()?;
    if trials < 10_000 {
        return Err(invalid("trials", format!("need at least 10^4, got {trials}")));
    }
    if x.drift() != params.drift {
        return Err(Error::DriftMismatch(x.drift(), params.drift));
    }
    if (x.horizon() - 1.0).abs() > 1e-12 {
        return Err(Error::HorizonMismatch(x.horizon(), 1.0));
    }
    let eta = eps / 20.0;
    let k = x.count_jumps_above(3.0 * eps);
    let hits: usize = (0..trials as u64)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let large = sample_large(params, eps, &mut task_rng(seed, domain::LARGE_JUMPS, i))?;
            if large.jump_count() != n {
                return Ok(0);
            }
            let small = sample_small(params, eps, eta, &mut task_rng(seed, domain::SMALL_JUMPS, i))?;
            Ok(within(&large.add(&small)?, x, eps)?.is_yes() as usize)
        })
        .sum::<Result<usize>>()?;
    let lhs = hits as f64 / trials as f64;
    let g = params.intensity_above(eps)?;
    let rhs = poisson_pmf(g, n as u64) * (n as f64).powi(k as i32) * (2.0 * eps).powi(k as i32);
    let std_err = binomial_std_err(lhs, trials).max(1.0 / trials as f64);
    Ok(Lemma1Check {
        k,
        n,
        trials,
        hits,
        lhs,
        rhs,
        std_err,
        holds: lhs <= rhs + 3.0 * std_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub eps: Vec<f64>,
    pub ln_n: Vec<f64>,
    /// `ε^{−α}|ln ε|`.
    pub regressor: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Slope of `ln(ln N̂/|ln ε|)` on `−ln ε`.
    pub alpha_hat: f64,
    pub alpha_intercept: f64,
    pub alpha_residuals: Vec<f64>,
}

/// Least squares of `ln N̂` on `ε^{−α}|ln ε|`, plus the free-exponent fit.
pub fn fit_scaling(estimates: &[CoverEstimate], alpha: f64) -> Result<ScalingFit> {
    let points: Vec<(f64, f64)> = estimates.iter().map(|e| (e.eps, e.n_centers as f64)).collect();
    fit_scaling_points(&points, alpha)
}

/// [`fit_scaling`] on raw `(ε, N̂)` pairs.
pub fn fit_scaling_points(points: &[(f64, f64)], alpha: f64) -> Result<ScalingFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 distinct eps, got {}",
            distinct.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.0 < 1.0)) {
        return Err(Error::DegenerateFit(format!("eps must lie in (0, 1), got {}", p.0)));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 >= 2.0)) {
        return Err(Error::DegenerateFit(format!(
            "N must be at least 2, got {} at eps = {}",
            p.1, p.0
        )));
    }
    let eps: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ln_n: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let regressor: Vec<f64> = eps.iter().map(|e| e.powf(-alpha) * e.ln().abs()).collect();
    let main = least_squares(&regressor, &ln_n)?;
    let x: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let y: Vec<f64> = eps.iter().zip(&ln_n).map(|(e, l)| (l / e.ln().abs()).ln()).collect();
    let free = least_squares(&x, &y)?;
    Ok(ScalingFit {
        eps,
        ln_n,
        regressor,
        slope: main.slope,
        intercept: main.intercept,
        residuals: main.residuals,
        alpha_hat: free.slope,
        alpha_intercept: free.intercept,
        alpha_residuals: free.residuals,
    })
}
