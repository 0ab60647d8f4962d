//! Property suites over all modules, shared by the `check` command and the
//! acceptance tests. Every suite is deterministic given its seed and
//! returns a report instead of panicking.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::entropy::{
    cover_from_adjacency, fit_scaling, lemma1_mc_check, lower_bound_curve, typical_set_stats, Adjacency,
};
use crate::error::{Error, Result};
use crate::levy::{sample_band, sample_large, sample_large_seeded, sample_pair, sample_small, StableParams};
use crate::net::{code_length_nats, estimate_a, quantize_path, PathQuantizer, QuantizeOutcome};
use crate::rng::{domain, task_rng};
use crate::skorokhod::{brute_force_distance, distance, within};
use crate::stats::{binomial_std_err, ks_critical, ks_two_sample, mean_var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
    pub seconds: f64,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({} cases, {:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.seconds,
            self.detail
        )
    }
}

fn report(name: &str, start: Instant, passed: bool, cases: usize, detail: String) -> CheckReport {
    CheckReport {
        name: name.into(),
        passed,
        cases,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rng(seed: u64, index: u64) -> ChaCha8Rng {
    task_rng(seed, domain::CHECKS, index)
}

fn random_size(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(0.05..2.0);
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

/// Up to `max_jumps` jumps at distinct times in `(0.01, 0.99)`.
pub fn random_step(rng: &mut ChaCha8Rng, max_jumps: usize, drift: f64) -> StepFunction {
    let n = rng.random_range(0..=max_jumps);
    let jumps: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.01..0.99), random_size(rng)))
        .collect();
    StepFunction::from_unsorted(1.0, drift, 0.0, jumps).expect("valid random step function")
}

/// Jitters every jump of `f` in time and size; keeps the jump count.
pub fn jitter(rng: &mut ChaCha8Rng, f: &StepFunction, dt: f64, dv: f64) -> StepFunction {
    let jumps: Vec<(f64, f64)> = f
        .jumps()
        .iter()
        .map(|j| {
            let t = (j.time + rng.random_range(-dt..=dt)).clamp(0.005, 0.995);
            let v = j.size + rng.random_range(-dv..=dv);
            (t, if v.abs() < 1e-3 { j.size } else { v })
        })
        .collect();
    StepFunction::from_unsorted(f.horizon(), f.drift(), f.x0(), jumps).expect("valid jittered step function")
}

/// Related or unrelated partner of `f`, half the time each.
fn partner(rng: &mut ChaCha8Rng, f: &StepFunction, max_jumps: usize) -> StepFunction {
    if rng.random::<bool>() {
        jitter(rng, f, 0.05, 0.2)
    } else {
        random_step(rng, max_jumps, f.drift())
    }
}

/// DP brackets against exhaustive path enumeration, `≤ 3` jumps each.
pub fn oracle_equivalence(seed: u64, pairs: usize, tol: f64) -> Result<CheckReport> {
    let start = Instant::now();
    let results: Vec<(f64, f64, f64)> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed, i);
            let f = random_step(&mut r, 3, 0.0);
            let g = partner(&mut r, &f, 3);
            let d = distance(&f, &g, tol)?;
            let b = brute_force_distance(&f, &g, 0.01)?;
            Ok((d.lower, d.upper, b.exact))
        })
        .collect::<Result<_>>()?;
    let slack = tol + 1e-9;
    let worst = results
        .iter()
        .map(|&(lo, hi, e)| (lo - e).max(e - hi).max(0.0))
        .fold(0.0, f64::max);
    let bad = results
        .iter()
        .filter(|&&(lo, hi, e)| e < lo - slack || e > hi + slack)
        .count();
    Ok(report(
        "metric oracle equivalence",
        start,
        bad == 0,
        pairs,
        format!("{bad} disagreements, worst bracket miss {worst:.2e} (allowed {slack:.2e})"),
    ))
}

/// Symmetry (bracket overlap) and triangle inequality on `≤ 5`-jump triples.
pub fn metric_axioms(seed: u64, triples: usize, tol: f64) -> Result<CheckReport> {
    let start = Instant::now();
    let results: Vec<(bool, f64)> = (0..triples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed, 1_000_000 + i);
            let f = random_step(&mut r, 5, 0.0);
            let g = partner(&mut r, &f, 5);
            let h = partner(&mut r, &g, 5);
            let fg = distance(&f, &g, tol)?;
            let gf = distance(&g, &f, tol)?;
            let gh = distance(&g, &h, tol)?;
            let fh = distance(&f, &h, tol)?;
            let overlap = fg.lower.max(gf.lower) <= fg.upper.min(gf.upper) + 1e-12;
            let excess = fh.upper - (fg.upper + gh.upper + 2.0 * tol);
            Ok((overlap, excess))
        })
        .collect::<Result<_>>()?;
    let asym = results.iter().filter(|r| !r.0).count();
    let tri = results.iter().filter(|r| r.1 > 0.0).count();
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(report(
        "metric symmetry and triangle inequality",
        start,
        asym == 0 && tri == 0,
        triples,
        format!("{asym} asymmetric brackets, {tri} triangle violations, max excess {worst:.2e}"),
    ))
}

/// `ρ(x₁+x₂, y₁+y₂) ≤ ρ(x₁,y₁) + ‖x₂−y₂‖ + ω(y₂, 2ρ(x₁,y₁))` on brackets:
/// the left side's lower end against the right side at the upper end.
pub fn sum_inequality(seed: u64, quadruples: usize, tol: f64) -> Result<CheckReport> {
    let start = Instant::now();
    let excess: Vec<f64> = (0..quadruples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed, 2_000_000 + i);
            let x1 = random_step(&mut r, 4, 0.0);
            let y1 = partner(&mut r, &x1, 4);
            let x2 = random_step(&mut r, 4, 0.0);
            let y2 = if r.random::<bool>() {
                jitter(&mut r, &x2, 0.02, 0.1)
            } else {
                random_step(&mut r, 4, 0.0)
            };
            let lhs = distance(&x1.add(&x2)?, &y1.add(&y2)?, tol)?;
            let d1 = distance(&x1, &y1, tol)?;
            let rhs = d1.upper + x2.sup_diff(&y2)? + y2.oscillation(2.0 * d1.upper)?;
            Ok(lhs.lower - rhs)
        })
        .collect::<Result<_>>()?;
    let bad = excess.iter().filter(|&&e| e > 1e-9).count();
    let worst = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(report(
        "sum inequality for the J-distance",
        start,
        bad == 0,
        quadruples,
        format!("{bad} violations, max lhs - rhs {worst:.2e}"),
    ))
}

/// Every point of the max-norm cube of half-width `r/4(n+|a|)` around
/// `(v, t)` is within J-distance `r`.
pub fn cube_in_ball(seed: u64, cases: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let results: Vec<bool> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rg = rng(seed, 3_000_000 + i);
            let r = if i % 2 == 0 { 0.1 } else { 0.01 };
            let a = if (i / 2) % 2 == 0 { 0.0 } else { 1.0 };
            let n = rg.random_range(1..=8usize);
            let edge = r / (4.0 * (n as f64 + a));
            let corner = rg.random::<bool>();
            let (center, moved) = loop {
                let mut t: Vec<f64> = (0..n).map(|_| rg.random_range(0.0..1.0)).collect();
                t.sort_by(f64::total_cmp);
                let v: Vec<f64> = (0..n).map(|_| random_size(&mut rg)).collect();
                let mut d = || {
                    if corner {
                        if rg.random::<bool>() {
                            edge
                        } else {
                            -edge
                        }
                    } else {
                        rg.random_range(-edge..=edge)
                    }
                };
                let s: Vec<f64> = t.iter().map(|&x| x + d()).collect();
                let u: Vec<f64> = v.iter().map(|&x| x + d()).collect();
                let inside = |xs: &[f64]| xs.iter().all(|&x| x > 0.0 && x < 1.0) && xs.windows(2).all(|w| w[0] < w[1]);
                if !inside(&t) || !inside(&s) || u.iter().any(|x| x.abs() < 1e-6) {
                    continue;
                }
                let c = StepFunction::new(1.0, a, 0.0, t.into_iter().zip(v).collect());
                let m = StepFunction::new(1.0, a, 0.0, s.into_iter().zip(u).collect());
                break (c, m);
            };
            Ok(within(&center?, &moved?, r)?.is_yes())
        })
        .collect::<Result<_>>()?;
    let bad = results.iter().filter(|ok| !**ok).count();
    Ok(report(
        "cube inside the J-ball",
        start,
        bad == 0,
        cases,
        format!("{bad} perturbations not certified (r in {{0.1, 0.01}}, a in {{0, 1}}, n <= 8)"),
    ))
}

/// Mean and variance of `N_ε` at `α = ½`, `d₁ = d₂ = ½`, `ε = 0.01`.
pub fn poissonity(seed: u64, paths: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.5)?;
    let eps = 0.01;
    let g = params.intensity_above(eps)?;
    let counts: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| Ok(sample_large_seeded(&params, eps, seed, i)?.jump_count() as f64))
        .collect::<Result<_>>()?;
    let (mean, var) = mean_var(&counts);
    let band = 5.0 * (g / paths as f64).sqrt();
    Ok(report(
        "jump counts are Poisson(G(eps))",
        start,
        (mean - g).abs() <= band && (var - g).abs() <= band,
        paths,
        format!("G = {g:.3}, mean = {mean:.4}, variance = {var:.4}, band = {band:.4}"),
    ))
}

/// Two-sample KS between `X_ε(1)` and `ε X₁(ε^{−α})` (small jumps, same
/// relative truncation).
pub fn self_similarity(seed: u64, samples: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::new(0.5, 0.7, 0.3, 0.0)?;
    let (eps, eta): (f64, f64) = (0.05, 1e-5);
    let horizon = eps.powf(-params.alpha);
    let direct: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| Ok(sample_small(&params, eps, eta, &mut task_rng(seed, domain::SMALL_JUMPS, i))?.final_value()))
        .collect::<Result<_>>()?;
    let scaled: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = task_rng(seed, domain::UNIT_LEVEL, i);
            Ok(eps * sample_band(&params, eta / eps, 1.0, horizon, &mut r)?.final_value())
        })
        .collect::<Result<_>>()?;
    let d = ks_two_sample(&direct, &scaled);
    let crit = ks_critical(samples, samples, 0.01);
    Ok(report(
        "small-jump self-similarity",
        start,
        d < crit,
        samples,
        format!("KS = {d:.4}, 1% critical value = {crit:.4}"),
    ))
}

/// Membership fractions of the three typical sets at `ε = 0.02`, `δ = 0.2`.
pub fn typical_sets(seed: u64, paths: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.5)?;
    let (eps, delta) = (0.02, 0.2);
    let sample: Vec<StepFunction> = (0..paths as u64)
        .into_par_iter()
        .map(|i| sample_large_seeded(&params, eps, seed, i))
        .collect::<Result<_>>()?;
    let s = typical_set_stats(&sample, eps, delta, &params)?;
    Ok(report(
        "typical-set frequencies",
        start,
        !s.violation,
        paths,
        format!(
            "T_M {:.4}, T_K {:.4}, T_N {:.4}, all {:.4}, threshold {:.4}",
            s.fraction_m, s.fraction_k, s.fraction_n, s.fraction_all, s.threshold
        ),
    ))
}

/// Ball-mass bound `P(ρ(X, x) ≤ ε, N_ε = n) ≤ P(N_ε = n)nᵏ(2ε)ᵏ` at
/// `α = ½`, `ε = 0.05` over `configs` random `(x, n)`: synthetic paths with `k = K_ε(x) ∈ {0, …, 3}`, sampled paths, and the single jump
/// of size 0.2 at `n = round(G(ε))`.
pub fn ball_mass_configs(seed: u64, configs: usize, trials: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.5)?;
    let eps = 0.05;
    let g = params.intensity_above(eps)?;
    let mut lines = Vec::new();
    let mut bad = 0;
    for c in 0..configs as u64 {
        let mut r = rng(seed, 4_000_000 + c);
        let (x, n) = match c % 3 {
            0 if c == 0 => (
                StepFunction::new(1.0, 0.0, 0.0, vec![(r.random_range(0.1..0.9), 0.2)])?,
                g.round() as usize,
            ),
            0 | 1 => {
                let k = r.random_range(0..=3usize);
                let small = r.random_range(0..=4usize);
                let mut jumps = Vec::with_capacity(k + small);
                for j in 0..k + small {
                    let m = if j < k {
                        r.random_range(3.0 * eps + 1e-6..1.0)
                    } else {
                        r.random_range(eps + 1e-6..3.0 * eps)
                    };
                    let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                    jumps.push((r.random_range(0.01..0.99), sign * m));
                }
                let x = StepFunction::from_unsorted(1.0, 0.0, 0.0, jumps)?;
                let n = (g.round() as i64 + r.random_range(-3..=3)).max(0) as usize;
                (x, n)
            }
            _ => {
                let pair = sample_pair(&params, eps, eps / 20.0, seed ^ 0x5eed, c)?;
                let n = pair.large.jump_count();
                (pair.full()?, n)
            }
        };
        let out = lemma1_mc_check(&params, &x, eps, n, trials, seed.wrapping_add(c))?;
        if !out.holds {
            bad += 1;
        }
        lines.push(format!(
            "k={} n={} lhs={:.2e} rhs={:.2e}",
            out.k, out.n, out.lhs, out.rhs
        ));
    }
    Ok(report(
        "ball-mass Monte Carlo bound",
        start,
        bad == 0,
        configs,
        format!("{bad} violations beyond 3 s.e.; {}", lines.join("; ")),
    ))
}

/// Quantizes sampled paths at each `ε` and certifies every success at `6ε`.
pub fn end_to_end(seed: u64, eps_list: &[f64], paths: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.5)?;
    let (b, delta) = (1.5, 0.2);
    let a_cap = estimate_a(&params, 10_000, seed)?.a;
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let eta = params.default_eta(eps_min)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for (e_idx, &eps) in eps_list.iter().enumerate() {
        let q = PathQuantizer::new(&params, eps, b, delta, a_cap)?;
        let bound = q.log_cardinality();
        // (failed, flag index, certificate sound)
        let outcomes: Vec<(bool, Option<usize>, bool)> = (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let pair = sample_pair(&params, eps, eta, seed.wrapping_add(e_idx as u64), i)?;
                match quantize_path(&pair, &q)? {
                    QuantizeOutcome::Failed(f) => {
                        Ok((true, crate::net::FailureFlag::ALL.iter().position(|&x| x == f), true))
                    }
                    QuantizeOutcome::Element(e) => {
                        let x = pair.full()?;
                        let decision = q.certify(&x, &e)?;
                        let sound = match decision.certificate() {
                            Some(c) => {
                                let moved = c.relocated_step(&x)?;
                                moved.sup_diff(&e.path.step_part())? <= e.radius + 1e-12
                                    && c.time_deviation <= e.radius + 1e-12
                                    && c.value_deviation <= e.radius + 1e-12
                            }
                            None => true,
                        } && code_length_nats(&e.code, &q) <= bound;
                        Ok((!decision.is_yes(), None, sound))
                    }
                }
            })
            .collect::<Result<_>>()?;
        let failures = outcomes.iter().filter(|o| o.0).count();
        let unsound = outcomes.iter().filter(|o| !o.2).count();
        let mut flags = [0usize; 4];
        for o in &outcomes {
            if let Some(f) = o.1 {
                flags[f] += 1;
            }
        }
        let not_within = failures - flags.iter().sum::<usize>();
        let rate = failures as f64 / paths as f64;
        let limit = delta + 3.0 * binomial_std_err(delta, paths);
        let ok = rate <= limit && unsound == 0;
        passed &= ok;
        parts.push(format!(
            "eps={eps}: failure rate {rate:.4} (limit {limit:.4}; window {}, M {}, E1 {}, E2 {}, not within {not_within}), unsound certificates {unsound}",
            flags[0], flags[1], flags[2], flags[3]
        ));
    }
    Ok(report(
        "6 eps end-to-end certificate",
        start,
        passed,
        paths * eps_list.len(),
        parts.join("; "),
    ))
}

/// `(log_card_large + log_card_small)/(ε^{−α}|ln ε|)` across a grid.
pub fn log_card_scaling(seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.5)?;
    let a_cap = estimate_a(&params, 10_000, seed)?.a;
    let grid = [0.1, 0.05, 0.02, 0.01, 0.005];
    let ratios: Vec<f64> = grid
        .iter()
        .map(|&eps: &f64| {
            let q = PathQuantizer::new(&params, eps, 1.5, 0.2, a_cap)?;
            Ok(q.log_cardinality() / (eps.powf(-0.5) * eps.ln().abs()))
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    Ok(report(
        "log-cardinality scaling",
        start,
        hi / lo < 3.0,
        grid.len(),
        format!(
            "ratios {} (max/min {:.3}, A = {a_cap:.3})",
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>().join(", "),
            hi / lo
        ),
    ))
}

/// Lower curve against the two upper bounds wherever the curve applies.
pub fn sandwich(seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut checked = 0;
    let mut bad = Vec::new();
    for alpha in [0.5, 0.7] {
        let params = StableParams::symmetric(alpha)?;
        let a = estimate_a(&params, 10_000, seed)?.a;
        for k in 1..=32 {
            let eps = 10f64.powf(-(k as f64) / 4.0);
            let lower = match lower_bound_curve(eps, 0.2, &params) {
                Ok(v) => v,
                Err(Error::CurveNotApplicable { .. }) => continue,
                Err(e) => return Err(e),
            };
            let upper = PathQuantizer::new(&params, eps, 1.5, 0.2, a)?.log_cardinality();
            checked += 1;
            if lower > upper {
                bad.push(format!("alpha={alpha} eps={eps:.2e}: {lower:.3e} > {upper:.3e}"));
            }
        }
    }
    Ok(report(
        "lower curve below upper bounds",
        start,
        bad.is_empty() && checked > 0,
        checked,
        if bad.is_empty() {
            format!("{checked} applicable grid points, no crossing")
        } else {
            bad.join("; ")
        },
    ))
}

/// Greedy-cover growth at `α = 0.7`, `δ = 0.2` over `ε ∈ {0.4, …, 0.1}`.
/// Paths are truncated below `η = ε_min/10`.
pub fn entropy_growth(seed: u64, paths: usize) -> Result<CheckReport> {
    let start = Instant::now();
    let params = StableParams::symmetric(0.7)?;
    let grid = [0.4, 0.3, 0.2, 0.15, 0.1];
    let delta = 0.2;
    let eta = 0.1 * 0.1;
    let sample: Vec<StepFunction> = (0..paths as u64)
        .into_par_iter()
        .map(|i| sample_large(&params, eta, &mut task_rng(seed, domain::LARGE_JUMPS, i)))
        .collect::<Result<_>>()?;
    let estimates = grid
        .iter()
        .map(|&eps| cover_from_adjacency(&Adjacency::build(&sample, eps)?, delta, seed))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_scaling(&estimates, params.alpha)?;
    let increasing = fit.ln_n.windows(2).all(|w| w[1] > w[0]);
    let in_range = (fit.alpha_hat - params.alpha).abs() <= 0.25;
    Ok(report(
        "empirical entropy growth",
        start,
        increasing && in_range,
        paths,
        format!(
            "N = [{}], ln N strictly increasing: {increasing}, alpha_hat = {:.3} (need [0.45, 0.95]), slope = {:.3}",
            estimates
                .iter()
                .map(|e| e.n_centers.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            fit.alpha_hat,
            fit.slope
        ),
    ))
}

/// Sizes for [`property_suites`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSizes {
    pub oracle_pairs: usize,
    pub axiom_triples: usize,
    pub sum_quadruples: usize,
    pub cube_cases: usize,
    pub sampler_paths: usize,
    pub ball_mass_configs: usize,
    pub ball_mass_trials: usize,
    pub quantized_paths: usize,
}

impl SuiteSizes {
    pub fn full() -> Self {
        SuiteSizes {
            oracle_pairs: 200,
            axiom_triples: 500,
            sum_quadruples: 500,
            cube_cases: 200,
            sampler_paths: 10_000,
            ball_mass_configs: 20,
            ball_mass_trials: 100_000,
            quantized_paths: 1_000,
        }
    }

    pub fn quick() -> Self {
        SuiteSizes {
            oracle_pairs: 100,
            axiom_triples: 100,
            sum_quadruples: 100,
            cube_cases: 100,
            sampler_paths: 10_000,
            ball_mass_configs: 6,
            ball_mass_trials: 10_000,
            quantized_paths: 200,
        }
    }
}

/// Every invariant suite: metric, sampler, nets and entropy bounds.
pub fn property_suites(seed: u64, sizes: &SuiteSizes, tol: f64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        oracle_equivalence(seed, sizes.oracle_pairs, tol)?,
        metric_axioms(seed, sizes.axiom_triples, tol)?,
        sum_inequality(seed, sizes.sum_quadruples, tol)?,
        cube_in_ball(seed, sizes.cube_cases)?,
        poissonity(seed, sizes.sampler_paths)?,
        self_similarity(seed, sizes.sampler_paths)?,
        typical_sets(seed, sizes.sampler_paths)?,
        ball_mass_configs(seed, sizes.ball_mass_configs, sizes.ball_mass_trials)?,
        end_to_end(seed, &[0.05, 0.02], sizes.quantized_paths)?,
        log_card_scaling(seed)?,
        sandwich(seed)?,
    ])
}
