use std::collections::BTreeMap;
use std::path::Path;

use mmentropy::checks::{property_suites, CheckReport, SuiteSizes};
use mmentropy::entropy::{bootstrap, cover_from_adjacency, fit_scaling, lower_bound_curve, Adjacency, CoverEstimate};
use mmentropy::levy::{sample_large, sample_pair};
use mmentropy::net::{
    code_length_nats, estimate_a, quantize_path, FailureFlag, NetCode, PathQuantizer, QuantizeOutcome,
};
use mmentropy::rng::{domain, task_rng};
use mmentropy::skorokhod::DEFAULT_TOL;
use mmentropy::{distance, Decision, Error, PathPair, StableParams, StepFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub eps: f64,
    pub pair: PathPair,
}

#[derive(Serialize)]
struct SampleRow {
    eps: f64,
    eta: f64,
    paths: usize,
    mean_large_jumps: f64,
    mean_small_jumps: f64,
    intensity_above_eps: f64,
}

fn sample_pairs(params: &StableParams, cfg: &ExperimentConfig, eps: f64, eta: f64) -> CliResult<Vec<SampleRecord>> {
    let pairs = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            Ok(SampleRecord {
                index: i,
                eps,
                pair: sample_pair(params, eps, eta, cfg.seed, i)?,
            })
        })
        .collect::<mmentropy::Result<Vec<_>>>()?;
    Ok(pairs)
}

/// `paths.jsonl`: one `{index, eps, pair}` record per path and scale.
pub fn sample(cfg: &ExperimentConfig, out: &mut Artifacts) -> CliResult<()> {
    let params = cfg.params()?;
    let eta = cfg.sample_eta()?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let batch = sample_pairs(&params, cfg, eps, eta)?;
        let n = batch.len() as f64;
        rows.push(SampleRow {
            eps,
            eta,
            paths: batch.len(),
            mean_large_jumps: batch.iter().map(|r| r.pair.large.jump_count() as f64).sum::<f64>() / n,
            mean_small_jumps: batch.iter().map(|r| r.pair.small.jump_count() as f64).sum::<f64>() / n,
            intensity_above_eps: params.intensity_above(eps)?,
        });
        records.extend(batch);
    }
    out.jsonl("paths.jsonl", &records)?;
    out.csv("sample.csv", &rows)
}

fn read_path(out: &mut Artifacts, path: &Path) -> CliResult<StepFunction> {
    let text = out.read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Bracket and certificate for two dumped paths; also echoed to stdout.
pub fn distance_cmd(f: &Path, g: &Path, tol: f64, out: &mut Artifacts) -> CliResult<()> {
    if !(tol > 0.0) {
        return Err(CliError::validation(format!("--tol: must be > 0, got {tol}")));
    }
    let f = read_path(out, f)?;
    let g = read_path(out, g)?;
    let d = distance(&f, &g, tol)?;
    println!("{}", serde_json::to_string(&d).expect("result serializes"));
    out.json("distance.json", &d)
}

#[derive(Serialize)]
struct QuantizeRecord {
    index: u64,
    eps: f64,
    status: &'static str,
    flag: Option<&'static str>,
    code: Option<NetCode>,
    certified_radius: Option<f64>,
    within_check: Option<&'static str>,
    code_length_nats: Option<f64>,
}

#[derive(Serialize)]
struct QuantizeRow {
    eps: f64,
    paths: usize,
    successes: usize,
    failure_rate: f64,
    jump_count_out_of_window: usize,
    jump_size_exceeds_m: usize,
    too_many_steps: usize,
    short_step: usize,
    within_yes: usize,
    within_no: usize,
    within_indeterminate: usize,
    log_cardinality: f64,
    a: f64,
}

fn decision_name(d: &Decision) -> &'static str {
    match d {
        Decision::Yes(_) => "yes",
        Decision::No => "no",
        Decision::Indeterminate => "indeterminate",
    }
}

/// Pairs to quantize: from `input` (sampler records, or bare path dumps
/// split at every configured scale) or freshly sampled.
fn quantize_inputs(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    out: &mut Artifacts,
) -> CliResult<Vec<(u64, PathPair)>> {
    let Some(path) = input else {
        let params = cfg.params()?;
        let eta = cfg.sample_eta()?;
        let mut jobs = Vec::new();
        for &eps in &cfg.eps {
            jobs.extend(
                sample_pairs(&params, cfg, eps, eta)?
                    .into_iter()
                    .map(|r| (r.index, r.pair)),
            );
        }
        return Ok(jobs);
    };
    let text = out.read_input(path)?;
    let mut jobs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: serde_json::Error| CliError::validation(format!("{}:{}: {e}", path.display(), n + 1));
        let value: serde_json::Value = serde_json::from_str(line).map_err(at)?;
        if value.get("pair").is_some() {
            let r: SampleRecord = serde_json::from_value(value).map_err(at)?;
            jobs.push((r.index, r.pair));
        } else {
            let x: StepFunction = serde_json::from_value(value).map_err(at)?;
            for &eps in &cfg.eps {
                let (large, small) = x.split_at(eps);
                jobs.push((
                    n as u64,
                    PathPair {
                        large,
                        small,
                        split: eps,
                        truncation: 0.0,
                    },
                ));
            }
        }
    }
    Ok(jobs)
}

/// `quantize.jsonl` per path plus a per-scale summary `quantize.csv`.
pub fn quantize(cfg: &ExperimentConfig, input: Option<&Path>, out: &mut Artifacts) -> CliResult<()> {
    let params = cfg.params()?;
    let jobs = quantize_inputs(cfg, input, out)?;
    let a = estimate_a(&params, cfg.a_samples, cfg.seed)?.a;
    let mut quantizers = BTreeMap::new();
    for (_, pair) in &jobs {
        if let std::collections::btree_map::Entry::Vacant(v) = quantizers.entry(pair.split.to_bits()) {
            v.insert(PathQuantizer::new(&params, pair.split, cfg.b, cfg.delta, a)?);
        }
    }
    let records = jobs
        .par_iter()
        .map(
            |(index, pair)| -> mmentropy::Result<(QuantizeRecord, Option<Decision>)> {
                let q = &quantizers[&pair.split.to_bits()];
                let outcome = quantize_path(pair, q)?;
                Ok(match outcome {
                    QuantizeOutcome::Failed(flag) => (
                        QuantizeRecord {
                            index: *index,
                            eps: pair.split,
                            status: "failed",
                            flag: Some(flag.name()),
                            code: None,
                            certified_radius: None,
                            within_check: None,
                            code_length_nats: None,
                        },
                        None,
                    ),
                    QuantizeOutcome::Element(e) => {
                        let decision = q.certify(&pair.full()?, &e)?;
                        (
                            QuantizeRecord {
                                index: *index,
                                eps: pair.split,
                                status: "ok",
                                flag: None,
                                code_length_nats: Some(code_length_nats(&e.code, q)),
                                code: Some(e.code),
                                certified_radius: Some(e.radius),
                                within_check: Some(decision_name(&decision)),
                            },
                            Some(decision),
                        )
                    }
                })
            },
        )
        .collect::<mmentropy::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (bits, q) in &quantizers {
        let eps = f64::from_bits(*bits);
        let here: Vec<_> = records.iter().filter(|(r, _)| r.eps.to_bits() == *bits).collect();
        let flagged = |f: FailureFlag| here.iter().filter(|(r, _)| r.flag == Some(f.name())).count();
        let decided = |name: &str| here.iter().filter(|(r, _)| r.within_check == Some(name)).count();
        let successes = here.iter().filter(|(_, d)| d.is_some()).count();
        rows.push(QuantizeRow {
            eps,
            paths: here.len(),
            successes,
            failure_rate: 1.0 - successes as f64 / here.len() as f64,
            jump_count_out_of_window: flagged(FailureFlag::JumpCountOutOfWindow),
            jump_size_exceeds_m: flagged(FailureFlag::JumpSizeExceedsM),
            too_many_steps: flagged(FailureFlag::TooManySteps),
            short_step: flagged(FailureFlag::ShortStep),
            within_yes: decided("yes"),
            within_no: decided("no"),
            within_indeterminate: decided("indeterminate"),
            log_cardinality: q.log_cardinality(),
            a,
        });
    }
    let records: Vec<QuantizeRecord> = records.into_iter().map(|(r, _)| r).collect();
    out.jsonl("quantize.jsonl", &records)?;
    out.csv("quantize.csv", &rows)
}

#[derive(Serialize)]
struct BoundsRow {
    eps: f64,
    log_card_large: f64,
    log_card_small: f64,
    log_card_total: f64,
    normalized_total: f64,
    lower_bound: Option<f64>,
}

fn lower_or_none(eps: f64, delta: f64, params: &StableParams) -> CliResult<Option<f64>> {
    match lower_bound_curve(eps, delta, params) {
        Ok(v) => Ok(Some(v)),
        Err(Error::CurveNotApplicable { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn sorted_desc(eps: &[f64]) -> Vec<f64> {
    let mut e = eps.to_vec();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

/// Upper and lower log-cardinality bounds per scale.
pub fn netbounds(cfg: &ExperimentConfig, out: &mut Artifacts) -> CliResult<()> {
    let params = cfg.params()?;
    let a = estimate_a(&params, cfg.a_samples, cfg.seed)?.a;
    let mut rows = Vec::new();
    for eps in sorted_desc(&cfg.eps) {
        let q = PathQuantizer::new(&params, eps, cfg.b, cfg.delta, a)?;
        let large = mmentropy::net::log_card_large(&q.large);
        let small = mmentropy::net::log_card_small(&q.small);
        rows.push(BoundsRow {
            eps,
            log_card_large: large,
            log_card_small: small,
            log_card_total: large + small,
            normalized_total: (large + small) / (eps.powf(-cfg.alpha) * eps.ln().abs()),
            lower_bound: lower_or_none(eps, cfg.delta, &params)?,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.log_card_total)).collect();
    out.csv("netbounds.csv", &rows)?;
    out.dat("netbounds.dat", ["eps", "log_card_total"], &points)
}

/// Paths handed to the cover: full paths truncated at the cover level.
fn cover_sample(cfg: &ExperimentConfig) -> CliResult<Vec<StepFunction>> {
    let params = cfg.params()?;
    let eta = cfg.cover_eta();
    Ok((0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| sample_large(&params, eta, &mut task_rng(cfg.seed, domain::LARGE_JUMPS, i)))
        .collect::<mmentropy::Result<Vec<_>>>()?)
}

fn covers(cfg: &ExperimentConfig, paths: &[StepFunction]) -> CliResult<Vec<(CoverEstimate, Adjacency)>> {
    sorted_desc(&cfg.eps)
        .into_iter()
        .map(|eps| {
            let adj = Adjacency::build(paths, eps)?;
            Ok((cover_from_adjacency(&adj, cfg.delta, cfg.seed)?, adj))
        })
        .collect()
}

#[derive(Serialize)]
struct CoverRow {
    eps: f64,
    delta: f64,
    paths: usize,
    n_centers: usize,
    covered_fraction: f64,
    seed: u64,
    bootstrap_mean: f64,
    bootstrap_std: f64,
}

/// Greedy empirical covers with bootstrap spread, one row per scale.
pub fn cover(cfg: &ExperimentConfig, out: &mut Artifacts) -> CliResult<()> {
    let paths = cover_sample(cfg)?;
    let mut rows = Vec::new();
    for (est, adj) in covers(cfg, &paths)? {
        let boot = bootstrap(&adj, cfg.delta, cfg.seed)?;
        rows.push(CoverRow {
            eps: est.eps,
            delta: est.delta,
            paths: est.sample_size,
            n_centers: est.n_centers,
            covered_fraction: est.covered_fraction,
            seed: est.seed,
            bootstrap_mean: boot.mean,
            bootstrap_std: boot.std,
        });
    }
    out.csv("cover.csv", &rows)
}

#[derive(Serialize)]
struct ScalingRow {
    eps: f64,
    n_centers: usize,
    ln_n: f64,
    regressor: f64,
    fitted: f64,
    residual: f64,
    log_card_upper: f64,
    lower_bound: Option<f64>,
}

#[derive(Serialize)]
struct ScalingSummary {
    alpha: f64,
    slope: f64,
    intercept: f64,
    alpha_hat: f64,
    alpha_intercept: f64,
    paths: usize,
    cover_eta: f64,
}

/// Cover growth against `ε^{−α}|ln ε|`, the free-exponent fit, and both
/// bounds, as CSV, JSON and two plot-data files.
pub fn scaling(cfg: &ExperimentConfig, out: &mut Artifacts) -> CliResult<()> {
    let params = cfg.params()?;
    let paths = cover_sample(cfg)?;
    let estimates: Vec<CoverEstimate> = covers(cfg, &paths)?.into_iter().map(|(e, _)| e).collect();
    let fit = fit_scaling(&estimates, cfg.alpha)?;
    let a = estimate_a(&params, cfg.a_samples, cfg.seed)?.a;
    let mut rows = Vec::new();
    for (i, est) in estimates.iter().enumerate() {
        let q = PathQuantizer::new(&params, est.eps, cfg.b, cfg.delta, a)?;
        rows.push(ScalingRow {
            eps: est.eps,
            n_centers: est.n_centers,
            ln_n: fit.ln_n[i],
            regressor: fit.regressor[i],
            fitted: fit.intercept + fit.slope * fit.regressor[i],
            residual: fit.residuals[i],
            log_card_upper: q.log_cardinality(),
            lower_bound: lower_or_none(est.eps, cfg.delta, &params)?,
        });
    }
    let growth: Vec<(f64, f64)> = rows.iter().map(|r| (r.regressor, r.ln_n)).collect();
    let exponent: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (-r.eps.ln(), (r.ln_n / r.eps.ln().abs()).ln()))
        .collect();
    out.csv("scaling.csv", &rows)?;
    out.dat("scaling.dat", ["eps^-alpha*|ln_eps|", "ln_N"], &growth)?;
    out.dat("scaling_alpha.dat", ["-ln_eps", "ln(ln_N/|ln_eps|)"], &exponent)?;
    out.json(
        "scaling_fit.json",
        &ScalingSummary {
            alpha: cfg.alpha,
            slope: fit.slope,
            intercept: fit.intercept,
            alpha_hat: fit.alpha_hat,
            alpha_intercept: fit.alpha_intercept,
            paths: paths.len(),
            cover_eta: cfg.cover_eta(),
        },
    )
}

/// Runs every invariant suite; fails with the names of violated properties.
pub fn check(cfg: &ExperimentConfig, full: bool, out: &mut Artifacts) -> CliResult<()> {
    let sizes = if full { SuiteSizes::full() } else { SuiteSizes::quick() };
    let reports: Vec<CheckReport> = property_suites(cfg.seed, &sizes, DEFAULT_TOL)?;
    let mut text = String::new();
    for r in &reports {
        println!("{}", r.line());
        text.push_str(&r.line());
        text.push('\n');
    }
    out.write("check.txt", text.as_bytes())?;
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::PropertyFailure(failed))
    }
}
