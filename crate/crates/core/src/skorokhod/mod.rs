//! Skorokhod J-distance between step functions.
//!
//! `ρ(f, g) ≤ ε` holds iff the jump times of `f` can be moved by at most `ε`
//! each, keeping their order, so that the moved function stays within `ε` of
//! `g` in sup-norm. The piecewise-linear time change through the moved
//! instants realizes exactly that time deviation.
//!
//! Walking forward in time, the pair `(i, k)` = (jumps of `f` placed, jumps of
//! `g` passed) follows a monotone lattice path from `(0, 0)` to `(m, n)` with
//! unit steps and diagonal steps (an `f` jump landing exactly on a `g` jump).
//! Every visited pair needs `|F_i − G_k| ≤ ε`. [`within`] runs a dynamic
//! program over these pairs, keeping the earliest feasible placement of the
//! last moved jump per state; earlier is never worse for what follows.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};

pub use oracle::{brute_force_distance, BruteForce, BRUTE_FORCE_JUMP_LIMIT};

const TIME_SLACK: f64 = 1e-12;
const VALUE_SLACK: f64 = 1e-12;

/// Default bisection tolerance, relative to the horizon.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Witness for `ρ(f, g) ≤ ε`: where each jump of `f` was moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingCertificate {
    pub epsilon: f64,
    pub relocated_times: Vec<f64>,
    pub time_deviation: f64,
    pub value_deviation: f64,
}

impl MatchingCertificate {
    /// `f`'s step part with jumps moved to the certified times. Coincident
    /// moved jumps merge; a jump moved to time 0 is absorbed into the start.
    pub fn relocated_step(&self, f: &StepFunction) -> Result<StepFunction> {
        if self.relocated_times.len() != f.jump_count() {
            return Err(Error::Precondition(format!(
                "certificate has {} times for a path with {} jumps",
                self.relocated_times.len(),
                f.jump_count()
            )));
        }
        let mut x0 = f.x0();
        let mut jumps = Vec::with_capacity(f.jump_count());
        for (&t, j) in self.relocated_times.iter().zip(f.jumps()) {
            if t <= 0.0 {
                x0 += j.size;
            } else {
                jumps.push((t, j.size));
            }
        }
        StepFunction::from_unsorted(f.horizon(), 0.0, x0, jumps)
    }

    fn issue(f: &StepFunction, g: &StepFunction, epsilon: f64, times: Vec<f64>) -> Result<Self> {
        let time_deviation = times
            .iter()
            .zip(f.jump_times())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let mut cert = MatchingCertificate {
            epsilon,
            relocated_times: times,
            time_deviation,
            value_deviation: 0.0,
        };
        let moved = cert.relocated_step(f)?;
        cert.value_deviation = moved.sup_diff(&g.step_part())? + f.drift().abs() * time_deviation;
        Ok(cert)
    }
}

/// Outcome of the closed question `ρ(f, g) ≤ ε`.
///
/// `Indeterminate` only occurs for a nonzero common drift, where the engine
/// decides the step parts under a sufficient and a necessary value budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Yes(MatchingCertificate),
    No,
    Indeterminate,
}

impl Decision {
    pub fn is_yes(&self) -> bool {
        matches!(self, Decision::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Decision::No)
    }

    pub fn certificate(&self) -> Option<&MatchingCertificate> {
        match self {
            Decision::Yes(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub lower: f64,
    pub upper: f64,
    pub certificate: MatchingCertificate,
    pub tolerance: f64,
}

fn check_pair(f: &StepFunction, g: &StepFunction) -> Result<()> {
    f.same_horizon(g)?;
    if f.drift() != g.drift() {
        return Err(Error::DriftMismatch(f.drift(), g.drift()));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Start,
    /// `g` jumps next.
    Right,
    /// `f` jumps next, strictly inside a `g` segment (weakly, in the closure).
    Down,
    /// `f` and `g` jump together.
    Diag,
}

/// Earliest-placement DP on the step parts. Returns the moved times of `f`'s
/// jumps if some order-preserving relocation within `time_budget` keeps every
/// visited level pair within `value_budget`.
fn relocate(f: &StepFunction, g: &StepFunction, time_budget: f64, value_budget: f64) -> Option<Vec<f64>> {
    let t: Vec<f64> = f.jump_times().collect();
    let s: Vec<f64> = g.jump_times().collect();
    let (m, n) = (t.len(), s.len());
    let fl = f.levels();
    let gl = g.levels();
    let horizon = f.horizon();

    let tslack = TIME_SLACK * horizon.max(1.0);
    let scale = fl.iter().chain(gl.iter()).fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let tb = time_budget + tslack;
    let vb = value_budget + VALUE_SLACK * scale;
    let ok = |i: usize, k: usize| (fl[i] - gl[k]).abs() <= vb;

    if !ok(0, 0) || !ok(m, n) {
        return None;
    }

    let w = n + 1;
    let mut best = vec![f64::INFINITY; (m + 1) * w];
    let mut pred = vec![Step::Start; (m + 1) * w];
    best[0] = 0.0;

    let relax = |best: &mut [f64], pred: &mut [Step], idx: usize, p: f64, step: Step| {
        if p < best[idx] {
            best[idx] = p;
            pred[idx] = step;
        }
    };

    for i in 0..=m {
        for k in 0..=n {
            let p = best[i * w + k];
            if !p.is_finite() {
                continue;
            }
            if k < n && p <= s[k] + tslack && ok(i, k + 1) {
                relax(&mut best, &mut pred, i * w + k + 1, p, Step::Right);
            }
            if i < m {
                let ti = t[i];
                let col_start = if k == 0 { 0.0 } else { s[k - 1] };
                let col_end = if k == n { horizon } else { s[k] };
                // place with the exact budget; the slack only widens the test
                let lo = p.max(ti - time_budget).max(col_start);
                let hi = (ti + time_budget).min(col_end);
                if lo <= hi + tslack && ok(i + 1, k) {
                    relax(&mut best, &mut pred, (i + 1) * w + k, lo, Step::Down);
                }
                if k < n {
                    let sk = s[k];
                    if sk + tslack >= p && (sk - ti).abs() <= tb && ok(i + 1, k + 1) {
                        relax(&mut best, &mut pred, (i + 1) * w + k + 1, sk, Step::Diag);
                    }
                }
            }
        }
    }

    if !best[m * w + n].is_finite() {
        return None;
    }
    let mut times = vec![0.0; m];
    let (mut i, mut k) = (m, n);
    while i > 0 || k > 0 {
        let idx = i * w + k;
        match pred[idx] {
            Step::Right => k -= 1,
            Step::Down => {
                times[i - 1] = best[idx];
                i -= 1;
            }
            Step::Diag => {
                times[i - 1] = best[idx];
                i -= 1;
                k -= 1;
            }
            Step::Start => unreachable!("reachable state without predecessor"),
        }
    }
    Some(times)
}

/// Decides `ρ(f, g) ≤ ε` for paths sharing horizon and drift.
///
/// With drift `a = 0` the answer is exact. Otherwise the drift contributes
/// `a·(t − θ(t))` to the deviation: a relocation with time deviation `τ` and
/// step deviation `V` proves YES when `V + |a|τ ≤ ε`, and NO is reported only
/// when the step parts fail even at value budget `ε(1 + |a|)`.
pub fn within(f: &StepFunction, g: &StepFunction, eps: f64) -> Result<Decision> {
    check_pair(f, g)?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid("eps", format!("must be finite and >= 0, got {eps}")));
    }
    let (fs, gs) = (f.step_part(), g.step_part());
    let a = f.drift().abs();
    if a == 0.0 {
        return Ok(match relocate(&fs, &gs, eps, eps) {
            Some(times) => Decision::Yes(MatchingCertificate::issue(f, g, eps, times)?),
            None => Decision::No,
        });
    }

    // The minimal time budget of any lattice path is 0 or some |t_i - s_j|.
    let mut taus: Vec<f64> = vec![0.0, eps];
    for t in fs.jump_times() {
        for s in gs.jump_times() {
            let d = (t - s).abs();
            if d <= eps {
                taus.push(d);
            }
        }
    }
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    for tau in taus {
        let budget = eps - a * tau;
        if budget < 0.0 {
            break;
        }
        if let Some(times) = relocate(&fs, &gs, tau, budget) {
            return Ok(Decision::Yes(MatchingCertificate::issue(f, g, eps, times)?));
        }
    }
    if relocate(&fs, &gs, eps, eps * (1.0 + a)).is_none() {
        Ok(Decision::No)
    } else {
        Ok(Decision::Indeterminate)
    }
}

/// Brackets `ρ(f, g)` by bisection over `[0, ‖f − g‖_∞]`.
///
/// For `a = 0` the bracket width is at most `tol`. With drift the bracket is
/// additionally widened by the indeterminate band of [`within`].
pub fn distance(f: &StepFunction, g: &StepFunction, tol: f64) -> Result<DistanceResult> {
    check_pair(f, g)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    if let Decision::Yes(certificate) = within(f, g, 0.0)? {
        return Ok(DistanceResult {
            lower: 0.0,
            upper: 0.0,
            certificate,
            tolerance: tol,
        });
    }
    // identity time change: always admissible
    let mut hi = f.sup_diff(g)?;
    let mut cert = loop {
        match within(f, g, hi)? {
            Decision::Yes(c) => break c,
            _ => hi = hi * (1.0 + 1e-9) + 1e-15,
        }
    };

    let mut lo = 0.0;
    let mut no_lo = 0.0;
    let mut no_hi = hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match within(f, g, mid)? {
            Decision::Yes(c) => {
                hi = mid;
                no_hi = no_hi.min(mid);
                cert = c;
            }
            Decision::No => {
                lo = mid;
                no_lo = mid;
            }
            Decision::Indeterminate => {
                // YES lies above; NO (if any) lies below
                lo = mid;
                no_hi = no_hi.min(mid);
            }
        }
    }
    // with drift, refine the largest certified NO separately
    while no_hi - no_lo > tol {
        let mid = 0.5 * (no_lo + no_hi);
        if within(f, g, mid)?.is_no() {
            no_lo = mid;
        } else {
            no_hi = mid;
        }
    }
    Ok(DistanceResult {
        lower: no_lo,
        upper: hi,
        certificate: cert,
        tolerance: tol,
    })
}
