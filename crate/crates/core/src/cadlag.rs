//! Càdlàg step functions with a linear drift.
//!
//! A [`StepFunction`] on `[0, T]` is `x0 + a·t + Σ_{tᵢ ≤ t} vᵢ`: finitely many
//! jumps at strictly increasing times in the open interval `(0, T)`. This is
//! the only path representation in the crate; sampled processes, net elements
//! and rescaled paths are all step functions.
//!
//! All operations are exact up to floating-point rounding. The difference of
//! two such functions is piecewise linear between the merged breakpoints, so
//! suprema are attained at breakpoints (right values or left limits) or at
//! the endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Window gaps within this relative distance of `Δ` count as exactly `Δ` in
/// [`StepFunction::oscillation`]. Grid-aligned jump times sit on the boundary
/// of the window constraint and must not flip on rounding.
pub const OSCILLATION_SLACK: f64 = 1e-12;

/// Horizons closer than this (relative) are considered equal.
const HORIZON_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// Piecewise-constant càdlàg path with optional linear drift.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathDump", into = "PathDump")]
pub struct StepFunction {
    horizon: f64,
    drift: f64,
    x0: f64,
    jumps: Vec<Jump>,
}

/// JSON layout `{T, a, x0, jumps: [[t, v], ...]}`.
#[derive(Serialize, Deserialize)]
struct PathDump {
    #[serde(rename = "T")]
    horizon: f64,
    a: f64,
    x0: f64,
    jumps: Vec<[f64; 2]>,
}

impl TryFrom<PathDump> for StepFunction {
    type Error = Error;

    fn try_from(d: PathDump) -> Result<Self> {
        StepFunction::new(d.horizon, d.a, d.x0, d.jumps.into_iter().map(|[t, v]| (t, v)).collect())
    }
}

impl From<StepFunction> for PathDump {
    fn from(f: StepFunction) -> Self {
        PathDump {
            horizon: f.horizon,
            a: f.drift,
            x0: f.x0,
            jumps: f.jumps.iter().map(|j| [j.time, j.size]).collect(),
        }
    }
}

impl StepFunction {
    /// Builds a path from jumps already sorted by strictly increasing time.
    pub fn new(horizon: f64, drift: f64, x0: f64, jumps: Vec<(f64, f64)>) -> Result<Self> {
        let f = StepFunction {
            horizon,
            drift,
            x0,
            jumps: jumps.into_iter().map(|(time, size)| Jump { time, size }).collect(),
        };
        f.validate()?;
        Ok(f)
    }

    /// Builds a path from jumps in any order. Jumps sharing a time are merged
    /// into one jump of the summed size; merged sizes equal to zero are dropped.
    pub fn from_unsorted<I>(horizon: f64, drift: f64, x0: f64, jumps: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw: Vec<Jump> = jumps.into_iter().map(|(time, size)| Jump { time, size }).collect();
        raw.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut merged: Vec<Jump> = Vec::with_capacity(raw.len());
        for j in raw {
            match merged.last_mut() {
                Some(last) if last.time == j.time => last.size += j.size,
                _ => merged.push(j),
            }
        }
        merged.retain(|j| j.size != 0.0);
        let f = StepFunction {
            horizon,
            drift,
            x0,
            jumps: merged,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(horizon: f64, value: f64) -> Result<Self> {
        Self::new(horizon, 0.0, value, Vec::new())
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::constant(horizon, 0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidPath(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !self.drift.is_finite() || !self.x0.is_finite() {
            return Err(Error::InvalidPath("drift and x0 must be finite".into()));
        }
        let mut prev = 0.0;
        for (i, j) in self.jumps.iter().enumerate() {
            if !j.time.is_finite() || j.time <= prev || j.time >= self.horizon {
                return Err(Error::InvalidPath(format!(
                    "jump {i} at time {} breaks strict ordering inside (0, {})",
                    j.time, self.horizon
                )));
            }
            if !j.size.is_finite() || j.size == 0.0 {
                return Err(Error::InvalidPath(format!("jump {i} has invalid size {}", j.size)));
            }
            prev = j.time;
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn jump_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.jumps.iter().map(|j| j.time)
    }

    /// Step levels without drift: `levels[k]` holds on `[t_k, t_{k+1})`, with `t_0 = 0`.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut cur = self.x0;
        out.push(cur);
        for j in &self.jumps {
            cur += j.size;
            out.push(cur);
        }
        out
    }

    /// Same jumps and start, zero drift.
    pub fn step_part(&self) -> StepFunction {
        StepFunction {
            drift: 0.0,
            ..self.clone()
        }
    }

    pub fn with_drift(&self, drift: f64) -> Result<StepFunction> {
        let f = StepFunction { drift, ..self.clone() };
        f.validate()?;
        Ok(f)
    }

    /// Affine change of coordinates `t ↦ f(t / time_scale) · value_scale` on
    /// the horizon `T · time_scale`. Jump counts are preserved.
    pub fn rescaled(&self, value_scale: f64, time_scale: f64) -> Result<StepFunction> {
        if !(value_scale.is_finite() && value_scale > 0.0) {
            return Err(invalid("value_scale", "must be positive"));
        }
        if !(time_scale.is_finite() && time_scale > 0.0) {
            return Err(invalid("time_scale", "must be positive"));
        }
        let f = StepFunction {
            horizon: self.horizon * time_scale,
            drift: self.drift * value_scale / time_scale,
            x0: self.x0 * value_scale,
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    time: j.time * time_scale,
                    size: j.size * value_scale,
                })
                .collect(),
        };
        f.validate()?;
        Ok(f)
    }

    /// Splits into `(big, small)`: jumps with `|v| > level` go to `big`, which
    /// keeps the drift and start value; the rest form a driftless path from 0.
    pub fn split_at(&self, level: f64) -> (StepFunction, StepFunction) {
        let (big, small): (Vec<Jump>, Vec<Jump>) = self.jumps.iter().partition(|j| j.size.abs() > level);
        (
            StepFunction {
                horizon: self.horizon,
                drift: self.drift,
                x0: self.x0,
                jumps: big,
            },
            StepFunction {
                horizon: self.horizon,
                drift: 0.0,
                x0: 0.0,
                jumps: small,
            },
        )
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfDomain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    pub(crate) fn same_horizon(&self, other: &StepFunction) -> Result<()> {
        let (a, b) = (self.horizon, other.horizon);
        if (a - b).abs() > HORIZON_RTOL * a.max(b) {
            return Err(Error::HorizonMismatch(a, b));
        }
        Ok(())
    }

    /// Right-continuous evaluation: a jump at `t` is included.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let idx = self.jumps.partition_point(|j| j.time <= t);
        Ok(self.x0 + self.drift * t + self.jumps[..idx].iter().map(|j| j.size).sum::<f64>())
    }

    /// Left limit `f(t−)`; equals `f(0)` at `t = 0`.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let idx = self.jumps.partition_point(|j| j.time < t);
        Ok(self.x0 + self.drift * t + self.jumps[..idx].iter().map(|j| j.size).sum::<f64>())
    }

    /// Pointwise sum. Coincident jump times merge; zero merged jumps vanish.
    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.same_horizon(other)?;
        let mut merged = Vec::with_capacity(self.jumps.len() + other.jumps.len());
        let (f, g) = (&self.jumps, &other.jumps);
        let (mut i, mut j) = (0, 0);
        while i < f.len() || j < g.len() {
            let take_f = match (f.get(i), g.get(j)) {
                (Some(a), Some(b)) => a.time <= b.time,
                (Some(_), None) => true,
                _ => false,
            };
            let jump = if take_f {
                i += 1;
                f[i - 1]
            } else {
                j += 1;
                g[j - 1]
            };
            match merged.last_mut() {
                Some(Jump { time, size }) if *time == jump.time => *size += jump.size,
                _ => merged.push(jump),
            }
        }
        merged.retain(|j| j.size != 0.0);
        let out = StepFunction {
            horizon: self.horizon,
            drift: self.drift + other.drift,
            x0: self.x0 + other.x0,
            jumps: merged,
        };
        out.validate()?;
        Ok(out)
    }

    /// Exact `‖f − g‖_∞` over `[0, T]`.
    pub fn sup_diff(&self, other: &StepFunction) -> Result<f64> {
        self.same_horizon(other)?;
        let da = self.drift - other.drift;
        let (f, g) = (&self.jumps, &other.jumps);
        let mut cur = self.x0 - other.x0;
        let mut best = cur.abs();
        let (mut i, mut j) = (0, 0);
        while i < f.len() || j < g.len() {
            let t = match (f.get(i), g.get(j)) {
                (Some(a), Some(b)) => a.time.min(b.time),
                (Some(a), None) => a.time,
                (None, Some(b)) => b.time,
                (None, None) => unreachable!(),
            };
            // left limit, then the right value after all jumps at t
            best = best.max((cur + da * t).abs());
            while i < f.len() && f[i].time == t {
                cur += f[i].size;
                i += 1;
            }
            while j < g.len() && g[j].time == t {
                cur -= g[j].size;
                j += 1;
            }
            best = best.max((cur + da * t).abs());
        }
        Ok(best.max((cur + da * self.horizon).abs()))
    }

    /// Oscillation modulus `ω(f, Δ) = sup_{|s−t| ≤ Δ} |f(s) − f(t)|`.
    ///
    /// Levels `L_i` on `[b_i, b_{i+1})` and `L_j` on `[b_j, b_{j+1})`, `i < j`,
    /// are simultaneously reachable iff `b_j − b_{i+1} < Δ`; over a reachable
    /// pair the increment is `L_j − L_i + a·d` with `d` ranging over an interval,
    /// so its supremum sits at one of the two ends.
    pub fn oscillation(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(invalid("delta", format!("must be >= 0, got {delta}")));
        }
        let n = self.jumps.len();
        let mut bounds = Vec::with_capacity(n + 2);
        bounds.push(0.0);
        bounds.extend(self.jump_times());
        bounds.push(self.horizon);
        let levels = self.levels();
        let slack = OSCILLATION_SLACK * self.horizon.max(1.0);
        let a = self.drift;

        let mut best: f64 = 0.0;
        for i in 0..=n {
            let seg = bounds[i + 1] - bounds[i];
            best = best.max((a * delta.min(seg)).abs());
            for j in i + 1..=n {
                let gap = bounds[j] - bounds[i + 1];
                if gap >= delta - slack {
                    break;
                }
                let c = levels[j] - levels[i];
                let d_hi = delta.min(bounds[j + 1] - bounds[i]);
                best = best.max((c + a * gap).abs()).max((c + a * d_hi).abs());
            }
        }
        Ok(best)
    }

    /// Number of jumps with `|v| > threshold` (strict).
    pub fn count_jumps_above(&self, threshold: f64) -> usize {
        self.jumps.iter().filter(|j| j.size.abs() > threshold).count()
    }

    pub fn final_value(&self) -> f64 {
        self.x0 + self.drift * self.horizon + self.jumps.iter().map(|j| j.size).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(jumps: &[(f64, f64)]) -> StepFunction {
        StepFunction::new(1.0, 0.0, 0.0, jumps.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn evaluate_is_right_continuous() {
        let f = step(&[(0.5, 1.0)]);
        assert_eq!(f.evaluate(0.5).unwrap(), 1.0);
        assert_eq!(f.evaluate(0.49).unwrap(), 0.0);
        assert_eq!(f.left_limit(0.5).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_with_drift() {
        let f = StepFunction::new(1.0, 2.0, 1.0, vec![(0.25, -1.0)]).unwrap();
        assert!(close(f.evaluate(0.5).unwrap(), 1.0));
    }

    #[test]
    fn evaluate_outside_horizon_fails() {
        let f = step(&[(0.5, 1.0)]);
        assert!(matches!(f.evaluate(1.5), Err(Error::OutOfDomain { .. })));
        assert!(f.evaluate(-0.1).is_err());
    }

    #[test]
    fn construction_rejects_bad_jumps() {
        assert!(StepFunction::new(1.0, 0.0, 0.0, vec![(0.5, 0.0)]).is_err());
        assert!(StepFunction::new(1.0, 0.0, 0.0, vec![(0.5, 1.0), (0.5, 1.0)]).is_err());
        assert!(StepFunction::new(1.0, 0.0, 0.0, vec![(0.0, 1.0)]).is_err());
        assert!(StepFunction::new(1.0, 0.0, 0.0, vec![(1.0, 1.0)]).is_err());
        assert!(StepFunction::new(0.0, 0.0, 0.0, vec![]).is_err());
    }

    #[test]
    fn add_identity_cancellation_and_merge() {
        let f = StepFunction::new(1.0, 0.3, 0.1, vec![(0.3, 1.0)]).unwrap();
        assert_eq!(f.add(&StepFunction::zero(1.0).unwrap()).unwrap(), f);

        let g = step(&[(0.3, 1.0)]).add(&step(&[(0.3, -1.0)])).unwrap();
        assert_eq!(g.jump_count(), 0);

        let h = step(&[(0.3, 1.0)]).add(&step(&[(0.6, 2.0)])).unwrap();
        assert_eq!(h, step(&[(0.3, 1.0), (0.6, 2.0)]));
    }

    #[test]
    fn add_rejects_horizon_mismatch() {
        let f = step(&[]);
        let g = StepFunction::zero(2.0).unwrap();
        assert!(matches!(f.add(&g), Err(Error::HorizonMismatch(..))));
        assert!(f.sup_diff(&g).is_err());
    }

    #[test]
    fn sup_diff_examples() {
        let f = step(&[(0.5, 1.0)]);
        assert_eq!(f.sup_diff(&f).unwrap(), 0.0);
        assert_eq!(f.sup_diff(&step(&[])).unwrap(), 1.0);
        // t against the indicator of [0.5, 1]: worst at t -> 0.5-
        let lin = StepFunction::new(1.0, 1.0, 0.0, vec![]).unwrap();
        assert!(close(lin.sup_diff(&f).unwrap(), 0.5));
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(StepFunction::constant(1.0, 3.0).unwrap().oscillation(0.3).unwrap(), 0.0);
        assert_eq!(step(&[(0.5, 1.0)]).oscillation(0.1).unwrap(), 1.0);
        let lin = StepFunction::new(1.0, 1.0, 0.0, vec![]).unwrap();
        assert!(close(lin.oscillation(0.1).unwrap(), 0.1));
        assert!(step(&[]).oscillation(-1.0).is_err());
    }

    #[test]
    fn oscillation_window_boundary_is_exclusive() {
        // two jumps exactly Δ apart: both never fit strictly inside one window
        let f = step(&[(0.2, 1.0), (0.4, 1.0)]);
        assert_eq!(f.oscillation(0.2).unwrap(), 1.0);
        assert_eq!(f.oscillation(0.2000001).unwrap(), 2.0);
    }

    #[test]
    fn counters_use_strict_inequality() {
        let f = step(&[(0.2, 0.5), (0.7, -2.0)]);
        assert_eq!(f.count_jumps_above(1.0), 1);
        assert_eq!(f.count_jumps_above(1e300), 0);

        let eps = 0.01;
        let g = step(&[(0.1, 1.1 * eps), (0.2, -3.1 * eps), (0.3, 5.1 * eps)]);
        assert_eq!(g.count_jumps_above(eps), 3);
        assert_eq!(g.count_jumps_above(3.0 * eps), 2);
        assert_eq!(g.count_jumps_above(5.0 * eps), 1);
        assert_eq!(step(&[(0.1, 0.5)]).count_jumps_above(0.5), 0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = StepFunction::new(2.0, -0.1, 0.3, vec![(0.1 + 0.2, 1.0 / 3.0), (1.7, -2e-17)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"T\":2.0"));
        let back: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn json_rejects_invalid_path() {
        let bad = r#"{"T":1.0,"a":0.0,"x0":0.0,"jumps":[[0.5,1.0],[0.4,1.0]]}"#;
        assert!(serde_json::from_str::<StepFunction>(bad).is_err());
    }

    #[test]
    fn split_and_rescale() {
        let f = StepFunction::new(4.0, 0.0, 0.0, vec![(2.0, 3.0)]).unwrap();
        let g = f.rescaled(0.25, 0.5).unwrap();
        assert_eq!(g, StepFunction::new(2.0, 0.0, 0.0, vec![(1.0, 0.75)]).unwrap());

        let h = step(&[(0.1, 0.5), (0.2, 0.01), (0.3, -0.02)]);
        let (big, small) = h.split_at(0.015);
        assert_eq!(big.jump_count(), 2);
        assert_eq!(small.jump_count(), 1);
        assert_eq!(big.add(&small).unwrap(), h);
    }
}
