//! Cube-grid quantizer for the large-jump part.
//!
//! A path with `n` jumps is a point `(v, t)` of `ℝⁿ × Eₙ`. Every point within
//! max-norm distance `Δ_ε = ε^B / 4(G(ε)(1+β_δ) + |a|)` of `(v, t)` is within
//! J-distance `ε^B` of it, so snapping each coordinate to a cell center at
//! most `Δ_ε` away is a certified quantization. Value cells have width at
//! most `2Δ_ε` on `[−M, M]`, time cells at most `Δ_ε` on `[0, T]`.
//!
//! Jumps whose times share a cell are spread symmetrically around the cell
//! center by `w_t / 2c` (for `c` jumps in the cell), which keeps the snapped
//! times strictly increasing and within `3w_t/4 < Δ_ε` of the originals.

use serde::{Deserialize, Serialize};

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};
use crate::levy::StableParams;
use crate::stats::PoissonTable;

use super::{FailureFlag, NetCode, NetElement, QuantizeOutcome};

const WINDOW_STEP: f64 = 1e-3;
/// Cell indices stay exact in `f64` below this count.
const MAX_CELLS: f64 = 4_503_599_627_370_496.0;

/// Per-jump `(value cell, time cell)` indices in time order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LargeCode {
    pub cells: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeJumpQuantizer {
    pub eps: f64,
    pub b: f64,
    pub delta: f64,
    pub intensity: f64,
    pub beta_delta: f64,
    pub m: f64,
    pub edge: f64,
    pub n_min: u64,
    pub n_max: u64,
    pub drift: f64,
    pub horizon: f64,
    value_cells: f64,
    time_cells: f64,
}

impl LargeJumpQuantizer {
    /// Window and `M` chosen so that each spills less than `δ/2`.
    pub fn new(params: &StableParams, eps: f64, b: f64, delta: f64) -> Result<Self> {
        let beta_delta = choose_window(eps, delta, params)?;
        let m = choose_m(params, eps, delta)?;
        Self::from_parts(eps, b, delta, params.intensity_above(eps)?, beta_delta, m, params.drift)
    }

    pub fn from_parts(
        eps: f64,
        b: f64,
        delta: f64,
        intensity: f64,
        beta_delta: f64,
        m: f64,
        drift: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("eps", format!("must lie in (0, 1), got {eps}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("B", format!("must be positive, got {b}")));
        }
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(invalid("intensity", "must be positive"));
        }
        if !(beta_delta > 0.0) {
            return Err(invalid("beta_delta", "must be positive"));
        }
        if !(m >= 1.0 && m.is_finite()) {
            return Err(invalid("M", format!("must be >= 1, got {m}")));
        }
        if !drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        let edge = eps.powf(b) / (4.0 * (intensity * (1.0 + beta_delta) + drift.abs()));
        let n_min = ((1.0 - beta_delta) * intensity).ceil().max(0.0) as u64;
        let n_max = ((1.0 + beta_delta) * intensity).floor() as u64;
        if n_min > n_max {
            return Err(invalid("beta_delta", "window contains no integer"));
        }
        let horizon = 1.0;
        let mut value_cells = (m / edge).ceil();
        if value_cells % 2.0 == 1.0 {
            value_cells += 1.0;
        }
        let time_cells = (horizon / edge).ceil();
        Ok(LargeJumpQuantizer {
            eps,
            b,
            delta,
            intensity,
            beta_delta,
            m,
            edge,
            n_min,
            n_max,
            drift,
            horizon,
            value_cells,
            time_cells,
        })
    }

    pub fn value_cells(&self) -> f64 {
        self.value_cells
    }

    pub fn time_cells(&self) -> f64 {
        self.time_cells
    }

    /// Whether codes can be formed: the bounds remain valid on any grid,
    /// but indices must be exact integers.
    fn check_indexable(&self) -> Result<()> {
        if self.value_cells > MAX_CELLS || self.time_cells > MAX_CELLS {
            return Err(Error::Precondition(format!(
                "grid of {:e} x {:e} cells is too fine to index",
                self.value_cells, self.time_cells
            )));
        }
        Ok(())
    }

    fn value_width(&self) -> f64 {
        2.0 * self.m / self.value_cells
    }

    fn time_width(&self) -> f64 {
        self.horizon / self.time_cells
    }

    /// Half-integer multiples of the width, never zero.
    fn value_center(&self, cell: i64) -> f64 {
        (cell as f64 - self.value_cells / 2.0) * self.value_width() + 0.5 * self.value_width()
    }

    fn value_cell(&self, v: f64) -> i64 {
        let x = (v + self.m) / self.value_width() - 0.5;
        round_half_even(x).clamp(0, self.value_cells as i64 - 1)
    }

    fn time_cell(&self, t: f64) -> i64 {
        let x = t / self.time_width() - 0.5;
        round_half_even(x).clamp(0, self.time_cells as i64 - 1)
    }

    /// Element encoded by `code`.
    pub fn decode(&self, code: &LargeCode) -> Result<StepFunction> {
        self.check_indexable()?;
        let w = self.time_width();
        let (nv, nt) = (self.value_cells as i64, self.time_cells as i64);
        let mut jumps = Vec::with_capacity(code.cells.len());
        let mut start = 0;
        while start < code.cells.len() {
            let cell = code.cells[start][1];
            let end = start + code.cells[start..].iter().take_while(|c| c[1] == cell).count();
            if end < code.cells.len() && code.cells[end][1] < cell {
                return Err(invalid("code", "time cells must be nondecreasing"));
            }
            let count = (end - start) as f64;
            let spacing = w / (2.0 * count);
            for (rank, c) in code.cells[start..end].iter().enumerate() {
                if !(0..nv).contains(&c[0]) || !(0..nt).contains(&c[1]) {
                    return Err(invalid("code", format!("cell {c:?} outside the grid")));
                }
                let offset = (rank as f64 - (count - 1.0) / 2.0) * spacing;
                jumps.push(((cell as f64 + 0.5) * w + offset, self.value_center(c[0])));
            }
            start = end;
        }
        StepFunction::new(self.horizon, self.drift, 0.0, jumps)
    }

    /// `ln(window size) + n ln(value cells · time cells)`.
    pub fn code_length_nats(&self, code: &LargeCode) -> f64 {
        let window = (self.n_max - self.n_min + 1) as f64;
        window.ln() + code.cells.len() as f64 * (self.value_cells.ln() + self.time_cells.ln())
    }
}

fn round_half_even(x: f64) -> i64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 && (r as i64) % 2 != 0 {
        (r - x.signum()) as i64
    } else {
        r as i64
    }
}

/// Smallest `β_δ` on a `10⁻³` grid with Poisson`(G(ε))` mass outside
/// `[(1−β_δ)G(ε), (1+β_δ)G(ε)]` below `δ/2`.
pub fn choose_window(eps: f64, delta: f64, params: &StableParams) -> Result<f64> {
    check_delta(delta)?;
    let g = params.intensity_above(eps)?;
    let table = PoissonTable::new(g);
    let mut k = 1u64;
    loop {
        let beta = k as f64 * WINDOW_STEP;
        let lo = ((1.0 - beta) * g).ceil() as i64;
        let hi = ((1.0 + beta) * g).floor() as i64;
        let outside = table.cdf(lo - 1) + (1.0 - table.cdf(hi));
        if hi >= lo.max(0) && outside < delta / 2.0 {
            return Ok(beta);
        }
        k += 1;
    }
}

/// Smallest `M ≥ 1` with `P(some |jump| > M on [0, 1]) = 1 − e^{−G(M)} < δ/2`.
pub fn choose_m(params: &StableParams, _eps: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    params.validate()?;
    let budget = -(1.0 - delta / 2.0).ln();
    let threshold = (params.unit_intensity() / budget).powf(1.0 / params.alpha);
    if threshold < 1.0 {
        Ok(1.0)
    } else {
        Ok(threshold * (1.0 + 1e-9))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Snaps `x` to the grid. The element is within J-distance `ε^B` of `x`.
pub fn quantize_large(x: &StepFunction, q: &LargeJumpQuantizer) -> Result<QuantizeOutcome> {
    if x.drift() != q.drift {
        return Err(Error::DriftMismatch(x.drift(), q.drift));
    }
    if x.x0() != 0.0 {
        return Err(Error::Precondition(format!(
            "large-jump path must start at 0, got {}",
            x.x0()
        )));
    }
    if (x.horizon() - q.horizon).abs() > 1e-12 {
        return Err(Error::HorizonMismatch(x.horizon(), q.horizon));
    }
    let n = x.jump_count() as u64;
    if n < q.n_min || n > q.n_max {
        return Ok(QuantizeOutcome::Failed(FailureFlag::JumpCountOutOfWindow));
    }
    if x.jumps().iter().any(|j| j.size.abs() > q.m) {
        return Ok(QuantizeOutcome::Failed(FailureFlag::JumpSizeExceedsM));
    }
    q.check_indexable()?;
    let code = LargeCode {
        cells: x
            .jumps()
            .iter()
            .map(|j| [q.value_cell(j.size), q.time_cell(j.time)])
            .collect(),
    };
    Ok(QuantizeOutcome::Element(NetElement {
        path: q.decode(&code)?,
        code: NetCode::Large(code),
        radius: q.eps.powf(q.b),
    }))
}

/// `ln N₁ + ln G(ε) + (1+β_δ)G(ε)(ln(2M+2) + 2|ln Δ_ε|)` with
/// `N₁ = 2β_δ G(ε) + 1`, the number of admissible jump counts.
pub fn log_card_large(q: &LargeJumpQuantizer) -> f64 {
    let g = q.intensity;
    let n1 = 2.0 * q.beta_delta * g + 1.0;
    n1.ln() + g.ln() + (1.0 + q.beta_delta) * g * ((2.0 * q.m + 2.0).ln() + 2.0 * q.edge.ln().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skorokhod::within;

    fn sym(alpha: f64) -> StableParams {
        StableParams::symmetric(alpha).unwrap()
    }

    /// Poisson pmf by the recurrence `p(n) = p(n−1) λ/n`.
    fn outside_mass(lambda: f64, lo: i64, hi: i64) -> f64 {
        let mut p = (-lambda).exp();
        let mut inside = 0.0;
        for n in 0..=hi {
            if n >= lo {
                inside += p;
            }
            p *= lambda / (n + 1) as f64;
        }
        1.0 - inside
    }

    fn params_with_g(g_eps: f64, eps: f64, alpha: f64) -> StableParams {
        // d1 + d2 = α G(ε) ε^α
        let d = alpha * g_eps * eps.powf(alpha) / 2.0;
        StableParams::new(alpha, d, d, 0.0).unwrap()
    }

    #[test]
    fn window_for_poisson_twenty() {
        let params = params_with_g(20.0, 0.1, 0.5);
        assert!((params.intensity_above(0.1).unwrap() - 20.0).abs() < 1e-9);
        let beta = choose_window(0.1, 0.2, &params).unwrap();
        let spill = |b: f64| {
            outside_mass(
                20.0,
                ((1.0 - b) * 20.0).ceil() as i64,
                ((1.0 + b) * 20.0).floor() as i64,
            )
        };
        assert!(spill(beta) < 0.1);
        assert!(spill(beta - WINDOW_STEP) >= 0.1);
        assert!(beta > 0.3 && beta < 0.45, "beta = {beta}");
    }

    #[test]
    fn window_shrinks_as_delta_grows() {
        let params = params_with_g(20.0, 0.1, 0.5);
        let wide = choose_window(0.1, 0.05, &params).unwrap();
        let narrow = choose_window(0.1, 0.9, &params).unwrap();
        let narrowest = choose_window(0.1, 0.999, &params).unwrap();
        assert!(wide > narrow && narrow >= narrowest);
        // mass within ±3 of the mode of Poisson(20) first exceeds ½
        assert!(narrowest <= 0.15);
    }

    #[test]
    fn jump_cap_example() {
        // G(1) = 2, α = ½, δ = 0.2: M = (2 / ln(1/0.9))²
        let params = StableParams::new(0.5, 0.5, 0.5, 0.0).unwrap();
        let m = choose_m(&params, 0.1, 0.2).unwrap();
        let expected = (2.0 / (1.0f64 / 0.9).ln()).powi(2);
        assert!((m - expected).abs() / expected < 1e-8, "M = {m}");
        assert!((m - 360.3).abs() < 0.1);
        assert!(1.0 - (-2.0 * m.powf(-0.5)).exp() < 0.1);
        assert!(choose_m(&params, 0.1, 0.5).unwrap() < m);
        assert!(choose_window(0.1, 1.0, &params).is_err());
    }

    fn quantizer(n_hint: f64) -> LargeJumpQuantizer {
        LargeJumpQuantizer::from_parts(0.1, 1.5, 0.2, n_hint, 0.5, 10.0, 0.0).unwrap()
    }

    #[test]
    fn centers_are_fixed_points() {
        let q = quantizer(2.0);
        let half = q.value_cells() as i64 / 2;
        let code = LargeCode {
            cells: vec![[half + 3, 10], [half - 7, 250]],
        };
        let center = q.decode(&code).unwrap();
        let out = quantize_large(&center, &q).unwrap();
        let e = out.element().unwrap();
        assert_eq!(e.path, center);
        assert_eq!(e.code, NetCode::Large(code));
        assert_eq!(e.radius, 0.1f64.powf(1.5));
    }

    #[test]
    fn half_edge_displacement_is_within_radius() {
        let q = quantizer(2.0);
        let half = q.value_cells() as i64 / 2;
        let code = LargeCode {
            cells: vec![[half + 5, 40], [half - 5, 150], [half + 9, 300]],
        };
        let center = q.decode(&code).unwrap();
        for frac in [0.5, 0.999] {
            for sign in [-1.0, 1.0] {
                let d = sign * frac * q.edge;
                let moved = StepFunction::new(
                    1.0,
                    0.0,
                    0.0,
                    center.jumps().iter().map(|j| (j.time + d, j.size - d)).collect(),
                )
                .unwrap();
                assert!(within(&moved, &center, q.eps.powf(q.b)).unwrap().is_yes());
            }
        }
    }

    #[test]
    fn flags() {
        let q = quantizer(2.0);
        assert_eq!((q.n_min, q.n_max), (1, 3));
        let too_many = StepFunction::new(1.0, 0.0, 0.0, vec![(0.1, 1.0), (0.2, 1.0), (0.3, 1.0), (0.4, 1.0)]).unwrap();
        assert_eq!(
            quantize_large(&too_many, &q).unwrap().flag(),
            Some(FailureFlag::JumpCountOutOfWindow)
        );
        let none = StepFunction::zero(1.0).unwrap();
        assert_eq!(
            quantize_large(&none, &q).unwrap().flag(),
            Some(FailureFlag::JumpCountOutOfWindow)
        );
        let huge = StepFunction::new(1.0, 0.0, 0.0, vec![(0.5, -11.0)]).unwrap();
        assert_eq!(
            quantize_large(&huge, &q).unwrap().flag(),
            Some(FailureFlag::JumpSizeExceedsM)
        );
        let drifted = StepFunction::new(1.0, 0.5, 0.0, vec![(0.5, 1.0)]).unwrap();
        assert!(quantize_large(&drifted, &q).is_err());
    }

    #[test]
    fn coincident_cells_are_spread_in_order() {
        let q = quantizer(2.0);
        let w = 1.0 / q.time_cells();
        let t = 0.5 * w + 7.0 * w;
        let x = StepFunction::new(1.0, 0.0, 0.0, vec![(t - 0.3 * w, 2.0), (t, -1.0), (t + 0.2 * w, 0.7)]).unwrap();
        let e = quantize_large(&x, &q).unwrap().into_element().unwrap();
        assert_eq!(e.path.jump_count(), 3);
        for (a, b) in x.jumps().iter().zip(e.path.jumps()) {
            assert!((a.time - b.time).abs() < q.edge);
            assert!((a.size - b.size).abs() <= q.edge);
        }
        assert!(within(&x, &e.path, e.radius).unwrap().is_yes());
    }

    #[test]
    fn drift_is_kept() {
        let q = LargeJumpQuantizer::from_parts(0.1, 1.5, 0.2, 2.0, 0.5, 10.0, 1.0).unwrap();
        let x = StepFunction::new(1.0, 1.0, 0.0, vec![(0.31, 1.3), (0.77, -2.2)]).unwrap();
        let e = quantize_large(&x, &q).unwrap().into_element().unwrap();
        assert_eq!(e.path.drift(), 1.0);
        assert!(within(&x, &e.path, e.radius).unwrap().is_yes());
    }

    #[test]
    fn cell_counts_fit_the_cube_count() {
        let q = quantizer(20.0);
        let per_jump = q.value_cells() * q.time_cells();
        assert!(per_jump <= (2.0 * q.m + 2.0) / (q.edge * q.edge));
        assert!(q.value_width() <= 2.0 * q.edge && q.time_width() <= q.edge);
    }

    #[test]
    fn fine_grids_keep_bounds_but_refuse_codes() {
        let params = sym(0.5);
        let q = LargeJumpQuantizer::new(&params, 1e-8, 1.5, 0.2).unwrap();
        assert!(q.value_cells() > MAX_CELLS);
        assert!(log_card_large(&q).is_finite());
        let x = StepFunction::new(1.0, 0.0, 0.0, vec![(0.5, 1.0)]).unwrap();
        let tiny_window = LargeJumpQuantizer { n_min: 1, ..q };
        assert!(quantize_large(&x, &tiny_window).is_err());
    }

    #[test]
    fn round_half_even_ties() {
        assert_eq!(round_half_even(0.5), 0);
        assert_eq!(round_half_even(1.5), 2);
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(-0.5), 0);
        assert_eq!(round_half_even(2.4), 2);
        assert_eq!(round_half_even(2.6), 3);
    }

    #[test]
    fn log_card_grows_with_b_and_scales_like_entropy_rate() {
        let params = sym(0.5);
        let at = |eps: f64, b: f64| log_card_large(&LargeJumpQuantizer::new(&params, eps, b, 0.2).unwrap());
        assert!(at(0.05, 2.0) > at(0.05, 1.5));
        let ratios: Vec<f64> = [0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&e: &f64| at(e, 1.5) / (e.powf(-0.5) * e.ln().abs()))
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi / lo < 3.0, "{ratios:?}");
    }
}
