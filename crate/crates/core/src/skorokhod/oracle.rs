//! Brute-force references for the J-distance, used to cross-check the DP.
//!
//! Two independent routes:
//! - `exact`: enumerate every lattice path of level pairs (unit and diagonal
//!   steps). For a fixed path the cheapest time budget is the largest
//!   per-jump requirement (a jump placed between `g`'s jumps `k` and `k+1`
//!   needs `τ ≥ s_k − t` and `τ ≥ t − s_{k+1}`; a diagonal step needs
//!   `τ ≥ |t − s|`), so `ρ` is the minimum over paths of
//!   `max(level deviation, time requirement)`.
//! - `grid_upper`: enumerate strictly increasing relocations of `f`'s jump
//!   times on a grid (plus `g`'s jump times) and evaluate the deviation with
//!   `sup_diff`. This is an upper bound that converges as the grid refines.

use crate::cadlag::StepFunction;
use crate::error::{invalid, Error, Result};

pub const BRUTE_FORCE_JUMP_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForce {
    pub grid_upper: f64,
    pub exact: f64,
}

pub fn brute_force_distance(f: &StepFunction, g: &StepFunction, grid_step: f64) -> Result<BruteForce> {
    f.same_horizon(g)?;
    let total = f.jump_count() + g.jump_count();
    if total > BRUTE_FORCE_JUMP_LIMIT {
        return Err(Error::TooManyJumps {
            limit: BRUTE_FORCE_JUMP_LIMIT,
            got: total,
        });
    }
    if f.drift() != 0.0 || g.drift() != 0.0 {
        return Err(Error::Precondition("brute-force oracle needs zero drift".into()));
    }
    if !(grid_step > 0.0) {
        return Err(invalid("grid_step", "must be > 0"));
    }
    Ok(BruteForce {
        grid_upper: grid_search(f, g, grid_step)?,
        exact: path_enumeration(f, g),
    })
}

fn path_enumeration(f: &StepFunction, g: &StepFunction) -> f64 {
    struct Ctx {
        t: Vec<f64>,
        s: Vec<f64>,
        fl: Vec<f64>,
        gl: Vec<f64>,
        horizon: f64,
        best: f64,
    }

    fn walk(c: &mut Ctx, i: usize, k: usize, level_dev: f64, time_req: f64) {
        let level_dev = level_dev.max((c.fl[i] - c.gl[k]).abs());
        let cost = level_dev.max(time_req);
        if cost >= c.best {
            return;
        }
        let (m, n) = (c.t.len(), c.s.len());
        if i == m && k == n {
            c.best = cost;
            return;
        }
        if k < n {
            walk(c, i, k + 1, level_dev, time_req);
        }
        if i < m {
            let ti = c.t[i];
            let lo = if k == 0 { 0.0 } else { c.s[k - 1] };
            let hi = if k == n { c.horizon } else { c.s[k] };
            let need = (lo - ti).max(ti - hi).max(0.0);
            walk(c, i + 1, k, level_dev, time_req.max(need));
            if k < n {
                let need = (ti - c.s[k]).abs();
                walk(c, i + 1, k + 1, level_dev, time_req.max(need));
            }
        }
    }

    let mut ctx = Ctx {
        t: f.jump_times().collect(),
        s: g.jump_times().collect(),
        fl: f.levels(),
        gl: g.levels(),
        horizon: f.horizon(),
        best: f64::INFINITY,
    };
    walk(&mut ctx, 0, 0, 0.0, 0.0);
    ctx.best
}

fn grid_search(f: &StepFunction, g: &StepFunction, h: f64) -> Result<f64> {
    let identity = f.sup_diff(g)?;
    let radius = identity.min(1.0);
    let horizon = f.horizon();
    let sizes: Vec<f64> = f.jumps().iter().map(|j| j.size).collect();

    // candidates per jump, nearest first
    let candidates: Vec<Vec<f64>> = f
        .jump_times()
        .map(|t| {
            let steps = (radius / h).floor() as i64;
            let mut c: Vec<f64> = (-steps..=steps)
                .map(|k| t + k as f64 * h)
                .chain(g.jump_times().filter(|s| (s - t).abs() <= radius))
                .filter(|&x| x > 0.0 && x < horizon)
                .collect();
            c.sort_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()));
            c.dedup();
            c
        })
        .collect();
    let originals: Vec<f64> = f.jump_times().collect();

    let mut best = identity;
    let mut placed = Vec::with_capacity(originals.len());
    descend(f, g, &originals, &sizes, &candidates, &mut placed, 0.0, &mut best)?;
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    f: &StepFunction,
    g: &StepFunction,
    originals: &[f64],
    sizes: &[f64],
    candidates: &[Vec<f64>],
    placed: &mut Vec<f64>,
    time_dev: f64,
    best: &mut f64,
) -> Result<()> {
    let i = placed.len();
    if i == originals.len() {
        let moved = StepFunction::new(
            f.horizon(),
            0.0,
            f.x0(),
            placed.iter().copied().zip(sizes.iter().copied()).collect(),
        )?;
        let cost = time_dev.max(moved.sup_diff(g)?);
        if cost < *best {
            *best = cost;
        }
        return Ok(());
    }
    for &c in &candidates[i] {
        let dev = (c - originals[i]).abs();
        if dev >= *best {
            break;
        }
        if placed.last().is_some_and(|&p| c <= p) {
            continue;
        }
        placed.push(c);
        descend(f, g, originals, sizes, candidates, placed, time_dev.max(dev), best)?;
        placed.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(jumps: &[(f64, f64)]) -> StepFunction {
        StepFunction::new(1.0, 0.0, 0.0, jumps.to_vec()).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let f = step(&[(0.4, 1.0), (0.7, 2.0)]);
        let b = brute_force_distance(&f, &f, 0.01).unwrap();
        assert_eq!(b.exact, 0.0);
        assert_eq!(b.grid_upper, 0.0);
    }

    #[test]
    fn single_shift() {
        let f = step(&[(0.5, 1.0)]);
        let g = step(&[(0.55, 1.0)]);
        let b = brute_force_distance(&f, &g, 0.01).unwrap();
        assert!((b.exact - 0.05).abs() < 1e-12);
        assert!((b.grid_upper - 0.05).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_only() {
        let f = step(&[(0.5, 1.0)]);
        let g = step(&[(0.5, 1.3)]);
        let b = brute_force_distance(&f, &g, 0.01).unwrap();
        assert!((b.exact - 0.3).abs() < 1e-12);
        assert!((b.grid_upper - 0.3).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let many = step(&[(0.1, 1.0), (0.2, 1.0), (0.3, 1.0), (0.4, 1.0)]);
        assert!(matches!(
            brute_force_distance(&many, &many, 0.01),
            Err(Error::TooManyJumps { .. })
        ));
        let drifted = StepFunction::new(1.0, 1.0, 0.0, vec![]).unwrap();
        assert!(brute_force_distance(&drifted, &drifted, 0.01).is_err());
    }
}
