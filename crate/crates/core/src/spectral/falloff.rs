//! Gaussian fall-off model of an attenuation curve:
//!
//! ```text
//! α'(f) = 1 / (a·sqrt(2π)) · exp(−(f − b)² / (2a²)) + c
//! ```
//!
//! with `f` in cycles/pixel of the profiled raster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;

pub const A_BOUNDS: (f64, f64) = (1e-3, 10.0);
pub const B_BOUNDS: (f64, f64) = (-1.0, 1.0);
pub const C_BOUNDS: (f64, f64) = (0.0, 1.0);

const MIN_SAMPLES: usize = 8;
const MAX_ITERATIONS: usize = 500;
const STARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalloffParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FalloffParams {
    pub fn eval(&self, f: f64) -> f64 {
        eval_falloff(self, f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0 && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::config(format!(
                "fall-off parameters need finite a > 0, got ({}, {}, {})",
                self.a, self.b, self.c
            )));
        }
        Ok(())
    }
}

pub fn eval_falloff(p: &FalloffParams, f: f64) -> f64 {
    let d = f - p.b;
    INV_SQRT_TAU / p.a * (-d * d / (2.0 * p.a * p.a)).exp() + p.c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalloffFit {
    pub params: FalloffParams,
    /// Root-mean-square residual over the fitted samples.
    pub rms: f64,
    /// Set when refinement hit the iteration cap; the parameters are then
    /// the best point reached, no worse than the grid optimum.
    pub coarse: bool,
}

/// Least-squares fit of the fall-off model to `(freq, value)` samples.
///
/// A coarse grid over `(a, b)` with the optimal clamped `c` solved in
/// closed form seeds a damped Gauss–Newton (Levenberg–Marquardt) refinement
/// under box constraints; the best few grid cells are refined and the best
/// result kept.
pub fn fit_gaussian_falloff(freqs: &[f64], values: &[f64]) -> Result<FalloffFit> {
    if freqs.len() != values.len() {
        return Err(Error::input("frequency and value arrays differ in length"));
    }
    if freqs.len() < MIN_SAMPLES {
        return Err(Error::input(format!(
            "fit needs at least {MIN_SAMPLES} valid samples, got {}",
            freqs.len()
        )));
    }
    if freqs.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::input("samples must be finite"));
    }

    let mut grid: Vec<(f64, FalloffParams)> = Vec::new();
    for ia in 0..40 {
        let a = 0.005 * (1000f64).powf(ia as f64 / 39.0);
        for ib in 0..=40 {
            let b = -1.0 + 0.05 * ib as f64;
            let c = best_offset(freqs, values, a, b);
            let p = FalloffParams { a, b, c };
            grid.push((cost(freqs, values, &p), p));
        }
    }
    grid.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut best: Option<(f64, FalloffParams, bool)> = None;
    for &(grid_cost, start) in grid.iter().take(STARTS) {
        let (p, c, converged) = refine(freqs, values, start, grid_cost);
        if best.as_ref().map_or(true, |b| c < b.0) {
            best = Some((c, p, !converged));
        }
    }
    let (c, params, coarse) = best.expect("grid is nonempty");
    Ok(FalloffFit {
        params,
        rms: (c / freqs.len() as f64).sqrt(),
        coarse,
    })
}

fn cost(freqs: &[f64], values: &[f64], p: &FalloffParams) -> f64 {
    freqs
        .iter()
        .zip(values)
        .map(|(&f, &y)| {
            let r = eval_falloff(p, f) - y;
            r * r
        })
        .sum()
}

fn best_offset(freqs: &[f64], values: &[f64], a: f64, b: f64) -> f64 {
    let p = FalloffParams { a, b, c: 0.0 };
    let mean_resid = freqs
        .iter()
        .zip(values)
        .map(|(&f, &y)| y - eval_falloff(&p, f))
        .sum::<f64>()
        / freqs.len() as f64;
    mean_resid.clamp(C_BOUNDS.0, C_BOUNDS.1)
}

fn project(mut p: FalloffParams) -> FalloffParams {
    p.a = p.a.clamp(A_BOUNDS.0, A_BOUNDS.1);
    p.b = p.b.clamp(B_BOUNDS.0, B_BOUNDS.1);
    p.c = p.c.clamp(C_BOUNDS.0, C_BOUNDS.1);
    p
}

/// Returns the refined parameters, their cost, and whether the iteration
/// terminated before the cap.
fn refine(
    freqs: &[f64],
    values: &[f64],
    start: FalloffParams,
    start_cost: f64,
) -> (FalloffParams, f64, bool) {
    let mut p = start;
    let mut current = start_cost;
    let mut lambda = 1e-3;

    for _ in 0..MAX_ITERATIONS {
        if current <= 1e-30 {
            return (p, current, true);
        }
        // normal equations
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&f, &y) in freqs.iter().zip(values) {
            let d = f - p.b;
            let g = INV_SQRT_TAU / p.a * (-d * d / (2.0 * p.a * p.a)).exp();
            let r = g + p.c - y;
            let jac = [
                g * (d * d / (p.a * p.a * p.a) - 1.0 / p.a),
                g * d / (p.a * p.a),
                1.0,
            ];
            for i in 0..3 {
                jtr[i] += jac[i] * r;
                for k in 0..3 {
                    jtj[i][k] += jac[i] * jac[k];
                }
            }
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let Some(step) = constrained_step(&jtj, &jtr, lambda, &p) else {
                lambda *= 4.0;
                continue;
            };
            let trial = project(FalloffParams {
                a: p.a + step[0],
                b: p.b + step[1],
                c: p.c + step[2],
            });
            let trial_cost = cost(freqs, values, &trial);
            if trial_cost < current {
                let gain = current - trial_cost;
                let moved = (trial.a - p.a).abs() + (trial.b - p.b).abs() + (trial.c - p.c).abs();
                p = trial;
                let done = gain <= 1e-12 * current || moved <= 1e-12;
                current = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if done {
                    return (p, current, true);
                }
                break;
            }
            lambda *= 2.0;
        }
        if !accepted {
            // no descent direction left within the bounds
            return (p, current, true);
        }
    }
    (p, current, false)
}

fn with_bounds(p: &FalloffParams) -> [(f64, (f64, f64)); 3] {
    [(p.a, A_BOUNDS), (p.b, B_BOUNDS), (p.c, C_BOUNDS)]
}

/// Damped Gauss–Newton step with variables frozen when they sit on a bound
/// and the step would push them past it.
fn constrained_step(jtj: &[[f64; 3]; 3], jtr: &[f64; 3], lambda: f64, p: &FalloffParams) -> Option<[f64; 3]> {
    let mut frozen = [false; 3];
    loop {
        let mut m = *jtj;
        let mut rhs = [-jtr[0], -jtr[1], -jtr[2]];
        for i in 0..3 {
            m[i][i] += lambda * jtj[i][i].max(1e-12);
            if frozen[i] {
                for k in 0..3 {
                    m[i][k] = 0.0;
                    m[k][i] = 0.0;
                }
                m[i][i] = 1.0;
                rhs[i] = 0.0;
            }
        }
        let step = solve3(m, rhs)?;
        let mut changed = false;
        for (i, (v, (lo, hi))) in with_bounds(p).into_iter().enumerate() {
            let blocked = (v <= lo && step[i] < 0.0) || (v >= hi && step[i] > 0.0);
            if blocked && !frozen[i] {
                frozen[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(step);
        }
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            v[row] -= factor * v[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (v[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
