//! Integration of the kernel `f_s` against paths, and graded quadrature in time.
//!
//! Against piecewise-linear paths every integral is a sum of closed forms, so the
//! only error is rounding. Against sampled Brownian paths the Wiener integral is
//! discretized by a midpoint sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{seg_f, seg_weighted};
use crate::params::Params;
use crate::paths::PiecewiseLinearPath;

/// Controls of [`graded_time_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Initial number of graded cells; doubled until the result settles.
    pub points: usize,
    /// Lower bound on the grading exponent `κ` of `s_j = t (j/J)^κ`.
    pub grading_exponent: f64,
    pub target_rel_err: f64,
    /// Largest number of cells tried before giving up.
    pub max_points: usize,
}

impl QuadSpec {
    pub fn new(points: usize, grading_exponent: f64, target_rel_err: f64) -> Result<Self> {
        let spec = QuadSpec { points, grading_exponent, target_rel_err, max_points: points << 14 };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.points < 16 {
            return Err(Error::Input(format!("quadrature needs at least 16 points, got {}", self.points)));
        }
        if !(self.grading_exponent > 0.0) {
            return Err(Error::Input(format!("grading exponent {} must be positive", self.grading_exponent)));
        }
        if !(self.target_rel_err > 0.0 && self.target_rel_err <= 1e-2) {
            return Err(Error::Input(format!("target {} outside (0, 1e-2]", self.target_rel_err)));
        }
        if self.max_points < self.points {
            return Err(Error::Input("max_points below points".into()));
        }
        Ok(())
    }
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { points: 64, grading_exponent: 1.0, target_rel_err: 1e-6, max_points: 64 << 14 }
    }
}

fn check_range(path: &PiecewiseLinearPath, x0: f64, x1: f64, top: f64) -> Result<()> {
    if !(x0 <= x1) {
        return Err(Error::Domain(format!("reversed interval [{x0}, {x1}]")));
    }
    if x0 < path.start() || x1 > path.end() {
        return Err(Error::Domain(format!(
            "[{x0}, {x1}] not inside the path domain [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    if x1 > top {
        return Err(Error::Domain(format!("upper limit {x1} beyond the singularity at {top}")));
    }
    Ok(())
}

/// `∫_{x0}^{x1} (s+shift−x)^{H/2−1} dZ(x)` for a piecewise-linear `Z`, exactly.
pub fn stieltjes_pl(s: f64, shift: f64, z: &PiecewiseLinearPath, x0: f64, x1: f64, p: &Params) -> Result<f64> {
    let top = s + shift;
    check_range(z, x0, x1, top)?;
    Ok(stieltjes_unchecked(top, z, x0, x1, p.hurst()))
}

pub(crate) fn stieltjes_unchecked(top: f64, z: &PiecewiseLinearPath, x0: f64, x1: f64, hurst: f64) -> f64 {
    if x0 >= x1 {
        return 0.0;
    }
    let t = z.times();
    let mut k = z.segment_index(x0);
    let mut acc = 0.0;
    while k + 1 < t.len() && t[k] < x1 {
        let a = t[k].max(x0);
        let b = t[k + 1].min(x1);
        if b > a {
            acc += z.slope(k) * seg_f(top, a, b, hurst);
        }
        k += 1;
    }
    acc
}

/// `∫_{u0}^{u1} ∂_x f_s(1/u) u^{−3} P(u) du` for a piecewise-linear `P`, exactly.
pub fn riemann_weighted_pl(s: f64, path: &PiecewiseLinearPath, u0: f64, u1: f64, p: &Params) -> Result<f64> {
    if !(u0 <= u1) {
        return Err(Error::Domain(format!("reversed interval [{u0}, {u1}]")));
    }
    if u0 < path.start() || u1 > path.end() {
        return Err(Error::Domain(format!(
            "[{u0}, {u1}] not inside the path domain [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    if u1 > 0.0 {
        return Err(Error::Domain(format!("upper limit {u1} must not be positive")));
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive")));
    }
    riemann_unchecked(s, path, u0, u1, p.hurst())
}

pub(crate) fn riemann_unchecked(s: f64, path: &PiecewiseLinearPath, u0: f64, u1: f64, hurst: f64) -> Result<f64> {
    if u0 >= u1 {
        return Ok(0.0);
    }
    let t = path.times();
    let v = path.values();
    let mut k = path.segment_index(u0);
    let mut acc = 0.0;
    while k + 1 < t.len() && t[k] < u1 {
        let a = t[k].max(u0);
        let b = t[k + 1].min(u1);
        if b > a {
            let m = path.slope(k);
            if b < 0.0 {
                acc += seg_weighted(s, a, b, v[k] - m * t[k], m, hurst);
            } else {
                acc += weighted_to_zero(s, a, v[k + 1], m, hurst)?;
            }
        }
        k += 1;
    }
    Ok(acc)
}

/// Piece `[u0, 0]` of a path with value `p0` at 0. Only `p0 = 0` gives a finite integral:
/// then `A(x) = m (s−x)^{H/2−1}` and `A → 0` as `x = 1/u → −∞`.
fn weighted_to_zero(s: f64, u0: f64, p0: f64, m: f64, hurst: f64) -> Result<f64> {
    if p0 != 0.0 {
        return Err(Error::Domain(format!("weighted integral up to u = 0 diverges unless the path vanishes there (value {p0})")));
    }
    Ok(m * (s - 1.0 / u0).powf(hurst / 2.0 - 1.0))
}

/// Midpoint discretization of the Wiener integral `∫_{x0}^{x1} (s+shift−x)^{H/2−1} dB(x)`.
///
/// A cell closer to the singularity than its own width uses the exact cell average of
/// the kernel instead of its midpoint value.
pub fn wiener_grid_integral(s: f64, shift: f64, b: &PiecewiseLinearPath, x0: f64, x1: f64, p: &Params) -> Result<f64> {
    let top = s + shift;
    check_range(b, x0, x1, top)?;
    Ok(wiener_unchecked(top, b, x0, x1, p.hurst()))
}

pub(crate) fn wiener_unchecked(top: f64, b: &PiecewiseLinearPath, x0: f64, x1: f64, hurst: f64) -> f64 {
    if x0 >= x1 {
        return 0.0;
    }
    let alpha = hurst / 2.0 - 1.0;
    let t = b.times();
    let mut k = b.segment_index(x0);
    let mut acc = 0.0;
    let mut left = x0;
    let mut b_left = b.eval(x0);
    while k + 1 < t.len() && t[k] < x1 {
        let right = t[k + 1].min(x1);
        if right > left {
            let b_right = if right == t[k + 1] { b.values()[k + 1] } else { b.eval(right) };
            let w = right - left;
            let weight = if top - right < w {
                seg_f(top, left, right, hurst) / w
            } else {
                (top - 0.5 * (left + right)).powf(alpha)
            };
            acc += weight * (b_right - b_left);
            left = right;
            b_left = b_right;
        }
        k += 1;
    }
    acc
}

/// `∫_0^t F(s) ds` for `F` with an integrable singularity `s^σ` at 0.
///
/// Midpoint rule in `v` on `s = t v^κ`, `κ = max(grading_exponent, 2/(1+σ))`, which maps
/// `s^σ ds` to a linear function of `v`. The cell count doubles until two successive
/// values agree to `target_rel_err`.
pub fn graded_time_quadrature<F: FnMut(f64) -> f64>(
    mut f: F,
    t: f64,
    spec: &QuadSpec,
    singular_exponent: f64,
) -> Result<f64> {
    spec.check()?;
    if !(singular_exponent > -1.0) {
        return Err(Error::Input(format!("singular exponent {singular_exponent} must exceed -1")));
    }
    if !(t > 0.0) {
        return if t == 0.0 { Ok(0.0) } else { Err(Error::Domain(format!("t = {t} must be nonnegative"))) };
    }
    let kappa = spec.grading_exponent.max(2.0 / (1.0 + singular_exponent));
    let mut midpoint = |cells: usize| {
        let mut acc = 0.0;
        for j in 0..cells {
            let v = (j as f64 + 0.5) / cells as f64;
            acc += f(t * v.powf(kappa)) * kappa * v.powf(kappa - 1.0);
        }
        acc * t / cells as f64
    };
    let mut cells = spec.points;
    let mut prev = midpoint(cells);
    let mut last_change = f64::INFINITY;
    while 2 * cells <= spec.max_points {
        cells *= 2;
        let next = midpoint(cells);
        last_change = (next - prev).abs();
        if last_change <= spec.target_rel_err * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence { max_points: spec.max_points, last_change })
}
