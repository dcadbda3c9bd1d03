//! Deterministic kernels and their closed-form antiderivatives.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quad::{gauss_kronrod, gauss_legendre};

/// Normalizing constant of the Rosenblatt kernel and the error of its quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub c_h: f64,
    pub c_h_rel_err: f64,
}

/// Covariance of fractional Brownian motion, `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e))
}

/// `f_s(x) = (s−x)^{H/2−1}`, or its derivative in `x` when `deriv` is set.
pub fn kernel_f(s: f64, x: f64, p: &Params, deriv: bool) -> Result<f64> {
    if !(x < s) {
        return Err(Error::Singular { s, x });
    }
    let h = p.hurst();
    let alpha = h / 2.0 - 1.0;
    Ok(if deriv {
        (1.0 - h / 2.0) * (s - x).powf(alpha - 1.0)
    } else {
        (s - x).powf(alpha)
    })
}

/// `(q+d)^e − q^e` without cancellation when `d ≪ q`.
#[inline]
pub(crate) fn pow_diff(q: f64, d: f64, e: f64) -> f64 {
    if q == 0.0 {
        return d.powf(e);
    }
    q.powf(e) * (e * (d / q).ln_1p()).exp_m1()
}

/// `∫_{x0}^{x1} (s+shift−x)^{H/2−1} dx` in closed form.
pub fn segment_integral_f(s: f64, shift: f64, x0: f64, x1: f64, p: &Params) -> Result<f64> {
    let top = s + shift;
    if x1 > top {
        return Err(Error::Domain(format!("upper limit {x1} exceeds singularity at {top}")));
    }
    if x0 > x1 {
        return Err(Error::Domain(format!("reversed interval [{x0}, {x1}]")));
    }
    Ok(seg_f(top, x0, x1, p.hurst()))
}

#[inline]
pub(crate) fn seg_f(top: f64, x0: f64, x1: f64, hurst: f64) -> f64 {
    if x0 == x1 {
        return 0.0;
    }
    let e = hurst / 2.0;
    (2.0 / hurst) * pow_diff(top - x1, x1 - x0, e)
}

/// `∫_{u0}^{u1} ∂_x f_s(1/u) u^{−3} (c + m u) du` in closed form, for `u0 ≤ u1 < 0`.
///
/// With `x = 1/u` the integral becomes `A(1/u0) − A(1/u1)` where
/// `A(x) = c(2/H−1)(s−x)^{H/2} + (cs+m)(s−x)^{H/2−1}`.
pub fn segment_integral_weighted(s: f64, u0: f64, u1: f64, c: f64, m: f64, p: &Params) -> Result<f64> {
    if !(u1 < 0.0) {
        return Err(Error::Domain(format!("upper limit u1 = {u1} must be negative")));
    }
    if u0 > u1 {
        return Err(Error::Domain(format!("reversed interval [{u0}, {u1}]")));
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive")));
    }
    Ok(seg_weighted(s, u0, u1, c, m, p.hurst()))
}

#[inline]
pub(crate) fn seg_weighted(s: f64, u0: f64, u1: f64, c: f64, m: f64, hurst: f64) -> f64 {
    if u0 == u1 || (c == 0.0 && m == 0.0) {
        return 0.0;
    }
    let e = hurst / 2.0;
    // s − 1/u0 is the smaller base; the gap between the two bases is 1/u0 − 1/u1.
    let q = s - 1.0 / u0;
    let d = (u1 - u0) / (u0 * u1);
    let first = c * (2.0 / hurst - 1.0) * pow_diff(q, d, e);
    let second = (c * s + m) * pow_diff(q, d, e - 1.0);
    -(first + second)
}

/// Rosenblatt kernel `g_t(y1,y2) = ∫_{max(y1,y2,0)}^t (u−y1)^{H/2−1} (u−y2)^{H/2−1} du`.
pub fn rosenblatt_kernel_g(t: f64, y1: f64, y2: f64, p: &Params) -> Result<f64> {
    kernel_g(t, y1, y2, p.hurst(), 1e-10)
}

pub(crate) fn kernel_g(t: f64, y1: f64, y2: f64, hurst: f64, rel_tol: f64) -> Result<f64> {
    if y1 == y2 {
        return Err(Error::Diagonal(y1));
    }
    let top = y1.max(y2);
    if top >= t {
        return Ok(0.0);
    }
    let start = top.max(0.0);
    let d = (y1 - y2).abs();
    let e = hurst / 2.0;
    let alpha = e - 1.0;
    if top < -0.5 * t {
        // Far from the singularity the integrand is smooth in u itself.
        let q = gauss_kronrod(|u| ((u - top) * (u - top + d)).powf(alpha), 0.0, t, 0.0, rel_tol, 2000)?;
        return Ok(q.value);
    }
    let inv_e = 1.0 / e;
    // v = (u − top)^{H/2} turns the integrable endpoint singularity into a smooth integrand.
    let v0 = (start - top).powf(e);
    let v1 = (t - top).powf(e);
    let q = gauss_kronrod(|v| (d + v.powf(inv_e)).powf(alpha), v0, v1, 0.0, rel_tol, 2000)?;
    Ok(q.value / e)
}

/// Same kernel through the incomplete beta function.
///
/// With `w = (u − max(y1,y2)) / |y1−y2|` and `z = w/(1+w)` the integral becomes
/// `|y1−y2|^{H−1} B(H/2, 1−H) [I_{z1} − I_{z0}]`.
#[cfg(test)]
pub(crate) fn kernel_g_beta(t: f64, y1: f64, y2: f64, hurst: f64) -> f64 {
    kernel_g_gap(t, y1.max(y2), (y1 - y2).abs(), hurst)
}

/// Kernel in terms of the larger argument `top` and the gap `d > 0`.
pub(crate) fn kernel_g_gap(t: f64, top: f64, d: f64, hurst: f64) -> f64 {
    if top >= t {
        return 0.0;
    }
    let a = hurst / 2.0;
    let b = 1.0 - hurst;
    if top < -0.5 * t {
        // Nearest singularity is at least t/2 from [0, t]; Gauss–Legendre converges geometrically.
        let (x, w) = legendre20();
        let half = 0.5 * t;
        let alpha = hurst / 2.0 - 1.0;
        return x
            .iter()
            .zip(w)
            .map(|(&xi, &wi)| {
                let u = half * (1.0 + xi);
                wi * ((u - top) * (u - top + d)).powf(alpha)
            })
            .sum::<f64>()
            * half;
    }
    let z1 = (t - top) / (t - top + d);
    let diff = if top < 0.0 {
        let z0 = -top / (d - top);
        if z0 > 0.5 {
            // Both arguments near 1: difference of complements avoids cancellation.
            beta_reg(b, a, d / (d - top)) - beta_reg(b, a, d / (t - top + d))
        } else {
            beta_reg(a, b, z1) - beta_reg(a, b, z0)
        }
    } else {
        beta_reg(a, b, z1)
    };
    d.powf(hurst - 1.0) * beta(a, b) * diff
}

fn legendre20() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let r = RULE.get_or_init(|| gauss_legendre(20));
    (&r.0, &r.1)
}

/// `‖g_1‖²` over `(−∞, 1]²`, returned with its estimated relative error.
pub fn kernel_norm_sq(hurst: f64, rel_tol: f64, max_panels: usize) -> Result<(f64, f64)> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::Hurst(hurst));
    }
    // Inner noise must sit well below the outer target or the outer estimator sees it as roughness.
    let inner_tol = rel_tol * 1e-2;
    // ∫_0^∞ g(y1, y1−d)² dd, split at d = 1 with power substitutions on both sides.
    let m = 1.0 / (2.0 * hurst - 1.0);
    let q2 = 2.0 / (1.0 - hurst);
    let inner = |y1: f64| -> Result<(f64, f64)> {
        let near = gauss_kronrod(
            |w| {
                // The mapped integrand is bounded, so [0, 1e-30] is negligible.
                if w <= 1e-30 {
                    return 0.0;
                }
                let d = w.powf(m);
                let g = kernel_g_gap(1.0, y1, d, hurst);
                g * g * m * d / w
            },
            0.0,
            1.0,
            0.0,
            inner_tol,
            max_panels,
        )?;
        let far = gauss_kronrod(
            |r| {
                if r <= 0.0 {
                    return 0.0;
                }
                let d = r.powf(-q2);
                if !d.is_finite() {
                    return 0.0;
                }
                let g = kernel_g_gap(1.0, y1, d, hurst);
                g * g * q2 * d / r
            },
            0.0,
            1.0,
            0.0,
            inner_tol,
            max_panels,
        )?;
        Ok((near.value + far.value, near.abs_err + far.abs_err))
    };
    let mut fail = None;
    let mut outer = |y1: f64| match inner(y1) {
        Ok((v, _)) => v,
        Err(e) => {
            fail = Some(e);
            0.0
        }
    };
    // The y1-profile has algebraic cusps at 0⁻ and 1⁻; y1 = −v⁴ and y1 = 1 − v⁴ flatten them.
    let past = gauss_kronrod(|v| 4.0 * v.powi(3) * outer(-v.powi(4)), 0.0, 1.0, 0.0, rel_tol * 0.3, max_panels)?;
    let recent = gauss_kronrod(|v| 4.0 * v.powi(3) * outer(1.0 - v.powi(4)), 0.0, 1.0, 0.0, rel_tol * 0.3, max_panels)?;
    // y1 = −r^{−q} maps (−∞, −1] onto (0, 1].
    let q = 1.0 / (1.0 - hurst);
    let tail = gauss_kronrod(
        |r| {
            if r <= 0.0 {
                return 0.0;
            }
            let y = -r.powf(-q);
            if !y.is_finite() {
                return 0.0;
            }
            outer(y) * q * (-y) / r
        },
        0.0,
        1.0,
        0.0,
        rel_tol * 0.3,
        max_panels,
    )?;
    if let Some(e) = fail {
        return Err(e);
    }
    let total = 2.0 * (past.value + recent.value + tail.value);
    let err = 2.0 * (past.abs_err + recent.abs_err + tail.abs_err);
    Ok((total, err / total))
}

fn cache() -> &'static Mutex<HashMap<u64, KernelConstants>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, KernelConstants>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `c(H) = (2‖g_1‖²)^{−1/2}`, so that `E X_t² = t^{2H}`. Memoized per `H`.
pub fn normalizing_constant(p: &Params, quad_budget: usize) -> Result<KernelConstants> {
    constants_for(p.hurst(), quad_budget)
}

pub(crate) fn constants_for(hurst: f64, quad_budget: usize) -> Result<KernelConstants> {
    let key = hurst.to_bits();
    if let Some(k) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*k);
    }
    let target = 1e-5;
    let (norm, rel) = kernel_norm_sq(hurst, target, quad_budget)?;
    if rel > 1e-4 {
        return Err(Error::QuadBudget { evals: quad_budget, rel_err: rel, target: 1e-4 });
    }
    let k = KernelConstants {
        c_h: (2.0 * norm).powf(-0.5),
        c_h_rel_err: 0.5 * rel,
    };
    cache().lock().expect("cache poisoned").insert(key, k);
    Ok(k)
}
