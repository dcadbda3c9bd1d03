//! Deterministic quadrature engines.
//!
//! Two independent schemes live here: adaptive Gauss–Kronrod (7/15 points with
//! bisection of the worst panel) and tanh-sinh (double exponential) quadrature.
//! They share no code, so one can serve as an oracle for the other. A small
//! Gauss–Legendre rule generator backs the fixed-panel rules used elsewhere.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: value, estimated absolute error and evaluation count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl Quad {
    pub fn rel_err(&self) -> f64 {
        if self.value == 0.0 {
            self.abs_err
        } else {
            self.abs_err / self.value.abs()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_asc = res_asc * h.abs();
    let res_abs = res_abs * h.abs();
    let mut err = ((res_k - res_g) * h).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value: res_k * h, err }
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Panels are bisected worst-first until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |I|)` or `max_panels` panels have been created.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, abs_err: 0.0, evals: 0 });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod_panel(&mut f, a, b);
    let mut total = first.value;
    let mut total_err = first.err;
    let mut evals = 15;
    heap.push(first);
    let mut panels = 1;
    // Relative targets below a few ulps are clamped to what rounding allows.
    let rel = rel_tol.max(50.0 * f64::EPSILON);
    while total_err > abs_tol.max(rel * total.abs()) {
        if panels >= max_panels {
            return Err(Error::QuadBudget {
                evals,
                rel_err: total_err / total.abs().max(f64::MIN_POSITIVE),
                target: rel_tol,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Panel cannot be split further in floating point.
            heap.push(Panel { err: 0.0, ..worst });
            total_err -= worst.err;
            continue;
        }
        let left = kronrod_panel(&mut f, worst.a, mid);
        let right = kronrod_panel(&mut f, mid, worst.b);
        evals += 30;
        panels += 1;
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        if total_err <= 0.0 {
            break;
        }
    }
    // Re-sum to shed accumulated cancellation from the incremental updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let abs_err: f64 = heap.iter().map(|p| p.err).sum();
    Ok(Quad { value, abs_err, evals })
}

/// Gauss–Kronrod over consecutive sub-intervals separated by `breaks`.
pub fn gauss_kronrod_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quad> {
    let mut out = Quad { value: 0.0, abs_err: 0.0, evals: 0 };
    for w in breaks.windows(2) {
        let q = gauss_kronrod(&mut f, w[0], w[1], abs_tol, rel_tol, max_panels)?;
        out.value += q.value;
        out.abs_err += q.abs_err;
        out.evals += q.evals;
    }
    Ok(out)
}

/// Tanh-sinh quadrature over `[a, b]` with level doubling.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, max_level: u32) -> Result<Quad> {
    tanh_sinh_dist(|x, _, _| f(x), a, b, rel_tol, max_level)
}

/// Tanh-sinh quadrature where the integrand also receives the distances
/// `x − a` and `b − x`, computed without cancellation.
///
/// Endpoint singularities of algebraic type are then resolved down to the
/// underflow limit rather than to the spacing of doubles near `a` or `b`.
pub fn tanh_sinh_dist<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_level: u32,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, abs_err: 0.0, evals: 0 });
    }
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let t_max = 4.0_f64;
    let mut evals = 1;
    let mut sum = FRAC_PI_2 * f(c, r, r);
    let mut h = 1.0_f64;
    let add_points = |f: &mut F, t0: f64, step: f64, evals: &mut usize| -> f64 {
        let mut acc = 0.0;
        let mut t = t0;
        while t <= t_max {
            let u = FRAC_PI_2 * t.sinh();
            let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
            let dist = 2.0 * r / ((2.0 * u).exp() + 1.0);
            if dist > 0.0 && w > 0.0 {
                let far = 2.0 * r - dist;
                acc += w * (f(b - dist, far, dist) + f(a + dist, dist, far));
                *evals += 2;
            }
            t += step;
        }
        acc
    };
    sum += add_points(&mut f, h, h, &mut evals);
    let mut prev = r * h * sum;
    for _level in 1..=max_level {
        let step = h;
        h *= 0.5;
        sum += add_points(&mut f, h, step, &mut evals);
        let cur = r * h * sum;
        let change = (cur - prev).abs();
        if change <= rel_tol * cur.abs() {
            return Ok(Quad { value: cur, abs_err: change, evals });
        }
        prev = cur;
    }
    Err(Error::QuadBudget {
        evals,
        rel_err: f64::NAN,
        target: rel_tol,
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
