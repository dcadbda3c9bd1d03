//! Test-side reference quadrature, independent of the library's integrators.
#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    if whole.1 <= tol || depth == 0 {
        return whole.0;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, gk15(f, a, m), 0.5 * tol, depth - 1) + adapt(f, m, b, gk15(f, m, b), 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod 7/15 with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    adapt(&f, a, b, whole, tol, 50)
}

/// `∫_a^b (top−x)^α g(x) dx` for `α > −1`, `b ≤ top`, through `top − x = w^{1/(1+α)}`,
/// which turns the integrand into the smooth `g(top − w^m)·m`.
pub fn integrate_power<G: Fn(f64) -> f64>(g: G, top: f64, alpha: f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 1.0 / (1.0 + alpha);
    let w_lo = (top - b).powf(1.0 / m);
    let w_hi = (top - a).powf(1.0 / m);
    integrate(|w| m * g(top - w.powf(m)), w_lo, w_hi, tol)
}
