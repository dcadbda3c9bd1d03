mod common;

use rosenblatt_core::kernels::{segment_integral_f, segment_integral_weighted};
use rosenblatt_core::rng::{Stream, Tag};
use rosenblatt_core::{
    graded_time_quadrature, riemann_weighted_pl, simulate_transport, stieltjes_pl, wiener_grid_integral,
    PiecewiseLinearPath, QuadSpec, RawParams,
};

use common::{integrate, integrate_power};


fn params(hurst: f64, beta: f64) -> rosenblatt_core::Params {
    RawParams { hurst, beta, gamma: 0.02, ..RawParams::default() }.validate().unwrap()
}

#[test]
fn graded_quadrature_examples() {
    let spec = QuadSpec::default();
    let v = graded_time_quadrature(|_| 1.0, 2.0, &spec, 0.0).unwrap();
    assert!((v - 2.0).abs() < 1e-10);
    let v = graded_time_quadrature(|s| s.powf(-0.25), 1.0, &spec, -0.25).unwrap();
    assert!((v - 4.0 / 3.0).abs() <= 4.0 / 3.0 * 1e-6);
    let v = graded_time_quadrature(|s| s.powf(-0.25) / 0.25, 1.0, &spec, -0.25).unwrap();
    assert!((v - 16.0 / 3.0).abs() <= 16.0 / 3.0 * 1e-6);
    assert_eq!(graded_time_quadrature(|_| 1.0, 0.0, &spec, 0.0).unwrap(), 0.0);
}

#[test]
fn graded_quadrature_errors() {
    let spec = QuadSpec::default();
    assert_eq!(graded_time_quadrature(|_| 1.0, 1.0, &spec, -1.0).unwrap_err().code(), "ERR_INPUT");
    assert!(QuadSpec::new(8, 1.0, 1e-6).is_err());
    assert!(QuadSpec::new(16, 1.0, 0.1).is_err());
    let tight = QuadSpec { points: 16, grading_exponent: 1.0, target_rel_err: 1e-15, max_points: 64 };
    let rough = |s: f64| if (s * 1e4).floor() as i64 % 2 == 0 { 1.0 } else { -1.0 };
    assert_eq!(graded_time_quadrature(rough, 1.0, &tight, 0.0).unwrap_err().code(), "ERR_NO_CONVERGENCE");
}

#[test]
fn segment_examples_against_quadrature() {
    let p = params(0.75, 0.44);
    let got = segment_integral_f(1.0, 0.1, 0.0, 1.0, &p).unwrap();
    let want = integrate_power(|_| 1.0, 1.1, -0.625, 0.0, 1.0, 1e-15);
    assert!((got - want).abs() <= 1e-10 * want);

    let got = segment_integral_weighted(1.0, -2.0, -1.0, 1.0, 0.5, &p).unwrap();
    let want = integrate(|u| 0.625 * (1.0 - 1.0 / u).powf(-1.625) * u.powi(-3) * (1.0 + 0.5 * u), -2.0, -1.0, 1e-15);
    assert!((got - want).abs() <= 1e-8 * want.abs());
    assert_eq!(segment_integral_weighted(1.0, -2.0, -1.0, 0.0, 0.0, &p).unwrap(), 0.0);
    let twice = segment_integral_weighted(1.0, -2.0, -1.0, 2.0, 1.0, &p).unwrap();
    assert!((twice - 2.0 * got).abs() <= 1e-15 * twice.abs());
    assert_eq!(segment_integral_weighted(1.0, -1.0, 0.0, 1.0, 0.0, &p).unwrap_err().code(), "ERR_DOMAIN");
}

#[test]
fn stieltjes_trivial_cases() {
    let p = params(0.8, 0.45);
    let flat = PiecewiseLinearPath::new(vec![-1.0, 0.0, 1.0], vec![2.0, 2.0, 2.0]).unwrap();
    assert_eq!(stieltjes_pl(1.0, 0.0, &flat, -1.0, 1.0, &p).unwrap(), 0.0);
    let line = PiecewiseLinearPath::new(vec![0.0, 1.0], vec![0.0, 3.0]).unwrap();
    let v = stieltjes_pl(1.0, 0.0, &line, 0.0, 1.0, &p).unwrap();
    assert!((v - 3.0 * 2.5).abs() < 1e-13);
    assert_eq!(stieltjes_pl(1.0, 0.0, &line, 0.4, 0.4, &p).unwrap(), 0.0);
    assert_eq!(stieltjes_pl(0.5, 0.0, &line, 0.0, 1.0, &p).unwrap_err().code(), "ERR_DOMAIN");
}

#[test]
fn stieltjes_random_transport_vs_quadrature() {
    let p = params(0.75, 0.44);
    for seed in 0..20 {
        let z = simulate_transport(6, (-1.0, 1.0), seed).unwrap();
        let path = z.path();
        let got = stieltjes_pl(1.0, 0.1, path, -1.0, 1.0, &p).unwrap();
        let t = path.times();
        let mut want = 0.0;
        let mut mass = 0.0;
        for k in 0..t.len() - 1 {
            let v = integrate_power(|_| 1.0, 1.1, -0.625, t[k], t[k + 1], 1e-15);
            want += path.slope(k) * v;
            mass += path.slope(k).abs() * v;
        }
        assert!((got - want).abs() <= 1e-9 * mass, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn riemann_trivial_cases() {
    let p = params(0.75, 0.44);
    let zero = PiecewiseLinearPath::zero(-1.0, 0.0);
    assert_eq!(riemann_weighted_pl(1.0, &zero, -1.0, 0.0, &p).unwrap(), 0.0);
    let lifted = PiecewiseLinearPath::new(vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(riemann_weighted_pl(1.0, &lifted, -1.0, 0.0, &p).unwrap_err().code(), "ERR_DOMAIN");
    assert_eq!(riemann_weighted_pl(1.0, &zero, -0.5, -0.6, &p).unwrap_err().code(), "ERR_DOMAIN");
}

#[test]
fn riemann_up_to_zero_matches_quadrature() {
    // P(u) = u on [−1, 0]: the integrand behaves like |u|^{−H/2} at 0.
    let p = params(0.75, 0.44);
    let line = PiecewiseLinearPath::new(vec![-1.0, 0.0], vec![-1.0, 0.0]).unwrap();
    let got = riemann_weighted_pl(1.0, &line, -1.0, 0.0, &p).unwrap();
    let g = |u: f64| 0.625 * (1.0 - 1.0 / u).powf(-1.625) * u.powi(-3) * u;
    // u = −w^m with m = 1/0.625 removes the endpoint growth.
    let m = 1.0 / 0.625;
    let near = integrate(|w: f64| g(-w.powf(m)) * m * w.powf(m - 1.0), 0.0, 1.0, 1e-14);
    assert!((got - near).abs() <= 1e-9 * near.abs(), "{got} vs {near}");
}

#[test]
fn wiener_grid_trivial_cases() {
    let p = params(0.75, 0.44);
    let zero = PiecewiseLinearPath::zero(0.0, 1.0);
    assert_eq!(wiener_grid_integral(1.0, 0.1, &zero, 0.0, 1.0, &p).unwrap(), 0.0);
    assert_eq!(wiener_grid_integral(0.5, 0.1, &zero, 0.0, 1.0, &p).unwrap_err().code(), "ERR_DOMAIN");
}

#[test]
fn wiener_grid_mesh_halving_rate() {
    // Single-path differences between dyadic levels shrink at least like mesh^{0.4}.
    let p = params(0.75, 0.44);
    let levels = [256usize, 512, 1024, 2048, 4096];
    let mut diffs = vec![Vec::new(); levels.len() - 1];
    for rep in 0..64 {
        let mut s = Stream::new(9, Tag::Test, rep);
        let fine = *levels.last().unwrap();
        let h = 1.0 / fine as f64;
        let mut vals = vec![0.0];
        for _ in 0..fine {
            let last = *vals.last().unwrap();
            vals.push(last + h.sqrt() * s.normal());
        }
        let at = |cells: usize| {
            let step = fine / cells;
            let times: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();
            let values: Vec<f64> = (0..=cells).map(|k| vals[k * step]).collect();
            let b = PiecewiseLinearPath::new(times, values).unwrap();
            wiener_grid_integral(1.0, 0.1, &b, 0.0, 1.0, &p).unwrap()
        };
        let v: Vec<f64> = levels.iter().map(|&c| at(c)).collect();
        for k in 0..v.len() - 1 {
            diffs[k].push((v[k + 1] - v[k]).abs());
        }
    }
    let med: Vec<f64> = diffs.iter().map(|d| rosenblatt_core::stats::median(d)).collect();
    let xs: Vec<f64> = levels[..levels.len() - 1].iter().map(|&c| c as f64).collect();
    let fit = rosenblatt_core::fit_loglog(&xs, &med, false).unwrap();
    assert!(fit.slope <= -0.4, "slope {}", fit.slope);
}
