//! Monte Carlo studies: coupling rate, strong rate, law suite and oracle self-checks.
//!
//! Replicates run in parallel; each draws only from streams keyed by its own seed and
//! results are folded in replicate order, so reports do not depend on the thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{constants_for, fbm_covariance, kernel_norm_sq};
use crate::oracle::{ChaosGrid, ChaosGridSpec};
use crate::params::{alpha_n, Params, RawParams};
use crate::paths::{simulate_driver_bundle, sup_distance, DriverMesh};
use crate::rng::{replicate_seed, Tag};
use crate::rosenblatt::{
    approx_values, assemble_run, components_from_values, make_transports, reference_values, Coupling, RunOptions,
    TimeMesh, CONSTANT_BUDGET,
};
use crate::stats::{
    fit_loglog, ks_two_sample, mean, median, nonincreasing_with, skewness, variance, variance_std_err, KsResult,
    McSummary, RateFit,
};
use crate::transport::{couple_with, default_block_len, simulate_transport_anchored};

/// Hex SHA-256 of the canonical JSON form of an experiment configuration.
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values always serialize");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Common header of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub experiment: String,
    pub config_hash: String,
    pub params: RawParams,
    pub seed: u64,
    pub reps: usize,
    pub epsilon_n: f64,
    pub alpha_n: Option<f64>,
    pub alpha_hat_n: Option<f64>,
    pub c_h: f64,
    pub c_h_rel_err: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl ReportHeader {
    fn new(experiment: &str, p: &Params, seed: u64, reps: usize, extra: serde_json::Value, tolerances: &[(&str, f64)]) -> Result<Self> {
        let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
        let config = serde_json::json!({
            "experiment": experiment,
            "params": p.raw(),
            "seed": seed,
            "reps": reps,
            "extra": extra,
        });
        Ok(ReportHeader {
            experiment: experiment.to_string(),
            config_hash: config_hash(&config),
            params: p.raw(),
            seed,
            reps,
            epsilon_n: p.epsilon(),
            alpha_n: alpha_n(p.n(), p, false).ok(),
            alpha_hat_n: alpha_n(p.n(), p, true).ok(),
            c_h: k.c_h,
            c_h_rel_err: k.c_h_rel_err,
            tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        })
    }
}

/// One pass/fail comparison of a statistic against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, target, tolerance, pass: (value - target).abs() <= tolerance }
    }

    fn flag(name: &str, value: f64, target: f64, pass: bool) -> Self {
        Check { name: name.into(), value, target, tolerance: f64::NAN, pass }
    }
}

fn check_ns(ns: &[u64], min: u64) -> Result<()> {
    if ns.len() < 3 {
        return Err(Error::Input(format!("need at least 3 values of n, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("values of n must increase".into()));
    }
    if ns[0] < min {
        return Err(Error::N(ns[0], min));
    }
    Ok(())
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::Input("at least two replicates are needed".into()));
    }
    Ok(())
}

/// Per-`n` row of the coupling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub n: u64,
    pub block_len: f64,
    pub median_sup_coupled: f64,
    pub median_sup_independent: f64,
    /// Median over replicates of the median `|Z−B|` at block boundaries.
    pub median_anchor_coupled: f64,
    pub median_anchor_independent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub header: ReportHeader,
    pub rows: Vec<CouplingRow>,
    pub fit: RateFit,
    pub fit_log_corrected: RateFit,
    pub control: RateFit,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// `sup_{[0, 1∧T]} |B1 − Z|` for coupled and independent transports over `reps` drivers.
pub fn run_coupling_rate(p: &Params, ns: &[u64], reps: usize, seed: u64) -> Result<CouplingReport> {
    check_ns(ns, 2)?;
    check_reps(reps)?;
    let t_end = p.horizon();
    let mesh = DriverMesh::from_params(p);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let block_len = default_block_len(n, t_end);
        let per_rep: Vec<[f64; 4]> = (0..reps as u64)
            .into_par_iter()
            .map(|r| -> Result<[f64; 4]> {
                let sr = replicate_seed(seed, r);
                let d = simulate_driver_bundle(p, &mesh, sr)?;
                let z = couple_with(&d.b1, n, block_len, sr, Tag::Z1)?;
                let zi = simulate_transport_anchored(n, (0.0, t_end), false, replicate_seed(sr, 1), Tag::Independent)?;
                let sup_c = sup_distance(&d.b1, z.path(), 0.0, t_end.min(1.0))?;
                let sup_i = sup_distance(&d.b1, zi.path(), 0.0, t_end.min(1.0))?;
                let blocks = (t_end / block_len).round() as usize;
                let anchor = |path: &crate::paths::PiecewiseLinearPath| {
                    let gaps: Vec<f64> = (1..=blocks)
                        .map(|j| {
                            let t = (j as f64 * block_len).min(t_end);
                            (path.eval(t) - d.b1.eval(t)).abs()
                        })
                        .collect();
                    median(&gaps)
                };
                Ok([sup_c, sup_i, anchor(z.path()), anchor(zi.path())])
            })
            .collect::<Result<_>>()?;
        let col = |k: usize| median(&per_rep.iter().map(|v| v[k]).collect::<Vec<_>>());
        rows.push(CouplingRow {
            n,
            block_len,
            median_sup_coupled: col(0),
            median_sup_independent: col(1),
            median_anchor_coupled: col(2),
            median_anchor_independent: col(3),
        });
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let coupled: Vec<f64> = rows.iter().map(|r| r.median_sup_coupled).collect();
    let indep: Vec<f64> = rows.iter().map(|r| r.median_sup_independent).collect();
    let mut fit = fit_loglog(&xs, &coupled, false)?;
    fit.theoretical_slope = -0.5;
    let mut fit_log_corrected = fit_loglog(&xs, &coupled, true)?;
    fit_log_corrected.theoretical_slope = -0.5;
    let mut control = fit_loglog(&xs, &indep, false)?;
    control.theoretical_slope = 0.0;
    let anchors_ok = rows.iter().all(|r| r.median_anchor_coupled <= r.median_anchor_independent);
    let checks = vec![
        Check { name: "coupled_slope".into(), value: fit.slope, target: -0.5, tolerance: 0.2, pass: (-0.7..=-0.3).contains(&fit.slope) },
        Check::flag("independent_slope", control.slope, 0.0, control.slope >= -0.1),
        Check::flag("medians_decreasing", coupled.windows(2).filter(|w| w[1] >= w[0]).count() as f64, 0.0, nonincreasing_with(&coupled, 1)),
        Check::flag("anchoring_beats_independent", rows.len() as f64, rows.len() as f64, anchors_ok),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let header = ReportHeader::new(
        "coupling",
        p,
        seed,
        reps,
        serde_json::json!({ "ns": ns }),
        &[("slope_lo", -0.7), ("slope_hi", -0.3), ("control_slope_min", -0.1), ("inversions_allowed", 1.0)],
    )?;
    Ok(CouplingReport { header, rows, fit, fit_log_corrected, control, checks, pass })
}

/// Per-`n` row of the strong-rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongRow {
    pub n: u64,
    pub median_error: f64,
    pub alpha_hat_n: f64,
    /// `C·α̂_n` with `C` calibrated at the smallest `n`.
    pub envelope: f64,
    pub within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    pub header: ReportHeader,
    pub eps_ref: f64,
    pub rows: Vec<StrongRow>,
    pub fit: RateFit,
    pub calibrated_c: f64,
    pub slack: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// `sup_t |X^{H,n}_t − X̂_t|` over `reps` coupled replicates; the reference is shared across `n`.
pub fn run_strong_rate(p: &Params, ns: &[u64], reps: usize, seed: u64) -> Result<StrongReport> {
    check_ns(ns, 2)?;
    check_reps(reps)?;
    let params: Vec<Params> = ns.iter().map(|&n| p.with_n(n)).collect::<Result<_>>()?;
    let eps_ref = params.iter().map(|q| q.epsilon()).fold(f64::INFINITY, f64::min) / 8.0;
    let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
    let mesh = TimeMesh::for_params(p)?;
    let dmesh = DriverMesh::from_params(&params[params.len() - 1]);
    let errors: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let sr = replicate_seed(seed, r);
            let d = simulate_driver_bundle(p, &dmesh, sr)?;
            let xref = components_from_values(&mesh, &reference_values(&mesh, &d, p, eps_ref)?, k.c_h).assembled();
            params
                .iter()
                .map(|q| {
                    let z = make_transports(&d, q, q.n(), Coupling::Coupled, sr)?;
                    let x = components_from_values(&mesh, &approx_values(&mesh, &z, q, false)?, k.c_h).assembled();
                    Ok(x.iter().zip(&xref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let medians: Vec<f64> = (0..ns.len()).map(|j| median(&errors.iter().map(|e| e[j]).collect::<Vec<_>>())).collect();
    let alphas: Vec<f64> = ns.iter().map(|&n| alpha_n(n, p, true)).collect::<Result<_>>()?;
    let slack = 2.0;
    let calibrated_c = medians[0] / alphas[0];
    let rows: Vec<StrongRow> = ns
        .iter()
        .zip(&medians)
        .zip(&alphas)
        .map(|((&n, &m), &a)| StrongRow {
            n,
            median_error: m,
            alpha_hat_n: a,
            envelope: calibrated_c * a,
            within_envelope: m <= slack * calibrated_c * a,
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut fit = fit_loglog(&xs, &medians, false)?;
    fit.theoretical_slope = -(0.5 - p.beta() - p.gamma());
    let checks = vec![
        Check::flag("medians_nonincreasing", medians.windows(2).filter(|w| w[1] > w[0]).count() as f64, 0.0, nonincreasing_with(&medians, 1)),
        Check::flag("envelope", rows.iter().filter(|r| !r.within_envelope).count() as f64, 0.0, rows.iter().all(|r| r.within_envelope)),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let header = ReportHeader::new(
        "rate",
        p,
        seed,
        reps,
        serde_json::json!({ "ns": ns, "eps_ref": eps_ref }),
        &[("slack", slack), ("inversions_allowed", 1.0)],
    )?;
    Ok(StrongReport { header, eps_ref, rows, fit, calibrated_c, slack, checks, pass })
}

/// Uniform cell width of the chaos-grid oracle used by the law suite.
pub const ORACLE_MESH: f64 = 1.0 / 128.0;

fn index_of(grid: &[f64], t: f64) -> Result<usize> {
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
        .ok_or_else(|| Error::Input(format!("output grid does not contain t = {t}")))
}

/// Chaos-grid oracle samples on `t_grid`, one per replicate.
pub fn oracle_samples(p: &Params, t_grid: Vec<f64>, mesh: f64, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
    let grid = ChaosGrid::new(&ChaosGridSpec::new(t_grid, mesh), p.hurst(), p.a())?;
    Ok((0..reps as u64).into_par_iter().map(|r| grid.sample(k.c_h, replicate_seed(seed, r))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub header: ReportHeader,
    pub approx_x1: McSummary,
    pub oracle_x1: McSummary,
    pub var_x1: f64,
    pub var_x05: f64,
    pub cov_x1_x05: f64,
    pub oracle_var_x1: f64,
    pub skew_approx: f64,
    pub skew_oracle: f64,
    pub ks: KsResult,
    pub checks: Vec<Check>,
    /// Oracle diagnostics; reported but not part of `pass`.
    pub oracle_checks: Vec<Check>,
    pub pass: bool,
}

/// Seed offset separating oracle streams from the approximation's.
const ORACLE_SALT: u64 = 0x0A0C_1E00;

/// Second moments, KS against the chaos-grid oracle and skewness of `X^{H,n}` at `t ∈ {1/2, 1}`.
pub fn run_law_suite(p: &Params, reps: usize, seed: u64) -> Result<LawReport> {
    check_reps(reps)?;
    if reps < 50 {
        return Err(Error::Input("the law suite needs at least 50 replicates".into()));
    }
    let t_grid = p.output_grid();
    let i1 = index_of(&t_grid, 1.0)?;
    let i05 = index_of(&t_grid, 0.5)?;
    let opts = RunOptions::default();
    let samples: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let run = assemble_run(&t_grid, p, replicate_seed(seed, r), &opts)?;
            Ok((run.x[i1], run.x[i05]))
        })
        .collect::<Result<_>>()?;
    let x1: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let x05: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let oracle = oracle_samples(p, vec![0.5, 1.0], ORACLE_MESH, reps, seed ^ ORACLE_SALT)?;
    let o1: Vec<f64> = oracle.iter().map(|v| v[1]).collect();

    let h = p.hurst();
    let allowance = 0.1;
    let var_x1 = variance(&x1);
    let var_x05 = variance(&x05);
    let prod: Vec<f64> = x1.iter().zip(&x05).map(|(a, b)| a * b).collect();
    let cov = mean(&prod) - mean(&x1) * mean(&x05);
    let cov_se = (variance(&prod) / reps as f64).sqrt();
    let ks = ks_two_sample(&x1, &o1)?;
    let skew_approx = skewness(&x1);
    let skew_oracle = skewness(&o1);
    let target05 = fbm_covariance(0.5, 0.5, h);
    let target_cov = fbm_covariance(1.0, 0.5, h);
    let checks = vec![
        Check::within("var_x1", var_x1, 1.0, 3.0 * variance_std_err(&x1) + allowance),
        Check::within("var_x05", var_x05, target05, 3.0 * variance_std_err(&x05) + allowance * target05),
        Check::within("cov_x1_x05", cov, target_cov, 3.0 * cov_se + allowance * target_cov),
        Check::flag("ks_vs_oracle", ks.statistic, 0.0, ks.pass),
        Check::flag(
            "skewness_vs_oracle",
            skew_approx,
            skew_oracle,
            skew_approx.signum() == skew_oracle.signum() && (skew_approx - skew_oracle).abs() <= 0.5 * skew_oracle.abs(),
        ),
    ];
    let oracle_var = variance(&o1);
    let oracle_checks = vec![
        Check::within("oracle_var_x1", oracle_var, 1.0, 3.0 * variance_std_err(&o1) + allowance),
        Check::within("oracle_mean_x1", mean(&o1), 0.0, 3.0 * (oracle_var / reps as f64).sqrt()),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let header = ReportHeader::new(
        "law",
        p,
        seed,
        reps,
        serde_json::json!({ "oracle_mesh": ORACLE_MESH }),
        &[("std_errs", 3.0), ("bias_allowance", allowance), ("ks_level", 0.01), ("skew_rel", 0.5)],
    )?;
    let hash = header.config_hash.clone();
    Ok(LawReport {
        header,
        approx_x1: McSummary::new("X^{H,n}_1", &x1, &hash)?,
        oracle_x1: McSummary::new("oracle X_1", &o1, &hash)?,
        var_x1,
        var_x05,
        cov_x1_x05: cov,
        oracle_var_x1: oracle_var,
        skew_approx,
        skew_oracle,
        ks,
        checks,
        oracle_checks,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub header: ReportHeader,
    pub exact_var_coarse: f64,
    pub exact_var_fine: f64,
    pub mc_var_x1: f64,
    pub self_similarity: KsResult,
    pub stationarity: KsResult,
    /// `(lag, empirical autocovariance of unit increments, target)`; unit increments have variance 1.
    pub long_memory: Vec<(u64, f64, f64)>,
    pub increment_samples: usize,
    /// Empirical variance of the unit increments, for reference.
    pub increment_variance: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Mesh stability, self-similarity, stationary increments and long memory of the chaos-grid oracle.
pub fn run_oracle_suite(p: &Params, reps: usize, seed: u64) -> Result<OracleReport> {
    check_reps(reps)?;
    if reps < 100 {
        return Err(Error::Input("the oracle suite needs at least 100 replicates".into()));
    }
    let h = p.hurst();
    let k = constants_for(h, CONSTANT_BUDGET)?;
    let coarse = ChaosGrid::new(&ChaosGridSpec::new(vec![1.0], 2.0 * ORACLE_MESH), h, p.a())?.exact_variance(0, k.c_h);
    let fine = ChaosGrid::new(&ChaosGridSpec::new(vec![1.0], ORACLE_MESH), h, p.a())?.exact_variance(0, k.c_h);

    let paths = oracle_samples(p, vec![0.5, 1.0, 1.5, 2.0], ORACLE_MESH, reps, seed)?;
    let x1: Vec<f64> = paths.iter().map(|v| v[1]).collect();
    let half = reps / 2;
    let x1_a: Vec<f64> = paths[..half].iter().map(|v| v[1]).collect();
    let x2_b: Vec<f64> = paths[half..].iter().map(|v| 2f64.powf(-h) * v[3]).collect();
    let inc_b: Vec<f64> = paths[half..].iter().map(|v| v[2] - v[0]).collect();
    let self_similarity = ks_two_sample(&x1_a, &x2_b)?;
    let stationarity = ks_two_sample(&x1_a, &inc_b)?;

    // Unit increments of long paths.
    let len = 40usize;
    let lm_reps = 200_000usize.div_ceil(len);
    let lm_grid: Vec<f64> = (0..=len).map(|j| j as f64).collect();
    let lm_paths = oracle_samples(p, lm_grid[1..].to_vec(), 1.0 / 32.0, lm_reps, seed ^ ORACLE_SALT)?;
    let incs: Vec<Vec<f64>> = lm_paths
        .iter()
        .map(|v| {
            let mut prev = 0.0;
            v.iter()
                .map(|&x| {
                    let d = x - prev;
                    prev = x;
                    d
                })
                .collect()
        })
        .collect();
    let var0 = mean(&incs.iter().flat_map(|v| v.iter().map(|d| d * d)).collect::<Vec<_>>());
    let long_memory: Vec<(u64, f64, f64)> = [5u64, 10, 20]
        .iter()
        .map(|&lag| {
            let l = lag as usize;
            let prods: Vec<f64> = incs.iter().flat_map(|v| (0..len - l).map(move |j| v[j] * v[j + l])).collect();
            (lag, mean(&prods), h * (2.0 * h - 1.0) * (lag as f64).powf(2.0 * h - 2.0))
        })
        .collect();

    let mc_var = variance(&x1);
    let mut checks = vec![
        Check::within("mesh_halving_rel_change", (fine - coarse).abs() / fine, 0.0, 0.05),
        Check::within("var_x1", mc_var, 1.0, 3.0 * variance_std_err(&x1) + 0.1),
        Check::within("mean_x1", mean(&x1), 0.0, 3.0 * (mc_var / reps as f64).sqrt()),
        Check::flag("self_similarity_ks", self_similarity.statistic, 0.0, self_similarity.pass),
        Check::flag("stationarity_ks", stationarity.statistic, 0.0, stationarity.pass),
    ];
    for &(lag, rho, target) in &long_memory {
        checks.push(Check::within(&format!("long_memory_lag{lag}"), rho, target, 0.3 * target));
    }
    let pass = checks.iter().all(|c| c.pass);
    let header = ReportHeader::new(
        "oracle",
        p,
        seed,
        reps,
        serde_json::json!({ "mesh": ORACLE_MESH, "long_memory_len": len, "long_memory_reps": lm_reps }),
        &[("mesh_halving", 0.05), ("std_errs", 3.0), ("bias_allowance", 0.1), ("ks_level", 0.01), ("long_memory_rel", 0.3)],
    )?;
    Ok(OracleReport {
        header,
        exact_var_coarse: coarse,
        exact_var_fine: fine,
        mc_var_x1: mc_var,
        self_similarity,
        stationarity,
        long_memory,
        increment_samples: lm_reps * len,
        increment_variance: var0,
        checks,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub header: ReportHeader,
    pub norm_sq: f64,
    pub identity_residual: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// `c(H)` with its quadrature error, and `2c²‖g_1‖² = 1` against an independent tighter recomputation of `‖g_1‖²`.
pub fn run_constants(p: &Params) -> Result<ConstantsReport> {
    let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
    let (norm_sq, _) = kernel_norm_sq(p.hurst(), 1e-7, 4 * CONSTANT_BUDGET)?;
    let identity_residual = 2.0 * k.c_h * k.c_h * norm_sq - 1.0;
    let checks = vec![
        Check::within("c_h_rel_err", k.c_h_rel_err, 0.0, 1e-4),
        Check::within("identity", identity_residual, 0.0, 1e-4),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let header = ReportHeader::new("constants", p, p.seed(), 0, serde_json::json!({}), &[("c_h_rel_err", 1e-4), ("identity", 1e-4)])?;
    Ok(ConstantsReport { header, norm_sq, identity_residual, checks, pass })
}
