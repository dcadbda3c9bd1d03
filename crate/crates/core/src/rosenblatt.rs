//! Assembly of the approximating processes `X^{H,n}` and of the grid-Brownian reference.
//!
//! `Y1_s = ∫_{−∞}^0 (s−x)^{H/2−1} dB(x)` carries the past, `Y3_s = ∫_0^s (s+ε−x)^{H/2−1} dB(x)`
//! the present. The components are time integrals of their products:
//! `X1 = c∫:Y1²:`, `X2 = c∫Y1·Y3`, `X3 = c∫:Y3²:` and `X = X1 + 2·X2 + X3`.
//! The Wick squares `:Y²: = Y² − E Y²` subtract the Brownian trace, computed in closed
//! form; the raw squares are kept alongside.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{riemann_unchecked, stieltjes_unchecked, wiener_unchecked};
use crate::kernels::{constants_for, pow_diff, seg_f, KernelConstants};
use crate::oracle::{remainder_summary, RemainderSummary};
use crate::params::{alpha_n, Params, RawParams};
use crate::paths::{fmt17, simulate_driver_bundle, DriverBundle, DriverMesh, PiecewiseLinearPath};
use crate::rng::{replicate_seed, Tag};
use crate::transport::{couple_transport_backward, couple_with, default_block_len, simulate_transport_anchored};

/// Evaluation budget for the normalizing constant.
pub const CONSTANT_BUDGET: usize = 4000;

/// How the transport paths relate to the Brownian drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Quantile-coupled to `B1`, `B2`, `B3`.
    Coupled,
    /// Independent of the drivers.
    Independent,
}

/// A path driving `Y3`: a transport path (exact Stieltjes sums) or a sampled Brownian path.
#[derive(Debug, Clone, Copy)]
pub enum Driver<'a> {
    Transport(&'a PiecewiseLinearPath),
    Brownian(&'a PiecewiseLinearPath),
}

/// `Y3` variant: shifted singularity (`s+ε`, upper limit `s`) or primed (`s`, upper limit `s−ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Y3Form {
    pub eps: f64,
    pub primed: bool,
}

fn check_eps_window(eps: f64, a: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= -a && eps <= -1.0 / a) {
        return Err(Error::Domain(format!(
            "eps = {eps} must lie in (0, min(|a|, 1/|a|)] for a = {a}"
        )));
    }
    Ok(())
}

/// `Y^{1,H,n}_s` from the transport paths `Z2` on `[a, 0]` and `Z3` on `[1/a, 0]`.
pub fn eval_y1_approx(s: f64, z2: &PiecewiseLinearPath, z3: &PiecewiseLinearPath, p: &Params) -> Result<f64> {
    y1_approx_eps(s, z2, z3, p, p.epsilon())
}

pub(crate) fn y1_approx_eps(s: f64, z2: &PiecewiseLinearPath, z3: &PiecewiseLinearPath, p: &Params, eps: f64) -> Result<f64> {
    let a = p.a();
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive")));
    }
    check_eps_window(eps, a)?;
    if z2.start() > a || z2.end() < 0.0 || z3.start() > 1.0 / a || z3.end() < 0.0 {
        return Err(Error::Domain("transport paths do not cover [a, 0] and [1/a, 0]".into()));
    }
    let h = p.hurst();
    let boundary = (s - a).powf(h / 2.0 - 1.0) * z2.eval(a);
    let far = riemann_unchecked(s, z3, 1.0 / a, -eps, h)?;
    let near = stieltjes_unchecked(s, z2, a, -eps, h);
    let last = stieltjes_unchecked(s + eps, z2, -eps, 0.0, h);
    Ok(boundary - far + near + last)
}

/// `Y^{1,H}_s` on the sampled drivers: `f_s(a)B2(a) − ∫_{1/a}^{−δ} ∂f_s(1/u) u^{−3} B3 du + ∫_a^0 f_s dB2`.
///
/// The piece of the `B3` integral over `[−δ, 0]` is dropped; see [`ErrorBudget`].
pub fn eval_y1_reference(s: f64, d: &DriverBundle, p: &Params) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive")));
    }
    let a = p.a();
    let h = p.hurst();
    let boundary = (s - a).powf(h / 2.0 - 1.0) * d.b2.eval(a);
    let far = riemann_unchecked(s, &d.b3, 1.0 / a, -d.delta, h)?;
    let near = wiener_unchecked(s, &d.b2, a, 0.0, h);
    Ok(boundary - far + near)
}

/// `Y3_s = ∫_lower^s (s+ε−x)^{H/2−1} dZ(x)`, or the primed form `∫_lower^{s−ε} (s−x)^{H/2−1} dZ(x)`.
pub fn eval_y3(s: f64, driver: Driver<'_>, p: &Params, lower: f64, form: Y3Form) -> Result<f64> {
    let (shift, upper) = if form.primed { (0.0, s - form.eps) } else { (form.eps, s) };
    if !(form.eps > 0.0) {
        return Err(Error::Domain(format!("eps = {} must be positive", form.eps)));
    }
    if upper <= lower {
        return Ok(0.0);
    }
    let path = match driver {
        Driver::Transport(z) | Driver::Brownian(z) => z,
    };
    if lower < path.start() || upper > path.end() {
        return Err(Error::Domain(format!(
            "[{lower}, {upper}] not inside the path domain [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    let top = s + shift;
    Ok(match driver {
        Driver::Transport(z) => stieltjes_unchecked(top, z, lower, upper, p.hurst()),
        Driver::Brownian(b) => wiener_unchecked(top, b, lower, upper, p.hurst()),
    })
}

/// `∫_{x0}^{x1} (top−x)^{H−2} dx`.
fn int_f_sq(top: f64, x0: f64, x1: f64, hurst: f64) -> f64 {
    if x1 <= x0 {
        return 0.0;
    }
    -pow_diff(top - x1, x1 - x0, hurst - 1.0) / (1.0 - hurst)
}

/// Brownian variance of the `Y1` functional `∫_b^0 (k(x) − f_s(b)) dB(x)` with
/// `k = f_s` on `[b, split]` and `k = f_{s+shift}` on `[split, 0]`.
pub(crate) fn trace_y1(s: f64, b: f64, split: f64, shift: f64, hurst: f64) -> f64 {
    let c = (s - b).powf(hurst / 2.0 - 1.0);
    let part = |top: f64, x0: f64, x1: f64| {
        if x1 <= x0 {
            return 0.0;
        }
        int_f_sq(top, x0, x1, hurst) - 2.0 * c * seg_f(top, x0, x1, hurst) + c * c * (x1 - x0)
    };
    (part(s, b, split) + part(s + shift, split, 0.0)).max(0.0)
}

/// Brownian variance of the shifted `Y3_s`: `(ε^{H−1} − (s+ε)^{H−1})/(1−H)`.
pub(crate) fn trace_y3(s: f64, eps: f64, hurst: f64) -> f64 {
    -pow_diff(eps, s, hurst - 1.0) / (1.0 - hurst)
}

/// Shared quadrature nodes in time: `J` midpoints per output cell, graded in the first.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    t_grid: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `ends[k]` is one past the last node of output cell `k`.
    ends: Vec<usize>,
}

impl TimeMesh {
    /// `t_grid` starts at 0 and increases; the first cell uses `s = t_1 v^κ`.
    pub fn new(t_grid: &[f64], per_cell: usize, kappa: f64) -> Result<Self> {
        if t_grid.len() < 2 || t_grid[0] != 0.0 {
            return Err(Error::Input("time grid must start at 0 and hold at least two points".into()));
        }
        if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("time grid must be strictly increasing".into()));
        }
        if per_cell == 0 || !(kappa >= 1.0) {
            return Err(Error::Input(format!("need per_cell >= 1 and kappa >= 1 (got {per_cell}, {kappa})")));
        }
        let mut nodes = Vec::with_capacity(per_cell * t_grid.len());
        let mut weights = Vec::with_capacity(per_cell * t_grid.len());
        let mut ends = Vec::with_capacity(t_grid.len() - 1);
        let t1 = t_grid[1];
        for j in 0..per_cell {
            let v = (j as f64 + 0.5) / per_cell as f64;
            nodes.push(t1 * v.powf(kappa));
            weights.push(t1 * kappa * v.powf(kappa - 1.0) / per_cell as f64);
        }
        ends.push(nodes.len());
        for w in t_grid[1..].windows(2) {
            let h = (w[1] - w[0]) / per_cell as f64;
            for j in 0..per_cell {
                nodes.push(w[0] + (j as f64 + 0.5) * h);
                weights.push(h);
            }
            ends.push(nodes.len());
        }
        Ok(TimeMesh { t_grid: t_grid.to_vec(), nodes, weights, ends })
    }

    pub fn for_params(p: &Params) -> Result<Self> {
        TimeMesh::new(&p.output_grid(), p.time_quad_points(), 2.0 / p.hurst())
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative weighted sums of `g(node)` at every grid time, starting with 0.
    pub fn cumulative<F: FnMut(usize) -> f64>(&self, mut g: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.t_grid.len());
        out.push(0.0);
        let mut acc = 0.0;
        let mut start = 0;
        for &end in &self.ends {
            for i in start..end {
                acc += self.weights[i] * g(i);
            }
            out.push(acc);
            start = end;
        }
        out
    }
}

/// Component paths on the output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    /// `c∫Y1²` without the trace.
    pub x1_raw: Vec<f64>,
    /// `c∫Y3²` without the trace.
    pub x3_raw: Vec<f64>,
}

impl Components {
    /// `X1 + 2·X2 + X3`.
    pub fn assembled(&self) -> Vec<f64> {
        (0..self.x1.len()).map(|i| self.x1[i] + 2.0 * self.x2[i] + self.x3[i]).collect()
    }

    pub fn zeros(len: usize) -> Self {
        Components {
            x1: vec![0.0; len],
            x2: vec![0.0; len],
            x3: vec![0.0; len],
            x1_raw: vec![0.0; len],
            x3_raw: vec![0.0; len],
        }
    }
}

/// Values of `Y1`, `Y3` (and the `Y3` used in the cross term) at the mesh nodes, with traces.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues {
    pub y1: Vec<f64>,
    pub y3: Vec<f64>,
    pub y3_cross: Vec<f64>,
    pub trace1: Vec<f64>,
    pub trace3: Vec<f64>,
}

/// Integrates node values into components.
pub fn components_from_values(mesh: &TimeMesh, v: &NodeValues, c_h: f64) -> Components {
    let x1_raw = mesh.cumulative(|i| c_h * v.y1[i] * v.y1[i]);
    let x3_raw = mesh.cumulative(|i| c_h * v.y3[i] * v.y3[i]);
    let x1 = mesh.cumulative(|i| c_h * (v.y1[i] * v.y1[i] - v.trace1[i]));
    let x3 = mesh.cumulative(|i| c_h * (v.y3[i] * v.y3[i] - v.trace3[i]));
    let x2 = mesh.cumulative(|i| c_h * v.y1[i] * v.y3_cross[i]);
    Components { x1, x2, x3, x1_raw, x3_raw }
}

/// The three transport paths of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Transports {
    pub z1: PiecewiseLinearPath,
    pub z2: PiecewiseLinearPath,
    pub z3: PiecewiseLinearPath,
    pub block_len: Option<f64>,
}

/// Transport paths at intensity `n`: coupled to the bundle's drivers, or independent of them.
pub fn make_transports(d: &DriverBundle, p: &Params, n: u64, coupling: Coupling, seed: u64) -> Result<Transports> {
    let a = p.a();
    let t_end = p.horizon();
    match coupling {
        Coupling::Coupled => {
            let l1 = default_block_len(n, t_end);
            let z1 = couple_with(&d.b1, n, l1, seed, Tag::Z1)?.into_path();
            let z2 = couple_transport_backward(&d.b2, n, default_block_len(n, -a), seed, Tag::Z2)?.into_path();
            let z3 = couple_transport_backward(&d.b3, n, default_block_len(n, -1.0 / a), seed, Tag::Z3)?.into_path();
            Ok(Transports { z1, z2, z3, block_len: Some(l1) })
        }
        Coupling::Independent => {
            let z1 = simulate_transport_anchored(n, (0.0, t_end), false, replicate_seed(seed, 1), Tag::Independent)?;
            let z2 = simulate_transport_anchored(n, (a, 0.0), true, replicate_seed(seed, 2), Tag::Independent)?;
            let z3 = simulate_transport_anchored(n, (1.0 / a, 0.0), true, replicate_seed(seed, 3), Tag::Independent)?;
            Ok(Transports { z1: z1.into_path(), z2: z2.into_path(), z3: z3.into_path(), block_len: None })
        }
    }
}

/// Node values of the approximation driven by transport paths.
pub fn approx_values(mesh: &TimeMesh, z: &Transports, p: &Params, primed_cross: bool) -> Result<NodeValues> {
    let eps = p.epsilon();
    let h = p.hurst();
    let a = p.a();
    check_eps_window(eps, a)?;
    let nodes = mesh.nodes();
    let mut v = NodeValues {
        y1: Vec::with_capacity(nodes.len()),
        y3: Vec::with_capacity(nodes.len()),
        y3_cross: Vec::with_capacity(nodes.len()),
        trace1: Vec::with_capacity(nodes.len()),
        trace3: Vec::with_capacity(nodes.len()),
    };
    let shifted = Y3Form { eps, primed: false };
    let primed = Y3Form { eps, primed: true };
    for &s in nodes {
        v.y1.push(y1_approx_eps(s, &z.z2, &z.z3, p, eps)?);
        let y3 = eval_y3(s, Driver::Transport(&z.z1), p, 0.0, shifted)?;
        v.y3.push(y3);
        v.y3_cross.push(if primed_cross { eval_y3(s, Driver::Transport(&z.z1), p, 0.0, primed)? } else { y3 });
        v.trace1.push(trace_y1(s, -1.0 / eps, -eps, eps, h));
        v.trace3.push(trace_y3(s, eps, h));
    }
    Ok(v)
}

/// Node values of the reference on the sampled drivers, with `ε` replaced by `eps_ref`.
/// The cross term uses the primed `Y3`.
pub fn reference_values(mesh: &TimeMesh, d: &DriverBundle, p: &Params, eps_ref: f64) -> Result<NodeValues> {
    if !(eps_ref > 0.0) {
        return Err(Error::Domain(format!("eps_ref = {eps_ref} must be positive")));
    }
    let h = p.hurst();
    let nodes = mesh.nodes();
    let mut v = NodeValues {
        y1: Vec::with_capacity(nodes.len()),
        y3: Vec::with_capacity(nodes.len()),
        y3_cross: Vec::with_capacity(nodes.len()),
        trace1: Vec::with_capacity(nodes.len()),
        trace3: Vec::with_capacity(nodes.len()),
    };
    let shifted = Y3Form { eps: eps_ref, primed: false };
    let primed = Y3Form { eps: eps_ref, primed: true };
    for &s in nodes {
        v.y1.push(eval_y1_reference(s, d, p)?);
        v.y3.push(eval_y3(s, Driver::Brownian(&d.b1), p, 0.0, shifted)?);
        v.y3_cross.push(eval_y3(s, Driver::Brownian(&d.b1), p, 0.0, primed)?);
        v.trace1.push(trace_y1(s, -1.0 / d.delta, 0.0, 0.0, h));
        v.trace3.push(trace_y3(s, eps_ref, h));
    }
    Ok(v)
}

/// `X1`, `X2`, `X3` of the approximation on `t_grid` from given transport paths.
pub fn build_components(
    t_grid: &[f64],
    z1: &PiecewiseLinearPath,
    z2: &PiecewiseLinearPath,
    z3: &PiecewiseLinearPath,
    p: &Params,
    c_h: f64,
) -> Result<Components> {
    let mesh = TimeMesh::new(t_grid, p.time_quad_points(), 2.0 / p.hurst())?;
    let z = Transports { z1: z1.clone(), z2: z2.clone(), z3: z3.clone(), block_len: None };
    let v = approx_values(&mesh, &z, p, false)?;
    Ok(components_from_values(&mesh, &v, c_h))
}

/// Reference `X̂` on `t_grid` from the sampled drivers.
pub fn build_reference(t_grid: &[f64], d: &DriverBundle, p: &Params, eps_ref: f64) -> Result<Vec<f64>> {
    if eps_ref > p.epsilon() / 8.0 {
        return Err(Error::Domain(format!(
            "eps_ref = {eps_ref} must not exceed eps_n/8 = {}",
            p.epsilon() / 8.0
        )));
    }
    let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
    let mesh = TimeMesh::new(t_grid, p.time_quad_points(), 2.0 / p.hurst())?;
    let v = reference_values(&mesh, d, p, eps_ref)?;
    Ok(components_from_values(&mesh, &v, k.c_h).assembled())
}

/// Options of [`assemble_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub coupling: Coupling,
    pub with_reference: bool,
    /// Defaults to `ε_n/8`.
    pub eps_ref: Option<f64>,
    /// Use the primed `Y3` in the cross term of the approximation.
    pub primed_cross: bool,
    /// Estimate the omitted remainder of the reference.
    pub estimate_remainder: bool,
    /// Largest accepted `n`; the cost grows like `n²`.
    pub max_n: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            coupling: Coupling::Coupled,
            with_reference: false,
            eps_ref: None,
            primed_cross: false,
            estimate_remainder: true,
            max_n: 256,
        }
    }
}

/// Everything a run's sidecar records besides the paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub params: RawParams,
    pub seed: u64,
    pub coupling: Coupling,
    pub epsilon_n: f64,
    pub alpha_n: Option<f64>,
    pub alpha_hat_n: Option<f64>,
    pub c_h: f64,
    pub c_h_rel_err: f64,
    pub block_len: Option<f64>,
    pub eps_ref: Option<f64>,
    pub primed_cross: bool,
    pub time_nodes: usize,
}

/// Known error sources of the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Smallest `|u|` of the `B3` grid.
    pub delta: f64,
    /// Standard deviation of the dropped `[−δ, 0]` piece of `Y1`, at `s → 0` where it is largest.
    pub y1_tail_sd: f64,
    /// Magnitude of the omitted remainder at `(T, eps_ref)`.
    pub remainder: Option<RemainderSummary>,
}

/// Standard deviation of `f_s(−1/δ)B(−1/δ) − ∫_{−∞}^{−1/δ} f_s dB` at `s = 0`.
pub fn y1_tail_sd(delta: f64, hurst: f64) -> f64 {
    let v = delta.powf(1.0 - hurst) * (1.0 / (1.0 - hurst) + 1.0);
    v.sqrt()
}

/// One realization of `X^{H,n}` (and optionally `X̂`) on the output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosenblattRun {
    pub t_grid: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub x: Vec<f64>,
    pub x1_raw: Vec<f64>,
    pub x3_raw: Vec<f64>,
    pub xref: Option<Vec<f64>>,
    pub reference: Option<Components>,
    pub meta: RunMeta,
    pub error_budget: Option<ErrorBudget>,
}

impl RosenblattRun {
    fn from_parts(t_grid: Vec<f64>, c: Components, reference: Option<Components>, meta: RunMeta, budget: Option<ErrorBudget>) -> Self {
        let x = c.assembled();
        let xref = reference.as_ref().map(Components::assembled);
        RosenblattRun {
            t_grid,
            x1: c.x1,
            x2: c.x2,
            x3: c.x3,
            x,
            x1_raw: c.x1_raw,
            x3_raw: c.x3_raw,
            xref,
            reference,
            meta,
            error_budget: budget,
        }
    }

    /// `t,X1,X2,X3,X[,Xref]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.xref.is_some() {
            writeln!(w, "t,X1,X2,X3,X,Xref")?;
        } else {
            writeln!(w, "t,X1,X2,X3,X")?;
        }
        for i in 0..self.t_grid.len() {
            write!(
                w,
                "{},{},{},{},{}",
                fmt17(self.t_grid[i]),
                fmt17(self.x1[i]),
                fmt17(self.x2[i]),
                fmt17(self.x3[i]),
                fmt17(self.x[i])
            )?;
            if let Some(r) = &self.xref {
                write!(w, ",{}", fmt17(r[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Sidecar document: schema version, metadata, error budget and the raw components.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": 1,
            "meta": self.meta,
            "error_budget": self.error_budget,
            "raw": {
                "x1_raw": self.x1_raw,
                "x3_raw": self.x3_raw,
            },
        })
    }
}

fn run_meta(p: &Params, seed: u64, opts: &RunOptions, k: KernelConstants, block_len: Option<f64>, eps_ref: Option<f64>, nodes: usize) -> RunMeta {
    RunMeta {
        params: p.raw(),
        seed,
        coupling: opts.coupling,
        epsilon_n: p.epsilon(),
        alpha_n: alpha_n(p.n(), p, false).ok(),
        alpha_hat_n: alpha_n(p.n(), p, true).ok(),
        c_h: k.c_h,
        c_h_rel_err: k.c_h_rel_err,
        block_len,
        eps_ref,
        primed_cross: opts.primed_cross,
        time_nodes: nodes,
    }
}

/// Full pipeline: drivers, transports, `Y` at the time nodes, components, assembly.
pub fn assemble_run(t_grid: &[f64], p: &Params, seed: u64, opts: &RunOptions) -> Result<RosenblattRun> {
    if p.n() > opts.max_n {
        return Err(Error::Budget { cells: p.n() as usize, limit: opts.max_n as usize });
    }
    let k = constants_for(p.hurst(), CONSTANT_BUDGET)?;
    let mesh = TimeMesh::new(t_grid, p.time_quad_points(), 2.0 / p.hurst())?;
    if t_grid[t_grid.len() - 1] > p.horizon() {
        return Err(Error::Domain(format!("output grid ends after T = {}", p.horizon())));
    }
    let drivers = simulate_driver_bundle(p, &DriverMesh::from_params(p), seed)?;
    let z = make_transports(&drivers, p, p.n(), opts.coupling, seed)?;
    let approx = components_from_values(&mesh, &approx_values(&mesh, &z, p, opts.primed_cross)?, k.c_h);
    let (reference, budget, eps_ref) = if opts.with_reference {
        let eps_ref = opts.eps_ref.unwrap_or(p.epsilon() / 8.0);
        if eps_ref > p.epsilon() / 8.0 {
            return Err(Error::Domain(format!(
                "eps_ref = {eps_ref} must not exceed eps_n/8 = {}",
                p.epsilon() / 8.0
            )));
        }
        let r = components_from_values(&mesh, &reference_values(&mesh, &drivers, p, eps_ref)?, k.c_h);
        let remainder = if opts.estimate_remainder {
            Some(remainder_summary(t_grid[t_grid.len() - 1], eps_ref, p.hurst(), k.c_h)?)
        } else {
            None
        };
        let budget = ErrorBudget { delta: drivers.delta, y1_tail_sd: y1_tail_sd(drivers.delta, p.hurst()), remainder };
        (Some(r), Some(budget), Some(eps_ref))
    } else {
        (None, None, None)
    };
    let meta = run_meta(p, seed, opts, k, z.block_len, eps_ref, mesh.nodes().len());
    Ok(RosenblattRun::from_parts(t_grid.to_vec(), approx, reference, meta, budget))
}
