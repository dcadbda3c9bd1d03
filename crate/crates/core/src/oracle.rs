//! Independent ground truth: the Rosenblatt process as a discrete double Wiener–Itô sum.
//!
//! On cells `C_i` with Brownian increments `ΔB_i`,
//! `X_t ≈ c Σ_{i≠j} G_ij ΔB_i ΔB_j`, `G_ij = ∫_0^t φ_i(u) φ_j(u) du`,
//! where `φ_i(u)` is the average of `(u−x)_+^{H/2−1}` over `C_i`. Since `G` factorizes
//! through `u`, the off-diagonal sum is `∫_0^t [(Σ_i φ_i ΔB_i)² − Σ_i φ_i² ΔB_i²] du`,
//! evaluated on fixed `u`-nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{constants_for, kernel_g, seg_f};
use crate::params::Params;
use crate::paths::PiecewiseLinearPath;
use crate::quad::gauss_legendre;
use crate::rng::{Stream, Tag};
use crate::stats::quantiles;

/// Cell layout of the chaos-grid oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosGridSpec {
    /// Left end of the truncated domain.
    pub x_min: f64,
    /// Width of the uniform cells.
    pub mesh: f64,
    /// Output times; each must be a multiple of `mesh`.
    pub t_grid: Vec<f64>,
    /// Uniform cells cover `[uniform_from, max t]`; further left the widths grow geometrically.
    pub uniform_from: f64,
    /// Growth ratio of the geometric cells.
    pub ratio: f64,
    /// Gauss nodes per uniform cell in the `u`-integral.
    pub nodes_per_cell: usize,
    /// Limit on the size of the kernel table (`u`-nodes × cells).
    pub max_entries: usize,
}

impl ChaosGridSpec {
    pub fn new(t_grid: Vec<f64>, mesh: f64) -> Self {
        ChaosGridSpec {
            x_min: -1e12,
            mesh,
            t_grid,
            uniform_from: -2.0,
            ratio: 1.15,
            nodes_per_cell: 4,
            max_entries: 40_000_000,
        }
    }

    pub fn check(&self, a: f64) -> Result<()> {
        if !(self.mesh > 0.0 && self.mesh <= self.x_min.abs() / 100.0) {
            return Err(Error::Mesh(format!("mesh {} must lie in (0, |x_min|/100]", self.mesh)));
        }
        if !(self.x_min <= 4.0 * a) {
            return Err(Error::Domain(format!("x_min = {} must not exceed 4a = {}", self.x_min, 4.0 * a)));
        }
        if !(self.uniform_from < 0.0 && self.uniform_from > self.x_min) {
            return Err(Error::Domain(format!("uniform region must start in (x_min, 0), got {}", self.uniform_from)));
        }
        if !(self.ratio > 1.0) || self.nodes_per_cell == 0 {
            return Err(Error::Mesh("ratio must exceed 1 and nodes_per_cell be positive".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.windows(2).any(|w| !(w[0] < w[1])) || self.t_grid[0] < 0.0 {
            return Err(Error::Input("t_grid must be nonnegative and strictly increasing".into()));
        }
        for &t in &self.t_grid {
            let k = (t / self.mesh).round();
            if (k * self.mesh - t).abs() > 1e-9 * self.mesh.max(t) {
                return Err(Error::Mesh(format!("output time {t} is not a multiple of the mesh {}", self.mesh)));
            }
        }
        Ok(())
    }
}

/// Precomputed kernel table of a [`ChaosGridSpec`]; sampling only draws increments.
#[derive(Debug, Clone)]
pub struct ChaosGrid {
    t_grid: Vec<f64>,
    /// Cell knots, increasing.
    knots: Vec<f64>,
    /// Per `u`-node: quadrature weight, number of active cells and the first index into `phi`.
    weights: Vec<f64>,
    active: Vec<usize>,
    offsets: Vec<usize>,
    phi: Vec<f64>,
    /// `ends[m]` is the number of `u`-nodes below `t_grid[m]`.
    ends: Vec<usize>,
}

impl ChaosGrid {
    pub fn new(spec: &ChaosGridSpec, hurst: f64, a: f64) -> Result<Self> {
        spec.check(a)?;
        let h = spec.mesh;
        let t_end = spec.t_grid[spec.t_grid.len() - 1];
        let k_end = (t_end / h).round() as i64;
        let k_start = (spec.uniform_from / h).floor() as i64;
        let mut knots = Vec::new();
        // Geometric cells from uniform_from leftwards to x_min.
        let mut far = Vec::new();
        let mut x = k_start as f64 * h;
        let mut w = h * spec.ratio;
        while x > spec.x_min {
            x = (x - w).max(spec.x_min);
            far.push(x);
            w *= spec.ratio;
        }
        knots.extend(far.iter().rev());
        knots.extend((k_start..=k_end.max(1)).map(|k| k as f64 * h));

        let inv = 2.0 / hurst;
        let (gx, gw) = gauss_legendre(spec.nodes_per_cell);
        let mut weights = Vec::new();
        let mut active = Vec::new();
        let mut offsets = Vec::new();
        let mut phi = Vec::new();
        let mut ends = Vec::new();
        let mut grid_iter = spec.t_grid.iter().peekable();
        while let Some(&&t) = grid_iter.peek() {
            if t <= 0.0 {
                ends.push(0);
                grid_iter.next();
            } else {
                break;
            }
        }
        for k in 0..k_end.max(0) {
            let u0 = k as f64 * h;
            // u = u0 + h w^{2/H} flattens the (u − knot)^{H/2} behaviour at the cell's left end.
            for (xi, wi) in gx.iter().zip(&gw) {
                let v = 0.5 * (xi + 1.0);
                let u = u0 + h * v.powf(inv);
                let jac = h * inv * v.powf(inv - 1.0) * 0.5 * wi;
                let n_active = knots.partition_point(|&x| x < u).min(knots.len() - 1);
                offsets.push(phi.len());
                active.push(n_active);
                weights.push(jac);
                for i in 0..n_active {
                    let (x0, x1) = (knots[i], knots[i + 1]);
                    phi.push(seg_f(u, x0, x1.min(u), hurst) / (x1 - x0));
                }
                if phi.len() > spec.max_entries {
                    return Err(Error::Budget { cells: phi.len(), limit: spec.max_entries });
                }
            }
            let right = (k + 1) as f64 * h;
            while let Some(&&t) = grid_iter.peek() {
                if (t - right).abs() <= 1e-9 * h.max(t) {
                    ends.push(weights.len());
                    grid_iter.next();
                } else {
                    break;
                }
            }
        }
        Ok(ChaosGrid { t_grid: spec.t_grid.clone(), knots, weights, active, offsets, phi, ends })
    }

    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// Cell increments of Brownian motion from one stream.
    pub fn increments(&self, seed: u64) -> Vec<f64> {
        let mut s = Stream::new(seed, Tag::Chaos, 0);
        self.knots.windows(2).map(|w| (w[1] - w[0]).sqrt() * s.normal()).collect()
    }

    /// `c Σ_{i≠j} G_ij ΔB_i ΔB_j` at every output time for given increments.
    pub fn evaluate(&self, db: &[f64], c_h: f64) -> Vec<f64> {
        let mut per_node = Vec::with_capacity(self.weights.len());
        for k in 0..self.weights.len() {
            let row = &self.phi[self.offsets[k]..self.offsets[k] + self.active[k]];
            let mut lin = 0.0;
            let mut diag = 0.0;
            for (f, b) in row.iter().zip(db) {
                let y = f * b;
                lin += y;
                diag += y * y;
            }
            per_node.push(self.weights[k] * (lin * lin - diag));
        }
        let mut out = Vec::with_capacity(self.ends.len());
        let mut acc = 0.0;
        let mut done = 0;
        for &end in &self.ends {
            for v in &per_node[done..end] {
                acc += v;
            }
            done = end;
            out.push(c_h * acc);
        }
        out
    }

    pub fn sample(&self, c_h: f64, seed: u64) -> Vec<f64> {
        self.evaluate(&self.increments(seed), c_h)
    }

    /// Exact variance of the discrete sum at output index `m`:
    /// `2c² (Σ_{k,l} W_k W_l K_kl² − Σ_i h_i² G_ii²)`, `K_kl = Σ_i h_i φ_ik φ_il`.
    pub fn exact_variance(&self, m: usize, c_h: f64) -> f64 {
        let nodes = self.ends[m];
        let widths: Vec<f64> = self.knots.windows(2).map(|w| w[1] - w[0]).collect();
        let row = |k: usize| &self.phi[self.offsets[k]..self.offsets[k] + self.active[k]];
        let mut full = 0.0;
        for k in 0..nodes {
            let rk = row(k);
            for l in 0..=k {
                let rl = row(l);
                let kl: f64 = rk.iter().zip(rl).zip(&widths).map(|((a, b), h)| h * a * b).sum();
                let term = self.weights[k] * self.weights[l] * kl * kl;
                full += if l == k { term } else { 2.0 * term };
            }
        }
        let mut g_diag = vec![0.0; self.cells()];
        for k in 0..nodes {
            for (i, f) in row(k).iter().enumerate() {
                g_diag[i] += self.weights[k] * f * f;
            }
        }
        let diag: f64 = g_diag.iter().zip(&widths).map(|(g, h)| (h * g).powi(2)).sum();
        2.0 * c_h * c_h * (full - diag)
    }
}

/// One chaos-grid sample path of `X` on `spec.t_grid`.
pub fn simulate_chaos_grid(spec: &ChaosGridSpec, p: &Params, c_h: f64, seed: u64) -> Result<Vec<f64>> {
    let grid = ChaosGrid::new(spec, p.hurst(), p.a())?;
    Ok(grid.sample(c_h, seed))
}

/// Cells of `b` inside `[x0, x1]`: midpoints and increments.
fn cells_in(b: &PiecewiseLinearPath, x0: f64, x1: f64) -> (Vec<f64>, Vec<f64>) {
    let t = b.times();
    let mut mids = Vec::new();
    let mut incs = Vec::new();
    for k in 0..t.len() - 1 {
        let l = t[k].max(x0);
        let r = t[k + 1].min(x1);
        if r > l {
            mids.push(0.5 * (l + r));
            incs.push(b.eval(r) - b.eval(l));
        }
    }
    (mids, incs)
}

/// Largest number of cells accepted by [`grid_double_sum`].
pub const DOUBLE_SUM_MAX_CELLS: usize = 8192;

/// `Σ_{i≠j} k(x_i, x_j) ΔB_i ΔB_j` over the cells of `b` inside `region`, at cell midpoints.
pub fn grid_double_sum<K: FnMut(f64, f64) -> f64>(mut kernel: K, b: &PiecewiseLinearPath, region: (f64, f64)) -> Result<f64> {
    let (mids, incs) = cells_in(b, region.0, region.1);
    if mids.len() > DOUBLE_SUM_MAX_CELLS {
        return Err(Error::Budget { cells: mids.len(), limit: DOUBLE_SUM_MAX_CELLS });
    }
    let mut acc = 0.0;
    for i in 0..mids.len() {
        for j in 0..mids.len() {
            if i != j {
                acc += kernel(mids[i], mids[j]) * incs[i] * incs[j];
            }
        }
    }
    Ok(acc)
}

/// Monte Carlo summary of `c(H)·|G_t|`, the remainder omitted by the `ε`-shifted reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSummary {
    pub t: f64,
    pub eps: f64,
    pub reps: usize,
    pub cells: usize,
    pub mean: f64,
    pub std: f64,
    /// 5, 25, 50, 75 and 95% quantiles.
    pub quantiles: [f64; 5],
}

/// Banded kernel `r(x1,x2) = ∫_{x1∨x2}^{(x1∨x2+ε)∧t} (s−x1)^{H/2−1}(s−x2)^{H/2−1} ds` on a uniform grid of `[0, t]`.
struct RemainderTable {
    h: f64,
    cells: usize,
    /// `band[d−1][i]` is the kernel between cells `i` and `i+d`.
    band: Vec<Vec<f64>>,
}

impl RemainderTable {
    fn new(t: f64, eps: f64, hurst: f64) -> Result<Self> {
        let cells = ((4.0 * t / eps).ceil() as usize).max(16);
        if cells > DOUBLE_SUM_MAX_CELLS * 8 {
            return Err(Error::Budget { cells, limit: DOUBLE_SUM_MAX_CELLS * 8 });
        }
        let h = t / cells as f64;
        let width = ((eps / h).ceil() as usize).min(cells - 1);
        let mut band = Vec::with_capacity(width);
        for d in 1..=width {
            let mut row = Vec::with_capacity(cells - d);
            for i in 0..cells - d {
                let x1 = (i as f64 + 0.5) * h;
                let x2 = (i as f64 + d as f64 + 0.5) * h;
                let upper = (x2 + eps).min(t);
                row.push(if upper > x2 { kernel_g(upper, x1, x2, hurst, 1e-9)? } else { 0.0 });
            }
            band.push(row);
        }
        Ok(RemainderTable { h, cells, band })
    }

    fn sample(&self, seed: u64, rep: u64) -> f64 {
        let mut s = Stream::new(seed, Tag::Remainder, rep);
        let sd = self.h.sqrt();
        let db: Vec<f64> = (0..self.cells).map(|_| sd * s.normal()).collect();
        let mut acc = 0.0;
        for (d, row) in self.band.iter().enumerate() {
            for (i, k) in row.iter().enumerate() {
                acc += k * db[i] * db[i + d + 1];
            }
        }
        2.0 * acc
    }
}

fn summarize(t: f64, eps: f64, cells: usize, mut values: Vec<f64>) -> RemainderSummary {
    let reps = values.len();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps.max(2) - 1) as f64;
    values.sort_by(f64::total_cmp);
    let q = quantiles(&values, &[0.05, 0.25, 0.5, 0.75, 0.95]);
    RemainderSummary { t, eps, reps, cells, mean, std: var.sqrt(), quantiles: [q[0], q[1], q[2], q[3], q[4]] }
}

/// Summary of `c(H)|G_t|` over `reps` independent grids of Brownian increments on `[0, t]`.
pub fn estimate_remainder(t: f64, eps: f64, p: &Params, reps: usize, seed: u64) -> Result<RemainderSummary> {
    if !(t > 0.0) {
        return Ok(summarize(t.max(0.0), eps, 0, vec![0.0; reps.max(2)]));
    }
    if !(eps > 0.0 && eps < t) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, t = {t})")));
    }
    if reps < 2 {
        return Err(Error::Input("at least two replicates are needed".into()));
    }
    let c_h = constants_for(p.hurst(), crate::rosenblatt::CONSTANT_BUDGET)?.c_h;
    let table = RemainderTable::new(t, eps, p.hurst())?;
    let values = (0..reps as u64).map(|r| c_h * table.sample(seed, r).abs()).collect();
    Ok(summarize(t, eps, table.cells, values))
}

/// Seed and replicate count of the remainder estimate recorded in run error budgets.
pub const REMAINDER_SEED: u64 = 0x0D0E_0F10;
pub const REMAINDER_REPS: usize = 200;

/// Memoized remainder estimate for run error budgets.
pub(crate) fn remainder_summary(t: f64, eps: f64, hurst: f64, c_h: f64) -> Result<RemainderSummary> {
    type Cache = Mutex<HashMap<(u64, u64, u64), Arc<RemainderSummary>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (t.to_bits(), eps.to_bits(), hurst.to_bits());
    if let Some(s) = cache.lock().expect("remainder cache poisoned").get(&key) {
        return Ok((**s).clone());
    }
    if !(eps > 0.0 && eps < t) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, t = {t})")));
    }
    let table = RemainderTable::new(t, eps, hurst)?;
    let values = (0..REMAINDER_REPS as u64).map(|r| c_h * table.sample(REMAINDER_SEED, r).abs()).collect();
    let s = summarize(t, eps, table.cells, values);
    cache.lock().expect("remainder cache poisoned").insert(key, Arc::new(s.clone()));
    Ok(s)
}
