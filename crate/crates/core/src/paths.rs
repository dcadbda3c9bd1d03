//! Path containers and the jointly-lawful Brownian drivers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::rng::{Stream, Tag};

/// Continuous path, linear between strictly increasing knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Sampled Brownian driver; linear interpolation between grid knots.
pub type GridPath = PiecewiseLinearPath;

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Input(format!(
                "{} knots but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Input("a path needs at least two knots".into()));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Input(format!("knots not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(PiecewiseLinearPath { times, values })
    }

    /// Builds without validation; callers guarantee increasing knots.
    pub(crate) fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(times.len(), values.len());
        PiecewiseLinearPath { times, values }
    }

    /// The zero path on `[t0, t1]`.
    pub fn zero(t0: f64, t1: f64) -> Self {
        PiecewiseLinearPath { times: vec![t0, t1], values: vec![0.0, 0.0] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Slope of segment `k`, between knots `k` and `k+1`.
    pub fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.times[k + 1] - self.times[k])
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t < self.start() || t > self.end() || t.is_nan() {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        Ok(self.eval(t))
    }

    /// Linear interpolation; clamps outside the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.segment_index(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t <= t0 {
            return self.values[k];
        }
        if t >= t1 {
            return self.values[k + 1];
        }
        let w = (t - t0) / (t1 - t0);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` containing `t` (clamped).
    pub fn segment_index(&self, t: f64) -> usize {
        let n = self.times.len();
        let k = self.times.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(n - 2)
    }

    /// `λ·self`.
    pub fn scaled(&self, lambda: f64) -> Self {
        PiecewiseLinearPath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    /// `a·self + b·other` on the common domain, knots merged.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let t0 = self.start().max(other.start());
        let t1 = self.end().min(other.end());
        if !(t0 < t1) {
            return Err(Error::Domain("paths do not overlap".into()));
        }
        let times = merged_knots(self, other, t0, t1);
        let values = times.iter().map(|&t| a * self.eval(t) + b * other.eval(t)).collect();
        Ok(PiecewiseLinearPath { times, values })
    }

    /// The same path with extra knots inserted at the midpoint of every segment.
    pub fn refined(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.len());
        let mut values = Vec::with_capacity(2 * self.len());
        for k in 0..self.len() - 1 {
            times.push(self.times[k]);
            values.push(self.values[k]);
            let mid = 0.5 * (self.times[k] + self.times[k + 1]);
            if mid > self.times[k] && mid < self.times[k + 1] {
                times.push(mid);
                values.push(0.5 * (self.values[k] + self.values[k + 1]));
            }
        }
        times.push(self.end());
        values.push(self.values[self.len() - 1]);
        PiecewiseLinearPath { times, values }
    }

    /// `t ↦ self(−t)`.
    pub fn reflected(&self) -> Self {
        PiecewiseLinearPath {
            times: self.times.iter().rev().map(|t| -t).collect(),
            values: self.values.iter().rev().copied().collect(),
        }
    }

    /// Writes `t,value` rows preceded by a comment line naming the path.
    pub fn write_csv<W: Write>(&self, mut w: W, name: &str, seed: u64) -> std::io::Result<()> {
        writeln!(w, "# path={name} seed={seed}")?;
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt17(*t), fmt17(*v))?;
        }
        Ok(())
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn merged_knots(p: &PiecewiseLinearPath, q: &PiecewiseLinearPath, t0: f64, t1: f64) -> Vec<f64> {
    let mut out: Vec<f64> = p
        .times
        .iter()
        .chain(q.times.iter())
        .copied()
        .filter(|&t| t > t0 && t < t1)
        .collect();
    out.push(t0);
    out.push(t1);
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    out.dedup();
    out
}

/// `sup |P − Q|` over `[t0, t1]`.
///
/// Both paths are linear between knots, so the maximum is attained on the
/// merged knot set.
pub fn sup_distance(p: &PiecewiseLinearPath, q: &PiecewiseLinearPath, t0: f64, t1: f64) -> Result<f64> {
    if !(t0 <= t1) {
        return Err(Error::Domain(format!("empty interval [{t0}, {t1}]")));
    }
    for path in [p, q] {
        if t0 < path.start() || t1 > path.end() {
            return Err(Error::Domain(format!(
                "[{t0}, {t1}] not covered by path on [{}, {}]",
                path.start(),
                path.end()
            )));
        }
    }
    // Two-pointer sweep over both knot lists.
    let mut best = (p.eval(t0) - q.eval(t0)).abs().max((p.eval(t1) - q.eval(t1)).abs());
    let (mut i, mut j) = (p.times.partition_point(|&t| t <= t0), q.times.partition_point(|&t| t <= t0));
    loop {
        let next_p = p.times.get(i).copied().filter(|&t| t < t1);
        let next_q = q.times.get(j).copied().filter(|&t| t < t1);
        let t = match (next_p, next_q) {
            (None, None) => break,
            (Some(a), None) => {
                i += 1;
                best = best.max((p.values[i - 1] - q.eval(a)).abs());
                continue;
            }
            (None, Some(b)) => {
                j += 1;
                best = best.max((p.eval(b) - q.values[j - 1]).abs());
                continue;
            }
            (Some(a), Some(b)) => a.min(b),
        };
        let pv = if p.times[i] == t {
            i += 1;
            p.values[i - 1]
        } else {
            p.eval(t)
        };
        let qv = if q.times[j] == t {
            j += 1;
            q.values[j - 1]
        } else {
            q.eval(t)
        };
        best = best.max((pv - qv).abs());
    }
    Ok(best)
}

/// Grid resolution of the three drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverMesh {
    /// Cells of the uniform grid of `B1` on `[0, T]`.
    pub b1_cells: usize,
    /// Cells of the uniform grid of `B2` on `[a, 0]`.
    pub b2_cells: usize,
    /// Cells of the uniform part of the `B3` grid on `[1/a, 0]`.
    pub b3_cells: usize,
    /// Smallest `|u|` resolved by the geometric refinement of `B3` near 0.
    pub delta: f64,
    /// Ratio between consecutive geometric knots.
    pub ratio: f64,
}

impl DriverMesh {
    pub fn from_params(p: &Params) -> Self {
        DriverMesh {
            b1_cells: p.bm_mesh(),
            b2_cells: p.bm_mesh(),
            b3_cells: p.bm_mesh(),
            delta: 1e-14,
            ratio: 1.25,
        }
    }

    fn check(&self, p: &Params) -> Result<()> {
        for (name, cells) in [("B1", self.b1_cells), ("B2", self.b2_cells), ("B3", self.b3_cells)] {
            if cells + 1 < 16 {
                return Err(Error::Mesh(format!("{name} grid has {} points, need at least 16", cells + 1)));
            }
        }
        let eps = p.epsilon();
        if !(self.delta > 0.0 && self.delta <= eps / 8.0) {
            return Err(Error::Mesh(format!(
                "B3 refinement stops at {} but must reach eps_n/8 = {}",
                self.delta,
                eps / 8.0
            )));
        }
        let h_u = -1.0 / p.a() / self.b3_cells as f64;
        if self.delta >= h_u {
            return Err(Error::Mesh(format!("delta {} not below the B3 cell width {h_u}", self.delta)));
        }
        if !(self.ratio > 1.0) {
            return Err(Error::Mesh(format!("geometric ratio {} must exceed 1", self.ratio)));
        }
        Ok(())
    }
}

/// Which random streams built a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub streams: Vec<String>,
}

/// The drivers `B1` on `[0,T]`, `B2` on `[a,0]` and `B3(u) = u B(1/u)` on `[1/a, 0]`,
/// all cut from one two-sided Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverBundle {
    pub b1: GridPath,
    pub b2: GridPath,
    pub b3: GridPath,
    pub delta: f64,
    pub seed_trace: SeedTrace,
}

/// Simulates a driver bundle.
///
/// `B2` is generated backward from `B2(0) = 0`; the far past `B(x)`, `x ≤ a`, continues
/// backward from `B2(a)` at the times `x = 1/u` of the `B3` grid; `B3(0) = 0` is appended.
pub fn simulate_driver_bundle(p: &Params, mesh: &DriverMesh, seed: u64) -> Result<DriverBundle> {
    mesh.check(p)?;
    let t_end = p.horizon();
    let a = p.a();

    let n1 = mesh.b1_cells;
    let mut s1 = Stream::new(seed, Tag::B1, 0);
    let h1 = t_end / n1 as f64;
    let sd1 = h1.sqrt();
    let mut t1 = Vec::with_capacity(n1 + 1);
    let mut v1 = Vec::with_capacity(n1 + 1);
    t1.push(0.0);
    v1.push(0.0);
    for k in 1..=n1 {
        t1.push(if k == n1 { t_end } else { t_end * k as f64 / n1 as f64 });
        v1.push(v1[k - 1] + sd1 * s1.normal());
    }

    let n2 = mesh.b2_cells;
    let mut s2 = Stream::new(seed, Tag::B2, 0);
    let h2 = -a / n2 as f64;
    let sd2 = h2.sqrt();
    let t2: Vec<f64> = (0..=n2)
        .map(|k| if k == 0 { a } else if k == n2 { 0.0 } else { a * (1.0 - k as f64 / n2 as f64) })
        .collect();
    let mut v2 = vec![0.0; n2 + 1];
    for k in (0..n2).rev() {
        v2[k] = v2[k + 1] + sd2 * s2.normal();
    }
    let b2_at_a = v2[0];

    let u_grid = b3_grid(a, mesh);
    let mut s3 = Stream::new(seed, Tag::FarPast, 0);
    let mut v3 = Vec::with_capacity(u_grid.len());
    v3.push(b2_at_a / a);
    let mut x_prev = a;
    let mut b_prev = b2_at_a;
    for &u in &u_grid[1..u_grid.len() - 1] {
        let x = 1.0 / u;
        b_prev += (x_prev - x).sqrt() * s3.normal();
        x_prev = x;
        v3.push(u * b_prev);
    }
    v3.push(0.0);

    Ok(DriverBundle {
        b1: PiecewiseLinearPath::from_parts(t1, v1),
        b2: PiecewiseLinearPath::from_parts(t2, v2),
        b3: PiecewiseLinearPath::from_parts(u_grid, v3),
        delta: mesh.delta,
        seed_trace: SeedTrace {
            seed,
            streams: vec!["B1".into(), "B2".into(), "far-past".into()],
        },
    })
}

/// Knots of `B3`: uniform on `[1/a, −h]`, geometric from `−h` down to `−δ`, then 0.
fn b3_grid(a: f64, mesh: &DriverMesh) -> Vec<f64> {
    let n = mesh.b3_cells;
    let left = 1.0 / a;
    let h = -left / n as f64;
    let mut u: Vec<f64> = (0..n).map(|k| if k == 0 { left } else { left + k as f64 * h }).collect();
    let mut g = h / mesh.ratio;
    while g > mesh.delta * mesh.ratio.sqrt() {
        u.push(-g);
        g /= mesh.ratio;
    }
    u.push(-mesh.delta);
    u.push(0.0);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RawParams;

    fn params() -> Params {
        RawParams { bm_mesh: 256, ..RawParams::default() }.validate().unwrap()
    }

    #[test]
    fn anchors_and_identity() {
        let p = params();
        let d = simulate_driver_bundle(&p, &DriverMesh::from_params(&p), 11).unwrap();
        assert_eq!(d.b1.values()[0], 0.0);
        assert_eq!(d.b2.eval(0.0), 0.0);
        assert_eq!(d.b3.eval(0.0), 0.0);
        assert_eq!(d.b3.start(), 1.0 / p.a());
        assert_eq!(d.b3.values()[0], d.b2.values()[0] / p.a());
        assert!((d.b3.values()[0] * p.a() - d.b2.values()[0]).abs() <= f64::EPSILON * d.b2.values()[0].abs());
        assert!(d.b3.times().iter().rev().nth(1).unwrap() == &-1e-14);
    }

    #[test]
    fn determinism() {
        let p = params();
        let m = DriverMesh::from_params(&p);
        assert_eq!(simulate_driver_bundle(&p, &m, 5).unwrap(), simulate_driver_bundle(&p, &m, 5).unwrap());
        assert_ne!(simulate_driver_bundle(&p, &m, 5).unwrap(), simulate_driver_bundle(&p, &m, 6).unwrap());
    }

    #[test]
    fn coarse_mesh_rejected() {
        let p = params();
        let m = DriverMesh { b1_cells: 8, ..DriverMesh::from_params(&p) };
        assert_eq!(simulate_driver_bundle(&p, &m, 1).unwrap_err().code(), "ERR_MESH");
        let m = DriverMesh { delta: 0.1, ..DriverMesh::from_params(&p) };
        assert_eq!(simulate_driver_bundle(&p, &m, 1).unwrap_err().code(), "ERR_MESH");
    }

    #[test]
    fn sup_distance_examples() {
        let z = PiecewiseLinearPath::zero(0.0, 1.0);
        let line = PiecewiseLinearPath::new(vec![0.0, 1.0], vec![0.0, -2.5]).unwrap();
        assert_eq!(sup_distance(&z, &z, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(sup_distance(&z, &line, 0.0, 1.0).unwrap(), 2.5);
        assert_eq!(sup_distance(&z, &line, 0.0, 0.4).unwrap(), 1.0);
        assert_eq!(sup_distance(&z, &line, 0.0, 1.5).unwrap_err().code(), "ERR_DOMAIN");
    }

    #[test]
    fn combine_refine_reflect() {
        let p = PiecewiseLinearPath::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let q = PiecewiseLinearPath::new(vec![0.0, 0.25, 1.0], vec![1.0, 0.0, 3.0]).unwrap();
        let r = p.combine(2.0, &q, -1.0).unwrap();
        for &t in &[0.0, 0.1, 0.25, 0.4, 0.5, 0.9, 1.0] {
            assert!((r.eval(t) - (2.0 * p.eval(t) - q.eval(t))).abs() < 1e-15);
        }
        let f = p.refined();
        assert_eq!(f.len(), 5);
        assert_eq!(sup_distance(&p, &f, 0.0, 1.0).unwrap(), 0.0);
        let m = p.reflected();
        assert_eq!(m.start(), -1.0);
        assert_eq!(m.eval(-0.5), 1.0);
    }
}
