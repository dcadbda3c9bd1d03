//! Uniform transport processes and their block-wise coupling to Brownian paths.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{fmt17, GridPath, PiecewiseLinearPath};
use crate::rng::{replicate_seed, std_normal, Stream, Tag};
use statrs::distribution::ContinuousCDF;

/// Transport path: speed `n`, direction flips at the switch times.
///
/// The process is anchored at `origin` (value 0 there) and runs forward
/// (`origin + r`) or backward (`origin − r`) in its local clock `r ∈ [0, span]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPath {
    n: u64,
    sigma0: f64,
    origin: f64,
    span: f64,
    backward: bool,
    switch_times: Vec<f64>,
    path: PiecewiseLinearPath,
}

impl TransportPath {
    fn build(n: u64, sigma0: f64, origin: f64, span: f64, backward: bool, switch_times: Vec<f64>) -> Self {
        let speed = n as f64;
        let mut r = Vec::with_capacity(switch_times.len() + 2);
        let mut v = Vec::with_capacity(switch_times.len() + 2);
        r.push(0.0);
        v.push(0.0);
        let mut vel = sigma0 * speed;
        for &s in &switch_times {
            let prev = *r.last().expect("non-empty");
            v.push(v[v.len() - 1] + vel * (s - prev));
            r.push(s);
            vel = -vel;
        }
        let prev = *r.last().expect("non-empty");
        v.push(v[v.len() - 1] + vel * (span - prev));
        r.push(span);
        let path = if backward {
            let times = r.iter().rev().map(|x| origin - x).collect();
            let values = v.into_iter().rev().collect();
            PiecewiseLinearPath::from_parts(times, values)
        } else {
            PiecewiseLinearPath::from_parts(r.iter().map(|x| origin + x).collect(), v)
        };
        TransportPath { n, sigma0, origin, span, backward, switch_times, path }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Initial direction `±1` at the anchor, in the local clock.
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Switch times in the local clock, increasing from the anchor.
    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn is_backward(&self) -> bool {
        self.backward
    }

    /// The path in real time.
    pub fn path(&self) -> &PiecewiseLinearPath {
        &self.path
    }

    pub fn into_path(self) -> PiecewiseLinearPath {
        self.path
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "segment_start,segment_end,slope")?;
        let t = self.path.times();
        for k in 0..t.len() - 1 {
            writeln!(w, "{},{},{}", fmt17(t[k]), fmt17(t[k + 1]), fmt17(self.path.slope(k)))?;
        }
        Ok(())
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Domain(format!("invalid interval [{t0}, {t1}]")));
    }
    Ok(())
}

fn switches(stream: &mut Stream, n: u64, span: f64) -> Vec<f64> {
    let rate = (n as f64).powi(2);
    let mut out = Vec::with_capacity((rate * span * 1.2) as usize + 4);
    let mut t = stream.exponential(rate);
    while t < span {
        out.push(t);
        t += stream.exponential(rate);
    }
    out
}

/// Transport process on `[t0, t1]` started from 0 at `t0`.
pub fn simulate_transport(n: u64, interval: (f64, f64), seed: u64) -> Result<TransportPath> {
    simulate_transport_anchored(n, interval, false, seed, Tag::Transport)
}

/// Transport process on `[t0, t1]`, anchored at `t1` and running backward when `backward` is set.
pub fn simulate_transport_anchored(
    n: u64,
    interval: (f64, f64),
    backward: bool,
    seed: u64,
    tag: Tag,
) -> Result<TransportPath> {
    let (t0, t1) = interval;
    check_interval(t0, t1)?;
    if n < 1 {
        return Err(Error::N(n, 1));
    }
    let mut s = Stream::new(seed, tag, n);
    let sigma0 = s.sign();
    let span = t1 - t0;
    let sw = switches(&mut s, n, span);
    let origin = if backward { t1 } else { t0 };
    Ok(TransportPath::build(n, sigma0, origin, span, backward, sw))
}

/// Switch gaps in order: the first is measured from the anchor.
pub fn extract_gaps(z: &TransportPath) -> Vec<f64> {
    let mut prev = 0.0;
    z.switch_times
        .iter()
        .map(|&s| {
            let g = s - prev;
            prev = s;
            g
        })
        .collect()
}

/// Default block length: the smallest `L = span/k` with `L ≥ max(4 n^{−4/3}, 8/n²)`.
///
/// `n^{−4/3}` balances the free oscillation inside a block, of order `√L`,
/// against the accumulated quantile mismatch, of order `1/(n² L)`.
pub fn default_block_len(n: u64, span: f64) -> f64 {
    let nf = n as f64;
    let target = (4.0 * nf.powf(-4.0 / 3.0)).max(8.0 / (nf * nf));
    // The slack keeps exact ratios such as n = 64 from losing a block to rounding.
    let blocks = (span / target * (1.0 + 1e-12)).floor().max(1.0);
    span / blocks
}

/// Sorted block increments of transport skeletons started with velocity `+n`.
struct QuantileTable {
    seed: u64,
    increments: Vec<f64>,
    replay: Vec<u32>,
}

const TABLE_SIZE: usize = 1_000_000;
const TABLE_SEED: u64 = 0x5EED_7AB1_E000_0001;

impl QuantileTable {
    fn build(n: u64, len: f64, size: usize) -> Self {
        let seed = replicate_seed(TABLE_SEED ^ n, len.to_bits());
        let mut pairs: Vec<(f64, u32)> = (0..size as u32)
            .map(|i| {
                let (inc, _) = skeleton(seed, n, len, i, None);
                (inc, i)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (increments, replay) = pairs.into_iter().unzip();
        QuantileTable { seed, increments, replay }
    }

    fn pick(&self, u: f64) -> u32 {
        let m = self.increments.len();
        let k = ((u * m as f64) as usize).min(m - 1);
        self.replay[k]
    }
}

/// Replays skeleton `i`: returns its increment and, if requested, appends its switch offsets.
fn skeleton(seed: u64, n: u64, len: f64, i: u32, out: Option<&mut Vec<f64>>) -> (f64, usize) {
    let mut s = Stream::new(seed, Tag::Table, i as u64);
    let rate = (n as f64).powi(2);
    let mut t = 0.0;
    let mut sign = 1.0;
    let mut signed = 0.0;
    let mut count = 0;
    let mut out = out;
    loop {
        let next = t + s.exponential(rate);
        if next >= len {
            signed += sign * (len - t);
            break;
        }
        signed += sign * (next - t);
        if let Some(o) = out.as_deref_mut() {
            o.push(next);
        }
        count += 1;
        sign = -sign;
        t = next;
    }
    (signed * n as f64, count)
}

fn table_for(n: u64, len: f64) -> Arc<QuantileTable> {
    static TABLES: OnceLock<Mutex<HashMap<(u64, u64), Arc<QuantileTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, len.to_bits());
    if let Some(t) = tables.lock().expect("table cache poisoned").get(&key) {
        return Arc::clone(t);
    }
    // Built outside the lock; a racing builder produces the identical table.
    let table = Arc::new(QuantileTable::build(n, len, TABLE_SIZE));
    let mut guard = tables.lock().expect("table cache poisoned");
    Arc::clone(guard.entry(key).or_insert(table))
}

/// Couples a transport process to `b` (anchored at `b`'s left end, where `b` must vanish).
///
/// The domain is cut into blocks of length `block_len` (adjusted to divide the span).
/// Each block's transport increment is chosen comonotonically with the Brownian
/// increment from a tabulated sample of block skeletons; the switch pattern inside
/// the block is the chosen skeleton's own.
pub fn couple_transport(b: &GridPath, n: u64, block_len: f64, seed: u64) -> Result<TransportPath> {
    couple_with(b, n, block_len, seed, Tag::Transport)
}

pub(crate) fn couple_with(b: &GridPath, n: u64, block_len: f64, seed: u64, tag: Tag) -> Result<TransportPath> {
    if n < 1 {
        return Err(Error::N(n, 1));
    }
    let t0 = b.start();
    let span = b.end() - t0;
    if !(block_len > 0.0) {
        return Err(Error::Mesh(format!("block length {block_len} must be positive")));
    }
    let blocks = (span / block_len - 1e-9).ceil().max(1.0) as usize;
    let len = span / blocks as f64;
    let rate = (n as f64).powi(2);
    if rate * len < 8.0 - 1e-9 {
        return Err(Error::Mesh(format!(
            "blocks of length {len} hold {:.2} expected switches at n = {n}; need at least 8",
            rate * len
        )));
    }
    let table = table_for(n, len);
    let mut s = Stream::new(seed, tag, n);
    let sigma0 = s.sign();
    let mut vel = sigma0;
    let mut sw = Vec::with_capacity((rate * span * 1.2) as usize + 4);
    let sd = len.sqrt();
    let phi = std_normal();
    let mut scratch = Vec::new();
    let mut left = b.eval(t0);
    for j in 0..blocks {
        let right_t = if j + 1 == blocks { b.end() } else { t0 + (j + 1) as f64 * len };
        let right = b.eval(right_t);
        let u = phi.cdf((right - left) / sd).clamp(0.0, 1.0);
        left = right;
        let pick = if vel > 0.0 { table.pick(u) } else { table.pick(1.0 - u) };
        scratch.clear();
        let (_, count) = skeleton(table.seed, n, len, pick, Some(&mut scratch));
        let offset = j as f64 * len;
        sw.extend(scratch.iter().map(|x| offset + x));
        if count % 2 == 1 {
            vel = -vel;
        }
    }
    Ok(TransportPath::build(n, sigma0, t0, span, false, sw))
}

/// Couples to a path given on `[t0, t1]` with `b(t1) = 0`, running backward from `t1`.
pub fn couple_transport_backward(b: &GridPath, n: u64, block_len: f64, seed: u64, tag: Tag) -> Result<TransportPath> {
    let forward = couple_with(&b.reflected(), n, block_len, seed, tag)?;
    let span = b.end() - b.start();
    Ok(TransportPath::build(
        n,
        forward.sigma0,
        b.end(),
        span,
        true,
        forward.switch_times,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_and_is_lipschitz() {
        let z = simulate_transport(8, (0.0, 1.0), 3).unwrap();
        assert_eq!(z.path().eval(0.0), 0.0);
        let t = z.path().times();
        let v = z.path().values();
        for k in 0..t.len() - 1 {
            assert!(((v[k + 1] - v[k]).abs() - 8.0 * (t[k + 1] - t[k])).abs() < 1e-12);
        }
        for k in 0..t.len() - 2 {
            assert!(z.path().slope(k) * z.path().slope(k + 1) < 0.0);
        }
    }

    #[test]
    fn gaps_partition_interval() {
        let z = simulate_transport(4, (0.0, 2.0), 9).unwrap();
        let g = extract_gaps(&z);
        assert_eq!(g.len(), z.switch_times().len());
        let last = z.switch_times().last().copied().unwrap_or(0.0);
        assert!((g.iter().sum::<f64>() + (2.0 - last) - 2.0).abs() < 1e-12);
        let quiet = TransportPath::build(1, 1.0, 0.0, 1.0, false, vec![]);
        assert!(extract_gaps(&quiet).is_empty());
    }

    #[test]
    fn backward_anchor() {
        let z = simulate_transport_anchored(5, (-1.0, 0.0), true, 1, Tag::Z2).unwrap();
        assert_eq!(z.path().eval(0.0), 0.0);
        assert_eq!(z.path().start(), -1.0);
        assert_eq!(z.path().end(), 0.0);
    }

    #[test]
    fn block_rule() {
        assert_eq!(default_block_len(64, 1.0), 1.0 / 64.0);
        assert_eq!(default_block_len(4, 1.0), 1.0);
        assert_eq!(default_block_len(8, 1.0), 0.25);
        assert!((default_block_len(10, 1.0) - 1.0 / 5.0).abs() < 1e-15);
        // 8/n² only wins for n ≤ 2.
        assert_eq!(default_block_len(2, 3.0), 3.0);
        assert!((default_block_len(128, 1.0) - 1.0 / 161.0).abs() < 1e-15);
        let z = PiecewiseLinearPath::zero(0.0, 1.0);
        assert_eq!(couple_transport(&z, 2, 1.0, 1).unwrap_err().code(), "ERR_MESH");
    }

    #[test]
    fn replay_matches_table_increment() {
        let t = QuantileTable::build(8, 0.125, 1000);
        for k in [0usize, 10, 500, 999] {
            let (inc, _) = skeleton(t.seed, 8, 0.125, t.replay[k], None);
            assert_eq!(inc, t.increments[k]);
        }
        assert!(t.increments.windows(2).all(|w| w[0] <= w[1]));
    }
}
