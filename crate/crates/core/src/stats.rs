//! Summary statistics, Kolmogorov–Smirnov tests and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-interpolation quantiles of an ascending sample.
pub fn quantiles(sorted: &[f64], qs: &[f64]) -> Vec<f64> {
    if sorted.is_empty() {
        return vec![f64::NAN; qs.len()];
    }
    let n = sorted.len();
    qs.iter()
        .map(|&q| {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantiles(&v, &[0.5])[0]
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample skewness `m3 / m2^{3/2}`.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Standard error of the sample variance, from the empirical fourth central moment.
pub fn variance_std_err(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2).max(0.0) / n).sqrt()
}

/// Monte Carlo summary of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub name: String,
    pub reps: usize,
    pub mean: f64,
    pub std_err: f64,
    /// 5, 25, 50, 75 and 95% quantiles.
    pub quantiles: [f64; 5],
    pub config_hash: String,
}

impl McSummary {
    pub fn new(name: &str, xs: &[f64], config_hash: &str) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Input(format!("{name}: need at least two replicates")));
        }
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let q = quantiles(&v, &[0.05, 0.25, 0.5, 0.75, 0.95]);
        Ok(McSummary {
            name: name.to_string(),
            reps: xs.len(),
            mean: mean(xs),
            std_err: (variance(xs) / xs.len() as f64).sqrt(),
            quantiles: [q[0], q[1], q[2], q[3], q[4]],
            config_hash: config_hash.to_string(),
        })
    }
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Not rejected at the 1% level.
    pub pass: bool,
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value with Stephens' small-sample correction for effective size `ne`.
fn ks_p_value(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample KS test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 50 || b.len() < 50 {
        return Err(Error::Input(format!("KS needs at least 50 samples per side, got {} and {}", a.len(), b.len())));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let p = ks_p_value(d, ne);
    Ok(KsResult { statistic: d, p_value: p, pass: p >= 0.01 })
}

/// One-sample KS test of `xs` against a continuous CDF at the 1% level.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    if xs.len() < 50 {
        return Err(Error::Input(format!("KS needs at least 50 samples, got {}", xs.len())));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let p = ks_p_value(d, n);
    Ok(KsResult { statistic: d, p_value: p, pass: p >= 0.01 })
}

/// Least-squares fit of `ln y` against `ln n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub ns: Vec<u64>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub theoretical_slope: f64,
    /// `(5/2) ln ln n` was subtracted from `ln y` before fitting.
    pub log_correction_used: bool,
}

/// Ordinary least squares in log-log coordinates, optionally removing `(ln x)^{5/2}` first.
pub fn fit_loglog(xs: &[f64], ys: &[f64], subtract_log_correction: bool) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Input(format!("need at least 3 paired points, got {} and {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Input("log-log fit needs positive finite data".into()));
    }
    if subtract_log_correction && xs.iter().any(|&x| x <= 1.0) {
        return Err(Error::Input("log correction needs x > 1".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| if subtract_log_correction { y.ln() - 2.5 * x.ln().ln() } else { y.ln() })
        .collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-300 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit {
        ns: xs.iter().map(|x| x.round() as u64).collect(),
        medians: ys.to_vec(),
        slope,
        intercept,
        r2,
        theoretical_slope: f64::NAN,
        log_correction_used: subtract_log_correction,
    })
}

/// True if `xs` never increases, apart from at most `allowed` inversions.
pub fn nonincreasing_with(xs: &[f64], allowed: usize) -> bool {
    xs.windows(2).filter(|w| w[1] > w[0]).count() <= allowed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantiles(&v, &[0.0, 0.5, 1.0, 0.25]), vec![1.0, 3.0, 5.0, 2.0]);
        assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), 2.5);
    }

    #[test]
    fn kolmogorov_critical_value() {
        // The 1% critical value of the Kolmogorov distribution is 1.6276.
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 10.0];
        assert!((variance(&xs) - 16.666666666666668).abs() < 1e-12);
        assert!(skewness(&xs) > 0.0);
        assert!(skewness(&[-1.0, 0.0, 1.0]).abs() < 1e-15);
    }

    #[test]
    fn rate_fit_errors() {
        assert_eq!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0], false).unwrap_err().code(), "ERR_INPUT");
        assert_eq!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, -2.0, 1.0], false).unwrap_err().code(), "ERR_INPUT");
    }
}
