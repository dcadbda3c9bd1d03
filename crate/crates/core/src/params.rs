//! Run parameters and the tuning sequences derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate parameter tuple, as read from a config file or command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub hurst: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub horizon: f64,
    pub n: u64,
    pub output_grid_size: usize,
    pub time_quad_points: usize,
    pub bm_mesh: usize,
    pub seed: u64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams {
            hurst: 0.75,
            beta: 0.44,
            gamma: 0.03,
            a: -1.0,
            horizon: 1.0,
            n: 64,
            output_grid_size: 17,
            time_quad_points: 8,
            bm_mesh: 4096,
            seed: 7,
        }
    }
}

/// Validated parameters. Construct through [`validate_params`] or [`RawParams::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    hurst: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    horizon: f64,
    n: u64,
    output_grid_size: usize,
    time_quad_points: usize,
    bm_mesh: usize,
    seed: u64,
}

impl Params {
    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Left truncation point of the past window, `a < 0`.
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    /// Transport intensity.
    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn output_grid_size(&self) -> usize {
        self.output_grid_size
    }
    pub fn time_quad_points(&self) -> usize {
        self.time_quad_points
    }
    /// Number of grid cells per Brownian driver.
    pub fn bm_mesh(&self) -> usize {
        self.bm_mesh
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            hurst: self.hurst,
            beta: self.beta,
            gamma: self.gamma,
            a: self.a,
            horizon: self.horizon,
            n: self.n,
            output_grid_size: self.output_grid_size,
            time_quad_points: self.time_quad_points,
            bm_mesh: self.bm_mesh,
            seed: self.seed,
        }
    }

    /// Same parameters with a different transport intensity.
    pub fn with_n(&self, n: u64) -> Result<Params> {
        RawParams { n, ..self.raw() }.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Params {
        Params { seed, ..self.clone() }
    }

    /// `ε_n` at this run's intensity.
    pub fn epsilon(&self) -> f64 {
        epsilon_n(self.n, self)
    }

    /// Output times `0 = t_0 < ... < t_{m-1} = T`, evenly spaced.
    pub fn output_grid(&self) -> Vec<f64> {
        let m = self.output_grid_size;
        (0..m).map(|k| self.horizon * k as f64 / (m - 1) as f64).collect()
    }
}

impl RawParams {
    pub fn validate(&self) -> Result<Params> {
        validate_params(self)
    }
}

/// Checks every constraint on a candidate tuple and returns validated [`Params`].
pub fn validate_params(raw: &RawParams) -> Result<Params> {
    let h = raw.hurst;
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Hurst(h));
    }
    let (lo, hi) = beta_range(h)?;
    if !(raw.beta > lo && raw.beta < hi) {
        return Err(Error::Beta { beta: raw.beta, lo, hi, hurst: h });
    }
    if !(raw.gamma > 0.0 && raw.gamma < raw.beta && raw.beta + raw.gamma < 0.5) {
        return Err(Error::Gamma { gamma: raw.gamma, beta: raw.beta });
    }
    if !(raw.a < 0.0) || !raw.a.is_finite() {
        return Err(Error::Domain(format!("a = {} must be negative", raw.a)));
    }
    if !(raw.horizon > 0.0) || !raw.horizon.is_finite() {
        return Err(Error::Domain(format!("T = {} must be positive", raw.horizon)));
    }
    if raw.n < 1 {
        return Err(Error::N(raw.n, 1));
    }
    if raw.output_grid_size < 2 {
        return Err(Error::Mesh(format!(
            "output_grid_size = {} must be at least 2",
            raw.output_grid_size
        )));
    }
    if raw.time_quad_points < 1 {
        return Err(Error::Mesh("time_quad_points must be positive".into()));
    }
    if raw.bm_mesh < 16 {
        return Err(Error::Mesh(format!("bm_mesh = {} must be at least 16", raw.bm_mesh)));
    }
    Ok(Params {
        hurst: raw.hurst,
        beta: raw.beta,
        gamma: raw.gamma,
        a: raw.a,
        horizon: raw.horizon,
        n: raw.n,
        output_grid_size: raw.output_grid_size,
        time_quad_points: raw.time_quad_points,
        bm_mesh: raw.bm_mesh,
        seed: raw.seed,
    })
}

/// Admissible open interval for `β`: `(max((1−H/2)/(3−2H), (2−H)/(2+2H)), 1/2)`.
pub fn beta_range(hurst: f64) -> Result<(f64, f64)> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::Hurst(hurst));
    }
    let first = (1.0 - hurst / 2.0) / (3.0 - 2.0 * hurst);
    let second = (2.0 - hurst) / (2.0 + 2.0 * hurst);
    Ok((first.max(second), 0.5))
}

/// `ε_n = n^{−β/(1−H/2)}`.
pub fn epsilon_n(n: u64, p: &Params) -> f64 {
    epsilon_raw(n, p.hurst, p.beta)
}

pub(crate) fn epsilon_raw(n: u64, hurst: f64, beta: f64) -> f64 {
    (n as f64).powf(-beta / (1.0 - hurst / 2.0))
}

/// `α_n = n^{−(1/2−β)} (ln n)^{5/2}`, or with `hat` the rate `n^{−(1/2−β−γ)} (ln n)^{5/2}`.
pub fn alpha_n(n: u64, p: &Params, hat: bool) -> Result<f64> {
    if n < 2 {
        return Err(Error::N(n, 2));
    }
    let exponent = if hat {
        0.5 - p.beta - p.gamma
    } else {
        0.5 - p.beta
    };
    let nf = n as f64;
    Ok(nf.powf(-exponent) * nf.ln().powf(2.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(h: f64, beta: f64) -> RawParams {
        RawParams { hurst: h, beta, ..RawParams::default() }
    }

    #[test]
    fn validate_examples() {
        assert!(raw(0.75, 0.44).validate().is_ok());
        assert_eq!(raw(0.75, 0.40).validate().unwrap_err().code(), "ERR_BETA");
        assert_eq!(raw(0.5, 0.44).validate().unwrap_err().code(), "ERR_HURST");
        assert_eq!(raw(1.0, 0.44).validate().unwrap_err().code(), "ERR_HURST");
        let e = RawParams { gamma: 0.07, ..RawParams::default() }.validate().unwrap_err();
        assert_eq!(e.code(), "ERR_GAMMA");
        let e = RawParams { a: 0.0, ..RawParams::default() }.validate().unwrap_err();
        assert_eq!(e.code(), "ERR_DOMAIN");
        let e = RawParams { horizon: 0.0, ..RawParams::default() }.validate().unwrap_err();
        assert_eq!(e.code(), "ERR_DOMAIN");
        let e = RawParams { n: 0, ..RawParams::default() }.validate().unwrap_err();
        assert_eq!(e.code(), "ERR_N");
    }

    #[test]
    fn beta_error_names_lower_bound() {
        let msg = raw(0.75, 0.3).validate().unwrap_err().to_string();
        assert!(msg.contains("0.41667"), "{msg}");
    }

    #[test]
    fn beta_range_examples() {
        let (lo, hi) = beta_range(0.75).unwrap();
        // max(0.625/1.5, 1.25/3.5)
        assert!((lo - 0.625 / 1.5).abs() < 1e-15);
        assert!((lo - 0.41667).abs() < 5e-6);
        assert_eq!(hi, 0.5);
        let (lo, _) = beta_range(0.6).unwrap();
        assert!((lo - 1.4 / 3.2).abs() < 1e-15);
        assert!(1.4 / 3.2 > 0.7 / 1.8);
        let (lo, _) = beta_range(1.0 - 1e-9).unwrap();
        assert!((lo - 0.5).abs() < 1e-8);
        assert_eq!(beta_range(0.5).unwrap_err().code(), "ERR_HURST");
    }

    #[test]
    fn beta_lower_bound_below_half() {
        for k in 1..200 {
            let h = 0.5 + k as f64 * 0.0025;
            let (lo, hi) = beta_range(h).unwrap();
            assert!(lo < hi, "H = {h}");
        }
    }

    #[test]
    fn epsilon_examples() {
        let p = raw(0.75, 0.42).validate().unwrap();
        assert_eq!(epsilon_n(1, &p), 1.0);
        assert!((epsilon_n(100, &p) - 0.04529).abs() < 5e-6);
        let p = RawParams { hurst: 0.6, beta: 0.45, gamma: 0.03, ..RawParams::default() }
            .validate()
            .unwrap();
        assert!((epsilon_n(64, &p) / 0.0688 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn alpha_examples() {
        let p = raw(0.75, 0.42).validate().unwrap();
        assert!((alpha_n(100, &p, false).unwrap() / 31.47 - 1.0).abs() < 1e-3);
        let p = RawParams { hurst: 0.75, beta: 0.44, gamma: 0.03, ..RawParams::default() }
            .validate()
            .unwrap();
        assert!((alpha_n(64, &p, true).unwrap() / 31.1 - 1.0).abs() < 2e-3);
        assert_eq!(alpha_n(1, &p, false).unwrap_err().code(), "ERR_N");
        let p = raw(0.75, 0.42).validate().unwrap();
        let far = alpha_n(1 << 50, &p, false).unwrap();
        let farther = alpha_n(1 << 60, &p, false).unwrap();
        assert!(farther < far);
    }
}
