//! JSON run configuration merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rosenblatt_core::{Params, RawParams};
use serde::{Deserialize, Serialize};

/// Grid sizes. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    pub output_grid_size: Option<usize>,
    pub time_quad_points: Option<usize>,
    pub bm_mesh: Option<usize>,
}

/// Contents of a config file; absent keys fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub a: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub n: Option<u64>,
    pub ns: Option<Vec<u64>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub mesh: Option<MeshBlock>,
    pub out: Option<PathBuf>,
    pub experiment: Option<String>,
    pub with_reference: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", path.display())).into())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: FileConfig) -> FileConfig {
        let mesh = match (self.mesh, over.mesh) {
            (Some(m), Some(o)) => Some(MeshBlock {
                output_grid_size: o.output_grid_size.or(m.output_grid_size),
                time_quad_points: o.time_quad_points.or(m.time_quad_points),
                bm_mesh: o.bm_mesh.or(m.bm_mesh),
            }),
            (m, o) => o.or(m),
        };
        FileConfig {
            hurst: over.hurst.or(self.hurst),
            beta: over.beta.or(self.beta),
            gamma: over.gamma.or(self.gamma),
            a: over.a.or(self.a),
            horizon: over.horizon.or(self.horizon),
            n: over.n.or(self.n),
            ns: over.ns.or(self.ns),
            reps: over.reps.or(self.reps),
            seed: over.seed.or(self.seed),
            mesh,
            out: over.out.or(self.out),
            experiment: over.experiment.or(self.experiment),
            with_reference: over.with_reference.or(self.with_reference),
        }
    }

    /// Fills defaults. `suite` picks the default replicate count and `ns`.
    pub fn resolve(self, suite: Option<&str>) -> RunConfig {
        let d = RawParams::default();
        let mesh = self.mesh.unwrap_or_default();
        let (reps, ns) = match suite {
            Some("coupling") => (200, vec![8, 16, 32, 64, 128]),
            Some("rate") => (200, vec![16, 32, 64, 128]),
            Some("law") => (500, vec![]),
            Some("oracle") => (1000, vec![]),
            _ => (0, vec![]),
        };
        RunConfig {
            hurst: self.hurst.unwrap_or(d.hurst),
            beta: self.beta.unwrap_or(d.beta),
            gamma: self.gamma.unwrap_or(d.gamma),
            a: self.a.unwrap_or(d.a),
            horizon: self.horizon.unwrap_or(d.horizon),
            n: self.n.unwrap_or(d.n),
            ns: self.ns.unwrap_or(ns),
            reps: self.reps.unwrap_or(reps),
            seed: self.seed.unwrap_or(d.seed),
            output_grid_size: mesh.output_grid_size.unwrap_or(d.output_grid_size),
            time_quad_points: mesh.time_quad_points.unwrap_or(d.time_quad_points),
            bm_mesh: mesh.bm_mesh.unwrap_or(d.bm_mesh),
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            experiment: suite.map(str::to_string).or(self.experiment),
            with_reference: self.with_reference.unwrap_or(false),
        }
    }
}

/// Effective configuration, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "H")]
    pub hurst: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: u64,
    pub ns: Vec<u64>,
    pub reps: usize,
    pub seed: u64,
    pub output_grid_size: usize,
    pub time_quad_points: usize,
    pub bm_mesh: usize,
    pub out: PathBuf,
    pub experiment: Option<String>,
    pub with_reference: bool,
}

impl RunConfig {
    pub fn params(&self) -> anyhow::Result<Params> {
        let raw = RawParams {
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
        };
        raw.validate().map_err(|e| ConfigError(e.to_string()).into())
    }

    /// The configuration as recorded in outputs. The output directory is left out so that
    /// identical runs written to different places stay byte-identical.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out");
        v
    }
}

/// Invalid configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: FileConfig =
            serde_json::from_str(r#"{"H": 0.7, "n": 32, "mesh": {"bm_mesh": 1024, "output_grid_size": 9}}"#).unwrap();
        let flags = FileConfig {
            n: Some(16),
            mesh: Some(MeshBlock { bm_mesh: Some(2048), ..Default::default() }),
            ..Default::default()
        };
        let c = file.merged(flags).resolve(Some("law"));
        assert_eq!((c.hurst, c.n, c.bm_mesh, c.output_grid_size, c.reps), (0.7, 16, 2048, 9, 500));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"H": 0.7, "hurst": 0.7}"#).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"mesh": {"cells": 3}}"#).is_err());
    }
}
