//! Runs the pipelines and writes their files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use rosenblatt_core::paths::fmt17;
use rosenblatt_core::{
    assemble_run, config_hash, run_constants, run_coupling_rate, run_law_suite, run_oracle_suite, run_strong_rate,
    Check, RunOptions,
};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

fn prepare(cfg: &RunConfig, stem: &str) -> anyhow::Result<(PathBuf, String)> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let hash = config_hash(&cfg.echo());
    Ok((cfg.out.join(format!("{stem}_{}", &hash[..12])), hash))
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?))
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<bool> {
    let p = cfg.params()?;
    let opts = RunOptions { with_reference: cfg.with_reference, ..Default::default() };
    let run = assemble_run(&p.output_grid(), &p, p.seed(), &opts)?;
    let (stem, hash) = prepare(cfg, "simulate")?;
    let csv = stem.with_extension("csv");
    let mut w = create(&csv)?;
    run.write_csv(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", csv.display()))?;
    let mut meta = run.sidecar();
    meta["config"] = cfg.echo();
    meta["config_hash"] = hash.into();
    write_json(&stem.with_extension("json"), &meta)?;
    println!("wrote {}", csv.display());
    Ok(true)
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()
    })();
    res.with_context(|| format!("writing {}", path.display()))
}

fn check_rows(checks: &[Check]) -> Vec<Vec<String>> {
    checks
        .iter()
        .map(|c| vec![c.name.clone(), fmt17(c.value), fmt17(c.target), fmt17(c.tolerance), c.pass.to_string()])
        .collect()
}

fn report<R: Serialize>(
    suite: &str,
    cfg: &RunConfig,
    rep: &R,
    checks: &[Check],
    pass: bool,
    table: Option<(&[&str], Vec<Vec<String>>)>,
) -> anyhow::Result<bool> {
    let (stem, hash) = prepare(cfg, suite)?;
    let doc = serde_json::json!({
        "schema": 1,
        "suite": suite,
        "config": cfg.echo(),
        "config_hash": hash,
        "pass": pass,
        "report": rep,
    });
    write_json(&stem.with_extension("json"), &doc)?;
    write_table(
        &stem.with_file_name(format!("{}_checks.csv", stem.file_name().unwrap().to_string_lossy())),
        &["check", "value", "target", "tolerance", "pass"],
        &check_rows(checks),
    )?;
    if let Some((header, rows)) = table {
        write_table(&stem.with_extension("csv"), header, &rows)?;
    }
    for c in checks {
        println!("{} {} value={} target={}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target);
    }
    println!("{suite}: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

pub fn verify(suite: &str, cfg: &RunConfig) -> anyhow::Result<bool> {
    let p = cfg.params()?;
    let seed = p.seed();
    match suite {
        "constants" => {
            let r = run_constants(&p)?;
            report(suite, cfg, &r, &r.checks, r.pass, None)
        }
        "coupling" => {
            let r = run_coupling_rate(&p, &cfg.ns, cfg.reps, seed)?;
            let rows = r
                .rows
                .iter()
                .map(|x| {
                    vec![
                        x.n.to_string(),
                        fmt17(x.block_len),
                        fmt17(x.median_sup_coupled),
                        fmt17(x.median_sup_independent),
                        fmt17(x.median_anchor_coupled),
                        fmt17(x.median_anchor_independent),
                    ]
                })
                .collect();
            let header: &[&str] = &["n", "block_len", "median_sup_coupled", "median_sup_independent", "median_anchor_coupled", "median_anchor_independent"];
            report(suite, cfg, &r, &r.checks, r.pass, Some((header, rows)))
        }
        "rate" => {
            let r = run_strong_rate(&p, &cfg.ns, cfg.reps, seed)?;
            let rows = r
                .rows
                .iter()
                .map(|x| {
                    vec![x.n.to_string(), fmt17(x.median_error), fmt17(x.alpha_hat_n), fmt17(x.envelope), x.within_envelope.to_string()]
                })
                .collect();
            let header: &[&str] = &["n", "median_error", "alpha_hat_n", "envelope", "within_envelope"];
            report(suite, cfg, &r, &r.checks, r.pass, Some((header, rows)))
        }
        "law" => {
            let r = run_law_suite(&p, cfg.reps, seed)?;
            report(suite, cfg, &r, &r.checks, r.pass, None)
        }
        "oracle" => {
            let r = run_oracle_suite(&p, cfg.reps, seed)?;
            report(suite, cfg, &r, &r.checks, r.pass, None)
        }
        other => Err(ConfigError(format!("unknown suite {other}")).into()),
    }
}
