//! Parameter sweeps: one child run per (value, seed), then medians and a
//! monotonicity verdict.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{field_error, RunConfig, Trend};
use crate::manifest::{collect_files, RunManifest, Versions};
use crate::pipeline::{run, Check};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepChild {
    pub value: f64,
    pub seed: u64,
    pub dir: String,
    pub metric: Option<f64>,
    pub error: Option<String>,
    pub failed_checks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: String,
    pub pipeline: String,
    pub values: Vec<f64>,
    pub children: Vec<SweepChild>,
    /// Median metric per value over successful seeds.
    pub medians: Vec<Option<f64>>,
    pub expect: Option<Trend>,
    /// `None` when no trend was requested or some value has no result.
    pub verdict: Option<bool>,
    pub partial: bool,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn trend_holds(trend: Trend, series: &[f64]) -> bool {
    series.windows(2).all(|w| match trend {
        Trend::NonIncreasing => w[1] <= w[0],
        Trend::NonDecreasing => w[1] >= w[0],
        Trend::Decreasing => w[1] < w[0],
    })
}

/// Runs every child of `cfg.sweep` under `out` in parallel. A failed child
/// is recorded and marks the sweep partial; it does not abort the others.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<(SweepReport, RunManifest), HarnessError> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| field_error("sweep", "section required by the sweep command"))?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out.display(), e))?;
    let started = chrono::Utc::now().to_rfc3339();
    let seeds = sweep.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    let mut base = cfg.clone();
    base.sweep = None;
    base.out = None;

    let mut jobs: Vec<(usize, Value, u64, RunConfig)> = Vec::new();
    for (i, value) in sweep.values.iter().enumerate() {
        let child = base.with_field(&sweep.axis, value)?;
        for &seed in &seeds {
            let mut c = child.clone();
            c.seed = seed;
            jobs.push((i, value.clone(), seed, c));
        }
    }
    let children: Vec<SweepChild> = jobs
        .par_iter()
        .map(|(i, value, seed, child)| {
            let name = format!("child-{i:02}-seed-{seed}");
            let dir: PathBuf = out.join(&name);
            let value = value.as_f64().expect("validated numeric");
            match run(child, &dir) {
                Ok(outcome) => SweepChild {
                    value,
                    seed: *seed,
                    dir: name,
                    metric: Some(outcome.metric),
                    error: None,
                    failed_checks: outcome.failed_checks().iter().map(|c| c.name.clone()).collect(),
                },
                Err(e) => {
                    log::warn!("sweep child {name} failed: {e}");
                    SweepChild {
                        value,
                        seed: *seed,
                        dir: name,
                        metric: None,
                        error: Some(e.to_string()),
                        failed_checks: vec![],
                    }
                }
            }
        })
        .collect();

    let values: Vec<f64> = sweep.values.iter().map(|v| v.as_f64().expect("validated")).collect();
    let medians: Vec<Option<f64>> = (0..values.len())
        .map(|i| {
            let mut ok: Vec<f64> = children[i * seeds.len()..(i + 1) * seeds.len()]
                .iter()
                .filter_map(|c| c.metric)
                .collect();
            median(&mut ok)
        })
        .collect();
    let partial = children.iter().any(|c| c.error.is_some());
    let verdict = match (sweep.expect, medians.iter().copied().collect::<Option<Vec<f64>>>()) {
        (Some(trend), Some(series)) => Some(trend_holds(trend, &series)),
        _ => None,
    };
    let report = SweepReport {
        axis: sweep.axis.clone(),
        pipeline: cfg.pipeline.name().into(),
        values,
        children,
        medians,
        expect: sweep.expect,
        verdict,
        partial,
    };
    write_tables(out, &report)?;

    let mut checks = Vec::new();
    if let Some(trend) = report.expect {
        checks.push(Check {
            name: "sweep-trend".into(),
            passed: report.verdict == Some(true),
            detail: format!("{:?} over {:?}", trend, report.medians),
        });
    }
    let manifest = RunManifest {
        pipeline: format!("sweep:{}", cfg.pipeline.name()),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        versions: Versions::current(),
        files: collect_files(out)?,
        metrics: json!({
            "axis": report.axis,
            "values": report.values,
            "medians": report.medians,
            "verdict": report.verdict,
            "partial": report.partial,
        }),
        checks,
    };
    manifest.write(out)?;
    Ok((report, manifest))
}

fn write_tables(out: &Path, report: &SweepReport) -> Result<(), HarnessError> {
    let fmt = |m: Option<f64>| m.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"));
    let mut rows = format!("# one row per child run; status is ok or the error message\n{},seed,metric,status\n", report.axis);
    for c in &report.children {
        let status = c.error.as_deref().unwrap_or("ok").replace([',', '\n'], ";");
        rows += &format!("{:e},{},{},{}\n", c.value, c.seed, fmt(c.metric), status);
    }
    let path = out.join("sweep.csv");
    std::fs::write(&path, rows).map_err(|e| HarnessError::io(path.display(), e))?;

    let mut summary = format!("# median over seeds\n{},median,succeeded\n", report.axis);
    for (i, (v, m)) in report.values.iter().zip(&report.medians).enumerate() {
        let ok = report
            .children
            .iter()
            .filter(|c| c.metric.is_some() && c.dir.starts_with(&format!("child-{i:02}-")))
            .count();
        summary += &format!("{v:e},{},{ok}\n", fmt(*m));
    }
    let path = out.join("sweep_summary.csv");
    std::fs::write(&path, summary).map_err(|e| HarnessError::io(path.display(), e))?;

    let path = out.join("sweep.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(path.display(), e))
}
