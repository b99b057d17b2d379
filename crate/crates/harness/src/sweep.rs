use std::path::Path;

use serde::Serialize;

use crate::config::{set_path, ConfigError, ExperimentConfig, StopRule, SweepAxis};
use crate::experiment::{csv_bytes, run_experiment, write_atomic, ExperimentResult, RunOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Axis value as JSON text.
    pub value: String,
    pub runs: usize,
    /// Final regret for episode-count configs, episodes-to-ε otherwise.
    pub metric: &'static str,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub all_valid: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub experiments: Vec<ExperimentResult>,
}

impl SweepResult {
    pub fn all_valid(&self) -> bool {
        self.points.iter().all(|p| p.all_valid)
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Config with `path` set to `value`, the sweep section removed and the
/// output redirected to `out/point_{index}`.
pub fn point_config(
    base: &serde_json::Value,
    axis: &SweepAxis,
    index: usize,
    out: Option<&Path>,
) -> Result<ExperimentConfig, ConfigError> {
    let mut v = base.clone();
    if let Some(map) = v.as_object_mut() {
        map.remove("sweep");
        map.remove("output");
    }
    set_path(&mut v, &axis.path, axis.values[index].clone())?;
    let mut cfg = ExperimentConfig::from_value(v)?;
    cfg.output = out.map(|o| o.join(format!("point_{index}")));
    Ok(cfg)
}

pub fn sweep(
    base: &serde_json::Value,
    axis: &SweepAxis,
    out: Option<&Path>,
    opts: RunOptions,
) -> anyhow::Result<SweepResult> {
    if axis.values.is_empty() {
        return Err(ConfigError::field("sweep.values", "must be nonempty").into());
    }
    let mut points = Vec::new();
    let mut experiments = Vec::new();
    for i in 0..axis.values.len() {
        let cfg = point_config(base, axis, i, out)?;
        let result = run_experiment(&cfg, opts)?;
        let (metric, mut values): (&'static str, Vec<f64>) = match cfg.stop_rule() {
            StopRule::Episodes(_) => (
                "final_regret",
                result.runs.iter().filter_map(|r| r.summary.final_regret).collect(),
            ),
            StopRule::Epsilon(_) => (
                "episodes_to_eps",
                result
                    .runs
                    .iter()
                    .filter_map(|r| r.summary.episodes_to_eps.map(|e| e as f64))
                    .collect(),
            ),
        };
        values.sort_by(f64::total_cmp);
        points.push(SweepPoint {
            value: axis.values[i].to_string(),
            runs: result.runs.len(),
            metric,
            median: quantile(&values, 0.5),
            q1: quantile(&values, 0.25),
            q3: quantile(&values, 0.75),
            all_valid: result.all_valid(),
        });
        experiments.push(result);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("sweep.csv"), &csv_bytes(&points)?)?;
    }
    Ok(SweepResult {
        points,
        experiments,
    })
}
