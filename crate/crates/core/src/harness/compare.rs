use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use super::metrics::{alpha_column, CsvTable};
use super::run::{RunOutput, METRICS_FILE, TIMING_FILE};
use crate::error::{Error, Result};
use crate::samplers::SamplerKind;

/// Final numbers of one finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub eval_seed: u64,
    pub eval_size: usize,
    pub final_val_mean: f64,
    /// `(α, CVaR_α)` from the last row.
    pub final_cvar: Vec<(f64, f64)>,
    pub training_seconds: f64,
}

impl RunSummary {
    pub fn from_output(config: &ExperimentConfig, out: &RunOutput) -> Result<Self> {
        let last = out.rows.last().ok_or_else(|| Error::invalid("run produced no rows"))?;
        Ok(Self {
            label: config.label(),
            sampler: config.sampler,
            seed: config.seed,
            eval_seed: config.eval_seed,
            eval_size: config.eval_size,
            final_val_mean: last.val_mean,
            final_cvar: config.alphas.iter().copied().zip(last.val_cvar.iter().copied()).collect(),
            training_seconds: out.training_seconds(),
        })
    }

    /// Reads the tail of a run directory written by `run_to_dir`.
    pub fn from_dir(config: &ExperimentConfig, dir: &Path) -> Result<Self> {
        let metrics = CsvTable::load(dir.join(METRICS_FILE))?;
        let timing = CsvTable::load(dir.join(TIMING_FILE))?;
        let need = |t: &CsvTable, col: &str| -> Result<f64> {
            t.last(col)?
                .ok_or_else(|| Error::Parse(format!("{}: empty `{col}`", dir.display())))
        };
        let final_cvar = config
            .alphas
            .iter()
            .map(|&a| Ok((a, need(&metrics, &alpha_column(a))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: config.label(),
            sampler: config.sampler,
            seed: config.seed,
            eval_seed: config.eval_seed,
            eval_size: config.eval_size,
            final_val_mean: need(&metrics, "val_mean")?,
            final_cvar,
            training_seconds: need(&timing, "wall_clock_seconds")?,
        })
    }
}

/// Mean and standard error across seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    pub seeds: usize,
    pub val_mean: Stat,
    pub cvar: Vec<(f64, Stat)>,
    pub seconds: Stat,
    /// Mean training time relative to the ERM group, when present.
    pub relative_time: Option<f64>,
}

/// Groups runs by label (first-appearance order) and summarizes each.
pub fn compare_methods(runs: &[RunSummary]) -> Result<Vec<MethodSummary>> {
    let first = runs.first().ok_or_else(|| Error::invalid("nothing to compare"))?;
    for r in runs {
        if r.eval_seed != first.eval_seed {
            return Err(Error::config("eval_seed", format!("`{}` uses {} but `{}` uses {}", r.label, r.eval_seed, first.label, first.eval_seed)));
        }
        if r.eval_size != first.eval_size {
            return Err(Error::config("eval_size", format!("`{}` uses {} but `{}` uses {}", r.label, r.eval_size, first.label, first.eval_size)));
        }
    }
    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut table: Vec<MethodSummary> = labels
        .iter()
        .map(|&label| {
            let group: Vec<&RunSummary> = runs.iter().filter(|r| r.label == label).collect();
            let col = |f: &dyn Fn(&RunSummary) -> f64| Stat::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            MethodSummary {
                label: label.to_string(),
                seeds: group.len(),
                val_mean: col(&|r| r.final_val_mean),
                cvar: group[0]
                    .final_cvar
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, _))| (a, col(&|r| r.final_cvar[i].1)))
                    .collect(),
                seconds: col(&|r| r.training_seconds),
                relative_time: None,
            }
        })
        .collect();
    let anchor = runs
        .iter()
        .find(|r| r.sampler == SamplerKind::Erm)
        .and_then(|erm| table.iter().find(|m| m.label == erm.label))
        .map(|m| m.seconds.mean);
    if let Some(anchor) = anchor.filter(|a| *a > 0.0) {
        for m in &mut table {
            m.relative_time = Some(m.seconds.mean / anchor);
        }
    }
    Ok(table)
}

/// Fixed-width text rendering of a comparison.
pub fn render_table(rows: &[MethodSummary]) -> String {
    let mut out = format!("{:<12} {:>5} {:>22}", "method", "seeds", "val_mean");
    if let Some(first) = rows.first() {
        for (a, _) in &first.cvar {
            let _ = write!(out, " {:>22}", format!("cvar_{a}"));
        }
    }
    let _ = writeln!(out, " {:>10} {:>8}", "seconds", "rel_time");
    for m in rows {
        let _ = write!(out, "{:<12} {:>5} {:>22}", m.label, m.seeds, fmt_stat(m.val_mean));
        for (_, s) in &m.cvar {
            let _ = write!(out, " {:>22}", fmt_stat(*s));
        }
        let rel = m.relative_time.map_or("-".to_string(), |r| format!("{r:.2}"));
        let _ = writeln!(out, " {:>10.2} {:>8}", m.seconds.mean, rel);
    }
    out
}

fn fmt_stat(s: Stat) -> String {
    format!("{:.6} ± {:.6}", s.mean, s.se)
}

/// Machine-readable comparison with full precision.
pub fn render_summary_csv(rows: &[MethodSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "seeds".into(), "val_mean".into(), "val_mean_se".into()];
    if let Some(first) = rows.first() {
        for (a, _) in &first.cvar {
            header.push(format!("cvar_{a}"));
            header.push(format!("cvar_{a}_se"));
        }
    }
    header.extend(["seconds".to_string(), "relative_time".into()]);
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    for m in rows {
        let mut rec = vec![m.label.clone(), m.seeds.to_string(), m.val_mean.mean.to_string(), m.val_mean.se.to_string()];
        for (_, s) in &m.cvar {
            rec.push(s.mean.to_string());
            rec.push(s.se.to_string());
        }
        rec.push(m.seconds.mean.to_string());
        rec.push(m.relative_time.map(|r| r.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
