//! Robustness and fidelity metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{adaptation_risk, BackboneConfig, LearnerParams};
use crate::tasks::TaskDataset;

pub const DEFAULT_ALPHAS: [f64; 3] = [0.5, 0.7, 0.9];

/// Number of tail entries averaged by [`cvar`]: `⌈(1 − α)·n⌉`.
pub fn tail_count(n: usize, alpha: f64) -> usize {
    // guard against 1 − α landing a hair above an integer multiple of 1/n
    let raw = (1.0 - alpha) * n as f64;
    let rounded = raw.round();
    let k = if (raw - rounded).abs() < 1e-9 { rounded } else { raw.ceil() };
    (k as usize).clamp(1, n)
}

/// Sample CVaR: mean of the worst `⌈(1 − α)·n⌉` losses.
pub fn cvar(losses: &[f64], alpha: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::invalid("cvar of an empty loss list"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = tail_count(losses.len(), alpha);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Pearson correlation. `None` when either input is constant.
pub fn pcc(predicted: &[f64], exact: &[f64]) -> Result<Option<f64>> {
    if predicted.len() != exact.len() {
        return Err(Error::invalid("pcc inputs differ in length"));
    }
    if predicted.len() < 2 {
        return Err(Error::invalid("pcc needs at least two pairs"));
    }
    let n = predicted.len() as f64;
    let mp = predicted.iter().sum::<f64>() / n;
    let me = exact.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, e) in predicted.iter().zip(exact) {
        let (dx, dy) = (p - mp, e - me);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Fraction of unordered pairs whose risk-difference sign survives from
/// `before` to `after`. A pair tied on one side counts as preserved only
/// when it is tied on both.
pub fn rank_preservation_rate(before: &[f64], after: &[f64]) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::invalid("rank preservation inputs differ in length"));
    }
    let n = before.len();
    if n < 2 {
        return Err(Error::invalid("rank preservation needs at least two tasks"));
    }
    let sign = |x: f64| if x > 0.0 { 1 } else if x < 0.0 { -1 } else { 0 };
    let mut kept = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if sign(before[i] - before[j]) == sign(after[i] - after[j]) {
                kept += 1;
            }
        }
    }
    Ok(kept as f64 / (n * (n - 1) / 2) as f64)
}

/// Kendall rank correlation (τ-a) between two aligned score lists.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("kendall tau needs two aligned lists of length ≥ 2"));
    }
    let n = a.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if s > 0.0 {
                score += 1;
            } else if s < 0.0 {
                score -= 1;
            }
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_risk: f64,
    /// `(α, CVaR_α)` in ascending α.
    pub cvar: Vec<(f64, f64)>,
    pub per_task_risks: Vec<f64>,
}

impl EvalReport {
    pub fn from_risks(per_task_risks: Vec<f64>, alphas: &[f64]) -> Result<Self> {
        if per_task_risks.is_empty() {
            return Err(Error::invalid("empty evaluation set"));
        }
        let mean_risk = per_task_risks.iter().sum::<f64>() / per_task_risks.len() as f64;
        let mut alphas = alphas.to_vec();
        alphas.sort_by(f64::total_cmp);
        let cvar = alphas
            .iter()
            .map(|&a| Ok((a, cvar(&per_task_risks, a)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mean_risk,
            cvar,
            per_task_risks,
        })
    }

    pub fn cvar_at(&self, alpha: f64) -> Option<f64> {
        self.cvar.iter().find(|(a, _)| (a - alpha).abs() < 1e-12).map(|(_, v)| *v)
    }
}

/// Adapts a copy of `meta` to every evaluation task and summarizes the
/// post-adaptation query risks.
pub fn evaluate_learner(
    meta: &LearnerParams,
    eval_set: &[TaskDataset],
    cfg: &BackboneConfig,
    alphas: &[f64],
) -> Result<EvalReport> {
    let risks = eval_set
        .par_iter()
        .map(|t| adaptation_risk(meta, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_risks(risks, alphas)
}
