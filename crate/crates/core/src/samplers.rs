//! Task-batch selection strategies.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpm::RpmState;
use crate::tasks::{sample_identifier, IdentifierRange, TaskIdentifier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Erm,
    Drm,
    Gdrm,
    Ohtm,
    Dats,
    Tdps,
    Mpts,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::Erm,
        SamplerKind::Drm,
        SamplerKind::Gdrm,
        SamplerKind::Ohtm,
        SamplerKind::Dats,
        SamplerKind::Tdps,
        SamplerKind::Mpts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Erm => "erm",
            SamplerKind::Drm => "drm",
            SamplerKind::Gdrm => "gdrm",
            SamplerKind::Ohtm => "ohtm",
            SamplerKind::Dats => "dats",
            SamplerKind::Tdps => "tdps",
            SamplerKind::Mpts => "mpts",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown sampler `{s}`")))
    }
}

/// Per-candidate scoring details.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Acquisition score `δᵢ` or exact risk, one per candidate.
    pub scores: Vec<f64>,
    /// `(m, s)` per candidate, MPTS only.
    pub predictions: Vec<(f64, f64)>,
}

/// A selected batch and its outer-loop weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerDecision {
    pub selected: Vec<TaskIdentifier>,
    pub weights: Vec<f64>,
    /// Positions of `selected` within the candidate pool, ascending.
    pub indices: Vec<usize>,
    pub diagnostics: SamplerDiagnostics,
}

impl SamplerDecision {
    pub fn uniform(selected: Vec<TaskIdentifier>) -> Self {
        let n = selected.len();
        Self {
            weights: vec![1.0 / n as f64; n],
            indices: (0..n).collect(),
            selected,
            diagnostics: SamplerDiagnostics::default(),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.selected.len()
    }

    /// Predicted means of the selected candidates, when available.
    pub fn selected_predictions(&self) -> Option<Vec<(f64, f64)>> {
        if self.diagnostics.predictions.is_empty() {
            return None;
        }
        Some(self.indices.iter().map(|&i| self.diagnostics.predictions[i]).collect())
    }

    pub fn validate(&self, b: usize) -> Result<()> {
        if self.selected.len() != b || self.weights.len() != b {
            return Err(Error::invalid(format!(
                "decision holds {} tasks and {} weights, expected {b}",
                self.selected.len(),
                self.weights.len()
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

fn check_batch(b_hat: usize, b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if b_hat < b {
        return Err(Error::invalid(format!("candidate pool {b_hat} smaller than batch {b}")));
    }
    Ok(())
}

/// Indices of the `b` largest scores, ties to the smaller index, returned
/// in ascending index order.
pub fn top_b_indices(scores: &[f64], b: usize) -> Result<Vec<usize>> {
    check_batch(scores.len(), b)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut chosen = order[..b].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// `b` i.i.d. identifiers from the uniform task distribution.
pub fn erm_sample<R: Rng + ?Sized>(range: &IdentifierRange, rng: &mut R, b: usize) -> Result<SamplerDecision> {
    check_batch(b, b)?;
    let selected = (0..b).map(|_| sample_identifier(range, rng)).collect();
    Ok(SamplerDecision::uniform(selected))
}

/// Keeps the `b` evaluated tasks with the largest exact risk.
pub fn drm_select(evaluated: &[(TaskIdentifier, f64)], b: usize) -> Result<SamplerDecision> {
    check_batch(evaluated.len(), b)?;
    let scores: Vec<f64> = evaluated.iter().map(|e| e.1).collect();
    let indices = top_b_indices(&scores, b)?;
    Ok(SamplerDecision {
        selected: indices.iter().map(|&i| evaluated[i].0.clone()).collect(),
        weights: vec![1.0 / b as f64; b],
        indices,
        diagnostics: SamplerDiagnostics {
            scores,
            predictions: Vec::new(),
        },
    })
}

/// `softmax(η · scores)` with max-subtraction.
pub fn softmax(scores: &[f64], eta: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("softmax of an empty score list"));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!("eta must be non-negative, got {eta}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let logits: Vec<f64> = scores.iter().map(|s| eta * s).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn gdrm_weights(risks: &[f64], eta: f64) -> Result<Vec<f64>> {
    softmax(risks, eta)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights from the alignment `⟨gᵢ, ḡ⟩` of each task gradient with the
/// batch-mean query gradient.
pub fn dats_weights(support_grads: &[Vec<f64>], mean_query_grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    if support_grads.iter().any(|g| g.len() != mean_query_grad.len()) {
        return Err(Error::invalid("gradient length mismatch"));
    }
    let scores: Vec<f64> = support_grads.iter().map(|g| dot(g, mean_query_grad)).collect();
    softmax(&scores, eta)
}

/// Weights from the discrepancy `‖gᵢˢ − gᵢᑫ‖₂`.
pub fn tdps_weights(support_grads: &[Vec<f64>], query_grads: &[Vec<f64>], eta: f64) -> Result<Vec<f64>> {
    if support_grads.len() != query_grads.len() {
        return Err(Error::invalid("support and query gradient counts differ"));
    }
    let scores = support_grads
        .iter()
        .zip(query_grads)
        .map(|(s, q)| {
            if s.len() != q.len() {
                return Err(Error::invalid("gradient length mismatch"));
            }
            Ok(s.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    softmax(&scores, eta)
}

/// Bounded memory of the hardest tasks seen so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardTaskBuffer {
    capacity: usize,
    entries: Vec<(TaskIdentifier, f64)>,
}

impl HardTaskBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries, hardest first.
    pub fn entries(&self) -> &[(TaskIdentifier, f64)] {
        &self.entries
    }

    /// Inserts after every entry of equal or higher risk, then evicts the
    /// lowest-risk tail beyond capacity.
    pub fn push(&mut self, tau: TaskIdentifier, risk: f64) {
        let pos = self.entries.partition_point(|e| e.1.total_cmp(&risk) != Ordering::Less);
        self.entries.insert(pos, (tau, risk));
        self.entries.truncate(self.capacity);
    }

    /// Removes and returns the `k` hardest entries.
    pub fn take_hardest(&mut self, k: usize) -> Vec<(TaskIdentifier, f64)> {
        let k = k.min(self.entries.len());
        self.entries.drain(..k).collect()
    }
}

/// Up to `hard` buffered tasks followed by uniform draws to fill `b`.
pub fn ohtm_sample<R: Rng + ?Sized>(
    buffer: &mut HardTaskBuffer,
    range: &IdentifierRange,
    rng: &mut R,
    b: usize,
    hard: usize,
) -> Result<SamplerDecision> {
    check_batch(b, b)?;
    let mut selected: Vec<TaskIdentifier> = buffer
        .take_hardest(hard.min(b))
        .into_iter()
        .map(|e| e.0)
        .collect();
    while selected.len() < b {
        selected.push(sample_identifier(range, rng));
    }
    Ok(SamplerDecision::uniform(selected))
}

/// Anything that can predict `(mean, spread)` of the adaptation risk.
pub trait RiskSurrogate {
    fn predict<R: Rng + ?Sized>(
        &self,
        taus: &[TaskIdentifier],
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, f64)>>;
}

impl RiskSurrogate for RpmState {
    fn predict<R: Rng + ?Sized>(
        &self,
        taus: &[TaskIdentifier],
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .predict_batch(taus, n_samples, rng)?
            .into_iter()
            .map(|p| (p.mean, p.std))
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Acquisition {
    pub gamma0: f64,
    pub gamma1: f64,
}

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0) || !(self.gamma1 >= 0.0) {
            return Err(Error::config("gamma", "gamma0 and gamma1 must be non-negative"));
        }
        if self.gamma0 == 0.0 && self.gamma1 == 0.0 {
            return Err(Error::config("gamma", "gamma0 and gamma1 cannot both be zero"));
        }
        Ok(())
    }

    pub fn score(&self, mean: f64, std: f64) -> f64 {
        self.gamma0 * mean + self.gamma1 * std
    }
}

/// Screens a given candidate pool by `δ = γ₀·m + γ₁·s`.
pub fn mpts_select_from<S: RiskSurrogate, R: Rng + ?Sized>(
    surrogate: &S,
    candidates: Vec<TaskIdentifier>,
    rng: &mut R,
    b: usize,
    acq: Acquisition,
    n_samples: usize,
) -> Result<SamplerDecision> {
    check_batch(candidates.len(), b)?;
    acq.validate()?;
    let predictions = surrogate.predict(&candidates, n_samples, rng)?;
    if predictions.len() != candidates.len() {
        return Err(Error::invalid("surrogate returned the wrong number of predictions"));
    }
    let scores: Vec<f64> = predictions.iter().map(|&(m, s)| acq.score(m, s)).collect();
    let indices = top_b_indices(&scores, b)?;
    Ok(SamplerDecision {
        selected: indices.iter().map(|&i| candidates[i].clone()).collect(),
        weights: vec![1.0 / b as f64; b],
        indices,
        diagnostics: SamplerDiagnostics { scores, predictions },
    })
}

/// Draws `b_hat` uniform candidates and keeps the Top-`b` by acquisition.
pub fn mpts_select<S: RiskSurrogate, R: Rng + ?Sized>(
    surrogate: &S,
    range: &IdentifierRange,
    rng: &mut R,
    b_hat: usize,
    b: usize,
    acq: Acquisition,
    n_samples: usize,
) -> Result<SamplerDecision> {
    check_batch(b_hat, b)?;
    let candidates = (0..b_hat).map(|_| sample_identifier(range, rng)).collect();
    mpts_select_from(surrogate, candidates, rng, b, acq, n_samples)
}
