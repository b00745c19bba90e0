use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{render_metrics, render_timing, write_atomic, MetricsRow};
use crate::diffeng::{OptimizerState, Tensor};
use crate::error::{Error, Result};
use crate::eval::{evaluate_learner, pcc, rank_preservation_rate};
use crate::learner::{
    adaptation_risk, apply_meta_step, evaluate_tasks, meta_direction, support_query_gradients, uniform_weights,
    BackboneConfig, LearnerParams, TaskEvaluation,
};
use crate::rng::{substream, ExperimentRng};
use crate::rpm::{RiskHistory, RpmState};
use crate::samplers::{
    dats_weights, drm_select, erm_sample, gdrm_weights, mpts_select_from, ohtm_sample, tdps_weights,
    HardTaskBuffer, SamplerKind,
};
use crate::tasks::{sample_identifier, IdentifierRange, SinusoidFamily, TaskDataset, TaskIdentifier};

pub const CHECKPOINT_VERSION: u32 = 1;

const STREAM_INIT: u64 = 0;
const STREAM_SAMPLER: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_RPM: u64 = 3;
const STREAM_EVAL: u64 = 4;

/// Realizes `n` tasks from a dedicated stream of `seed`.
pub fn frozen_task_set(family: &SinusoidFamily, k: usize, q: usize, n: usize, seed: u64) -> Result<Vec<TaskDataset>> {
    let mut rng = substream(seed, STREAM_EVAL);
    (0..n)
        .map(|_| {
            let tau = family.sample_identifier(&mut rng);
            family.realize_task(&tau, k, q, &mut rng)
        })
        .collect()
}

pub fn build_eval_set(config: &ExperimentConfig) -> Result<Vec<TaskDataset>> {
    frozen_task_set(&config.family()?, config.k_shot, config.n_query, config.eval_size, config.eval_seed)
}

/// What one training iteration produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub iteration: usize,
    pub identifiers: Vec<TaskIdentifier>,
    pub risks: Vec<f64>,
    pub weights: Vec<f64>,
    /// Selection-time predicted means of the batch (MPTS after warm-up).
    pub predicted: Option<Vec<f64>>,
    pub selected_scores: Option<Vec<f64>>,
}

impl StepStats {
    pub fn mean_risk(&self) -> f64 {
        self.risks.iter().sum::<f64>() / self.risks.len() as f64
    }

    pub fn pcc(&self) -> Option<f64> {
        self.predicted.as_ref().and_then(|m| pcc(m, &self.risks).ok().flatten())
    }
}

/// Serialized training state at the end of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub iteration: usize,
    pub meta: LearnerParams,
    pub optimizer: OptimizerState,
    pub rpm: Option<RpmState>,
    pub buffer: Option<HardTaskBuffer>,
}

impl Checkpoint {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }
}

/// The episodic training loop, one iteration at a time.
pub struct Trainer {
    config: ExperimentConfig,
    backbone: BackboneConfig,
    family: SinusoidFamily,
    range: IdentifierRange,
    meta: LearnerParams,
    optimizer: OptimizerState,
    rpm: Option<RpmState>,
    buffer: Option<HardTaskBuffer>,
    sampler_rng: ExperimentRng,
    data_rng: ExperimentRng,
    rpm_rng: ExperimentRng,
    iteration: usize,
}

impl Trainer {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let backbone = config.backbone_config();
        let family = config.family()?;
        let range = family.range.clone();
        let meta = LearnerParams::random(&config.hidden, &mut substream(config.seed, STREAM_INIT));
        let mut rpm_rng = substream(config.seed, STREAM_RPM);
        let rpm = match config.sampler {
            SamplerKind::Mpts => Some(RpmState::new(config.rpm_config(), range.clone(), &mut rpm_rng)?),
            _ => None,
        };
        let buffer = (config.sampler == SamplerKind::Ohtm).then(|| HardTaskBuffer::new(config.buffer_capacity));
        Ok(Self {
            optimizer: OptimizerState::adam(backbone.outer_lr)?,
            config: config.clone(),
            backbone,
            family,
            range,
            meta,
            rpm,
            buffer,
            sampler_rng: substream(config.seed, STREAM_SAMPLER),
            data_rng: substream(config.seed, STREAM_DATA),
            rpm_rng,
            iteration: 0,
        })
    }

    pub fn meta(&self) -> &LearnerParams {
        &self.meta
    }

    pub fn backbone(&self) -> &BackboneConfig {
        &self.backbone
    }

    pub fn rpm(&self) -> Option<&RpmState> {
        self.rpm.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn realize(&mut self, ids: &[TaskIdentifier]) -> Result<Vec<TaskDataset>> {
        ids.iter()
            .map(|tau| {
                self.family
                    .realize_task(tau, self.config.k_shot, self.config.n_query, &mut self.data_rng)
            })
            .collect()
    }

    fn uniform_ids(&mut self, n: usize) -> Result<Vec<TaskIdentifier>> {
        Ok(erm_sample(&self.range, &mut self.sampler_rng, n)?.selected)
    }

    fn checked_risks(&self, evals: &[TaskEvaluation]) -> Result<Vec<f64>> {
        let risks: Vec<f64> = evals.iter().map(|e| e.risk).collect();
        if risks.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite {
                iteration: self.iteration,
            });
        }
        Ok(risks)
    }

    /// Sampling, evaluation, weighting, meta-update and sampler feedback
    /// for the next iteration.
    pub fn step(&mut self) -> Result<StepStats> {
        self.iteration += 1;
        let t = self.iteration;
        let cfg = self.config.clone();
        let b = cfg.batch_size;
        let warm = t == 1;

        let mut predicted = None;
        let mut selected_scores = None;
        let (tasks, evals) = match cfg.sampler {
            SamplerKind::Drm if !warm => {
                let ids = self.uniform_ids(cfg.pool_size)?;
                let tasks = self.realize(&ids)?;
                let evals = evaluate_tasks(&self.meta, &tasks, &self.backbone)?;
                let risks = self.checked_risks(&evals)?;
                let pool: Vec<(TaskIdentifier, f64)> = ids.into_iter().zip(risks).collect();
                let decision = drm_select(&pool, b)?;
                selected_scores = Some(decision.indices.iter().map(|&i| pool[i].1).collect());
                tasks
                    .into_iter()
                    .zip(evals)
                    .enumerate()
                    .filter(|(i, _)| decision.indices.binary_search(i).is_ok())
                    .map(|(_, pair)| pair)
                    .unzip()
            }
            SamplerKind::Mpts if !warm && self.rpm.as_ref().is_some_and(RpmState::is_trained) => {
                let candidates: Vec<TaskIdentifier> = (0..cfg.pool_size)
                    .map(|_| sample_identifier(&self.range, &mut self.sampler_rng))
                    .collect();
                let rpm = self.rpm.as_ref().expect("mpts state");
                let decision =
                    mpts_select_from(rpm, candidates, &mut self.rpm_rng, b, cfg.acquisition(), cfg.rpm_n_samples)?;
                let preds = decision.selected_predictions().unwrap_or_default();
                predicted = Some(preds.iter().map(|p| p.0).collect());
                selected_scores = Some(decision.indices.iter().map(|&i| decision.diagnostics.scores[i]).collect());
                let tasks = self.realize(&decision.selected)?;
                let evals = evaluate_tasks(&self.meta, &tasks, &self.backbone)?;
                (tasks, evals)
            }
            SamplerKind::Ohtm if !warm => {
                let buffer = self.buffer.as_mut().expect("ohtm buffer");
                let decision = ohtm_sample(buffer, &self.range, &mut self.sampler_rng, b, cfg.ohtm_hard)?;
                let tasks = self.realize(&decision.selected)?;
                let evals = evaluate_tasks(&self.meta, &tasks, &self.backbone)?;
                (tasks, evals)
            }
            _ => {
                let ids = self.uniform_ids(b)?;
                let tasks = self.realize(&ids)?;
                let evals = evaluate_tasks(&self.meta, &tasks, &self.backbone)?;
                (tasks, evals)
            }
        };
        let risks = self.checked_risks(&evals)?;

        let weights = match cfg.sampler {
            _ if warm => uniform_weights(b),
            SamplerKind::Gdrm => gdrm_weights(&risks, cfg.eta())?,
            SamplerKind::Dats | SamplerKind::Tdps => {
                let grads = tasks
                    .par_iter()
                    .map(|task| support_query_gradients(&self.meta, task))
                    .collect::<Result<Vec<_>>>()?;
                let (gs, gq): (Vec<Vec<f64>>, Vec<Vec<f64>>) = grads.into_iter().unzip();
                if cfg.sampler == SamplerKind::Dats {
                    let mut mean = vec![0.0; gq[0].len()];
                    for g in &gq {
                        for (m, v) in mean.iter_mut().zip(g) {
                            *m += v;
                        }
                    }
                    mean.iter_mut().for_each(|m| *m /= gq.len() as f64);
                    dats_weights(&gs, &mean, cfg.eta())?
                } else {
                    tdps_weights(&gs, &gq, cfg.eta())?
                }
            }
            _ => uniform_weights(b),
        };

        let directions = tasks
            .par_iter()
            .zip(evals.par_iter())
            .map(|(task, ev)| meta_direction(&self.meta, task, ev, &self.backbone))
            .collect::<Result<Vec<Vec<Tensor>>>>()?;
        let next = apply_meta_step(&self.meta, &directions, &weights, &self.backbone, &mut self.optimizer)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { iteration: t });
        }
        self.meta = next;

        let identifiers: Vec<TaskIdentifier> = tasks.into_iter().map(|t| t.identifier).collect();
        if let Some(buffer) = self.buffer.as_mut() {
            for (tau, &r) in identifiers.iter().zip(&risks) {
                buffer.push(tau.clone(), r);
            }
        }
        if let Some(rpm) = self.rpm.as_mut() {
            let history = RiskHistory::new(identifiers.iter().cloned().zip(risks.iter().copied()).collect(), t);
            rpm.train(&history, &mut self.rpm_rng)?;
        }

        Ok(StepStats {
            iteration: t,
            identifiers,
            risks,
            weights,
            predicted,
            selected_scores,
        })
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: self.config.hash()?,
            iteration: self.iteration,
            meta: self.meta.clone(),
            optimizer: self.optimizer.clone(),
            rpm: self.rpm.clone(),
            buffer: self.buffer.clone(),
        })
    }
}

#[derive(Default)]
struct Window {
    risk_sum: f64,
    weight_sum: f64,
    count: usize,
    pcc_sum: f64,
    pcc_count: usize,
    score_sum: f64,
    score_count: usize,
}

impl Window {
    fn push(&mut self, s: &StepStats) {
        self.risk_sum += s.mean_risk();
        self.weight_sum += s.weights.iter().copied().fold(0.0, f64::max);
        self.count += 1;
        if let Some(r) = s.pcc() {
            self.pcc_sum += r;
            self.pcc_count += 1;
        }
        if let Some(sc) = &s.selected_scores {
            self.score_sum += sc.iter().sum::<f64>() / sc.len() as f64;
            self.score_count += 1;
        }
    }

    fn mean(sum: f64, n: usize) -> Option<f64> {
        (n > 0).then(|| sum / n as f64)
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config_hash: String,
    pub rows: Vec<MetricsRow>,
    /// `(iteration, cumulative training seconds)` per row.
    pub timing: Vec<(usize, f64)>,
    pub checkpoint: Checkpoint,
}

impl RunOutput {
    pub fn training_seconds(&self) -> f64 {
        self.timing.last().map_or(0.0, |t| t.1)
    }

    pub fn metrics_csv(&self, alphas: &[f64]) -> Result<String> {
        render_metrics(&self.config_hash, alphas, &self.rows)
    }

    pub fn timing_csv(&self) -> Result<String> {
        render_timing(&self.config_hash, &self.timing)
    }
}

/// Trains for `iterations` steps, evaluating every `eval_every` steps and
/// after the last one. Only time spent in [`Trainer::step`] is clocked.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut trainer = Trainer::new(config)?;
    let eval_set = build_eval_set(config)?;
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut window = Window::default();
    let mut seconds = 0.0;
    let mut previous: Option<Vec<f64>> = None;

    for t in 1..=config.iterations {
        let start = Instant::now();
        let stats = trainer.step()?;
        seconds += start.elapsed().as_secs_f64();
        window.push(&stats);

        if t % config.eval_every == 0 || t == config.iterations {
            let report = evaluate_learner(trainer.meta(), &eval_set, trainer.backbone(), &config.alphas)?;
            let rank = match &previous {
                Some(p) if p.len() >= 2 => Some(rank_preservation_rate(p, &report.per_task_risks)?),
                _ => None,
            };
            rows.push(MetricsRow {
                iteration: t,
                train_batch_mean_risk: window.risk_sum / window.count as f64,
                val_mean: report.mean_risk,
                val_cvar: config
                    .alphas
                    .iter()
                    .map(|&a| report.cvar_at(a).expect("configured level"))
                    .collect(),
                pcc: Window::mean(window.pcc_sum, window.pcc_count),
                rank_preservation_rate: rank,
                selected_score_mean: Window::mean(window.score_sum, window.score_count),
                max_weight: window.weight_sum / window.count as f64,
            });
            timing.push((t, seconds));
            previous = Some(report.per_task_risks);
            window = Window::default();
        }
    }

    Ok(RunOutput {
        config_hash: config.hash()?,
        rows,
        timing,
        checkpoint: trainer.checkpoint()?,
    })
}

/// Default output location for a run.
pub fn default_out_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(config.label()).join(format!("seed-{}", config.seed)))
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Runs and writes `metrics.csv`, `timing.csv` and `checkpoint.json`
/// into `dir`. Nothing is written if the run fails.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let out = run_experiment(config)?;
    let ck = serde_json::to_string(&out.checkpoint).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join(CHECKPOINT_FILE), ck.as_bytes())?;
    write_atomic(&dir.join(TIMING_FILE), out.timing_csv()?.as_bytes())?;
    write_atomic(&dir.join(METRICS_FILE), out.metrics_csv(&config.alphas)?.as_bytes())?;
    Ok(out)
}

/// Rank preservation across single meta-updates on a frozen candidate
/// set, one rate per update.
pub fn rank_preservation_probe(config: &ExperimentConfig, candidates: usize, steps: usize) -> Result<Vec<f64>> {
    let mut trainer = Trainer::new(config)?;
    let frozen = frozen_task_set(&config.family()?, config.k_shot, config.n_query, candidates, config.eval_seed)?;
    let risks = |tr: &Trainer| -> Result<Vec<f64>> {
        frozen
            .par_iter()
            .map(|t| adaptation_risk(tr.meta(), t, tr.backbone()))
            .collect()
    };
    let mut before = risks(&trainer)?;
    let mut rates = Vec::with_capacity(steps);
    for _ in 0..steps {
        trainer.step()?;
        let after = risks(&trainer)?;
        rates.push(rank_preservation_rate(&before, &after)?);
        before = after;
    }
    Ok(rates)
}
