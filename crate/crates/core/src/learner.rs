//! The adaptive regressor: an MLP `1 → hidden… → 1` with ReLU hidden
//! units, its query-set risk, inner-loop adaptation, and the FOMAML and
//! Reptile outer updates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeng::{OptimizerState, Tape, Tensor, Value};
use crate::error::{Error, Result};
use crate::tasks::{Point, TaskDataset};

pub const DEFAULT_HIDDEN: [usize; 2] = [40, 40];

/// Weights and biases stored as `[w₀, b₀, w₁, b₁, …]` with
/// `wᵢ: inᵢ × outᵢ` and `bᵢ: 1 × outᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    tensors: Vec<Tensor>,
}

fn layer_dims(hidden: &[usize]) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden.len() + 1);
    let mut prev = 1;
    for &h in hidden {
        dims.push((prev, h));
        prev = h;
    }
    dims.push((prev, 1));
    dims
}

impl LearnerParams {
    pub fn zeros(hidden: &[usize]) -> Self {
        let tensors = layer_dims(hidden)
            .into_iter()
            .flat_map(|(i, o)| [Tensor::zeros(i, o), Tensor::zeros(1, o)])
            .collect();
        Self { tensors }
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn random<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Self {
        let mut tensors = Vec::new();
        for (i, o) in layer_dims(hidden) {
            let bound = 1.0 / (i as f64).sqrt();
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| bound * (2.0 * rng.random::<f64>() - 1.0)).collect() };
            tensors.push(Tensor::new(i, o, draw(i * o)).expect("layer shape"));
            tensors.push(Tensor::new(1, o, draw(o)).expect("bias shape"));
        }
        Self { tensors }
    }

    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() < 2 || !tensors.len().is_multiple_of(2) {
            return Err(Error::invalid("learner needs (weight, bias) pairs"));
        }
        let mut prev = 1;
        for pair in tensors.chunks(2) {
            let (w, b) = (&pair[0], &pair[1]);
            if w.rows() != prev || b.shape() != (1, w.cols()) {
                return Err(Error::invalid("learner layer shapes do not chain"));
            }
            prev = w.cols();
        }
        if prev != 1 {
            return Err(Error::invalid("learner output must be scalar"));
        }
        Ok(Self { tensors })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_layers(&self) -> usize {
        self.tensors.len() / 2
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// `self + alpha · dir`, tensor by tensor.
    pub fn add_scaled(&self, alpha: f64, dir: &[Tensor]) -> Result<Self> {
        if dir.len() != self.tensors.len() {
            return Err(Error::invalid("direction does not match parameter list"));
        }
        let mut out = self.clone();
        for (p, d) in out.tensors.iter_mut().zip(dir) {
            p.axpy(alpha, d)?;
        }
        Ok(out)
    }

    /// `self − other` as a tensor list.
    pub fn displacement_from(&self, other: &Self) -> Vec<Tensor> {
        self.tensors
            .iter()
            .zip(&other.tensors)
            .map(|(a, b)| a.zip_map(b, |x, y| x - y))
            .collect()
    }
}

/// Forward pass for one input.
pub fn predict(params: &LearnerParams, x: f64) -> f64 {
    let mut act = vec![x];
    let n = params.num_layers();
    for (layer, pair) in params.tensors.chunks(2).enumerate() {
        let (w, b) = (&pair[0], &pair[1]);
        let mut next = b.data().to_vec();
        for (i, &a) in act.iter().enumerate() {
            for (o, &wv) in next.iter_mut().zip(w.row_slice(i)) {
                *o += a * wv;
            }
        }
        if layer + 1 < n {
            for v in &mut next {
                *v = v.max(0.0);
            }
        }
        act = next;
    }
    act[0]
}

/// Records the network over a batch of inputs (`n × 1`) and returns the
/// `n × 1` prediction node.
fn forward_graph(tape: &mut Tape, params: &[Value], xs: Value) -> Result<Value> {
    let n = params.len() / 2;
    let mut h = xs;
    for (layer, pair) in params.chunks(2).enumerate() {
        h = tape.affine(h, pair[0], pair[1])?;
        if layer + 1 < n {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Mean squared error node over `points` for parameters already on `tape`.
pub fn mse_graph(tape: &mut Tape, params: &[Value], points: &[Point]) -> Result<Value> {
    if points.is_empty() {
        return Err(Error::invalid("risk over an empty point set"));
    }
    let xs = tape.leaf(Tensor::column(points.iter().map(|p| p.0).collect()));
    let ys = tape.leaf(Tensor::column(points.iter().map(|p| p.1).collect()));
    let pred = forward_graph(tape, params, xs)?;
    let resid = tape.sub(pred, ys)?;
    let sq = tape.square(resid);
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / points.len() as f64))
}

fn record_params(tape: &mut Tape, params: &LearnerParams) -> Vec<Value> {
    params.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
}

/// `(1/|points|) Σ (predict(x) − y)²`.
pub fn mse_risk(params: &LearnerParams, points: &[Point]) -> Result<f64> {
    let mut tape = Tape::new();
    let vals = record_params(&mut tape, params);
    let risk = mse_graph(&mut tape, &vals, points)?;
    Ok(tape.value(risk).item())
}

/// Risk and its gradient with respect to every parameter tensor.
pub fn mse_and_grad(params: &LearnerParams, points: &[Point]) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vals = record_params(&mut tape, params);
    let risk = mse_graph(&mut tape, &vals, points)?;
    let mut grads = tape.backward(risk)?;
    let g = vals.iter().map(|&v| grads.take(v)).collect();
    Ok((tape.value(risk).item(), g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Fomaml,
    Reptile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub kind: Backbone,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps: usize,
}

impl BackboneConfig {
    /// FOMAML: one inner step, inner and outer rates 0.001.
    pub fn fomaml() -> Self {
        Self {
            kind: Backbone::Fomaml,
            inner_lr: 0.001,
            outer_lr: 0.001,
            inner_steps: 1,
        }
    }

    /// Reptile: 8 inner steps at 0.01, outer rate 0.5.
    pub fn reptile() -> Self {
        Self {
            kind: Backbone::Reptile,
            inner_lr: 0.01,
            outer_lr: 0.5,
            inner_steps: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_lr > 0.0) {
            return Err(Error::config("inner_lr", "must be positive"));
        }
        if !(self.outer_lr > 0.0) {
            return Err(Error::config("outer_lr", "must be positive"));
        }
        if self.kind == Backbone::Reptile && self.inner_steps == 0 {
            return Err(Error::config("inner_steps", "Reptile needs at least one inner step"));
        }
        Ok(())
    }
}

/// `inner_steps` SGD steps of size `inner_lr` on the support risk,
/// starting from a copy of `meta`.
pub fn adapt(meta: &LearnerParams, support: &[Point], cfg: &BackboneConfig) -> Result<LearnerParams> {
    let mut params = meta.clone();
    for _ in 0..cfg.inner_steps {
        let (_, grads) = mse_and_grad(&params, support)?;
        params = params.add_scaled(-cfg.inner_lr, &grads)?;
    }
    Ok(params)
}

/// Result of adapting to one task and scoring on its query set.
#[derive(Clone, Debug)]
pub struct TaskEvaluation {
    pub risk: f64,
    pub adapted: LearnerParams,
}

pub fn evaluate_task(meta: &LearnerParams, task: &TaskDataset, cfg: &BackboneConfig) -> Result<TaskEvaluation> {
    let adapted = adapt(meta, &task.support, cfg)?;
    let risk = mse_risk(&adapted, &task.query)?;
    Ok(TaskEvaluation { risk, adapted })
}

/// Post-adaptation query MSE, the `ℓ` paired with `τ` in risk histories.
pub fn adaptation_risk(meta: &LearnerParams, task: &TaskDataset, cfg: &BackboneConfig) -> Result<f64> {
    Ok(evaluate_task(meta, task, cfg)?.risk)
}

/// Evaluates every task, fanning out over the rayon pool; results keep
/// the task order.
pub fn evaluate_tasks(meta: &LearnerParams, tasks: &[TaskDataset], cfg: &BackboneConfig) -> Result<Vec<TaskEvaluation>> {
    tasks.par_iter().map(|t| evaluate_task(meta, t, cfg)).collect()
}

/// Per-task outer direction.
///
/// FOMAML: query-risk gradient at the adapted parameters (adaptation held
/// constant), a descent direction. Reptile: `adapted − meta`, an ascent
/// direction toward the adapted weights.
pub fn meta_direction(
    meta: &LearnerParams,
    task: &TaskDataset,
    evaluation: &TaskEvaluation,
    cfg: &BackboneConfig,
) -> Result<Vec<Tensor>> {
    match cfg.kind {
        Backbone::Fomaml => Ok(mse_and_grad(&evaluation.adapted, &task.query)?.1),
        Backbone::Reptile => Ok(evaluation.adapted.displacement_from(meta)),
    }
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::invalid(format!("{} weights for a batch of {n}", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Index-ordered `Σᵢ wᵢ · dirᵢ`.
pub(crate) fn weighted_sum(directions: &[Vec<Tensor>], weights: &[f64]) -> Result<Vec<Tensor>> {
    let first = directions.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let mut acc: Vec<Tensor> = first.iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
    for (dir, &w) in directions.iter().zip(weights) {
        for (a, d) in acc.iter_mut().zip(dir) {
            a.axpy(w, d)?;
        }
    }
    Ok(acc)
}

/// Applies one outer step from already computed per-task directions.
/// FOMAML steps `opt` against the weighted gradient; Reptile moves
/// `outer_lr` along the weighted displacement and ignores `opt`.
pub fn apply_meta_step(
    meta: &LearnerParams,
    directions: &[Vec<Tensor>],
    weights: &[f64],
    cfg: &BackboneConfig,
    opt: &mut OptimizerState,
) -> Result<LearnerParams> {
    check_weights(weights, directions.len())?;
    let combined = weighted_sum(directions, weights)?;
    match cfg.kind {
        Backbone::Fomaml => {
            let mut next = meta.clone();
            opt.step(next.tensors_mut(), &combined)?;
            Ok(next)
        }
        Backbone::Reptile => meta.add_scaled(cfg.outer_lr, &combined),
    }
}

fn directions_for(meta: &LearnerParams, batch: &[TaskDataset], cfg: &BackboneConfig) -> Result<Vec<Vec<Tensor>>> {
    batch
        .par_iter()
        .map(|task| {
            let ev = evaluate_task(meta, task, cfg)?;
            meta_direction(meta, task, &ev, cfg)
        })
        .collect()
}

/// Weighted outer update over a batch.
pub fn weighted_meta_update(
    meta: &LearnerParams,
    batch: &[TaskDataset],
    weights: &[f64],
    cfg: &BackboneConfig,
    opt: &mut OptimizerState,
) -> Result<LearnerParams> {
    if batch.is_empty() {
        return Err(Error::invalid("empty task batch"));
    }
    check_weights(weights, batch.len())?;
    let dirs = directions_for(meta, batch, cfg)?;
    apply_meta_step(meta, &dirs, weights, cfg, opt)
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// First-order MAML step with batch-averaged query gradients.
pub fn meta_update_fomaml(
    meta: &LearnerParams,
    batch: &[TaskDataset],
    cfg: &BackboneConfig,
    opt: &mut OptimizerState,
) -> Result<LearnerParams> {
    let cfg = BackboneConfig {
        kind: Backbone::Fomaml,
        ..cfg.clone()
    };
    weighted_meta_update(meta, batch, &uniform_weights(batch.len()), &cfg, opt)
}

/// `meta + outer_lr · mean(adapted − meta)`.
pub fn meta_update_reptile(meta: &LearnerParams, batch: &[TaskDataset], cfg: &BackboneConfig) -> Result<LearnerParams> {
    if cfg.inner_steps == 0 {
        return Err(Error::invalid("Reptile needs at least one inner step"));
    }
    let cfg = BackboneConfig {
        kind: Backbone::Reptile,
        ..cfg.clone()
    };
    let mut unused = OptimizerState::sgd(cfg.outer_lr)?;
    weighted_meta_update(meta, batch, &uniform_weights(batch.len()), &cfg, &mut unused)
}

/// Support- and query-risk gradients at `meta`, flattened.
pub fn support_query_gradients(meta: &LearnerParams, task: &TaskDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, gs) = mse_and_grad(meta, &task.support)?;
    let (_, gq) = mse_and_grad(meta, &task.query)?;
    Ok((crate::diffeng::flatten(&gs), crate::diffeng::flatten(&gq)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tasks::{SinusoidFamily, TaskIdentifier};

    fn linear(w: f64, b: f64) -> LearnerParams {
        LearnerParams::from_tensors(vec![Tensor::scalar(w), Tensor::scalar(b)]).unwrap()
    }

    fn toy_task(points: Vec<Point>) -> TaskDataset {
        TaskDataset {
            identifier: TaskIdentifier::sinusoid(1.0, 0.0),
            support: points.clone(),
            query: points,
        }
    }

    #[test]
    fn zero_network_predicts_zero() {
        let p = LearnerParams::zeros(&DEFAULT_HIDDEN);
        for x in [-4.0, 0.0, 2.5] {
            assert_eq!(predict(&p, x), 0.0);
        }
        assert_eq!(p.num_params(), 40 + 40 + 1600 + 40 + 40 + 1);
    }

    #[test]
    fn predict_matches_graph() {
        let mut rng = seeded(4);
        let p = LearnerParams::random(&DEFAULT_HIDDEN, &mut rng);
        let pts: Vec<Point> = (0..5).map(|i| (i as f64 - 2.0, 0.0)).collect();
        let direct: f64 = pts.iter().map(|&(x, _)| predict(&p, x).powi(2)).sum::<f64>() / 5.0;
        assert!((mse_risk(&p, &pts).unwrap() - direct).abs() < 1e-12);
        assert_eq!(predict(&p, 0.7), predict(&p, 0.7));
    }

    #[test]
    fn mse_edge_cases() {
        let zero = LearnerParams::zeros(&DEFAULT_HIDDEN);
        assert_eq!(mse_risk(&zero, &[(0.0, 1.0), (0.0, -1.0)]).unwrap(), 1.0);
        assert_eq!(mse_risk(&zero, &[(1.0, 0.0), (2.0, 0.0)]).unwrap(), 0.0);
        assert!(mse_risk(&zero, &[]).is_err());
    }

    #[test]
    fn adapt_without_steps_is_identity() {
        let mut rng = seeded(1);
        let meta = LearnerParams::random(&DEFAULT_HIDDEN, &mut rng);
        let cfg = BackboneConfig {
            inner_steps: 0,
            ..BackboneConfig::fomaml()
        };
        assert_eq!(adapt(&meta, &[], &cfg).unwrap(), meta);
    }

    #[test]
    fn adapt_at_zero_risk_is_identity() {
        let meta = linear(2.0, 1.0);
        let support = vec![(0.0, 1.0), (1.0, 3.0)];
        let cfg = BackboneConfig {
            inner_steps: 3,
            ..BackboneConfig::reptile()
        };
        assert_eq!(adapt(&meta, &support, &cfg).unwrap(), meta);
    }

    #[test]
    fn adapt_scalar_toy_step() {
        // predictor b at x = 0, risk (b − 1)², gradient 2(b − 1)
        let cfg = BackboneConfig {
            kind: Backbone::Fomaml,
            inner_lr: 0.1,
            outer_lr: 0.1,
            inner_steps: 1,
        };
        let adapted = adapt(&linear(0.0, 0.0), &[(0.0, 1.0)], &cfg).unwrap();
        assert!((adapted.tensors()[1].item() - 0.2).abs() < 1e-15);
        assert_eq!(adapted.tensors()[0].item(), 0.0);
    }

    #[test]
    fn zero_net_risk_is_mean_sin_squared() {
        let fam = SinusoidFamily::default();
        let mut rng = seeded(12);
        let task = fam.realize_task(&TaskIdentifier::sinusoid(1.0, 0.0), 10, 10, &mut rng).unwrap();
        let cfg = BackboneConfig {
            inner_steps: 0,
            ..BackboneConfig::fomaml()
        };
        let expected = task.query.iter().map(|&(x, _)| x.sin().powi(2)).sum::<f64>() / 10.0;
        let risk = adaptation_risk(&LearnerParams::zeros(&DEFAULT_HIDDEN), &task, &cfg).unwrap();
        assert!((risk - expected).abs() < 1e-12);
    }

    #[test]
    fn meta_update_zero_risk_batch_is_noop() {
        let meta = linear(2.0, 1.0);
        let task = toy_task(vec![(0.0, 1.0), (1.0, 3.0)]);
        let mut opt = OptimizerState::sgd(0.1).unwrap();
        let next = meta_update_fomaml(&meta, &[task.clone(), task.clone()], &BackboneConfig::fomaml(), &mut opt).unwrap();
        assert_eq!(next, meta);
        let next = meta_update_reptile(&meta, &[task], &BackboneConfig::reptile()).unwrap();
        assert_eq!(next, meta);
    }

    #[test]
    fn duplicate_batch_matches_single() {
        let mut rng = seeded(3);
        let fam = SinusoidFamily::default();
        let meta = LearnerParams::random(&[8], &mut rng);
        let t = fam.sample_identifier(&mut rng);
        let task = fam.realize_task(&t, 10, 10, &mut rng).unwrap();
        let cfg = BackboneConfig::fomaml();
        let mut o1 = OptimizerState::adam(0.001).unwrap();
        let mut o2 = OptimizerState::adam(0.001).unwrap();
        let a = meta_update_fomaml(&meta, std::slice::from_ref(&task), &cfg, &mut o1).unwrap();
        let b = meta_update_fomaml(&meta, &[task.clone(), task], &cfg, &mut o2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fomaml_scalar_toy_matches_hand_gradient() {
        // predictor b at x = 0; support target 1, query target 3.
        // adapted b' = b − α·2(b − 1); first-order grad = 2(b' − 3).
        let cfg = BackboneConfig {
            kind: Backbone::Fomaml,
            inner_lr: 0.1,
            outer_lr: 0.05,
            inner_steps: 1,
        };
        let task = TaskDataset {
            identifier: TaskIdentifier::sinusoid(1.0, 0.0),
            support: vec![(0.0, 1.0)],
            query: vec![(0.0, 3.0)],
        };
        let b = 0.5;
        let adapted = b - 0.1 * 2.0 * (b - 1.0);
        let grad = 2.0 * (adapted - 3.0);
        let mut opt = OptimizerState::sgd(cfg.outer_lr).unwrap();
        let next = meta_update_fomaml(&linear(0.0, b), &[task], &cfg, &mut opt).unwrap();
        assert!((next.tensors()[1].item() - (b - 0.05 * grad)).abs() < 1e-15);
    }

    #[test]
    fn reptile_mean_displacement() {
        // linear model with zero weight; tasks whose adapted biases land on 2 and 4
        let meta = linear(0.0, 0.0);
        let cfg = BackboneConfig {
            kind: Backbone::Reptile,
            inner_lr: 0.5,
            outer_lr: 0.5,
            inner_steps: 1,
        };
        // one step at lr 0.5 from b = 0 on target c gives b' = c
        let t2 = toy_task(vec![(0.0, 2.0)]);
        let t4 = toy_task(vec![(0.0, 4.0)]);
        let next = meta_update_reptile(&meta, &[t2.clone(), t4], &cfg).unwrap();
        assert!((next.tensors()[1].item() - 1.5).abs() < 1e-15);

        let full = BackboneConfig { outer_lr: 1.0, ..cfg };
        let adapted = adapt(&meta, &t2.support, &full).unwrap();
        assert_eq!(meta_update_reptile(&meta, &[t2], &full).unwrap(), adapted);
    }

    #[test]
    fn weighted_update_linearity() {
        let cfg = BackboneConfig {
            kind: Backbone::Fomaml,
            inner_lr: 0.1,
            outer_lr: 0.1,
            inner_steps: 1,
        };
        let meta = linear(0.3, -0.2);
        let ta = toy_task(vec![(1.0, 1.0), (-1.0, 0.0)]);
        let tb = toy_task(vec![(0.5, -2.0)]);
        let step = |batch: &[TaskDataset], w: &[f64]| {
            let mut opt = OptimizerState::sgd(0.1).unwrap();
            weighted_meta_update(&meta, batch, w, &cfg, &mut opt).unwrap()
        };
        let mixed = step(&[ta.clone(), tb.clone()], &[0.75, 0.25]);
        let only_a = step(std::slice::from_ref(&ta), &[1.0]);
        let only_b = step(std::slice::from_ref(&tb), &[1.0]);
        for i in 0..2 {
            let expect = 0.75 * only_a.tensors()[i].item() + 0.25 * only_b.tensors()[i].item();
            assert!((mixed.tensors()[i].item() - expect).abs() < 1e-14);
        }
        let one_hot = step(&[ta.clone(), tb.clone()], &[1.0, 0.0]);
        assert_eq!(one_hot, only_a);
        let mut opt = OptimizerState::sgd(0.1).unwrap();
        let uniform = meta_update_fomaml(&meta, &[ta.clone(), tb.clone()], &cfg, &mut opt).unwrap();
        assert_eq!(uniform, step(&[ta.clone(), tb.clone()], &[0.5, 0.5]));
        let mut opt = OptimizerState::sgd(0.1).unwrap();
        assert!(weighted_meta_update(&meta, &[ta, tb], &[0.6, 0.6], &cfg, &mut opt).is_err());
    }

    #[test]
    fn fit_single_sinusoid() {
        let mut rng = seeded(17);
        let mut params = LearnerParams::random(&DEFAULT_HIDDEN, &mut rng);
        let pts: Vec<Point> = (0..40).map(|i| {
            let x = -5.0 + 10.0 * i as f64 / 39.0;
            (x, x.sin())
        }).collect();
        let mut opt = OptimizerState::adam(0.01).unwrap();
        let mut risk = f64::INFINITY;
        for _ in 0..5000 {
            let (r, g) = mse_and_grad(&params, &pts).unwrap();
            risk = r;
            if r < 1e-3 {
                break;
            }
            opt.step(params.tensors_mut(), &g).unwrap();
        }
        assert!(risk < 1e-3, "fit stalled at {risk}");
        assert!(predict(&params, 0.0).abs() < 0.1);
    }
}
