//! Risk predictive model.
//!
//! A DeepSet encoder embeds each `(τ, ℓ)` record of the latest risk
//! history, mean-pools the embeddings, and maps the pooled vector to a
//! diagonal Gaussian over a latent `z`. The decoder maps `[z, τ]` to the
//! mean of a unit-variance Gaussian over the (standardized) risk. Training
//! maximizes a single-sample ELBO whose KL term pulls the posterior
//! toward the previous iteration's posterior; after each training call the
//! fresh posterior becomes both the predictive distribution and the next
//! prior.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffeng::{
    gaussian_log_likelihood, kl_diag_gaussians, kl_diag_gaussians_value, softplus, OptimizerState, Tape, Tensor,
    Value,
};
use crate::error::{Error, Result};
use crate::tasks::{IdentifierRange, TaskIdentifier};

/// Lower bound added to the softplus scale head.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpmConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub beta: f64,
    /// Gradient steps per training call.
    pub steps: usize,
    pub lr: f64,
    pub n_samples: usize,
    /// Fixed decoder likelihood scale in standardized units.
    pub sigma_lik: f64,
}

impl Default for RpmConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            hidden: 10,
            encoder_layers: 4,
            decoder_layers: 3,
            beta: 1.0,
            steps: 2,
            lr: 3e-4,
            n_samples: 16,
            sigma_lik: 1.0,
        }
    }
}

impl RpmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::config("rpm_latent_dim", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("rpm_hidden", "must be at least 1"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::config("rpm_beta", "must be non-negative"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("rpm_lr", "must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("rpm_n_samples", "must be at least 1"));
        }
        if !(self.sigma_lik > 0.0) {
            return Err(Error::config("rpm_sigma_lik", "must be positive"));
        }
        Ok(())
    }
}

/// Encoder and decoder weights as `(w, b)` pairs in the order: encoder
/// embedding layers, μ head, σ head, decoder layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpmParams {
    tensors: Vec<Tensor>,
    encoder_layers: usize,
    decoder_layers: usize,
}

impl RpmParams {
    fn dims(tau_dim: usize, cfg: &RpmConfig) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = tau_dim + 1;
        for _ in 0..cfg.encoder_layers {
            dims.push((prev, cfg.hidden));
            prev = cfg.hidden;
        }
        dims.push((prev, cfg.latent_dim));
        dims.push((prev, cfg.latent_dim));
        let mut prev = cfg.latent_dim + tau_dim;
        for _ in 0..cfg.decoder_layers {
            dims.push((prev, cfg.hidden));
            prev = cfg.hidden;
        }
        dims.push((prev, 1));
        dims
    }

    /// Uniform `±1/√fan_in` initialization.
    pub fn random<R: Rng + ?Sized>(tau_dim: usize, cfg: &RpmConfig, rng: &mut R) -> Self {
        let mut tensors = Vec::new();
        for (i, o) in Self::dims(tau_dim, cfg) {
            let bound = 1.0 / (i as f64).sqrt();
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| bound * (2.0 * rng.random::<f64>() - 1.0)).collect() };
            tensors.push(Tensor::new(i, o, draw(i * o)).expect("layer shape"));
            tensors.push(Tensor::new(1, o, draw(o)).expect("bias shape"));
        }
        Self {
            tensors,
            encoder_layers: cfg.encoder_layers,
            decoder_layers: cfg.decoder_layers,
        }
    }

    pub fn zeros(tau_dim: usize, cfg: &RpmConfig) -> Self {
        let tensors = Self::dims(tau_dim, cfg)
            .into_iter()
            .flat_map(|(i, o)| [Tensor::zeros(i, o), Tensor::zeros(1, o)])
            .collect();
        Self {
            tensors,
            encoder_layers: cfg.encoder_layers,
            decoder_layers: cfg.decoder_layers,
        }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    fn encoder_range(&self) -> std::ops::Range<usize> {
        0..2 * self.encoder_layers
    }

    fn mu_head(&self) -> usize {
        2 * self.encoder_layers
    }

    fn sigma_head(&self) -> usize {
        2 * self.encoder_layers + 2
    }

    fn decoder_range(&self) -> std::ops::Range<usize> {
        let start = 2 * self.encoder_layers + 4;
        start..start + 2 * (self.decoder_layers + 1)
    }

    pub fn encoder(&self) -> &[Tensor] {
        &self.tensors[self.encoder_range()]
    }

    pub fn encoder_mut(&mut self) -> &mut [Tensor] {
        let r = self.encoder_range();
        &mut self.tensors[r]
    }

    /// `(w, b)` of the μ head.
    pub fn mu_head_mut(&mut self) -> &mut [Tensor] {
        let i = self.mu_head();
        &mut self.tensors[i..i + 2]
    }

    /// `(w, b)` of the raw-σ head; σ = softplus(raw) + [`SIGMA_FLOOR`].
    pub fn sigma_head_mut(&mut self) -> &mut [Tensor] {
        let i = self.sigma_head();
        &mut self.tensors[i..i + 2]
    }

    pub fn decoder(&self) -> &[Tensor] {
        &self.tensors[self.decoder_range()]
    }

    /// Decoder layers; the first weight's leading `latent_dim` rows act on `z`.
    pub fn decoder_mut(&mut self) -> &mut [Tensor] {
        let r = self.decoder_range();
        &mut self.tensors[r]
    }
}

/// Diagonal Gaussian `q(z | H)` stamped with the iteration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub iteration: usize,
}

impl PosteriorStats {
    pub fn standard_normal(latent_dim: usize) -> Self {
        Self {
            mu: vec![0.0; latent_dim],
            sigma: vec![1.0; latent_dim],
            iteration: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.sigma.len() {
            return Err(Error::invalid("posterior mean and scale lengths differ"));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("posterior scale must be strictly positive"));
        }
        Ok(())
    }
}

/// One iteration's `(τ, ℓ)` batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskHistory {
    pub records: Vec<(TaskIdentifier, f64)>,
    pub iteration: usize,
}

impl RiskHistory {
    pub fn new(records: Vec<(TaskIdentifier, f64)>, iteration: usize) -> Self {
        Self { records, iteration }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("empty risk history"));
        }
        if self.records.iter().any(|(_, l)| !l.is_finite()) {
            return Err(Error::invalid("risk history contains non-finite risks"));
        }
        Ok(())
    }
}

/// Affine map between raw and standardized risks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskScale {
    pub mean: f64,
    pub std: f64,
}

impl RiskScale {
    pub const IDENTITY: RiskScale = RiskScale { mean: 0.0, std: 1.0 };

    /// Population mean and deviation; a constant batch keeps unit scale.
    /// Sums run over the sorted risks so the fit is order-independent.
    pub fn fit(risks: &[f64]) -> Self {
        let mut risks = risks.to_vec();
        risks.sort_by(f64::total_cmp);
        let n = risks.len() as f64;
        let mean = risks.iter().sum::<f64>() / n;
        let var = risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 1e-12 { std } else { 1.0 },
        }
    }

    pub fn standardize(&self, r: f64) -> f64 {
        (r - self.mean) / self.std
    }

    pub fn destandardize(&self, s: f64) -> f64 {
        self.mean + self.std * s
    }
}

fn record(tape: &mut Tape, tensors: &[Tensor]) -> Vec<Value> {
    tensors.iter().map(|t| tape.leaf(t.clone())).collect()
}

fn mlp_graph(tape: &mut Tape, layers: &[Value], input: Value, relu_last: bool) -> Result<Value> {
    let n = layers.len() / 2;
    let mut h = input;
    for (i, pair) in layers.chunks(2).enumerate() {
        h = tape.affine(h, pair[0], pair[1])?;
        if relu_last || i + 1 < n {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Encoder nodes `(μ, σ)` for records `inputs: n × (d + 1)`.
fn encode_graph(tape: &mut Tape, params: &RpmParams, vals: &[Value], inputs: Value) -> Result<(Value, Value)> {
    let emb = mlp_graph(tape, &vals[params.encoder_range()], inputs, true)?;
    let pooled = tape.mean_rows(emb)?;
    let m = params.mu_head();
    let s = params.sigma_head();
    let mu = tape.affine(pooled, vals[m], vals[m + 1])?;
    let raw = tape.affine(pooled, vals[s], vals[s + 1])?;
    let sp = tape.softplus(raw);
    let sigma = tape.shift(sp, SIGMA_FLOOR);
    Ok((mu, sigma))
}

/// Decoder node `n × 1` for a `1 × L` latent node and `n × d` identifiers.
fn decode_graph(tape: &mut Tape, params: &RpmParams, vals: &[Value], z: Value, taus: Value) -> Result<Value> {
    let n = tape.value(taus).rows();
    let zb = tape.broadcast_rows(z, n)?;
    let input = tape.concat_cols(zb, taus)?;
    mlp_graph(tape, &vals[params.decoder_range()], input, false)
}

fn dense_forward(layers: &[Tensor], input: Tensor, relu_last: bool) -> Result<Tensor> {
    let n = layers.len() / 2;
    let mut h = input;
    for (i, pair) in layers.chunks(2).enumerate() {
        let mut out = h.matmul(&pair[0])?;
        let cols = out.cols();
        let b = pair[1].data();
        let relu = relu_last || i + 1 < n;
        for row in out.data_mut().chunks_mut(cols) {
            for (v, bias) in row.iter_mut().zip(b) {
                *v += bias;
                if relu {
                    *v = v.max(0.0);
                }
            }
        }
        h = out;
    }
    Ok(h)
}

/// Builds encoder inputs `[τ̃, ℓ̃]` from already normalized identifiers
/// and standardized risks.
pub fn encoder_inputs(taus: &[Vec<f64>], risks: &[f64]) -> Result<Tensor> {
    if taus.is_empty() || taus.len() != risks.len() {
        return Err(Error::invalid("encoder needs a non-empty, aligned history"));
    }
    let d = taus[0].len();
    let mut data = Vec::with_capacity(taus.len() * (d + 1));
    for (t, r) in taus.iter().zip(risks) {
        if t.len() != d {
            return Err(Error::invalid("identifier dimensions differ within history"));
        }
        data.extend_from_slice(t);
        data.push(*r);
    }
    Tensor::new(taus.len(), d + 1, data)
}

/// Posterior statistics for encoder inputs (`n × (d + 1)`).
pub fn encode(params: &RpmParams, inputs: &Tensor) -> Result<PosteriorStats> {
    if inputs.rows() == 0 {
        return Err(Error::invalid("empty risk history"));
    }
    let emb = dense_forward(params.encoder(), inputs.clone(), true)?;
    let mut pooled = vec![0.0; emb.cols()];
    for r in 0..emb.rows() {
        for (p, v) in pooled.iter_mut().zip(emb.row_slice(r)) {
            *p += v;
        }
    }
    let n = emb.rows() as f64;
    let pooled = Tensor::row(pooled.into_iter().map(|v| v / n).collect());
    let m = params.mu_head();
    let s = params.sigma_head();
    let mu = dense_forward(&params.tensors[m..m + 2], pooled.clone(), false)?;
    let raw = dense_forward(&params.tensors[s..s + 2], pooled, false)?;
    Ok(PosteriorStats {
        mu: mu.into_data(),
        sigma: raw.data().iter().map(|&v| softplus(v) + SIGMA_FLOOR).collect(),
        iteration: 0,
    })
}

/// `z = μ + σ ⊙ ε`.
pub fn reparameterize(stats: &PosteriorStats, epsilon: &[f64]) -> Result<Vec<f64>> {
    if epsilon.len() != stats.mu.len() {
        return Err(Error::invalid(format!(
            "epsilon has length {}, latent dimension is {}",
            epsilon.len(),
            stats.mu.len()
        )));
    }
    Ok(stats
        .mu
        .iter()
        .zip(&stats.sigma)
        .zip(epsilon)
        .map(|((m, s), e)| m + s * e)
        .collect())
}

/// Predicted standardized risk means for each row of `taus` (`n × d`,
/// normalized identifiers) under one latent draw.
pub fn decode_batch(params: &RpmParams, z: &[f64], taus: &Tensor) -> Result<Vec<f64>> {
    let layers = params.decoder();
    let (w, bias) = (&layers[0], &layers[1]);
    let l = z.len();
    if w.rows() != l + taus.cols() {
        return Err(Error::Shape {
            op: "decode",
            left: (taus.rows(), l + taus.cols()),
            right: w.shape(),
        });
    }
    // the latent block of the first layer is shared by every row
    let width = w.cols();
    let mut shared = vec![0.0; width];
    for (k, &a) in z.iter().enumerate() {
        if a != 0.0 {
            for (o, &r) in shared.iter_mut().zip(w.row_slice(k)) {
                *o += a * r;
            }
        }
    }
    let relu = layers.len() > 2;
    let mut first = Vec::with_capacity(taus.rows() * width);
    for r in 0..taus.rows() {
        let start = first.len();
        first.extend_from_slice(&shared);
        let row = &mut first[start..];
        for (k, &a) in taus.row_slice(r).iter().enumerate() {
            if a != 0.0 {
                for (o, &wv) in row.iter_mut().zip(w.row_slice(l + k)) {
                    *o += a * wv;
                }
            }
        }
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
            if relu {
                *v = v.max(0.0);
            }
        }
    }
    let hidden = Tensor::new(taus.rows(), width, first)?;
    Ok(dense_forward(&layers[2..], hidden, false)?.into_data())
}

pub fn decode(params: &RpmParams, z: &[f64], tau: &[f64]) -> Result<f64> {
    Ok(decode_batch(params, z, &Tensor::row(tau.to_vec()))?[0])
}

/// ELBO pieces for one latent draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboTerms {
    pub elbo: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Standardized training batch: encoder inputs plus decoder identifiers
/// and targets.
#[derive(Clone, Debug)]
pub struct ElboBatch {
    pub inputs: Tensor,
    pub taus: Tensor,
    pub targets: Tensor,
}

impl ElboBatch {
    pub fn new(taus: &[Vec<f64>], risks: &[f64]) -> Result<Self> {
        let inputs = encoder_inputs(taus, risks)?;
        let d = taus[0].len();
        let taus = Tensor::new(taus.len(), d, taus.concat())?;
        let targets = Tensor::column(risks.to_vec());
        Ok(Self { inputs, taus, targets })
    }
}

/// Single-sample ELBO `Σᵢ ln N(ℓᵢ; decode(z, τᵢ), σ_lik²) − β·KL(q ‖ prior)`
/// with `z = μ + σ ⊙ ε` and the prior held constant. Returns the terms and
/// the gradient of the ELBO with respect to every parameter tensor.
pub fn elbo_with_grad(
    params: &RpmParams,
    batch: &ElboBatch,
    prior: &PosteriorStats,
    beta: f64,
    sigma_lik: f64,
    epsilon: &[f64],
) -> Result<(ElboTerms, Vec<Tensor>)> {
    if beta < 0.0 {
        return Err(Error::invalid("beta must be non-negative"));
    }
    prior.validate()?;
    let mut tape = Tape::new();
    let vals = record(&mut tape, params.tensors());
    let inputs = tape.leaf(batch.inputs.clone());
    let (mu, sigma) = encode_graph(&mut tape, params, &vals, inputs)?;
    let l = tape.value(mu).cols();
    if epsilon.len() != l {
        return Err(Error::invalid("epsilon length does not match latent dimension"));
    }
    let eps = tape.leaf(Tensor::row(epsilon.to_vec()));
    let noise = tape.mul(sigma, eps)?;
    let z = tape.add(mu, noise)?;
    let taus = tape.leaf(batch.taus.clone());
    let pred = decode_graph(&mut tape, params, &vals, z, taus)?;
    let targets = tape.leaf(batch.targets.clone());
    let scale = tape.leaf(Tensor::filled(batch.targets.rows(), 1, sigma_lik));
    let recon = gaussian_log_likelihood(&mut tape, targets, pred, scale)?;
    let kl = kl_diag_gaussians(
        &mut tape,
        mu,
        sigma,
        &Tensor::row(prior.mu.clone()),
        &Tensor::row(prior.sigma.clone()),
    )?;
    let weighted = tape.scale(kl, -beta);
    let elbo = tape.add(recon, weighted)?;
    let mut grads = tape.backward(elbo)?;
    let g = vals.iter().map(|&v| grads.take(v)).collect();
    Ok((
        ElboTerms {
            elbo: tape.value(elbo).item(),
            reconstruction: tape.value(recon).item(),
            kl: tape.value(kl).item(),
        },
        g,
    ))
}

pub fn elbo(
    params: &RpmParams,
    batch: &ElboBatch,
    prior: &PosteriorStats,
    beta: f64,
    sigma_lik: f64,
    epsilon: &[f64],
) -> Result<ElboTerms> {
    Ok(elbo_with_grad(params, batch, prior, beta, sigma_lik, epsilon)?.0)
}

/// Mean and epistemic spread of the predicted risk for one identifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    /// Mean over latent draws, standardized units.
    pub mean: f64,
    /// Standard deviation over latent draws, standardized units.
    pub std: f64,
    pub mean_raw: f64,
    pub std_raw: f64,
}

/// Per-call training log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub steps: Vec<ElboTerms>,
}

/// Everything the sampler needs between iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpmState {
    pub config: RpmConfig,
    pub params: RpmParams,
    /// Latest `q(z | H_t)`: the predictive distribution and the next prior.
    pub posterior: PosteriorStats,
    pub scale: RiskScale,
    pub range: IdentifierRange,
    pub optimizer: OptimizerState,
    pub trained_calls: usize,
}

impl RpmState {
    pub fn new<R: Rng + ?Sized>(config: RpmConfig, range: IdentifierRange, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = RpmParams::random(range.dim(), &config, rng);
        Self::with_params(config, range, params)
    }

    pub fn with_params(config: RpmConfig, range: IdentifierRange, params: RpmParams) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            posterior: PosteriorStats::standard_normal(config.latent_dim),
            optimizer: OptimizerState::adam(config.lr)?,
            scale: RiskScale::IDENTITY,
            range,
            params,
            config,
            trained_calls: 0,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained_calls > 0
    }

    fn normalized(&self, tau: &TaskIdentifier) -> Vec<f64> {
        self.range.normalize(tau)
    }

    /// Normalized identifiers and standardized risks in canonical record
    /// order, so pooled sums do not depend on how the history was ordered.
    fn canonical_rows(&self, history: &RiskHistory) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rows: Vec<(Vec<f64>, f64)> = history
            .records
            .iter()
            .map(|(tau, l)| (self.normalized(tau), self.scale.standardize(*l)))
            .collect();
        rows.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.total_cmp(&b.1))
        });
        rows.into_iter().unzip()
    }

    /// Standardizes the history's risks, normalizes its identifiers, and
    /// stores the standardization for de-standardizing predictions.
    pub fn prepare_batch(&mut self, history: &RiskHistory) -> Result<ElboBatch> {
        history.validate()?;
        let risks: Vec<f64> = history.records.iter().map(|r| r.1).collect();
        self.scale = RiskScale::fit(&risks);
        let (taus, std_risks) = self.canonical_rows(history);
        ElboBatch::new(&taus, &std_risks)
    }

    /// Encoder posterior for a history under the current standardization.
    pub fn encode_history(&self, history: &RiskHistory) -> Result<PosteriorStats> {
        history.validate()?;
        let (taus, risks) = self.canonical_rows(history);
        let mut stats = encode(&self.params, &encoder_inputs(&taus, &risks)?)?;
        stats.iteration = history.iteration;
        Ok(stats)
    }

    /// `steps` Adam ascent steps on the ELBO for `history`, then refreshes
    /// the posterior from the trained encoder.
    pub fn train<R: Rng + ?Sized>(&mut self, history: &RiskHistory, rng: &mut R) -> Result<TrainReport> {
        let batch = self.prepare_batch(history)?;
        let mut report = TrainReport::default();
        for _ in 0..self.config.steps {
            let eps: Vec<f64> = (0..self.config.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
            let (terms, grads) = elbo_with_grad(
                &self.params,
                &batch,
                &self.posterior,
                self.config.beta,
                self.config.sigma_lik,
                &eps,
            )?;
            let descent: Vec<Tensor> = grads.iter().map(|g| g.map(|v| -v)).collect();
            self.optimizer.step(self.params.tensors_mut(), &descent)?;
            report.steps.push(terms);
        }
        let mut posterior = encode(&self.params, &batch.inputs)?;
        posterior.iteration = history.iteration;
        self.posterior = posterior;
        self.trained_calls += 1;
        Ok(report)
    }

    /// Predictive statistics for many identifiers. The same `n_samples`
    /// latent draws are shared by every candidate.
    pub fn predict_batch<R: Rng + ?Sized>(
        &self,
        taus: &[TaskIdentifier],
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Vec<RiskPrediction>> {
        if n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if taus.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.range.dim();
        let mut data = Vec::with_capacity(taus.len() * d);
        for t in taus {
            data.extend(self.normalized(t));
        }
        let tau_mat = Tensor::new(taus.len(), d, data)?;
        let mut draws: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let eps: Vec<f64> = (0..self.config.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
            let z = reparameterize(&self.posterior, &eps)?;
            draws.push(decode_batch(&self.params, &z, &tau_mat)?);
        }
        let k = n_samples as f64;
        Ok((0..taus.len())
            .map(|i| {
                // shifted by the first draw so identical draws give exactly zero spread
                let pivot = draws[0][i];
                let offset = draws.iter().map(|d| d[i] - pivot).sum::<f64>() / k;
                let mean = pivot + offset;
                let std = if n_samples > 1 {
                    let ss = draws.iter().map(|d| (d[i] - pivot - offset).powi(2)).sum::<f64>();
                    (ss / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                RiskPrediction {
                    mean,
                    std,
                    mean_raw: self.scale.destandardize(mean),
                    std_raw: self.scale.std * std,
                }
            })
            .collect())
    }

    pub fn predict_risk_stats<R: Rng + ?Sized>(
        &self,
        tau: &TaskIdentifier,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<RiskPrediction> {
        Ok(self.predict_batch(std::slice::from_ref(tau), n_samples, rng)?[0])
    }

    /// KL of the current posterior to a reference (diagnostics).
    pub fn kl_to(&self, reference: &PosteriorStats) -> f64 {
        kl_diag_gaussians_value(&self.posterior.mu, &self.posterior.sigma, &reference.mu, &reference.sigma)
    }
}

/// Functional form of [`RpmState::train`].
pub fn train_rpm<R: Rng + ?Sized>(state: &RpmState, history: &RiskHistory, rng: &mut R) -> Result<(RpmState, TrainReport)> {
    let mut next = state.clone();
    let report = next.train(history, rng)?;
    Ok((next, report))
}
