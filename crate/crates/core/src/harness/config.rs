use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learner::{Backbone, BackboneConfig, DEFAULT_HIDDEN};
use crate::rpm::RpmConfig;
use crate::samplers::{Acquisition, SamplerKind};
use crate::tasks::{IdentifierRange, SinusoidFamily};

pub const FAST_ITERATIONS: usize = 2000;
pub const FAST_EVAL_SIZE: usize = 120;

/// Flat experiment description. Every key is optional in the file;
/// missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Row name in comparison tables; defaults to the sampler name.
    pub label: Option<String>,
    pub sampler: SamplerKind,
    pub backbone: Backbone,

    pub iterations: usize,
    pub eval_every: usize,
    pub eval_size: usize,
    pub seed: u64,
    pub eval_seed: u64,
    pub out_dir: Option<PathBuf>,

    pub batch_size: usize,
    pub pool_size: usize,
    pub gamma0: f64,
    pub gamma1: f64,
    /// Softmax temperature for GDRM, DATS and TDPS; sampler default if absent.
    pub eta: Option<f64>,
    pub buffer_capacity: usize,
    pub ohtm_hard: usize,

    pub inner_lr: Option<f64>,
    pub outer_lr: Option<f64>,
    pub inner_steps: Option<usize>,
    pub hidden: Vec<usize>,

    pub rpm_latent_dim: usize,
    pub rpm_hidden: usize,
    pub rpm_encoder_layers: usize,
    pub rpm_decoder_layers: usize,
    pub rpm_beta: f64,
    pub rpm_steps: usize,
    pub rpm_lr: f64,
    pub rpm_n_samples: usize,
    pub rpm_sigma_lik: f64,

    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub phase_min: f64,
    pub phase_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub k_shot: usize,
    pub n_query: usize,
    pub noise_std: f64,
    pub alphas: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rpm = RpmConfig::default();
        Self {
            label: None,
            sampler: SamplerKind::Mpts,
            backbone: Backbone::Fomaml,
            iterations: 20000,
            eval_every: 100,
            eval_size: 480,
            seed: 0,
            eval_seed: 2024,
            out_dir: None,
            batch_size: 16,
            pool_size: 32,
            gamma0: 1.0,
            gamma1: 3.0,
            eta: None,
            buffer_capacity: 10,
            ohtm_hard: 8,
            inner_lr: None,
            outer_lr: None,
            inner_steps: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            rpm_latent_dim: rpm.latent_dim,
            rpm_hidden: rpm.hidden,
            rpm_encoder_layers: rpm.encoder_layers,
            rpm_decoder_layers: rpm.decoder_layers,
            rpm_beta: rpm.beta,
            rpm_steps: rpm.steps,
            rpm_lr: rpm.lr,
            rpm_n_samples: rpm.n_samples,
            rpm_sigma_lik: rpm.sigma_lik,
            amplitude_min: 0.1,
            amplitude_max: 5.0,
            phase_min: 0.0,
            phase_max: std::f64::consts::PI,
            x_min: -5.0,
            x_max: 5.0,
            k_shot: 10,
            n_query: 10,
            noise_std: 0.0,
            alphas: crate::eval::DEFAULT_ALPHAS.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Shorter run for smoke tests and CI.
    pub fn fast(mut self) -> Self {
        self.iterations = FAST_ITERATIONS;
        self.eval_size = FAST_EVAL_SIZE;
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.sampler.name().to_string())
    }

    /// SHA-256 of the settings that influence results; the output
    /// directory is left out so relocated runs hash alike.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        Ok(hex::encode(Sha256::digest(canonical.to_toml()?.as_bytes())))
    }

    pub fn backbone_config(&self) -> BackboneConfig {
        let base = match self.backbone {
            Backbone::Fomaml => BackboneConfig::fomaml(),
            Backbone::Reptile => BackboneConfig::reptile(),
        };
        BackboneConfig {
            inner_lr: self.inner_lr.unwrap_or(base.inner_lr),
            outer_lr: self.outer_lr.unwrap_or(base.outer_lr),
            inner_steps: self.inner_steps.unwrap_or(base.inner_steps),
            ..base
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(match (self.sampler, self.backbone) {
            (SamplerKind::Gdrm, _) => 0.001,
            (SamplerKind::Dats, Backbone::Reptile) => 0.2,
            (SamplerKind::Dats, _) => 0.02,
            (SamplerKind::Tdps, _) => 0.005,
            _ => 0.0,
        })
    }

    pub fn acquisition(&self) -> Acquisition {
        Acquisition {
            gamma0: self.gamma0,
            gamma1: self.gamma1,
        }
    }

    pub fn rpm_config(&self) -> RpmConfig {
        RpmConfig {
            latent_dim: self.rpm_latent_dim,
            hidden: self.rpm_hidden,
            encoder_layers: self.rpm_encoder_layers,
            decoder_layers: self.rpm_decoder_layers,
            beta: self.rpm_beta,
            steps: self.rpm_steps,
            lr: self.rpm_lr,
            n_samples: self.rpm_n_samples,
            sigma_lik: self.rpm_sigma_lik,
        }
    }

    pub fn range(&self) -> Result<IdentifierRange> {
        IdentifierRange::new(
            vec![self.amplitude_min, self.phase_min],
            vec![self.amplitude_max, self.phase_max],
        )
    }

    pub fn family(&self) -> Result<SinusoidFamily> {
        Ok(SinusoidFamily {
            range: self.range()?,
            x_lo: self.x_min,
            x_hi: self.x_max,
            noise_std: self.noise_std,
        })
    }

    /// Rejects inconsistent settings, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("iterations", self.iterations)?;
        positive("eval_every", self.eval_every)?;
        positive("eval_size", self.eval_size)?;
        positive("batch_size", self.batch_size)?;
        positive("n_query", self.n_query)?;
        if matches!(self.sampler, SamplerKind::Drm | SamplerKind::Mpts) && self.pool_size < self.batch_size {
            return Err(Error::config(
                "pool_size",
                format!("pool_size {} is smaller than batch_size {}", self.pool_size, self.batch_size),
            ));
        }
        if self.sampler == SamplerKind::Mpts {
            self.acquisition().validate()?;
            self.rpm_config().validate()?;
        }
        if self.sampler == SamplerKind::Ohtm {
            positive("buffer_capacity", self.buffer_capacity)?;
            if self.ohtm_hard > self.batch_size {
                return Err(Error::config("ohtm_hard", "cannot exceed batch_size"));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(Error::config("eta", "must be a finite non-negative number"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be at least 1"));
        }
        if self.backbone == Backbone::Fomaml && self.inner_steps == Some(0) {
            return Err(Error::config("inner_steps", "FOMAML needs at least one inner step"));
        }
        self.backbone_config().validate()?;
        if self.range().is_err() {
            return Err(Error::config("amplitude_min", "identifier bounds must satisfy min ≤ max"));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::config("x_min", "must be smaller than x_max"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std", "must be non-negative"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(0.0..1.0).contains(a)) {
            return Err(Error::config("alphas", "need at least one level, each in [0, 1)"));
        }
        Ok(())
    }
}
