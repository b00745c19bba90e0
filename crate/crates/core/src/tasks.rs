//! Sinusoid task family: identifiers `τ = (a, b)` configure
//! `y = a·sin(x − b)`, realized as K-shot support and N-point query sets.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real vector configuring one task. For the sinusoid family the
/// components are amplitude and phase (radians).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskIdentifier(pub Vec<f64>);

impl TaskIdentifier {
    pub fn sinusoid(amplitude: f64, phase: f64) -> Self {
        Self(vec![amplitude, phase])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.0[0]
    }

    pub fn phase(&self) -> f64 {
        self.0[1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `(x, y)` observation.
pub type Point = (f64, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub identifier: TaskIdentifier,
    pub support: Vec<Point>,
    pub query: Vec<Point>,
}

/// Axis-aligned box of identifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifierRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IdentifierRange {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("identifier range bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid(format!("empty identifier range {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Training rectangle `[0.1, 5.0] × [0, π]`.
    pub fn sinusoid_default() -> Self {
        Self {
            lo: vec![0.1, 0.0],
            hi: vec![5.0, std::f64::consts::PI],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, tau: &TaskIdentifier) -> bool {
        tau.dim() == self.dim()
            && tau
                .0
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Maps `τ` into `[0, 1]^d` relative to this box. Zero-width axes map to 0.
    pub fn normalize(&self, tau: &TaskIdentifier) -> Vec<f64> {
        tau.0
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| if h > l { (v - l) / (h - l) } else { 0.0 })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

/// Uniform draw from `range`.
pub fn sample_identifier<R: Rng + ?Sized>(range: &IdentifierRange, rng: &mut R) -> TaskIdentifier {
    TaskIdentifier(
        range
            .lo
            .iter()
            .zip(&range.hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect(),
    )
}

/// Settings of the sinusoid family shared by every realized task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFamily {
    pub range: IdentifierRange,
    pub x_lo: f64,
    pub x_hi: f64,
    pub noise_std: f64,
}

impl Default for SinusoidFamily {
    fn default() -> Self {
        Self {
            range: IdentifierRange::sinusoid_default(),
            x_lo: -5.0,
            x_hi: 5.0,
            noise_std: 0.0,
        }
    }
}

impl SinusoidFamily {
    pub fn target(tau: &TaskIdentifier, x: f64) -> f64 {
        tau.amplitude() * (x - tau.phase()).sin()
    }

    pub fn sample_identifier<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskIdentifier {
        sample_identifier(&self.range, rng)
    }

    /// Draws `k` support and `n` query inputs uniformly on `[x_lo, x_hi]`
    /// and labels them with `a·sin(x − b)` (plus optional noise).
    pub fn realize_task<R: Rng + ?Sized>(
        &self,
        tau: &TaskIdentifier,
        k: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<TaskDataset> {
        if n == 0 {
            return Err(Error::invalid("query set size must be at least 1"));
        }
        if tau.dim() != 2 {
            return Err(Error::invalid(format!(
                "sinusoid identifiers have 2 components, got {}",
                tau.dim()
            )));
        }
        let mut draw = |count: usize| -> Vec<Point> {
            (0..count)
                .map(|_| {
                    let x = self.x_lo + (self.x_hi - self.x_lo) * rng.random::<f64>();
                    let mut y = Self::target(tau, x);
                    if self.noise_std > 0.0 {
                        let e: f64 = rng.sample(StandardNormal);
                        y += self.noise_std * e;
                    }
                    (x, y)
                })
                .collect()
        };
        let support = draw(k);
        let query = draw(n);
        Ok(TaskDataset {
            identifier: tau.clone(),
            support,
            query,
        })
    }
}

/// Draws identifiers from a union of boxes, choosing a box with
/// probability proportional to its volume.
#[derive(Clone, Debug)]
pub struct OodIdentifierSampler {
    ranges: Vec<IdentifierRange>,
    cumulative: Vec<f64>,
}

impl OodIdentifierSampler {
    pub fn new(ranges: Vec<IdentifierRange>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("no identifier ranges given"));
        }
        let dim = ranges[0].dim();
        for r in &ranges {
            IdentifierRange::new(r.lo.clone(), r.hi.clone())?;
            if r.dim() != dim {
                return Err(Error::invalid("identifier ranges differ in dimension"));
            }
        }
        let volumes: Vec<f64> = ranges.iter().map(IdentifierRange::volume).collect();
        let total: f64 = volumes.iter().sum();
        let weights: Vec<f64> = if total > 0.0 {
            volumes.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / ranges.len() as f64; ranges.len()]
        };
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { ranges, cumulative })
    }

    pub fn ranges(&self) -> &[IdentifierRange] {
        &self.ranges
    }

    /// Returns the chosen box index together with the draw.
    pub fn sample_with_index<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, TaskIdentifier) {
        let idx = if self.ranges.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            self.cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.ranges.len() - 1)
        };
        (idx, sample_identifier(&self.ranges[idx], rng))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskIdentifier {
        self.sample_with_index(rng).1
    }
}
