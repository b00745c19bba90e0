//! Built-in oracle checks run by the `selftest` subcommand.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffeng::Tensor;
use crate::error::Result;
use crate::eval::cvar;
use crate::learner::{adapt, mse_and_grad, mse_risk, BackboneConfig, LearnerParams};
use crate::rng::{seeded, ExperimentRng};
use crate::rpm::{elbo, elbo_with_grad, encode, encoder_inputs, ElboBatch, PosteriorStats, RpmConfig, RpmParams};
use crate::samplers::{drm_select, mpts_select_from, Acquisition, RiskSurrogate};
use crate::tasks::{SinusoidFamily, TaskIdentifier};

pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Norm-wise relative error between an analytic gradient and central
/// finite differences of `f` over every entry of `params`.
pub fn finite_difference_error(
    params: &[Tensor],
    analytic: &[Tensor],
    h: f64,
    mut f: impl FnMut(&[Tensor]) -> Result<f64>,
) -> Result<f64> {
    let mut work = params.to_vec();
    let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
    for (ti, g) in analytic.iter().enumerate() {
        for k in 0..g.len() {
            let orig = work[ti].data()[k];
            work[ti].data_mut()[k] = orig + h;
            let up = f(&work)?;
            work[ti].data_mut()[k] = orig - h;
            let down = f(&work)?;
            work[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = g.data()[k];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
    }
    let scale = na.sqrt().max(nn.sqrt());
    Ok(if scale == 0.0 { 0.0 } else { diff.sqrt() / scale })
}

fn random_points(rng: &mut ExperimentRng, n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0))).collect()
}

/// Worst relative error of the learner's MSE gradient.
pub fn learner_gradient_check(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let width = rng.random_range(2..6);
        let p = LearnerParams::random(&[width, width], &mut rng);
        let pts = random_points(&mut rng, 5);
        let (_, g) = mse_and_grad(&p, &pts)?;
        let err = finite_difference_error(p.tensors(), &g, 1e-6, |t| {
            mse_risk(&LearnerParams::from_tensors(t.to_vec())?, &pts)
        })?;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Worst relative error of the first-order meta-gradient: the query-risk
/// gradient at the adapted parameters, adaptation held fixed.
pub fn fomaml_gradient_check(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let family = SinusoidFamily::default();
    let cfg = BackboneConfig {
        inner_lr: 0.01,
        ..BackboneConfig::fomaml()
    };
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = LearnerParams::random(&[4, 4], &mut rng);
        let tau = family.sample_identifier(&mut rng);
        let task = family.realize_task(&tau, 5, 5, &mut rng)?;
        let adapted = adapt(&p, &task.support, &cfg)?;
        let (_, g) = mse_and_grad(&adapted, &task.query)?;
        let err = finite_difference_error(adapted.tensors(), &g, 1e-6, |t| {
            mse_risk(&LearnerParams::from_tensors(t.to_vec())?, &task.query)
        })?;
        worst = worst.max(err);
    }
    Ok(worst)
}

fn small_rpm_config() -> RpmConfig {
    RpmConfig {
        latent_dim: 3,
        hidden: 4,
        encoder_layers: 2,
        decoder_layers: 2,
        ..RpmConfig::default()
    }
}

fn random_batch(rng: &mut ExperimentRng, n: usize) -> Result<ElboBatch> {
    let taus: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let risks: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    ElboBatch::new(&taus, &risks)
}

/// Worst relative error of the ELBO gradient at a fixed `ε`.
pub fn elbo_gradient_check(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let cfg = small_rpm_config();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let params = RpmParams::random(2, &cfg, &mut rng);
        let batch = random_batch(&mut rng, 4)?;
        let prior = PosteriorStats {
            mu: (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect(),
            sigma: (0..cfg.latent_dim).map(|_| rng.random_range(0.5..1.5)).collect(),
            iteration: 0,
        };
        let eps: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.sample(StandardNormal)).collect();
        let (_, g) = elbo_with_grad(&params, &batch, &prior, 1.0, 1.0, &eps)?;
        let err = finite_difference_error(params.tensors(), &g, 1e-6, |t| {
            let mut q = params.clone();
            q.tensors_mut().clone_from_slice(t);
            Ok(elbo(&q, &batch, &prior, 1.0, 1.0, &eps)?.elbo)
        })?;
        worst = worst.max(err);
    }
    Ok(worst)
}

fn sort_oracle_cvar(losses: &[f64], alpha: f64) -> f64 {
    let mut v = losses.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let k = ((1.0 - alpha) * v.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    v[..k].iter().sum::<f64>() / k as f64
}

/// Number of mismatches between `cvar` and a sort-and-average oracle.
pub fn cvar_oracle_mismatches(instances: usize, seed: u64) -> Result<usize> {
    let mut rng = seeded(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..60);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let alpha = [0.0, 0.5, 0.7, 0.9, rng.random_range(0.0..0.99)][rng.random_range(0..5)];
        if (cvar(&losses, alpha)? - sort_oracle_cvar(&losses, alpha)).abs() > 1e-12 {
            bad += 1;
        }
    }
    Ok(bad)
}

fn brute_force_top(risks: &[f64], b: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(b);
    let mut left: Vec<usize> = (0..risks.len()).collect();
    for _ in 0..b {
        let mut best = 0;
        for (pos, &i) in left.iter().enumerate() {
            if risks[i] > risks[left[best]] {
                best = pos;
            }
        }
        chosen.push(left.remove(best));
    }
    chosen.sort_unstable();
    chosen
}

/// Number of DRM selections that disagree with a repeated-argmax oracle.
pub fn drm_oracle_mismatches(instances: usize, seed: u64) -> Result<usize> {
    let mut rng = seeded(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..48);
        let b = rng.random_range(1..=n);
        // coarse values so ties occur
        let risks: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u8..12))).collect();
        let ev: Vec<_> = risks
            .iter()
            .enumerate()
            .map(|(i, &r)| (TaskIdentifier::sinusoid(i as f64, 0.0), r))
            .collect();
        if drm_select(&ev, b)?.indices != brute_force_top(&risks, b) {
            bad += 1;
        }
    }
    Ok(bad)
}

struct Exact(Vec<f64>);

impl RiskSurrogate for Exact {
    fn predict<R: Rng + ?Sized>(&self, taus: &[TaskIdentifier], _: usize, _: &mut R) -> Result<Vec<(f64, f64)>> {
        Ok(taus.iter().enumerate().map(|(i, _)| (self.0[i], 1.0)).collect())
    }
}

/// Number of mean-only MPTS selections with true risks that differ from DRM.
pub fn mpts_oracle_mismatches(instances: usize, seed: u64) -> Result<usize> {
    let mut rng = seeded(seed);
    let mut bad = 0;
    let acq = Acquisition { gamma0: 1.0, gamma1: 0.0 };
    for _ in 0..instances {
        let n = rng.random_range(1..40);
        let b = rng.random_range(1..=n);
        let risks: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u8..8))).collect();
        let ids: Vec<TaskIdentifier> = (0..n).map(|i| TaskIdentifier::sinusoid(i as f64, 1.0)).collect();
        let ev: Vec<_> = ids.iter().cloned().zip(risks.iter().copied()).collect();
        let m = mpts_select_from(&Exact(risks), ids, &mut rng, b, acq, 1)?;
        if m.selected != drm_select(&ev, b)?.selected {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Largest encoder output change under random record permutations.
pub fn permutation_invariance_gap(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let cfg = RpmConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let params = RpmParams::random(2, &cfg, &mut rng);
        let n = rng.random_range(2..20);
        let mut rows: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| (vec![rng.random::<f64>(), rng.random::<f64>()], rng.sample(StandardNormal)))
            .collect();
        let enc = |rows: &[(Vec<f64>, f64)]| -> Result<PosteriorStats> {
            let (t, r): (Vec<Vec<f64>>, Vec<f64>) = rows.iter().cloned().unzip();
            encode(&params, &encoder_inputs(&t, &r)?)
        };
        let a = enc(&rows)?;
        rows.shuffle(&mut rng);
        let b = enc(&rows)?;
        for (x, y) in a.mu.iter().chain(&a.sigma).zip(b.mu.iter().chain(&b.sigma)) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Runs every oracle suite.
pub fn run_selftest(seed: u64) -> Result<Vec<CheckResult>> {
    let grad = |name, err: f64| CheckResult {
        name,
        passed: err <= GRADIENT_TOLERANCE,
        detail: format!("max relative error {err:.3e}"),
    };
    let count = |name, bad: usize, total: usize| CheckResult {
        name,
        passed: bad == 0,
        detail: format!("{bad}/{total} mismatches"),
    };
    let perm = permutation_invariance_gap(50, seed)?;
    Ok(vec![
        grad("learner gradient", learner_gradient_check(50, seed)?),
        grad("fomaml gradient", fomaml_gradient_check(50, seed)?),
        grad("elbo gradient", elbo_gradient_check(50, seed)?),
        count("cvar oracle", cvar_oracle_mismatches(1000, seed)?, 1000),
        count("drm oracle", drm_oracle_mismatches(1000, seed)?, 1000),
        count("mpts oracle", mpts_oracle_mismatches(1000, seed)?, 1000),
        CheckResult {
            name: "encoder permutation invariance",
            passed: perm <= 1e-12,
            detail: format!("max deviation {perm:.3e}"),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(11).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn finite_differences_catch_a_wrong_gradient() {
        let p = [Tensor::row(vec![1.0, 2.0])];
        let wrong = [Tensor::row(vec![2.0, 2.0])];
        let err = finite_difference_error(&p, &wrong, 1e-6, |t| Ok(t[0].data().iter().map(|v| v * v).sum())).unwrap();
        assert!(err > 0.1);
    }
}
