//! Differentiable Gaussian log-densities and divergences.

use super::tape::{Tape, Value};
use super::tensor::{ensure_same_shape, Tensor};
use crate::error::{Error, Result};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn ensure_positive(what: &str, t: &Tensor) -> Result<()> {
    if t.data().iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid(format!("{what} must be strictly positive")));
    }
    Ok(())
}

/// `Σᵢ [ −½ ln 2π − ln σᵢ − (xᵢ − μᵢ)² / (2σᵢ²) ]`, differentiable in all
/// three arguments.
pub fn gaussian_log_likelihood(tape: &mut Tape, x: Value, mu: Value, sigma: Value) -> Result<Value> {
    ensure_same_shape("gaussian_log_likelihood", tape.value(x), tape.value(mu))?;
    ensure_same_shape("gaussian_log_likelihood", tape.value(x), tape.value(sigma))?;
    ensure_positive("sigma", tape.value(sigma))?;
    let n = tape.value(x).len() as f64;

    let resid = tape.sub(x, mu)?;
    let z = tape.div(resid, sigma)?;
    let z2 = tape.square(z);
    let half_z2 = tape.scale(z2, 0.5);
    let log_sigma = tape.log(sigma);
    let per = tape.add(half_z2, log_sigma)?;
    let total = tape.sum(per);
    let neg = tape.scale(total, -1.0);
    Ok(tape.shift(neg, -HALF_LN_2PI * n))
}

/// Closed-form `KL(q ‖ p)` for diagonal Gaussians. Gradients flow into the
/// `q` side only; `p` enters as constants.
pub fn kl_diag_gaussians(
    tape: &mut Tape,
    mu_q: Value,
    sigma_q: Value,
    mu_p: &Tensor,
    sigma_p: &Tensor,
) -> Result<Value> {
    ensure_same_shape("kl_diag_gaussians", tape.value(mu_q), tape.value(sigma_q))?;
    ensure_same_shape("kl_diag_gaussians", tape.value(mu_q), mu_p)?;
    ensure_same_shape("kl_diag_gaussians", mu_p, sigma_p)?;
    ensure_positive("sigma_q", tape.value(sigma_q))?;
    ensure_positive("sigma_p", sigma_p)?;

    let inv_var_p = tape.leaf(sigma_p.map(|s| 1.0 / (s * s)));
    let mu_p_v = tape.leaf(mu_p.clone());
    // Σ ln σ_p is constant; keep it out of the graph.
    let log_sigma_p_sum: f64 = sigma_p.data().iter().map(|s| s.ln()).sum();
    let k = mu_p.len() as f64;

    let var_q = tape.square(sigma_q);
    let ratio = tape.mul(var_q, inv_var_p)?;
    let diff = tape.sub(mu_p_v, mu_q)?;
    let diff2 = tape.square(diff);
    let maha = tape.mul(diff2, inv_var_p)?;
    let log_sigma_q = tape.log(sigma_q);
    let two_log_q = tape.scale(log_sigma_q, 2.0);
    let a = tape.add(ratio, maha)?;
    let b = tape.sub(a, two_log_q)?;
    let total = tape.sum(b);
    let shifted = tape.shift(total, 2.0 * log_sigma_p_sum - k);
    Ok(tape.scale(shifted, 0.5))
}

/// Plain `f64` version of [`kl_diag_gaussians`] for logging and checks.
pub fn kl_diag_gaussians_value(mu_q: &[f64], sigma_q: &[f64], mu_p: &[f64], sigma_p: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mu_q.len() {
        let vp = sigma_p[i] * sigma_p[i];
        let d = mu_p[i] - mu_q[i];
        kl += sigma_q[i] * sigma_q[i] / vp + d * d / vp - 1.0 + 2.0 * (sigma_p[i] / sigma_q[i]).ln();
    }
    0.5 * kl
}
