use serde::{Deserialize, Serialize};

use super::tensor::{ensure_same_shape, Tensor};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimizer over a fixed list of parameter tensors.
///
/// Adam moments are allocated on the first step and must keep matching
/// the parameter shapes afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Descent step: moves `params` against `grads`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            ensure_same_shape("optimizer_step", p, g)?;
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.axpy(-self.lr, g)?;
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != params.len() {
                    return Err(Error::invalid("optimizer moments do not match parameter list"));
                }
                let t = (self.step + 1) as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    ensure_same_shape("adam moments", p, m)?;
                    for (((pi, &gi), mi), vi) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        let m_hat = *mi / bias1;
                        let v_hat = *vi / bias2;
                        *pi -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        self.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut opt = OptimizerState::sgd(0.1).unwrap();
        let mut p = vec![Tensor::scalar(1.0)];
        opt.step(&mut p, &[Tensor::scalar(2.0)]).unwrap();
        assert!((p[0].item() - 0.8).abs() < 1e-15);
        opt.step(&mut p, &[Tensor::scalar(0.0)]).unwrap();
        assert!((p[0].item() - 0.8).abs() < 1e-15);
        assert_eq!(opt.steps(), 2);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // t = 1: m̂ = c, v̂ = c², step = lr·c/(|c|+ε)
        for c in [3.0, -0.02, 1e3] {
            let mut opt = OptimizerState::adam(0.01).unwrap();
            let mut p = vec![Tensor::scalar(0.5)];
            opt.step(&mut p, &[Tensor::scalar(c)]).unwrap();
            let expected = 0.5 - 0.01 * c / (c.abs() + ADAM_EPS);
            assert!((p[0].item() - expected).abs() < 1e-15);
            assert!(((0.5 - p[0].item()).abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut opt = OptimizerState::adam(0.01).unwrap();
        let mut p = vec![Tensor::zeros(2, 2)];
        assert!(opt.step(&mut p, &[Tensor::zeros(1, 2)]).is_err());
        assert!(OptimizerState::sgd(0.0).is_err());
    }
}
