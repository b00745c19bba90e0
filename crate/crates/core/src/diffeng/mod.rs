//! Small reverse-mode differentiation engine, Gaussian densities, and
//! first-order optimizers.

mod density;
mod optim;
mod tape;
mod tensor;

pub use density::{gaussian_log_likelihood, kl_diag_gaussians, kl_diag_gaussians_value, HALF_LN_2PI};
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{Gradients, Tape, Value};
pub use tensor::{flatten, Tensor};

pub(crate) use tape::softplus;
