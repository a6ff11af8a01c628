//! Small fully connected networks trained with hand-written backprop.
//!
//! [`Mlp`] is the deterministic predictor. [`Mdn`] puts a mixture density
//! head on a ReLU trunk and outputs `p(z_t | z_c)` as an isotropic Gaussian
//! mixture whose weights, means and scales depend on the context.

pub mod adam;
pub mod mdn;
pub mod mlp;
pub mod objective;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mdn::{mdn_forward, mdn_nll, mdn_nll_grad, Mdn, MdnConfig, MdnHead, MdnParamGrads, MdnParams, DEFAULT_SIGMA_FLOOR};
pub use mlp::{mlp_backward, mlp_forward, Layer, Mlp, MlpCache};
pub use objective::{ema_cov_update, gmje_mdn_loss, marginal_term, EmaCovariance, GmjeMdnLoss, MarginalMode};
pub use train::{ema_smooth, jepa_mse_train, mdn_train, MdnFit, MdnTrainConfig, TrainConfig};
