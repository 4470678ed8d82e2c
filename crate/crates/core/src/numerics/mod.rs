//! Numeric substrate: dense tensors, LSTM and affine layers with hand-written
//! reverse passes, MSE, Adam, spectral normalisation and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod lstm;
pub(crate) mod scalar;
pub mod spectral;
pub mod tensor;

pub use adam::{adam_update, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use linear::{forward_linear, LinearParams};
pub use loss::loss_mse;
pub use lstm::{forward_lstm, LstmParams};
pub use scalar::Scalar;
pub use spectral::{estimate_spectral_norm, normalize_spectral, SpectralState};
pub use tensor::Tensor;
