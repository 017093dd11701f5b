//! Differentiable-computation substrate: tensors, a reverse-mode tape,
//! LSTM cells, Adam, finite-difference checks and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{check_against, grad_check, GradCheckReport, ParamCheck};
pub use lstm::{lstm_step, LstmCellParams};
pub use params::{ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
