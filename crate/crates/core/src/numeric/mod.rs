//! Dense kernels, the reverse-mode tape and gradient verification.

pub mod gradcheck;
pub mod matrix;
pub mod tape;

pub use gradcheck::{finite_difference_check, relative_error, GradCheckReport, ParamCheck};
pub use matrix::Matrix;
pub use tape::{neg_log_sigmoid, Gradients, Tape, Var};

/// Negative slope of every LeakyReLU in the model.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Lower bound on the row norm used by per-layer normalization.
pub const NORM_EPS: f64 = 1e-12;
