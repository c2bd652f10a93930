//! Dense 2-D tensors with reverse-mode differentiation.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, relative_error, relative_error_within, GradCheck, GradCheckReport};
pub use matrix::{Matrix, Real, SparseRows};
pub use tape::{Gradients, Tape, Var, NORM_EPS};
