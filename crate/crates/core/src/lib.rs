//! Selective inference for affine selection procedures.
//!
//! The LASSO at a fixed penalty and the first knot of a penalized GLM path
//! both select through a polyhedron `{A y ≤ b}`. Conditioning on that event
//! turns a linear contrast `ηᵀy` into a truncated Gaussian, which gives exact
//! p-values and intervals under Gaussian errors and asymptotically valid ones
//! otherwise.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod events;
pub mod lasso;
pub mod linalg;
pub mod normal;
pub mod simharness;
pub mod truncnorm;

pub use design::DesignMatrix;
pub use error::{Error, Result};
pub use events::{GlmFamily, SelectionEvent, StateLabel};
pub use lasso::{solve_lasso, LassoFit};
pub use truncnorm::{PivotInputs, TruncationInterval};
