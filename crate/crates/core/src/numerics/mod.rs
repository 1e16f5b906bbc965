//! Generic one-dimensional numerical engines: adaptive quadrature,
//! Richardson-extrapolated differentiation, bracketed root finding and
//! golden-section maximization.

mod diff;
mod optimize;
mod quad;
mod roots;

pub use diff::{
    richardson_derivative, richardson_diagonal, richardson_estimate, DiffSpec, MAX_DIFF_ORDER,
};
pub use optimize::{maximize_quasiconcave, Maximum, DEFAULT_MAX_TOL};
pub use quad::{integrate, integrate_01, QuadResult, MAX_SUBDIVISIONS};
pub use roots::{find_root_bracketed, DEFAULT_ROOT_TOL};
