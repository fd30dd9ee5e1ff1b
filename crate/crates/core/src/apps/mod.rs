pub mod kernel;
pub mod krr;
pub mod least_squares;
pub mod ridge;
pub mod trace;

pub use kernel::{clustered_points, KernelKind, KernelSpec};
pub use krr::{bootstrap_dlambda, solve_krr, DlambdaMode, KrrConfig};
pub use least_squares::{solve_least_squares, LeastSquaresConfig};
pub use ridge::{ridge_blackbox_solve, RidgeBlackBox};
pub use trace::hutchinson_trace;
