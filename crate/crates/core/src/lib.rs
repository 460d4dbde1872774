//! Multiplicative Newton optimization on the orthogonal group O(n).
//!
//! Iterates `C(t+1) = exp(Δ(t)) C(t)` where the skew-symmetric step `Δ` is the
//! critical point of the second-order expansion of a separable cost
//! `F(Y) = Σ_i E f_i(Y_i)` at `Y = C X`. A Levenberg-Marquardt damped variant
//! provides global convergence. The kurtosis contrasts in [`cost`] and the
//! helpers in [`ica`] apply the method to independent component analysis of
//! prewhitened data.
//!
//! ```
//! use orthnewton::cost::make_neg_kurtosis_squared;
//! use orthnewton::ica::{run_ica, SyntheticProblem, DEFAULT_SOURCES};
//! use orthnewton::optimizer::OptimizerConfig;
//!
//! let problem = SyntheticProblem::generate(&DEFAULT_SOURCES, 2000, 7).unwrap();
//! let outcome = run_ica(
//!     &problem.mixed,
//!     &make_neg_kurtosis_squared(),
//!     &OptimizerConfig::default(),
//!     None,
//!     Some(&problem.mixing.a),
//! )
//! .unwrap();
//! assert!(outcome.crosstalk.unwrap().mean_percent < 10.0);
//! ```

pub mod cost;
pub mod error;
pub mod group;
pub mod ica;
pub mod io;
pub mod newton;
pub mod operators;
pub mod optimizer;

pub use cost::{Contrast, CostEvaluation, SampleMatrix};
pub use error::{Error, Result};
pub use group::{OrthogonalMatrix, SkewCoordinates};
pub use optimizer::{Mode, OptimizerConfig, RunResult, Termination};
