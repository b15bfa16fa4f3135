//! Spectral and nonlinear stability laboratory for combustion fronts.
//!
//! The crate covers the pieces needed to check exponential stability of the
//! end states of a reaction–diffusion front numerically:
//!
//! - [`model`]: the combustion model, general triangular block systems and
//!   their quadratic remainders
//! - [`spectral`]: Fourier symbols, spectral abscissas and exact propagators
//! - [`front`]: the traveling-wave ODE, its first integral and a shooting solver
//! - [`sim`]: a periodic pseudo-spectral solver with Strang splitting
//! - [`norms`]: weighted norms, decay fits and verdict reports
//! - [`scenario`] and [`cli`]: TOML scenarios and the `frontlab` command line

pub mod cli;
pub mod error;
pub mod front;
pub mod model;
pub mod norms;
pub mod ode;
pub mod output;
pub mod quadrature;
pub mod scenario;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
