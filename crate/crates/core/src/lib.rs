//! Energy-efficient UAV-assisted federated learning: trajectory, participation,
//! power and data co-optimization.

pub mod channel;
pub mod eco;
pub mod energy;
pub mod error;
pub mod flbound;
pub mod flsim;
pub mod harness;
pub mod scenario;
pub mod subproblem;
pub mod surrogates;
pub mod units;

pub use error::{EcoError, Result};
