//! Closed-form transient responses of weakly nonlinear oscillators.

pub mod error;
pub mod excitation;
pub mod engine;
pub mod frf;
pub mod identify;
pub mod laguerre;
pub mod oracle;
pub mod numeric;
pub mod polyexp;
pub mod tensor;

pub use error::{Error, Result};
pub use laguerre::LaguerreBasis;
pub use polyexp::{PoleOrigin, PoleTag, PolyExpSum, PolyExpTerm, ResponseClass};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
