//! Loop summarization by rational vector addition systems with resets.
//!
//! The pipeline abstracts a loop body's transition formula by a Q-VASR or a
//! predicate Q-VASRS, computes the exact reachability relation of the
//! abstraction as an existential linear-arithmetic formula, and pulls it back
//! to the program vocabulary through the simulation matrix.

pub mod config;
pub mod error;
pub mod frontend;
pub mod linalg;
pub mod logic;
pub mod reach;
pub mod vas;
pub mod vasrs;

pub use config::Limits;
pub use error::{Error, Result};
