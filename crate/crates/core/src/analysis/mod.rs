//! Certification tools: best responses and Nash gaps, deterministic-Nash
//! enumeration, potential-game verification and potential values.

mod best_response;
pub mod congestion;
mod potential;

pub use best_response::*;
pub use potential::*;
