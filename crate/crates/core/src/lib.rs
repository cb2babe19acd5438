//! Finite multi-agent Markov games: exact evaluation, independent policy
//! gradient learning and structural certification of Markov potential games.

pub mod error;
pub mod game;
pub mod geometry;
pub mod gradient;
pub mod analysis;
pub mod instances;
pub mod io;
pub mod learning;

pub use error::{CoreError, Result};
pub use game::{EvaluationReport, JointPolicy, MarkovGame, TabularMarkovGame};
