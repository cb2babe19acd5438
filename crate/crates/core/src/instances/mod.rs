//! Game constructors: the three structural examples, the safe/distancing
//! congestion game and random potential games.
//!
//! Every builder divides raw rewards by their largest absolute value so the
//! result lies in `[-1, 1]`; the divisor is stored as `scale` in the
//! metadata, so raw values are `scale * reward`.

mod chain;
pub mod congestion;
mod examples;
mod random;

use serde::{Deserialize, Serialize};

use crate::analysis::{OrdinalCandidate, PotentialHandle};
use crate::game::TabularMarkovGame;

pub use chain::{build_chain_mpg, chain_potential_closed_form, CHAIN_STATES};
pub use congestion::{build_congestion, CongestionBuild, CongestionGame, CongestionSpec, Penalty, PenaltyForm};
pub use examples::{blackhole_closed_form_value, build_blackhole, build_xor_zerosum};
pub use random::{build_random_mpg, RandomKind, RandomSizes};

/// Everything a builder knows about its output beyond the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InstanceMetadata {
    pub instance: String,
    /// Builder arguments, for provenance.
    #[serde(default)]
    pub params: serde_json::Value,
    /// Raw rewards equal `scale * reward`.
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialHandle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_candidate: Option<OrdinalCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congestion: Option<CongestionSpec>,
    /// Set when the game is too large for dense tables.
    #[serde(default)]
    pub exact_path_disabled: bool,
}

/// A built game with its metadata.
#[derive(Debug, Clone)]
pub struct Instance {
    pub game: TabularMarkovGame,
    pub metadata: InstanceMetadata,
}

/// Largest absolute entry, or 1 when every entry is zero.
pub(crate) fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    let m = values.into_iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}
