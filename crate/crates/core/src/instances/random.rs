use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{uniform, Instance, InstanceMetadata};
use crate::analysis::{Construction, PotentialHandle};
use crate::error::{CoreError, Result};
use crate::game::{random_simplex_point, JointActionSpace, TabularMarkovGame, DEFAULT_ENUMERATION_CAP};

/// Family of random potential games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomKind {
    /// Identical rewards for all agents.
    Team,
    /// Potential state games with action-independent transitions.
    C1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSizes {
    pub action_counts: Vec<usize>,
    pub num_states: usize,
    pub gamma: f64,
}

/// Random game of the requested family with its potential.
///
/// Team games draw one reward table uniformly from `[-1, 1]` and random
/// action-dependent transitions. C1 games draw `phi_s` and dummy terms
/// `u^i_s(a_{-i})` uniformly from `[-1/2, 1/2]`, so `R_i = phi_s + u^i_s`
/// stays in range, and one random transition row per state.
pub fn build_random_mpg(kind: RandomKind, sizes: &RandomSizes, rng: &mut impl Rng) -> Result<Instance> {
    let RandomSizes {
        action_counts,
        num_states: ns,
        gamma,
    } = sizes;
    let ns = *ns;
    if ns == 0 || !(0.0..1.0).contains(gamma) {
        return Err(CoreError::InvalidArgument("need states and a discount in [0, 1)".into()));
    }
    let space = JointActionSpace::new(action_counts, DEFAULT_ENUMERATION_CAP)?;
    let nj = space.size();
    let n = action_counts.len();
    let phi: Vec<Vec<f64>> = match kind {
        RandomKind::Team => (0..ns)
            .map(|_| (0..nj).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect(),
        RandomKind::C1 => (0..ns)
            .map(|_| (0..nj).map(|_| rng.random_range(-0.5..=0.5)).collect())
            .collect(),
    };
    let mut rewards = vec![0.0; n * ns * nj];
    for i in 0..n {
        for s in 0..ns {
            let row = &mut rewards[(i * ns + s) * nj..(i * ns + s + 1) * nj];
            match kind {
                RandomKind::Team => row.copy_from_slice(&phi[s]),
                RandomKind::C1 => {
                    // u^i_s depends on the others' actions only: one draw per
                    // joint index with agent i's digit zeroed.
                    let stride = space.strides()[i];
                    let ai_count = action_counts[i];
                    let mut dummy = vec![f64::NAN; nj];
                    for a in 0..nj {
                        let key = a - ((a / stride) % ai_count) * stride;
                        if dummy[key].is_nan() {
                            dummy[key] = rng.random_range(-0.5..=0.5);
                        }
                        row[a] = phi[s][a] + dummy[key];
                    }
                }
            }
        }
    }
    let mut transitions = vec![0.0; ns * nj * ns];
    for s in 0..ns {
        let shared = random_simplex_point(ns, rng);
        for a in 0..nj {
            let row = match kind {
                RandomKind::Team => random_simplex_point(ns, rng),
                RandomKind::C1 => shared.clone(),
            };
            transitions[(s * nj + a) * ns..(s * nj + a + 1) * ns].copy_from_slice(&row);
        }
    }
    let game = TabularMarkovGame::new(action_counts, ns, rewards, transitions, *gamma, uniform(ns))?;
    let construction = match kind {
        RandomKind::Team => Construction::Team,
        RandomKind::C1 => Construction::C1,
    };
    Ok(Instance {
        game,
        metadata: InstanceMetadata {
            instance: format!("random_{}", if kind == RandomKind::Team { "team" } else { "c1" }),
            params: json!({ "action_counts": action_counts, "num_states": ns, "gamma": gamma }),
            scale: 1.0,
            potential: Some(PotentialHandle {
                construction,
                state_potentials: phi,
            }),
            ..Default::default()
        },
    })
}
