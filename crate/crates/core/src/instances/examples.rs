use serde_json::json;

use super::{max_abs, uniform, Instance, InstanceMetadata};
use crate::analysis::{OrdinalCandidate, OrdinalKind};
use crate::error::{CoreError, Result};
use crate::game::TabularMarkovGame;

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("discount {gamma} outside [0, 1)")))
    }
}

/// Two-state zero-sum game where `s' = s xor a_A xor a_B`. State 0 pays
/// (2, 0) and state 1 pays (0, 2) regardless of actions.
pub fn build_xor_zerosum(gamma: f64) -> Result<Instance> {
    check_gamma(gamma)?;
    let raw = [[2.0, 0.0], [0.0, 2.0]];
    let scale = max_abs(raw.iter().flatten().copied());
    let game = TabularMarkovGame::from_fn(
        &[2, 2],
        2,
        gamma,
        uniform(2),
        |i, s, _| raw[s][i] / scale,
        |s, a, out| {
            out.fill(0.0);
            out[s ^ a[0] ^ a[1]] = 1.0;
        },
    )?;
    Ok(Instance {
        game,
        metadata: InstanceMetadata {
            instance: "xor".into(),
            params: json!({ "gamma": gamma }),
            scale,
            ..Default::default()
        },
    })
}

/// Raw state-0 payoffs of the black-hole game, `[a_A][a_B] -> (R_A, R_B)`.
const BLACKHOLE_S0: [[(f64, f64); 2]; 2] = [[(5.0, 2.0), (-1.0, -2.0)], [(-5.0, -4.0), (1.0, 4.0)]];
/// Raw state-0 potential of the black-hole game.
const BLACKHOLE_PHI0: [[f64; 2]; 2] = [[4.0, 0.0], [-6.0, 2.0]];

/// Two-state coordination game: playing (0, 0) at state 0 stays there,
/// anything else falls into an absorbing zero-reward state. The absorbing
/// state offers two actions with identical effect.
pub fn build_blackhole(gamma: f64) -> Result<Instance> {
    check_gamma(gamma)?;
    let scale = max_abs(BLACKHOLE_S0.iter().flatten().flat_map(|&(a, b)| [a, b]));
    let game = TabularMarkovGame::from_fn(
        &[2, 2],
        2,
        gamma,
        uniform(2),
        |i, s, a| {
            if s == 1 {
                return 0.0;
            }
            let (ra, rb) = BLACKHOLE_S0[a[0]][a[1]];
            (if i == 0 { ra } else { rb }) / scale
        },
        |s, a, out| {
            out.fill(0.0);
            if s == 0 && a[0] == 0 && a[1] == 0 {
                out[0] = 1.0;
            } else {
                out[1] = 1.0;
            }
        },
    )?;
    let phi0: Vec<f64> = (0..4).map(|j| BLACKHOLE_PHI0[j / 2][j % 2] / scale).collect();
    Ok(Instance {
        game,
        metadata: InstanceMetadata {
            instance: "blackhole".into(),
            params: json!({ "gamma": gamma }),
            scale,
            ordinal_candidate: Some(OrdinalCandidate {
                kind: OrdinalKind::Instantaneous,
                state_potentials: vec![phi0, vec![0.0; 4]],
            }),
            ..Default::default()
        },
    })
}

/// `V^i_0 = R^i_0(pi) / (1 - gamma p q)` in raw (unscaled) units, where
/// `p` and `q` are the probabilities of action 0 for agents A and B.
pub fn blackhole_closed_form_value(agent: usize, p: f64, q: f64, gamma: f64) -> f64 {
    let probs = [[p * q, p * (1.0 - q)], [(1.0 - p) * q, (1.0 - p) * (1.0 - q)]];
    let mut r = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let (ra, rb) = BLACKHOLE_S0[a][b];
            r += probs[a][b] * if agent == 0 { ra } else { rb };
        }
    }
    r / (1.0 - gamma * p * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{validate_game, JointPolicy};

    #[test]
    fn xor_transitions() {
        let inst = build_xor_zerosum(0.9).unwrap();
        let g = &inst.game;
        assert!(validate_game(g).is_empty());
        let a = g.space().encode(&[0, 1]);
        assert_eq!(g.transition_row(0, a), &[0.0, 1.0]);
        assert_eq!(g.transition_row(1, a), &[1.0, 0.0]);
        assert_eq!(g.reward(0, 0, a), 1.0);
        assert_eq!(g.reward(1, 1, a), 1.0);
    }

    #[test]
    fn blackhole_self_loop() {
        let inst = build_blackhole(0.9).unwrap();
        assert!(validate_game(&inst.game).is_empty());
        let pol = JointPolicy::deterministic(&[2, 2], &[vec![0, 0], vec![0, 0]]);
        let chain = crate::game::induced_chain(&inst.game, &pol).unwrap();
        assert_eq!(chain.transition[0][0], 1.0);
        let d = crate::game::occupancy(&inst.game, &pol, &[1.0, 0.0]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bad_gamma_rejected() {
        assert!(build_xor_zerosum(1.0).is_err());
        assert!(build_blackhole(-0.1).is_err());
    }
}
