use serde_json::json;

use super::{max_abs, uniform, Instance, InstanceMetadata};
use crate::analysis::{Construction, PotentialHandle};
use crate::error::{CoreError, Result};
use crate::game::TabularMarkovGame;

/// State layout: `s0`, the relays `s_HH, s_HT, s_TH, s_TT`, then `s1`.
pub const CHAIN_STATES: usize = 6;
const S0: usize = 0;
const S1: usize = 5;

/// Matching pennies for agent 1 at `s0`.
const R0_AGENT1: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];
/// Raw payoffs at `s1`, `[a_1][a_2] -> (R_1, R_2)`.
const S1_PAYOFF: [[(f64, f64); 2]; 2] = [[(1.0, 1.0), (9.0, 0.0)], [(0.0, 9.0), (6.0, 6.0)]];
/// Raw potential of the `s1` game.
const S1_PHI: [[f64; 2]; 2] = [[4.0, 3.0], [3.0, 0.0]];

fn r0(agent: usize, a: usize, b: usize) -> f64 {
    let m = R0_AGENT1[a][b];
    if agent == 0 {
        m
    } else {
        -m
    }
}

/// Six-state game that is an MPG although its first state is zero-sum.
///
/// At `s0` the agents play matching pennies and move to relay `s_ab`. At the
/// relay each agent collects the other agent's `s0` payoff divided by
/// `gamma`, then the play moves to `s1`, a potential game. From `s1` the
/// play returns to `s0` with probability `p0`. Relays offer two actions
/// with identical effect.
pub fn build_chain_mpg(gamma: f64, p0: f64) -> Result<Instance> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "discount must lie in (0, 1) for the chain game, got {gamma}"
        )));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(CoreError::InvalidArgument(format!("p0 {p0} outside [0, 1]")));
    }
    let raw_s1 = S1_PAYOFF.iter().flatten().flat_map(|&(a, b)| [a, b]);
    let scale = max_abs(raw_s1.chain([1.0 / gamma]));
    let relay = |a: usize, b: usize| 1 + 2 * a + b;
    let game = TabularMarkovGame::from_fn(
        &[2, 2],
        CHAIN_STATES,
        gamma,
        uniform(CHAIN_STATES),
        |i, s, a| {
            let raw = match s {
                S0 => r0(i, a[0], a[1]),
                S1 => {
                    let (x, y) = S1_PAYOFF[a[0]][a[1]];
                    if i == 0 {
                        x
                    } else {
                        y
                    }
                }
                _ => {
                    let k = s - 1;
                    r0(1 - i, k / 2, k % 2) / gamma
                }
            };
            raw / scale
        },
        |s, a, out| {
            out.fill(0.0);
            match s {
                S0 => out[relay(a[0], a[1])] = 1.0,
                S1 => {
                    out[S0] += p0;
                    out[S1] += 1.0 - p0;
                }
                _ => out[S1] = 1.0,
            }
        },
    )?;
    let mut phi = vec![vec![0.0; 4]; CHAIN_STATES];
    for j in 0..4 {
        let (a, b) = (j / 2, j % 2);
        phi[S0][j] = (r0(0, a, b) + r0(1, a, b)) / scale;
        phi[S1][j] = S1_PHI[a][b] / scale;
    }
    Ok(Instance {
        game,
        metadata: InstanceMetadata {
            instance: "chain".into(),
            params: json!({ "gamma": gamma, "p0": p0 }),
            scale,
            potential: Some(PotentialHandle {
                construction: Construction::Analytic,
                state_potentials: phi,
            }),
            ..Default::default()
        },
    })
}

/// Closed-form potential at `(s0, s1)` in raw units for policies given by
/// `x0, y0` (agents' action distributions at `s0`) and `x1, y1` (at `s1`).
pub fn chain_potential_closed_form(
    gamma: f64,
    p0: f64,
    x0: [f64; 2],
    y0: [f64; 2],
    x1: [f64; 2],
    y1: [f64; 2],
) -> (f64, f64) {
    let bil = |x: [f64; 2], m: &dyn Fn(usize, usize) -> f64, y: [f64; 2]| {
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                acc += x[a] * m(a, b) * y[b];
            }
        }
        acc
    };
    let k = bil(x0, &|a, b| r0(0, a, b) + r0(1, a, b), y0);
    let f1 = bil(x1, &|a, b| S1_PHI[a][b], y1);
    let d = 1.0 - gamma * (1.0 - p0) - gamma.powi(3) * p0;
    let phi0 = ((1.0 - gamma * (1.0 - p0)) * k + gamma * gamma * f1) / d;
    let phi1 = (gamma * p0 * k + f1) / d;
    (phi0, phi1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{potential_state_values, state_potential};
    use crate::game::{validate_game, JointPolicy};

    #[test]
    fn builds_valid_game() {
        let inst = build_chain_mpg(0.9, 0.3).unwrap();
        assert!(validate_game(&inst.game).is_empty());
        assert_eq!(inst.metadata.scale, 9.0);
        assert!(build_chain_mpg(0.0, 0.3).is_err());
        assert!(build_chain_mpg(0.5, 1.5).is_err());
    }

    #[test]
    fn small_gamma_sets_scale() {
        let inst = build_chain_mpg(0.1, 0.3).unwrap();
        assert!((inst.metadata.scale - 10.0).abs() < 1e-12);
        assert!(validate_game(&inst.game).is_empty());
    }

    #[test]
    fn state_games() {
        let g = build_chain_mpg(0.8, 0.5).unwrap().game;
        assert!(state_potential(&g, S0).is_none());
        assert!(state_potential(&g, S1).is_some());
    }

    #[test]
    fn per_pass_rewards_are_equal() {
        // r(s0) + gamma r(relay) is the same for both agents on every pass.
        let gamma = 0.7;
        let g = build_chain_mpg(gamma, 0.2).unwrap().game;
        for a in 0..2 {
            for b in 0..2 {
                let j = g.space().encode(&[a, b]);
                let relay = 1 + 2 * a + b;
                let pass = |i| g.reward(i, S0, j) + gamma * g.reward(i, relay, 0);
                assert!((pass(0) - pass(1)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn auxiliary_potential_matches_closed_form() {
        let (gamma, p0) = (0.85, 0.4);
        let inst = build_chain_mpg(gamma, p0).unwrap();
        let h = inst.metadata.potential.clone().unwrap();
        let mut probs = vec![vec![vec![0.5, 0.5]; CHAIN_STATES]; 2];
        probs[0][S0] = vec![0.3, 0.7];
        probs[1][S0] = vec![0.8, 0.2];
        probs[0][S1] = vec![0.6, 0.4];
        probs[1][S1] = vec![0.1, 0.9];
        let pol = JointPolicy::new(probs).unwrap();
        let v = potential_state_values(&inst.game, &h, &pol).unwrap();
        let (c0, c1) =
            chain_potential_closed_form(gamma, p0, [0.3, 0.7], [0.8, 0.2], [0.6, 0.4], [0.1, 0.9]);
        let s = inst.metadata.scale;
        assert!((v[S0] * s - c0).abs() < 1e-12);
        assert!((v[S1] * s - c1).abs() < 1e-12);
    }
}
