//! Best responses, Nash gaps, deterministic-Nash enumeration and the
//! distribution mismatch coefficient.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::{agent_mdp, dot, occupancy, state_values, AgentMdp, ChainSolver, JointPolicy, TabularMarkovGame};

/// Ties within this margin keep the incumbent action during policy
/// iteration, which rules out cycling between equally good actions.
const IMPROVE_TOL: f64 = 1e-13;

/// Bellman-optimality residual a best response must meet.
pub const BR_RESIDUAL_TOL: f64 = 1e-9;

/// Gap below which a profile counts as an exact Nash policy.
pub const NASH_TOL: f64 = 1e-9;

/// Optimal deterministic policy of one agent against frozen opponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub agent: usize,
    /// Chosen action at every state.
    pub actions: Vec<usize>,
    /// Optimal values `V^i_s(BR_i, pi_{-i})`.
    pub values: Vec<f64>,
    /// `max_s |max_a Q(s, a) - V(s)|` after the final evaluation.
    pub residual: f64,
}

impl BestResponse {
    /// The response as a policy component `[state][action]`.
    pub fn component(&self, num_actions: usize) -> Vec<Vec<f64>> {
        self.actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                row
            })
            .collect()
    }
}

pub(crate) fn evaluate_deterministic(mdp: &AgentMdp, actions: &[usize]) -> Vec<f64> {
    let ns = mdp.num_states();
    let m = DMatrix::from_fn(ns, ns, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - mdp.gamma * mdp.transitions[r][actions[r]][c]
    });
    let b = DVector::from_iterator(ns, (0..ns).map(|s| mdp.rewards[s][actions[s]]));
    let v = m.lu().solve(&b).expect("I - gamma P is nonsingular for gamma < 1");
    v.iter().copied().collect()
}

/// Solves a single-agent MDP by policy iteration and returns the optimal
/// deterministic policy with its values.
pub fn solve_mdp(mdp: &AgentMdp) -> (Vec<usize>, Vec<f64>, f64) {
    let ns = mdp.num_states();
    let mut actions: Vec<usize> = mdp
        .rewards
        .iter()
        .map(|r| crate::game::argmax(r))
        .collect();
    // Policy iteration terminates in at most prod_s A iterations; in
    // practice a handful suffice.
    let limit = 10_000;
    let mut values = evaluate_deterministic(mdp, &actions);
    for _ in 0..limit {
        let q = mdp.q_from_values(&values);
        let mut changed = false;
        for s in 0..ns {
            let cur = q[s][actions[s]];
            let best = crate::game::argmax(&q[s]);
            if q[s][best] > cur + IMPROVE_TOL {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        values = evaluate_deterministic(mdp, &actions);
    }
    let q = mdp.q_from_values(&values);
    let residual = q
        .iter()
        .zip(&values)
        .map(|(row, v)| (row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v).abs())
        .fold(0.0, f64::max);
    (actions, values, residual)
}

/// Best response of `agent` to the other agents' components of `policy`.
pub fn best_response(game: &TabularMarkovGame, policy: &JointPolicy, agent: usize) -> Result<BestResponse> {
    let mdp = agent_mdp(game, policy, agent)?;
    let (actions, values, residual) = solve_mdp(&mdp);
    if residual > BR_RESIDUAL_TOL {
        return Err(CoreError::InvalidArgument(format!(
            "best response for agent {agent} left Bellman residual {residual:e}"
        )));
    }
    Ok(BestResponse {
        agent,
        actions,
        values,
        residual,
    })
}

/// Per-agent, per-state deviation gains of a joint policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    /// `gains[i][s] = V^i_s(BR_i, pi_{-i}) - V^i_s(pi)`.
    pub gains: Vec<Vec<f64>>,
    pub gap: f64,
    pub epsilon: f64,
    pub is_eps_nash: bool,
    /// Best-response action of every agent at every state.
    pub best_responses: Vec<Vec<usize>>,
}

pub fn nash_gap(game: &TabularMarkovGame, policy: &JointPolicy, epsilon: f64) -> Result<NashReport> {
    let values = state_values(game, policy)?;
    let brs: Vec<BestResponse> = (0..game.num_agents())
        .into_par_iter()
        .map(|i| best_response(game, policy, i))
        .collect::<Result<_>>()?;
    let gains: Vec<Vec<f64>> = brs
        .iter()
        .zip(&values)
        .map(|(br, v)| br.values.iter().zip(v).map(|(b, x)| b - x).collect())
        .collect();
    let gap = gains.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NashReport {
        gains,
        gap,
        epsilon,
        is_eps_nash: gap <= epsilon,
        best_responses: brs.into_iter().map(|b| b.actions).collect(),
    })
}

/// Default budget on the number of deterministic profiles enumerated.
pub const DEFAULT_PROFILE_BUDGET: u128 = 1 << 22;

/// Every deterministic joint profile with Nash gap at most [`NASH_TOL`],
/// as `choices[agent][state]`.
pub fn deterministic_nash_search(game: &TabularMarkovGame, budget: u128) -> Result<Vec<Vec<Vec<usize>>>> {
    let ns = game.num_states();
    let counts = game.action_counts();
    let per_agent: Vec<u128> = counts.iter().map(|&k| (k as u128).pow(ns as u32)).collect();
    let total = per_agent.iter().fold(1u128, |a, &b| a.saturating_mul(b));
    if total > budget {
        return Err(CoreError::TooLarge {
            what: "deterministic profile enumeration",
            size: total,
            cap: budget,
        });
    }
    let found: Vec<Option<Vec<Vec<usize>>>> = (0..total as u64)
        .into_par_iter()
        .map(|idx| {
            let choices = decode_profile(idx, counts, ns);
            let pol = JointPolicy::deterministic(counts, &choices);
            Ok(profile_is_nash(game, &pol)?.then_some(choices))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn decode_profile(mut idx: u64, counts: &[usize], ns: usize) -> Vec<Vec<usize>> {
    let mut choices = vec![vec![0usize; ns]; counts.len()];
    for i in (0..counts.len()).rev() {
        for s in (0..ns).rev() {
            let k = counts[i] as u64;
            choices[i][s] = (idx % k) as usize;
            idx /= k;
        }
    }
    choices
}

/// Exact Nash test (gap at most [`NASH_TOL`]) for a single profile.
///
/// One-step improvements `delta = max_a Q - V` bound the best-response gain
/// from both sides: `delta <= gain <= delta / (1 - gamma)`. Only profiles in
/// the band between those bounds need a full best-response solve.
pub fn profile_is_nash(game: &TabularMarkovGame, policy: &JointPolicy) -> Result<bool> {
    let values = state_values(game, policy)?;
    let mut worst: f64 = 0.0;
    for (i, vi) in values.iter().enumerate() {
        let mdp = agent_mdp(game, policy, i)?;
        let q = mdp.q_from_values(vi);
        for (s, row) in q.iter().enumerate() {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(best - vi[s]);
            if worst > NASH_TOL {
                return Ok(false);
            }
        }
    }
    if worst <= (1.0 - game.discount()) * NASH_TOL {
        return Ok(true);
    }
    Ok(nash_gap(game, policy, NASH_TOL)?.is_eps_nash)
}

/// `max_{pi in policies} max_s d^pi_mu(s) / mu(s)`, a lower estimate of the
/// distribution mismatch coefficient.
pub fn mismatch_estimate(game: &TabularMarkovGame, policies: &[JointPolicy], mu: &[f64]) -> Result<f64> {
    if mu.iter().any(|&m| m <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "mismatch estimate needs a strictly positive start distribution".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for pol in policies {
        let d = occupancy(game, pol, mu)?;
        for (ds, ms) in d.iter().zip(mu) {
            best = best.max(ds / ms);
        }
    }
    Ok(best)
}

/// Like [`mismatch_estimate`] but maximised over point-mass starts as well:
/// `max_pi max_{s0, s} d^pi_{s0}(s) / mu(s)`. Bounds the ratio needed to
/// turn a gap measured under `mu` into a gap at every start state.
pub fn start_state_mismatch(game: &TabularMarkovGame, policies: &[JointPolicy], mu: &[f64]) -> Result<f64> {
    if mu.iter().any(|&m| m <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "mismatch estimate needs a strictly positive start distribution".into(),
        ));
    }
    let ns = game.num_states();
    let mut best: f64 = 0.0;
    for pol in policies {
        let solver = ChainSolver::new(game, pol)?;
        for s0 in 0..ns {
            let mut start = vec![0.0; ns];
            start[s0] = 1.0;
            for (ds, ms) in solver.occupancy(&start).iter().zip(mu) {
                best = best.max(ds / ms);
            }
        }
    }
    Ok(best)
}

/// `V^i_mu` of every agent under `policy`.
pub fn values_at(game: &TabularMarkovGame, policy: &JointPolicy, mu: &[f64]) -> Result<Vec<f64>> {
    Ok(state_values(game, policy)?.iter().map(|v| dot(v, mu)).collect())
}
