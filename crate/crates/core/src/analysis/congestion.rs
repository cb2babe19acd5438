//! Deterministic equilibria of the congestion game, found by exploiting
//! agent symmetry.
//!
//! A deterministic profile gives every agent a type `(a, b)`: facility `a`
//! in the safe state and `b` in the distancing state. Whether an agent can
//! gain by deviating depends only on its type and the two occupancy
//! vectors, so the search enumerates occupancy pairs, marks the types that
//! are best responses, and asks a max-flow whether the agents can be split
//! into types consistent with both occupancies using good types only.

use petgraph::algo::ford_fulkerson;
use petgraph::graph::Graph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::best_response::{evaluate_deterministic, solve_mdp, NASH_TOL};
use crate::error::{CoreError, Result};
use crate::game::{AgentMdp, MarkovGame};
use crate::instances::congestion::{CongestionGame, DISTANCING, SAFE};

/// Equilibrium found by [`symmetric_nash_search`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricEquilibrium {
    /// Agents per facility in the safe state.
    pub safe: Vec<usize>,
    /// Agents per facility in the distancing state.
    pub distancing: Vec<usize>,
    /// `types[a][b]`: agents at `a` when safe and at `b` when distancing.
    pub types: Vec<Vec<usize>>,
    /// One assignment realising `types`, as `choices[agent][state]`.
    pub choices: Vec<Vec<usize>>,
}

/// All ways to place `total` indistinguishable agents on `parts` facilities.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// MDP faced by one agent whose opponents occupy `others[state]`.
fn agent_problem(game: &CongestionGame, others: [&[usize]; 2]) -> AgentMdp {
    let f = game.spec.num_facilities;
    let mut rewards = vec![vec![0.0; f]; 2];
    let mut transitions = vec![vec![vec![0.0; 2]; f]; 2];
    for s in [SAFE, DISTANCING] {
        let mut counts = others[s].to_vec();
        for k in 0..f {
            counts[k] += 1;
            rewards[s][k] = game.spec.reward(s, k, counts[k]);
            transitions[s][k] = game.spec.transition(s, &counts).to_vec();
            counts[k] -= 1;
        }
    }
    AgentMdp {
        agent: 0,
        gamma: game.discount(),
        rewards,
        transitions,
    }
}

/// `good[a][b]`: an agent of type `(a, b)` cannot gain by deviating when
/// the occupancies are `safe` and `distancing` (its own choice included).
/// Types absent from either occupancy are marked `false`.
pub fn best_response_types(game: &CongestionGame, safe: &[usize], distancing: &[usize]) -> Vec<Vec<bool>> {
    let f = game.spec.num_facilities;
    let mut good = vec![vec![false; f]; f];
    for a in (0..f).filter(|&a| safe[a] > 0) {
        for b in (0..f).filter(|&b| distancing[b] > 0) {
            let mut os = safe.to_vec();
            let mut od = distancing.to_vec();
            os[a] -= 1;
            od[b] -= 1;
            let mdp = agent_problem(game, [&os, &od]);
            let (_, best, _) = solve_mdp(&mdp);
            let own = evaluate_deterministic(&mdp, &[a, b]);
            good[a][b] = best.iter().zip(&own).all(|(v, w)| v - w <= NASH_TOL);
        }
    }
    good
}

/// Splits the agents into good types matching both occupancies, if possible.
fn feasible_types(safe: &[usize], distancing: &[usize], good: &[Vec<bool>]) -> Option<Vec<Vec<usize>>> {
    let f = safe.len();
    let total: usize = safe.iter().sum();
    let mut g = Graph::<(), u32>::new();
    let source = g.add_node(());
    let sink = g.add_node(());
    let left: Vec<_> = (0..f).map(|_| g.add_node(())).collect();
    let right: Vec<_> = (0..f).map(|_| g.add_node(())).collect();
    for k in 0..f {
        g.add_edge(source, left[k], safe[k] as u32);
        g.add_edge(right[k], sink, distancing[k] as u32);
    }
    let mut pair_edges = Vec::new();
    for a in 0..f {
        for b in 0..f {
            if good[a][b] {
                let e = g.add_edge(left[a], right[b], total as u32);
                pair_edges.push((a, b, e));
            }
        }
    }
    let (flow, flows) = ford_fulkerson(&g, source, sink);
    if flow as usize != total {
        return None;
    }
    let mut types = vec![vec![0usize; f]; f];
    for (a, b, e) in pair_edges {
        types[a][b] = flows[e.index()] as usize;
    }
    Some(types)
}

fn assign(types: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut choices = Vec::new();
    for (a, row) in types.iter().enumerate() {
        for (b, &count) in row.iter().enumerate() {
            choices.extend(std::iter::repeat_n(vec![a, b], count));
        }
    }
    choices
}

/// Every pair of occupancy vectors supported by a deterministic Nash
/// profile, each with one realising assignment. Agents are interchangeable,
/// so any permutation of the returned assignment is also Nash.
pub fn symmetric_nash_search(game: &CongestionGame) -> Result<Vec<SymmetricEquilibrium>> {
    if game.num_states() != 2 {
        return Err(CoreError::InvalidGame("congestion game must have two states".into()));
    }
    let n = game.spec.num_agents;
    let f = game.spec.num_facilities;
    let occs = compositions(n, f);
    let pairs: Vec<(usize, usize)> = (0..occs.len())
        .flat_map(|i| (0..occs.len()).map(move |j| (i, j)))
        .collect();
    let found: Vec<SymmetricEquilibrium> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let (safe, distancing) = (&occs[i], &occs[j]);
            let good = best_response_types(game, safe, distancing);
            let types = feasible_types(safe, distancing, &good)?;
            Some(SymmetricEquilibrium {
                safe: safe.clone(),
                distancing: distancing.clone(),
                choices: assign(&types),
                types,
            })
        })
        .collect();
    Ok(found)
}

/// Occupancy vectors `[safe, distancing]` of a deterministic profile given
/// as `choices[agent][state]`.
pub fn profile_occupancy(choices: &[Vec<usize>], num_facilities: usize) -> [Vec<usize>; 2] {
    let mut occ = [vec![0usize; num_facilities], vec![0usize; num_facilities]];
    for c in choices {
        occ[0][c[0]] += 1;
        occ[1][c[1]] += 1;
    }
    occ
}
