//! Finite n-agent Markov games and exact policy evaluation.
//!
//! A game is stored as dense tables indexed by a mixed-radix joint action
//! index (agent 0 is the most significant digit). Every evaluation routine
//! reduces to the Markov chain induced by a stochastic joint policy and a
//! single LU factorisation of `I - gamma * P_pi`, shared by all agents.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Default upper bound on the number of joint actions for the dense path.
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

/// Tolerance for row sums of probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Mixed-radix encoding of joint action profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionSpace {
    pub fn new(counts: &[usize], cap: usize) -> Result<Self> {
        if counts.is_empty() {
            return Err(CoreError::InvalidGame("at least one agent is required".into()));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(CoreError::InvalidGame("every agent needs at least one action".into()));
        }
        let size = joint_size(counts);
        if size > cap as u128 {
            return Err(CoreError::TooLarge {
                what: "joint action space",
                size,
                cap: cap as u128,
            });
        }
        let mut strides = vec![1usize; counts.len()];
        for k in (0..counts.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Self {
            counts: counts.to_vec(),
            strides,
            size: size as usize,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.counts.len());
        actions
            .iter()
            .zip(&self.strides)
            .map(|(&a, &s)| a * s)
            .sum()
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (k, &s) in self.strides.iter().enumerate() {
            out[k] = index / s;
            index %= s;
        }
    }

    pub fn decode_vec(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        self.decode(index, &mut out);
        out
    }

    /// Digit of `agent` in joint index `index`.
    pub fn action_of(&self, index: usize, agent: usize) -> usize {
        (index / self.strides[agent]) % self.counts[agent]
    }
}

/// Number of joint actions, without overflow.
pub fn joint_size(counts: &[usize]) -> u128 {
    counts
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
}

/// Anything that can be simulated: the sampling path only needs rewards and
/// next-state distributions for individual joint actions.
pub trait MarkovGame: Sync {
    fn num_agents(&self) -> usize;
    fn num_states(&self) -> usize;
    fn action_counts(&self) -> &[usize];
    fn discount(&self) -> f64;
    fn initial_dist(&self) -> &[f64];
    /// Writes every agent's reward for `actions` at `state` into `out`.
    fn rewards_into(&self, state: usize, actions: &[usize], out: &mut [f64]);
    /// Writes the next-state distribution for `actions` at `state` into `out`.
    fn transition_into(&self, state: usize, actions: &[usize], out: &mut [f64]);

    fn max_actions(&self) -> usize {
        self.action_counts().iter().copied().max().unwrap_or(0)
    }

    /// Dense tables, when the game has them.
    fn as_tabular(&self) -> Option<&TabularMarkovGame> {
        None
    }
}

/// Dense tabular game `(S, N, {A_i, R_i}, P, gamma, rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMarkovGame {
    num_states: usize,
    space: JointActionSpace,
    /// `[agent][state][joint]`, flattened.
    rewards: Vec<f64>,
    /// `[state][joint][next]`, flattened.
    transitions: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl TabularMarkovGame {
    /// Builds a game from flat tables. Only shapes are checked here; use
    /// [`validate_game`] for the probabilistic and range invariants.
    pub fn new(
        action_counts: &[usize],
        num_states: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        Self::with_cap(
            action_counts,
            num_states,
            rewards,
            transitions,
            discount,
            initial_dist,
            DEFAULT_ENUMERATION_CAP,
        )
    }

    pub fn with_cap(
        action_counts: &[usize],
        num_states: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
        cap: usize,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(CoreError::InvalidGame("at least one state is required".into()));
        }
        let space = JointActionSpace::new(action_counts, cap)?;
        let n = action_counts.len();
        let j = space.size();
        if rewards.len() != n * num_states * j {
            return Err(CoreError::ShapeMismatch(format!(
                "rewards has {} entries, expected {}",
                rewards.len(),
                n * num_states * j
            )));
        }
        if transitions.len() != num_states * j * num_states {
            return Err(CoreError::ShapeMismatch(format!(
                "transitions has {} entries, expected {}",
                transitions.len(),
                num_states * j * num_states
            )));
        }
        if initial_dist.len() != num_states {
            return Err(CoreError::ShapeMismatch(format!(
                "initial distribution has {} entries, expected {}",
                initial_dist.len(),
                num_states
            )));
        }
        Ok(Self {
            num_states,
            space,
            rewards,
            transitions,
            discount,
            initial_dist,
        })
    }

    /// Builds a game by evaluating `reward(agent, state, actions)` and
    /// `transition(state, actions, out)` on every joint action.
    pub fn from_fn<R, P>(
        action_counts: &[usize],
        num_states: usize,
        discount: f64,
        initial_dist: Vec<f64>,
        mut reward: R,
        mut transition: P,
    ) -> Result<Self>
    where
        R: FnMut(usize, usize, &[usize]) -> f64,
        P: FnMut(usize, &[usize], &mut [f64]),
    {
        let space = JointActionSpace::new(action_counts, DEFAULT_ENUMERATION_CAP)?;
        let n = action_counts.len();
        let j = space.size();
        let mut rewards = vec![0.0; n * num_states * j];
        let mut transitions = vec![0.0; num_states * j * num_states];
        let mut actions = vec![0usize; n];
        for s in 0..num_states {
            for a in 0..j {
                space.decode(a, &mut actions);
                for i in 0..n {
                    rewards[(i * num_states + s) * j + a] = reward(i, s, &actions);
                }
                let row = &mut transitions[(s * j + a) * num_states..(s * j + a + 1) * num_states];
                transition(s, &actions, row);
            }
        }
        Self::new(action_counts, num_states, rewards, transitions, discount, initial_dist)
    }

    pub fn num_agents(&self) -> usize {
        self.space.counts.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.space.counts
    }

    pub fn max_actions(&self) -> usize {
        self.space.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn space(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn num_joint(&self) -> usize {
        self.space.size
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    #[inline]
    pub fn reward(&self, agent: usize, state: usize, joint: usize) -> f64 {
        self.rewards[(agent * self.num_states + state) * self.space.size + joint]
    }

    /// Reward table of one agent at one state, indexed by joint action.
    pub fn reward_row(&self, agent: usize, state: usize) -> &[f64] {
        let j = self.space.size;
        let start = (agent * self.num_states + state) * j;
        &self.rewards[start..start + j]
    }

    #[inline]
    pub fn transition_row(&self, state: usize, joint: usize) -> &[f64] {
        let s = self.num_states;
        let start = (state * self.space.size + joint) * s;
        &self.transitions[start..start + s]
    }

    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions_flat(&self) -> &[f64] {
        &self.transitions
    }

    /// Same dynamics with every agent's rewards replaced by `rewards(state, joint)`.
    /// Used to evaluate potential functions as auxiliary MDP values.
    pub fn with_shared_rewards(&self, state_rewards: &[Vec<f64>]) -> Result<Self> {
        if state_rewards.len() != self.num_states
            || state_rewards.iter().any(|r| r.len() != self.space.size)
        {
            return Err(CoreError::ShapeMismatch(
                "state reward table must be [state][joint]".into(),
            ));
        }
        let n = self.num_agents();
        let mut rewards = Vec::with_capacity(self.rewards.len());
        for _ in 0..n {
            for row in state_rewards {
                rewards.extend_from_slice(row);
            }
        }
        let mut g = self.clone();
        g.rewards = rewards;
        Ok(g)
    }

    /// Same game with one agent's rewards replaced by `table[state][joint]`.
    pub fn with_agent_rewards(&self, agent: usize, table: &[Vec<f64>]) -> Result<Self> {
        if agent >= self.num_agents()
            || table.len() != self.num_states
            || table.iter().any(|r| r.len() != self.space.size)
        {
            return Err(CoreError::ShapeMismatch(
                "agent reward table must be [state][joint]".into(),
            ));
        }
        let mut g = self.clone();
        let j = self.space.size;
        for (s, row) in table.iter().enumerate() {
            let start = (agent * self.num_states + s) * j;
            g.rewards[start..start + j].copy_from_slice(row);
        }
        Ok(g)
    }

    pub fn with_initial_dist(&self, initial_dist: Vec<f64>) -> Result<Self> {
        if initial_dist.len() != self.num_states {
            return Err(CoreError::ShapeMismatch("initial distribution length".into()));
        }
        let mut g = self.clone();
        g.initial_dist = initial_dist;
        Ok(g)
    }

    pub fn with_discount(&self, discount: f64) -> Self {
        let mut g = self.clone();
        g.discount = discount;
        g
    }
}

impl MarkovGame for TabularMarkovGame {
    fn num_agents(&self) -> usize {
        self.space.counts.len()
    }
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn action_counts(&self) -> &[usize] {
        &self.space.counts
    }
    fn discount(&self) -> f64 {
        self.discount
    }
    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    fn rewards_into(&self, state: usize, actions: &[usize], out: &mut [f64]) {
        let a = self.space.encode(actions);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.reward(i, state, a);
        }
    }
    fn transition_into(&self, state: usize, actions: &[usize], out: &mut [f64]) {
        let a = self.space.encode(actions);
        out.copy_from_slice(self.transition_row(state, a));
    }
    fn as_tabular(&self) -> Option<&TabularMarkovGame> {
        Some(self)
    }
}

/// One violated invariant found by [`validate_game`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Discount { value: f64 },
    InitialDist { sum: f64, min: f64 },
    TransitionRow { state: usize, joint: usize, sum: f64, min: f64 },
    RewardRange { agent: usize, state: usize, joint: usize, value: f64 },
    NonFinite { table: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Discount { value } => write!(f, "discount {value} outside [0, 1)"),
            Violation::InitialDist { sum, min } => {
                write!(f, "initial distribution sums to {sum} (min entry {min})")
            }
            Violation::TransitionRow { state, joint, sum, min } => write!(
                f,
                "transition row at state {state}, joint action {joint} sums to {sum} (min entry {min})"
            ),
            Violation::RewardRange { agent, state, joint, value } => write!(
                f,
                "reward {value} of agent {agent} at state {state}, joint action {joint} outside [-1, 1]"
            ),
            Violation::NonFinite { table } => write!(f, "non-finite entry in {table}"),
        }
    }
}

/// Checks every invariant of a game and returns the list of violations.
pub fn validate_game(game: &TabularMarkovGame) -> Vec<Violation> {
    let mut out = Vec::new();
    let g = game.discount();
    if !(0.0..1.0).contains(&g) {
        out.push(Violation::Discount { value: g });
    }
    if let Some(v) = check_distribution(game.initial_dist()) {
        out.push(Violation::InitialDist { sum: v.0, min: v.1 });
    }
    for s in 0..game.num_states() {
        for a in 0..game.num_joint() {
            if let Some((sum, min)) = check_distribution(game.transition_row(s, a)) {
                out.push(Violation::TransitionRow { state: s, joint: a, sum, min });
            }
        }
    }
    for i in 0..game.num_agents() {
        for s in 0..game.num_states() {
            for (a, &r) in game.reward_row(i, s).iter().enumerate() {
                if !r.is_finite() {
                    out.push(Violation::NonFinite { table: "rewards".into() });
                } else if !(-1.0..=1.0).contains(&r) {
                    out.push(Violation::RewardRange { agent: i, state: s, joint: a, value: r });
                }
            }
        }
    }
    out
}

fn check_distribution(p: &[f64]) -> Option<(f64, f64)> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if !sum.is_finite() || (sum - 1.0).abs() > PROB_TOL || min < 0.0 {
        Some((sum, min))
    } else {
        None
    }
}

/// Stochastic joint policy under direct parameterisation, `probs[agent][state][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointPolicy {
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl JointPolicy {
    /// Validated constructor: every `probs[i][s]` must be a probability vector.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let p = Self { probs };
        p.check_stochastic()?;
        Ok(p)
    }

    /// Wraps a raw table without checking row sums. Finite-difference probes
    /// and gradient steps evaluate the value function off the simplex.
    pub fn from_raw(probs: Vec<Vec<Vec<f64>>>) -> Self {
        Self { probs }
    }

    pub fn uniform(action_counts: &[usize], num_states: usize) -> Self {
        let probs = action_counts
            .iter()
            .map(|&k| vec![vec![1.0 / k as f64; k]; num_states])
            .collect();
        Self { probs }
    }

    /// Deterministic policy from `choices[agent][state]`.
    pub fn deterministic(action_counts: &[usize], choices: &[Vec<usize>]) -> Self {
        let probs = action_counts
            .iter()
            .zip(choices)
            .map(|(&k, ch)| {
                ch.iter()
                    .map(|&a| {
                        let mut row = vec![0.0; k];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn num_agents(&self) -> usize {
        self.probs.len()
    }

    pub fn num_states(&self) -> usize {
        self.probs.first().map_or(0, |p| p.len())
    }

    pub fn agent(&self, i: usize) -> &[Vec<f64>] {
        &self.probs[i]
    }

    pub fn prob(&self, agent: usize, state: usize, action: usize) -> f64 {
        self.probs[agent][state][action]
    }

    /// Replaces agent `i`'s component.
    pub fn with_agent(&self, i: usize, component: Vec<Vec<f64>>) -> Self {
        let mut p = self.clone();
        p.probs[i] = component;
        p
    }

    pub fn check_stochastic(&self) -> Result<()> {
        for (i, agent) in self.probs.iter().enumerate() {
            for (s, row) in agent.iter().enumerate() {
                if row.is_empty() {
                    return Err(CoreError::InvalidPolicy(format!(
                        "agent {i} state {s}: empty action distribution"
                    )));
                }
                if let Some((sum, min)) = check_distribution(row) {
                    return Err(CoreError::InvalidPolicy(format!(
                        "agent {i} state {s}: sums to {sum}, min entry {min}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_shape(&self, action_counts: &[usize], num_states: usize) -> Result<()> {
        if self.probs.len() != action_counts.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "policy has {} agents, game has {}",
                self.probs.len(),
                action_counts.len()
            )));
        }
        for (i, (agent, &k)) in self.probs.iter().zip(action_counts).enumerate() {
            if agent.len() != num_states {
                return Err(CoreError::ShapeMismatch(format!(
                    "agent {i}: policy has {} states, game has {num_states}",
                    agent.len()
                )));
            }
            if agent.iter().any(|row| row.len() != k) {
                return Err(CoreError::ShapeMismatch(format!(
                    "agent {i}: expected {k} actions per state"
                )));
            }
        }
        Ok(())
    }

    /// True when every agent puts probability one on a single action everywhere.
    pub fn is_deterministic(&self, tol: f64) -> bool {
        self.probs
            .iter()
            .flatten()
            .all(|row| row.iter().any(|&p| (p - 1.0).abs() <= tol))
    }

    /// Largest entrywise distance to the nearest deterministic policy
    /// (rounding every row to its argmax).
    pub fn distance_to_deterministic(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in self.probs.iter().flatten() {
            let best = argmax(row);
            for (a, &p) in row.iter().enumerate() {
                let target = if a == best { 1.0 } else { 0.0 };
                worst = worst.max((p - target).abs());
            }
        }
        worst
    }

    /// Argmax action of every agent at every state, ties to the lowest index.
    pub fn argmax_actions(&self) -> Vec<Vec<usize>> {
        self.probs
            .iter()
            .map(|agent| agent.iter().map(|row| argmax(row)).collect())
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.probs.iter().flatten().flatten().copied().collect()
    }
}

/// Uniformly random point of the `k`-simplex (flat Dirichlet).
pub fn random_simplex_point(k: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    use rand_distr::{Distribution, Exp1};
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random policy component `[state][action]`: with probability
/// `deterministic_prob` a random vertex at every state, otherwise a flat
/// Dirichlet draw per state.
pub fn random_component(
    k: usize,
    num_states: usize,
    deterministic_prob: f64,
    rng: &mut impl rand::Rng,
) -> Vec<Vec<f64>> {
    let vertex = rng.random::<f64>() < deterministic_prob;
    (0..num_states)
        .map(|_| {
            if vertex {
                let mut row = vec![0.0; k];
                row[rng.random_range(0..k)] = 1.0;
                row
            } else {
                random_simplex_point(k, rng)
            }
        })
        .collect()
}

/// Random joint policy with independent components drawn by [`random_component`].
pub fn random_policy(
    action_counts: &[usize],
    num_states: usize,
    deterministic_prob: f64,
    rng: &mut impl rand::Rng,
) -> JointPolicy {
    JointPolicy::from_raw(
        action_counts
            .iter()
            .map(|&k| random_component(k, num_states, deterministic_prob, rng))
            .collect(),
    )
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = a;
        }
    }
    best
}

/// Calls `f(offset, weight)` for every element of the cartesian product of
/// `lists`, where each list holds `(offset contribution, weight)` pairs.
pub(crate) fn for_each_product(lists: &[Vec<(usize, f64)>], mut f: impl FnMut(usize, f64)) {
    let depth = lists.len();
    if depth == 0 {
        f(0, 1.0);
        return;
    }
    if lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; depth];
    let mut off = vec![0usize; depth + 1];
    let mut w = vec![1.0f64; depth + 1];
    for k in 0..depth {
        let (o, x) = lists[k][0];
        off[k + 1] = off[k] + o;
        w[k + 1] = w[k] * x;
    }
    loop {
        f(off[depth], w[depth]);
        let mut k = depth;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
        for j in k..depth {
            let (o, x) = lists[j][idx[j]];
            off[j + 1] = off[j] + o;
            w[j + 1] = w[j] * x;
        }
    }
}

/// Support of agent `agent` at `state` as `(offset, prob)` pairs.
pub(crate) fn support(
    space: &JointActionSpace,
    policy: &JointPolicy,
    agent: usize,
    state: usize,
) -> Vec<(usize, f64)> {
    let stride = space.strides()[agent];
    policy.probs[agent][state]
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(a, &x)| (a * stride, x))
        .collect()
}

fn check_policy(game: &TabularMarkovGame, policy: &JointPolicy) -> Result<()> {
    policy.check_shape(game.action_counts(), game.num_states())
}

/// Markov chain and expected rewards induced by a joint policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedChain {
    /// `transition[s][s']`.
    pub transition: Vec<Vec<f64>>,
    /// `rewards[agent][state]`.
    pub rewards: Vec<Vec<f64>>,
}

/// Marginalises `P` and `R` over the product policy.
pub fn induced_chain(game: &TabularMarkovGame, policy: &JointPolicy) -> Result<InducedChain> {
    check_policy(game, policy)?;
    let n = game.num_agents();
    let ns = game.num_states();
    let mut transition = vec![vec![0.0; ns]; ns];
    let mut rewards = vec![vec![0.0; ns]; n];
    for s in 0..ns {
        let lists: Vec<_> = (0..n).map(|i| support(game.space(), policy, i, s)).collect();
        let row = &mut transition[s];
        let mut r = vec![0.0; n];
        for_each_product(&lists, |a, w| {
            for (acc, &p) in row.iter_mut().zip(game.transition_row(s, a)) {
                *acc += w * p;
            }
            for (i, ri) in r.iter_mut().enumerate() {
                *ri += w * game.reward(i, s, a);
            }
        });
        for i in 0..n {
            rewards[i][s] = r[i];
        }
    }
    Ok(InducedChain { transition, rewards })
}

/// LU factorisation of `I - gamma * P_pi` together with the chain it came from.
pub struct ChainSolver {
    pub chain: InducedChain,
    gamma: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl ChainSolver {
    pub fn new(game: &TabularMarkovGame, policy: &JointPolicy) -> Result<Self> {
        let chain = induced_chain(game, policy)?;
        Ok(Self::from_chain(chain, game.discount()))
    }

    pub fn from_chain(chain: InducedChain, gamma: f64) -> Self {
        let ns = chain.transition.len();
        let m = DMatrix::from_fn(ns, ns, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - gamma * chain.transition[r][c]
        });
        Self {
            chain,
            gamma,
            lu: m.lu(),
        }
    }

    /// Solves `(I - gamma P_pi) v = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        // The matrix is strictly diagonally dominant for gamma < 1.
        let x = self.lu.solve(&b).expect("I - gamma P is nonsingular for gamma < 1");
        x.iter().copied().collect()
    }

    /// `V[agent][state]`.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.chain.rewards.iter().map(|r| self.solve(r)).collect()
    }

    /// Discounted state visitation `(1 - gamma) mu^T (I - gamma P_pi)^{-1}`.
    pub fn occupancy(&self, start: &[f64]) -> Vec<f64> {
        let ns = self.chain.transition.len();
        let mt = DMatrix::from_fn(ns, ns, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - self.gamma * self.chain.transition[c][r]
        });
        let b = DVector::from_column_slice(start);
        let y = mt
            .lu()
            .solve(&b)
            .expect("I - gamma P is nonsingular for gamma < 1");
        y.iter().map(|v| (1.0 - self.gamma) * v).collect()
    }
}

/// Per-agent state values `V[agent][state]`.
pub fn state_values(game: &TabularMarkovGame, policy: &JointPolicy) -> Result<Vec<Vec<f64>>> {
    Ok(ChainSolver::new(game, policy)?.values())
}

/// `V^i_mu = sum_s mu(s) V^i(s)` for every agent.
pub fn start_values(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<Vec<f64>> {
    let v = state_values(game, policy)?;
    Ok(v.iter().map(|vi| dot(vi, start)).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact evaluation of a joint policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    /// `V[agent][state]`.
    pub values: Vec<Vec<f64>>,
    /// `Q[agent][state][joint]`.
    pub q_values: Vec<Vec<Vec<f64>>>,
    /// `A[agent][state][joint] = Q - V`.
    pub advantages: Vec<Vec<Vec<f64>>>,
    /// Discounted visitation from the start distribution.
    pub occupancy: Vec<f64>,
    /// `V^i_mu` for the start distribution.
    pub start_values: Vec<f64>,
}

fn check_start(game: &TabularMarkovGame, start: &[f64]) -> Result<()> {
    if start.len() != game.num_states() {
        return Err(CoreError::ShapeMismatch(format!(
            "start distribution has {} entries, game has {} states",
            start.len(),
            game.num_states()
        )));
    }
    if let Some((sum, min)) = check_distribution(start) {
        return Err(CoreError::InvalidArgument(format!(
            "start distribution sums to {sum} (min entry {min})"
        )));
    }
    Ok(())
}

/// Values, Q-values, advantages and occupancy of `policy` from `start`.
pub fn value_exact(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<EvaluationReport> {
    check_start(game, start)?;
    let solver = ChainSolver::new(game, policy)?;
    let values = solver.values();
    let occupancy = solver.occupancy(start);
    let gamma = game.discount();
    let ns = game.num_states();
    let nj = game.num_joint();
    let mut q_values = Vec::with_capacity(game.num_agents());
    let mut advantages = Vec::with_capacity(game.num_agents());
    for (i, vi) in values.iter().enumerate() {
        let mut qi = Vec::with_capacity(ns);
        let mut ai = Vec::with_capacity(ns);
        for s in 0..ns {
            let rewards = game.reward_row(i, s);
            let q: Vec<f64> = (0..nj)
                .map(|a| rewards[a] + gamma * dot(game.transition_row(s, a), vi))
                .collect();
            ai.push(q.iter().map(|&x| x - vi[s]).collect());
            qi.push(q);
        }
        q_values.push(qi);
        advantages.push(ai);
    }
    let start_values = values.iter().map(|vi| dot(vi, start)).collect();
    Ok(EvaluationReport {
        values,
        q_values,
        advantages,
        occupancy,
        start_values,
    })
}

/// Discounted state visitation distribution `d^pi_mu`.
pub fn occupancy(game: &TabularMarkovGame, policy: &JointPolicy, start: &[f64]) -> Result<Vec<f64>> {
    check_start(game, start)?;
    Ok(ChainSolver::new(game, policy)?.occupancy(start))
}

/// Single-agent MDP faced by one agent when all others are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMdp {
    pub agent: usize,
    pub gamma: f64,
    /// `rewards[state][action]`.
    pub rewards: Vec<Vec<f64>>,
    /// `transitions[state][action][next]`.
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl AgentMdp {
    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rewards.first().map_or(0, |r| r.len())
    }

    /// `r(s, a) + gamma * sum_s' P(s'|s, a) v(s')`.
    pub fn q_from_values(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.rewards
            .iter()
            .zip(&self.transitions)
            .map(|(rs, ps)| {
                rs.iter()
                    .zip(ps)
                    .map(|(r, p)| r + self.gamma * dot(p, values))
                    .collect()
            })
            .collect()
    }
}

/// Marginalises out every agent except `agent`.
pub fn agent_mdp(game: &TabularMarkovGame, policy: &JointPolicy, agent: usize) -> Result<AgentMdp> {
    check_policy(game, policy)?;
    if agent >= game.num_agents() {
        return Err(CoreError::InvalidArgument(format!("no agent {agent}")));
    }
    let n = game.num_agents();
    let ns = game.num_states();
    let k = game.action_counts()[agent];
    let stride = game.space().strides()[agent];
    let mut rewards = vec![vec![0.0; k]; ns];
    let mut transitions = vec![vec![vec![0.0; ns]; k]; ns];
    for s in 0..ns {
        let lists: Vec<_> = (0..n)
            .filter(|&j| j != agent)
            .map(|j| support(game.space(), policy, j, s))
            .collect();
        let reward_row = game.reward_row(agent, s);
        for a in 0..k {
            let base = a * stride;
            let r = &mut rewards[s][a];
            let p = &mut transitions[s][a];
            for_each_product(&lists, |off, w| {
                let joint = base + off;
                *r += w * reward_row[joint];
                for (acc, &q) in p.iter_mut().zip(game.transition_row(s, joint)) {
                    *acc += w * q;
                }
            });
        }
    }
    Ok(AgentMdp {
        agent,
        gamma: game.discount(),
        rewards,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_game() -> TabularMarkovGame {
        // 2 agents x 2 actions, 2 states; move to state (a0 xor a1).
        TabularMarkovGame::from_fn(
            &[2, 2],
            2,
            0.9,
            vec![0.5, 0.5],
            |i, s, a| if i == 0 { 0.5 * s as f64 } else { 0.25 * (a[0] + a[1]) as f64 },
            |_, a, out| {
                out.fill(0.0);
                out[a[0] ^ a[1]] = 1.0;
            },
        )
        .unwrap()
    }

    #[test]
    fn mixed_radix_agent_zero_is_most_significant() {
        let sp = JointActionSpace::new(&[2, 3, 4], 1000).unwrap();
        assert_eq!(sp.size(), 24);
        assert_eq!(sp.encode(&[1, 0, 0]), 12);
        assert_eq!(sp.encode(&[0, 1, 0]), 4);
        assert_eq!(sp.encode(&[1, 2, 3]), 23);
        assert_eq!(sp.decode_vec(23), vec![1, 2, 3]);
        assert_eq!(sp.action_of(23, 1), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let err = JointActionSpace::new(&[4; 11], DEFAULT_ENUMERATION_CAP).unwrap_err();
        assert!(matches!(err, CoreError::TooLarge { .. }));
        assert!(JointActionSpace::new(&[4; 10], DEFAULT_ENUMERATION_CAP).is_ok());
    }

    #[test]
    fn valid_game_has_empty_report() {
        assert!(validate_game(&two_state_game()).is_empty());
    }

    #[test]
    fn bad_transition_row_is_reported() {
        let g = two_state_game();
        let mut t = g.transitions_flat().to_vec();
        // state 1, joint 3 -> [0.9, 0]
        let j = 3;
        let start = (g.num_joint() + j) * 2;
        t[start] = 0.9;
        t[start + 1] = 0.0;
        let bad = TabularMarkovGame::new(
            g.action_counts(),
            2,
            g.rewards_flat().to_vec(),
            t,
            0.9,
            vec![0.5, 0.5],
        )
        .unwrap();
        let report = validate_game(&bad);
        assert_eq!(report.len(), 1);
        match &report[0] {
            Violation::TransitionRow { state, joint, sum, .. } => {
                assert_eq!((*state, *joint), (1, 3));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn reward_out_of_range_is_reported() {
        let g = two_state_game();
        let mut r = g.rewards_flat().to_vec();
        r[5] = 1.5;
        let bad = TabularMarkovGame::new(
            g.action_counts(),
            2,
            r,
            g.transitions_flat().to_vec(),
            0.9,
            vec![0.5, 0.5],
        )
        .unwrap();
        let report = validate_game(&bad);
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], Violation::RewardRange { value, .. } if value == 1.5));
    }

    #[test]
    fn deterministic_policy_selects_transition_rows() {
        let g = two_state_game();
        let pol = JointPolicy::deterministic(&[2, 2], &[vec![1, 0], vec![0, 0]]);
        let chain = induced_chain(&g, &pol).unwrap();
        // state 0: joint (1, 0) -> next 1
        assert_eq!(chain.transition[0], g.transition_row(0, g.space().encode(&[1, 0])));
        assert_eq!(chain.transition[1], g.transition_row(1, 0));
    }

    #[test]
    fn zero_reward_game_has_zero_values() {
        let g = TabularMarkovGame::from_fn(
            &[2, 3],
            3,
            0.95,
            vec![1.0, 0.0, 0.0],
            |_, _, _| 0.0,
            |s, a, out| {
                out.fill(0.0);
                out[(s + a[0] + a[1]) % 3] = 1.0;
            },
        )
        .unwrap();
        let pol = JointPolicy::uniform(&[2, 3], 3);
        let rep = value_exact(&g, &pol, &[1.0, 0.0, 0.0]).unwrap();
        assert!(rep.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn absorbing_single_state_occupancy_is_point_mass() {
        let g = TabularMarkovGame::from_fn(&[2], 1, 0.7, vec![1.0], |_, _, _| 0.3, |_, _, o| o[0] = 1.0)
            .unwrap();
        let d = occupancy(&g, &JointPolicy::uniform(&[2], 1), &[1.0]).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bellman_identity_holds() {
        let g = two_state_game();
        let pol = JointPolicy::new(vec![
            vec![vec![0.3, 0.7], vec![0.6, 0.4]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        ])
        .unwrap();
        let chain = induced_chain(&g, &pol).unwrap();
        let v = state_values(&g, &pol).unwrap();
        for i in 0..2 {
            for s in 0..2 {
                let rhs = chain.rewards[i][s] + 0.9 * dot(&chain.transition[s], &v[i]);
                assert!((v[i][s] - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agent_mdp_matches_joint_marginals() {
        let g = two_state_game();
        let pol = JointPolicy::new(vec![
            vec![vec![0.3, 0.7], vec![0.6, 0.4]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        ])
        .unwrap();
        let m = agent_mdp(&g, &pol, 1).unwrap();
        // Re-mixing agent 1's own policy must reproduce the induced chain.
        let chain = induced_chain(&g, &pol).unwrap();
        for s in 0..2 {
            let r: f64 = (0..2).map(|a| pol.probs[1][s][a] * m.rewards[s][a]).sum();
            assert!((r - chain.rewards[1][s]).abs() < 1e-14);
            for t in 0..2 {
                let p: f64 = (0..2).map(|a| pol.probs[1][s][a] * m.transitions[s][a][t]).sum();
                assert!((p - chain.transition[s][t]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn product_iterator_visits_everything_once() {
        let lists = vec![vec![(0, 0.5), (10, 0.5)], vec![(0, 0.2), (1, 0.3), (2, 0.5)]];
        let mut seen = Vec::new();
        let mut total = 0.0;
        for_each_product(&lists, |o, w| {
            seen.push(o);
            total += w;
        });
        assert_eq!(seen, vec![0, 1, 2, 10, 11, 12]);
        assert!((total - 1.0).abs() < 1e-15);
    }
}
