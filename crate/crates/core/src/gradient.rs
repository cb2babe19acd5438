//! Policy gradients under direct parameterisation: exact, finite-difference
//! and sampled (REINFORCE with a geometric or fixed horizon).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::{agent_mdp, dot, ChainSolver, JointPolicy, MarkovGame, TabularMarkovGame};
use crate::geometry::alpha_greedy_unchecked;

/// Per-agent gradient tables `g[agent][state][action]`.
pub type PolicyGradient = Vec<Vec<Vec<f64>>>;

/// `dV^i_mu / dx_{i,s,a}` for one agent, as a `[state][action]` table.
pub fn exact_gradient(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    agent: usize,
    start: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let solver = ChainSolver::new(game, policy)?;
    gradient_block(game, policy, &solver, agent, start)
}

fn gradient_block(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    solver: &ChainSolver,
    agent: usize,
    start: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if start.len() != game.num_states() {
        return Err(CoreError::ShapeMismatch("start distribution length".into()));
    }
    let values = solver.solve(&solver.chain.rewards[agent]);
    let occ = solver.occupancy(start);
    let mdp = agent_mdp(game, policy, agent)?;
    let q = mdp.q_from_values(&values);
    let scale = 1.0 / (1.0 - game.discount());
    Ok(q
        .iter()
        .zip(&occ)
        .map(|(row, &d)| row.iter().map(|&qa| d * qa * scale).collect())
        .collect())
}

/// Exact gradients of every agent's own value, sharing one factorisation.
pub fn exact_gradient_all(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<PolicyGradient> {
    let solver = ChainSolver::new(game, policy)?;
    (0..game.num_agents())
        .into_par_iter()
        .map(|i| gradient_block(game, policy, &solver, i, start))
        .collect()
}

/// Exact gradients of every agent together with the state values
/// `V[agent][state]` they were computed from.
pub fn exact_gradient_with_values(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<(PolicyGradient, Vec<Vec<f64>>)> {
    let solver = ChainSolver::new(game, policy)?;
    let grads = (0..game.num_agents())
        .into_par_iter()
        .map(|i| gradient_block(game, policy, &solver, i, start))
        .collect::<Result<_>>()?;
    Ok((grads, solver.values()))
}

/// Gradient of the value of an auxiliary game where every agent receives
/// the same reward; returns the full `[agent][state][action]` gradient of
/// that common value (e.g. the potential).
pub fn common_value_gradient(
    shared: &TabularMarkovGame,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<PolicyGradient> {
    exact_gradient_all(shared, policy, start)
}

/// Central finite differences of `V^agent_mu` in agent `agent`'s coordinates.
/// Coordinates are perturbed off the simplex, matching the partial
/// derivatives returned by [`exact_gradient`].
pub fn finite_difference_gradient(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    agent: usize,
    start: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    finite_difference_of(game, policy, agent, h, |g, p| {
        let solver = ChainSolver::new(g, p)?;
        Ok(dot(&solver.solve(&solver.chain.rewards[agent]), start))
    })
}

/// Central finite differences of an arbitrary policy functional `f` in the
/// coordinates of `agent`.
pub fn finite_difference_of<F>(
    game: &TabularMarkovGame,
    policy: &JointPolicy,
    agent: usize,
    h: f64,
    f: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&TabularMarkovGame, &JointPolicy) -> Result<f64>,
{
    policy.check_shape(game.action_counts(), game.num_states())?;
    let ns = game.num_states();
    let k = game.action_counts()[agent];
    let mut out = vec![vec![0.0; k]; ns];
    let mut probe = policy.clone();
    for s in 0..ns {
        for a in 0..k {
            let x = policy.probs[agent][s][a];
            probe.probs[agent][s][a] = x + h;
            let up = f(game, &probe)?;
            probe.probs[agent][s][a] = x - h;
            let down = f(game, &probe)?;
            probe.probs[agent][s][a] = x;
            out[s][a] = (up - down) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `max |g - fd| / max |fd|` (plain max-abs error when `fd` vanishes).
pub fn normwise_relative_error(g: &[Vec<f64>], fd: &[Vec<f64>]) -> f64 {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (gr, fr) in g.iter().zip(fd) {
        for (x, y) in gr.iter().zip(fr) {
            err = err.max((x - y).abs());
            scale = scale.max(y.abs());
        }
    }
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// One sampled trajectory. `states`, `actions` and `rewards` all have
/// `horizon + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub states: Vec<usize>,
    pub actions: Vec<Vec<usize>>,
    /// `rewards[t][agent]`.
    pub rewards: Vec<Vec<f64>>,
    pub horizon: usize,
}

/// How many steps a sampled trajectory runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HorizonMode {
    /// `T ~ Geometric(1 - gamma)` post-initial steps, undiscounted reward sum.
    Geometric,
    /// Exactly `length` steps with discounted returns-to-go.
    Episodic { length: usize },
}

/// Index drawn from the distribution `probs` by inverse CDF.
fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the total slightly below one; take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Simulates `steps + 1` decisions starting from `s_0 ~ rho`.
fn rollout<G: MarkovGame + ?Sized>(
    game: &G,
    policy: &JointPolicy,
    steps: usize,
    rng: &mut impl Rng,
) -> TrajectorySample {
    let n = game.num_agents();
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps + 1);
    let mut rewards = Vec::with_capacity(steps + 1);
    let mut next = vec![0.0; game.num_states()];
    let mut s = sample_index(game.initial_dist(), rng);
    for t in 0..=steps {
        let a: Vec<usize> = (0..n).map(|i| sample_index(&policy.probs[i][s], rng)).collect();
        let mut r = vec![0.0; n];
        game.rewards_into(s, &a, &mut r);
        states.push(s);
        if t < steps {
            game.transition_into(s, &a, &mut next);
            s = sample_index(&next, rng);
        }
        actions.push(a);
        rewards.push(r);
    }
    TrajectorySample {
        states,
        actions,
        rewards,
        horizon: steps,
    }
}

/// Samples one trajectory with a geometric horizon `T ~ Geometric(1 - gamma)`
/// counting post-initial steps, so `gamma = 0` gives a one-step sample.
pub fn sample_trajectory<G: MarkovGame + ?Sized>(
    game: &G,
    policy: &JointPolicy,
    rng: &mut impl Rng,
) -> TrajectorySample {
    let steps = sample_horizon(game.discount(), rng);
    rollout(game, policy, steps, rng)
}

/// Samples `length` decisions (`length >= 1`).
pub fn sample_episode<G: MarkovGame + ?Sized>(
    game: &G,
    policy: &JointPolicy,
    length: usize,
    rng: &mut impl Rng,
) -> TrajectorySample {
    rollout(game, policy, length.saturating_sub(1), rng)
}

fn sample_horizon(gamma: f64, rng: &mut impl Rng) -> usize {
    if gamma <= 0.0 {
        return 0;
    }
    let geo = Geometric::new(1.0 - gamma).expect("1 - gamma lies in (0, 1]");
    geo.sample(rng) as usize
}

/// Averaged REINFORCE estimate for every agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientEstimate {
    /// Batch mean `g[agent][state][action]`.
    pub gradients: PolicyGradient,
    /// Standard error of each coordinate's batch mean.
    pub std_errors: PolicyGradient,
    pub sample_count: usize,
    /// Per-agent empirical `E ||g_i||^2` over the batch.
    pub second_moment: Vec<f64>,
}

/// Per-trajectory estimate with respect to the underlying parameters `x`
/// of `pi = (1 - alpha) x + alpha / A_i`, where `pi` is `played`.
pub fn trajectory_estimate(
    traj: &TrajectorySample,
    played: &JointPolicy,
    alpha: f64,
    mode: HorizonMode,
    gamma: f64,
) -> PolicyGradient {
    let n = played.num_agents();
    let mut g: PolicyGradient = played
        .probs
        .iter()
        .map(|agent| agent.iter().map(|row| vec![0.0; row.len()]).collect())
        .collect();
    let chain = 1.0 - alpha;
    match mode {
        HorizonMode::Geometric => {
            for i in 0..n {
                let total: f64 = traj.rewards.iter().map(|r| r[i]).sum();
                if total == 0.0 {
                    continue;
                }
                for (s, a) in traj.states.iter().zip(&traj.actions) {
                    let p = played.probs[i][*s][a[i]];
                    g[i][*s][a[i]] += total * chain / p;
                }
            }
        }
        HorizonMode::Episodic { .. } => {
            let len = traj.states.len();
            for i in 0..n {
                // Discounted returns-to-go G_k, accumulated backwards.
                let mut ret = vec![0.0; len];
                let mut acc = 0.0;
                for k in (0..len).rev() {
                    acc = traj.rewards[k][i] + gamma * acc;
                    ret[k] = acc;
                }
                let mut disc = 1.0;
                for k in 0..len {
                    let s = traj.states[k];
                    let a = traj.actions[k][i];
                    let p = played.probs[i][s][a];
                    g[i][s][a] += disc * ret[k] * chain / p;
                    disc *= gamma;
                }
            }
        }
    }
    g
}

/// Deterministic RNG for trajectory `index` of iteration `iteration`.
///
/// Every trajectory owns the ChaCha stream `(iteration << 32) | index`
/// under the master seed, so results do not depend on thread scheduling.
pub fn trajectory_rng(seed: u64, iteration: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 32) | (index & 0xffff_ffff));
    rng
}

/// Batch REINFORCE estimate for every agent at parameters `params`.
///
/// Trajectories are sampled under `alpha_greedy(params, alpha)` in
/// parallel and averaged in index order.
pub fn reinforce_estimate<G: MarkovGame + ?Sized>(
    game: &G,
    params: &JointPolicy,
    alpha: f64,
    batch: usize,
    mode: HorizonMode,
    seed: u64,
    iteration: u64,
) -> Result<GradientEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "alpha must lie in (0, 1] for the sampled estimator, got {alpha}"
        )));
    }
    if batch == 0 {
        return Err(CoreError::InvalidArgument("batch must be at least 1".into()));
    }
    if let HorizonMode::Episodic { length: 0 } = mode {
        return Err(CoreError::InvalidArgument("episode length must be at least 1".into()));
    }
    params.check_shape(game.action_counts(), game.num_states())?;
    let played = alpha_greedy_unchecked(params, alpha);
    let gamma = game.discount();
    let per_traj: Vec<PolicyGradient> = (0..batch as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(seed, iteration, k);
            let traj = match mode {
                HorizonMode::Geometric => sample_trajectory(game, &played, &mut rng),
                HorizonMode::Episodic { length } => sample_episode(game, &played, length, &mut rng),
            };
            trajectory_estimate(&traj, &played, alpha, mode, gamma)
        })
        .collect();
    Ok(aggregate(&per_traj))
}

/// Mean, standard errors and second moments of per-trajectory estimates,
/// reduced in slice order.
pub fn aggregate(samples: &[PolicyGradient]) -> GradientEstimate {
    let m = samples.len();
    let first = &samples[0];
    let zeros = || -> PolicyGradient {
        first
            .iter()
            .map(|a| a.iter().map(|r| vec![0.0; r.len()]).collect())
            .collect()
    };
    let mut sum = zeros();
    let mut sumsq = zeros();
    let mut second = vec![0.0; first.len()];
    for g in samples {
        for (i, agent) in g.iter().enumerate() {
            let mut norm2 = 0.0;
            for (s, row) in agent.iter().enumerate() {
                for (a, &x) in row.iter().enumerate() {
                    sum[i][s][a] += x;
                    sumsq[i][s][a] += x * x;
                    norm2 += x * x;
                }
            }
            second[i] += norm2;
        }
    }
    let mf = m as f64;
    let mut se = zeros();
    for i in 0..sum.len() {
        for s in 0..sum[i].len() {
            for a in 0..sum[i][s].len() {
                let mean = sum[i][s][a] / mf;
                let var = if m > 1 {
                    ((sumsq[i][s][a] - mf * mean * mean) / (mf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                sum[i][s][a] = mean;
                se[i][s][a] = (var / mf).sqrt();
            }
        }
    }
    GradientEstimate {
        gradients: sum,
        std_errors: se,
        sample_count: m,
        second_moment: second.into_iter().map(|x| x / mf).collect(),
    }
}

/// Removes the mean of every `(agent, state)` block.
///
/// Two smooth extensions of the value that agree on the product of simplices
/// have gradients differing only by a constant per block, and simplex
/// projection ignores such constants. The sampled estimator and the exact
/// gradient are therefore compared on these centred components.
pub fn center_blocks(g: &[Vec<Vec<f64>>]) -> PolicyGradient {
    g.iter()
        .map(|agent| {
            agent
                .iter()
                .map(|row| {
                    let m = row.iter().sum::<f64>() / row.len() as f64;
                    row.iter().map(|x| x - m).collect()
                })
                .collect()
        })
        .collect()
}

/// The bound `24 A_max^2 / (alpha (1 - gamma)^4)` on `E ||g_i||^2`.
pub fn second_moment_bound(max_actions: usize, alpha: f64, gamma: f64) -> f64 {
    let a = max_actions as f64;
    24.0 * a * a / (alpha * (1.0 - gamma).powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit(rewards: [f64; 2], gamma: f64) -> TabularMarkovGame {
        TabularMarkovGame::from_fn(&[2], 1, gamma, vec![1.0], |_, _, a| rewards[a[0]], |_, _, o| o[0] = 1.0)
            .unwrap()
    }

    fn random_game(seed: u64) -> TabularMarkovGame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ns = 3;
        TabularMarkovGame::from_fn(
            &[2, 3],
            ns,
            0.8,
            vec![0.2, 0.5, 0.3],
            |_, _, _| rng.random_range(-1.0..1.0),
            |_, _, out| {
                let raw: Vec<f64> = (0..out.len()).map(|_| rand::random::<f64>() + 0.05).collect();
                let t: f64 = raw.iter().sum();
                for (o, r) in out.iter_mut().zip(raw) {
                    *o = r / t;
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn bandit_gradient_is_reward_vector() {
        let g = bandit([1.0, 0.0], 0.0);
        let pol = JointPolicy::new(vec![vec![vec![0.4, 0.6]]]).unwrap();
        let grad = exact_gradient(&g, &pol, 0, &[1.0]).unwrap();
        assert_eq!(grad, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn zero_reward_gives_zero_gradient() {
        let g = bandit([0.0, 0.0], 0.9);
        let pol = JointPolicy::uniform(&[2], 1);
        let grad = exact_gradient(&g, &pol, 0, &[1.0]).unwrap();
        assert!(grad.iter().flatten().all(|&x| x == 0.0));
        let est = reinforce_estimate(&g, &pol, 0.3, 64, HorizonMode::Geometric, 1, 0).unwrap();
        assert!(est.gradients.iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_matches_finite_differences() {
        let g = random_game(3);
        let pol = JointPolicy::new(vec![
            vec![vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1]],
            vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![0.1, 0.1, 0.8]],
        ])
        .unwrap();
        let mu = [0.2, 0.5, 0.3];
        for i in 0..2 {
            let ex = exact_gradient(&g, &pol, i, &mu).unwrap();
            let fd = finite_difference_gradient(&g, &pol, i, &mu, 1e-5).unwrap();
            assert!(normwise_relative_error(&ex, &fd) < 1e-7);
        }
    }

    #[test]
    fn zero_discount_trajectories_have_one_step() {
        let g = bandit([1.0, 0.0], 0.0);
        let pol = JointPolicy::uniform(&[2], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let t = sample_trajectory(&g, &pol, &mut rng);
            assert_eq!(t.horizon, 0);
            assert_eq!(t.states.len(), 1);
            assert_eq!(t.actions.len(), 1);
        }
    }

    #[test]
    fn deterministic_orbit() {
        // Two states, deterministic flip.
        let g = TabularMarkovGame::from_fn(
            &[1],
            2,
            0.9,
            vec![1.0, 0.0],
            |_, _, _| 0.0,
            |s, _, o| {
                o.fill(0.0);
                o[1 - s] = 1.0;
            },
        )
        .unwrap();
        let pol = JointPolicy::uniform(&[1], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let t = sample_trajectory(&g, &pol, &mut rng);
            for (k, &s) in t.states.iter().enumerate() {
                assert_eq!(s, k % 2);
            }
        }
    }

    #[test]
    fn geometric_horizon_mean() {
        let g = bandit([0.0, 0.0], 0.5);
        let pol = JointPolicy::uniform(&[2], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 100_000;
        let xs: Vec<f64> = (0..m)
            .map(|_| sample_trajectory(&g, &pol, &mut rng).horizon as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        // Geometric(1/2) counting failures: mean 1, variance 2.
        let se = (2.0f64 / m as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn estimates_are_reproducible() {
        let g = random_game(5);
        let pol = JointPolicy::uniform(&[2, 3], 3);
        let a = reinforce_estimate(&g, &pol, 0.2, 200, HorizonMode::Geometric, 42, 7).unwrap();
        let b = reinforce_estimate(&g, &pol, 0.2, 200, HorizonMode::Geometric, 42, 7).unwrap();
        assert_eq!(a, b);
        let c = reinforce_estimate(&g, &pol, 0.2, 200, HorizonMode::Geometric, 42, 8).unwrap();
        assert_ne!(a.gradients, c.gradients);
    }

    #[test]
    fn alpha_zero_rejected() {
        let g = bandit([1.0, 0.0], 0.5);
        let pol = JointPolicy::uniform(&[2], 1);
        assert!(reinforce_estimate(&g, &pol, 0.0, 10, HorizonMode::Geometric, 0, 0).is_err());
    }

    #[test]
    fn episodic_estimator_on_bandit_sequence() {
        // Single state, gamma 0.5, horizon 3: the truncated value is
        // (1 + g + g^2) pi_0 with pi_0 = 0.5 x_0 + 0.25, so the centred
        // gradient is +-(1.75 * 0.5) / 2.
        let g = bandit([1.0, 0.0], 0.5);
        let pol = JointPolicy::new(vec![vec![vec![0.5, 0.5]]]).unwrap();
        let est = reinforce_estimate(&g, &pol, 0.5, 200_000, HorizonMode::Episodic { length: 3 }, 3, 0)
            .unwrap();
        let centred = center_blocks(&est.gradients)[0][0][0];
        // Standard error of the centred coordinate is at most that of the raw one.
        let se = est.std_errors[0][0][0] + est.std_errors[0][0][1];
        assert!((centred - 0.4375).abs() < 4.0 * se, "centred {centred}");
    }
}
