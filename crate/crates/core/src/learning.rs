//! Independent projected gradient ascent with exact (PGA) or sampled (PSGA)
//! gradients, the theoretical step-size schedules and run traces.
//!
//! Every agent steps from the same iterate. Diagnostics (values, potential,
//! Nash gap, mismatch estimate) need dense tables and are skipped for
//! games that only support sampling.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{mismatch_estimate, nash_gap, NashReport, PotentialHandle};
use crate::error::{CoreError, Result};
use crate::game::{dot, random_simplex_point, state_values, JointPolicy, MarkovGame, TabularMarkovGame};
use crate::geometry::{alpha_greedy_unchecked, l1_accuracy, project_simplex_unchecked};
use crate::gradient::{exact_gradient_with_values, reinforce_estimate, HorizonMode};

/// Iterations over which PGA must not lose more potential than this.
pub const DEFAULT_DIVERGENCE_TOL: f64 = 1e-8;

/// Step sizes: one shared value or one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSizes {
    Shared(f64),
    PerAgent(Vec<f64>),
}

impl StepSizes {
    fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        let etas = match self {
            StepSizes::Shared(eta) => vec![*eta; n],
            StepSizes::PerAgent(v) => v.clone(),
        };
        if etas.len() != n {
            return Err(CoreError::InvalidArgument(format!(
                "{} step sizes for {n} agents",
                etas.len()
            )));
        }
        if etas.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(CoreError::InvalidArgument("step sizes must be positive".into()));
        }
        Ok(etas)
    }
}

/// Exact-gradient run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PgaConfig {
    pub step_sizes: StepSizes,
    pub max_iters: usize,
    pub epsilon: f64,
    /// Distribution the gradients and values are taken at. Uniform if unset.
    pub start_dist: Option<Vec<f64>>,
    /// Uniform if unset.
    pub start_policy: Option<JointPolicy>,
    pub log_every: usize,
    /// Compute the Nash gap at logged iterates that are multiples of this;
    /// `0` computes it at the final iterate only.
    pub nash_every: usize,
    /// Stop as soon as a computed Nash gap is at most `epsilon`.
    pub certified_stop: bool,
    /// Potential to track; enables the ascent and divergence checks.
    pub potential: Option<PotentialHandle>,
    pub divergence_tol: f64,
}

impl PgaConfig {
    pub fn new(step_size: f64, max_iters: usize, epsilon: f64) -> Self {
        Self {
            step_sizes: StepSizes::Shared(step_size),
            max_iters,
            epsilon,
            start_dist: None,
            start_policy: None,
            log_every: 1,
            nash_every: 0,
            certified_stop: false,
            potential: None,
            divergence_tol: DEFAULT_DIVERGENCE_TOL,
        }
    }

    /// Step size `(1 - gamma)^3 / (2 n gamma A_max)` for `game`.
    pub fn theoretical(game: &TabularMarkovGame, max_iters: usize, epsilon: f64) -> Result<Self> {
        let eta = exact_step_size(game.num_agents(), game.max_actions(), game.discount())?;
        Ok(Self::new(eta, max_iters, epsilon))
    }
}

/// Sampled-gradient run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PsgaConfig {
    pub step_sizes: StepSizes,
    pub max_iters: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub batch: usize,
    pub horizon: HorizonMode,
    pub seed: u64,
    pub start_dist: Option<Vec<f64>>,
    pub start_policy: Option<JointPolicy>,
    pub log_every: usize,
    pub nash_every: usize,
    pub certified_stop: bool,
    pub potential: Option<PotentialHandle>,
}

impl PsgaConfig {
    pub fn new(step_size: f64, max_iters: usize, alpha: f64, batch: usize, horizon: HorizonMode, seed: u64) -> Self {
        Self {
            step_sizes: StepSizes::Shared(step_size),
            max_iters,
            epsilon: 1e-3,
            alpha,
            batch,
            horizon,
            seed,
            start_dist: None,
            start_policy: None,
            log_every: 1,
            nash_every: 0,
            certified_stop: false,
            potential: None,
        }
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Gradient-mapping norm fell below the stationarity threshold.
    Stationary,
    /// A computed Nash gap was at most `epsilon`.
    CertifiedGap,
    Budget,
}

/// One logged iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub policy: JointPolicy,
    /// `V^i_mu`; empty without dense tables.
    pub values: Vec<f64>,
    pub potential: Option<f64>,
    /// Norm of `(pi_next - pi) / eta`, stacked over agents.
    pub mapping_norm: f64,
    pub nash_gap: Option<f64>,
    /// Mismatch estimate over this iterate, its best responses and uniform.
    pub mismatch: Option<f64>,
    /// Filled in once the run has finished.
    pub l1_accuracy: f64,
    pub elapsed_secs: f64,
}

/// Full record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    pub algorithm: String,
    pub horizon: Option<HorizonMode>,
    pub records: Vec<TraceRecord>,
    pub final_policy: JointPolicy,
    /// Number of gradient steps taken.
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Iteration of the logged iterate with the smallest Nash gap.
    pub best_iterate: Option<usize>,
    pub best_gap: Option<f64>,
    pub final_gap: Option<f64>,
    /// Largest mismatch estimate seen.
    pub mismatch: Option<f64>,
    /// Smallest `dPhi - |dpi|^2 / (2 eta)` over all steps, when a potential
    /// was tracked.
    pub ascent_slack: Option<f64>,
}

impl LearningTrace {
    /// Record with the given iteration index.
    pub fn record_at(&self, iter: usize) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.iter == iter)
    }
}

/// One simultaneous projected step `pi_i <- P(pi_i + eta_i g_i)`.
pub fn projected_step(policy: &JointPolicy, gradients: &[Vec<Vec<f64>>], etas: &[f64]) -> Result<JointPolicy> {
    if gradients.len() != policy.num_agents() || etas.len() != policy.num_agents() {
        return Err(CoreError::ShapeMismatch("gradient or step sizes do not match agents".into()));
    }
    let mut probs = Vec::with_capacity(policy.num_agents());
    for ((agent, grad), &eta) in policy.probs.iter().zip(gradients).zip(etas) {
        if agent.len() != grad.len() {
            return Err(CoreError::ShapeMismatch("gradient state count".into()));
        }
        let mut rows = Vec::with_capacity(agent.len());
        for (x, g) in agent.iter().zip(grad) {
            if x.len() != g.len() {
                return Err(CoreError::ShapeMismatch("gradient action count".into()));
            }
            let raw: Vec<f64> = x.iter().zip(g).map(|(p, d)| p + eta * d).collect();
            rows.push(project_simplex_unchecked(&raw));
        }
        probs.push(rows);
    }
    Ok(JointPolicy::from_raw(probs))
}

/// One exact independent PGA step from `policy` with gradients at the
/// game's initial distribution.
pub fn pga_step(game: &TabularMarkovGame, policy: &JointPolicy, eta: f64) -> Result<JointPolicy> {
    if !(eta > 0.0) {
        return Err(CoreError::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    policy.check_shape(game.action_counts(), game.num_states())?;
    let (g, _) = exact_gradient_with_values(game, policy, game.initial_dist())?;
    projected_step(policy, &g, &vec![eta; game.num_agents()])
}

fn mapping_norm(before: &JointPolicy, after: &JointPolicy, etas: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((a, b), eta) in before.probs.iter().zip(&after.probs).zip(etas) {
        let d2: f64 = a
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        total += d2 / (eta * eta);
    }
    total.sqrt()
}

fn squared_distance(a: &JointPolicy, b: &JointPolicy) -> f64 {
    a.probs
        .iter()
        .flatten()
        .flatten()
        .zip(b.probs.iter().flatten().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")))
    }
}

fn resolve_start_dist(ns: usize, given: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    match given {
        None => Ok(vec![1.0 / ns as f64; ns]),
        Some(mu) => {
            if mu.len() != ns {
                return Err(CoreError::ShapeMismatch("start distribution length".into()));
            }
            let sum: f64 = mu.iter().sum();
            if mu.iter().any(|&m| m < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(CoreError::InvalidArgument("start distribution is not a distribution".into()));
            }
            Ok(mu.clone())
        }
    }
}

fn resolve_start_policy<G: MarkovGame + ?Sized>(game: &G, given: &Option<JointPolicy>) -> Result<JointPolicy> {
    match given {
        None => Ok(JointPolicy::uniform(game.action_counts(), game.num_states())),
        Some(p) => {
            p.check_shape(game.action_counts(), game.num_states())?;
            p.check_stochastic()?;
            Ok(p.clone())
        }
    }
}

/// Nash report plus the mismatch estimate over the iterate, its best
/// responses and the uniform policy.
struct Diagnosis {
    report: NashReport,
    mismatch: Option<f64>,
}

fn diagnose(game: &TabularMarkovGame, policy: &JointPolicy, epsilon: f64, mu: &[f64]) -> Result<Diagnosis> {
    let report = nash_gap(game, policy, epsilon)?;
    let mismatch = if mu.iter().all(|&m| m > 0.0) {
        let mut set = vec![policy.clone(), JointPolicy::uniform(game.action_counts(), game.num_states())];
        for (i, br) in report.best_responses.iter().enumerate() {
            let k = game.action_counts()[i];
            let comp = br
                .iter()
                .map(|&a| {
                    let mut row = vec![0.0; k];
                    row[a] = 1.0;
                    row
                })
                .collect();
            set.push(policy.with_agent(i, comp));
        }
        Some(mismatch_estimate(game, &set, mu)?)
    } else {
        None
    };
    Ok(Diagnosis { report, mismatch })
}

/// Stationarity threshold `epsilon (1 - gamma) / (2 D sqrt(S))`.
pub fn stationarity_threshold(epsilon: f64, gamma: f64, mismatch: f64, num_states: usize) -> f64 {
    epsilon * (1.0 - gamma) / (2.0 * mismatch.max(1.0) * (num_states as f64).sqrt())
}

fn finish(
    algorithm: &str,
    horizon: Option<HorizonMode>,
    mut records: Vec<TraceRecord>,
    final_policy: JointPolicy,
    iterations: usize,
    stop_reason: StopReason,
    mismatch: Option<f64>,
    ascent_slack: Option<f64>,
) -> Result<LearningTrace> {
    for r in &mut records {
        r.l1_accuracy = l1_accuracy(&r.policy, &final_policy)?;
    }
    let best = records
        .iter()
        .filter_map(|r| r.nash_gap.map(|g| (r.iter, g)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let final_gap = records.last().and_then(|r| r.nash_gap);
    Ok(LearningTrace {
        algorithm: algorithm.into(),
        horizon,
        records,
        final_policy,
        iterations,
        stop_reason,
        best_iterate: best.map(|b| b.0),
        best_gap: best.map(|b| b.1),
        final_gap,
        mismatch,
        ascent_slack,
    })
}

/// Independent projected gradient ascent with exact gradients.
///
/// Stops when the gradient-mapping norm drops below
/// [`stationarity_threshold`] with the running mismatch estimate, when a
/// computed Nash gap is at most `epsilon` (if `certified_stop`), or after
/// `max_iters` steps. With a potential supplied, a drop in the potential
/// larger than `divergence_tol` aborts the run.
pub fn run_pga(game: &TabularMarkovGame, config: &PgaConfig) -> Result<LearningTrace> {
    check_epsilon(config.epsilon)?;
    if config.max_iters == 0 {
        return Err(CoreError::InvalidArgument("max_iters must be at least 1".into()));
    }
    let n = game.num_agents();
    let ns = game.num_states();
    let gamma = game.discount();
    let etas = config.step_sizes.resolve(n)?;
    let eta_max = etas.iter().copied().fold(0.0, f64::max);
    let mu = resolve_start_dist(ns, &config.start_dist)?;
    let mut policy = resolve_start_policy(game, &config.start_policy)?;
    let aux = match &config.potential {
        Some(h) => Some(h.auxiliary_game(game)?),
        None => None,
    };
    let log_every = config.log_every.max(1);
    let clock = Instant::now();

    let mut records = Vec::new();
    let mut running_mismatch = if mu.iter().all(|&m| m > 0.0) {
        Some(mismatch_estimate(
            game,
            &[policy.clone(), JointPolicy::uniform(game.action_counts(), ns)],
            &mu,
        )?)
    } else {
        None
    };
    let mut prev_potential: Option<f64> = None;
    let mut prev_policy: Option<JointPolicy> = None;
    let mut ascent_slack: Option<f64> = None;
    let mut t = 0usize;
    let stop = loop {
        let (grads, values) = exact_gradient_with_values(game, &policy, &mu)?;
        let potential = match &aux {
            Some(aux) => Some(dot(&state_values(aux, &policy)?[0], &mu)),
            None => None,
        };
        if let (Some(phi), Some(prev_phi), Some(prev)) = (potential, prev_potential, &prev_policy) {
            let drop = prev_phi - phi;
            if drop > config.divergence_tol {
                return Err(CoreError::Divergence { iteration: t, drop });
            }
            let slack = (phi - prev_phi) - squared_distance(&policy, prev) / (2.0 * eta_max);
            ascent_slack = Some(ascent_slack.map_or(slack, |s: f64| s.min(slack)));
        }
        let next = projected_step(&policy, &grads, &etas)?;
        let norm = mapping_norm(&policy, &next, &etas);
        let at_budget = t == config.max_iters;
        let threshold = stationarity_threshold(config.epsilon, gamma, running_mismatch.unwrap_or(1.0), ns);
        let stationary = norm <= threshold;
        let logged = t % log_every == 0 || at_budget || stationary;
        let nash_due = logged && (stationary || at_budget || (config.nash_every > 0 && t % config.nash_every == 0));
        let mut reason = if stationary {
            Some(StopReason::Stationary)
        } else if at_budget {
            Some(StopReason::Budget)
        } else {
            None
        };
        if logged {
            let (gap, mismatch) = if nash_due {
                let d = diagnose(game, &policy, config.epsilon, &mu)?;
                if let Some(m) = d.mismatch {
                    running_mismatch = Some(running_mismatch.map_or(m, |r: f64| r.max(m)));
                }
                if config.certified_stop && d.report.gap <= config.epsilon && reason.is_none() {
                    reason = Some(StopReason::CertifiedGap);
                }
                (Some(d.report.gap), d.mismatch)
            } else {
                (None, None)
            };
            records.push(TraceRecord {
                iter: t,
                policy: policy.clone(),
                values: values.iter().map(|v| dot(v, &mu)).collect(),
                potential,
                mapping_norm: norm,
                nash_gap: gap,
                mismatch,
                l1_accuracy: 0.0,
                elapsed_secs: clock.elapsed().as_secs_f64(),
            });
        }
        if let Some(r) = reason {
            break r;
        }
        prev_potential = potential;
        prev_policy = Some(std::mem::replace(&mut policy, next));
        t += 1;
    };
    finish("pga", None, records, policy, t, stop, running_mismatch, ascent_slack)
}

/// Independent projected stochastic gradient ascent on the parameters `x`
/// of the alpha-greedy policies, with REINFORCE estimates.
///
/// Reproducible from `seed`: iteration `t` draws its batch from the
/// trajectory streams of iteration `t`. Diagnostics are evaluated at the
/// played policy `(1 - alpha) x + alpha / A_i`.
pub fn run_psga<G: MarkovGame + ?Sized>(game: &G, config: &PsgaConfig) -> Result<LearningTrace> {
    check_epsilon(config.epsilon)?;
    if config.max_iters == 0 {
        return Err(CoreError::InvalidArgument("max_iters must be at least 1".into()));
    }
    let n = game.num_agents();
    let ns = game.num_states();
    let etas = config.step_sizes.resolve(n)?;
    let mu = resolve_start_dist(ns, &config.start_dist)?;
    let mut x = resolve_start_policy(game, &config.start_policy)?;
    let tab = game.as_tabular();
    let aux = match (&config.potential, tab) {
        (Some(h), Some(t)) => Some(h.auxiliary_game(t)?),
        _ => None,
    };
    let log_every = config.log_every.max(1);
    let clock = Instant::now();
    let mut records = Vec::new();
    let mut running_mismatch: Option<f64> = None;
    let mut t = 0usize;
    let stop = loop {
        let est = reinforce_estimate(game, &x, config.alpha, config.batch, config.horizon, config.seed, t as u64)?;
        let next = projected_step(&x, &est.gradients, &etas)?;
        let norm = mapping_norm(&x, &next, &etas);
        let at_budget = t == config.max_iters;
        let logged = t % log_every == 0 || at_budget;
        let mut reason = at_budget.then_some(StopReason::Budget);
        if logged {
            let played = alpha_greedy_unchecked(&x, config.alpha);
            let mut rec = TraceRecord {
                iter: t,
                policy: x.clone(),
                values: Vec::new(),
                potential: None,
                mapping_norm: norm,
                nash_gap: None,
                mismatch: None,
                l1_accuracy: 0.0,
                elapsed_secs: 0.0,
            };
            if let Some(tab) = tab {
                rec.values = state_values(tab, &played)?.iter().map(|v| dot(v, &mu)).collect();
                if let Some(aux) = &aux {
                    rec.potential = Some(dot(&state_values(aux, &played)?[0], &mu));
                }
                if at_budget || (config.nash_every > 0 && t % config.nash_every == 0) {
                    let d = diagnose(tab, &played, config.epsilon, &mu)?;
                    if let Some(m) = d.mismatch {
                        running_mismatch = Some(running_mismatch.map_or(m, |r: f64| r.max(m)));
                    }
                    if config.certified_stop && d.report.gap <= config.epsilon && reason.is_none() {
                        reason = Some(StopReason::CertifiedGap);
                    }
                    rec.nash_gap = Some(d.report.gap);
                    rec.mismatch = d.mismatch;
                }
            }
            rec.elapsed_secs = clock.elapsed().as_secs_f64();
            records.push(rec);
        }
        if let Some(r) = reason {
            break r;
        }
        x = next;
        t += 1;
    };
    finish("psga", Some(config.horizon), records, x, t, stop, running_mismatch, None)
}

/// Whether a schedule is for exact or sampled gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Exact,
    Stochastic,
}

/// Step size, iteration count and exploration from the convergence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta: f64,
    /// Rounded up; kept as a float because the bound overflows integers
    /// for small `epsilon`.
    pub iterations: f64,
    pub alpha: f64,
}

/// Inputs of [`theoretical_schedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleInputs {
    pub num_agents: usize,
    pub num_states: usize,
    pub max_actions: usize,
    pub gamma: f64,
    pub epsilon: f64,
    /// Distribution mismatch coefficient (or an estimate), at least 1.
    pub mismatch: f64,
    /// Bound on the potential; `1 / (1 - gamma)` for rewards in `[-1, 1]`.
    pub phi_max: f64,
}

impl ScheduleInputs {
    /// Inputs for `game` with `D = 1` and `phi_max = 1 / (1 - gamma)`.
    pub fn for_game<G: MarkovGame + ?Sized>(game: &G, epsilon: f64) -> Self {
        Self {
            num_agents: game.num_agents(),
            num_states: game.num_states(),
            max_actions: game.max_actions(),
            gamma: game.discount(),
            epsilon,
            mismatch: 1.0,
            phi_max: 1.0 / (1.0 - game.discount()),
        }
    }
}

fn exact_step_size(n: usize, a_max: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "the theoretical step size needs gamma in (0, 1), got {gamma}"
        )));
    }
    Ok((1.0 - gamma).powi(3) / (2.0 * n as f64 * gamma * a_max as f64))
}

/// Step size, iteration budget and exploration rate guaranteed by the
/// convergence theorems.
///
/// Exact: `eta = (1-g)^3 / (2 n g A)`, `T = 16 n g D^2 S A Phi / ((1-g)^5 eps^2)`,
/// `alpha = 0`. Stochastic: `eta = eps^4 (1-g)^3 g / (48 n D^2 A^2 S)`,
/// `T = 48 (1-g) A Phi D^4 S^2 / (eps^6 g^3)`, `alpha = eps^2`.
pub fn theoretical_schedule(inputs: &ScheduleInputs, mode: ScheduleMode) -> Result<Schedule> {
    let ScheduleInputs {
        num_agents,
        num_states,
        max_actions,
        gamma,
        epsilon,
        mismatch,
        phi_max,
    } = *inputs;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(CoreError::InvalidArgument(format!("epsilon {epsilon} outside (0, 1]")));
    }
    if !(mismatch >= 1.0) {
        return Err(CoreError::InvalidArgument(format!("mismatch {mismatch} below 1")));
    }
    if !(phi_max > 0.0) {
        return Err(CoreError::InvalidArgument(format!("phi_max {phi_max} must be positive")));
    }
    if num_agents == 0 || num_states == 0 || max_actions == 0 {
        return Err(CoreError::InvalidArgument("empty game".into()));
    }
    let n = num_agents as f64;
    let s = num_states as f64;
    let a = max_actions as f64;
    let d = mismatch;
    match mode {
        ScheduleMode::Exact => {
            let eta = exact_step_size(num_agents, max_actions, gamma)?;
            let iterations =
                (16.0 * n * gamma * d * d * s * a * phi_max / ((1.0 - gamma).powi(5) * epsilon * epsilon)).ceil();
            Ok(Schedule {
                eta,
                iterations,
                alpha: 0.0,
            })
        }
        ScheduleMode::Stochastic => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "stochastic schedule divides by gamma^3 and needs gamma in (0, 1), got {gamma}"
                )));
            }
            let eta = epsilon.powi(4) * (1.0 - gamma).powi(3) * gamma / (48.0 * n * d * d * a * a * s);
            let iterations =
                (48.0 * (1.0 - gamma) * a * phi_max * d.powi(4) * s * s / (epsilon.powi(6) * gamma.powi(3))).ceil();
            Ok(Schedule {
                eta,
                iterations,
                alpha: epsilon * epsilon,
            })
        }
    }
}

/// `(1 - radius) * uniform + radius * z` with `z` a uniformly random policy
/// drawn from `seed`: a start that breaks the symmetry between agents.
pub fn perturbed_uniform(action_counts: &[usize], num_states: usize, radius: f64, seed: u64) -> Result<JointPolicy> {
    if !(0.0..=1.0).contains(&radius) {
        return Err(CoreError::InvalidArgument(format!("radius {radius} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = action_counts
        .iter()
        .map(|&k| {
            (0..num_states)
                .map(|_| {
                    random_simplex_point(k, &mut rng)
                        .into_iter()
                        .map(|z| (1.0 - radius) / k as f64 + radius * z)
                        .collect()
                })
                .collect()
        })
        .collect();
    JointPolicy::new(probs)
}

/// Per-agent step sizes drawn uniformly from `[lo, hi]`.
pub fn random_step_sizes(n: usize, lo: f64, hi: f64, seed: u64) -> StepSizes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StepSizes::PerAgent((0..n).map(|_| rng.random_range(lo..=hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{potential_value, Construction};
    use crate::instances::{build_random_mpg, RandomKind, RandomSizes};

    fn bandit(gamma: f64) -> TabularMarkovGame {
        // Two agents, one state, identical rewards 1 for action 0 else 0
        // (indexed by agent 0's action).
        TabularMarkovGame::from_fn(
            &[2, 2],
            1,
            gamma,
            vec![1.0],
            |_, _, a| if a[0] == 0 && a[1] == 0 { 1.0 } else { 0.0 },
            |_, _, out| out[0] = 1.0,
        )
        .unwrap()
    }

    #[test]
    fn schedule_matches_headline_numbers() {
        let inputs = ScheduleInputs {
            num_agents: 8,
            num_states: 2,
            max_actions: 4,
            gamma: 0.99,
            epsilon: 0.1,
            mismatch: 1.0,
            phi_max: 100.0,
        };
        let s = theoretical_schedule(&inputs, ScheduleMode::Exact).unwrap();
        assert!((s.eta - 1e-6 / 63.36).abs() < 1e-20);
        assert!((s.eta - 1.58e-8).abs() < 0.01e-8);
        assert_eq!(s.alpha, 0.0);
        let doubled = theoretical_schedule(&ScheduleInputs { epsilon: 0.2, ..inputs }, ScheduleMode::Exact).unwrap();
        assert!((s.iterations / doubled.iterations - 4.0).abs() < 1e-6);
        let st = theoretical_schedule(&ScheduleInputs { epsilon: 1.0, ..inputs }, ScheduleMode::Stochastic).unwrap();
        assert_eq!(st.alpha, 1.0);
        let zero = ScheduleInputs { gamma: 0.0, ..inputs };
        assert!(theoretical_schedule(&zero, ScheduleMode::Stochastic).is_err());
        assert!(theoretical_schedule(&ScheduleInputs { mismatch: 0.5, ..inputs }, ScheduleMode::Exact).is_err());
    }

    #[test]
    fn step_on_team_bandit_matches_single_agent_step() {
        // gamma = 0: V(x, y) = x_0 y_0. From uniform the gradient for each
        // agent is (0.5, 0), so the projected step moves 0.025 onto action 0.
        let g = bandit(0.0);
        let pol = JointPolicy::uniform(&[2, 2], 1);
        let next = pga_step(&g, &pol, 0.1).unwrap();
        for i in 0..2 {
            assert!((next.probs[i][0][0] - 0.525).abs() < 1e-15);
            assert!((next.probs[i][0][1] - 0.475).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_leaves_policy() {
        let g = bandit(0.5).with_shared_rewards(&[vec![0.0; 4]]).unwrap();
        let pol = JointPolicy::new(vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4]]]).unwrap();
        assert_eq!(pga_step(&g, &pol, 1.0).unwrap(), pol);
    }

    #[test]
    fn nash_start_does_not_move() {
        let g = bandit(0.5);
        let start = JointPolicy::deterministic(&[2, 2], &[vec![0], vec![0]]);
        let mut cfg = PgaConfig::new(0.1, 10, 1e-3);
        cfg.start_policy = Some(start.clone());
        let trace = run_pga(&g, &cfg).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Stationary);
        assert_eq!(trace.iterations, 0);
        assert_eq!(trace.final_policy, start);
        assert_eq!(trace.records[0].nash_gap, Some(0.0));
    }

    #[test]
    fn pga_on_c1_game_reaches_nash_and_ascends() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sizes = RandomSizes {
            action_counts: vec![3, 3],
            num_states: 3,
            gamma: 0.9,
        };
        let inst = build_random_mpg(RandomKind::C1, &sizes, &mut rng).unwrap();
        let handle = inst.metadata.potential.clone().unwrap();
        assert_eq!(handle.construction, Construction::C1);
        let mut cfg = PgaConfig::theoretical(&inst.game, 200_000, 1e-3).unwrap();
        cfg.potential = Some(handle.clone());
        cfg.log_every = 500;
        cfg.nash_every = 500;
        cfg.certified_stop = true;
        let trace = run_pga(&inst.game, &cfg).unwrap();
        assert_ne!(trace.stop_reason, StopReason::Budget);
        assert!(trace.best_gap.unwrap() <= 1e-3);
        assert!(trace.ascent_slack.unwrap() >= -1e-10);
        let mu = vec![1.0 / 3.0; 3];
        let last = trace.records.last().unwrap();
        let phi = potential_value(&inst.game, &handle, &trace.final_policy, &mu).unwrap();
        assert!((last.potential.unwrap() - phi).abs() < 1e-12);
        assert!(last.l1_accuracy == 0.0);
    }

    #[test]
    fn oversized_step_on_potential_game_is_flagged() {
        // A large step on a coordination game with a shallow optimum
        // overshoots and loses potential.
        let g = TabularMarkovGame::from_fn(
            &[3, 3],
            1,
            0.0,
            vec![1.0],
            |_, _, a| [[1.0, -1.0, 0.0], [-1.0, 0.9, 0.0], [0.0, 0.0, 0.95]][a[0]][a[1]],
            |_, _, out| out[0] = 1.0,
        )
        .unwrap();
        let handle = PotentialHandle {
            construction: Construction::Team,
            state_potentials: vec![g.reward_row(0, 0).to_vec()],
        };
        let mut cfg = PgaConfig::new(50.0, 50, 1e-6);
        cfg.potential = Some(handle);
        cfg.start_policy = Some(
            JointPolicy::new(vec![vec![vec![0.2, 0.5, 0.3]], vec![vec![0.5, 0.2, 0.3]]]).unwrap(),
        );
        match run_pga(&g, &cfg) {
            Err(CoreError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn psga_is_reproducible_and_zero_reward_is_static() {
        let g = bandit(0.8);
        let cfg = PsgaConfig::new(0.01, 30, 0.1, 4, HorizonMode::Geometric, 7);
        let a = run_psga(&g, &cfg).unwrap();
        let b = run_psga(&g, &cfg).unwrap();
        assert_eq!(a.final_policy, b.final_policy);
        assert_eq!(a.records.len(), 31);
        let zero = g.with_shared_rewards(&[vec![0.0; 4]]).unwrap();
        let z = run_psga(&zero, &cfg).unwrap();
        assert_eq!(z.final_policy, JointPolicy::uniform(&[2, 2], 1));
    }

    #[test]
    fn invalid_configs() {
        let g = bandit(0.5);
        assert!(run_pga(&g, &PgaConfig::new(-1.0, 10, 1e-3)).is_err());
        assert!(run_pga(&g, &PgaConfig::new(0.1, 0, 1e-3)).is_err());
        assert!(run_pga(&g, &PgaConfig::new(0.1, 10, 0.0)).is_err());
        let cfg = PsgaConfig::new(0.01, 3, 0.0, 4, HorizonMode::Geometric, 1);
        assert!(run_psga(&g, &cfg).is_err());
        let mut cfg = PgaConfig::new(0.1, 10, 1e-3);
        cfg.step_sizes = StepSizes::PerAgent(vec![0.1]);
        assert!(run_pga(&g, &cfg).is_err());
    }
}
