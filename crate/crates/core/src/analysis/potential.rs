//! Potential-game structure: state-wise normal-form potentials, potential
//! values, four-cycle residuals and the verification pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::{dot, random_component, random_policy, state_values, JointPolicy, TabularMarkovGame};

/// Residual above which a four-cycle refutes exact potential structure.
pub const REFUTE_TOL: f64 = 1e-6;
/// Tolerance for the identity `dPhi = dV^i` on certified instances.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Tolerance on unilateral-deviation checks of normal-form potentials.
pub const STATE_POTENTIAL_TOL: f64 = 1e-9;
/// Tolerance for action-independence of transitions.
pub const C1_TOL: f64 = 1e-12;
/// Half-width of the zero band when comparing signs.
pub const SIGN_DEADZONE: f64 = 1e-12;

/// How a potential function was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// All agents share one reward table.
    Team,
    /// State-wise potential games with action-independent transitions.
    C1,
    /// State-wise potential games whose dummy terms have flat gradients.
    C2,
    /// Supplied by the instance builder and checked on samples.
    Analytic,
}

/// State potentials `phi[state][joint]` defining `Phi_s(pi) = E[sum_t gamma^t phi_{s_t}(a_t)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialHandle {
    pub construction: Construction,
    pub state_potentials: Vec<Vec<f64>>,
}

impl PotentialHandle {
    /// Auxiliary game in which every agent is paid `phi`.
    pub fn auxiliary_game(&self, game: &TabularMarkovGame) -> Result<TabularMarkovGame> {
        game.with_shared_rewards(&self.state_potentials)
    }
}

/// `Phi_s(pi)` at every state.
pub fn potential_state_values(
    game: &TabularMarkovGame,
    handle: &PotentialHandle,
    policy: &JointPolicy,
) -> Result<Vec<f64>> {
    let aux = handle.auxiliary_game(game)?;
    Ok(state_values(&aux, policy)?.swap_remove(0))
}

/// `Phi_mu(pi)`.
pub fn potential_value(
    game: &TabularMarkovGame,
    handle: &PotentialHandle,
    policy: &JointPolicy,
    start: &[f64],
) -> Result<f64> {
    Ok(dot(&potential_state_values(game, handle, policy)?, start))
}

/// True when every agent has the same reward table.
pub fn is_team_game(game: &TabularMarkovGame) -> bool {
    let n = game.num_agents();
    (0..game.num_states()).all(|s| {
        let r0 = game.reward_row(0, s);
        (1..n).all(|i| game.reward_row(i, s) == r0)
    })
}

/// True when `P(.|s, a)` does not depend on the joint action.
pub fn has_action_independent_transitions(game: &TabularMarkovGame) -> bool {
    (0..game.num_states()).all(|s| {
        let base = game.transition_row(s, 0);
        (1..game.num_joint()).all(|a| {
            game.transition_row(s, a)
                .iter()
                .zip(base)
                .all(|(x, y)| (x - y).abs() <= C1_TOL)
        })
    })
}

/// Recovers an exact potential of the normal-form game played at `state`.
///
/// The potential is anchored at the all-zeros profile and integrated along
/// coordinate paths; every unilateral deviation is then checked. Returns
/// `None` when the state game is not a potential game.
pub fn state_potential(game: &TabularMarkovGame, state: usize) -> Option<Vec<f64>> {
    let space = game.space();
    let n = game.num_agents();
    let strides = space.strides();
    let nj = space.size();
    let mut phi = vec![0.0; nj];
    for a in 1..nj {
        // Last agent with a nonzero digit: resetting it gives a smaller index.
        let k = (0..n).rev().find(|&k| space.action_of(a, k) != 0).expect("a > 0");
        let prev = a - space.action_of(a, k) * strides[k];
        phi[a] = phi[prev] + game.reward(k, state, a) - game.reward(k, state, prev);
    }
    for a in 0..nj {
        for i in 0..n {
            let ai = space.action_of(a, i);
            let base = a - ai * strides[i];
            for b in 0..game.action_counts()[i] {
                if b == ai {
                    continue;
                }
                let dev = base + b * strides[i];
                let dr = game.reward(i, state, dev) - game.reward(i, state, a);
                let dp = phi[dev] - phi[a];
                if (dr - dp).abs() > STATE_POTENTIAL_TOL {
                    return None;
                }
            }
        }
    }
    Some(phi)
}

/// Residual of the two-agent deviation cycle
/// `(pi_i, pi_j) -> (pi_i', pi_j) -> (pi_i', pi_j') -> (pi_i, pi_j') -> (pi_i, pi_j)`,
/// at every state. Other agents follow `base`.
#[allow(clippy::too_many_arguments)]
pub fn cycle_residuals(
    game: &TabularMarkovGame,
    i: usize,
    j: usize,
    pi_i: &[Vec<f64>],
    pi_i_alt: &[Vec<f64>],
    pi_j: &[Vec<f64>],
    pi_j_alt: &[Vec<f64>],
    base: &JointPolicy,
) -> Result<Vec<f64>> {
    if i == j {
        return Err(CoreError::InvalidArgument("a cycle needs two distinct agents".into()));
    }
    if i >= game.num_agents() || j >= game.num_agents() {
        return Err(CoreError::InvalidArgument("agent index out of range".into()));
    }
    let profile = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut p = base.clone();
        p.probs[i] = a.to_vec();
        p.probs[j] = b.to_vec();
        p
    };
    let v00 = state_values(game, &profile(pi_i, pi_j))?;
    let v10 = state_values(game, &profile(pi_i_alt, pi_j))?;
    let v11 = state_values(game, &profile(pi_i_alt, pi_j_alt))?;
    let v01 = state_values(game, &profile(pi_i, pi_j_alt))?;
    Ok((0..game.num_states())
        .map(|s| {
            (v10[i][s] - v00[i][s])
                + (v11[j][s] - v10[j][s])
                + (v01[i][s] - v11[i][s])
                + (v00[j][s] - v01[j][s])
        })
        .collect())
}

/// Residual of one four-cycle at `state`.
#[allow(clippy::too_many_arguments)]
pub fn cycle_residual(
    game: &TabularMarkovGame,
    i: usize,
    j: usize,
    pi_i: &[Vec<f64>],
    pi_i_alt: &[Vec<f64>],
    pi_j: &[Vec<f64>],
    pi_j_alt: &[Vec<f64>],
    base: &JointPolicy,
    state: usize,
) -> Result<f64> {
    Ok(cycle_residuals(game, i, j, pi_i, pi_i_alt, pi_j, pi_j_alt, base)?[state])
}

/// A concrete cycle with its residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWitness {
    pub agents: (usize, usize),
    pub state: usize,
    pub residual: f64,
    pub pi_i: Vec<Vec<f64>>,
    pub pi_i_alt: Vec<Vec<f64>>,
    pub pi_j: Vec<Vec<f64>>,
    pub pi_j_alt: Vec<Vec<f64>>,
    pub base: JointPolicy,
}

/// Samples random cycles (half of the components deterministic) and
/// returns the one with the largest residual.
pub fn sample_cycles(game: &TabularMarkovGame, samples: usize, seed: u64) -> Result<Option<CycleWitness>> {
    let n = game.num_agents();
    if n < 2 || samples == 0 {
        return Ok(None);
    }
    let ns = game.num_states();
    let counts = game.action_counts().to_vec();
    let witnesses: Vec<CycleWitness> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let i = rng.random_range(0..n);
            let j = (i + 1 + rng.random_range(0..n - 1)) % n;
            let base = random_policy(&counts, ns, 0.5, &mut rng);
            let pi_i = random_component(counts[i], ns, 0.5, &mut rng);
            let pi_i_alt = random_component(counts[i], ns, 0.5, &mut rng);
            let pi_j = random_component(counts[j], ns, 0.5, &mut rng);
            let pi_j_alt = random_component(counts[j], ns, 0.5, &mut rng);
            let res = cycle_residuals(game, i, j, &pi_i, &pi_i_alt, &pi_j, &pi_j_alt, &base)?;
            let (state, residual) = res
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one state");
            Ok(CycleWitness {
                agents: (i, j),
                state,
                residual,
                pi_i,
                pi_i_alt,
                pi_j,
                pi_j_alt,
                base,
            })
        })
        .collect::<Result<_>>()?;
    // First maximal element, so ties resolve by sample index.
    let mut best: Option<CycleWitness> = None;
    for w in witnesses {
        if best.as_ref().is_none_or(|b| w.residual.abs() > b.residual.abs()) {
            best = Some(w);
        }
    }
    Ok(best)
}

/// Max over random unilateral deviations and all states of
/// `|dPhi_s - w_i dV^i_s|`.
pub fn weighted_identity_residual(
    game: &TabularMarkovGame,
    handle: &PotentialHandle,
    weights: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if weights.len() != game.num_agents() {
        return Err(CoreError::ShapeMismatch("one weight per agent is required".into()));
    }
    let aux = handle.auxiliary_game(game)?;
    let n = game.num_agents();
    let ns = game.num_states();
    let counts = game.action_counts().to_vec();
    let worst: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let i = rng.random_range(0..n);
            let pol = random_policy(&counts, ns, 0.25, &mut rng);
            let dev = pol.with_agent(i, random_component(counts[i], ns, 0.25, &mut rng));
            let v0 = state_values(game, &pol)?;
            let v1 = state_values(game, &dev)?;
            let p0 = state_values(&aux, &pol)?;
            let p1 = state_values(&aux, &dev)?;
            Ok((0..ns)
                .map(|s| ((p1[0][s] - p0[0][s]) - weights[i] * (v1[i][s] - v0[i][s])).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Max of `|dPhi_s - dV^i_s|` over random unilateral deviations.
pub fn identity_residual(
    game: &TabularMarkovGame,
    handle: &PotentialHandle,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    weighted_identity_residual(game, handle, &vec![1.0; game.num_agents()], samples, seed)
}

/// Which function of the state potentials serves as the ordinal candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrdinalKind {
    /// `Phi_s(pi) = E_{a ~ pi(s)} phi_s(a)`, the state game alone.
    Instantaneous,
    /// `Phi_s(pi)` as the value of the auxiliary game paying `phi`.
    Discounted,
}

/// A candidate ordinal potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalCandidate {
    pub kind: OrdinalKind,
    pub state_potentials: Vec<Vec<f64>>,
}

/// Outcome of the ordinal sign check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalReport {
    pub kind: OrdinalKind,
    pub samples: usize,
    /// Comparisons made (one per sample and state).
    pub comparisons: usize,
    pub disagreements: usize,
    pub passed: bool,
}

fn sign(x: f64) -> i8 {
    if x > SIGN_DEADZONE {
        1
    } else if x < -SIGN_DEADZONE {
        -1
    } else {
        0
    }
}

fn candidate_values(
    game: &TabularMarkovGame,
    aux: Option<&TabularMarkovGame>,
    candidate: &OrdinalCandidate,
    policy: &JointPolicy,
) -> Result<Vec<f64>> {
    match candidate.kind {
        OrdinalKind::Discounted => Ok(state_values(aux.expect("aux game built"), policy)?.swap_remove(0)),
        OrdinalKind::Instantaneous => {
            // Expected state potential under the product policy.
            let single = game.with_discount(0.0).with_shared_rewards(&candidate.state_potentials)?;
            Ok(state_values(&single, policy)?.swap_remove(0))
        }
    }
}

/// Counts sign disagreements between `dV^i_s` and `dPhi_s` over random
/// unilateral deviations at every state.
pub fn ordinal_check(
    game: &TabularMarkovGame,
    candidate: &OrdinalCandidate,
    samples: usize,
    seed: u64,
) -> Result<OrdinalReport> {
    let aux = match candidate.kind {
        OrdinalKind::Discounted => Some(game.with_shared_rewards(&candidate.state_potentials)?),
        OrdinalKind::Instantaneous => None,
    };
    let n = game.num_agents();
    let ns = game.num_states();
    let counts = game.action_counts().to_vec();
    let per: Vec<usize> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let i = rng.random_range(0..n);
            let pol = random_policy(&counts, ns, 0.25, &mut rng);
            let dev = pol.with_agent(i, random_component(counts[i], ns, 0.25, &mut rng));
            let v0 = state_values(game, &pol)?;
            let v1 = state_values(game, &dev)?;
            let p0 = candidate_values(game, aux.as_ref(), candidate, &pol)?;
            let p1 = candidate_values(game, aux.as_ref(), candidate, &dev)?;
            Ok((0..ns)
                .filter(|&s| sign(v1[i][s] - v0[i][s]) != sign(p1[s] - p0[s]))
                .count())
        })
        .collect::<Result<_>>()?;
    let disagreements = per.iter().sum();
    Ok(OrdinalReport {
        kind: candidate.kind,
        samples,
        comparisons: samples * ns,
        disagreements,
        passed: disagreements == 0,
    })
}

/// Checks the flat-gradient condition on the dummy terms
/// `u^i_s = R_i(s, .) - phi_s` at random policies and every start state.
///
/// Dummy terms are determined only up to an additive constant per state,
/// and those constants change the gradient, so for every agent the
/// constants are fitted by least squares before measuring flatness.
/// Returns the largest centred gradient entry left after the fit.
pub fn dummy_gradient_flatness(
    game: &TabularMarkovGame,
    phi: &[Vec<f64>],
    policies: usize,
    seed: u64,
) -> Result<f64> {
    let n = game.num_agents();
    let ns = game.num_states();
    let nj = game.num_joint();
    let counts = game.action_counts().to_vec();
    let pols: Vec<JointPolicy> = (0..policies as u64)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            random_policy(&counts, ns, 0.0, &mut rng)
        })
        .collect();
    let gamma = game.discount();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let table: Vec<Vec<f64>> = (0..ns)
            .map(|s| (0..nj).map(|a| game.reward(i, s, a) - phi[s][a]).collect())
            .collect();
        let dummy = game.with_agent_rewards(i, &table)?;
        // Rows of [g0 | H]: centred gradient of the dummy value and of the
        // value of each state indicator, stacked over policies and starts.
        let rows: Vec<Vec<Vec<f64>>> = pols
            .par_iter()
            .map(|pol| {
                let solver = crate::game::ChainSolver::new(&dummy, pol)?;
                let mdp = crate::game::agent_mdp(&dummy, pol, i)?;
                let mut rewards = vec![solver.chain.rewards[i].clone()];
                let mut action_rewards = vec![mdp.rewards.clone()];
                for sigma in 0..ns {
                    let mut e = vec![0.0; ns];
                    e[sigma] = 1.0;
                    rewards.push(e);
                    action_rewards.push(
                        (0..ns)
                            .map(|s| vec![if s == sigma { 1.0 } else { 0.0 }; counts[i]])
                            .collect(),
                    );
                }
                let qs: Vec<Vec<Vec<f64>>> = rewards
                    .iter()
                    .zip(&action_rewards)
                    .map(|(r, ar)| {
                        let v = solver.solve(r);
                        let m = crate::game::AgentMdp {
                            agent: i,
                            gamma,
                            rewards: ar.clone(),
                            transitions: mdp.transitions.clone(),
                        };
                        m.q_from_values(&v)
                    })
                    .collect();
                let mut out = Vec::new();
                for s0 in 0..ns {
                    let mut start = vec![0.0; ns];
                    start[s0] = 1.0;
                    let d = solver.occupancy(&start);
                    for s in 0..ns {
                        let centred: Vec<Vec<f64>> = qs
                            .iter()
                            .map(|q| {
                                let row = &q[s];
                                let mean = row.iter().sum::<f64>() / row.len() as f64;
                                row.iter().map(|x| d[s] * (x - mean) / (1.0 - gamma)).collect()
                            })
                            .collect();
                        for a in 0..counts[i] {
                            out.push(centred.iter().map(|c| c[a]).collect());
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
        let m = rows.len();
        let h = nalgebra::DMatrix::from_fn(m, ns, |r, c| rows[r][c + 1]);
        let g0 = nalgebra::DVector::from_fn(m, |r, _| -rows[r][0]);
        let kappa = h
            .clone()
            .svd(true, true)
            .solve(&g0, 1e-12)
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
        let resid = h * kappa - g0;
        worst = worst.max(resid.amax());
    }
    Ok(worst)
}

/// Final verdict of [`verify_mpg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExactMpg,
    Refuted,
    OrdinalEvidence,
    Inconclusive,
}

/// Outcome of MPG verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialCertificate {
    pub verdict: Verdict,
    /// Construction used for an exact verdict.
    pub construction: Option<Construction>,
    /// Largest-residual cycle among the samples.
    pub witness: Option<CycleWitness>,
    /// Max |residual| over the tested cycles.
    pub residual_max: f64,
    pub samples_tested: usize,
    /// Whether each state game admits a normal-form potential.
    pub state_potential_games: Vec<bool>,
    /// Max |dPhi - dV^i| observed when a handle was checked.
    pub identity_residual: Option<f64>,
    /// Largest centred dummy-term gradient, when the flatness check ran.
    pub dummy_gradient_max: Option<f64>,
    pub ordinal: Option<OrdinalReport>,
    /// The certified potential, when the verdict is exact.
    pub potential: Option<PotentialHandle>,
    pub notes: Vec<String>,
}

/// Knobs for [`verify_mpg`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Random four-cycles to sample.
    pub cycle_samples: usize,
    /// Unilateral deviations for identity and ordinal checks.
    pub deviation_samples: usize,
    /// Random policies for the dummy-gradient flatness check.
    pub flatness_policies: usize,
    pub seed: u64,
    /// Potential supplied by the instance builder.
    pub analytic: Option<PotentialHandle>,
    pub ordinal: Option<OrdinalCandidate>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            cycle_samples: 100,
            deviation_samples: 1000,
            flatness_policies: 50,
            seed: 0,
            analytic: None,
            ordinal: None,
        }
    }
}

/// Cycles run alongside every exact verdict.
const CONFIRM_CYCLES: usize = 100;
/// Tolerance on those confirming cycles.
const CONFIRM_TOL: f64 = 1e-8;
/// Tolerance on the centred dummy-term gradients.
const FLATNESS_TOL: f64 = 1e-9;

/// Runs the verification pipeline: team structure, state-wise potentials
/// with C1 or C2, a supplied analytic potential, then random four-cycles.
pub fn verify_mpg(game: &TabularMarkovGame, opts: &VerifyOptions) -> Result<PotentialCertificate> {
    let ns = game.num_states();
    let mut notes = Vec::new();
    let state_phis: Vec<Option<Vec<f64>>> = (0..ns).map(|s| state_potential(game, s)).collect();
    let state_potential_games: Vec<bool> = state_phis.iter().map(Option::is_some).collect();

    let mut cert = PotentialCertificate {
        verdict: Verdict::Inconclusive,
        construction: None,
        witness: None,
        residual_max: 0.0,
        samples_tested: 0,
        state_potential_games,
        identity_residual: None,
        dummy_gradient_max: None,
        ordinal: None,
        potential: None,
        notes: Vec::new(),
    };

    let mut candidate: Option<PotentialHandle> = None;
    if is_team_game(game) {
        let phi = (0..ns).map(|s| game.reward_row(0, s).to_vec()).collect();
        candidate = Some(PotentialHandle {
            construction: Construction::Team,
            state_potentials: phi,
        });
    } else if state_phis.iter().all(Option::is_some) {
        let phi: Vec<Vec<f64>> = state_phis.iter().map(|p| p.clone().expect("checked")).collect();
        if has_action_independent_transitions(game) {
            candidate = Some(PotentialHandle {
                construction: Construction::C1,
                state_potentials: phi,
            });
        } else {
            let flat = dummy_gradient_flatness(game, &phi, opts.flatness_policies, opts.seed)?;
            cert.dummy_gradient_max = Some(flat);
            if flat <= FLATNESS_TOL {
                candidate = Some(PotentialHandle {
                    construction: Construction::C2,
                    state_potentials: phi,
                });
            } else {
                notes.push(format!(
                    "state games are potential games but dummy-term gradients are not flat (max {flat:.3e})"
                ));
            }
        }
    }

    if candidate.is_none() {
        if let Some(handle) = &opts.analytic {
            let res = identity_residual(game, handle, opts.deviation_samples, opts.seed)?;
            cert.identity_residual = Some(res);
            if res <= IDENTITY_TOL {
                candidate = Some(PotentialHandle {
                    construction: Construction::Analytic,
                    state_potentials: handle.state_potentials.clone(),
                });
            } else {
                notes.push(format!("supplied potential violates the MPG identity (max {res:.3e})"));
            }
        }
    }

    if let Some(handle) = candidate {
        let witness = sample_cycles(game, CONFIRM_CYCLES, opts.seed ^ 0x9e37_79b9)?;
        let rmax = witness.as_ref().map_or(0.0, |w| w.residual.abs());
        cert.residual_max = rmax;
        cert.samples_tested = if game.num_agents() > 1 { CONFIRM_CYCLES } else { 0 };
        cert.witness = witness;
        if rmax <= CONFIRM_TOL {
            cert.verdict = Verdict::ExactMpg;
            cert.construction = Some(handle.construction);
            cert.potential = Some(handle);
        } else {
            notes.push(format!(
                "construction {:?} matched but a confirming cycle has residual {rmax:.3e}",
                handle.construction
            ));
        }
    }

    if cert.verdict != Verdict::ExactMpg {
        let witness = sample_cycles(game, opts.cycle_samples, opts.seed)?;
        let rmax = witness.as_ref().map_or(0.0, |w| w.residual.abs());
        cert.residual_max = cert.residual_max.max(rmax);
        cert.samples_tested = if game.num_agents() > 1 { opts.cycle_samples } else { 0 };
        if rmax > REFUTE_TOL {
            cert.verdict = Verdict::Refuted;
        }
        cert.witness = witness;
    }

    if let Some(cand) = &opts.ordinal {
        let rep = ordinal_check(game, cand, opts.deviation_samples, opts.seed)?;
        if cert.verdict == Verdict::Inconclusive && rep.passed {
            cert.verdict = Verdict::OrdinalEvidence;
        }
        cert.ordinal = Some(rep);
    }
    cert.notes = notes;
    Ok(cert)
}
