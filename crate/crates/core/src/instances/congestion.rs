//! Safe/distancing congestion game.
//!
//! Every agent picks one facility in each of two states. At facility `k`
//! an agent earns `w_k * n_k` where `n_k` counts the agents there. In the
//! distancing state the weight drops to `w_k - c` (or `w_k - c_k`), so
//! every extra agent at a facility costs everyone there. Crowding any
//! facility beyond the crowd threshold in the safe state moves play to the
//! distancing state; play returns once no facility exceeds the spread
//! threshold. Optional leaks `p` (safe to distancing) and `q` (staying in
//! distancing) make the transitions stochastic.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Instance, InstanceMetadata};
use crate::error::{CoreError, Result};
use crate::game::{joint_size, MarkovGame, TabularMarkovGame, DEFAULT_ENUMERATION_CAP};

pub const SAFE: usize = 0;
pub const DISTANCING: usize = 1;

/// Distancing-state penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Uniform(f64),
    PerFacility(Vec<f64>),
}

/// How the distancing penalty enters the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `(w_k - c_k) * n_k`: the penalty lowers the per-agent weight.
    #[default]
    Weight,
    /// `w_k * n_k - c_k`: a flat deduction. Crowding stays attractive in the
    /// distancing state, which makes "everyone at the best facility" an
    /// absorbing equilibrium.
    Flat,
}

/// Parameters of the congestion game. Unset fields take their defaults
/// through [`CongestionSpec::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionSpec {
    pub num_agents: usize,
    pub num_facilities: usize,
    /// Safe weights `w_k`, strictly increasing. Default `0.1 * k`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Default: uniform `c = 2 * w_F * N`.
    #[serde(default)]
    pub penalty: Option<Penalty>,
    #[serde(default)]
    pub penalty_form: PenaltyForm,
    /// Safe state tips over when some count exceeds this. Default `N / 2`.
    #[serde(default)]
    pub crowd_threshold: Option<usize>,
    /// Distancing state recovers when every count is at most this. Default `N / 4`.
    #[serde(default)]
    pub spread_threshold: Option<usize>,
    /// Probability of leaving the safe state regardless of counts.
    #[serde(default)]
    pub leak_p: f64,
    /// Probability of staying in the distancing state regardless of counts.
    #[serde(default)]
    pub leak_q: f64,
}

impl CongestionSpec {
    pub fn new(num_agents: usize, num_facilities: usize) -> Self {
        Self {
            num_agents,
            num_facilities,
            weights: None,
            penalty: None,
            penalty_form: PenaltyForm::Weight,
            crowd_threshold: None,
            spread_threshold: None,
            leak_p: 0.0,
            leak_q: 0.0,
        }
    }

    /// Per-facility penalties `c_k = c (1 + 0.1 (F - k + 1))` for
    /// `k = 1..F`: strictly decreasing in `k` and all above the uniform `c`.
    pub fn asymmetric(mut self) -> Self {
        let w = self.default_weights();
        let f = self.num_facilities;
        let c = 2.0 * w[f - 1] * self.num_agents as f64;
        self.penalty = Some(Penalty::PerFacility(
            (1..=f).map(|k| c * (1.0 + 0.1 * (f - k + 1) as f64)).collect(),
        ));
        self
    }

    fn default_weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| (1..=self.num_facilities).map(|k| 0.1 * k as f64).collect())
    }

    /// Copy with every default filled in, after validation.
    pub fn resolved(&self) -> Result<ResolvedSpec> {
        let n = self.num_agents;
        let f = self.num_facilities;
        if n == 0 || f == 0 {
            return Err(CoreError::InvalidArgument(
                "congestion game needs at least one agent and one facility".into(),
            ));
        }
        let weights = self.default_weights();
        if weights.len() != f {
            return Err(CoreError::InvalidArgument(format!(
                "{} weights given for {f} facilities",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || weights.windows(2).any(|p| p[0] >= p[1]) {
            return Err(CoreError::InvalidArgument(
                "facility weights must be positive and strictly increasing".into(),
            ));
        }
        let penalties = match &self.penalty {
            None => vec![2.0 * weights[f - 1] * n as f64; f],
            Some(Penalty::Uniform(c)) => vec![*c; f],
            Some(Penalty::PerFacility(cs)) => cs.clone(),
        };
        if penalties.len() != f || penalties.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "penalties must be positive, one per facility".into(),
            ));
        }
        let crowd = self.crowd_threshold.unwrap_or(n / 2);
        let spread = self.spread_threshold.unwrap_or(n / 4);
        for (name, t) in [("crowd", crowd), ("spread", spread)] {
            if t < 1 || t > n {
                return Err(CoreError::InvalidArgument(format!(
                    "{name} threshold {t} outside [1, {n}]"
                )));
            }
        }
        for (name, p) in [("p", self.leak_p), ("q", self.leak_q)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::InvalidArgument(format!("leak {name} = {p} outside [0, 1]")));
            }
        }
        let mut resolved = ResolvedSpec {
            num_agents: n,
            num_facilities: f,
            weights,
            penalties,
            penalty_form: self.penalty_form,
            crowd_threshold: crowd,
            spread_threshold: spread,
            leak_p: self.leak_p,
            leak_q: self.leak_q,
            scale: 1.0,
        };
        let mut scale: f64 = 0.0;
        for k in 0..f {
            for count in 1..=n {
                for state in [SAFE, DISTANCING] {
                    scale = scale.max(resolved.raw_reward(state, k, count).abs());
                }
            }
        }
        resolved.scale = scale;
        Ok(resolved)
    }
}

/// Spec with defaults applied and the reward normaliser computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSpec {
    pub num_agents: usize,
    pub num_facilities: usize,
    pub weights: Vec<f64>,
    pub penalties: Vec<f64>,
    pub penalty_form: PenaltyForm,
    pub crowd_threshold: usize,
    pub spread_threshold: usize,
    pub leak_p: f64,
    pub leak_q: f64,
    /// Largest absolute raw reward; rewards are divided by it.
    pub scale: f64,
}

impl ResolvedSpec {
    /// Unscaled reward for being at `facility` with `count` agents there.
    pub fn raw_reward(&self, state: usize, facility: usize, count: usize) -> f64 {
        let w = self.weights[facility];
        let n = count as f64;
        if state == SAFE {
            return w * n;
        }
        let c = self.penalties[facility];
        match self.penalty_form {
            PenaltyForm::Weight => (w - c) * n,
            PenaltyForm::Flat => w * n - c,
        }
    }

    /// Normalised reward for being at `facility` with `count` agents there.
    pub fn reward(&self, state: usize, facility: usize, count: usize) -> f64 {
        self.raw_reward(state, facility, count) / self.scale
    }

    /// Next-state distribution `[safe, distancing]` given facility counts.
    pub fn transition(&self, state: usize, counts: &[usize]) -> [f64; 2] {
        let max = counts.iter().copied().max().unwrap_or(0);
        if state == SAFE {
            if max > self.crowd_threshold {
                [0.0, 1.0]
            } else {
                [1.0 - self.leak_p, self.leak_p]
            }
        } else if max <= self.spread_threshold {
            [1.0 - self.leak_q, self.leak_q]
        } else {
            [0.0, 1.0]
        }
    }
}

/// Congestion game evaluated on demand, without dense tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionGame {
    pub spec: ResolvedSpec,
    counts: Vec<usize>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl CongestionGame {
    pub fn new(spec: &CongestionSpec, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(CoreError::InvalidArgument(format!("discount {gamma} outside [0, 1)")));
        }
        let spec = spec.resolved()?;
        Ok(Self {
            counts: vec![spec.num_facilities; spec.num_agents],
            spec,
            discount: gamma,
            initial_dist: vec![0.5, 0.5],
        })
    }

    pub fn facility_counts(&self, actions: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.spec.num_facilities];
        for &a in actions {
            c[a] += 1;
        }
        c
    }

    /// Dense tables, if the joint action space fits under `cap`.
    pub fn to_tabular(&self, cap: usize) -> Result<TabularMarkovGame> {
        let size = joint_size(&self.counts);
        if size > cap as u128 {
            return Err(CoreError::TooLarge {
                what: "joint action space",
                size,
                cap: cap as u128,
            });
        }
        let n = self.spec.num_agents;
        let tab = crate::game::JointActionSpace::new(&self.counts, cap)?;
        let nj = tab.size();
        let mut rewards = vec![0.0; n * 2 * nj];
        let mut transitions = vec![0.0; 2 * nj * 2];
        let mut actions = vec![0usize; n];
        for a in 0..nj {
            tab.decode(a, &mut actions);
            let counts = self.facility_counts(&actions);
            for s in 0..2 {
                for i in 0..n {
                    rewards[(i * 2 + s) * nj + a] = self.spec.reward(s, actions[i], counts[actions[i]]);
                }
                let t = self.spec.transition(s, &counts);
                transitions[(s * nj + a) * 2] = t[0];
                transitions[(s * nj + a) * 2 + 1] = t[1];
            }
        }
        TabularMarkovGame::with_cap(
            &self.counts,
            2,
            rewards,
            transitions,
            self.discount,
            self.initial_dist.clone(),
            cap,
        )
    }
}

impl MarkovGame for CongestionGame {
    fn num_agents(&self) -> usize {
        self.spec.num_agents
    }
    fn num_states(&self) -> usize {
        2
    }
    fn action_counts(&self) -> &[usize] {
        &self.counts
    }
    fn discount(&self) -> f64 {
        self.discount
    }
    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    fn rewards_into(&self, state: usize, actions: &[usize], out: &mut [f64]) {
        let counts = self.facility_counts(actions);
        for (o, &a) in out.iter_mut().zip(actions) {
            *o = self.spec.reward(state, a, counts[a]);
        }
    }
    fn transition_into(&self, state: usize, actions: &[usize], out: &mut [f64]) {
        let counts = self.facility_counts(actions);
        out.copy_from_slice(&self.spec.transition(state, &counts));
    }
}

/// Result of [`build_congestion`]: dense tables when they fit, otherwise
/// only the implicit game.
#[derive(Debug, Clone)]
pub struct CongestionBuild {
    pub implicit: CongestionGame,
    pub instance: Option<Instance>,
    pub metadata: InstanceMetadata,
}

/// Builds the congestion game. Dense tables are produced when the joint
/// action space is within the default enumeration cap; otherwise the
/// metadata is flagged `exact_path_disabled`.
pub fn build_congestion(spec: &CongestionSpec, gamma: f64) -> Result<CongestionBuild> {
    let implicit = CongestionGame::new(spec, gamma)?;
    let fits = joint_size(implicit.action_counts()) <= DEFAULT_ENUMERATION_CAP as u128;
    let metadata = InstanceMetadata {
        instance: "congestion".into(),
        params: json!({ "gamma": gamma }),
        scale: implicit.spec.scale,
        congestion: Some(spec.clone()),
        exact_path_disabled: !fits,
        ..Default::default()
    };
    let instance = if fits {
        Some(Instance {
            game: implicit.to_tabular(DEFAULT_ENUMERATION_CAP)?,
            metadata: metadata.clone(),
        })
    } else {
        None
    };
    Ok(CongestionBuild {
        implicit,
        instance,
        metadata,
    })
}

/// Sorted-by-facility agent counts of a deterministic profile at one state.
pub fn occupancy_of(actions: &[usize], num_facilities: usize) -> Vec<usize> {
    let mut c = vec![0usize; num_facilities];
    for &a in actions {
        c[a] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game;

    fn profile(occ: &[usize]) -> Vec<usize> {
        occ.iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
            .collect()
    }

    #[test]
    fn defaults() {
        let r = CongestionSpec::new(8, 4).resolved().unwrap();
        assert_eq!(r.crowd_threshold, 4);
        assert_eq!(r.spread_threshold, 2);
        assert!((r.penalties[0] - 6.4).abs() < 1e-12);
        // (0.1 - 6.4) * 8 is the most negative raw reward.
        assert!((r.scale - 50.4).abs() < 1e-12);
        assert!((r.reward(DISTANCING, 3, 2) - 2.0 * (0.4 - 6.4) / 50.4).abs() < 1e-15);
        let mut flat = CongestionSpec::new(8, 4);
        flat.penalty_form = PenaltyForm::Flat;
        let f = flat.resolved().unwrap();
        assert!((f.scale - 6.3).abs() < 1e-12);
        assert!((f.reward(DISTANCING, 3, 2) - (0.8 - 6.4) / 6.3).abs() < 1e-15);
    }

    #[test]
    fn headline_transitions() {
        let r = CongestionSpec::new(8, 4).resolved().unwrap();
        assert_eq!(r.transition(SAFE, &[0, 0, 4, 4]), [1.0, 0.0]);
        assert_eq!(r.transition(SAFE, &[0, 0, 3, 5]), [0.0, 1.0]);
        assert_eq!(r.transition(DISTANCING, &[2, 2, 2, 2]), [1.0, 0.0]);
        assert_eq!(r.transition(DISTANCING, &[1, 2, 2, 3]), [0.0, 1.0]);
    }

    #[test]
    fn leaks() {
        let mut spec = CongestionSpec::new(8, 4);
        spec.leak_p = 0.01;
        spec.leak_q = 0.1;
        let r = spec.resolved().unwrap();
        assert_eq!(r.transition(SAFE, &[0, 0, 4, 4]), [0.99, 0.01]);
        assert_eq!(r.transition(DISTANCING, &[2, 2, 2, 2]), [0.9, 0.1]);
        assert_eq!(r.transition(SAFE, &[0, 0, 0, 8]), [0.0, 1.0]);
    }

    #[test]
    fn asymmetric_penalties_decrease() {
        let r = CongestionSpec::new(8, 4).asymmetric().resolved().unwrap();
        assert!(r.penalties.windows(2).all(|p| p[0] > p[1]));
        assert!(r.penalties.iter().all(|&c| c > 6.4));
    }

    #[test]
    fn invalid_specs() {
        let mut s = CongestionSpec::new(8, 4);
        s.weights = Some(vec![0.4, 0.3, 0.2, 0.1]);
        assert!(s.resolved().is_err());
        let mut s = CongestionSpec::new(8, 4);
        s.crowd_threshold = Some(0);
        assert!(s.resolved().is_err());
        let mut s = CongestionSpec::new(8, 4);
        s.leak_p = 2.0;
        assert!(s.resolved().is_err());
        assert!(CongestionSpec::new(0, 4).resolved().is_err());
    }

    #[test]
    fn small_game_tables_match_implicit() {
        let b = build_congestion(&CongestionSpec::new(4, 3), 0.9).unwrap();
        let g = b.instance.unwrap().game;
        assert!(validate_game(&g).is_empty());
        let mut r = vec![0.0; 4];
        let mut t = vec![0.0; 2];
        for a in 0..g.num_joint() {
            let acts = g.space().decode_vec(a);
            for s in 0..2 {
                b.implicit.rewards_into(s, &acts, &mut r);
                for i in 0..4 {
                    assert_eq!(r[i], g.reward(i, s, a));
                }
                b.implicit.transition_into(s, &acts, &mut t);
                assert_eq!(t.as_slice(), g.transition_row(s, a));
            }
        }
    }

    #[test]
    fn large_game_is_implicit() {
        let b = build_congestion(&CongestionSpec::new(16, 5), 0.99).unwrap();
        assert!(b.instance.is_none());
        assert!(b.metadata.exact_path_disabled);
        let acts = profile(&[0, 0, 0, 8, 8]);
        let mut out = vec![0.0; 2];
        b.implicit.transition_into(SAFE, &acts, &mut out);
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn rewards_depend_on_counts_only() {
        let g = CongestionGame::new(&CongestionSpec::new(6, 3), 0.9).unwrap();
        let a = vec![0, 2, 1, 2, 0, 2];
        let b = vec![2, 0, 1, 0, 2, 2];
        let mut ra = vec![0.0; 6];
        let mut rb = vec![0.0; 6];
        g.rewards_into(SAFE, &a, &mut ra);
        g.rewards_into(SAFE, &b, &mut rb);
        // Agent 2 keeps facility 1 and agent 5 keeps facility 2.
        assert_eq!(ra[2], rb[2]);
        assert_eq!(ra[5], rb[5]);
        assert_eq!(occupancy_of(&a, 3), occupancy_of(&b, 3));
    }
}
