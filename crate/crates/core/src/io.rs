//! File formats: games, policies, run configurations and trace CSVs.
//!
//! A game file is JSON. Dense games store their tables directly. Congestion
//! games store only their generator spec, and tables are rebuilt on load
//! when the joint action space fits under the enumeration cap.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::game::{JointPolicy, MarkovGame, TabularMarkovGame};
use crate::gradient::HorizonMode;
use crate::instances::{build_congestion, CongestionGame, Instance, InstanceMetadata};
use crate::learning::LearningTrace;

pub const GAME_FORMAT: &str = "mpg-game/1";

/// Serialized game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub format: String,
    pub num_agents: usize,
    pub num_states: usize,
    pub action_counts: Vec<usize>,
    pub num_joint_actions: u128,
    pub discount: f64,
    pub initial_dist: Vec<f64>,
    /// `rewards[agent][state][joint]`; absent for generated games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<Vec<Vec<f64>>>>,
    /// `transitions[state][joint][next]`; absent for generated games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<Vec<f64>>>>,
    pub metadata: InstanceMetadata,
}

/// A loaded game: dense tables when available, the generator otherwise.
#[derive(Debug, Clone)]
pub enum LoadedGame {
    Tabular(Instance),
    Implicit {
        game: CongestionGame,
        metadata: InstanceMetadata,
    },
}

impl LoadedGame {
    pub fn metadata(&self) -> &InstanceMetadata {
        match self {
            LoadedGame::Tabular(i) => &i.metadata,
            LoadedGame::Implicit { metadata, .. } => metadata,
        }
    }

    pub fn tabular(&self) -> Option<&TabularMarkovGame> {
        match self {
            LoadedGame::Tabular(i) => Some(&i.game),
            LoadedGame::Implicit { .. } => None,
        }
    }

    /// The game as something that can be simulated.
    pub fn as_markov(&self) -> &dyn MarkovGame {
        match self {
            LoadedGame::Tabular(i) => &i.game,
            LoadedGame::Implicit { game, .. } => game,
        }
    }

    /// The dense game, or [`CoreError::TooLarge`] when only the generator exists.
    pub fn require_tabular(&self) -> Result<&TabularMarkovGame> {
        match self {
            LoadedGame::Tabular(i) => Ok(&i.game),
            LoadedGame::Implicit { game, .. } => Err(CoreError::TooLarge {
                what: "joint action space (exact path disabled)",
                size: crate::game::joint_size(game.action_counts()),
                cap: crate::game::DEFAULT_ENUMERATION_CAP as u128,
            }),
        }
    }
}

/// Dense file contents for `instance`.
pub fn game_file_from_instance(instance: &Instance) -> GameFile {
    let g = &instance.game;
    let nj = g.num_joint();
    let ns = g.num_states();
    let generated = instance.metadata.congestion.is_some();
    GameFile {
        format: GAME_FORMAT.into(),
        num_agents: g.num_agents(),
        num_states: ns,
        action_counts: g.action_counts().to_vec(),
        num_joint_actions: nj as u128,
        discount: g.discount(),
        initial_dist: g.initial_dist().to_vec(),
        rewards: (!generated).then(|| {
            (0..g.num_agents())
                .map(|i| (0..ns).map(|s| g.reward_row(i, s).to_vec()).collect())
                .collect()
        }),
        transitions: (!generated).then(|| {
            (0..ns)
                .map(|s| (0..nj).map(|a| g.transition_row(s, a).to_vec()).collect())
                .collect()
        }),
        metadata: instance.metadata.clone(),
    }
}

/// File contents for a congestion game that is only available as a generator.
pub fn game_file_from_generator(game: &CongestionGame, metadata: &InstanceMetadata) -> GameFile {
    GameFile {
        format: GAME_FORMAT.into(),
        num_agents: game.num_agents(),
        num_states: game.num_states(),
        action_counts: game.action_counts().to_vec(),
        num_joint_actions: crate::game::joint_size(game.action_counts()),
        discount: game.discount(),
        initial_dist: game.initial_dist().to_vec(),
        rewards: None,
        transitions: None,
        metadata: metadata.clone(),
    }
}

/// Rebuilds the game described by `file`.
pub fn load_game_file(file: GameFile) -> Result<LoadedGame> {
    if file.format != GAME_FORMAT {
        return Err(CoreError::Parse(format!("unknown game format {:?}", file.format)));
    }
    match (file.rewards, file.transitions) {
        (Some(rewards), Some(transitions)) => {
            let ns = file.num_states;
            let n = file.num_agents;
            if rewards.len() != n || transitions.len() != ns {
                return Err(CoreError::ShapeMismatch("table dimensions disagree with header".into()));
            }
            let flat_r: Vec<f64> = rewards.into_iter().flatten().flatten().collect();
            let flat_p: Vec<f64> = transitions.into_iter().flatten().flatten().collect();
            let game =
                TabularMarkovGame::new(&file.action_counts, ns, flat_r, flat_p, file.discount, file.initial_dist)?;
            Ok(LoadedGame::Tabular(Instance {
                game,
                metadata: file.metadata,
            }))
        }
        (None, None) => {
            let spec = file
                .metadata
                .congestion
                .clone()
                .ok_or_else(|| CoreError::Parse("game file has neither tables nor a generator spec".into()))?;
            let built = build_congestion(&spec, file.discount)?;
            let metadata = file.metadata;
            match built.instance {
                Some(inst) => Ok(LoadedGame::Tabular(Instance {
                    game: inst.game,
                    metadata,
                })),
                None => Ok(LoadedGame::Implicit {
                    game: built.implicit,
                    metadata,
                }),
            }
        }
        _ => Err(CoreError::Parse("game file has only one of rewards and transitions".into())),
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CoreError::Parse(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))
}

pub fn read_game(path: &Path) -> Result<LoadedGame> {
    load_game_file(read_json(path)?)
}

pub fn read_policy(path: &Path) -> Result<JointPolicy> {
    let probs: Vec<Vec<Vec<f64>>> = read_json(path)?;
    JointPolicy::new(probs)
}

/// How the starting policy is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    #[default]
    Uniform,
    /// `(1 - radius) * uniform + radius * random`, seeded by the run seed.
    Perturbed { radius: f64 },
    /// Policy JSON file, relative to the config file.
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pga,
    Psga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HorizonKind {
    #[default]
    Geometric,
    Episodic,
}

fn default_max_iters() -> usize {
    10_000
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_log_every() -> usize {
    1
}
fn default_batch() -> usize {
    1
}
fn default_episode_length() -> usize {
    20
}

/// Run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Shared step size.
    #[serde(default)]
    pub step_size: Option<f64>,
    /// One step size per agent.
    #[serde(default)]
    pub step_sizes: Option<Vec<f64>>,
    /// Per-agent step sizes drawn uniformly from `[lo, hi]` with the run seed.
    #[serde(default)]
    pub step_size_range: Option<[f64; 2]>,
    /// Use the step size (and for PSGA the exploration) from the
    /// convergence bounds.
    #[serde(default)]
    pub theoretical: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub horizon_mode: HorizonKind,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Nash gap cadence in iterations; 0 computes it at the end only.
    #[serde(default)]
    pub nash_every: usize,
    #[serde(default)]
    pub certified_stop: bool,
    #[serde(default)]
    pub start_policy: StartPolicy,
}

impl RunConfig {
    pub fn horizon(&self) -> HorizonMode {
        match self.horizon_mode {
            HorizonKind::Geometric => HorizonMode::Geometric,
            HorizonKind::Episodic => HorizonMode::Episodic {
                length: self.episode_length,
            },
        }
    }
}

/// Fixed CSV header for `num_agents` agents.
pub fn trace_header(num_agents: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "nash_gap", "mapping_norm", "potential"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..num_agents).map(|i| format!("V_{i}")));
    h.push("l1_accuracy".into());
    h
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Writes one row per logged iterate. Missing quantities are empty cells.
pub fn write_trace_csv<W: Write>(out: W, trace: &LearningTrace, num_agents: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| CoreError::Io(e.to_string());
    w.write_record(trace_header(num_agents)).map_err(map)?;
    for r in &trace.records {
        let mut row = vec![
            r.iter.to_string(),
            opt(r.nash_gap),
            format!("{:e}", r.mapping_norm),
            opt(r.potential),
        ];
        for i in 0..num_agents {
            row.push(opt(r.values.get(i).copied()));
        }
        row.push(format!("{:e}", r.l1_accuracy));
        w.write_record(&row).map_err(map)?;
    }
    w.flush().map_err(|e| CoreError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{build_blackhole, CongestionSpec};

    #[test]
    fn dense_round_trip() {
        let inst = build_blackhole(0.9).unwrap();
        let file = game_file_from_instance(&inst);
        let text = serde_json::to_string(&file).unwrap();
        let back = load_game_file(serde_json::from_str(&text).unwrap()).unwrap();
        let g = back.tabular().unwrap();
        assert_eq!(g, &inst.game);
        assert_eq!(back.metadata(), &inst.metadata);
    }

    #[test]
    fn generated_congestion_round_trip() {
        let b = build_congestion(&CongestionSpec::new(4, 3), 0.9).unwrap();
        let inst = b.instance.unwrap();
        let file = game_file_from_instance(&inst);
        assert!(file.rewards.is_none());
        assert_eq!(file.num_joint_actions, 81);
        let back = load_game_file(file).unwrap();
        assert_eq!(back.tabular().unwrap(), &inst.game);
    }

    #[test]
    fn oversized_congestion_stays_implicit() {
        let b = build_congestion(&CongestionSpec::new(16, 5), 0.99).unwrap();
        let file = game_file_from_generator(&b.implicit, &b.metadata);
        assert_eq!(file.num_joint_actions, 5u128.pow(16));
        let back = load_game_file(file).unwrap();
        assert!(back.tabular().is_none());
        assert!(matches!(back.require_tabular(), Err(CoreError::TooLarge { .. })));
        assert_eq!(back.as_markov().num_agents(), 16);
    }

    #[test]
    fn malformed_files_rejected() {
        let mut file = game_file_from_instance(&build_blackhole(0.5).unwrap());
        file.format = "other".into();
        assert!(load_game_file(file.clone()).is_err());
        file.format = GAME_FORMAT.into();
        file.transitions = None;
        assert!(load_game_file(file).is_err());
    }

    #[test]
    fn run_config_defaults_and_unknown_fields() {
        let cfg: RunConfig = serde_json::from_str(r#"{"algorithm": "pga", "step_size": 0.01}"#).unwrap();
        assert_eq!(cfg.max_iters, 10_000);
        assert_eq!(cfg.start_policy, StartPolicy::Uniform);
        assert!(serde_json::from_str::<RunConfig>(r#"{"algorithm": "pga", "bogus": 1}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(
            r#"{"algorithm": "psga", "horizon_mode": "episodic", "episode_length": 20,
                "start_policy": {"perturbed": {"radius": 0.1}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.horizon(), HorizonMode::Episodic { length: 20 });
    }

    #[test]
    fn csv_header_is_fixed() {
        assert_eq!(
            trace_header(2).join(","),
            "iter,nash_gap,mapping_norm,potential,V_0,V_1,l1_accuracy"
        );
    }
}
