use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use mpg_core::analysis::congestion::{symmetric_nash_search, SymmetricEquilibrium};
use mpg_core::analysis::{
    deterministic_nash_search, nash_gap, potential_value, verify_mpg, NashReport, PotentialCertificate, VerifyOptions,
    DEFAULT_PROFILE_BUDGET,
};
use mpg_core::game::{occupancy, state_values, validate_game, Violation};
use mpg_core::instances::{
    build_blackhole, build_chain_mpg, build_congestion, build_random_mpg, build_xor_zerosum, CongestionGame,
    CongestionSpec, InstanceMetadata, PenaltyForm, RandomKind, RandomSizes,
};
use mpg_core::io::{
    game_file_from_generator, game_file_from_instance, read_game, read_json, read_policy, write_json, write_trace_csv, Algorithm, LoadedGame, RunConfig, StartPolicy,
};
use mpg_core::learning::{
    perturbed_uniform, random_step_sizes, run_pga, run_psga, theoretical_schedule, LearningTrace, PgaConfig,
    PsgaConfig, ScheduleInputs, ScheduleMode, StepSizes,
};
use mpg_core::{CoreError, JointPolicy, MarkovGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::{sha256_file, sidecar, RunManifest};
use crate::{
    EvaluateArgs, InstanceName, MakeInstanceArgs, NashSearchArgs, PenaltyFormArg, RandomFamily, RunArgs, VerifyArgs,
};

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => write_json(path, value)?,
        None => {
            let text = serde_json::to_string_pretty(value)?;
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(CoreError::Io(format!("stdout: {e}")).into());
                }
            }
        }
    }
    Ok(())
}

fn congestion_spec(args: &MakeInstanceArgs) -> anyhow::Result<CongestionSpec> {
    if let Some(path) = &args.spec {
        return Ok(read_json(path)?);
    }
    let mut spec = CongestionSpec::new(args.agents, args.facilities);
    if args.asymmetric {
        spec = spec.asymmetric();
    }
    spec.leak_p = args.leak_p;
    spec.leak_q = args.leak_q;
    spec.penalty_form = match args.penalty_form {
        PenaltyFormArg::Weight => PenaltyForm::Weight,
        PenaltyFormArg::Flat => PenaltyForm::Flat,
    };
    Ok(spec)
}

#[derive(Serialize)]
struct MakeInstanceReport<'a> {
    output: String,
    num_agents: usize,
    num_states: usize,
    num_joint_actions: u128,
    exact_path_disabled: bool,
    metadata: &'a InstanceMetadata,
}

pub fn make_instance(args: &MakeInstanceArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("make-instance");
    let file = match args.instance {
        InstanceName::Xor => game_file_from_instance(&build_xor_zerosum(args.gamma)?),
        InstanceName::Blackhole => game_file_from_instance(&build_blackhole(args.gamma)?),
        InstanceName::Chain => game_file_from_instance(&build_chain_mpg(args.gamma, args.p0)?),
        InstanceName::Congestion => {
            let built = build_congestion(&congestion_spec(args)?, args.gamma)?;
            match &built.instance {
                Some(inst) => game_file_from_instance(inst),
                None => game_file_from_generator(&built.implicit, &built.metadata),
            }
        }
        InstanceName::Random => {
            manifest.seed = Some(args.seed);
            let kind = match args.kind {
                RandomFamily::Team => RandomKind::Team,
                RandomFamily::C1 => RandomKind::C1,
            };
            let sizes = RandomSizes {
                action_counts: args.actions.clone(),
                num_states: args.states,
                gamma: args.gamma,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            game_file_from_instance(&build_random_mpg(kind, &sizes, &mut rng)?)
        }
    };
    write_json(&args.output, &file)?;
    manifest.game_sha256 = Some(sha256_file(&args.output)?);
    manifest.outputs.push(args.output.display().to_string());
    manifest.finish(&sidecar(&args.output))?;
    emit(
        &MakeInstanceReport {
            output: args.output.display().to_string(),
            num_agents: file.num_agents,
            num_states: file.num_states,
            num_joint_actions: file.num_joint_actions,
            exact_path_disabled: file.metadata.exact_path_disabled,
            metadata: &file.metadata,
        },
        None,
    )
}

fn resolve_start(
    cfg: &RunConfig,
    game: &dyn MarkovGame,
    config_path: &Path,
) -> anyhow::Result<Option<JointPolicy>> {
    Ok(match &cfg.start_policy {
        StartPolicy::Uniform => None,
        StartPolicy::Perturbed { radius } => Some(perturbed_uniform(
            game.action_counts(),
            game.num_states(),
            *radius,
            cfg.seed,
        )?),
        StartPolicy::File { path } => {
            let base = config_path.parent().unwrap_or(Path::new("."));
            Some(read_policy(&base.join(path))?)
        }
    })
}

fn resolve_steps(cfg: &RunConfig, game: &dyn MarkovGame, eta_theory: Option<f64>) -> anyhow::Result<StepSizes> {
    let n = game.num_agents();
    let chosen = [
        cfg.step_size.is_some(),
        cfg.step_sizes.is_some(),
        cfg.step_size_range.is_some(),
        cfg.theoretical,
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if chosen != 1 {
        return Err(CoreError::InvalidArgument(
            "set exactly one of step_size, step_sizes, step_size_range and theoretical".into(),
        )
        .into());
    }
    if let Some(eta) = cfg.step_size {
        return Ok(StepSizes::Shared(eta));
    }
    if let Some(v) = &cfg.step_sizes {
        return Ok(StepSizes::PerAgent(v.clone()));
    }
    if let Some([lo, hi]) = cfg.step_size_range {
        if !(lo > 0.0 && lo <= hi) {
            return Err(CoreError::InvalidArgument(format!("step_size_range [{lo}, {hi}] is invalid")).into());
        }
        return Ok(random_step_sizes(n, lo, hi, cfg.seed));
    }
    Ok(StepSizes::Shared(eta_theory.expect("theoretical step size computed")))
}

#[derive(Serialize)]
struct Occupancies {
    safe: Vec<usize>,
    distancing: Vec<usize>,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    algorithm: &'a str,
    horizon: Option<mpg_core::gradient::HorizonMode>,
    stop_reason: mpg_core::learning::StopReason,
    iterations: usize,
    step_sizes: StepSizes,
    alpha: Option<f64>,
    final_nash_gap: Option<f64>,
    best_iterate: Option<usize>,
    best_nash_gap: Option<f64>,
    mismatch_estimate: Option<f64>,
    ascent_slack: Option<f64>,
    distance_to_deterministic: f64,
    final_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    occupancy: Option<Occupancies>,
    final_policy_file: &'static str,
    trace_file: &'static str,
    manifest_file: &'static str,
}

fn occupancies(policy: &JointPolicy, num_facilities: usize) -> Occupancies {
    let choices = policy.argmax_actions();
    let mut occ = [vec![0usize; num_facilities], vec![0usize; num_facilities]];
    for agent in &choices {
        for (s, &a) in agent.iter().enumerate().take(2) {
            occ[s][a] += 1;
        }
    }
    let [safe, distancing] = occ;
    Occupancies { safe, distancing }
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start("run");
    let loaded = read_game(&args.game)?;
    let cfg: RunConfig = read_json(&args.config)?;
    manifest.game_sha256 = Some(sha256_file(&args.game)?);
    manifest.config_sha256 = Some(sha256_file(&args.config)?);
    manifest.seed = Some(cfg.seed);
    let game = loaded.as_markov();
    let start_policy = resolve_start(&cfg, game, &args.config)?;
    let potential = loaded.metadata().potential.clone();
    let (trace, steps, alpha): (LearningTrace, StepSizes, Option<f64>) = match cfg.algorithm {
        Algorithm::Pga => {
            let tab = loaded.require_tabular()?;
            let eta_theory = if cfg.theoretical {
                Some(theoretical_schedule(&ScheduleInputs::for_game(tab, cfg.epsilon), ScheduleMode::Exact)?.eta)
            } else {
                None
            };
            let steps = resolve_steps(&cfg, game, eta_theory)?;
            let mut pc = PgaConfig::new(1.0, cfg.max_iters, cfg.epsilon);
            pc.step_sizes = steps.clone();
            pc.start_policy = start_policy;
            pc.log_every = cfg.log_every;
            pc.nash_every = cfg.nash_every;
            pc.certified_stop = cfg.certified_stop;
            pc.potential = potential;
            (run_pga(tab, &pc)?, steps, None)
        }
        Algorithm::Psga => {
            let schedule = if cfg.theoretical {
                Some(theoretical_schedule(&ScheduleInputs::for_game(game, cfg.epsilon), ScheduleMode::Stochastic)?)
            } else {
                None
            };
            let alpha = match (cfg.alpha, schedule) {
                (Some(a), _) => a,
                (None, Some(s)) => s.alpha,
                (None, None) => {
                    return Err(CoreError::InvalidArgument("psga needs alpha (or theoretical)".into()).into())
                }
            };
            let steps = resolve_steps(&cfg, game, schedule.map(|s| s.eta))?;
            let mut pc = PsgaConfig::new(1.0, cfg.max_iters, alpha, cfg.batch, cfg.horizon(), cfg.seed);
            pc.step_sizes = steps.clone();
            pc.epsilon = cfg.epsilon;
            pc.start_policy = start_policy;
            pc.log_every = cfg.log_every;
            pc.nash_every = cfg.nash_every;
            pc.certified_stop = cfg.certified_stop;
            pc.potential = if loaded.tabular().is_some() { potential } else { None };
            (run_psga(game, &pc)?, steps, Some(alpha))
        }
    };

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CoreError::Io(format!("{}: {e}", args.out_dir.display())))?;
    let trace_path = args.out_dir.join("trace.csv");
    let writer = BufWriter::new(
        File::create(&trace_path).map_err(|e| CoreError::Io(format!("{}: {e}", trace_path.display())))?,
    );
    write_trace_csv(writer, &trace, game.num_agents())?;
    let policy_path = args.out_dir.join("final_policy.json");
    write_json(&policy_path, &trace.final_policy)?;
    let final_values = match loaded.tabular() {
        Some(tab) => {
            let v = state_values(tab, &trace.final_policy)?;
            let mu = vec![1.0 / tab.num_states() as f64; tab.num_states()];
            v.iter().map(|vi| vi.iter().zip(&mu).map(|(a, b)| a * b).sum()).collect()
        }
        None => Vec::new(),
    };
    let summary = RunSummary {
        algorithm: &trace.algorithm,
        horizon: trace.horizon,
        stop_reason: trace.stop_reason,
        iterations: trace.iterations,
        step_sizes: steps,
        alpha,
        final_nash_gap: trace.final_gap,
        best_iterate: trace.best_iterate,
        best_nash_gap: trace.best_gap,
        mismatch_estimate: trace.mismatch,
        ascent_slack: trace.ascent_slack,
        distance_to_deterministic: trace.final_policy.distance_to_deterministic(),
        final_values,
        occupancy: loaded
            .metadata()
            .congestion
            .as_ref()
            .map(|spec| occupancies(&trace.final_policy, spec.num_facilities)),
        final_policy_file: "final_policy.json",
        trace_file: "trace.csv",
        manifest_file: "manifest.json",
    };
    let summary_path = args.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    for p in [&trace_path, &summary_path, &policy_path] {
        manifest.outputs.push(p.display().to_string());
    }
    manifest.finish(&args.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
enum NashListing {
    Enumeration {
        profiles_checked: u128,
        count: usize,
        profiles: Vec<Vec<Vec<usize>>>,
    },
    Symmetric {
        count: usize,
        equilibria: Vec<SymmetricEquilibrium>,
    },
    Skipped {
        reason: String,
    },
}

impl NashListing {
    fn finding(&self) -> Option<&'static str> {
        match self {
            NashListing::Enumeration { count: 0, .. } | NashListing::Symmetric { count: 0, .. } => {
                Some("no deterministic Nash policy profile exists")
            }
            NashListing::Skipped { .. } => None,
            _ => Some("deterministic Nash policy profiles found"),
        }
    }
}

fn search(loaded: &LoadedGame, budget: u128) -> anyhow::Result<NashListing> {
    let meta = loaded.metadata();
    if let Some(spec) = &meta.congestion {
        let game = CongestionGame::new(spec, loaded.as_markov().discount())?;
        let equilibria = symmetric_nash_search(&game)?;
        return Ok(NashListing::Symmetric {
            count: equilibria.len(),
            equilibria,
        });
    }
    let tab = loaded.require_tabular()?;
    let profiles = deterministic_nash_search(tab, budget)?;
    let ns = tab.num_states() as u32;
    Ok(NashListing::Enumeration {
        profiles_checked: tab.action_counts().iter().map(|&k| (k as u128).pow(ns)).product(),
        count: profiles.len(),
        profiles,
    })
}

#[derive(Serialize)]
struct VerifyReport {
    game: String,
    validation: Vec<Violation>,
    certificate: PotentialCertificate,
    deterministic_nash: NashListing,
    #[serde(skip_serializing_if = "Option::is_none")]
    finding: Option<&'static str>,
}

pub fn verify(args: &VerifyArgs) -> anyhow::Result<()> {
    let loaded = read_game(&args.game)?;
    let tab = loaded.require_tabular()?;
    let meta = loaded.metadata();
    let opts = VerifyOptions {
        cycle_samples: args.samples,
        deviation_samples: args.deviations,
        seed: args.seed,
        analytic: meta.potential.clone(),
        ordinal: meta.ordinal_candidate.clone(),
        ..VerifyOptions::default()
    };
    let certificate = verify_mpg(tab, &opts).context("verification failed")?;
    let listing = if args.skip_nash_search {
        NashListing::Skipped {
            reason: "not requested".into(),
        }
    } else {
        match search(&loaded, DEFAULT_PROFILE_BUDGET) {
            Ok(l) => l,
            Err(e) => match e.downcast_ref::<CoreError>() {
                Some(CoreError::TooLarge { .. }) => NashListing::Skipped {
                    reason: format!("{e}"),
                },
                _ => return Err(e),
            },
        }
    };
    let report = VerifyReport {
        game: args.game.display().to_string(),
        validation: validate_game(tab),
        certificate,
        finding: listing.finding(),
        deterministic_nash: listing,
    };
    write_with_manifest("verify", &report, args.output.as_deref(), &args.game, Some(args.seed))
}

fn write_with_manifest<T: Serialize>(
    command: &str,
    value: &T,
    output: Option<&Path>,
    game: &Path,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut manifest = RunManifest::start(command);
    manifest.game_sha256 = Some(sha256_file(game)?);
    manifest.seed = seed;
    emit(value, output)?;
    if let Some(path) = output {
        manifest.outputs.push(path.display().to_string());
        manifest.finish(&sidecar(path))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NashSearchReport {
    game: String,
    deterministic_nash: NashListing,
    #[serde(skip_serializing_if = "Option::is_none")]
    finding: Option<&'static str>,
}

pub fn nash_search(args: &NashSearchArgs) -> anyhow::Result<()> {
    let loaded = read_game(&args.game)?;
    let listing = search(&loaded, args.budget as u128)?;
    let report = NashSearchReport {
        game: args.game.display().to_string(),
        finding: listing.finding(),
        deterministic_nash: listing,
    };
    write_with_manifest("nash-search", &report, args.output.as_deref(), &args.game, None)
}

#[derive(Serialize)]
struct EvaluateReport {
    game: String,
    policy: Option<PathBuf>,
    /// `V[agent][state]`.
    values: Vec<Vec<f64>>,
    /// `V^i` under the game's initial distribution.
    start_values: Vec<f64>,
    occupancy: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potential: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nash: Option<NashReport>,
}

pub fn evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let loaded = read_game(&args.game)?;
    let tab = loaded.require_tabular()?;
    let policy = match &args.policy {
        Some(p) => read_policy(p)?,
        None => JointPolicy::uniform(tab.action_counts(), tab.num_states()),
    };
    policy.check_shape(tab.action_counts(), tab.num_states())?;
    let rho = tab.initial_dist().to_vec();
    let values = state_values(tab, &policy)?;
    let start_values = values
        .iter()
        .map(|v| v.iter().zip(&rho).map(|(a, b)| a * b).sum())
        .collect();
    let potential = match &loaded.metadata().potential {
        Some(h) => Some(potential_value(tab, h, &policy, &rho)?),
        None => None,
    };
    let report = EvaluateReport {
        game: args.game.display().to_string(),
        policy: args.policy.clone(),
        occupancy: occupancy(tab, &policy, &rho)?,
        values,
        start_values,
        potential,
        nash: if args.nash {
            Some(nash_gap(tab, &policy, mpg_core::analysis::NASH_TOL)?)
        } else {
            None
        },
    };
    write_with_manifest("evaluate", &report, args.output.as_deref(), &args.game, None)
}
