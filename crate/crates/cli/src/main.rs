//! `mpg-lab`: build Markov games, run independent policy gradient, verify
//! potential structure and search for deterministic equilibria.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpg_core::CoreError;

/// Exit status for malformed input or invalid parameters.
const EXIT_VALIDATION: u8 = 2;
/// Exit status when a computation would exceed an enumeration cap.
const EXIT_RESOURCE: u8 = 3;
/// Exit status when an internal invariant fails (e.g. PGA losing potential).
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "mpg-lab", version, about = "Markov potential game laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a game and write it as JSON.
    MakeInstance(MakeInstanceArgs),
    /// Run PGA or PSGA on a game.
    ///
    /// Writes trace.csv (columns: iter, nash_gap, mapping_norm, potential,
    /// V_0 .. V_{n-1}, l1_accuracy; empty cells where a quantity was not
    /// computed), summary.json, final_policy.json and manifest.json into
    /// the output directory.
    Run(RunArgs),
    /// Certify or refute potential structure and search deterministic equilibria.
    Verify(VerifyArgs),
    /// Enumerate deterministic Nash profiles.
    NashSearch(NashSearchArgs),
    /// Evaluate one joint policy exactly.
    Evaluate(EvaluateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum InstanceName {
    Xor,
    Blackhole,
    Chain,
    Congestion,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RandomFamily {
    Team,
    C1,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PenaltyFormArg {
    Weight,
    Flat,
}

#[derive(Args, Debug)]
struct MakeInstanceArgs {
    instance: InstanceName,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Return probability from s1 to s0 (chain).
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    /// Number of agents (congestion).
    #[arg(long, default_value_t = 8)]
    agents: usize,
    /// Number of facilities (congestion).
    #[arg(long, default_value_t = 4)]
    facilities: usize,
    /// Per-facility penalties decreasing towards the best facility (congestion).
    #[arg(long)]
    asymmetric: bool,
    /// Probability of leaving the safe state regardless of counts (congestion).
    #[arg(long, default_value_t = 0.0)]
    leak_p: f64,
    /// Probability of staying in the distancing state regardless of counts (congestion).
    #[arg(long, default_value_t = 0.0)]
    leak_q: f64,
    #[arg(long, value_enum, default_value_t = PenaltyFormArg::Weight)]
    penalty_form: PenaltyFormArg,
    /// Congestion spec as a JSON file; overrides the other congestion flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Family of a random game.
    #[arg(long, value_enum, default_value_t = RandomFamily::C1)]
    kind: RandomFamily,
    /// Comma-separated action counts of a random game.
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    actions: Vec<usize>,
    /// Number of states of a random game.
    #[arg(long, default_value_t = 3)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    game: PathBuf,
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    game: PathBuf,
    /// Random four-cycles to test.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Unilateral deviations for the identity and ordinal checks.
    #[arg(long, default_value_t = 1000)]
    deviations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the deterministic equilibrium search.
    #[arg(long)]
    skip_nash_search: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NashSearchArgs {
    #[arg(long)]
    game: PathBuf,
    /// Largest number of deterministic profiles to enumerate.
    #[arg(long, default_value_t = mpg_core::analysis::DEFAULT_PROFILE_BUDGET as u64)]
    budget: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    game: PathBuf,
    /// Policy JSON; uniform if omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Also compute the Nash gap.
    #[arg(long)]
    nash: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MPG_LAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CoreError::InvalidArgument(format!("MPG_LAB_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::TooLarge { .. }) => EXIT_RESOURCE,
        Some(CoreError::Divergence { .. }) => EXIT_INVARIANT,
        Some(_) => EXIT_VALIDATION,
        None => EXIT_INVARIANT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::MakeInstance(a) => commands::make_instance(&a),
        Command::Run(a) => commands::run(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::NashSearch(a) => commands::nash_search(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;
    use clap::CommandFactory;

    #[test]
    fn exit_codes_follow_error_kind() {
        let too_large = CoreError::TooLarge {
            what: "joint action space",
            size: 10,
            cap: 1,
        };
        assert_eq!(exit_code(&too_large.into()), EXIT_RESOURCE);
        let diverged = CoreError::Divergence { iteration: 3, drop: 1.0 };
        assert_eq!(exit_code(&diverged.into()), EXIT_INVARIANT);
        let wrapped = Err::<(), _>(CoreError::Parse("x".into())).context("reading game").unwrap_err();
        assert_eq!(exit_code(&wrapped), EXIT_VALIDATION);
    }

    #[test]
    fn arguments_parse() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["mpg-lab", "make-instance", "random", "--actions", "2,3,4", "--output", "g.json"])
            .unwrap();
        match cli.command {
            Command::MakeInstance(a) => assert_eq!(a.actions, vec![2, 3, 4]),
            _ => panic!("wrong subcommand"),
        }
    }
}
