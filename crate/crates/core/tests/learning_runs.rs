use mpg_core::analysis::{nash_gap, potential_value, NASH_TOL};
use mpg_core::gradient::HorizonMode;
use mpg_core::instances::{build_chain_mpg, build_random_mpg, RandomKind, RandomSizes};
use mpg_core::io::{game_file_from_instance, load_game_file, trace_header, write_trace_csv};
use mpg_core::learning::{perturbed_uniform, run_pga, run_psga, PgaConfig, PsgaConfig, StopReason};
use mpg_core::JointPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pga_on_team_game_climbs_to_an_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sizes = RandomSizes {
        action_counts: vec![2, 3],
        num_states: 3,
        gamma: 0.8,
    };
    let inst = build_random_mpg(RandomKind::Team, &sizes, &mut rng).unwrap();
    let handle = inst.metadata.potential.clone().unwrap();
    let mut cfg = PgaConfig::new(0.05, 50_000, 1e-4);
    cfg.potential = Some(handle.clone());
    cfg.log_every = 50;
    let trace = run_pga(&inst.game, &cfg).unwrap();
    assert_eq!(trace.stop_reason, StopReason::Stationary);
    assert!(trace.final_gap.unwrap() <= 1e-4);
    let phis: Vec<f64> = trace.records.iter().map(|r| r.potential.unwrap()).collect();
    assert!(phis.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let mu = vec![1.0 / 3.0; 3];
    let start = potential_value(&inst.game, &handle, &JointPolicy::uniform(&[2, 3], 3), &mu).unwrap();
    assert!(*phis.last().unwrap() >= start);
    // L1 accuracy ends at zero and starts at the largest distance.
    assert_eq!(trace.records.last().unwrap().l1_accuracy, 0.0);
}

#[test]
fn psga_trace_depends_only_on_seed() {
    let inst = build_chain_mpg(0.9, 0.5).unwrap();
    let run = |seed| {
        let mut cfg = PsgaConfig::new(0.01, 40, 0.1, 4, HorizonMode::Episodic { length: 10 }, seed);
        cfg.log_every = 10;
        run_psga(&inst.game, &cfg).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.final_policy, b.final_policy);
    assert_ne!(a.final_policy, c.final_policy);
    assert_eq!(a.records.len(), 5);
    assert!(a.records.iter().all(|r| r.values.len() == 2));
}

#[test]
fn psga_on_chain_game_reduces_the_gap() {
    let inst = build_chain_mpg(0.9, 0.5).unwrap();
    let start = perturbed_uniform(inst.game.action_counts(), inst.game.num_states(), 0.2, 1).unwrap();
    let before = nash_gap(&inst.game, &start, NASH_TOL).unwrap().gap;
    let mut cfg = PsgaConfig::new(0.02, 3000, 0.02, 16, HorizonMode::Geometric, 3);
    cfg.start_policy = Some(start);
    cfg.log_every = 3000;
    let trace = run_psga(&inst.game, &cfg).unwrap();
    let after = trace.final_gap.unwrap();
    assert!(after < 0.5 * before, "gap {before} -> {after}");
}

#[test]
fn trace_csv_round_trips_through_a_file_format() {
    let inst = build_chain_mpg(0.9, 0.5).unwrap();
    let file = game_file_from_instance(&inst);
    let text = serde_json::to_string(&file).unwrap();
    let loaded = load_game_file(serde_json::from_str(&text).unwrap()).unwrap();
    let game = loaded.require_tabular().unwrap();
    let mut cfg = PgaConfig::new(0.05, 30, 1e-3);
    cfg.log_every = 10;
    cfg.nash_every = 20;
    cfg.potential = loaded.metadata().potential.clone();
    let trace = run_pga(game, &cfg).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace, 2).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, trace_header(2));
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), trace.records.len());
    assert_eq!(&rows[1][1], "");
    assert!(rows[2][1].parse::<f64>().is_ok());
    assert!(rows.iter().all(|r| r[3].parse::<f64>().is_ok()));
}
