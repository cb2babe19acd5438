//! Shared fixtures for the criterion benchmarks.

use mpg_core::game::random_policy;
use mpg_core::instances::{build_congestion, build_random_mpg, CongestionGame, CongestionSpec, RandomKind, RandomSizes};
use mpg_core::{JointPolicy, TabularMarkovGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded C1 game with the given action counts and state count, plus an
/// interior policy on it.
pub fn c1_fixture(action_counts: &[usize], num_states: usize, seed: u64) -> (TabularMarkovGame, JointPolicy) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = RandomSizes {
        action_counts: action_counts.to_vec(),
        num_states,
        gamma: 0.9,
    };
    let inst = build_random_mpg(RandomKind::C1, &sizes, &mut rng).expect("valid sizes");
    let policy = random_policy(action_counts, num_states, 0.0, &mut rng);
    (inst.game, policy)
}

/// The implicit congestion game with `n` agents and `f` facilities.
pub fn congestion_fixture(n: usize, f: usize) -> CongestionGame {
    build_congestion(&CongestionSpec::new(n, f), 0.99).expect("valid spec").implicit
}
