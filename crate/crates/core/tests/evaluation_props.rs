use mpg_core::analysis::{nash_gap, potential_value, PotentialHandle};
use mpg_core::game::{random_simplex_point, state_values, value_exact, JointPolicy, TabularMarkovGame};
use mpg_core::geometry::{project_policy, project_simplex};
use mpg_core::gradient::{exact_gradient, finite_difference_gradient, normwise_relative_error};
use mpg_core::instances::{build_random_mpg, RandomKind, RandomSizes};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64, counts: &[usize], ns: usize, gamma: f64) -> TabularMarkovGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trans = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    let mu = random_simplex_point(ns, &mut rng);
    TabularMarkovGame::from_fn(
        counts,
        ns,
        gamma,
        mu,
        |_, _, _| rng.random_range(-1.0..1.0),
        |_, _, out| out.copy_from_slice(&random_simplex_point(out.len(), &mut trans)),
    )
    .unwrap()
}

fn random_policy(seed: u64, counts: &[usize], ns: usize) -> JointPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    JointPolicy::new(
        counts
            .iter()
            .map(|&k| (0..ns).map(|_| random_simplex_point(k, &mut rng)).collect())
            .collect(),
    )
    .unwrap()
}

/// Policy evaluation by fixed-point iteration, independent of the LU path.
fn iterative_values(game: &TabularMarkovGame, pol: &JointPolicy) -> Vec<Vec<f64>> {
    let ns = game.num_states();
    let space = game.space();
    let mut v = vec![vec![0.0; ns]; game.num_agents()];
    let sweeps = ((1e-14f64).ln() / game.discount().max(1e-3).ln()).ceil() as usize + 5;
    for _ in 0..sweeps {
        let mut next = vec![vec![0.0; ns]; game.num_agents()];
        for s in 0..ns {
            for j in 0..game.num_joint() {
                let a = space.decode_vec(j);
                let p: f64 = a.iter().enumerate().map(|(i, &ai)| pol.probs[i][s][ai]).product();
                let row = game.transition_row(s, j);
                for (i, vi) in v.iter().enumerate() {
                    let cont: f64 = row.iter().zip(vi).map(|(t, x)| t * x).sum();
                    next[i][s] += p * (game.reward(i, s, j) + game.discount() * cont);
                }
            }
        }
        v = next;
    }
    v
}

fn sizes() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (prop::collection::vec(1usize..=3, 1..=3), 1usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn values_match_fixed_point_iteration((counts, ns) in sizes(), seed in any::<u64>(), gamma in 0.0f64..0.9) {
        let game = random_game(seed, &counts, ns, gamma);
        let pol = random_policy(seed ^ 1, &counts, ns);
        let lu = state_values(&game, &pol).unwrap();
        let it = iterative_values(&game, &pol);
        for (a, b) in lu.iter().flatten().zip(it.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn advantages_average_to_zero((counts, ns) in sizes(), seed in any::<u64>(), gamma in 0.0f64..0.99) {
        let game = random_game(seed, &counts, ns, gamma);
        let pol = random_policy(seed ^ 2, &counts, ns);
        let rep = value_exact(&game, &pol, game.initial_dist()).unwrap();
        prop_assert!((rep.occupancy.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(rep.occupancy.iter().all(|&d| d >= -1e-15));
        let space = game.space();
        for i in 0..game.num_agents() {
            for s in 0..ns {
                let mean: f64 = (0..game.num_joint())
                    .map(|j| {
                        let a = space.decode_vec(j);
                        let p: f64 = a.iter().enumerate().map(|(k, &ak)| pol.probs[k][s][ak]).product();
                        p * rep.advantages[i][s][j]
                    })
                    .sum();
                prop_assert!(mean.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences((counts, ns) in sizes(), seed in any::<u64>(), gamma in 0.0f64..0.95) {
        let game = random_game(seed, &counts, ns, gamma);
        let pol = random_policy(seed ^ 3, &counts, ns);
        let mu = game.initial_dist().to_vec();
        for i in 0..counts.len() {
            let ex = exact_gradient(&game, &pol, i, &mu).unwrap();
            let fd = finite_difference_gradient(&game, &pol, i, &mu, 1e-5).unwrap();
            prop_assert!(normwise_relative_error(&ex, &fd) <= 1e-6);
        }
    }

    #[test]
    fn nash_gains_are_nonnegative_and_tight((counts, ns) in sizes(), seed in any::<u64>(), gamma in 0.0f64..0.95) {
        let game = random_game(seed, &counts, ns, gamma);
        let pol = random_policy(seed ^ 4, &counts, ns);
        let rep = nash_gap(&game, &pol, 1e-9).unwrap();
        prop_assert!(rep.gains.iter().flatten().all(|&g| g >= -1e-9));
        // Playing the best response leaves that agent no further gain.
        for (i, br) in rep.best_responses.iter().enumerate() {
            let comp = JointPolicy::deterministic(&[counts[i]], &[br.clone()]).probs.remove(0);
            let dev = nash_gap(&game, &pol.with_agent(i, comp), 1e-9).unwrap();
            prop_assert!(dev.gains[i].iter().all(|&g| g.abs() <= 1e-8));
        }
    }

    #[test]
    fn potential_tracks_unilateral_deviations(
        counts in prop::collection::vec(2usize..=3, 2..=3),
        ns in 1usize..=3,
        seed in any::<u64>(),
        team in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = if team { RandomKind::Team } else { RandomKind::C1 };
        let sizes = RandomSizes { action_counts: counts.clone(), num_states: ns, gamma: 0.9 };
        let inst = build_random_mpg(kind, &sizes, &mut rng).unwrap();
        let handle: PotentialHandle = inst.metadata.potential.clone().unwrap();
        let pol = random_policy(seed ^ 5, &counts, ns);
        let i = rng.random_range(0..counts.len());
        let dev = pol.with_agent(i, random_policy(seed ^ 6, &counts, ns).probs.swap_remove(i));
        let v0 = state_values(&inst.game, &pol).unwrap();
        let v1 = state_values(&inst.game, &dev).unwrap();
        for s in 0..ns {
            let mut start = vec![0.0; ns];
            start[s] = 1.0;
            let dphi = potential_value(&inst.game, &handle, &dev, &start).unwrap()
                - potential_value(&inst.game, &handle, &pol, &start).unwrap();
            prop_assert!((dphi - (v1[i][s] - v0[i][s])).abs() <= 1e-9);
        }
    }

    #[test]
    fn joint_projection_is_blockwise(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..=4),
    ) {
        let raw = vec![rows.clone()];
        let joint = project_policy(&raw, &[3]).unwrap();
        for (s, row) in rows.iter().enumerate() {
            prop_assert_eq!(&project_simplex(row).unwrap(), &joint.probs[0][s]);
        }
    }
}
