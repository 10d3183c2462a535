mod common;

use proptest::prelude::*;
use smmcts::engine::{run, run_with_checkpoints, EngineConfig, ProfileKind, SearchTree, Variant};
use smmcts::game::{generate_random_game, RandomGameParams};
use smmcts::rng::rng_from_seed;
use smmcts::solver::backward_induction;
use smmcts::{GameSpec, MatrixGame, Player};

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bookkeeping_holds_after_any_number_of_simulations(
        depth in 1usize..=3,
        bf in 1usize..=3,
        v in variant(),
        gamma in 0.01f64..0.5,
        seed in any::<u64>(),
        sims in 1u64..3000,
    ) {
        let game = generate_random_game(&RandomGameParams::uniform(depth, bf, seed)).unwrap();
        let mut tree = SearchTree::new(&game, EngineConfig::variant(v, gamma, seed).unwrap());
        let mut rng = rng_from_seed(seed);
        for _ in 0..sims {
            let u = tree.run_simulation(&mut rng);
            prop_assert!((0.0..=1.0).contains(&u));
        }
        if let Err(e) = common::check_conservation(&tree) {
            prop_assert!(false, "{}", e);
        }
        let root = tree.node(game.root()).unwrap();
        prop_assert_eq!(root.updates, sims);
    }

    #[test]
    fn same_seed_same_tree(v in variant(), seed in any::<u64>()) {
        let game = generate_random_game(&RandomGameParams::uniform(2, 2, seed)).unwrap();
        let a = run(&game, EngineConfig::variant(v, 0.1, seed).unwrap(), 500).unwrap();
        let b = run(&game, EngineConfig::variant(v, 0.1, seed).unwrap(), 500).unwrap();
        prop_assert_eq!(a.diagnostics, b.diagnostics);
        prop_assert_eq!(a.profile, b.profile);
    }
}

#[test]
fn one_iteration_expands_one_path() {
    let game = generate_random_game(&RandomGameParams::uniform(3, 2, 1)).unwrap();
    let r = run(&game, EngineConfig::variant(Variant::Rm, 0.05, 1).unwrap(), 1).unwrap();
    assert_eq!(r.diagnostics.tree_size, 2);
    assert_eq!(r.diagnostics.simulations, 1);
}

#[test]
fn root_joint_counts_grow_without_bound() {
    let game = generate_random_game(&RandomGameParams::uniform(2, 2, 4)).unwrap();
    let mut snapshots = Vec::new();
    run_with_checkpoints(
        &game,
        EngineConfig::variant(Variant::Rm, 0.05, 4).unwrap(),
        200_000,
        &[1_000, 10_000, 100_000, 200_000],
        |_, tree| snapshots.push(tree.node(game.root()).unwrap().joint_counts.clone()),
    )
    .unwrap();
    for w in snapshots.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b > a), "{:?}", snapshots);
    }
}

#[test]
fn root_mean_approaches_the_value() {
    let game = generate_random_game(&RandomGameParams::uniform(2, 2, 21)).unwrap();
    let v = backward_induction(&game).root_value();
    for variant in Variant::ALL {
        let r = run(&game, EngineConfig::variant(variant, 0.05, 21).unwrap(), 1_000_000).unwrap();
        let mean = r.diagnostics.root_mean.unwrap();
        assert!((mean - v).abs() <= 2.0 * 0.05 + 0.05, "{variant}: mean {mean} value {v}");
    }
}

#[test]
fn frequencies_track_average_strategies_at_the_root() {
    let m = MatrixGame::random(3, 3, &mut rng_from_seed(5));
    let game = GameSpec::from_matrix(&m).unwrap();
    let r = run(&game, EngineConfig::variant(Variant::Rm, 0.05, 5).unwrap(), 100_000).unwrap();
    let freq = r.tree.extract_profile(ProfileKind::EmpiricalFrequencies).profile;
    let avg = r.tree.extract_profile(ProfileKind::AverageStrategy).profile;
    for player in [Player::One, Player::Two] {
        let a = freq.player(player).get(game.root()).unwrap();
        let b = avg.player(player).get(game.root()).unwrap();
        let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d <= 0.01, "{player:?}: {d}");
    }
}

#[test]
fn empirical_strategy_matches_extracted_profile() {
    let game = generate_random_game(&RandomGameParams::uniform(3, 2, 8)).unwrap();
    let r = run(&game, EngineConfig::variant(Variant::Exp3m, 0.1, 8).unwrap(), 5000).unwrap();
    assert_eq!(r.tree.empirical_strategy(Player::One), r.profile.profile.p1);
    assert_eq!(r.tree.empirical_strategy(Player::Two), r.profile.profile.p2);
}
