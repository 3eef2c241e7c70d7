//! Property-based invariants over random lattices, drivers and barriers.

mod common;

use dynkin_core::constrained::DEFAULT_SCHEDULE;
use dynkin_core::properties::random_bounded_barriers;
use dynkin_core::rbsde::{band_violation, clamp_identity_error, min_k_increment};
use dynkin_core::{
    game_value, run_ladder, skorokhod_residuals, solve_bsde, solve_drbsde, solve_drbsde_penalized,
    AdaptedProcess, Barriers, ConstraintSpec, Driver, GameInstance, GeneratorSpec, LadderOptions,
    Lattice, LatticeMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generator() -> impl Strategy<Value = GeneratorSpec> {
    prop_oneof![
        Just(GeneratorSpec::Zero),
        (-1.0..1.0f64).prop_map(|b| GeneratorSpec::LinearZ { b }),
        (0.0..1.0f64).prop_map(|kappa| GeneratorSpec::KappaAbs { kappa }),
    ]
}

fn lattice() -> impl Strategy<Value = Lattice> {
    (0.1..1.0f64, 2usize..=8, any::<bool>()).prop_map(|(t, n, full)| {
        let mode = if full { LatticeMode::FullTree } else { LatticeMode::Recombining };
        Lattice::new(t, n, mode).unwrap()
    })
}

fn terminal_in_band<R: Rng>(lat: &Lattice, b: &Barriers, rng: &mut R) -> Vec<f64> {
    lat.nodes_at(lat.steps())
        .map(|n| {
            let (l, u) = (b.lower().get(n), b.upper().get(n));
            l + rng.random_range(0.0..=1.0) * (u - l)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflected_solution_structure(lat in lattice(), g in generator(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Driver::plain(g);
        let b = common::rough_barriers(&lat, &mut rng);
        let xi = terminal_in_band(&lat, &b, &mut rng);
        let sol = solve_drbsde(&lat, &d, &b, &xi).unwrap();
        prop_assert_eq!(band_violation(&sol, &b), 0.0);
        prop_assert!(min_k_increment(&sol) >= 0.0);
        prop_assert_eq!(skorokhod_residuals(&sol, &b), (0.0, 0.0));
        prop_assert!(clamp_identity_error(&lat, &d, &sol, &b).unwrap() <= 1e-12);
    }

    #[test]
    fn comparison_of_terminals(lat in lattice(), g in generator(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Driver::plain(g);
        let width = lat.level_size(lat.steps());
        let eta: Vec<f64> = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xi: Vec<f64> = eta.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
        let (a, _) = solve_bsde(&lat, &d, &xi).unwrap();
        let (b, _) = solve_bsde(&lat, &d, &eta).unwrap();
        for (node, v) in a.iter() {
            prop_assert!(b.get(node) <= v + 1e-12);
        }
    }

    #[test]
    fn translation_and_scaling(lat in lattice(), g in generator(), seed in any::<u64>(), c in -3.0..3.0f64, s in 0.0..4.0f64) {
        // coherent y-free drivers commute with constants; these families
        // are also positively homogeneous
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Driver::plain(g);
        let width = lat.level_size(lat.steps());
        let xi: Vec<f64> = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (x, _) = solve_bsde(&lat, &d, &xi).unwrap();
        let shifted: Vec<f64> = xi.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = xi.iter().map(|v| v * s).collect();
        let (xs, _) = solve_bsde(&lat, &d, &shifted).unwrap();
        let (xm, _) = solve_bsde(&lat, &d, &scaled).unwrap();
        for (node, v) in x.iter() {
            prop_assert!((xs.get(node) - (v + c)).abs() <= 1e-12);
            prop_assert!((xm.get(node) - s * v).abs() <= 1e-12 * (1.0 + s * v.abs()));
        }
    }

    #[test]
    fn game_value_monotone_in_barriers(lat in lattice(), g in generator(), seed in any::<u64>(), lift in 0.0..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = common::rough_barriers(&lat, &mut rng);
        let raised = Barriers::new(
            &lat,
            AdaptedProcess::from_fn(&lat, |n| b.lower().get(n) + lift),
            AdaptedProcess::from_fn(&lat, |n| b.upper().get(n) + lift),
        ).unwrap();
        let v = game_value(&GameInstance::new(lat.clone(), g.into(), b).unwrap()).unwrap();
        let w = game_value(&GameInstance::new(lat.clone(), g.into(), raised).unwrap()).unwrap();
        for (node, a) in v.x.iter() {
            prop_assert!(w.x.get(node) >= a - 1e-12);
            prop_assert!(w.x.get(node) <= a + lift + 1e-12);
        }
    }

    #[test]
    fn collapsed_band_pins_the_value(lat in lattice(), g in generator(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = AdaptedProcess::from_fn(&lat, |_| rng.random_range(-1.0..1.0));
        let b = Barriers::new(&lat, l.clone(), l.clone()).unwrap();
        let sol = game_value(&GameInstance::new(lat.clone(), g.into(), b).unwrap()).unwrap();
        prop_assert_eq!(sol.x, l);
    }

    #[test]
    fn one_sided_penalization_increases_to_the_solution(seed in any::<u64>(), g in generator()) {
        // only L can bind, so X_p rises with p and stays below X
        let lat = Lattice::new(0.25, 10, LatticeMode::Recombining).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lower = AdaptedProcess::from_fn(&lat, |_| rng.random_range(-1.0..1.0));
        let upper = AdaptedProcess::constant(&lat, 1e6);
        let b = Barriers::new(&lat, lower, upper).unwrap();
        let xi = b.lower_terminal();
        let d = Driver::plain(g);
        let x = solve_drbsde(&lat, &d, &b, &xi).unwrap().x;
        let mut prev = f64::NEG_INFINITY;
        for p in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let (xp, _) = solve_drbsde_penalized(&lat, &d, &b, &xi, p).unwrap();
            prop_assert!(xp.root() >= prev - 1e-12);
            prop_assert!(xp.root() <= x.root() + 1e-12);
            prev = xp.root();
        }
    }

    #[test]
    fn recombining_and_full_tree_agree(t in 0.1..1.0f64, n in 2usize..=8, g in generator(), a in -1.0..1.0f64, width in 0.0..1.0f64) {
        // Markov barriers give the same value on both lattices
        let full = Lattice::new(t, n, LatticeMode::FullTree).unwrap();
        let rec = Lattice::new(t, n, LatticeMode::Recombining).unwrap();
        let lower = common::clipped(0.3, a, -0.5, 0.0);
        let upper = common::clipped(0.3, a, -0.5, width);
        let vf = game_value(&GameInstance::new(full.clone(), g.into(), common::barriers(&full, lower, upper)).unwrap()).unwrap();
        let vr = game_value(&GameInstance::new(rec.clone(), g.into(), common::barriers(&rec, lower, upper)).unwrap()).unwrap();
        prop_assert!((vf.x.root() - vr.x.root()).abs() <= 1e-12);
    }

    #[test]
    fn ladder_is_monotone(seed in any::<u64>(), lambda in 0.0..0.2f64, full in any::<bool>()) {
        let mode = if full { LatticeMode::FullTree } else { LatticeMode::Recombining };
        let lat = Lattice::new(0.3, 3, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_bounded_barriers(&lat, &mut rng, 2.0);
        let gi = GameInstance::new(lat, GeneratorSpec::KappaAbs { kappa: 0.5 }.into(), b).unwrap();
        let phi = ConstraintSpec::NegZ { lambda };
        let opts = LadderOptions { bound: 2.0, require_increasing_lower: true };
        let ladder = run_ladder(&gi, &phi, &DEFAULT_SCHEDULE, opts).unwrap();
        prop_assert!(ladder.monotone_scheme);
        prop_assert!(ladder.monotonicity_violation <= 1e-12);
        prop_assert!(ladder.tau_monotone && ladder.sigma_monotone);
    }
}
