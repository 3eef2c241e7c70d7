//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p dynkin-core --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{barriers, classical_minmax, clipped, rough_barriers};
use dynkin_core::constrained::DEFAULT_SCHEDULE;
use dynkin_core::dynkin::SweepMode;
use dynkin_core::properties::{
    coherence_check, comparison_check, random_bounded_barriers, random_parametric_instance,
    stopped_terminal_check,
};
use dynkin_core::rbsde::{band_violation, clamp_identity_error, min_k_increment};
use dynkin_core::scenario::{parse_config, run_scenario};
use dynkin_core::{
    constrained_report, continuity_from_below_check, game_value, run_ladder, skorokhod_residuals,
    solve_drbsde, solve_drbsde_penalized, verify_saddle, ConstraintSpec,
    Driver, GameInstance, GeneratorSpec, LadderOptions, Lattice, LatticeMode, NodeFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Full-tree N = 3 instances: (label, generator, L, U).
fn saddle_instances() -> Vec<(&'static str, GeneratorSpec, NodeFunction, NodeFunction)> {
    let kappa = GeneratorSpec::KappaAbs { kappa: 0.5 };
    vec![
        ("kappa/annotated", kappa, clipped(1.0, 1.0, -1.0, 0.0), clipped(1.0, 1.0, -1.0, 1.0)),
        ("zero/annotated", GeneratorSpec::Zero, clipped(1.0, 1.0, -1.0, 0.0), clipped(1.0, 1.0, -1.0, 1.0)),
        ("zero/shifted", GeneratorSpec::Zero, clipped(0.5, 1.0, 0.0, 0.0), clipped(0.5, 1.0, 0.0, 0.75)),
        ("drift", GeneratorSpec::LinearZ { b: 0.3 }, clipped(0.4, 0.8, 0.0, 0.0), common::affine(1.6, 0.2, 0.0)),
        ("kappa/mixed", kappa, clipped(0.0, 1.0, 0.3, 0.0), clipped(0.0, 1.0, 0.3, 0.1)),
    ]
}

fn game(mode: LatticeMode, n: usize, g: GeneratorSpec, l: NodeFunction, u: NodeFunction) -> GameInstance {
    let lat = Lattice::new(1.0, n, mode).unwrap();
    let b = barriers(&lat, l, u);
    GameInstance::new(lat, g.into(), b).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut all_pairs = true;
    for (_, g, l, u) in saddle_instances() {
        let start = Instant::now();
        let rep = verify_saddle(&game(LatticeMode::FullTree, 3, g, l, u)).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        all_pairs &= rep.pairs_checked == 128 * 128 && rep.mode == SweepMode::Pairwise;
        worst = worst.max(rep.max_left_violation).max(rep.max_right_violation);
    }
    verdict(
        worst <= 1e-10 && all_pairs && slowest < Duration::from_secs(5),
        format!(
            "{} instances x 16384 pairs, worst violation {worst:.1e}, slowest {:.2}s",
            saddle_instances().len(),
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for (_, g, l, u) in saddle_instances() {
        let rep = verify_saddle(&game(LatticeMode::FullTree, 3, g, l, u)).map_err(|e| e.to_string())?;
        worst = worst
            .max((rep.lower_value - rep.value_root).abs())
            .max((rep.upper_value - rep.value_root).abs());
    }
    let start = Instant::now();
    let mut rec_worst = 0.0f64;
    let mut rules_ok = true;
    for (_, g, l, u) in saddle_instances().into_iter().filter(|c| c.0.starts_with("kappa")) {
        let rep = verify_saddle(&game(LatticeMode::Recombining, 5, g, l, u)).map_err(|e| e.to_string())?;
        rules_ok &= rep.mode == SweepMode::SingleSided && rep.pairs_checked == 2 * 32_768;
        rec_worst = rec_worst.max(rep.worst_error());
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-10 && rec_worst <= 1e-10 && rules_ok && elapsed < Duration::from_secs(60),
        format!(
            "full tree |V - X| {worst:.1e}; recombining N=5 (32768 rules/side) {rec_worst:.1e} in {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut band, mut kmin, mut sk, mut clamp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let gens = [
        GeneratorSpec::Zero,
        GeneratorSpec::LinearZ { b: -0.4 },
        GeneratorSpec::KappaAbs { kappa: 0.5 },
        GeneratorSpec::LinearYZ { a: 0.3, b: 0.2 },
    ];
    for trial in 0..50 {
        let mode = if trial % 2 == 0 { LatticeMode::FullTree } else { LatticeMode::Recombining };
        let lat = Lattice::new(rng.random_range(0.2..1.0), rng.random_range(2..=9), mode).unwrap();
        let b = rough_barriers(&lat, &mut rng);
        let xi: Vec<f64> = lat
            .nodes_at(lat.steps())
            .map(|n| {
                let (l, u) = (b.lower().get(n), b.upper().get(n));
                l + rng.random_range(0.0..=1.0) * (u - l)
            })
            .collect();
        let d = Driver::plain(gens[trial % gens.len()]);
        let sol = solve_drbsde(&lat, &d, &b, &xi).map_err(|e| e.to_string())?;
        band = band.max(band_violation(&sol, &b));
        kmin = kmin.min(min_k_increment(&sol));
        let (rp, rm) = skorokhod_residuals(&sol, &b);
        sk = sk.max(rp).max(rm);
        clamp = clamp.max(clamp_identity_error(&lat, &d, &sol, &b).map_err(|e| e.to_string())?);
    }
    verdict(
        band == 0.0 && kmin >= 0.0 && sk == 0.0 && clamp <= 1e-12,
        format!("50 instances: band {band:.1e}, min dK {kmin:.1e}, Skorokhod {sk:.1e}, clamp {clamp:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lat = Lattice::new(1.0, 6, LatticeMode::FullTree).unwrap();
    let (mut cmp, mut coh, mut stop) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let gens = [
        GeneratorSpec::Zero,
        GeneratorSpec::LinearZ { b: 0.7 },
        GeneratorSpec::KappaAbs { kappa: 0.5 },
        GeneratorSpec::LinearYZ { a: 0.5, b: -0.3 },
    ];
    for g in gens {
        let d = Driver::plain(g);
        cmp = cmp.max(comparison_check(&lat, &d, &mut rng, 100).map_err(|e| e.to_string())?);
        if d.is_coherent() {
            coh = coh.max(coherence_check(&lat, &d, &mut rng, 50).map_err(|e| e.to_string())?);
            let s = stopped_terminal_check(&lat, &d, &mut rng, 50).map_err(|e| e.to_string())?;
            stop = stop.max(s.expect("full tree"));
        }
    }
    verdict(
        cmp <= 1e-12 && coh <= 1e-10 && stop <= 1e-12,
        format!("comparison {:.1e}, coherence {coh:.1e}, stopped terminal {stop:.1e}", cmp.max(0.0)),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lat = Lattice::new(0.25, 20, LatticeMode::Recombining).unwrap();
    let d = Driver::plain(GeneratorSpec::KappaAbs { kappa: 0.5 });
    let mut increase = 0.0f64;
    let (mut active, mut strict) = (0, 0);
    for _ in 0..10 {
        let (b, xi) = random_parametric_instance(&lat, &mut rng);
        let sol = solve_drbsde(&lat, &d, &b, &xi).map_err(|e| e.to_string())?;
        let errs: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&p| solve_drbsde_penalized(&lat, &d, &b, &xi, p).map(|(x, _)| (x.root() - sol.x.root()).abs()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        increase = errs.windows(2).map(|w| w[1] - w[0]).fold(increase, f64::max);
        if sol.kplus_increment.iter().chain(sol.kminus_increment.iter()).any(|(_, v)| v > 0.0) {
            active += 1;
            strict += usize::from(errs[1] < errs[0]);
        }
    }
    verdict(
        increase <= 0.0 && strict == active,
        format!("10 instances: largest error increase {increase:.1e}, strict first doubling {strict}/{active} active"),
    )
}

fn criterion_6() -> Outcome {
    let lat = Lattice::new(0.3, 3, LatticeMode::FullTree).unwrap();
    let g = GeneratorSpec::KappaAbs { kappa: 0.5 };
    let opts = LadderOptions { bound: 3.0, require_increasing_lower: true };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut instances = vec![barriers(
        &lat,
        common::affine(0.2, -0.3, 1.0),
        common::affine(0.3, -0.3, 1.0),
    )];
    instances.extend((0..10).map(|_| random_bounded_barriers(&lat, &mut rng, 3.0)));
    let (mut mono, mut sweep, mut reduction) = (0.0f64, 0.0f64, 0.0f64);
    let mut hits = true;
    for b in instances {
        let gi = GameInstance::new(lat.clone(), g.into(), b).unwrap();
        let phi = ConstraintSpec::NegZ { lambda: 0.2 };
        let ladder = run_ladder(&gi, &phi, &DEFAULT_SCHEDULE, opts).map_err(|e| e.to_string())?;
        let rep = constrained_report(&ladder, &gi, &phi).map_err(|e| e.to_string())?;
        mono = mono.max(ladder.monotonicity_violation);
        hits &= ladder.tau_monotone && ladder.sigma_monotone;
        sweep = sweep
            .max(rep.left_violation.unwrap_or(f64::INFINITY))
            .max(rep.right_violation.unwrap_or(f64::INFINITY))
            .max(rep.saddle_gap);
        let none = ConstraintSpec::None;
        let flat = run_ladder(&gi, &none, &DEFAULT_SCHEDULE, opts).map_err(|e| e.to_string())?;
        let plain = game_value(&gi).map_err(|e| e.to_string())?;
        reduction = reduction.max(flat.top().solution.x.max_abs_diff(&plain.x));
    }
    verdict(
        mono <= 1e-12 && hits && reduction <= 1e-12 && sweep <= 1e-8,
        format!("11 instances: ladder order {mono:.1e}, hit order {hits}, phi = 0 reduction {reduction:.1e}, sweeps {sweep:.1e}"),
    )
}

fn criterion_7() -> Outcome {
    let lat = Lattice::new(0.3, 3, LatticeMode::FullTree).unwrap();
    let d = Driver::plain(GeneratorSpec::KappaAbs { kappa: 0.5 });
    let phi = ConstraintSpec::NegZ { lambda: 0.2 };
    let xi: Vec<f64> = common::affine(0.2, -0.3, 1.0).materialize(&lat).terminal().to_vec();
    let seq = dynkin_core::constrained::scaled_sequence(&xi, 64);
    let rep = continuity_from_below_check(&lat, &d, &phi, &DEFAULT_SCHEDULE, &seq, &xi).map_err(|e| e.to_string())?;
    verdict(
        rep.max_decrease <= 1e-12 && rep.max_overshoot <= 1e-12 && rep.terminal_gap <= 1e-8 && rep.interchange_gap <= 1e-8,
        format!(
            "monotone {:.1e}, terminal gap {:.3e} (tol 1e-8), interchange {:.3e}, 1/n-extrapolated gap {:.1e}",
            rep.max_decrease, rep.terminal_gap, rep.interchange_gap, rep.extrapolation_gap
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let mode = if trial % 2 == 0 { LatticeMode::FullTree } else { LatticeMode::Recombining };
        let lat = Lattice::new(rng.random_range(0.2..2.0), rng.random_range(1..=10), mode).unwrap();
        let b = rough_barriers(&lat, &mut rng);
        let want = classical_minmax(&lat, b.lower(), b.upper());
        let got = game_value(&GameInstance::new(lat, GeneratorSpec::Zero.into(), b).unwrap()).map_err(|e| e.to_string())?;
        for (level, row) in want.iter().enumerate() {
            for (a, b) in got.x.level(level).iter().zip(row) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    verdict(worst <= 1e-12, format!("20 instances, max nodewise gap {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = fs::read_dir(&root)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    let mut mismatches = Vec::new();
    for f in &files {
        let s = parse_config(f, &[]).map_err(|e| format!("{}: {e}", f.display()))?;
        let a = run_scenario(&s).map_err(|e| e.to_string())?;
        let b = run_scenario(&s).map_err(|e| e.to_string())?;
        let golden_csv = fs::read_to_string(root.join(format!("golden/{}.values.csv", s.name))).unwrap_or_default();
        let golden_json = fs::read_to_string(root.join(format!("golden/{}.summary.json", s.name))).unwrap_or_default();
        let status_ok = golden_json.contains(if a.passed() { "\"status\": \"pass\"" } else { "\"status\": \"fail\"" });
        if a.values_csv() != golden_csv || a.summary_json() != golden_json || a.values_csv() != b.values_csv() || !status_ok {
            mismatches.push(s.name);
        }
    }
    verdict(
        mismatches.is_empty() && !files.is_empty(),
        format!("{} shipped scenarios, mismatches {mismatches:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("saddle inequality", criterion_1),
        ("value identity", criterion_2),
        ("reflected structure", criterion_3),
        ("g-expectation axioms", criterion_4),
        ("penalized reflection", criterion_5),
        ("constrained ladder", criterion_6),
        ("continuity from below", criterion_7),
        ("classical reduction", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {}: {name}: {detail}", i + 1);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
