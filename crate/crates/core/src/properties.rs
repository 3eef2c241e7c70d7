//! Randomized checks of the g-expectation axioms and random instance
//! builders shared by the scenario pipelines and the test suites.
//!
//! Every check returns the worst discrepancy it saw; callers compare it
//! against their tolerance.

use rand::Rng;

use crate::bsde::{evaluate_at_rule, evaluate_rule_process, solve_bsde, stopped_terminal, StoppingRule};
use crate::error::Result;
use crate::generators::Driver;
use crate::lattice::{AdaptedProcess, Lattice, LatticeMode, NodeId};
use crate::rbsde::Barriers;

/// Independent uniform node values in `[lo, hi)`.
pub fn random_process<R: Rng>(lat: &Lattice, rng: &mut R, lo: f64, hi: f64) -> AdaptedProcess {
    AdaptedProcess::from_fn(lat, |_| rng.random_range(lo..hi))
}

/// Random barriers with `L` uniform in `[-1, 1)` and a band width that is
/// zero at roughly one node in ten.
pub fn random_barriers<R: Rng>(lat: &Lattice, rng: &mut R) -> Barriers {
    let lower = random_process(lat, rng, -1.0, 1.0);
    let upper = AdaptedProcess::from_fn(lat, |n| {
        let width = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.0..1.5)
        };
        lower.get(n) + width
    });
    Barriers::new(lat, lower, upper).expect("upper built above lower")
}

/// Random barriers inside `[0, bound]` with `L` nondecreasing along paths.
pub fn random_bounded_barriers<R: Rng>(lat: &Lattice, rng: &mut R, bound: f64) -> Barriers {
    let n = lat.steps();
    let mut lower = AdaptedProcess::zeros(lat);
    // L(node) = base + drift(level) + small node bump, increasing in level
    let base = rng.random_range(0.0..0.3 * bound);
    let mut floor = base;
    for level in 0..=n {
        let bump_cap = 0.3 * bound / (n + 1) as f64;
        let level_floor = floor;
        let mut level_max = level_floor;
        for node in lat.nodes_at(level) {
            let v = level_floor + rng.random_range(0.0..bump_cap);
            level_max = level_max.max(v);
            lower.set(node, v);
        }
        floor = level_max;
    }
    let upper = AdaptedProcess::from_fn(lat, |node| {
        let l = lower.get(node);
        if rng.random_bool(0.1) {
            l
        } else {
            rng.random_range(l..bound)
        }
    });
    Barriers::new(lat, lower, upper).expect("upper built above lower")
}

/// Random barriers from the clipped `(t, w)` family with a terminal drawn
/// at a fixed fraction of the terminal band:
/// `L = max(0, c0 + c1 w + c2 t)`, `U = L + max(0, c3 + c4 w + c5 t) / 2 + offset`.
pub fn random_parametric_instance<R: Rng>(lat: &Lattice, rng: &mut R) -> (Barriers, Vec<f64>) {
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let offset = rng.random_range(0.0..0.5);
    let theta = rng.random_range(0.0..1.0);
    let tw = |n: NodeId| (lat.time(n.level), lat.walk_value(n).expect("lattice node"));
    let lower = AdaptedProcess::from_fn(lat, |n| {
        let (t, w) = tw(n);
        (c[0] + c[1] * w + c[2] * t).max(0.0)
    });
    let upper = AdaptedProcess::from_fn(lat, |n| {
        let (t, w) = tw(n);
        lower.get(n) + 0.5 * (c[3] + c[4] * w + c[5] * t).max(0.0) + offset
    });
    let barriers = Barriers::new(lat, lower, upper).expect("upper built above lower");
    let terminal = lat
        .nodes_at(lat.steps())
        .map(|n| {
            let l = barriers.lower().get(n);
            l + theta * (barriers.upper().get(n) - l)
        })
        .collect();
    (barriers, terminal)
}

/// Random hitting rule: each nonterminal node joins with probability `p`.
pub fn random_rule<R: Rng>(lat: &Lattice, rng: &mut R, p: f64) -> StoppingRule {
    StoppingRule::from_predicate(lat, |_| rng.random_bool(p))
}

/// Comparison: `xi >= eta` nodewise implies `X(xi) >= X(eta)` everywhere.
///
/// Returns the largest `X(eta) - X(xi)` seen (zero or below when the
/// property holds).
pub fn comparison_check<R: Rng>(
    lat: &Lattice,
    driver: &Driver,
    rng: &mut R,
    trials: usize,
) -> Result<f64> {
    let width = lat.level_size(lat.steps());
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let eta: Vec<f64> = (0..width).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xi: Vec<f64> = eta
            .iter()
            .map(|v| {
                if rng.random_bool(0.3) {
                    *v
                } else {
                    v + rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let (x_xi, _) = solve_bsde(lat, driver, &xi)?;
        let (x_eta, _) = solve_bsde(lat, driver, &eta)?;
        for (node, a) in x_xi.iter() {
            worst = worst.max(x_eta.get(node) - a);
        }
    }
    Ok(worst)
}

/// Tower property `E_tau(E_sigma(zeta)) = E_sigma(zeta)` for `tau` entered
/// no later than `sigma`. Returns the largest absolute difference at the
/// root.
pub fn coherence_check<R: Rng>(
    lat: &Lattice,
    driver: &Driver,
    rng: &mut R,
    trials: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let zeta = random_process(lat, rng, -1.0, 2.0);
        let sigma = random_rule(lat, rng, 0.25);
        let extra = random_rule(lat, rng, 0.25);
        let tau = sigma.union(&extra);
        let inner = evaluate_rule_process(lat, driver, |n| Some(zeta.get(n)), &sigma)?;
        let nested = evaluate_at_rule(lat, driver, |n| Some(inner.get(n)), &tau, NodeId::ROOT)?;
        let direct = evaluate_at_rule(lat, driver, |n| Some(zeta.get(n)), &sigma, NodeId::ROOT)?;
        worst = worst.max((nested - direct).abs());
    }
    Ok(worst)
}

/// Evaluating a variable frozen at `sigma` up to `sigma` or up to the
/// horizon gives the same value. Full-tree lattices only; returns `None`
/// otherwise.
pub fn stopped_terminal_check<R: Rng>(
    lat: &Lattice,
    driver: &Driver,
    rng: &mut R,
    trials: usize,
) -> Result<Option<f64>> {
    if lat.mode() != LatticeMode::FullTree {
        return Ok(None);
    }
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let zeta = random_process(lat, rng, -1.0, 2.0);
        let sigma = random_rule(lat, rng, 0.3);
        let payoff = |n: NodeId| Some(zeta.get(n));
        let to_sigma = evaluate_at_rule(lat, driver, payoff, &sigma, NodeId::ROOT)?;
        let frozen = stopped_terminal(lat, payoff, &sigma)?;
        let (x, _) = solve_bsde(lat, driver, &frozen)?;
        worst = worst.max((to_sigma - x.root()).abs());
    }
    Ok(Some(worst))
}
