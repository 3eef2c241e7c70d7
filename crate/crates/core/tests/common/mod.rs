//! Independent oracles and instance builders shared by the integration
//! suites. Nothing here calls the solvers under test.

#![allow(dead_code)]

use dynkin_core::{AdaptedProcess, Barriers, Lattice, LatticeMode, NodeFunction, NodeId};
use rand::Rng;

/// Classical zero-driver Dynkin value by min-max backward induction:
/// `V = min(U, max(L, (V_up + V_down) / 2))`, `V(T) = L(T)`.
pub fn classical_minmax(lat: &Lattice, lower: &AdaptedProcess, upper: &AdaptedProcess) -> Vec<Vec<f64>> {
    let n = lat.steps();
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    v[n] = lower.terminal().to_vec();
    for level in (0..n).rev() {
        let width = lat.level_size(level);
        v[level] = (0..width)
            .map(|k| {
                let (up, down) = match lat.mode() {
                    LatticeMode::FullTree => (2 * k + 1, 2 * k),
                    LatticeMode::Recombining => (k + 1, k),
                };
                let node = NodeId::new(level, k);
                let mean = 0.5 * (v[level + 1][up] + v[level + 1][down]);
                upper.get(node).min(lower.get(node).max(mean))
            })
            .collect();
    }
    v
}

/// Barriers from `(t, w)` functions.
pub fn barriers(lat: &Lattice, lower: NodeFunction, upper: NodeFunction) -> Barriers {
    Barriers::new(lat, lower.materialize(lat), upper.materialize(lat)).unwrap()
}

pub fn clipped(a0: f64, a1: f64, a2: f64, offset: f64) -> NodeFunction {
    NodeFunction::Clipped { a0, a1, a2, offset }
}

pub fn affine(a0: f64, a1: f64, a2: f64) -> NodeFunction {
    NodeFunction::Affine { a0, a1, a2 }
}

/// Nodewise random band with `L` uniform in `[-1, 1)` and some zero widths.
pub fn rough_barriers<R: Rng>(lat: &Lattice, rng: &mut R) -> Barriers {
    let lower = AdaptedProcess::from_fn(lat, |_| rng.random_range(-1.0..1.0));
    let upper = AdaptedProcess::from_fn(lat, |n| {
        let w = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..1.0) };
        lower.get(n) + w
    });
    Barriers::new(lat, lower, upper).unwrap()
}
