//! Dynkin stopping game under a g-expectation.
//!
//! The maximizer picks a stopping time `tau` and receives `L(tau)`, the
//! minimizer picks `sigma` and pays `U(sigma)` if it stops strictly first:
//!
//! ```text
//! R(tau, sigma) = L(tau) 1{tau <= sigma} + U(sigma) 1{sigma < tau}
//! ```
//!
//! with terminal `xi = L(T)`. The candidate value is the reflected solution
//! `X`, and the candidate saddle point stops at the first contact of `X`
//! with the respective barrier.

use serde::Serialize;

use crate::bsde::{evaluate_at_rule, StoppingRule};
use crate::error::{Error, Result};
use crate::generators::Driver;
use crate::lattice::{Lattice, NodeId};
use crate::rbsde::{solve_drbsde, Barriers, SolutionTriple};

/// Contact tolerance for `X = L` and `X = U`.
pub const HIT_TOL: f64 = 1e-9;

/// Largest number of eligible nodes in a rule enumeration (`2^15` rules).
pub const MAX_ENUM_NODES: usize = 15;

/// Largest rule count per side for which all pairs are swept.
pub const MAX_PAIRWISE_RULES: usize = 256;

#[derive(Debug, Clone)]
pub struct GameInstance {
    pub lattice: Lattice,
    pub driver: Driver,
    pub barriers: Barriers,
}

impl GameInstance {
    pub fn new(lattice: Lattice, driver: Driver, barriers: Barriers) -> Result<Self> {
        if !driver.is_coherent() {
            return Err(Error::NonCoherentGenerator);
        }
        if !barriers.lower().matches(&lattice) {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            lattice,
            driver,
            barriers,
        })
    }

    /// Same lattice and barriers, different driver.
    pub fn with_driver(&self, driver: Driver) -> Result<Self> {
        Self::new(self.lattice.clone(), driver, self.barriers.clone())
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.barriers.lower_terminal()
    }
}

/// Reflected solution with `xi = L(T)`; `X` is the game value process.
pub fn game_value(gi: &GameInstance) -> Result<SolutionTriple> {
    solve_drbsde(&gi.lattice, &gi.driver, &gi.barriers, &gi.terminal())
}

/// First-contact rules `tau* = inf{X = L}` and `sigma* = inf{X = U}` from
/// `from_level` on, both capped at the horizon.
pub fn saddle_times(
    lat: &Lattice,
    sol: &SolutionTriple,
    barriers: &Barriers,
    from_level: usize,
) -> (StoppingRule, StoppingRule) {
    let tau = StoppingRule::from_predicate(lat, |n| {
        n.level >= from_level && (sol.x.get(n) - barriers.lower().get(n)).abs() <= HIT_TOL
    });
    let sigma = StoppingRule::from_predicate(lat, |n| {
        n.level >= from_level && (sol.x.get(n) - barriers.upper().get(n)).abs() <= HIT_TOL
    });
    (tau, sigma)
}

/// `E^g_from[R(tau, sigma)]` under an arbitrary driver.
///
/// At nodes in both stop sets the maximizer's reward `L` is paid.
pub fn evaluate_pair_with(
    lat: &Lattice,
    driver: &Driver,
    barriers: &Barriers,
    tau: &StoppingRule,
    sigma: &StoppingRule,
    from: NodeId,
) -> Result<f64> {
    let stop = tau.union(sigma);
    let payoff = |n: NodeId| {
        if tau.contains(n) {
            Some(barriers.lower().get(n))
        } else if sigma.contains(n) {
            Some(barriers.upper().get(n))
        } else {
            None
        }
    };
    evaluate_at_rule(lat, driver, payoff, &stop, from)
}

pub fn evaluate_pair(
    gi: &GameInstance,
    tau: &StoppingRule,
    sigma: &StoppingRule,
    from: NodeId,
) -> Result<f64> {
    evaluate_pair_with(&gi.lattice, &gi.driver, &gi.barriers, tau, sigma, from)
}

/// Every hitting rule whose interior nodes lie at `from_level` or later.
#[derive(Debug, Clone)]
pub struct RuleEnumerator {
    base: StoppingRule,
    eligible: Vec<NodeId>,
    next: u64,
    end: u64,
}

impl RuleEnumerator {
    pub fn len(&self) -> usize {
        (self.end - self.next) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.next >= self.end
    }

    pub fn eligible(&self) -> &[NodeId] {
        &self.eligible
    }
}

impl Iterator for RuleEnumerator {
    type Item = StoppingRule;

    fn next(&mut self) -> Option<StoppingRule> {
        if self.next >= self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let mut rule = self.base.clone();
        for (bit, node) in self.eligible.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                rule.insert(*node);
            }
        }
        Some(rule)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.len(), Some(self.len()))
    }
}

impl ExactSizeIterator for RuleEnumerator {}

pub fn enumerate_rules(lat: &Lattice, from_level: usize) -> Result<RuleEnumerator> {
    let eligible: Vec<NodeId> = (from_level..lat.steps())
        .flat_map(|l| lat.nodes_at(l))
        .collect();
    if eligible.len() > MAX_ENUM_NODES {
        return Err(Error::EnumerationTooLarge {
            eligible: eligible.len(),
            cap: MAX_ENUM_NODES,
        });
    }
    Ok(RuleEnumerator {
        base: StoppingRule::terminal_only(lat),
        end: 1u64 << eligible.len(),
        eligible,
        next: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Every (tau, sigma) pair; lower and upper values are exact.
    Pairwise,
    /// Deviations of one player against the other's saddle rule; lower and
    /// upper values are the bounds `min_sigma R(tau*, .)` and
    /// `max_tau R(., sigma*)`.
    SingleSided,
}

#[derive(Debug, Clone)]
pub struct SaddleReport {
    pub value_root: f64,
    pub saddle_value: f64,
    pub tau_star: StoppingRule,
    pub sigma_star: StoppingRule,
    pub lower_value: f64,
    pub upper_value: f64,
    /// `max_tau (R(tau, sigma*) - R(tau*, sigma*))^+`
    pub max_left_violation: f64,
    /// `max_sigma (R(tau*, sigma*) - R(tau*, sigma))^+`
    pub max_right_violation: f64,
    pub pairs_checked: usize,
    pub mode: SweepMode,
}

impl SaddleReport {
    /// Largest of the saddle violations and the gaps between the lower
    /// value, the upper value and `X(root)`.
    pub fn worst_error(&self) -> f64 {
        [
            self.max_left_violation,
            self.max_right_violation,
            (self.lower_value - self.value_root).abs(),
            (self.upper_value - self.value_root).abs(),
            (self.saddle_value - self.value_root).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Exhaustive check of the saddle inequalities at the root.
///
/// Sweeps all rule pairs when each side has at most
/// [`MAX_PAIRWISE_RULES`] rules, otherwise the two one-sided deviation
/// families.
pub fn verify_saddle(gi: &GameInstance) -> Result<SaddleReport> {
    let lat = &gi.lattice;
    let sol = game_value(gi)?;
    let (tau_star, sigma_star) = saddle_times(lat, &sol, &gi.barriers, 0);
    let rules: Vec<StoppingRule> = enumerate_rules(lat, 0)?.collect();
    let root = NodeId::ROOT;
    let eval = |tau: &StoppingRule, sigma: &StoppingRule| evaluate_pair(gi, tau, sigma, root);
    let saddle_value = eval(&tau_star, &sigma_star)?;

    let mut left = 0.0f64;
    let mut right = 0.0f64;
    let (lower_value, upper_value, pairs_checked, mode) = if rules.len() <= MAX_PAIRWISE_RULES {
        let mut table = vec![vec![0.0; rules.len()]; rules.len()];
        for (i, tau) in rules.iter().enumerate() {
            for (j, sigma) in rules.iter().enumerate() {
                table[i][j] = eval(tau, sigma)?;
            }
        }
        let lower = table
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        let upper = (0..rules.len())
            .map(|j| table.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        for rule in &rules {
            left = left.max(eval(rule, &sigma_star)? - saddle_value);
            right = right.max(saddle_value - eval(&tau_star, rule)?);
        }
        (lower, upper, rules.len() * rules.len(), SweepMode::Pairwise)
    } else {
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for rule in &rules {
            let dev_tau = eval(rule, &sigma_star)?;
            let dev_sigma = eval(&tau_star, rule)?;
            upper = upper.max(dev_tau);
            lower = lower.min(dev_sigma);
            left = left.max(dev_tau - saddle_value);
            right = right.max(saddle_value - dev_sigma);
        }
        (lower, upper, 2 * rules.len(), SweepMode::SingleSided)
    };
    debug_assert!(mode == SweepMode::SingleSided || lower_value <= upper_value + 1e-12);

    Ok(SaddleReport {
        value_root: sol.x.root(),
        saddle_value,
        tau_star,
        sigma_star,
        lower_value,
        upper_value,
        max_left_violation: left.max(0.0),
        max_right_violation: right.max(0.0),
        pairs_checked,
        mode,
    })
}
