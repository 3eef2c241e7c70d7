//! Constrained game through the penalization ladder `g_m = g + m phi`.
//!
//! Each rung solves the doubly reflected recursion with driver `g_m`. The
//! rungs increase with `m`, the lower contact rules move later and the
//! upper contact rules move earlier; the top rung is reported as the value
//! estimate and its contact rules as the limiting saddle candidates, if
//! they agree with the rung below.

use serde::Serialize;

use crate::bsde::{solve_bsde, StoppingRule};
use crate::dynkin::{enumerate_rules, evaluate_pair_with, saddle_times, GameInstance};
use crate::error::{Error, Result};
use crate::generators::{is_monotone_step, validate_step, ConstraintSpec, Driver};
use crate::lattice::{AdaptedProcess, Lattice, NodeId};
use crate::rbsde::{solve_drbsde, SolutionTriple};

pub const DEFAULT_SCHEDULE: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderOptions {
    /// Bound `B` with `0 <= L <= U <= B`.
    pub bound: f64,
    /// Refuse barriers whose lower part decreases along some path.
    pub require_increasing_lower: bool,
}

#[derive(Debug, Clone)]
pub struct LadderLevel {
    pub weight: f64,
    pub solution: SolutionTriple,
    pub tau_star: StoppingRule,
    pub sigma_star: StoppingRule,
    /// `m phi(t, X^m, Z^m) dt` per nonterminal node.
    pub penalty_increment: AdaptedProcess,
}

#[derive(Debug, Clone)]
pub struct PenalizationLadder {
    pub schedule: Vec<f64>,
    pub levels: Vec<LadderLevel>,
    /// Sup-norm distance between consecutive rungs.
    pub gaps: Vec<f64>,
    /// Largest `X^{m_k}(n) - X^{m_{k+1}}(n)`, zero when the rungs increase.
    pub monotonicity_violation: f64,
    /// Every consecutive pair has lower contacts no earlier along any path.
    pub tau_monotone: bool,
    /// Every consecutive pair has upper contacts no later along any path.
    pub sigma_monotone: bool,
    /// `sqrt(dt) * M_z <= 1` for the top rung.
    pub monotone_scheme: bool,
    pub lower_increasing: bool,
}

impl PenalizationLadder {
    pub fn top(&self) -> &LadderLevel {
        self.levels.last().expect("ladder is never empty")
    }
}

/// True when along every path `a` is entered no later than `b`.
///
/// A path enters `b` first exactly when some node of `b` outside `a` can
/// be reached through nodes outside `a`, which a forward sweep detects.
pub fn hits_no_later(lat: &Lattice, a: &StoppingRule, b: &StoppingRule) -> bool {
    let mut reach = AdaptedProcess::zeros(lat);
    reach.set(NodeId::ROOT, 1.0);
    for node in lat.nodes() {
        if reach.get(node) == 0.0 {
            continue;
        }
        if b.contains(node) && !a.contains(node) {
            return false;
        }
        if a.contains(node) || lat.is_terminal(node) {
            continue;
        }
        let (up, down) = lat.children(node).expect("nonterminal");
        reach.set(up, 1.0);
        reach.set(down, 1.0);
    }
    true
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::LadderTooShort(0));
    }
    let ok = schedule.iter().all(|m| m.is_finite() && *m >= 0.0)
        && schedule.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "schedule",
            reason: "penalty levels must be finite, nonnegative and strictly increasing".into(),
        })
    }
}

pub fn run_ladder(
    gi: &GameInstance,
    phi: &ConstraintSpec,
    schedule: &[f64],
    options: LadderOptions,
) -> Result<PenalizationLadder> {
    check_schedule(schedule)?;
    phi.validate()?;
    let lat = &gi.lattice;
    gi.barriers.check_bounded(options.bound)?;
    let lower_increasing = gi.barriers.lower_is_increasing(lat);
    if options.require_increasing_lower && !lower_increasing {
        return Err(Error::HypothesisViolation(
            "lower barrier must be nondecreasing along every path".into(),
        ));
    }
    let m_max = *schedule.last().expect("nonempty");
    let top_driver = Driver::penalized(gi.driver.generator, *phi, m_max);
    validate_step(top_driver.lipschitz(), lat.dt(), lat.horizon())?;

    let terminal = gi.terminal();
    let mut levels = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let driver = Driver::penalized(gi.driver.generator, *phi, m);
        let solution = solve_drbsde(lat, &driver, &gi.barriers, &terminal)?;
        let (tau_star, sigma_star) = saddle_times(lat, &solution, &gi.barriers, 0);
        let penalty_increment = AdaptedProcess::from_fn(lat, |n| {
            if lat.is_terminal(n) {
                0.0
            } else {
                let t = lat.time(n.level);
                m * phi.eval(t, solution.x.get(n), solution.z.get(n)) * lat.dt()
            }
        });
        levels.push(LadderLevel {
            weight: m,
            solution,
            tau_star,
            sigma_star,
            penalty_increment,
        });
    }

    let mut gaps = Vec::new();
    let mut monotonicity_violation = 0.0f64;
    let mut tau_monotone = true;
    let mut sigma_monotone = true;
    for pair in levels.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        gaps.push(lo.solution.x.max_abs_diff(&hi.solution.x));
        for (node, x) in lo.solution.x.iter() {
            monotonicity_violation = monotonicity_violation.max(x - hi.solution.x.get(node));
        }
        tau_monotone &= hits_no_later(lat, &lo.tau_star, &hi.tau_star);
        sigma_monotone &= hits_no_later(lat, &hi.sigma_star, &lo.sigma_star);
    }

    Ok(PenalizationLadder {
        schedule: schedule.to_vec(),
        levels,
        gaps,
        monotonicity_violation,
        tau_monotone,
        sigma_monotone,
        monotone_scheme: is_monotone_step(top_driver.lipschitz_z(), lat.dt()),
        lower_increasing,
    })
}

#[derive(Debug, Clone)]
pub struct ConstrainedReport {
    pub value_estimate: f64,
    pub residual_gap: f64,
    pub tau_limit: StoppingRule,
    pub sigma_limit: StoppingRule,
    /// Top two rungs have identical contact rules.
    pub stabilized: bool,
    /// `max_{tau, m} (E^{g_m}[R(tau, sigma_lim)] - value)^+`, if enumerable.
    pub left_violation: Option<f64>,
    /// `max_sigma (value - E^{g_top}[R(tau_lim, sigma)])^+`, if enumerable.
    pub right_violation: Option<f64>,
    /// `|E^{g_top}[R(tau_lim, sigma_lim)] - value|`
    pub saddle_gap: f64,
    pub rules_checked: usize,
    /// `max phi(t, X, Z)` over nonterminal nodes of the top rung.
    pub constraint_residual: f64,
    pub lower_increasing: bool,
}

pub fn constrained_report(
    ladder: &PenalizationLadder,
    gi: &GameInstance,
    phi: &ConstraintSpec,
) -> Result<ConstrainedReport> {
    if ladder.levels.len() < 2 {
        return Err(Error::LadderTooShort(ladder.levels.len()));
    }
    let lat = &gi.lattice;
    let top = ladder.top();
    let prev = &ladder.levels[ladder.levels.len() - 2];
    let value = top.solution.x.root();
    let top_driver = Driver::penalized(gi.driver.generator, *phi, top.weight);
    let tau_lim = &top.tau_star;
    let sigma_lim = &top.sigma_star;

    let saddle_gap =
        (evaluate_pair_with(lat, &top_driver, &gi.barriers, tau_lim, sigma_lim, NodeId::ROOT)?
            - value)
            .abs();

    let (left_violation, right_violation, rules_checked) = match enumerate_rules(lat, 0) {
        Ok(rules) => {
            let rules: Vec<StoppingRule> = rules.collect();
            let mut left = 0.0f64;
            let mut right = 0.0f64;
            for rule in &rules {
                for level in &ladder.levels {
                    let driver = Driver::penalized(gi.driver.generator, *phi, level.weight);
                    let v = evaluate_pair_with(lat, &driver, &gi.barriers, rule, sigma_lim, NodeId::ROOT)?;
                    left = left.max(v - value);
                }
                let v = evaluate_pair_with(lat, &top_driver, &gi.barriers, tau_lim, rule, NodeId::ROOT)?;
                right = right.max(value - v);
            }
            (Some(left), Some(right), rules.len())
        }
        Err(Error::EnumerationTooLarge { .. }) => (None, None, 0),
        Err(e) => return Err(e),
    };

    let constraint_residual = lat
        .nodes()
        .filter(|n| !lat.is_terminal(*n))
        .map(|n| phi.eval(lat.time(n.level), top.solution.x.get(n), top.solution.z.get(n)))
        .fold(0.0, f64::max);

    Ok(ConstrainedReport {
        value_estimate: value,
        residual_gap: *ladder.gaps.last().expect("two levels"),
        tau_limit: tau_lim.clone(),
        sigma_limit: sigma_lim.clone(),
        stabilized: prev.tau_star == top.tau_star && prev.sigma_star == top.sigma_star,
        left_violation,
        right_violation,
        saddle_gap,
        rules_checked,
        constraint_residual,
        lower_increasing: ladder.lower_increasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub schedule: Vec<f64>,
    /// `values[k][j] = x^{m_k}(root)(xi_j)`
    pub values: Vec<Vec<f64>>,
    /// `limit_values[k] = x^{m_k}(root)(xi)`
    pub limit_values: Vec<f64>,
    /// Largest decrease `x^m(xi_j) - x^m(xi_{j+1})`, zero when monotone.
    pub max_decrease: f64,
    /// Largest excess of a sequence value over the value of the limit.
    pub max_overshoot: f64,
    /// `max_k (x^{m_k}(xi) - x^{m_k}(xi_last))`
    pub terminal_gap: f64,
    /// `|sup_{k,j} x^{m_k}(xi_j) - sup_k x^{m_k}(xi)|`
    pub interchange_gap: f64,
    /// `max_k |x^{m_k}(xi) - R_k|` where `R_k` extrapolates the last two
    /// sequence values assuming an error proportional to `1 / j`.
    pub extrapolation_gap: f64,
}

/// Monotone convergence of penalized values along an increasing sequence
/// of terminal variables.
///
/// Sequence entries must be nodewise nondecreasing and bounded by `limit`.
pub fn continuity_from_below_check(
    lat: &Lattice,
    driver: &Driver,
    phi: &ConstraintSpec,
    schedule: &[f64],
    sequence: &[Vec<f64>],
    limit: &[f64],
) -> Result<ContinuityReport> {
    check_schedule(schedule)?;
    if sequence.is_empty() {
        return Err(Error::InvalidParameter {
            name: "terminal_sequence",
            reason: "must not be empty".into(),
        });
    }
    let m_max = *schedule.last().expect("nonempty");
    validate_step(
        Driver::penalized(driver.generator, *phi, m_max).lipschitz(),
        lat.dt(),
        lat.horizon(),
    )?;
    let terminal_nodes: Vec<NodeId> = lat.nodes_at(lat.steps()).collect();
    let mut chain: Vec<&[f64]> = sequence.iter().map(|v| v.as_slice()).collect();
    chain.push(limit);
    for (i, pair) in chain.windows(2).enumerate() {
        if pair[0].len() != terminal_nodes.len() || pair[1].len() != terminal_nodes.len() {
            return Err(Error::ShapeMismatch);
        }
        if let Some(k) = (0..pair[0].len()).find(|&k| pair[0][k] > pair[1][k]) {
            return Err(Error::NotMonotone {
                index: i + 1,
                node: terminal_nodes[k],
            });
        }
    }

    let mut values = Vec::with_capacity(schedule.len());
    let mut limit_values = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let d = Driver::penalized(driver.generator, *phi, m);
        let row = sequence
            .iter()
            .map(|xi| Ok(solve_bsde(lat, &d, xi)?.0.root()))
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
        limit_values.push(solve_bsde(lat, &d, limit)?.0.root());
    }

    let mut max_decrease = 0.0f64;
    let mut max_overshoot = 0.0f64;
    let mut terminal_gap = 0.0f64;
    let mut extrapolation_gap = 0.0f64;
    for (row, &lim) in values.iter().zip(&limit_values) {
        for w in row.windows(2) {
            max_decrease = max_decrease.max(w[0] - w[1]);
        }
        for v in row {
            max_overshoot = max_overshoot.max(v - lim);
        }
        let last = *row.last().expect("nonempty");
        terminal_gap = terminal_gap.max(lim - last);
        if row.len() >= 2 {
            let j = row.len() as f64;
            let extrapolated = j * last - (j - 1.0) * row[row.len() - 2];
            extrapolation_gap = extrapolation_gap.max((lim - extrapolated).abs());
        }
    }
    let diagonal_sup = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let limit_sup = limit_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(ContinuityReport {
        schedule: schedule.to_vec(),
        values,
        limit_values,
        max_decrease: max_decrease.max(0.0),
        max_overshoot: max_overshoot.max(0.0),
        terminal_gap: terminal_gap.max(0.0),
        interchange_gap: (diagonal_sup - limit_sup).abs(),
        extrapolation_gap,
    })
}

/// `xi_j = xi (1 - 1/j)` for `j = 1..=count`.
pub fn scaled_sequence(xi: &[f64], count: usize) -> Vec<Vec<f64>> {
    (1..=count)
        .map(|j| {
            let s = 1.0 - 1.0 / j as f64;
            xi.iter().map(|v| v * s).collect()
        })
        .collect()
}
