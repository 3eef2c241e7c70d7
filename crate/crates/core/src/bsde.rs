//! Discrete g-expectations.
//!
//! One backward step from children `(x_up, x_down)` at time `t` is
//!
//! ```text
//! z = (x_up - x_down) / (2 sqrt(dt))
//! x = (x_up + x_down) / 2 + dt * g(t, x, z)
//! ```
//!
//! implicit in `x`, explicit in `z`. The implicit equation is solved by
//! Picard iteration, a contraction whenever `dt * M <= 0.5`.

use crate::error::{Error, Result};
use crate::generators::Driver;
use crate::lattice::{AdaptedProcess, Lattice, LatticeMode, NodeId};

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 100;

/// Solves `x = e + dt * f(x)` starting from `x = e`.
///
/// Returns the iteration count on failure.
pub(crate) fn implicit_solve(
    e: f64,
    dt: f64,
    f: impl Fn(f64) -> f64,
) -> std::result::Result<f64, usize> {
    let mut x = e;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = e + dt * f(x);
        if (next - x).abs() <= FIXED_POINT_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(FIXED_POINT_MAX_ITER)
}

/// One backward step; returns `(x, z)`.
pub fn one_step(driver: &Driver, t: f64, dt: f64, x_up: f64, x_down: f64) -> Result<(f64, f64)> {
    step_at(driver, t, dt, x_up, x_down, NodeId::ROOT)
}

pub(crate) fn step_at(
    driver: &Driver,
    t: f64,
    dt: f64,
    x_up: f64,
    x_down: f64,
    node: NodeId,
) -> Result<(f64, f64)> {
    let z = (x_up - x_down) / (2.0 * dt.sqrt());
    let e = 0.5 * (x_up + x_down);
    let x = implicit_solve(e, dt, |y| driver.eval(t, y, z))
        .map_err(|iterations| Error::NoConvergence { node, iterations })?;
    Ok((x, z))
}

pub(crate) fn check_terminal(lat: &Lattice, terminal: &[f64]) -> Result<()> {
    if terminal.len() != lat.level_size(lat.steps()) {
        return Err(Error::ShapeMismatch);
    }
    if let Some(v) = terminal.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "terminal",
            reason: format!("non-finite terminal value {v}"),
        });
    }
    Ok(())
}

/// Solves the discrete BSDE backward from `terminal` (one value per level-N
/// node). Returns `(X, Z)`, with `Z = 0` on terminal nodes.
pub fn solve_bsde(
    lat: &Lattice,
    driver: &Driver,
    terminal: &[f64],
) -> Result<(AdaptedProcess, AdaptedProcess)> {
    check_terminal(lat, terminal)?;
    let n = lat.steps();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    x[n] = terminal.to_vec();
    z[n] = vec![0.0; terminal.len()];
    for level in (0..n).rev() {
        let t = lat.time(level);
        let size = lat.level_size(level);
        let mut xl = Vec::with_capacity(size);
        let mut zl = Vec::with_capacity(size);
        for node in lat.nodes_at(level) {
            let (up, down) = lat.children(node)?;
            let (xv, zv) = step_at(
                driver,
                t,
                lat.dt(),
                x[level + 1][up.index],
                x[level + 1][down.index],
                node,
            )?;
            xl.push(xv);
            zl.push(zv);
        }
        x[level] = xl;
        z[level] = zl;
    }
    Ok((
        AdaptedProcess::from_levels(lat, x)?,
        AdaptedProcess::from_levels(lat, z)?,
    ))
}

/// A hitting rule: the node set at which a stopping time fires.
///
/// Terminal nodes always belong to the set, so the induced stopping time
/// is bounded by the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoppingRule {
    stop: Vec<Vec<bool>>,
}

impl StoppingRule {
    /// Stops only at the horizon.
    pub fn terminal_only(lat: &Lattice) -> Self {
        let n = lat.steps();
        Self {
            stop: (0..=n).map(|l| vec![l == n; lat.level_size(l)]).collect(),
        }
    }

    /// Stops at every node of `level` and beyond.
    pub fn from_level(lat: &Lattice, level: usize) -> Self {
        Self {
            stop: (0..=lat.steps())
                .map(|l| vec![l >= level; lat.level_size(l)])
                .collect(),
        }
    }

    pub fn from_nodes(lat: &Lattice, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut rule = Self::terminal_only(lat);
        for node in nodes {
            if !lat.contains(node) {
                return Err(Error::InvalidNode(node));
            }
            rule.insert(node);
        }
        Ok(rule)
    }

    pub fn from_predicate(lat: &Lattice, mut pred: impl FnMut(NodeId) -> bool) -> Self {
        let n = lat.steps();
        Self {
            stop: (0..=n)
                .map(|l| lat.nodes_at(l).map(|node| l == n || pred(node)).collect())
                .collect(),
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.stop[node.level][node.index]
    }

    pub fn insert(&mut self, node: NodeId) {
        self.stop[node.level][node.index] = true;
    }

    pub fn union(&self, other: &StoppingRule) -> StoppingRule {
        StoppingRule {
            stop: self
                .stop
                .iter()
                .zip(&other.stop)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x || *y).collect())
                .collect(),
        }
    }

    /// Nonterminal members, level by level.
    pub fn interior_nodes(&self) -> Vec<NodeId> {
        let last = self.stop.len() - 1;
        self.stop[..last]
            .iter()
            .enumerate()
            .flat_map(|(level, v)| {
                v.iter()
                    .enumerate()
                    .filter(|(_, s)| **s)
                    .map(move |(index, _)| NodeId { level, index })
            })
            .collect()
    }

    /// Level at which the path (see [`Lattice::path_node`]) first enters
    /// the set, searching from `from_level`.
    pub fn first_hit_level(&self, lat: &Lattice, path: usize, from_level: usize) -> usize {
        (from_level..=lat.steps())
            .find(|&l| self.contains(lat.path_node(path, l)))
            .unwrap_or(lat.steps())
    }
}

/// Values of `payoff` stopped at the first entry into `rule`, evaluated
/// from `from`: `E^g_from[payoff(rho)]` with `rho` the hitting time.
pub fn evaluate_at_rule<P>(
    lat: &Lattice,
    driver: &Driver,
    payoff: P,
    rule: &StoppingRule,
    from: NodeId,
) -> Result<f64>
where
    P: Fn(NodeId) -> Option<f64>,
{
    if !lat.contains(from) {
        return Err(Error::InvalidNode(from));
    }
    let n = lat.steps();
    let dt = lat.dt();
    let mut next: Vec<f64> = Vec::new();
    let mut next_start = 0usize;
    for level in (from.level..=n).rev() {
        let range = lat.descendant_range(from, level);
        let start = range.start;
        let t = lat.time(level);
        let mut cur = Vec::with_capacity(range.len());
        for index in range {
            let node = NodeId { level, index };
            let v = if rule.contains(node) {
                payoff(node).ok_or(Error::MissingPayoff(node))?
            } else {
                let (up, down) = lat.children(node)?;
                let xu = next[up.index - next_start];
                let xd = next[down.index - next_start];
                step_at(driver, t, dt, xu, xd, node)?.0
            };
            cur.push(v);
        }
        next = cur;
        next_start = start;
    }
    Ok(next[0])
}

/// Like [`evaluate_at_rule`] but returns the value from every node.
pub fn evaluate_rule_process<P>(
    lat: &Lattice,
    driver: &Driver,
    payoff: P,
    rule: &StoppingRule,
) -> Result<AdaptedProcess>
where
    P: Fn(NodeId) -> Option<f64>,
{
    let n = lat.steps();
    let mut out = AdaptedProcess::zeros(lat);
    for level in (0..=n).rev() {
        let t = lat.time(level);
        for node in lat.nodes_at(level) {
            let v = if rule.contains(node) {
                payoff(node).ok_or(Error::MissingPayoff(node))?
            } else {
                let (up, down) = lat.children(node)?;
                step_at(driver, t, lat.dt(), out.get(up), out.get(down), node)?.0
            };
            out.set(node, v);
        }
    }
    Ok(out)
}

/// Terminal variable that freezes `payoff` at the first entry into `rule`
/// along each path. Full-tree mode only, where leaves are paths.
pub fn stopped_terminal<P>(lat: &Lattice, payoff: P, rule: &StoppingRule) -> Result<Vec<f64>>
where
    P: Fn(NodeId) -> Option<f64>,
{
    if lat.mode() != LatticeMode::FullTree {
        return Err(Error::HypothesisViolation(
            "stopped terminal variables need a full-tree lattice".into(),
        ));
    }
    (0..lat.path_count())
        .map(|path| {
            let level = rule.first_hit_level(lat, path, 0);
            let node = lat.path_node(path, level);
            payoff(node).ok_or(Error::MissingPayoff(node))
        })
        .collect()
}
