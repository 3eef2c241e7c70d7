//! Doubly reflected backward recursion between a lower barrier `L` and an
//! upper barrier `U`.
//!
//! Each node takes the implicit one-step value of its children and clamps
//! it into `[L, U]`; the push needed is recorded as a nodewise increment of
//! `K+` (push up) or `K-` (push down), so `dK+ (X - L) = 0` and
//! `dK- (U - X) = 0` hold exactly.

use serde::{Deserialize, Serialize};

use crate::bsde::{check_terminal, implicit_solve, solve_bsde, step_at};
use crate::error::{Error, Result};
use crate::generators::{validate_step, Driver};
use crate::lattice::{AdaptedProcess, Lattice, LatticeMode, NodeId};

/// Parametric function of `(t, w)` used for barriers and terminal values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeFunction {
    Constant {
        c: f64,
    },
    /// `a0 + a1 w + a2 t`
    Affine {
        a0: f64,
        #[serde(default)]
        a1: f64,
        #[serde(default)]
        a2: f64,
    },
    /// `max(0, a0 + a1 w + a2 t) + offset`
    Clipped {
        a0: f64,
        #[serde(default)]
        a1: f64,
        #[serde(default)]
        a2: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl NodeFunction {
    pub fn eval(&self, t: f64, w: f64) -> f64 {
        match *self {
            NodeFunction::Constant { c } => c,
            NodeFunction::Affine { a0, a1, a2 } => a0 + a1 * w + a2 * t,
            NodeFunction::Clipped { a0, a1, a2, offset } => (a0 + a1 * w + a2 * t).max(0.0) + offset,
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let ok = match *self {
            NodeFunction::Constant { c } => c.is_finite(),
            NodeFunction::Affine { a0, a1, a2 } => [a0, a1, a2].iter().all(|v| v.is_finite()),
            NodeFunction::Clipped { a0, a1, a2, offset } => {
                [a0, a1, a2, offset].iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                reason: "coefficients must be finite".into(),
            })
        }
    }

    pub fn materialize(&self, lat: &Lattice) -> AdaptedProcess {
        AdaptedProcess::from_fn(lat, |n| {
            let w = lat.walk_value(n).expect("node from lattice");
            self.eval(lat.time(n.level), w)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    pub lower: NodeFunction,
    pub upper: NodeFunction,
    /// Uniform bound `B` on both barriers, required by constrained games.
    #[serde(default)]
    pub bound: Option<f64>,
    /// Require `L` nondecreasing along every path.
    #[serde(default)]
    pub increasing_lower: bool,
}

impl BarrierSpec {
    pub fn materialize(&self, lat: &Lattice) -> Result<Barriers> {
        self.lower.validate("barriers.lower")?;
        self.upper.validate("barriers.upper")?;
        if let Some(b) = self.bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "barriers.bound",
                    reason: format!("must be positive, got {b}"),
                });
            }
        }
        let barriers = Barriers::new(lat, self.lower.materialize(lat), self.upper.materialize(lat))?;
        if self.increasing_lower && !barriers.lower_is_increasing(lat) {
            return Err(Error::HypothesisViolation(
                "lower barrier is not nondecreasing along every path".into(),
            ));
        }
        Ok(barriers)
    }
}

/// Barrier processes on a concrete lattice, with `L <= U` checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Barriers {
    lower: AdaptedProcess,
    upper: AdaptedProcess,
}

impl Barriers {
    pub fn new(lat: &Lattice, lower: AdaptedProcess, upper: AdaptedProcess) -> Result<Self> {
        if !lower.matches(lat) || !upper.matches(lat) {
            return Err(Error::ShapeMismatch);
        }
        for (node, l) in lower.iter() {
            let u = upper.get(node);
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "barriers",
                    reason: format!("non-finite barrier value at {node}"),
                });
            }
            if l > u {
                return Err(Error::BarrierCrossing {
                    node,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &AdaptedProcess {
        &self.lower
    }

    pub fn upper(&self) -> &AdaptedProcess {
        &self.upper
    }

    /// Terminal variable `xi = L(T)`.
    pub fn lower_terminal(&self) -> Vec<f64> {
        self.lower.terminal().to_vec()
    }

    pub fn lower_is_increasing(&self, lat: &Lattice) -> bool {
        lat.nodes()
            .filter(|n| !lat.is_terminal(*n))
            .all(|n| {
                let (u, d) = lat.children(n).expect("nonterminal");
                let l = self.lower.get(n);
                self.lower.get(u) >= l && self.lower.get(d) >= l
            })
    }

    /// `0 <= L <= U <= bound` everywhere.
    pub fn check_bounded(&self, bound: f64) -> Result<()> {
        for (node, l) in self.lower.iter() {
            let u = self.upper.get(node);
            if l < 0.0 || u > bound {
                return Err(Error::HypothesisViolation(format!(
                    "barriers at {node} are ({l}, {u}), outside [0, {bound}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTriple {
    pub x: AdaptedProcess,
    pub z: AdaptedProcess,
    /// Upward push applied at each node.
    pub kplus_increment: AdaptedProcess,
    /// Downward push applied at each node.
    pub kminus_increment: AdaptedProcess,
}

impl SolutionTriple {
    /// Cumulative `K+` at each node: the pushes of its strict ancestors,
    /// so `K+(root) = 0`. Only defined when nodes are paths (full tree).
    pub fn cumulative_kplus(&self, lat: &Lattice) -> Option<AdaptedProcess> {
        cumulate(lat, &self.kplus_increment)
    }

    pub fn cumulative_kminus(&self, lat: &Lattice) -> Option<AdaptedProcess> {
        cumulate(lat, &self.kminus_increment)
    }
}

/// Path sums of strict-ancestor increments, full-tree mode only.
pub fn cumulate(lat: &Lattice, increments: &AdaptedProcess) -> Option<AdaptedProcess> {
    if lat.mode() != LatticeMode::FullTree {
        return None;
    }
    let mut out = AdaptedProcess::zeros(lat);
    for node in lat.nodes().skip(1) {
        let parent = NodeId::new(node.level - 1, node.index >> 1);
        out.set(node, out.get(parent) + increments.get(parent));
    }
    Some(out)
}

fn check_band(lat: &Lattice, barriers: &Barriers, terminal: &[f64]) -> Result<()> {
    check_terminal(lat, terminal)?;
    for (node, &v) in lat.nodes_at(lat.steps()).zip(terminal) {
        let (lower, upper) = (barriers.lower.get(node), barriers.upper.get(node));
        if !(lower <= v && v <= upper) {
            return Err(Error::TerminalOutOfBand {
                node,
                value: v,
                lower,
                upper,
            });
        }
    }
    Ok(())
}

/// Solves the doubly reflected recursion with terminal `terminal`.
pub fn solve_drbsde(
    lat: &Lattice,
    driver: &Driver,
    barriers: &Barriers,
    terminal: &[f64],
) -> Result<SolutionTriple> {
    validate_step(driver.lipschitz(), lat.dt(), lat.horizon())?;
    check_band(lat, barriers, terminal)?;
    let n = lat.steps();
    let mut x = AdaptedProcess::zeros(lat);
    let mut z = AdaptedProcess::zeros(lat);
    let mut kplus = AdaptedProcess::zeros(lat);
    let mut kminus = AdaptedProcess::zeros(lat);
    for (node, &v) in lat.nodes_at(n).zip(terminal) {
        x.set(node, v);
    }
    for level in (0..n).rev() {
        let t = lat.time(level);
        for node in lat.nodes_at(level) {
            let (up, down) = lat.children(node)?;
            let (free, zv) = step_at(driver, t, lat.dt(), x.get(up), x.get(down), node)?;
            let lower = barriers.lower.get(node);
            let upper = barriers.upper.get(node);
            let clamped = free.max(lower).min(upper);
            x.set(node, clamped);
            z.set(node, zv);
            kplus.set(node, (clamped - free).max(0.0));
            kminus.set(node, (free - clamped).max(0.0));
        }
    }
    let sol = SolutionTriple {
        x,
        z,
        kplus_increment: kplus,
        kminus_increment: kminus,
    };
    debug_assert!(band_violation(&sol, barriers) == 0.0);
    debug_assert!(skorokhod_residuals(&sol, barriers) == (0.0, 0.0));
    Ok(sol)
}

/// Penalized approximation: a plain backward recursion with driver
/// `g + p (L - y)^+ - p (y - U)^+`.
pub fn solve_drbsde_penalized(
    lat: &Lattice,
    driver: &Driver,
    barriers: &Barriers,
    terminal: &[f64],
    penalty: f64,
) -> Result<(AdaptedProcess, AdaptedProcess)> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "penalty",
            reason: format!("must be finite and >= 0, got {penalty}"),
        });
    }
    if penalty == 0.0 {
        return solve_bsde(lat, driver, terminal);
    }
    validate_step(driver.lipschitz() + penalty, lat.dt(), lat.horizon())?;
    check_terminal(lat, terminal)?;
    let n = lat.steps();
    let mut x = AdaptedProcess::zeros(lat);
    let mut z = AdaptedProcess::zeros(lat);
    for (node, &v) in lat.nodes_at(n).zip(terminal) {
        x.set(node, v);
    }
    let dt = lat.dt();
    for level in (0..n).rev() {
        let t = lat.time(level);
        for node in lat.nodes_at(level) {
            let (up, down) = lat.children(node)?;
            let (xu, xd) = (x.get(up), x.get(down));
            let zv = (xu - xd) / (2.0 * lat.increment());
            let lower = barriers.lower.get(node);
            let upper = barriers.upper.get(node);
            let f = |y: f64| {
                driver.eval(t, y, zv) + penalty * (lower - y).max(0.0)
                    - penalty * (y - upper).max(0.0)
            };
            let xv = implicit_solve(0.5 * (xu + xd), dt, f)
                .map_err(|iterations| Error::NoConvergence { node, iterations })?;
            x.set(node, xv);
            z.set(node, zv);
        }
    }
    Ok((x, z))
}

/// `(max |dK+ (X - L)|, max |dK- (U - X)|)` over all nodes.
pub fn skorokhod_residuals(sol: &SolutionTriple, barriers: &Barriers) -> (f64, f64) {
    let mut rplus = 0.0f64;
    let mut rminus = 0.0f64;
    for (node, x) in sol.x.iter() {
        rplus = rplus.max((sol.kplus_increment.get(node) * (x - barriers.lower.get(node))).abs());
        rminus = rminus.max((sol.kminus_increment.get(node) * (barriers.upper.get(node) - x)).abs());
    }
    (rplus, rminus)
}

/// Largest amount by which `X` leaves `[L, U]`; zero for solver output.
pub fn band_violation(sol: &SolutionTriple, barriers: &Barriers) -> f64 {
    sol.x
        .iter()
        .map(|(node, x)| {
            (barriers.lower.get(node) - x)
                .max(x - barriers.upper.get(node))
                .max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Smallest increment of `K+` and `K-`; negative means the push process
/// decreases somewhere.
pub fn min_k_increment(sol: &SolutionTriple) -> f64 {
    sol.kplus_increment
        .iter()
        .chain(sol.kminus_increment.iter())
        .map(|(_, v)| v)
        .fold(f64::INFINITY, f64::min)
}

/// `max |X(n) - median(L(n), step(children), U(n))|` over nonterminal nodes.
pub fn clamp_identity_error(
    lat: &Lattice,
    driver: &Driver,
    sol: &SolutionTriple,
    barriers: &Barriers,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for node in lat.nodes().filter(|n| !lat.is_terminal(*n)) {
        let (up, down) = lat.children(node)?;
        let (free, _) = step_at(
            driver,
            lat.time(node.level),
            lat.dt(),
            sol.x.get(up),
            sol.x.get(down),
            node,
        )?;
        let mut trio = [barriers.lower.get(node), free, barriers.upper.get(node)];
        trio.sort_by(f64::total_cmp);
        worst = worst.max((sol.x.get(node) - trio[1]).abs());
    }
    Ok(worst)
}
