//! Discrete-time random-walk filtration on `[0, T]`.
//!
//! The walk moves `±sqrt(dt)` with probability one half at each of `N`
//! steps. Two layouts are supported:
//!
//! ```text
//! Recombining                 FullTree
//!            (2,2)                     (2,3)
//!      (1,1)                     (1,1)
//! (0,0)      (2,1)          (0,0)      (2,2)
//!      (1,0)                           (2,1)
//!            (2,0)               (1,0)
//!                                      (2,0)
//! ```
//!
//! In recombining mode node `(i, k)` has `k` up-moves behind it. In full-tree
//! mode the index bits record the path, most significant bit first, so the
//! node is an atom of the filtration and every adapted stopping time is a
//! node set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest depth accepted in [`LatticeMode::FullTree`] mode.
pub const MAX_FULL_TREE_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeMode {
    Recombining,
    FullTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { level: 0, index: 0 };

    pub fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    horizon: f64,
    steps: usize,
    dt: f64,
    increment: f64,
    mode: LatticeMode,
}

impl Lattice {
    pub fn new(horizon: f64, steps: usize, mode: LatticeMode) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        if steps == 0 {
            return Err(Error::NoSteps);
        }
        if mode == LatticeMode::FullTree && steps > MAX_FULL_TREE_STEPS {
            return Err(Error::TreeTooDeep {
                steps,
                max: MAX_FULL_TREE_STEPS,
            });
        }
        let dt = horizon / steps as f64;
        Ok(Self {
            horizon,
            steps,
            dt,
            increment: dt.sqrt(),
            mode,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Size of one walk move, `sqrt(dt)`.
    pub fn increment(&self) -> f64 {
        self.increment
    }

    pub fn mode(&self) -> LatticeMode {
        self.mode
    }

    pub fn level_size(&self, level: usize) -> usize {
        match self.mode {
            LatticeMode::Recombining => level + 1,
            LatticeMode::FullTree => 1 << level,
        }
    }

    pub fn node_count(&self) -> usize {
        (0..=self.steps).map(|l| self.level_size(l)).sum()
    }

    pub fn nonterminal_count(&self) -> usize {
        (0..self.steps).map(|l| self.level_size(l)).sum()
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.steps {
            self.horizon
        } else {
            level as f64 * self.dt
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.level <= self.steps && node.index < self.level_size(node.level)
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        node.level == self.steps
    }

    pub fn nodes_at(&self, level: usize) -> impl Iterator<Item = NodeId> {
        (0..self.level_size(level)).map(move |index| NodeId { level, index })
    }

    /// All nodes, level by level from the root.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=self.steps).flat_map(move |l| self.nodes_at(l))
    }

    /// Returns `(up, down)`.
    pub fn children(&self, node: NodeId) -> Result<(NodeId, NodeId)> {
        if !self.contains(node) {
            return Err(Error::InvalidNode(node));
        }
        if self.is_terminal(node) {
            return Err(Error::TerminalNode(node));
        }
        let level = node.level + 1;
        Ok(match self.mode {
            LatticeMode::Recombining => (
                NodeId::new(level, node.index + 1),
                NodeId::new(level, node.index),
            ),
            LatticeMode::FullTree => (
                NodeId::new(level, 2 * node.index + 1),
                NodeId::new(level, 2 * node.index),
            ),
        })
    }

    /// Parents of a node: one in full-tree mode, up to two when recombining.
    pub fn parents(&self, node: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(node) {
            return Err(Error::InvalidNode(node));
        }
        if node.level == 0 {
            return Ok(Vec::new());
        }
        let level = node.level - 1;
        Ok(match self.mode {
            LatticeMode::FullTree => vec![NodeId::new(level, node.index >> 1)],
            LatticeMode::Recombining => {
                let mut out = Vec::with_capacity(2);
                if node.index > 0 {
                    out.push(NodeId::new(level, node.index - 1));
                }
                if node.index <= level {
                    out.push(NodeId::new(level, node.index));
                }
                out
            }
        })
    }

    /// Number of up-moves on the way to `node`.
    pub fn up_moves(&self, node: NodeId) -> usize {
        match self.mode {
            LatticeMode::Recombining => node.index,
            LatticeMode::FullTree => node.index.count_ones() as usize,
        }
    }

    pub fn walk_value(&self, node: NodeId) -> Result<f64> {
        if !self.contains(node) {
            return Err(Error::InvalidNode(node));
        }
        let ups = self.up_moves(node) as f64;
        Ok((2.0 * ups - node.level as f64) * self.increment)
    }

    /// Indices at `level` reachable from `from` (empty if `level < from.level`).
    pub fn descendant_range(&self, from: NodeId, level: usize) -> std::ops::Range<usize> {
        if level < from.level {
            return 0..0;
        }
        let depth = level - from.level;
        match self.mode {
            LatticeMode::Recombining => from.index..from.index + depth + 1,
            LatticeMode::FullTree => (from.index << depth)..((from.index + 1) << depth),
        }
    }

    pub fn path_count(&self) -> usize {
        1 << self.steps
    }

    /// Node visited at `level` by the path whose moves are the bits of
    /// `path` (most significant of the `N` bits first, 1 = up).
    pub fn path_node(&self, path: usize, level: usize) -> NodeId {
        let prefix = path >> (self.steps - level);
        match self.mode {
            LatticeMode::FullTree => NodeId::new(level, prefix),
            LatticeMode::Recombining => NodeId::new(level, prefix.count_ones() as usize),
        }
    }
}

/// A real-valued function on every node of a lattice, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    values: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    pub fn zeros(lat: &Lattice) -> Self {
        Self::constant(lat, 0.0)
    }

    pub fn constant(lat: &Lattice, c: f64) -> Self {
        Self {
            values: (0..=lat.steps())
                .map(|l| vec![c; lat.level_size(l)])
                .collect(),
        }
    }

    pub fn from_fn(lat: &Lattice, mut f: impl FnMut(NodeId) -> f64) -> Self {
        Self {
            values: (0..=lat.steps())
                .map(|l| lat.nodes_at(l).map(&mut f).collect())
                .collect(),
        }
    }

    /// Builds a process from per-level vectors; fails if the shape is wrong.
    pub fn from_levels(lat: &Lattice, values: Vec<Vec<f64>>) -> Result<Self> {
        let ok = values.len() == lat.steps() + 1
            && values
                .iter()
                .enumerate()
                .all(|(l, v)| v.len() == lat.level_size(l));
        if ok {
            Ok(Self { values })
        } else {
            Err(Error::ShapeMismatch)
        }
    }

    pub fn get(&self, node: NodeId) -> f64 {
        self.values[node.level][node.index]
    }

    pub fn set(&mut self, node: NodeId, value: f64) {
        self.values[node.level][node.index] = value;
    }

    pub fn level(&self, level: usize) -> &[f64] {
        &self.values[level]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().expect("process has at least one level")
    }

    pub fn root(&self) -> f64 {
        self.values[0][0]
    }

    pub fn matches(&self, lat: &Lattice) -> bool {
        self.values.len() == lat.steps() + 1
            && self
                .values
                .iter()
                .enumerate()
                .all(|(l, v)| v.len() == lat.level_size(l))
    }

    /// Largest nodewise absolute difference.
    pub fn max_abs_diff(&self, other: &AdaptedProcess) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.values.iter().enumerate().flat_map(|(level, v)| {
            v.iter()
                .enumerate()
                .map(move |(index, &x)| (NodeId { level, index }, x))
        })
    }
}
