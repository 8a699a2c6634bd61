//! Binary state trees and timestamped observations.
//!
//! The latent state of a single model is a `Leaf` holding a real vector. When
//! two models are composed their states are paired in a `Branch`, so the tree
//! shape of a composed state mirrors the composition tree of its models.

use std::fmt;

/// Latent state of a (possibly composed) model at one instant.
#[derive(Debug, Clone, PartialEq)]
pub enum StateTree {
    Leaf(Vec<f64>),
    Branch(Box<StateTree>, Box<StateTree>),
}

impl StateTree {
    pub fn leaf(values: impl Into<Vec<f64>>) -> Self {
        StateTree::Leaf(values.into())
    }

    pub fn branch(left: StateTree, right: StateTree) -> Self {
        StateTree::Branch(Box::new(left), Box::new(right))
    }

    /// Leaf vectors in left-to-right order.
    pub fn leaves(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        match self {
            StateTree::Leaf(v) => out.push(v),
            StateTree::Branch(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Concatenation of all leaf vectors in left-to-right order.
    pub fn flatten(&self) -> Vec<f64> {
        self.leaves().concat()
    }

    /// Total number of state coordinates.
    pub fn dim(&self) -> usize {
        match self {
            StateTree::Leaf(v) => v.len(),
            StateTree::Branch(l, r) => l.dim() + r.dim(),
        }
    }

    /// Depth of the tree; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            StateTree::Leaf(_) => 0,
            StateTree::Branch(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.leaves().iter().all(|l| l.iter().all(|x| x.is_finite()))
    }

    pub fn left(&self) -> Option<&StateTree> {
        match self {
            StateTree::Branch(l, _) => Some(l),
            StateTree::Leaf(_) => None,
        }
    }

    pub fn right(&self) -> Option<&StateTree> {
        match self {
            StateTree::Branch(_, r) => Some(r),
            StateTree::Leaf(_) => None,
        }
    }
}

impl fmt::Display for StateTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateTree::Leaf(v) => write!(f, "Leaf{v:?}"),
            StateTree::Branch(l, r) => write!(f, "Branch({l}, {r})"),
        }
    }
}

/// Pair two states into a branch. The constituents are moved, not altered.
pub fn branch(left: StateTree, right: StateTree) -> StateTree {
    StateTree::branch(left, right)
}

/// A single measurement and the time it was taken.
///
/// For event data the value is unused and `time` is the event time itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedObservation {
    pub time: f64,
    pub value: f64,
}

impl TimedObservation {
    pub fn new(time: f64, value: f64) -> Self {
        TimedObservation { time, value }
    }

    /// An event at `time` (LGCP data).
    pub fn event(time: f64) -> Self {
        TimedObservation { time, value: time }
    }
}
