//! Parameter trees.
//!
//! A `ParamTree` mirrors the composition tree of the model it parameterises:
//! a single model takes a `Leaf`, and composing two models pairs their
//! parameters in a `Branch`. `a + b + c` builds `Branch(Branch(a, b), c)`.
//!
//! Every tree also has a canonical flat view used by the MCMC code and the CLI:
//! leaves in left-to-right order, and within a leaf
//! `init_mean*, init_sd*, scale, <sde fields>*`. Coordinates are named
//! `leaf<k>.<field><i>` (the scalar observation scale is `leaf<k>.scale`).

use std::ops::Add;

use crate::error::{Error, Result};
use crate::sde::{Diffusion, Drift, SdeParams};

/// Diagonal Gaussian over a leaf's initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStateParams {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl InitialStateParams {
    pub fn new(mean: impl Into<Vec<f64>>, sd: impl Into<Vec<f64>>) -> Self {
        InitialStateParams {
            mean: mean.into(),
            sd: sd.into(),
        }
    }

    /// A point mass at `mean`.
    pub fn fixed(mean: impl Into<Vec<f64>>) -> Self {
        let mean = mean.into();
        let sd = vec![0.0; mean.len()];
        InitialStateParams { mean, sd }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for v in [&self.mean, &self.sd] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
        if let Some(m) = self.mean.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial mean {m} is not finite")));
        }
        if let Some(s) = self.sd.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "initial standard deviation must be nonnegative, got {s}"
            )));
        }
        Ok(())
    }
}

/// Parameters of one model component.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafParams {
    pub init: InitialStateParams,
    /// Observation noise (the Gaussian variance `V`); only the observation
    /// model of a composition uses it.
    pub scale: Option<f64>,
    pub sde: SdeParams,
}

impl LeafParams {
    pub fn new(init: InitialStateParams, scale: Option<f64>, sde: SdeParams) -> Self {
        LeafParams { init, scale, sde }
    }

    /// Zero-dimensional parameters, used by the identity model.
    pub fn empty() -> Self {
        LeafParams {
            init: InitialStateParams::new(Vec::new(), Vec::new()),
            scale: None,
            sde: SdeParams::brownian(Vec::new(), Vec::new()),
        }
    }
}

/// Domain of one flattened parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Real,
    NonNegative,
    Positive,
}

impl Constraint {
    pub fn admits(self, v: f64) -> bool {
        match self {
            Constraint::Real => v.is_finite(),
            Constraint::NonNegative => v.is_finite() && v >= 0.0,
            Constraint::Positive => v.is_finite() && v > 0.0,
        }
    }

    /// Whether random-walk proposals act on the log scale.
    pub fn is_log_scale(self) -> bool {
        !matches!(self, Constraint::Real)
    }
}

/// Binary tree of leaf parameters, shaped like the model composition tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamTree {
    Leaf(LeafParams),
    Branch(Box<ParamTree>, Box<ParamTree>),
}

impl ParamTree {
    pub fn leaf(init: InitialStateParams, scale: Option<f64>, sde: SdeParams) -> Self {
        ParamTree::Leaf(LeafParams::new(init, scale, sde))
    }

    pub fn combine(self, right: ParamTree) -> ParamTree {
        ParamTree::Branch(Box::new(self), Box::new(right))
    }

    pub fn leaves(&self) -> Vec<&LeafParams> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a ParamTree, out: &mut Vec<&'a LeafParams>) {
            match t {
                ParamTree::Leaf(l) => out.push(l),
                ParamTree::Branch(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Rebuilds the tree with each leaf replaced by `f(leaf_index, leaf)`.
    pub fn map_leaves(&self, f: &mut impl FnMut(usize, &LeafParams) -> Result<LeafParams>) -> Result<ParamTree> {
        fn walk(
            t: &ParamTree,
            next: &mut usize,
            f: &mut impl FnMut(usize, &LeafParams) -> Result<LeafParams>,
        ) -> Result<ParamTree> {
            match t {
                ParamTree::Leaf(l) => {
                    let k = *next;
                    *next += 1;
                    Ok(ParamTree::Leaf(f(k, l)?))
                }
                ParamTree::Branch(l, r) => {
                    let l = walk(l, next, f)?;
                    let r = walk(r, next, f)?;
                    Ok(l.combine(r))
                }
            }
        }
        walk(self, &mut 0, f)
    }

    /// Same branching structure and same flattened coordinate layout.
    pub fn same_shape(&self, other: &ParamTree) -> bool {
        match (self, other) {
            (ParamTree::Leaf(_), ParamTree::Leaf(_)) => self.names() == other.names(),
            (ParamTree::Branch(a, b), ParamTree::Branch(c, d)) => a.same_shape(c) && b.same_shape(d),
            _ => false,
        }
    }

    /// The same leaves re-associated to the left: `((l0 + l1) + l2) + ...`.
    pub fn left_associated(&self) -> ParamTree {
        let mut leaves = self.leaves().into_iter().cloned().map(ParamTree::Leaf);
        let first = leaves.next().expect("a parameter tree has at least one leaf");
        leaves.fold(first, ParamTree::combine)
    }

    /// Canonical flattened values.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for leaf in self.leaves() {
            let mut leaf = leaf.clone();
            visit_leaf(&mut leaf, &mut |_, _, v, _| out.push(*v));
        }
        out
    }

    /// Canonical coordinate names, `leaf<k>.<field><i>`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, leaf) in self.leaves().into_iter().enumerate() {
            let mut leaf = leaf.clone();
            visit_leaf(&mut leaf, &mut |field, idx, _, _| {
                out.push(match idx {
                    Some(i) => format!("leaf{k}.{field}{i}"),
                    None => format!("leaf{k}.{field}"),
                })
            });
        }
        out
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        for leaf in self.leaves() {
            let mut leaf = leaf.clone();
            visit_leaf(&mut leaf, &mut |_, _, _, c| out.push(c));
        }
        out
    }

    /// A copy with the flattened coordinates replaced by `values`.
    pub fn with_values(&self, values: &[f64]) -> Result<ParamTree> {
        let expected = self.values().len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        let mut it = values.iter();
        self.map_leaves(&mut |_, leaf| {
            let mut leaf = leaf.clone();
            visit_leaf(&mut leaf, &mut |_, _, v, _| *v = *it.next().expect("length checked above"));
            Ok(leaf)
        })
    }
}

impl Add for ParamTree {
    type Output = ParamTree;

    fn add(self, rhs: ParamTree) -> ParamTree {
        self.combine(rhs)
    }
}

/// `BranchP(left, right)`.
pub fn combine_params(left: ParamTree, right: ParamTree) -> ParamTree {
    left.combine(right)
}

/// Visits every tunable coordinate of a leaf in canonical order.
fn visit_leaf(
    leaf: &mut LeafParams,
    f: &mut impl FnMut(&'static str, Option<usize>, &mut f64, Constraint),
) {
    fn each(
        name: &'static str,
        v: &mut [f64],
        c: Constraint,
        f: &mut impl FnMut(&'static str, Option<usize>, &mut f64, Constraint),
    ) {
        for (i, x) in v.iter_mut().enumerate() {
            f(name, Some(i), x, c);
        }
    }
    each("init_mean", &mut leaf.init.mean, Constraint::Real, f);
    each("init_sd", &mut leaf.init.sd, Constraint::NonNegative, f);
    if let Some(s) = leaf.scale.as_mut() {
        f("scale", None, s, Constraint::Positive);
    }
    match &mut leaf.sde {
        SdeParams::Brownian { mu, sigma } => {
            each("mu", mu, Constraint::Real, f);
            each("sigma", sigma, Constraint::NonNegative, f);
        }
        SdeParams::OrnsteinUhlenbeck {
            alpha,
            theta,
            sigma,
        } => {
            each("alpha", alpha, Constraint::Positive, f);
            each("theta", theta, Constraint::Real, f);
            each("sigma", sigma, Constraint::NonNegative, f);
        }
        SdeParams::EulerMaruyama {
            drift, diffusion, ..
        } => {
            if let Drift::Affine { slope, intercept } = drift {
                each("slope", slope, Constraint::Real, f);
                each("intercept", intercept, Constraint::Real, f);
            }
            if let Diffusion::Constant(sigma) = diffusion {
                each("sigma", sigma, Constraint::NonNegative, f);
            }
        }
    }
}
