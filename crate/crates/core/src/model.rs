//! Parameterised models.
//!
//! A `Model` pairs a composition tree of components (`UnparamModel`) with a
//! parameter tree of the same shape. It provides the six operations every
//! model shares (observation draw, link, linear transform, state step,
//! initial draw, observation log-density) on `StateTree`s, plus a flat view
//! in which a state is the concatenation of its leaves. The particle filter
//! works on the flat view.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::obs::{Component, Family, PreparedObs};
use crate::params::{InitialStateParams, ParamTree};
use crate::sde::{PreparedKernel, SdeParams};
use crate::tree::StateTree;

/// Composition tree of model components.
#[derive(Debug, Clone, PartialEq)]
pub enum UnparamModel {
    /// The unit of composition, with a zero-dimensional state.
    Identity,
    Leaf(Component),
    Branch(Box<UnparamModel>, Box<UnparamModel>),
}

impl UnparamModel {
    /// `self * other`, dropping identities.
    pub fn compose(self, other: UnparamModel) -> UnparamModel {
        match (self, other) {
            (UnparamModel::Identity, m) | (m, UnparamModel::Identity) => m,
            (a, b) => UnparamModel::Branch(Box::new(a), Box::new(b)),
        }
    }

    /// Components in left-to-right order.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        fn walk(m: &UnparamModel, out: &mut Vec<Component>) {
            match m {
                UnparamModel::Identity => {}
                UnparamModel::Leaf(c) => out.push(*c),
                UnparamModel::Branch(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn dim(&self) -> usize {
        self.components().iter().map(Component::dim).sum()
    }
}

/// Where one leaf lives in the flat state vector, and its parameters.
#[derive(Debug, Clone)]
pub struct LeafLayout {
    pub component: Component,
    pub offset: usize,
    pub dim: usize,
    pub init: InitialStateParams,
    pub sde: SdeParams,
}

impl LeafLayout {
    #[inline]
    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }
}

#[derive(Debug)]
struct Inner {
    shape: UnparamModel,
    params: ParamTree,
    leaves: Vec<LeafLayout>,
    dim: usize,
    family: Option<Family>,
    scale: Option<f64>,
}

/// A composition of components with parameters attached. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Model(Arc<Inner>);

/// Checks that `params` fits `shape`: same branching, matching leaf
/// dimensions, valid SDE parameters, and an observation scale exactly where
/// one is used (the leftmost leaf of a Gaussian-observed model).
pub fn validate_shape(shape: &UnparamModel, params: &ParamTree) -> Result<()> {
    walk_shape(shape, params, "root", true)
}

fn dim_error(path: &str, e: Error) -> Error {
    match e {
        Error::DimensionMismatch { expected, got } => {
            Error::shape(path, format!("leaf dimension: expected {expected}, got {got}"))
        }
        other => other,
    }
}

fn walk_shape(shape: &UnparamModel, params: &ParamTree, path: &str, leftmost: bool) -> Result<()> {
    match (shape, params) {
        (UnparamModel::Identity, ParamTree::Leaf(l)) => {
            if path != "root" {
                return Err(Error::shape(path, "identity inside a composition"));
            }
            if l.init.dim() != 0 || !l.init.sd.is_empty() || l.scale.is_some() {
                return Err(Error::shape(path, "the identity model takes empty parameters"));
            }
            l.sde.validate(0).map_err(|e| dim_error(path, e))
        }
        (UnparamModel::Leaf(c), ParamTree::Leaf(l)) => {
            c.validate()?;
            let dim = c.dim();
            l.init.validate(dim).map_err(|e| dim_error(path, e))?;
            l.sde.validate(dim).map_err(|e| dim_error(path, e))?;
            let needs = leftmost && c.family().needs_scale();
            match (needs, l.scale) {
                (true, None) => Err(Error::shape(path, "missing observation scale")),
                (true, Some(v)) if !(v > 0.0 && v.is_finite()) => Err(Error::NonpositiveScale(v)),
                (false, Some(_)) => Err(Error::shape(path, "observation scale given for a component that does not use it")),
                _ => Ok(()),
            }
        }
        (UnparamModel::Branch(a, b), ParamTree::Branch(p, q)) => {
            walk_shape(a, p, &format!("{path}.left"), leftmost)?;
            walk_shape(b, q, &format!("{path}.right"), false)
        }
        (UnparamModel::Branch(..), ParamTree::Leaf(_)) => Err(Error::shape(path, "expected a branch, found a leaf")),
        (_, ParamTree::Branch(..)) => Err(Error::shape(path, "expected a leaf, found a branch")),
    }
}

fn check_state_shape(shape: &UnparamModel, state: &StateTree, path: &str) -> Result<()> {
    match (shape, state) {
        (UnparamModel::Identity, StateTree::Leaf(v)) if v.is_empty() => Ok(()),
        (UnparamModel::Leaf(c), StateTree::Leaf(v)) if v.len() == c.dim() => Ok(()),
        (UnparamModel::Identity | UnparamModel::Leaf(_), StateTree::Leaf(v)) => Err(Error::shape(
            path,
            format!("leaf dimension: expected {}, got {}", shape.dim(), v.len()),
        )),
        (UnparamModel::Branch(a, b), StateTree::Branch(l, r)) => {
            check_state_shape(a, l, &format!("{path}.left"))?;
            check_state_shape(b, r, &format!("{path}.right"))
        }
        (UnparamModel::Branch(..), StateTree::Leaf(_)) => Err(Error::shape(path, "expected a branch state, found a leaf")),
        (_, StateTree::Branch(..)) => Err(Error::shape(path, "expected a leaf state, found a branch")),
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time increment must be finite and nonnegative, got {dt}")))
    }
}

/// Draws `mean + sd * z` per coordinate, always consuming one normal each.
pub(crate) fn draw_initial<R: Rng + ?Sized>(init: &InitialStateParams, x: &mut [f64], rng: &mut R) {
    for (i, xi) in x.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *xi = if init.sd[i] != 0.0 {
            init.mean[i] + init.sd[i] * z
        } else {
            init.mean[i]
        };
    }
}

impl Model {
    pub fn new(shape: UnparamModel, params: ParamTree) -> Result<Model> {
        validate_shape(&shape, &params)?;
        let components = shape.components();
        let mut leaves = Vec::with_capacity(components.len());
        let mut offset = 0;
        if !components.is_empty() {
            for (c, p) in components.iter().zip(params.leaves()) {
                leaves.push(LeafLayout {
                    component: *c,
                    offset,
                    dim: c.dim(),
                    init: p.init.clone(),
                    sde: p.sde.clone(),
                });
                offset += c.dim();
            }
        }
        let family = components.first().map(Component::family);
        let scale = params.leaves()[0].scale;
        Ok(Model(Arc::new(Inner {
            shape,
            params,
            leaves,
            dim: offset,
            family,
            scale,
        })))
    }

    /// The same composition with different parameters.
    pub fn with_params(&self, params: ParamTree) -> Result<Model> {
        Model::new(self.0.shape.clone(), params)
    }

    pub fn shape(&self) -> &UnparamModel {
        &self.0.shape
    }

    pub fn params(&self) -> &ParamTree {
        &self.0.params
    }

    pub fn is_identity(&self) -> bool {
        self.0.shape == UnparamModel::Identity
    }

    /// Observation family of the leftmost component; `None` for the identity.
    pub fn family(&self) -> Option<Family> {
        self.0.family
    }

    pub fn scale(&self) -> Option<f64> {
        self.0.scale
    }

    /// Total state dimension.
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn leaves(&self) -> &[LeafLayout] {
        &self.0.leaves
    }

    fn family_or_err(&self) -> Result<Family> {
        self.0.family.ok_or(Error::UnusableIdentity)
    }

    /// `eta = g(gamma)`. The identity model's link is the identity.
    pub fn link(&self, gamma: f64) -> f64 {
        match self.0.family {
            Some(f) => f.link(gamma),
            None => gamma,
        }
    }

    /// `ln pi(y | eta)`.
    pub fn log_density(&self, eta: f64, y: f64) -> Result<f64> {
        self.family_or_err()?.log_density(eta, y, self.0.scale)
    }

    /// Draws `y ~ pi(. | eta)`.
    pub fn observation_draw<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> Result<f64> {
        self.family_or_err()?.draw(eta, self.0.scale, rng)
    }

    /// Checks `y` against the observation family.
    pub fn check_observation(&self, y: f64) -> Result<()> {
        self.family_or_err()?.check(y)
    }

    /// `y` with its constant terms precomputed, for weighting particles.
    pub fn prepare_observation(&self, y: f64) -> Result<PreparedObs> {
        PreparedObs::new(self.family_or_err()?, y, self.0.scale)
    }

    /// Fails unless `state` has this model's tree shape and leaf dimensions.
    pub fn check_state(&self, state: &StateTree) -> Result<()> {
        check_state_shape(&self.0.shape, state, "root")
    }

    /// `gamma = F_t' x`, summing each component's transform of its own leaf.
    pub fn linear_transform(&self, state: &StateTree, t: f64) -> Result<f64> {
        self.check_state(state)?;
        let x = state.flatten();
        let f = self.transform_vector(t);
        Ok(x.iter().zip(&f).map(|(a, b)| a * b).sum())
    }

    /// The concatenated `F_t`, one entry per flat state coordinate.
    pub fn transform_vector(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.0.dim];
        self.transform_into(t, &mut out);
        out
    }

    pub fn transform_into(&self, t: f64, out: &mut [f64]) {
        for leaf in &self.0.leaves {
            leaf.component.transform_into(t, &mut out[leaf.range()]);
        }
    }

    /// Rebuilds a state tree from its flattened coordinates.
    pub fn unflatten(&self, x: &[f64]) -> Result<StateTree> {
        if x.len() != self.0.dim {
            return Err(Error::DimensionMismatch {
                expected: self.0.dim,
                got: x.len(),
            });
        }
        fn build(m: &UnparamModel, x: &[f64], at: &mut usize) -> StateTree {
            match m {
                UnparamModel::Identity => StateTree::Leaf(Vec::new()),
                UnparamModel::Leaf(c) => {
                    let v = x[*at..*at + c.dim()].to_vec();
                    *at += c.dim();
                    StateTree::Leaf(v)
                }
                UnparamModel::Branch(l, r) => {
                    let l = build(l, x, at);
                    StateTree::branch(l, build(r, x, at))
                }
            }
        }
        Ok(build(&self.0.shape, x, &mut 0))
    }

    /// Draws `x(t0)`, leaves in order from a single generator.
    pub fn initial_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> StateTree {
        let mut x = vec![0.0; self.0.dim];
        for leaf in &self.0.leaves {
            draw_initial(&leaf.init, &mut x[leaf.range()], rng);
        }
        self.unflatten(&x).expect("dimension is the model's own")
    }

    /// Advances `state` by `dt`, leaves in order from a single generator.
    pub fn step<R: Rng + ?Sized>(&self, state: &StateTree, dt: f64, rng: &mut R) -> Result<StateTree> {
        self.check_state(state)?;
        let kernels = self.prepare_transition(dt)?;
        let mut x = state.flatten();
        for (leaf, k) in self.0.leaves.iter().zip(&kernels) {
            k.apply(&mut x[leaf.range()], rng);
        }
        self.unflatten(&x)
    }

    /// Advances `state` by `dt`, drawing leaf `k`'s noise from `rng_for_leaf(k)`.
    pub fn step_leaves<R: Rng>(
        &self,
        state: &StateTree,
        dt: f64,
        rng_for_leaf: impl FnMut(usize) -> R,
    ) -> Result<StateTree> {
        self.check_state(state)?;
        let kernels = self.prepare_transition(dt)?;
        let mut x = state.flatten();
        self.propagate_flat(&kernels, &mut x, rng_for_leaf);
        self.unflatten(&x)
    }

    /// One prepared kernel per leaf for a transition of length `dt`.
    pub fn prepare_transition(&self, dt: f64) -> Result<Vec<PreparedKernel>> {
        check_dt(dt)?;
        Ok(self.0.leaves.iter().map(|l| l.sde.prepare(dt)).collect())
    }

    /// Advances a flat state in place.
    #[inline]
    pub fn propagate_flat<R: Rng>(
        &self,
        kernels: &[PreparedKernel],
        x: &mut [f64],
        mut rng_for_leaf: impl FnMut(usize) -> R,
    ) {
        let leaves = &self.0.leaves;
        for k in 0..kernels.len() {
            let kernel = &kernels[k];
            if matches!(kernel, PreparedKernel::Identity) {
                continue;
            }
            let x = &mut x[leaves[k].range()];
            if kernel.needs_rng() {
                kernel.apply(x, &mut rng_for_leaf(k));
            } else {
                kernel.apply_noise_free(x);
            }
        }
    }

    /// Draws a flat initial state in place.
    pub fn initial_flat<R: Rng>(&self, x: &mut [f64], mut rng_for_leaf: impl FnMut(usize) -> R) {
        for (k, leaf) in self.0.leaves.iter().enumerate() {
            let mut rng = rng_for_leaf(k);
            draw_initial(&leaf.init, &mut x[leaf.range()], &mut rng);
        }
    }

    /// One independent generator per leaf, seeded from `rng`.
    pub(crate) fn leaf_rngs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<SplitMix64> {
        (0..self.0.leaves.len())
            .map(|_| SplitMix64::seed_from_u64(rng.random()))
            .collect()
    }
}
