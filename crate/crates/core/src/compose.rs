//! Model composition.
//!
//! `compose(m1, m2)` observes through `m1`'s family and link, sums the two
//! linear transforms over the branches of a paired state, and evolves each
//! branch with its own kernel. The identity model is the unit: composing with
//! it returns the other model unchanged.

use crate::error::{Error, Result};
use crate::model::{Model, UnparamModel};
use crate::params::{LeafParams, ParamTree};
use crate::tree::StateTree;

/// The identity model: zero-dimensional state, `F_t' x = 0`, no observations.
pub fn identity_model() -> Model {
    Model::new(UnparamModel::Identity, ParamTree::Leaf(LeafParams::empty())).expect("identity parameters are valid")
}

fn strip_scales(p: &ParamTree) -> ParamTree {
    p.map_leaves(&mut |_, l| {
        Ok(LeafParams {
            scale: None,
            ..l.clone()
        })
    })
    .expect("infallible")
}

/// `m1 * m2`. Only `m1`'s observation scale is kept.
pub fn compose(m1: &Model, m2: &Model) -> Model {
    if m1.is_identity() {
        return m2.clone();
    }
    if m2.is_identity() {
        return m1.clone();
    }
    let shape = m1.shape().clone().compose(m2.shape().clone());
    let params = m1.params().clone() + strip_scales(m2.params());
    Model::new(shape, params).expect("components were validated separately")
}

/// Left-associated composition of a list; empty gives the identity.
pub fn compose_all<'a>(models: impl IntoIterator<Item = &'a Model>) -> Model {
    models
        .into_iter()
        .fold(identity_model(), |acc, m| compose(&acc, m))
}

/// Combines two linear transforms over the branches of a paired state.
pub fn concat_transform<F1, F2>(f1: F1, f2: F2) -> impl Fn(&StateTree, f64) -> Result<f64>
where
    F1: Fn(&StateTree, f64) -> Result<f64>,
    F2: Fn(&StateTree, f64) -> Result<f64>,
{
    move |state, t| match state {
        StateTree::Branch(l, r) => Ok(f1(l, t)? + f2(r, t)?),
        StateTree::Leaf(_) => Err(Error::shape("root", "expected a branch state, found a leaf")),
    }
}
