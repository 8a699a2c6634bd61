//! Log-Gaussian Cox process support.
//!
//! The hazard is `lambda(t) = exp(F_t' x(t))` and an event at `t` following one
//! at `t0` has log-density `ln lambda(t) - (Lambda(t) - Lambda(t0))`. The
//! cumulative hazard is integrated with the left-rectangle rule on an Euler
//! grid whose spacing never exceeds `grid_dt`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::obs::{Family, EPS, LAMBDA_MAX};
use crate::sde::PreparedKernel;
use crate::tree::StateTree;

/// A state augmented with its cumulative hazard.
#[derive(Debug, Clone, PartialEq)]
pub struct LgcpAugmentedState {
    pub base: StateTree,
    pub cum_hazard: f64,
}

impl LgcpAugmentedState {
    pub fn new(base: StateTree) -> Self {
        LgcpAugmentedState { base, cum_hazard: 0.0 }
    }
}

/// `ln lambda(t) - delta_cum_hazard`.
pub fn event_log_density(hazard: f64, delta_cum_hazard: f64) -> f64 {
    hazard.ln() - delta_cum_hazard
}

/// Fails unless event times strictly increase.
pub fn check_event_times(times: &[f64]) -> Result<()> {
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::NonincreasingEventTimes {
                previous: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn log_hazard(gamma: f64) -> f64 {
    gamma.clamp(EPS.ln(), LAMBDA_MAX.ln())
}

/// Grid, kernels and transform vectors for one inter-event interval, shared
/// by all particles.
#[derive(Debug, Clone)]
pub struct LgcpGrid {
    steps: usize,
    delta: f64,
    dim: usize,
    kernels: Vec<PreparedKernel>,
    transforms: Vec<f64>,
}

impl LgcpGrid {
    pub fn new(model: &Model, t0: f64, t1: f64, grid_dt: f64) -> Result<Self> {
        if !(grid_dt > 0.0 && grid_dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {grid_dt}")));
        }
        if !(t1 >= t0) {
            return Err(Error::NonmonotoneTime { previous: t0, next: t1 });
        }
        let span = t1 - t0;
        let steps = if span == 0.0 { 0 } else { (span / grid_dt).ceil().max(1.0) as usize };
        let delta = if steps == 0 { 0.0 } else { span / steps as f64 };
        let dim = model.dim();
        let mut transforms = vec![0.0; (steps + 1) * dim];
        for (j, f) in transforms.chunks_mut(dim).enumerate() {
            let t = if j == steps { t1 } else { t0 + j as f64 * delta };
            model.transform_into(t, f);
        }
        Ok(LgcpGrid {
            steps,
            delta,
            dim,
            kernels: model.prepare_transition(delta)?,
            transforms,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn gamma(&self, j: usize, x: &[f64]) -> f64 {
        let f = &self.transforms[j * self.dim..(j + 1) * self.dim];
        f.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Advances a flat state across the interval. Returns the cumulative
    /// hazard increment and `ln lambda` at the end of the interval.
    pub fn advance<R: Rng>(&self, model: &Model, x: &mut [f64], leaf_rngs: &mut [R]) -> (f64, f64) {
        let mut cum = 0.0;
        for j in 0..self.steps {
            cum += log_hazard(self.gamma(j, x)).exp() * self.delta;
            for ((leaf, kernel), rng) in model.leaves().iter().zip(&self.kernels).zip(leaf_rngs.iter_mut()) {
                kernel.apply(&mut x[leaf.offset..leaf.offset + leaf.dim], rng);
            }
        }
        (cum, log_hazard(self.gamma(self.steps, x)))
    }
}

impl Model {
    fn require_events(&self) -> Result<()> {
        match self.family() {
            Some(Family::EventTime) => Ok(()),
            None => Err(Error::UnusableIdentity),
            Some(_) => Err(Error::InvalidParameter("not an event-time model".into())),
        }
    }

    /// `ln lambda(t) - (Lambda(t) - Lambda(t0))`.
    pub fn event_log_density(&self, hazard: f64, delta_cum_hazard: f64) -> Result<f64> {
        self.require_events()?;
        Ok(event_log_density(hazard, delta_cum_hazard))
    }

    /// Moves an augmented state from `t0` to the event at `t1`, returning the
    /// new state and the event's log-density.
    pub fn lgcp_advance<R: Rng + ?Sized>(
        &self,
        s: &LgcpAugmentedState,
        t0: f64,
        t1: f64,
        grid_dt: f64,
        rng: &mut R,
    ) -> Result<(LgcpAugmentedState, f64)> {
        self.require_events()?;
        self.check_state(&s.base)?;
        let grid = LgcpGrid::new(self, t0, t1, grid_dt)?;
        let mut x = s.base.flatten();
        let mut rngs = self.leaf_rngs(rng);
        let (delta, lh) = grid.advance(self, &mut x, &mut rngs);
        Ok((
            LgcpAugmentedState {
                base: self.unflatten(&x)?,
                cum_hazard: s.cum_hazard + delta,
            },
            lh - delta,
        ))
    }
}
