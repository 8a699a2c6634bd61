//! Forward simulation.
//!
//! `simulate_at_times` draws a latent path and one observation per requested
//! time. `simulate_lgcp` draws event times from a log-Gaussian Cox process by
//! thinning a homogeneous process whose rate is the maximum of the hazard
//! over a fine grid.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::lgcp::log_hazard;
use crate::model::Model;
use crate::obs::Family;
use crate::rng::{Purpose, Substreams};
use crate::tree::{StateTree, TimedObservation};

/// Observations together with the latent states that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub observations: Vec<TimedObservation>,
    /// `x(t0)`.
    pub initial: StateTree,
    /// The state at each observation time.
    pub states: Vec<StateTree>,
}

/// Draws `x(t_start)`, then for each time advances the state, forms
/// `eta = g(F_t' x)` and draws `y`. Step `i` draws its state noise from the
/// `Propagate` substream and its observation from the `Observe` substream of
/// `seed`, so a path can be replayed one step at a time.
pub fn simulate_at_times(model: &Model, times: &[f64], t_start: f64, seed: u64) -> Result<Simulation> {
    let family = model.family().ok_or(Error::UnusableIdentity)?;
    if family == Family::EventTime {
        return Err(Error::RequiresCumulativeHazard("simulate_at_times"));
    }
    let streams = Substreams::new(seed);
    let mut x = vec![0.0; model.dim()];
    model.initial_flat(&mut x, |k| streams.stream(Purpose::Init, 0, 0, k as u64));
    let initial = model.unflatten(&x)?;
    let mut f = vec![0.0; model.dim()];
    let mut t0 = t_start;
    let mut observations = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if !(t >= t0) {
            return Err(Error::NonmonotoneTime { previous: t0, next: t });
        }
        let kernels = model.prepare_transition(t - t0)?;
        model.propagate_flat(&kernels, &mut x, |k| streams.stream(Purpose::Propagate, i as u64, 0, k as u64));
        model.transform_into(t, &mut f);
        let gamma: f64 = f.iter().zip(&x).map(|(a, b)| a * b).sum();
        let mut rng = streams.stream(Purpose::Observe, i as u64, 0, 0);
        let y = model.observation_draw(model.link(gamma), &mut rng)?;
        observations.push(TimedObservation::new(t, y));
        states.push(model.unflatten(&x)?);
        t0 = t;
    }
    Ok(Simulation {
        observations,
        initial,
        states,
    })
}

/// One accepted thinning proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningRecord {
    pub time: f64,
    /// `lambda(t) / U`.
    pub ratio: f64,
    /// The uniform the ratio was compared against.
    pub uniform: f64,
}

/// Event times plus what is needed to audit the thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct LgcpSimulation {
    pub events: Vec<f64>,
    pub accepted: Vec<ThinningRecord>,
    /// Dominating rate, the grid maximum of the hazard.
    pub envelope: f64,
    pub proposals: usize,
    /// Proposals at which the hazard exceeded the envelope.
    pub violations: usize,
    pub grid_dt: f64,
}

impl LgcpSimulation {
    /// Fraction of proposals at which the envelope failed to dominate.
    pub fn violation_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.violations as f64 / self.proposals as f64
        }
    }
}

/// Grid spacing used when none is given: `horizon / 10^4`.
pub fn default_grid_dt(horizon: f64) -> f64 {
    horizon * 1e-4
}

/// Simulates event times on `(0, horizon]`. The state is drawn at time 0,
/// stepped across a grid of spacing at most `grid_dt`, and held constant
/// between grid points.
pub fn simulate_lgcp(model: &Model, horizon: f64, grid_dt: Option<f64>, seed: u64) -> Result<LgcpSimulation> {
    match model.family() {
        Some(Family::EventTime) => {}
        None => return Err(Error::UnusableIdentity),
        Some(_) => return Err(Error::InvalidParameter("not an event-time model".into())),
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let grid_dt = grid_dt.unwrap_or_else(|| default_grid_dt(horizon));
    if !(grid_dt > 0.0 && grid_dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {grid_dt}")));
    }
    let steps = (horizon / grid_dt).ceil().max(1.0) as usize;
    let delta = horizon / steps as f64;
    let streams = Substreams::new(seed);
    let dim = model.dim();
    let kernels = model.prepare_transition(delta)?;

    // the path, one row per grid point
    let mut path = vec![0.0; (steps + 1) * dim];
    model.initial_flat(&mut path[..dim], |k| streams.stream(Purpose::Init, 0, 0, k as u64));
    for j in 1..=steps {
        let (prev, next) = path.split_at_mut(j * dim);
        next[..dim].copy_from_slice(&prev[(j - 1) * dim..]);
        model.propagate_flat(&kernels, &mut next[..dim], |k| {
            streams.stream(Purpose::Propagate, j as u64, 0, k as u64)
        });
    }
    let mut f = vec![0.0; dim];
    let hazard = |t: f64, j: usize, f: &mut [f64]| {
        model.transform_into(t, f);
        let x = &path[j * dim..(j + 1) * dim];
        log_hazard(f.iter().zip(x).map(|(a, b)| a * b).sum()).exp()
    };
    let envelope = (0..=steps)
        .map(|j| hazard(j as f64 * delta, j, &mut f))
        .fold(0.0, f64::max);

    let mut rng: SplitMix64 = streams.stream(Purpose::Observe, 0, 0, 0);
    let gaps = Exp::new(envelope).map_err(|e| Error::InvalidParameter(format!("envelope {envelope}: {e}")))?;
    let mut out = LgcpSimulation {
        events: Vec::new(),
        accepted: Vec::new(),
        envelope,
        proposals: 0,
        violations: 0,
        grid_dt,
    };
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > horizon {
            break;
        }
        let j = ((t / delta).floor() as usize).min(steps);
        let ratio = hazard(t, j, &mut f) / envelope;
        let uniform: f64 = rng.random();
        out.proposals += 1;
        if ratio > 1.0 {
            out.violations += 1;
        }
        // a zero-length gap would break strict ordering
        if uniform < ratio && out.events.last().is_none_or(|&last| t > last) {
            out.events.push(t);
            out.accepted.push(ThinningRecord { time: t, ratio, uniform });
        }
    }
    Ok(out)
}
