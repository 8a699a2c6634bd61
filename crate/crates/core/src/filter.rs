//! Bootstrap particle filter.
//!
//! Each step resamples the previous cloud by its weights, propagates every
//! particle over the elapsed time and weights it by the observation density.
//! The running log-likelihood adds `ln sum_i W_i w_i` where `W_i` are the
//! carried (normalised) weights, which is the log mean weight whenever the
//! cloud was resampled. Weights live in log space throughout.
//!
//! Particles are stored as one flat `N x D` buffer of concatenated leaf
//! states. Every random draw comes from a substream keyed by the filter seed,
//! the step index and the particle index, so serial and parallel runs produce
//! bit-identical results.

use rayon::prelude::*;
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::lgcp::LgcpGrid;
use crate::model::Model;
use crate::obs::Family;
use crate::resample::{resample_normalised, Resampling};
use crate::rng::{Purpose, Substreams};
use crate::stats::{pairwise_sum, weighted_quantiles, weighted_quantiles_inverse};
use crate::tree::{StateTree, TimedObservation};

/// Lower and upper probabilities of the 99% credible band.
pub const BAND: (f64, f64) = (0.005, 0.995);

/// Default grid spacing for the cumulative hazard, as a fraction of each gap.
pub const DEFAULT_LGCP_GRID_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub resampling: Resampling,
    /// Resample only when the effective sample size drops below this
    /// fraction of `N`. `None` resamples at every step.
    pub ess_threshold: Option<f64>,
    /// Euler grid spacing for event-time models. `None` uses
    /// `DEFAULT_LGCP_GRID_FRACTION` of each inter-event gap.
    pub grid_dt: Option<f64>,
    pub seed: u64,
    /// Propagate and weight particles on the rayon thread pool.
    pub parallel: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            n_particles: 1000,
            resampling: Resampling::Multinomial,
            ess_threshold: None,
            grid_dt: None,
            seed: 0,
            parallel: false,
        }
    }
}

impl FilterConfig {
    pub fn new(n_particles: usize, seed: u64) -> Self {
        FilterConfig {
            n_particles,
            seed,
            ..FilterConfig::default()
        }
    }

    pub fn with_resampling(mut self, r: Resampling) -> Self {
        self.resampling = r;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn with_grid_dt(mut self, grid_dt: f64) -> Self {
        self.grid_dt = Some(grid_dt);
        self
    }

    pub fn with_ess_threshold(mut self, fraction: f64) -> Self {
        self.ess_threshold = Some(fraction);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("the filter needs at least one particle".into()));
        }
        if let Some(e) = self.ess_threshold {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidConfig(format!("ESS threshold must lie in [0, 1], got {e}")));
            }
        }
        if let Some(g) = self.grid_dt {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!("grid spacing must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// A weighted particle cloud after some number of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// `N` rows of `dim` concatenated leaf coordinates.
    pub particles: Vec<f64>,
    pub dim: usize,
    /// Normalised log-weights: `sum exp(log_weights) = 1`.
    pub log_weights: Vec<f64>,
    /// The same weights on the natural scale.
    pub weights: Vec<f64>,
    /// Time of the last processed observation.
    pub t0: f64,
    /// Running path log-likelihood.
    pub ll: f64,
    /// Number of observations processed.
    pub step: u64,
    /// Per-particle cumulative hazard (event-time models only, else empty).
    pub cum_hazard: Vec<f64>,
}

impl FilterState {
    pub fn n_particles(&self) -> usize {
        self.log_weights.len()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particle_tree(&self, model: &Model, i: usize) -> Result<StateTree> {
        model.unflatten(self.particle(i))
    }

    pub fn ess(&self) -> f64 {
        let s2: f64 = self.weights.iter().map(|x| x * x).sum();
        1.0 / s2
    }

    fn is_uniform(&self) -> bool {
        self.log_weights.windows(2).all(|w| w[0] == w[1])
    }
}

/// Filtering distribution of `eta` at one observation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSummary {
    pub time: f64,
    pub eta_mean: f64,
    pub eta_lower: f64,
    pub eta_upper: f64,
    pub ll_increment: f64,
    /// Running log-likelihood including this observation.
    pub ll: f64,
}

/// One-step predictive distribution at a future time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub time: f64,
    pub eta_mean: f64,
    pub eta_lower: f64,
    pub eta_upper: f64,
    pub obs_mean: f64,
    pub obs_lower: f64,
    pub obs_upper: f64,
}

/// A particle filter bound to a model, with reusable scratch buffers.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    model: Model,
    config: FilterConfig,
    streams: Substreams,
    family: Family,
    ancestors: Vec<usize>,
    buffer: Vec<f64>,
    hazard_buffer: Vec<f64>,
    transform: Vec<f64>,
    gammas: Vec<f64>,
    scratch: Vec<f64>,
}

impl ParticleFilter {
    pub fn new(model: &Model, config: FilterConfig) -> Result<Self> {
        config.validate()?;
        let family = model.family().ok_or(Error::UnusableIdentity)?;
        Ok(ParticleFilter {
            model: model.clone(),
            streams: Substreams::new(config.seed),
            config,
            family,
            ancestors: Vec::new(),
            buffer: Vec::new(),
            hazard_buffer: Vec::new(),
            transform: Vec::new(),
            gammas: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// `N` draws from the initial distribution with equal weights.
    pub fn init(&self, t_start: f64) -> Result<FilterState> {
        if !t_start.is_finite() {
            return Err(Error::InvalidParameter(format!("start time must be finite, got {t_start}")));
        }
        let n = self.config.n_particles;
        let dim = self.model.dim();
        let mut particles = vec![0.0; n * dim];
        let ss = self.streams.at(Purpose::Init, 0);
        for (i, row) in particles.chunks_mut(dim).enumerate() {
            self.model.initial_flat(&mut row[..dim], |k| ss.stream(i as u64, k as u64));
        }
        let cum_hazard = if self.family == Family::EventTime {
            vec![0.0; n]
        } else {
            Vec::new()
        };
        Ok(FilterState {
            particles,
            dim,
            log_weights: vec![-(n as f64).ln(); n],
            weights: vec![1.0 / n as f64; n],
            t0: t_start,
            ll: 0.0,
            step: 0,
            cum_hazard,
        })
    }

    fn resample(&mut self, s: &mut FilterState) -> Result<()> {
        let n = s.n_particles();
        let wanted = match self.config.ess_threshold {
            None => true,
            Some(frac) => s.ess() < frac * n as f64,
        };
        if !wanted || s.is_uniform() {
            return Ok(());
        }
        let mut rng = self.streams.stream(Purpose::Resample, s.step, 0, 0);
        resample_normalised(self.config.resampling, &s.weights, &mut rng, &mut self.ancestors);
        let dim = s.dim;
        self.buffer.clear();
        for &a in &self.ancestors {
            self.buffer.extend_from_slice(&s.particles[a * dim..(a + 1) * dim]);
        }
        std::mem::swap(&mut self.buffer, &mut s.particles);
        if !s.cum_hazard.is_empty() {
            self.hazard_buffer.clear();
            self.hazard_buffer.extend(self.ancestors.iter().map(|&a| s.cum_hazard[a]));
            std::mem::swap(&mut self.hazard_buffer, &mut s.cum_hazard);
        }
        s.log_weights.fill(-(n as f64).ln());
        s.weights.fill(1.0 / n as f64);
        Ok(())
    }

    /// Assimilates one observation in place and returns the log-likelihood
    /// increment.
    pub fn step(&mut self, s: &mut FilterState, y: TimedObservation) -> Result<f64> {
        let event = self.family == Family::EventTime;
        if y.time < s.t0 || y.time.is_nan() || (event && y.time == s.t0) {
            return Err(Error::NonmonotoneTime {
                previous: s.t0,
                next: y.time,
            });
        }
        self.resample(s)?;
        let ps = self.streams.at(Purpose::Propagate, s.step);
        let n = s.n_particles();
        let dim = s.dim;
        self.gammas.resize(n, 0.0);
        if event {
            let grid_dt = self
                .config
                .grid_dt
                .unwrap_or((y.time - s.t0) * DEFAULT_LGCP_GRID_FRACTION);
            let grid = LgcpGrid::new(&self.model, s.t0, y.time, grid_dt)?;
            let model = &self.model;
            let work = |(i, ((row, lw), (gamma, ch))): (usize, ((&mut [f64], &mut f64), (&mut f64, &mut f64)))| {
                let mut rngs: Vec<SplitMix64> = (0..model.leaves().len()).map(|k| ps.stream(i as u64, k as u64)).collect();
                let (delta, log_hazard) = grid.advance(model, row, &mut rngs);
                *ch += delta;
                *gamma = log_hazard;
                *lw += finite_or_neg_inf(log_hazard - delta);
            };
            if self.config.parallel {
                s.particles
                    .par_chunks_mut(dim)
                    .zip(s.log_weights.par_iter_mut())
                    .zip(self.gammas.par_iter_mut().zip(s.cum_hazard.par_iter_mut()))
                    .enumerate()
                    .for_each(work);
            } else {
                s.particles
                    .chunks_mut(dim)
                    .zip(s.log_weights.iter_mut())
                    .zip(self.gammas.iter_mut().zip(s.cum_hazard.iter_mut()))
                    .enumerate()
                    .for_each(work);
            }
        } else {
            let obs = self.model.prepare_observation(y.value)?;
            let kernels = self.model.prepare_transition(y.time - s.t0)?;
            self.transform.resize(dim, 0.0);
            self.model.transform_into(y.time, &mut self.transform);
            let model = &self.model;
            let f = &self.transform;
            let work = |(i, ((row, lw), gamma)): (usize, ((&mut [f64], &mut f64), &mut f64))| {
                model.propagate_flat(&kernels, row, |k| ps.stream(i as u64, k as u64));
                *gamma = dot(f, row);
                *lw += finite_or_neg_inf(obs.log_weight(*gamma));
            };
            if self.config.parallel {
                s.particles
                    .par_chunks_mut(dim)
                    .zip(s.log_weights.par_iter_mut())
                    .zip(self.gammas.par_iter_mut())
                    .enumerate()
                    .for_each(work);
            } else {
                for i in 0..n {
                    let row = &mut s.particles[i * dim..(i + 1) * dim];
                    model.propagate_flat(&kernels, row, |k| ps.stream(i as u64, k as u64));
                    let g = dot(f, row);
                    self.gammas[i] = g;
                    s.log_weights[i] += finite_or_neg_inf(obs.log_weight(g));
                }
            }
        }
        let max = s.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > f64::NEG_INFINITY && max < f64::INFINITY) {
            return Err(Error::AllWeightsZero { time: y.time });
        }
        self.scratch.clear();
        self.scratch.extend(s.log_weights.iter().map(|w| (w - max).exp()));
        let total = pairwise_sum(&self.scratch);
        let increment = max + total.ln();
        for (w, e) in s.weights.iter_mut().zip(&self.scratch) {
            *w = e / total;
        }
        for w in s.log_weights.iter_mut() {
            *w -= increment;
        }
        s.ll += increment;
        s.t0 = y.time;
        s.step += 1;
        Ok(increment)
    }

    /// Weighted summary of `eta` from the most recent step.
    pub fn summary(&self, s: &FilterState, increment: f64) -> FilterSummary {
        let w = &s.weights;
        let etas: Vec<f64> = self.gammas.iter().map(|g| self.family.link(*g)).collect();
        let mean = dot(w, &etas) / pairwise_sum(w);
        let q = weighted_quantiles(&etas, w, &[BAND.0, BAND.1]);
        FilterSummary {
            time: s.t0,
            eta_mean: mean,
            eta_lower: q[0].min(mean),
            eta_upper: q[1].max(mean),
            ll_increment: increment,
            ll: s.ll,
        }
    }

    /// Predictive distribution of `eta` and of a fresh observation at time
    /// `t >= s.t0`, without assimilating anything. `key` selects the random
    /// substreams so that repeated predictions can be made independent.
    pub fn predict(&self, s: &FilterState, t: f64, key: u64) -> Result<Prediction> {
        if !(t >= s.t0) {
            return Err(Error::NonmonotoneTime { previous: s.t0, next: t });
        }
        if self.family == Family::EventTime {
            return Err(Error::RequiresCumulativeHazard("predict"));
        }
        let kernels = self.model.prepare_transition(t - s.t0)?;
        let f = self.model.transform_vector(t);
        let ps = self.streams.at(Purpose::Forecast, key);
        let os = self.streams.at(Purpose::Observe, key);
        let n = s.n_particles();
        let mut etas = Vec::with_capacity(n);
        let mut draws = Vec::with_capacity(n);
        let mut x = vec![0.0; s.dim];
        for i in 0..n {
            x.copy_from_slice(s.particle(i));
            self.model.propagate_flat(&kernels, &mut x, |k| ps.stream(i as u64, k as u64));
            let eta = self.model.link(dot(&f, &x));
            let mut rng = os.stream(i as u64, 0);
            draws.push(self.model.observation_draw(eta, &mut rng)?);
            etas.push(eta);
        }
        let w = &s.weights;
        let total = pairwise_sum(w);
        let eta_mean = dot(w, &etas) / total;
        let obs_mean = dot(w, &draws) / total;
        let qe = weighted_quantiles(&etas, w, &[BAND.0, BAND.1]);
        let qo = weighted_quantiles_inverse(&draws, w, &[BAND.0, BAND.1]);
        Ok(Prediction {
            time: t,
            eta_mean,
            eta_lower: qe[0].min(eta_mean),
            eta_upper: qe[1].max(eta_mean),
            obs_mean,
            obs_lower: qo[0],
            obs_upper: qo[1],
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn finite_or_neg_inf(w: f64) -> f64 {
    if w.is_nan() {
        f64::NEG_INFINITY
    } else {
        w
    }
}

/// `N` initial particles at `t_start` with equal weights and `ll = 0`.
pub fn init_filter(model: &Model, config: &FilterConfig, t_start: f64) -> Result<FilterState> {
    ParticleFilter::new(model, config.clone())?.init(t_start)
}

/// One resample, propagate and weight step, returning the new state.
pub fn filter_step(model: &Model, config: &FilterConfig, s: &FilterState, y: TimedObservation) -> Result<FilterState> {
    let mut pf = ParticleFilter::new(model, config.clone())?;
    let mut next = s.clone();
    pf.step(&mut next, y)?;
    Ok(next)
}

/// Left fold of the filter over `data`; 0 for an empty stream.
pub fn path_log_likelihood(
    model: &Model,
    config: &FilterConfig,
    data: impl IntoIterator<Item = TimedObservation>,
    t_start: f64,
) -> Result<f64> {
    let mut pf = ParticleFilter::new(model, config.clone())?;
    let mut s = pf.init(t_start)?;
    for y in data {
        pf.step(&mut s, y)?;
    }
    Ok(s.ll)
}

/// Streaming filter: one summary per observation, constant memory.
pub struct FilterScan<I> {
    filter: ParticleFilter,
    state: FilterState,
    data: I,
    done: bool,
}

impl<I: Iterator<Item = TimedObservation>> FilterScan<I> {
    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn filter(&self) -> &ParticleFilter {
        &self.filter
    }
}

impl<I: Iterator<Item = TimedObservation>> Iterator for FilterScan<I> {
    type Item = Result<FilterSummary>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let y = self.data.next()?;
        match self.filter.step(&mut self.state, y) {
            Ok(inc) => Some(Ok(self.filter.summary(&self.state, inc))),
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Lazily filters `data`, yielding a summary after each observation.
pub fn filter_scan<I: IntoIterator<Item = TimedObservation>>(
    model: &Model,
    config: &FilterConfig,
    data: I,
    t_start: f64,
) -> Result<FilterScan<I::IntoIter>> {
    let filter = ParticleFilter::new(model, config.clone())?;
    let state = filter.init(t_start)?;
    Ok(FilterScan {
        filter,
        state,
        data: data.into_iter(),
        done: false,
    })
}
