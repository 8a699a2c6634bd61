//! Closed-form references: the Kalman filter for the 1-D local-level model
//! and the normal-normal conjugate update.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::obs::Family;
use crate::sde::SdeParams;
use crate::tree::TimedObservation;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `x(t)` Brownian with drift `mu` and diffusion `sigma`, `y ~ N(x, v)`,
/// `x(t0) ~ N(m0, c0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLevel {
    pub mu: f64,
    pub sigma: f64,
    /// Observation variance.
    pub v: f64,
    pub m0: f64,
    /// Initial variance.
    pub c0: f64,
}

impl LocalLevel {
    /// Reads the parameters of a single-leaf Gaussian model with a 1-D
    /// Brownian state.
    pub fn from_model(model: &Model) -> Result<Self> {
        let bad = || Error::InvalidParameter("not a 1-D Gaussian local-level model".into());
        if model.family() != Some(Family::Gaussian) || model.leaves().len() != 1 || model.dim() != 1 {
            return Err(bad());
        }
        let leaf = &model.leaves()[0];
        match &leaf.sde {
            SdeParams::Brownian { mu, sigma } => Ok(LocalLevel {
                mu: mu[0],
                sigma: sigma[0],
                v: model.scale().ok_or_else(bad)?,
                m0: leaf.init.mean[0],
                c0: leaf.init.sd[0] * leaf.init.sd[0],
            }),
            _ => Err(bad()),
        }
    }
}

/// Steppable Kalman filter over the local-level model.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter {
    pub model: LocalLevel,
    /// Filtered mean and variance at `t`.
    pub m: f64,
    pub c: f64,
    pub t: f64,
    pub ll: f64,
}

impl KalmanFilter {
    pub fn new(model: LocalLevel, t_start: f64) -> Self {
        KalmanFilter {
            model,
            m: model.m0,
            c: model.c0,
            t: t_start,
            ll: 0.0,
        }
    }

    /// Predicts to `y.time`, updates on `y.value`, returns the log predictive
    /// density of `y`.
    pub fn step(&mut self, y: TimedObservation) -> Result<f64> {
        if !(y.time >= self.t) {
            return Err(Error::NonmonotoneTime {
                previous: self.t,
                next: y.time,
            });
        }
        let dt = y.time - self.t;
        let lm = &self.model;
        let m = self.m + lm.mu * dt;
        let c = self.c + lm.sigma * lm.sigma * dt;
        let s = c + lm.v;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonpositiveVariance(s));
        }
        let e = y.value - m;
        let inc = -0.5 * (LN_2PI + s.ln() + e * e / s);
        let k = c / s;
        self.m = m + k * e;
        self.c = c * lm.v / s;
        self.t = y.time;
        self.ll += inc;
        Ok(inc)
    }
}

/// `sum_i ln N(y_i; m_i^-, C_i^- + V)`.
pub fn kalman_log_likelihood(
    model: LocalLevel,
    data: impl IntoIterator<Item = TimedObservation>,
    t_start: f64,
) -> Result<f64> {
    let mut kf = KalmanFilter::new(model, t_start);
    for y in data {
        kf.step(y)?;
    }
    Ok(kf.ll)
}

/// Posterior of a normal mean with known observation variance. An infinite
/// prior variance is the flat prior.
pub fn conjugate_posterior(prior_mean: f64, prior_var: f64, obs_var: f64, data: &[f64]) -> Result<(f64, f64)> {
    if !(prior_var > 0.0) {
        return Err(Error::NonpositiveVariance(prior_var));
    }
    if !(obs_var > 0.0 && obs_var.is_finite()) {
        return Err(Error::NonpositiveVariance(obs_var));
    }
    if data.is_empty() {
        return Ok((prior_mean, prior_var));
    }
    let prior_precision = if prior_var.is_infinite() { 0.0 } else { 1.0 / prior_var };
    let precision = prior_precision + data.len() as f64 / obs_var;
    let sum: f64 = data.iter().sum();
    let mean = (prior_mean * prior_precision + sum / obs_var) / precision;
    Ok((mean, 1.0 / precision))
}
