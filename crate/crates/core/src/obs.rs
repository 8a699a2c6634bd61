//! Observation families, links and the concrete model constructors.
//!
//! Each model observes `eta = g(gamma)` with `gamma = F_t' x`. All four
//! families are exponential-family members; they are implemented directly
//! rather than through a generic natural-parameter form.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{Model, UnparamModel};
use crate::params::{InitialStateParams, ParamTree};
use crate::sde::SdeParams;

/// Saturation bound for probabilities and rates.
pub const EPS: f64 = 1e-12;
/// Largest Poisson rate or event hazard the links will produce.
pub const LAMBDA_MAX: f64 = 1e12;

/// The distribution `pi(y | eta)` of a model's observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Counts, `eta` is the rate.
    Poisson,
    /// Binary outcomes, `eta` is the success probability.
    Bernoulli,
    /// Real values with variance `V` taken from the leaf scale.
    Gaussian,
    /// Event times of a log-Gaussian Cox process, `eta` is the hazard.
    EventTime,
}

#[inline]
fn logistic(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub fn needs_scale(self) -> bool {
        matches!(self, Family::Gaussian)
    }

    pub fn link(self, gamma: f64) -> f64 {
        match self {
            Family::Poisson | Family::EventTime => gamma.exp().clamp(EPS, LAMBDA_MAX),
            Family::Bernoulli => logistic(gamma).clamp(EPS, 1.0 - EPS),
            Family::Gaussian => gamma,
        }
    }

    /// Checks that `y` lies in the family's support.
    pub fn check(self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::NonfiniteObservation(y));
        }
        match self {
            Family::Poisson => {
                if y < 0.0 {
                    Err(Error::NegativeObservation(y))
                } else if y.fract() != 0.0 {
                    Err(Error::NonIntegerObservation(y))
                } else {
                    Ok(())
                }
            }
            Family::Bernoulli if y != 0.0 && y != 1.0 => Err(Error::ObservationNotBinary(y)),
            _ => Ok(()),
        }
    }

    /// `ln pi(y | eta)`.
    pub fn log_density(self, eta: f64, y: f64, scale: Option<f64>) -> Result<f64> {
        self.check(y)?;
        Ok(match self {
            Family::Poisson => {
                let lambda = eta.clamp(EPS, LAMBDA_MAX);
                y * lambda.ln() - lambda - ln_gamma(y + 1.0)
            }
            Family::Bernoulli => {
                let p = eta.clamp(EPS, 1.0 - EPS);
                if y == 1.0 {
                    p.ln()
                } else {
                    (-p).ln_1p()
                }
            }
            Family::Gaussian => {
                let v = gaussian_variance(scale)?;
                -0.5 * (2.0 * PI * v).ln() - (y - eta) * (y - eta) / (2.0 * v)
            }
            Family::EventTime => return Err(Error::RequiresCumulativeHazard("log_density")),
        })
    }

    /// Draws `y ~ pi(. | eta)`.
    pub fn draw<R: Rng + ?Sized>(self, eta: f64, scale: Option<f64>, rng: &mut R) -> Result<f64> {
        Ok(match self {
            Family::Poisson => {
                let lambda = eta.clamp(EPS, LAMBDA_MAX);
                Poisson::new(lambda)
                    .map_err(|e| Error::InvalidParameter(format!("Poisson rate {lambda}: {e}")))?
                    .sample(rng)
            }
            Family::Bernoulli => {
                let p = eta.clamp(0.0, 1.0);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Gaussian => {
                let v = gaussian_variance(scale)?;
                let z: f64 = rng.sample(StandardNormal);
                eta + v.sqrt() * z
            }
            Family::EventTime => return Err(Error::RequiresCumulativeHazard("observation_draw")),
        })
    }
}

fn gaussian_variance(scale: Option<f64>) -> Result<f64> {
    match scale {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::NonpositiveScale(v)),
        None => Err(Error::InvalidParameter("Gaussian observations need a scale".into())),
    }
}

/// One observation with its `y`-only terms precomputed, for weighting many
/// particles against the same value.
#[derive(Debug, Clone, Copy)]
pub struct PreparedObs {
    family: Family,
    y: f64,
    constant: f64,
    inv_two_v: f64,
}

impl PreparedObs {
    pub fn new(family: Family, y: f64, scale: Option<f64>) -> Result<Self> {
        family.check(y)?;
        let (constant, inv_two_v) = match family {
            Family::Poisson => (-ln_gamma(y + 1.0), 0.0),
            Family::Gaussian => {
                let v = gaussian_variance(scale)?;
                (-0.5 * (2.0 * PI * v).ln(), 0.5 / v)
            }
            Family::Bernoulli => (0.0, 0.0),
            Family::EventTime => return Err(Error::RequiresCumulativeHazard("log_density")),
        };
        Ok(PreparedObs {
            family,
            y,
            constant,
            inv_two_v,
        })
    }

    /// `ln pi(y | g(gamma))`.
    #[inline]
    pub fn log_weight(&self, gamma: f64) -> f64 {
        match self.family {
            Family::Poisson => {
                let lg = gamma.clamp(EPS.ln(), LAMBDA_MAX.ln());
                self.y * lg - lg.exp() + self.constant
            }
            Family::Gaussian => {
                let r = self.y - gamma;
                self.constant - r * r * self.inv_two_v
            }
            Family::Bernoulli => {
                let p = Family::Bernoulli.link(gamma);
                if self.y == 1.0 {
                    p.ln()
                } else {
                    (-p).ln_1p()
                }
            }
            Family::EventTime => f64::NEG_INFINITY,
        }
    }
}

/// A model component, before parameters are attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Poisson,
    Bernoulli,
    Gaussian,
    /// Gaussian observations of `F_t' x` with `F_t` the Fourier vector.
    Seasonal { period: f64, harmonics: usize },
    Lgcp,
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Seasonal { harmonics, .. } => 2 * harmonics,
            _ => 1,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Component::Poisson => Family::Poisson,
            Component::Bernoulli => Family::Bernoulli,
            Component::Gaussian | Component::Seasonal { .. } => Family::Gaussian,
            Component::Lgcp => Family::EventTime,
        }
    }

    /// Writes this component's `F_t` into `out` (length `dim()`).
    #[inline]
    pub fn transform_into(&self, t: f64, out: &mut [f64]) {
        match self {
            Component::Seasonal { period, harmonics } => fourier_into(t, *period, *harmonics, out),
            _ => out[0] = 1.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let Component::Seasonal { period, harmonics } = self {
            if !(*period > 0.0 && period.is_finite()) {
                return Err(Error::InvalidParameter(format!("seasonal period must be positive, got {period}")));
            }
            if *harmonics == 0 {
                return Err(Error::InvalidParameter("a seasonal model needs at least one harmonic".into()));
            }
        }
        Ok(())
    }
}

/// `(cos wt, sin wt, cos 2wt, sin 2wt, ..., cos hwt, sin hwt)` with `w = 2 pi / T`.
pub fn fourier_vector(t: f64, period: f64, harmonics: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * harmonics];
    fourier_into(t, period, harmonics, &mut out);
    out
}

fn fourier_into(t: f64, period: f64, harmonics: usize, out: &mut [f64]) {
    let w = 2.0 * PI / period;
    for k in 0..harmonics {
        let (s, c) = ((k + 1) as f64 * w * t).sin_cos();
        out[2 * k] = c;
        out[2 * k + 1] = s;
    }
}

/// Phase and amplitude of the wave `x1 cos(wt) + x2 sin(wt) = A cos(wt + phase)`.
///
/// The phase is `atan2(-x2, x1)`. For the zero vector the amplitude is 0 and
/// the phase is undefined, reported as `Err(ZeroVector)`.
pub fn phase_amplitude(x1: f64, x2: f64) -> (Result<f64>, f64) {
    let amplitude = x1.hypot(x2);
    if x1 == 0.0 && x2 == 0.0 {
        (Err(Error::ZeroVector), 0.0)
    } else {
        (Ok((-x2).atan2(x1)), amplitude)
    }
}

fn leaf_model(component: Component, sde: SdeParams, init: InitialStateParams, scale: Option<f64>) -> Result<Model> {
    Model::new(UnparamModel::Leaf(component), ParamTree::leaf(init, scale, sde))
}

/// Counts with rate `exp(x)`.
pub fn poisson_model(sde: SdeParams, init: InitialStateParams) -> Result<Model> {
    leaf_model(Component::Poisson, sde, init, None)
}

/// Binary outcomes with probability `logistic(x)`.
pub fn bernoulli_model(sde: SdeParams, init: InitialStateParams) -> Result<Model> {
    leaf_model(Component::Bernoulli, sde, init, None)
}

/// Real observations `N(x, V)`.
pub fn gaussian_model(sde: SdeParams, init: InitialStateParams, variance: f64) -> Result<Model> {
    leaf_model(Component::Gaussian, sde, init, Some(variance))
}

/// Real observations `N(F_t' x, V)` with a `2h`-dimensional Fourier state.
pub fn seasonal_model(
    period: f64,
    harmonics: usize,
    sde: SdeParams,
    init: InitialStateParams,
    variance: f64,
) -> Result<Model> {
    leaf_model(Component::Seasonal { period, harmonics }, sde, init, Some(variance))
}

/// Event times with hazard `exp(x(t))`.
pub fn lgcp_model(sde: SdeParams, init: InitialStateParams) -> Result<Model> {
    leaf_model(Component::Lgcp, sde, init, None)
}
