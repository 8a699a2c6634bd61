//! Continuous-time transition kernels for leaf states.
//!
//! Brownian motion with drift and the Ornstein-Uhlenbeck process are stepped
//! with their exact Gaussian transitions. Any other diffusion with diagonal
//! noise is stepped with Euler-Maruyama on `substeps` equal sub-intervals.
//!
//! Exact kernels draw one standard normal per coordinate when some diffusion
//! coefficient is nonzero and nothing otherwise. Euler-Maruyama always draws
//! one normal per coordinate per substep. A zero time step draws nothing.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default number of Euler-Maruyama sub-intervals per transition.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// A state-dependent vector function `f(x, out)` writing one value per coordinate.
#[derive(Clone)]
pub struct VectorField(Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>);

impl VectorField {
    pub fn new(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        VectorField(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.0)(x, out)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField(<fn>)")
    }
}

impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Drift coefficient for the Euler-Maruyama stepper.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    /// `mu(x)_i = slope_i * x_i + intercept_i`.
    Affine { slope: Vec<f64>, intercept: Vec<f64> },
    Custom(VectorField),
}

impl Drift {
    pub fn constant(mu: Vec<f64>) -> Self {
        Drift::Affine {
            slope: vec![0.0; mu.len()],
            intercept: mu,
        }
    }

    /// `alpha (theta - x)`, the Ornstein-Uhlenbeck drift.
    pub fn mean_reverting(alpha: &[f64], theta: &[f64]) -> Self {
        Drift::Affine {
            slope: alpha.iter().map(|a| -a).collect(),
            intercept: alpha.iter().zip(theta).map(|(a, t)| a * t).collect(),
        }
    }

    pub fn custom(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Drift::Custom(VectorField::new(f))
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Affine { slope, intercept } => {
                for i in 0..x.len() {
                    out[i] = slope[i] * x[i] + intercept[i];
                }
            }
            Drift::Custom(f) => f.eval(x, out),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if let Drift::Affine { slope, intercept } = self {
            check_len(slope, dim)?;
            check_len(intercept, dim)?;
        }
        Ok(())
    }
}

/// Diagonal diffusion coefficient for the Euler-Maruyama stepper.
#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    Constant(Vec<f64>),
    Custom(VectorField),
}

impl Diffusion {
    pub fn custom(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Diffusion::Custom(VectorField::new(f))
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Diffusion::Constant(s) => out.copy_from_slice(s),
            Diffusion::Custom(f) => f.eval(x, out),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if let Diffusion::Constant(s) = self {
            check_len(s, dim)?;
            check_nonnegative(s)?;
        }
        Ok(())
    }
}

/// Parameters of a leaf state's Markov transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum SdeParams {
    /// `dX = mu dt + sigma dW`, per coordinate.
    Brownian { mu: Vec<f64>, sigma: Vec<f64> },
    /// `dX = alpha (theta - X) dt + sigma dW`, per coordinate.
    OrnsteinUhlenbeck {
        alpha: Vec<f64>,
        theta: Vec<f64>,
        sigma: Vec<f64>,
    },
    EulerMaruyama {
        drift: Drift,
        diffusion: Diffusion,
        substeps: usize,
    },
}

impl SdeParams {
    pub fn brownian(mu: impl Into<Vec<f64>>, sigma: impl Into<Vec<f64>>) -> Self {
        SdeParams::Brownian {
            mu: mu.into(),
            sigma: sigma.into(),
        }
    }

    pub fn ou(
        alpha: impl Into<Vec<f64>>,
        theta: impl Into<Vec<f64>>,
        sigma: impl Into<Vec<f64>>,
    ) -> Self {
        SdeParams::OrnsteinUhlenbeck {
            alpha: alpha.into(),
            theta: theta.into(),
            sigma: sigma.into(),
        }
    }

    pub fn euler_maruyama(drift: Drift, diffusion: Diffusion, substeps: usize) -> Self {
        SdeParams::EulerMaruyama {
            drift,
            diffusion,
            substeps,
        }
    }

    /// Checks vector lengths against `dim` and the sign constraints.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            SdeParams::Brownian { mu, sigma } => {
                check_len(mu, dim)?;
                check_len(sigma, dim)?;
                check_finite(mu)?;
                check_nonnegative(sigma)
            }
            SdeParams::OrnsteinUhlenbeck {
                alpha,
                theta,
                sigma,
            } => {
                check_len(alpha, dim)?;
                check_len(theta, dim)?;
                check_len(sigma, dim)?;
                if let Some(&a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                    return Err(Error::NonpositiveAlpha(a));
                }
                check_finite(theta)?;
                check_nonnegative(sigma)
            }
            SdeParams::EulerMaruyama {
                drift,
                diffusion,
                substeps,
            } => {
                if *substeps == 0 {
                    return Err(Error::InvalidParameter(
                        "Euler-Maruyama needs at least one substep".into(),
                    ));
                }
                drift.check_dim(dim)?;
                diffusion.check_dim(dim)
            }
        }
    }

    /// Precomputes the per-coordinate coefficients for a transition of length `dt`.
    pub fn prepare(&self, dt: f64) -> PreparedKernel {
        if dt == 0.0 {
            return PreparedKernel::Identity;
        }
        match self {
            SdeParams::Brownian { mu, sigma } => {
                let root = dt.sqrt();
                if mu.iter().all(|m| *m == 0.0) && sigma.iter().all(|s| *s == 0.0) {
                    return PreparedKernel::Identity;
                }
                PreparedKernel::Brownian {
                    shift: mu.iter().map(|m| m * dt).collect(),
                    scale: sigma.iter().map(|s| s * root).collect(),
                    noisy: sigma.iter().any(|s| *s != 0.0),
                }
            }
            SdeParams::OrnsteinUhlenbeck {
                alpha,
                theta,
                sigma,
            } => PreparedKernel::OrnsteinUhlenbeck {
                theta: theta.clone(),
                decay: alpha.iter().map(|a| (-a * dt).exp()).collect(),
                scale: alpha
                    .iter()
                    .zip(sigma)
                    .map(|(a, s)| s * (-(-2.0 * a * dt).exp_m1() / (2.0 * a)).sqrt())
                    .collect(),
                noisy: sigma.iter().any(|s| *s != 0.0),
            },
            SdeParams::EulerMaruyama {
                drift,
                diffusion,
                substeps,
            } => {
                let h = dt / *substeps as f64;
                PreparedKernel::EulerMaruyama {
                    drift: drift.clone(),
                    diffusion: diffusion.clone(),
                    h,
                    root_h: h.sqrt(),
                    substeps: *substeps,
                }
            }
        }
    }
}

/// A transition kernel with its time increment already folded in.
#[derive(Debug, Clone)]
pub enum PreparedKernel {
    Identity,
    Brownian {
        shift: Vec<f64>,
        scale: Vec<f64>,
        noisy: bool,
    },
    OrnsteinUhlenbeck {
        theta: Vec<f64>,
        decay: Vec<f64>,
        scale: Vec<f64>,
        noisy: bool,
    },
    EulerMaruyama {
        drift: Drift,
        diffusion: Diffusion,
        h: f64,
        root_h: f64,
        substeps: usize,
    },
}

impl PreparedKernel {
    /// Whether `apply` consumes random draws.
    #[inline]
    pub fn needs_rng(&self) -> bool {
        match self {
            PreparedKernel::Identity => false,
            PreparedKernel::Brownian { noisy, .. } | PreparedKernel::OrnsteinUhlenbeck { noisy, .. } => *noisy,
            PreparedKernel::EulerMaruyama { .. } => true,
        }
    }

    /// Advances `x` in place when `needs_rng()` is false.
    #[inline]
    pub fn apply_noise_free(&self, x: &mut [f64]) {
        match self {
            PreparedKernel::Identity => {}
            PreparedKernel::Brownian { shift, .. } => {
                for (xi, s) in x.iter_mut().zip(shift) {
                    *xi += s;
                }
            }
            PreparedKernel::OrnsteinUhlenbeck { theta, decay, .. } => {
                for i in 0..x.len() {
                    x[i] = theta[i] + (x[i] - theta[i]) * decay[i];
                }
            }
            PreparedKernel::EulerMaruyama { .. } => panic!("Euler-Maruyama kernels always draw noise"),
        }
    }

    /// Advances `x` in place. Kernels without diffusion draw nothing.
    #[inline]
    pub fn apply<R: Rng + ?Sized>(&self, x: &mut [f64], rng: &mut R) {
        if !self.needs_rng() {
            return self.apply_noise_free(x);
        }
        match self {
            PreparedKernel::Identity => {}
            PreparedKernel::Brownian { shift, scale, .. } => {
                for i in 0..x.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    x[i] += shift[i] + scale[i] * z;
                }
            }
            PreparedKernel::OrnsteinUhlenbeck {
                theta,
                decay,
                scale,
                ..
            } => {
                for i in 0..x.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    x[i] = theta[i] + (x[i] - theta[i]) * decay[i] + scale[i] * z;
                }
            }
            PreparedKernel::EulerMaruyama {
                drift,
                diffusion,
                h,
                root_h,
                substeps,
            } => {
                let n = x.len();
                let mut mu = vec![0.0; n];
                let mut sd = vec![0.0; n];
                for _ in 0..*substeps {
                    drift.eval(x, &mut mu);
                    diffusion.eval(x, &mut sd);
                    for i in 0..n {
                        let z: f64 = rng.sample(StandardNormal);
                        let mut next = x[i] + mu[i] * h;
                        if sd[i] != 0.0 {
                            next += sd[i] * root_h * z;
                        }
                        x[i] = next;
                    }
                }
            }
        }
    }
}

fn check_len(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    Ok(())
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(&x) => Err(Error::InvalidParameter(format!("non-finite value {x}"))),
        None => Ok(()),
    }
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    match v.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        Some(&s) => Err(Error::NegativeDiffusion(s)),
        None => Ok(()),
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time increment must be finite and nonnegative, got {dt}"
        )));
    }
    Ok(())
}

fn step_with<R: Rng + ?Sized>(params: &SdeParams, x: &[f64], dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_dt(dt)?;
    params.validate(x.len())?;
    let mut out = x.to_vec();
    params.prepare(dt).apply(&mut out, rng);
    Ok(out)
}

/// Exact transition of Brownian motion with drift: each coordinate is drawn
/// from `Normal(x_i + mu_i dt, sigma_i^2 dt)`.
pub fn step_brownian<R: Rng + ?Sized>(
    x: &[f64],
    dt: f64,
    mu: &[f64],
    sigma: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    step_with(&SdeParams::brownian(mu, sigma), x, dt, rng)
}

/// Exact Ornstein-Uhlenbeck transition: coordinate `i` is drawn from
/// `Normal(theta_i + (x_i - theta_i) e^{-alpha_i dt}, sigma_i^2 (1 - e^{-2 alpha_i dt}) / (2 alpha_i))`.
pub fn step_ou<R: Rng + ?Sized>(
    x: &[f64],
    dt: f64,
    alpha: &[f64],
    theta: &[f64],
    sigma: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    step_with(&SdeParams::ou(alpha, theta, sigma), x, dt, rng)
}

/// `substeps` Euler-Maruyama updates of size `dt / substeps`.
pub fn step_euler_maruyama<R: Rng + ?Sized>(
    x: &[f64],
    dt: f64,
    drift: &Drift,
    diffusion: &Diffusion,
    substeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let params = SdeParams::euler_maruyama(drift.clone(), diffusion.clone(), substeps);
    step_with(&params, x, dt, rng)
}

/// Dispatches on the kernel type.
pub fn step<R: Rng + ?Sized>(params: &SdeParams, x: &[f64], dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    step_with(params, x, dt, rng)
}
