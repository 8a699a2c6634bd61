//! Particle marginal Metropolis-Hastings.
//!
//! The chain is an iterator. Each iteration draws one random-walk proposal,
//! estimates its log-likelihood with one fresh particle filter run, and
//! accepts with probability `min(1, A)`. On rejection the stored likelihood
//! estimate is kept as is.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filter::{path_log_likelihood, FilterConfig};
use crate::model::Model;
use crate::params::{Constraint, ParamTree};
use crate::rng::Substreams;
use crate::tree::TimedObservation;

/// Log-likelihood assigned to the seed state, low enough that the first
/// proposal is always accepted.
pub const INITIAL_LL: f64 = -1e99;

/// Anything a random walk can move: a flat coordinate vector plus the
/// constraint on each coordinate.
pub trait Parameters: Clone {
    fn values(&self) -> Vec<f64>;
    fn with_values(&self, values: &[f64]) -> Result<Self>;
    fn constraints(&self) -> Vec<Constraint>;
}

impl Parameters for ParamTree {
    fn values(&self) -> Vec<f64> {
        ParamTree::values(self)
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        ParamTree::with_values(self, values)
    }

    fn constraints(&self) -> Vec<Constraint> {
        ParamTree::constraints(self)
    }
}

impl Parameters for Vec<f64> {
    fn values(&self) -> Vec<f64> {
        self.clone()
    }

    fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(values.to_vec())
    }

    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Real; self.len()]
    }
}

/// One state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropState<P = ParamTree> {
    pub params: P,
    pub ll: f64,
    pub log_prior: f64,
    pub accepted: bool,
    pub iteration: u64,
}

impl<P> MetropState<P> {
    /// The seed state: `ll = -1e99`, iteration 0.
    pub fn initial(params: P, log_prior: f64) -> Self {
        MetropState {
            params,
            ll: INITIAL_LL,
            log_prior,
            accepted: false,
            iteration: 0,
        }
    }
}

/// Draws a candidate and returns it with the log Hastings correction
/// `ln q(current | candidate) - ln q(candidate | current)`.
pub trait Proposal<P> {
    fn propose<R: Rng + ?Sized>(&self, current: &P, rng: &mut R) -> Result<(P, f64)>;
}

/// Gaussian random walk over the flattened coordinates.
///
/// Coordinates constrained to be positive or nonnegative move on the log
/// scale, `v* = v exp(s z)`. That walk is not symmetric in `v`; by default the
/// asymmetry is ignored, and `with_jacobian(true)` adds the exact correction
/// `ln v* - ln v`. A nonnegative coordinate sitting at 0 stays at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    pub steps: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub jacobian: bool,
}

impl RandomWalk {
    pub fn new(steps: Vec<f64>, constraints: Vec<Constraint>) -> Result<Self> {
        if steps.len() != constraints.len() {
            return Err(Error::DimensionMismatch {
                expected: constraints.len(),
                got: steps.len(),
            });
        }
        if let Some(s) = steps.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("step sizes must be finite and nonnegative, got {s}")));
        }
        Ok(RandomWalk {
            steps,
            constraints,
            jacobian: false,
        })
    }

    /// Steps given as a tree shaped like `params`.
    pub fn from_tree(params: &ParamTree, steps: &ParamTree) -> Result<Self> {
        if !params.same_shape(steps) {
            return Err(Error::shape("root", "step sizes are not shaped like the parameters"));
        }
        RandomWalk::new(steps.values(), params.constraints())
    }

    pub fn with_jacobian(mut self, on: bool) -> Self {
        self.jacobian = on;
        self
    }
}

impl<P: Parameters> Proposal<P> for RandomWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &P, rng: &mut R) -> Result<(P, f64)> {
        let mut v = current.values();
        if v.len() != self.steps.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                got: self.steps.len(),
            });
        }
        let mut correction = 0.0;
        for ((x, &s), c) in v.iter_mut().zip(&self.steps).zip(&self.constraints) {
            if s == 0.0 {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            if c.is_log_scale() {
                *x *= (s * z).exp();
                if self.jacobian && *x > 0.0 {
                    correction += s * z;
                }
            } else {
                *x += s * z;
            }
        }
        Ok((current.with_values(&v)?, correction))
    }
}

/// `propose_random_walk` over a parameter tree with tree-shaped step sizes.
pub fn propose_random_walk<R: Rng + ?Sized>(
    params: &ParamTree,
    step_sizes: &ParamTree,
    rng: &mut R,
) -> Result<ParamTree> {
    let walk = RandomWalk::from_tree(params, step_sizes)?;
    Ok(walk.propose(params, rng)?.0)
}

/// Prior on one flattened coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Flat,
    Gaussian { mean: f64, sd: f64 },
    /// `ln v ~ N(mu, sigma^2)`, density taken with respect to `v`.
    LogNormal { mu: f64, sigma: f64 },
}

impl Prior {
    pub fn log_density(&self, v: f64) -> f64 {
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
        match *self {
            Prior::Flat => 0.0,
            Prior::Gaussian { mean, sd } => {
                let z = (v - mean) / sd;
                -0.5 * z * z - sd.ln() - HALF_LN_2PI
            }
            Prior::LogNormal { mu, sigma } => {
                if v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (v.ln() - mu) / sigma;
                -0.5 * z * z - sigma.ln() - HALF_LN_2PI - v.ln()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Flat => true,
            Prior::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Prior::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad prior {self:?}")))
        }
    }
}

/// Independent priors, one per flattened coordinate. Values outside a
/// coordinate's constraint have density zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub priors: Vec<Prior>,
}

impl Priors {
    pub fn new(priors: Vec<Prior>) -> Result<Self> {
        for p in &priors {
            p.validate()?;
        }
        Ok(Priors { priors })
    }

    pub fn flat(n: usize) -> Self {
        Priors {
            priors: vec![Prior::Flat; n],
        }
    }

    pub fn log_density<P: Parameters>(&self, params: &P) -> f64 {
        let v = params.values();
        if v.len() != self.priors.len() {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for ((x, p), c) in v.iter().zip(&self.priors).zip(params.constraints()) {
            if !c.admits(*x) {
                return f64::NEG_INFINITY;
            }
            total += p.log_density(*x);
        }
        total
    }
}

/// One Metropolis-Hastings iteration. Errors from `loglik` count as a
/// log-likelihood of `-inf`. A candidate with zero prior density is rejected
/// without evaluating `loglik`.
pub fn pmmh_step<P, L, Pr, Q, R>(
    s: &MetropState<P>,
    loglik: &mut L,
    log_prior: &Pr,
    proposal: &Q,
    rng: &mut R,
) -> MetropState<P>
where
    P: Clone,
    L: FnMut(&P) -> Result<f64>,
    Pr: Fn(&P) -> f64,
    Q: Proposal<P>,
    R: Rng + ?Sized,
{
    let iteration = s.iteration + 1;
    let reject = || MetropState {
        params: s.params.clone(),
        ll: s.ll,
        log_prior: s.log_prior,
        accepted: false,
        iteration,
    };
    let (candidate, correction) = match proposal.propose(&s.params, rng) {
        Ok(c) => c,
        Err(_) => return reject(),
    };
    let lp = log_prior(&candidate);
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return reject();
    }
    let ll = match loglik(&candidate) {
        Ok(v) if !v.is_nan() => v,
        _ => f64::NEG_INFINITY,
    };
    let a = ll + lp - s.ll - s.log_prior + correction;
    let u: f64 = rng.random();
    if u.ln() < a {
        MetropState {
            params: candidate,
            ll,
            log_prior: lp,
            accepted: true,
            iteration,
        }
    } else {
        reject()
    }
}

/// Run length, burn-in and thinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
}

impl ChainConfig {
    pub fn new(iterations: u64, burn_in: u64, thin: u64) -> Self {
        ChainConfig {
            iterations,
            burn_in,
            thin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of states the chain emits.
    pub fn emitted(&self) -> u64 {
        (self.iterations - self.burn_in) / self.thin
    }

    fn emits(&self, iteration: u64) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thin)
    }
}

/// A Metropolis-Hastings chain as an iterator over its emitted states.
/// Only the current state is held in memory.
pub struct Chain<P, L, Pr, Q> {
    state: MetropState<P>,
    loglik: L,
    log_prior: Pr,
    proposal: Q,
    rng: ChaCha8Rng,
    config: ChainConfig,
    accepted: u64,
}

impl<P, L, Pr, Q> Chain<P, L, Pr, Q>
where
    P: Clone,
    L: FnMut(&P) -> Result<f64>,
    Pr: Fn(&P) -> f64,
    Q: Proposal<P>,
{
    pub fn new(init: P, loglik: L, log_prior: Pr, proposal: Q, config: ChainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let lp = log_prior(&init);
        Ok(Chain {
            state: MetropState::initial(init, lp),
            loglik,
            log_prior,
            proposal,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
            accepted: 0,
        })
    }

    /// The most recent state, emitted or not.
    pub fn current(&self) -> &MetropState<P> {
        &self.state
    }

    /// Accepted fraction over every iteration run so far, burn-in and
    /// thinned-out iterations included.
    pub fn acceptance_rate(&self) -> Result<f64> {
        if self.state.iteration == 0 {
            return Err(Error::EmptyChain);
        }
        Ok(self.accepted as f64 / self.state.iteration as f64)
    }
}

impl<P, L, Pr, Q> Iterator for Chain<P, L, Pr, Q>
where
    P: Clone,
    L: FnMut(&P) -> Result<f64>,
    Pr: Fn(&P) -> f64,
    Q: Proposal<P>,
{
    type Item = MetropState<P>;

    fn next(&mut self) -> Option<MetropState<P>> {
        while self.state.iteration < self.config.iterations {
            self.state = pmmh_step(
                &self.state,
                &mut self.loglik,
                &self.log_prior,
                &self.proposal,
                &mut self.rng,
            );
            self.accepted += self.state.accepted as u64;
            if self.config.emits(self.state.iteration) {
                return Some(self.state.clone());
            }
        }
        None
    }
}

/// Everything `pmmh_chain` needs besides the model and data.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmhConfig {
    pub chain: ChainConfig,
    /// Particle count, resampling scheme and so on. Its seed is replaced by a
    /// fresh one derived from `seed` at every iteration.
    pub filter: FilterConfig,
    pub seed: u64,
    pub t_start: f64,
    pub walk: RandomWalk,
    pub priors: Priors,
}

type BoxedLoglik<'a> = Box<dyn FnMut(&ParamTree) -> Result<f64> + Send + 'a>;
type BoxedPrior = Box<dyn Fn(&ParamTree) -> f64 + Send + Sync>;

/// A particle-filter-driven chain.
pub type PmmhChain<'a> = Chain<ParamTree, BoxedLoglik<'a>, BoxedPrior, RandomWalk>;

/// Starts a PMMH chain at the parameters carried by `model`.
pub fn pmmh_chain<'a>(model: &Model, config: PmmhConfig, data: &'a [TimedObservation]) -> Result<PmmhChain<'a>> {
    config.chain.validate()?;
    if config.filter.n_particles == 0 {
        return Err(Error::InvalidConfig("at least one particle is required".into()));
    }
    let init = model.params().clone();
    let n = init.values().len();
    if config.walk.steps.len() != n {
        return Err(Error::InvalidConfig(format!("{} step sizes for {n} parameters", config.walk.steps.len())));
    }
    if config.priors.priors.len() != n {
        return Err(Error::InvalidConfig(format!("{} priors for {n} parameters", config.priors.priors.len())));
    }
    let base = model.clone();
    let streams = Substreams::new(config.seed);
    let mut filter = config.filter.clone();
    let t_start = config.t_start;
    let mut calls = 0u64;
    let loglik: BoxedLoglik<'a> = Box::new(move |p: &ParamTree| {
        calls += 1;
        filter.seed = streams.child_seed(calls);
        let m = base.with_params(p.clone())?;
        path_log_likelihood(&m, &filter, data.iter().copied(), t_start)
    });
    let priors = config.priors.clone();
    let log_prior: BoxedPrior = Box::new(move |p: &ParamTree| priors.log_density(p));
    Chain::new(init, loglik, log_prior, config.walk, config.chain, config.seed)
}

/// Fraction of `accepted` flags among the given states.
pub fn acceptance_rate<'a, P: 'a>(states: impl IntoIterator<Item = &'a MetropState<P>>) -> Result<f64> {
    let (mut n, mut k) = (0u64, 0u64);
    for s in states {
        n += 1;
        k += s.accepted as u64;
    }
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    Ok(k as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::gaussian_model;
    use crate::params::InitialStateParams;
    use crate::sde::SdeParams;

    fn walk(steps: Vec<f64>) -> RandomWalk {
        let n = steps.len();
        RandomWalk::new(steps, vec![Constraint::Real; n]).unwrap()
    }

    fn toy_chain(
        config: ChainConfig,
        seed: u64,
        loglik: impl FnMut(&Vec<f64>) -> Result<f64>,
        prior: impl Fn(&Vec<f64>) -> f64,
    ) -> Chain<Vec<f64>, impl FnMut(&Vec<f64>) -> Result<f64>, impl Fn(&Vec<f64>) -> f64, RandomWalk> {
        Chain::new(vec![0.0], loglik, prior, walk(vec![0.5]), config, seed).unwrap()
    }

    #[test]
    fn zero_steps_propose_current() {
        let p = ParamTree::leaf(
            InitialStateParams::new([1.0], [0.5]),
            Some(2.0),
            SdeParams::brownian([0.1], [0.3]),
        );
        let zeros = p.with_values(&vec![0.0; p.values().len()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(propose_random_walk(&p, &zeros, &mut rng).unwrap(), p);
        let bad = ParamTree::leaf(InitialStateParams::new([1.0, 2.0], [0.5, 0.5]), None, SdeParams::brownian([0.0; 2], [0.0; 2]));
        assert!(matches!(propose_random_walk(&p, &bad, &mut rng), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn positive_coordinates_stay_positive() {
        let p = ParamTree::leaf(InitialStateParams::fixed([0.0]), None, SdeParams::brownian([0.0], [0.01]));
        let rw = RandomWalk::new(vec![0.0, 0.0, 0.0, 3.0], p.constraints()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut cur = p;
        for _ in 0..100_000 {
            cur = rw.propose(&cur, &mut rng).unwrap().0;
            assert!(cur.values()[3] > 0.0);
        }
    }

    #[test]
    fn real_coordinate_step_has_the_step_sd() {
        let rw = walk(vec![0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let d: Vec<f64> = (0..n).map(|_| rw.propose(&vec![3.0], &mut rng).unwrap().0[0] - 3.0).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        // se of a normal sample sd is sd / sqrt(2(n-1))
        let se = 0.7 / (2.0 * (n - 1) as f64).sqrt();
        assert!((sd - 0.7).abs() < 4.0 * se, "sd {sd}");
    }

    #[test]
    fn jacobian_correction_is_log_ratio() {
        let rw = RandomWalk::new(vec![0.4], vec![Constraint::Positive]).unwrap().with_jacobian(true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (v, c) = rw.propose(&vec![2.0], &mut rng).unwrap();
        assert!((c - (v[0].ln() - 2f64.ln())).abs() < 1e-12);
        let (_, c) = walk(vec![0.4]).propose(&vec![2.0], &mut rng).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn impossible_prior_always_rejects() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = MetropState::initial(vec![0.0], 0.0);
        let mut calls = 0;
        for _ in 0..100 {
            let next = pmmh_step(&s, &mut |_: &Vec<f64>| { calls += 1; Ok(0.0) }, &|_: &Vec<f64>| f64::NEG_INFINITY, &walk(vec![1.0]), &mut rng);
            assert!(!next.accepted);
            assert_eq!(next.params, s.params);
        }
        assert_eq!(calls, 0);
    }

    #[test]
    fn constant_target_always_accepts() {
        let mut chain = toy_chain(ChainConfig::new(500, 0, 1), 5, |_| Ok(-3.0), |_| 0.0);
        assert!(chain.by_ref().all(|s| s.accepted));
        assert_eq!(chain.acceptance_rate().unwrap(), 1.0);
    }

    #[test]
    fn first_iteration_accepts() {
        for seed in 0..20 {
            let mut chain = toy_chain(ChainConfig::new(1, 0, 1), seed, |p| Ok(-1e6 * p[0] * p[0]), |_| 0.0);
            assert!(chain.next().unwrap().accepted);
        }
    }

    #[test]
    fn burn_in_and_thinning_counts() {
        let chain = toy_chain(ChainConfig::new(100, 20, 4), 6, |p| Ok(-0.5 * p[0] * p[0]), |_| 0.0);
        let its: Vec<u64> = chain.map(|s| s.iteration).collect();
        assert_eq!(its.len(), 20);
        assert_eq!(its[0], 24);
        assert_eq!(*its.last().unwrap(), 100);
        assert_eq!(ChainConfig::new(100, 20, 4).emitted(), 20);
        assert!(ChainConfig::new(20, 20, 1).validate().is_err());
        assert!(ChainConfig::new(30, 20, 0).validate().is_err());
    }

    #[test]
    fn thinning_does_not_change_the_trajectory() {
        let full: Vec<_> = toy_chain(ChainConfig::new(200, 0, 1), 7, |p| Ok(-0.5 * p[0] * p[0]), |_| 0.0).collect();
        let thinned: Vec<_> = toy_chain(ChainConfig::new(200, 50, 5), 7, |p| Ok(-0.5 * p[0] * p[0]), |_| 0.0).collect();
        for s in &thinned {
            assert_eq!(s, &full[s.iteration as usize - 1]);
        }
    }

    #[test]
    fn rejected_iterations_keep_the_stored_estimate() {
        let mut calls = 0u64;
        let mut noise = ChaCha8Rng::seed_from_u64(99);
        let states: Vec<_> = toy_chain(
            ChainConfig::new(300, 0, 1),
            8,
            |p| {
                calls += 1;
                Ok(-0.5 * p[0] * p[0] + noise.random::<f64>())
            },
            |_| 0.0,
        )
        .collect();
        for w in states.windows(2) {
            if !w[1].accepted {
                assert_eq!(w[1].ll, w[0].ll);
                assert_eq!(w[1].params, w[0].params);
            }
        }
        assert_eq!(calls, 300);
    }

    #[test]
    fn loglik_errors_reject() {
        let states: Vec<_> = toy_chain(
            ChainConfig::new(50, 0, 1),
            9,
            |p| if p[0] > 0.0 { Err(Error::AllWeightsZero { time: 0.0 }) } else { Ok(0.0) },
            |_| 0.0,
        )
        .collect();
        assert!(states.iter().all(|s| s.params[0] <= 0.0 || s.ll == INITIAL_LL));
    }

    #[test]
    fn acceptance_rate_of_states() {
        assert_eq!(acceptance_rate::<Vec<f64>>(&[]), Err(Error::EmptyChain));
        let a = MetropState::initial(vec![0.0], 0.0);
        let mut b = a.clone();
        b.accepted = true;
        assert_eq!(acceptance_rate(&[a.clone(), b, a]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn priors() {
        let g = Prior::Gaussian { mean: 1.0, sd: 2.0 };
        let expected = -0.5 * 0.25 - 2f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((g.log_density(2.0) - expected).abs() < 1e-14);
        let ln = Prior::LogNormal { mu: 0.0, sigma: 1.0 };
        assert_eq!(ln.log_density(-1.0), f64::NEG_INFINITY);
        assert!((ln.log_density(1.0) - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
        assert!(Priors::new(vec![Prior::Gaussian { mean: 0.0, sd: 0.0 }]).is_err());
        let p = ParamTree::leaf(InitialStateParams::fixed([0.0]), None, SdeParams::brownian([0.0], [-1.0]));
        assert_eq!(Priors::flat(4).log_density(&p), f64::NEG_INFINITY);
    }

    fn linear_gaussian() -> (Model, Vec<TimedObservation>) {
        let m = gaussian_model(SdeParams::brownian([0.0], [0.3]), InitialStateParams::new([0.0], [1.0]), 0.5).unwrap();
        let data = (1..=20).map(|i| TimedObservation::new(i as f64, (i as f64 * 0.3).sin())).collect();
        (m, data)
    }

    fn config(seed: u64, n: usize) -> PmmhConfig {
        let (m, _) = linear_gaussian();
        let k = m.params().values().len();
        let mut steps = vec![0.0; k];
        steps[k - 1] = 0.2;
        PmmhConfig {
            chain: ChainConfig::new(40, 10, 3),
            filter: FilterConfig::new(n, 0),
            seed,
            t_start: 0.0,
            walk: RandomWalk::new(steps, m.params().constraints()).unwrap(),
            priors: Priors::flat(k),
        }
    }

    #[test]
    fn pmmh_chain_is_reproducible() {
        let (m, data) = linear_gaussian();
        let a: Vec<_> = pmmh_chain(&m, config(11, 50), &data).unwrap().collect();
        let b: Vec<_> = pmmh_chain(&m, config(11, 50), &data).unwrap().collect();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        let c: Vec<_> = pmmh_chain(&m, config(12, 50), &data).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn pmmh_chain_rejects_bad_config() {
        let (m, data) = linear_gaussian();
        let mut c = config(1, 50);
        c.chain.thin = 0;
        assert!(matches!(pmmh_chain(&m, c, &data), Err(Error::InvalidConfig(_))));
        let mut c = config(1, 50);
        c.priors = Priors::flat(1);
        assert!(pmmh_chain(&m, c, &data).is_err());
        assert!(pmmh_chain(&m, config(1, 0), &data).is_err());
    }
}
