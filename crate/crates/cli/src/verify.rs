//! Reference runs against closed-form answers. Each function returns the raw
//! measurements; `report` applies the default tolerances.

use std::time::{Duration, Instant};

use pomp::diagnostics::{batch_means_se, ks_pvalue, ks_statistic, normal_cdf};
use pomp::oracle::{conjugate_posterior, kalman_log_likelihood, LocalLevel};
use pomp::{
    gaussian_model, lgcp_model, path_log_likelihood, pmmh_chain, simulate_at_times, simulate_lgcp, Chain,
    ChainConfig, Constraint, FilterConfig, InitialStateParams, PmmhConfig, Priors, RandomWalk, Resampling, Result,
    SdeParams, TimedObservation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Local-level model used by the Kalman comparison.
pub const LOCAL_LEVEL: LocalLevel = LocalLevel {
    mu: 0.1,
    sigma: 0.3,
    v: 1.0,
    m0: 0.0,
    c0: 1.0,
};

/// `n` observations of the local-level model with gaps uniform on [0.5, 2].
pub fn local_level_data(n: usize, seed: u64) -> Result<Vec<TimedObservation>> {
    let l = LOCAL_LEVEL;
    let model = gaussian_model(
        SdeParams::brownian([l.mu], [l.sigma]),
        InitialStateParams::new([l.m0], [l.c0.sqrt()]),
        l.v,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let times: Vec<f64> = (0..n)
        .map(|_| {
            t += rng.random_range(0.5..2.0);
            t
        })
        .collect();
    Ok(simulate_at_times(&model, &times, 0.0, seed)?.observations)
}

#[derive(Debug, Clone)]
pub struct KalmanCheck {
    pub kalman_ll: f64,
    pub filter_lls: Vec<f64>,
    pub elapsed: Duration,
}

impl KalmanCheck {
    pub fn mean(&self) -> f64 {
        pomp::stats::mean(&self.filter_lls)
    }

    /// Standard error of the mean over replicate seeds.
    pub fn se(&self) -> f64 {
        (pomp::stats::variance(&self.filter_lls) / self.filter_lls.len() as f64).sqrt()
    }
}

/// Particle filter versus Kalman filter on simulated local-level data.
pub fn kalman_check(seed: u64, n_obs: usize, n_particles: usize, replicates: usize) -> Result<KalmanCheck> {
    let data = local_level_data(n_obs, seed)?;
    let start = Instant::now();
    let l = LOCAL_LEVEL;
    let model = gaussian_model(
        SdeParams::brownian([l.mu], [l.sigma]),
        InitialStateParams::new([l.m0], [l.c0.sqrt()]),
        l.v,
    )?;
    let kalman_ll = kalman_log_likelihood(l, data.iter().copied(), 0.0)?;
    let filter_lls = (0..replicates as u64)
        .map(|r| {
            let fc = FilterConfig::new(n_particles, seed.wrapping_add(1000 + r)).with_resampling(Resampling::Systematic);
            path_log_likelihood(&model, &fc, data.iter().copied(), 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KalmanCheck {
        kalman_ll,
        filter_lls,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct ConjugateCheck {
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    pub chain_mean: f64,
    pub batch_se: f64,
    pub ks: f64,
    pub acceptance: f64,
    pub elapsed: Duration,
}

/// Metropolis-Hastings with the exact Gaussian likelihood of a location
/// parameter under a flat prior, against the conjugate posterior.
pub fn conjugate_check(seed: u64, iterations: u64) -> Result<ConjugateCheck> {
    let (truth, v, n) = (1.5, 1.0, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n).map(|_| truth + rng.sample::<f64, _>(StandardNormal)).collect();
    let (pm, pv) = conjugate_posterior(0.0, f64::INFINITY, v, &data)?;
    let start = Instant::now();
    let ys = data.clone();
    let loglik = move |p: &Vec<f64>| -> Result<f64> {
        Ok(ys.iter().map(|y| -0.5 * (y - p[0]) * (y - p[0]) / v).sum())
    };
    let walk = RandomWalk::new(vec![2.4 * pv.sqrt()], vec![Constraint::Real])?;
    let burn_in = iterations / 50;
    let mut chain = Chain::new(vec![0.0], loglik, |_: &Vec<f64>| 0.0, walk, ChainConfig::new(iterations, burn_in, 1), seed)?;
    let draws: Vec<f64> = chain.by_ref().map(|s| s.params[0]).collect();
    let acceptance = chain.acceptance_rate()?;
    let sd = pv.sqrt();
    Ok(ConjugateCheck {
        posterior_mean: pm,
        posterior_sd: sd,
        chain_mean: pomp::stats::mean(&draws),
        batch_se: batch_means_se(&draws)?,
        ks: ks_statistic(&draws, |x| normal_cdf((x - pm) / sd)),
        acceptance,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct ThinningCheck {
    pub expected: f64,
    pub mean_count: f64,
    pub se: f64,
    /// KS p-value of the first event time of each run against the
    /// exponential law.
    pub ks_pvalue: f64,
    pub violations: usize,
}

/// Constant hazard `rate` on `(0, horizon]`, `runs` independent simulations.
pub fn thinning_check(seed: u64, rate: f64, horizon: f64, runs: usize) -> Result<ThinningCheck> {
    let model = lgcp_model(SdeParams::brownian([0.0], [0.0]), InitialStateParams::fixed([rate.ln()]))?;
    let mut counts = Vec::with_capacity(runs);
    let mut firsts = Vec::with_capacity(runs);
    let mut violations = 0;
    for r in 0..runs as u64 {
        let sim = simulate_lgcp(&model, horizon, None, seed.wrapping_mul(1_000_003).wrapping_add(r))?;
        counts.push(sim.events.len() as f64);
        if let Some(t) = sim.events.first() {
            firsts.push(*t);
        }
        violations += sim.violations;
    }
    let d = ks_statistic(&firsts, |t| 1.0 - (-rate * t).exp());
    Ok(ThinningCheck {
        expected: rate * horizon,
        mean_count: pomp::stats::mean(&counts),
        se: (pomp::stats::variance(&counts) / runs as f64).sqrt(),
        ks_pvalue: ks_pvalue(d, firsts.len()),
        violations,
    })
}

/// Filter weight of one event under constant hazard `rate` after `gap`,
/// with a grid of `gap * 1e-3`. Returns `(weight, ln rate - rate * gap)`.
pub fn lgcp_weight_check(rate: f64, gap: f64) -> Result<(f64, f64)> {
    let model = lgcp_model(SdeParams::brownian([0.0], [0.0]), InitialStateParams::fixed([rate.ln()]))?;
    let fc = FilterConfig::new(16, 0).with_grid_dt(gap * 1e-3);
    let w = path_log_likelihood(&model, &fc, [TimedObservation::event(gap)], 0.0)?;
    Ok((w, rate.ln() - rate * gap))
}

/// Parameters of the end-to-end recovery experiment: Poisson counts with a
/// Brownian log-rate plus a fixed daily cycle of one harmonic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySetup {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub x0_sd: f64,
    pub seasonal: [f64; 2],
    pub n_obs: usize,
    pub iterations: u64,
    pub burn_in: u64,
    pub particles: usize,
    pub steps: [f64; 2],
}

impl Default for RecoverySetup {
    fn default() -> Self {
        RecoverySetup {
            mu: 0.005,
            sigma: 0.05,
            x0: 2.5,
            x0_sd: 0.1,
            seasonal: [0.5, 0.3],
            n_obs: 300,
            iterations: 20_000,
            burn_in: 2_000,
            particles: 200,
            steps: [0.004, 0.25],
        }
    }
}

impl RecoverySetup {
    /// The model at drift `mu` and diffusion `sigma`.
    pub fn model(&self, mu: f64, sigma: f64) -> Result<pomp::Model> {
        let counts = pomp::poisson_model(
            SdeParams::brownian([mu], [sigma]),
            InitialStateParams::new([self.x0], [self.x0_sd]),
        )?;
        let daily = pomp::seasonal_model(
            24.0,
            1,
            SdeParams::brownian([0.0, 0.0], [0.0, 0.0]),
            InitialStateParams::fixed(self.seasonal),
            1.0,
        )?;
        Ok(pomp::compose(&counts, &daily))
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Central 95% posterior intervals for the drift and the diffusion.
    pub mu_interval: (f64, f64),
    pub sigma_interval: (f64, f64),
    pub mu_covered: bool,
    pub sigma_covered: bool,
    pub acceptance: f64,
    pub elapsed: Duration,
}

/// Simulates hourly counts at the true parameters, then runs PMMH over the
/// drift and diffusion of the count component.
pub fn recovery_experiment(setup: &RecoverySetup, seed: u64) -> Result<RecoveryResult> {
    let truth = setup.model(setup.mu, setup.sigma)?;
    let times: Vec<f64> = (1..=setup.n_obs).map(|t| t as f64).collect();
    let data = simulate_at_times(&truth, &times, 0.0, seed)?.observations;
    let start = Instant::now();
    // deliberately away from the truth
    let init = setup.model(0.0, 2.0 * setup.sigma)?;
    let names = init.params().names();
    let mu_at = names.iter().position(|n| n == "leaf0.mu0").expect("drift coordinate");
    let sigma_at = names.iter().position(|n| n == "leaf0.sigma0").expect("diffusion coordinate");
    let mut steps = vec![0.0; names.len()];
    steps[mu_at] = setup.steps[0];
    steps[sigma_at] = setup.steps[1];
    let config = PmmhConfig {
        chain: ChainConfig::new(setup.iterations, setup.burn_in, 1),
        filter: FilterConfig::new(setup.particles, 0).with_resampling(Resampling::Systematic),
        seed: seed ^ 0x00c0_ffee,
        t_start: 0.0,
        walk: RandomWalk::new(steps, init.params().constraints())?.with_jacobian(true),
        priors: Priors::flat(names.len()),
    };
    let mut chain = pmmh_chain(&init, config, &data)?;
    let (mut mus, mut sigmas) = (Vec::new(), Vec::new());
    for s in chain.by_ref() {
        let v = s.params.values();
        mus.push(v[mu_at]);
        sigmas.push(v[sigma_at]);
    }
    let acceptance = chain.acceptance_rate()?;
    let w = vec![1.0; mus.len()];
    let q = |x: &[f64]| {
        let q = pomp::stats::weighted_quantiles_inverse(x, &w, &[0.025, 0.975]);
        (q[0], q[1])
    };
    let (mu_interval, sigma_interval) = (q(&mus), q(&sigmas));
    Ok(RecoveryResult {
        mu_interval,
        sigma_interval,
        mu_covered: mu_interval.0 <= setup.mu && setup.mu <= mu_interval.1,
        sigma_covered: sigma_interval.0 <= setup.sigma && setup.sigma <= sigma_interval.1,
        acceptance,
        elapsed: start.elapsed(),
    })
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: &'static str,
    pub detail: String,
    pub pass: bool,
}

impl std::fmt::Display for Line {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Runs the named check (`kalman`, `conjugate`, `thinning`, `lgcp-weight`
/// or `all`) with its default tolerances.
pub fn report(which: &str, seed: u64) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    let all = which == "all";
    if all || which == "kalman" {
        let k = kalman_check(seed, 100, 2000, 50)?;
        let z = (k.mean() - k.kalman_ll).abs() / k.se();
        out.push(Line {
            name: "kalman",
            detail: format!(
                "kalman ll {:.4}, filter mean {:.4} (se {:.4}, {:.2} se apart)",
                k.kalman_ll,
                k.mean(),
                k.se(),
                z
            ),
            pass: z < 3.0,
        });
    }
    if all || which == "conjugate" {
        let c = conjugate_check(seed, 50_000)?;
        let z = (c.chain_mean - c.posterior_mean).abs() / c.batch_se;
        out.push(Line {
            name: "conjugate",
            detail: format!(
                "posterior mean {:.5}, chain mean {:.5} ({:.2} batch se), ks {:.4}, acceptance {:.3}",
                c.posterior_mean, c.chain_mean, z, c.ks, c.acceptance
            ),
            pass: z < 3.0 && c.ks < 0.03,
        });
    }
    if all || which == "thinning" {
        let t = thinning_check(seed, 5.0, 10.0, 10_000)?;
        let z = (t.mean_count - t.expected).abs() / t.se;
        out.push(Line {
            name: "thinning",
            detail: format!(
                "mean count {:.4} vs {} ({:.2} se), first-event ks p {:.4}, envelope violations {}",
                t.mean_count, t.expected, z, t.ks_pvalue, t.violations
            ),
            pass: z < 4.0 && t.ks_pvalue > 0.001,
        });
    }
    if all || which == "lgcp-weight" {
        let (w, exact) = lgcp_weight_check(2.0, 1.3)?;
        let rel = ((w - exact) / exact).abs();
        out.push(Line {
            name: "lgcp-weight",
            detail: format!("weight {w:.10} vs {exact:.10}, relative error {rel:.2e}"),
            pass: rel < 1e-3,
        });
    }
    if out.is_empty() {
        return Err(pomp::Error::InvalidConfig(format!("unknown check {which:?}")));
    }
    Ok(out)
}
