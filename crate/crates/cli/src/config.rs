//! TOML model configuration.
//!
//! ```toml
//! [time]
//! unit = "hours"            # seconds | minutes | hours | days
//! epoch = "2016-07-01T00:00:00"
//! t_start = 0.0
//!
//! [filter]
//! particles = 200
//! resampling = "systematic" # multinomial | systematic | stratified
//!
//! [[model]]                 # components, in composition order
//! kind = "poisson"
//! init_mean = [2.5]
//! init_sd = [0.1]
//! sde = { kind = "brownian", mu = [0.0], sigma = [0.05] }
//!
//! [fit]
//! iterations = 20000
//! burn_in = 2000
//! steps = { "leaf0.mu0" = 0.003, "leaf0.sigma0" = 0.15 }
//! priors = { "leaf0.sigma0" = { kind = "lognormal", mu = -3.0, sigma = 1.0 } }
//! ```
//!
//! Parameter names are the canonical flattened names `leaf<k>.<field><i>`.

use std::collections::BTreeMap;
use std::path::Path;

use pomp::{
    compose_all, gaussian_model, lgcp_model, poisson_model, seasonal_model, bernoulli_model, ChainConfig,
    FilterConfig, InitialStateParams, Model, ParamTree, Prior, Priors, RandomWalk, Resampling, SdeParams,
};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::ingest::{parse_datetime, TimeSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub filter: FilterSection,
    pub model: Vec<ComponentConfig>,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Seconds,
    Minutes,
    Hours,
    Days,
}

impl Unit {
    pub fn seconds(self) -> f64 {
        match self {
            Unit::Seconds => 1.0,
            Unit::Minutes => 60.0,
            Unit::Hours => 3600.0,
            Unit::Days => 86_400.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub unit: Unit,
    pub epoch: Option<String>,
    pub t_start: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_resampling")]
    pub resampling: String,
    pub ess_threshold: Option<f64>,
    pub grid_dt: Option<f64>,
}

fn default_particles() -> usize {
    200
}

fn default_resampling() -> String {
    "systematic".into()
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            particles: default_particles(),
            resampling: default_resampling(),
            ess_threshold: None,
            grid_dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Poisson,
    Bernoulli,
    Gaussian,
    Seasonal,
    Lgcp,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub kind: Kind,
    pub period: Option<f64>,
    pub harmonics: Option<usize>,
    /// Observation variance for Gaussian and seasonal components.
    pub scale: Option<f64>,
    pub init_mean: Vec<f64>,
    pub init_sd: Option<Vec<f64>>,
    pub sde: SdeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SdeConfig {
    Brownian { mu: Vec<f64>, sigma: Vec<f64> },
    Ou { alpha: Vec<f64>, theta: Vec<f64>, sigma: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Correct for the asymmetry of log-scale proposals.
    #[serde(default)]
    pub jacobian: bool,
    #[serde(default)]
    pub steps: BTreeMap<String, f64>,
    #[serde(default)]
    pub priors: BTreeMap<String, PriorConfig>,
}

fn default_iterations() -> u64 {
    1000
}

fn default_thin() -> u64 {
    1
}

fn default_chains() -> usize {
    1
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            iterations: default_iterations(),
            burn_in: 0,
            thin: default_thin(),
            chains: default_chains(),
            jacobian: false,
            steps: BTreeMap::new(),
            priors: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorConfig {
    Flat,
    Gaussian { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl From<PriorConfig> for Prior {
    fn from(p: PriorConfig) -> Prior {
        match p {
            PriorConfig::Flat => Prior::Flat,
            PriorConfig::Gaussian { mean, sd } => Prior::Gaussian { mean, sd },
            PriorConfig::LogNormal { mu, sigma } => Prior::LogNormal { mu, sigma },
        }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let c: Config = toml::from_str(text).map_err(cfg_err)?;
        if c.model.is_empty() {
            return Err(cfg_err("at least one [[model]] is required"));
        }
        Ok(c)
    }

    /// The composed model.
    pub fn model(&self) -> Result<Model> {
        let parts = self
            .model
            .iter()
            .enumerate()
            .map(|(k, c)| c.build(k == 0).map_err(|e| cfg_err(format!("model {k}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(compose_all(&parts))
    }

    pub fn time_spec(&self) -> Result<TimeSpec> {
        let epoch = match &self.time.epoch {
            Some(s) => Some(parse_datetime(s).ok_or_else(|| cfg_err(format!("bad epoch {s:?}")))?),
            None => None,
        };
        Ok(TimeSpec {
            unit_seconds: self.time.unit.seconds(),
            epoch,
        })
    }

    pub fn resampling(&self) -> Result<Resampling> {
        self.filter.resampling.parse().map_err(cfg_err)
    }

    pub fn filter_config(&self, particles: Option<usize>, seed: u64) -> Result<FilterConfig> {
        let n = particles.unwrap_or(self.filter.particles);
        if n == 0 {
            return Err(cfg_err("at least one particle is required"));
        }
        let mut fc = FilterConfig::new(n, seed).with_resampling(self.resampling()?);
        if let Some(e) = self.filter.ess_threshold {
            if !(0.0..=1.0).contains(&e) {
                return Err(cfg_err(format!("ess_threshold must lie in [0, 1], got {e}")));
            }
            fc = fc.with_ess_threshold(e);
        }
        if let Some(g) = self.filter.grid_dt {
            if !(g > 0.0) {
                return Err(cfg_err(format!("grid_dt must be positive, got {g}")));
            }
            fc = fc.with_grid_dt(g);
        }
        Ok(fc)
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig::new(self.fit.iterations, self.fit.burn_in, self.fit.thin)
    }

    /// Random-walk step sizes by name; coordinates without a step stay fixed.
    pub fn random_walk(&self, params: &ParamTree) -> Result<RandomWalk> {
        let names = params.names();
        let steps = by_name(&names, &self.fit.steps, 0.0, "step")?;
        Ok(RandomWalk::new(steps, params.constraints()).map_err(cfg_err)?.with_jacobian(self.fit.jacobian))
    }

    /// Priors by name; coordinates without one get a flat prior.
    pub fn priors(&self, params: &ParamTree) -> Result<Priors> {
        let names = params.names();
        let table: BTreeMap<String, Prior> = self.fit.priors.iter().map(|(k, v)| (k.clone(), Prior::from(*v))).collect();
        Priors::new(by_name(&names, &table, Prior::Flat, "prior")?).map_err(cfg_err)
    }
}

fn by_name<T: Clone>(names: &[String], table: &BTreeMap<String, T>, default: T, what: &str) -> Result<Vec<T>> {
    if let Some(k) = table.keys().find(|k| !names.contains(k)) {
        return Err(cfg_err(format!("{what} for unknown parameter {k:?}; known: {}", names.join(", "))));
    }
    Ok(names.iter().map(|n| table.get(n).cloned().unwrap_or_else(|| default.clone())).collect())
}

impl ComponentConfig {
    fn build(&self, first: bool) -> pomp::Result<Model> {
        let dim = self.init_mean.len();
        let init = InitialStateParams::new(self.init_mean.clone(), self.init_sd.clone().unwrap_or(vec![0.0; dim]));
        let sde = match &self.sde {
            SdeConfig::Brownian { mu, sigma } => SdeParams::brownian(mu.clone(), sigma.clone()),
            SdeConfig::Ou { alpha, theta, sigma } => SdeParams::ou(alpha.clone(), theta.clone(), sigma.clone()),
        };
        let bad = |s: &str| pomp::Error::InvalidParameter(s.into());
        // only the first component's observation scale is used
        let scale = || match (self.scale, first) {
            (Some(v), _) => Ok(v),
            (None, false) => Ok(1.0),
            (None, true) => Err(bad("scale (observation variance) is required")),
        };
        match self.kind {
            Kind::Poisson => poisson_model(sde, init),
            Kind::Bernoulli => bernoulli_model(sde, init),
            Kind::Lgcp => lgcp_model(sde, init),
            Kind::Gaussian => gaussian_model(sde, init, scale()?),
            Kind::Seasonal => {
                let period = self.period.ok_or_else(|| bad("seasonal needs a period"))?;
                let h = self.harmonics.ok_or_else(|| bad("seasonal needs harmonics"))?;
                seasonal_model(period, h, sde, init, scale()?)
            }
        }
    }
}

/// Reads a `name,value` parameter file and overwrites the named coordinates.
pub fn apply_params_file(params: &ParamTree, path: &Path) -> Result<ParamTree> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    let mut table = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(cfg_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let (Some(name), Some(value)) = (rec.get(0), rec.get(1)) else {
            return Err(cfg_err(format!("{}:{line}: expected name,value", path.display())));
        };
        let v: f64 = value
            .parse()
            .map_err(|_| cfg_err(format!("{}:{line}: bad value {value:?}", path.display())))?;
        table.insert(name.to_string(), Some(v));
    }
    let names = params.names();
    let overrides = by_name(&names, &table, None, "value")?;
    let values: Vec<f64> = params
        .values()
        .into_iter()
        .zip(overrides)
        .map(|(old, new)| new.unwrap_or(old))
        .collect();
    params.with_values(&values).map_err(cfg_err)
}
