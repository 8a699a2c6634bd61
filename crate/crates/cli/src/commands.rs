//! The simulate, filter, fit and forecast workflows.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use clap::Args;
use pomp::{
    pmmh_chain, simulate_at_times, simulate_lgcp, Family, Model, ParticleFilter, PmmhConfig, Substreams,
};

use crate::config::{apply_params_file, Config};
use crate::error::{CliError, Result};
use crate::ingest::{read_all, Observations};
use crate::output::{fmt_f64, CsvOut};

fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Box::new(io::BufReader::new(f)))
}

/// Config plus optional parameter overrides.
fn load_model(config: &Path, params: Option<&Path>) -> Result<(Config, Model)> {
    let cfg = Config::load(config)?;
    let mut model = cfg.model()?;
    if let Some(p) = params {
        let tree = apply_params_file(model.params(), p)?;
        model = model.with_params(tree).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok((cfg, model))
}

fn is_events(model: &Model) -> bool {
    model.family() == Some(Family::EventTime)
}

/// Default start time when the config gives none. Event streams start at 0
/// unless the first event is at or before 0, in which case that event marks
/// the origin and is not scored. Other streams start at the first
/// observation. Returns the start and whether the first row is the origin.
fn default_start(events: bool, first: f64) -> (f64, bool) {
    if events && first > 0.0 {
        (0.0, false)
    } else {
        (first, events)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Parameter overrides, `name,value` rows.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// CSV whose first column `time` lists the observation times.
    #[arg(long)]
    pub times: Option<PathBuf>,
    /// Simulate up to this time: event times for LGCP models, otherwise
    /// observations every `--step`.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// LGCP grid spacing; defaults to horizon / 10^4.
    #[arg(long)]
    pub grid_dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the latent state at each observation time.
    #[arg(long)]
    pub latent: Option<PathBuf>,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let (cfg, model) = load_model(&a.config, a.params.as_deref())?;
    if is_events(&model) {
        let horizon = a
            .horizon
            .ok_or_else(|| CliError::Config("LGCP simulation needs --horizon".into()))?;
        let sim = simulate_lgcp(&model, horizon, a.grid_dt, a.seed).map_err(CliError::from_run)?;
        if sim.violations > 0 {
            eprintln!(
                "warning: hazard exceeded the grid envelope at {} of {} proposals",
                sim.violations, sim.proposals
            );
        }
        let mut out = CsvOut::open(a.out.as_deref(), false)?;
        out.header(&["time"])?;
        for t in &sim.events {
            out.floats(&[*t])?;
        }
        return out.finish();
    }
    let times: Vec<f64> = match (&a.times, a.horizon, a.step) {
        (Some(p), _, _) => read_all(open_input(p)?, cfg.time_spec()?, true)?
            .into_iter()
            .map(|o| o.time)
            .collect(),
        (None, Some(h), Some(dt)) if dt > 0.0 && h > 0.0 => {
            (1..).map(|k| k as f64 * dt).take_while(|t| *t <= h * (1.0 + 1e-12)).collect()
        }
        _ => return Err(CliError::Config("give --times, or --horizon with a positive --step".into())),
    };
    let t_start = cfg.time.t_start.unwrap_or(times.first().map_or(0.0, |t| t.min(0.0)));
    let sim = simulate_at_times(&model, &times, t_start, a.seed).map_err(CliError::from_run)?;
    let mut out = CsvOut::open(a.out.as_deref(), false)?;
    out.header(&["time", "value"])?;
    for o in &sim.observations {
        out.floats(&[o.time, o.value])?;
    }
    out.finish()?;
    if let Some(p) = &a.latent {
        let mut lat = CsvOut::open(Some(p), false)?;
        let mut cols = vec!["time".to_string()];
        for (k, leaf) in model.leaves().iter().enumerate() {
            cols.extend((0..leaf.dim).map(|i| format!("leaf{k}.x{i}")));
        }
        lat.header(&cols.iter().map(String::as_str).collect::<Vec<_>>())?;
        for (o, s) in sim.observations.iter().zip(&sim.states) {
            let mut row = vec![o.time];
            row.extend(s.flatten());
            lat.floats(&row)?;
        }
        lat.finish()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Observations CSV, `-` for stdin.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Propagate and weight particles on all cores. Output is identical to
    /// the serial run.
    #[arg(long)]
    pub parallel: bool,
}

pub fn filter(a: &FilterArgs) -> Result<()> {
    let (cfg, model) = load_model(&a.config, a.params.as_deref())?;
    let fc = cfg.filter_config(a.particles, a.seed)?.with_parallel(a.parallel);
    let streaming = a.data == Path::new("-") || a.out.as_deref().is_none_or(|p| p == Path::new("-"));
    let mut data = Observations::new(open_input(&a.data)?, cfg.time_spec()?, is_events(&model))?.peekable();
    let mut out = CsvOut::open(a.out.as_deref(), streaming)?;
    out.header(&["time", "eta_mean", "eta_lower", "eta_upper", "ll"])?;
    let t_start = match (cfg.time.t_start, data.peek()) {
        (Some(t), _) => t,
        (None, Some(Ok(y))) => {
            let (t, origin) = default_start(is_events(&model), y.time);
            if origin {
                data.next();
            }
            t
        }
        (None, Some(Err(_))) => return Err(data.next().expect("peeked").unwrap_err()),
        (None, None) => return out.finish(),
    };
    let mut pf = ParticleFilter::new(&model, fc).map_err(CliError::from_run)?;
    let mut s = pf.init(t_start).map_err(CliError::from_run)?;
    for y in data {
        let y = y?;
        let inc = pf.step(&mut s, y).map_err(CliError::from_run)?;
        let r = pf.summary(&s, inc);
        out.floats(&[r.time, r.eta_mean, r.eta_lower, r.eta_upper, r.ll])?;
    }
    out.finish()
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Starting values, `name,value` rows.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: chain `k` goes to `<out>.chain<k>`, posterior means to
    /// `<out>.params.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

struct ChainResult {
    sums: Vec<f64>,
    emitted: u64,
    acceptance: f64,
    ever_accepted: bool,
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let (mut cfg, model) = load_model(&a.config, a.params.as_deref())?;
    if let Some(v) = a.iterations {
        cfg.fit.iterations = v;
    }
    if let Some(v) = a.burn_in {
        cfg.fit.burn_in = v;
    }
    if let Some(v) = a.thin {
        cfg.fit.thin = v;
    }
    let chains = a.chains.unwrap_or(cfg.fit.chains);
    if chains == 0 {
        return Err(CliError::Config("at least one chain is required".into()));
    }
    cfg.chain_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut data = read_all(open_input(&a.data)?, cfg.time_spec()?, is_events(&model))?;
    let t_start = match (cfg.time.t_start, data.first()) {
        (Some(t), _) => t,
        (None, Some(y)) => {
            let (t, origin) = default_start(is_events(&model), y.time);
            if origin {
                data.remove(0);
            }
            t
        }
        (None, None) => 0.0,
    };
    let params = model.params().clone();
    let names = params.names();
    let base = PmmhConfig {
        chain: cfg.chain_config(),
        filter: cfg.filter_config(a.particles, 0)?,
        seed: 0,
        t_start,
        walk: cfg.random_walk(&params)?,
        priors: cfg.priors(&params)?,
    };
    let roots = Substreams::new(a.seed);
    let run = |k: usize| -> Result<ChainResult> {
        let mut pc = base.clone();
        pc.seed = roots.child_seed(k as u64);
        let path = chain_path(&a.out, k);
        let mut out = CsvOut::open(Some(&path), false)?;
        let mut cols = vec!["iteration", "ll", "accepted"];
        cols.extend(names.iter().map(String::as_str));
        out.header(&cols)?;
        let mut chain = pmmh_chain(&model, pc, &data).map_err(CliError::from_run)?;
        let mut sums = vec![0.0; names.len()];
        let mut emitted = 0;
        let mut ever_accepted = false;
        for st in chain.by_ref() {
            let v = st.params.values();
            for (s, x) in sums.iter_mut().zip(&v) {
                *s += x;
            }
            emitted += 1;
            ever_accepted |= st.ll > pomp::pmmh::INITIAL_LL;
            let mut row = vec![st.iteration.to_string(), fmt_f64(st.ll), (st.accepted as u8).to_string()];
            row.extend(v.iter().map(|x| fmt_f64(*x)));
            out.row(row)?;
        }
        out.finish()?;
        Ok(ChainResult {
            sums,
            emitted,
            acceptance: chain.acceptance_rate().unwrap_or(0.0),
            ever_accepted,
        })
    };
    let results: Vec<Result<ChainResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains).map(|k| scope.spawn(move || run(k))).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let mut totals = vec![0.0; names.len()];
    let mut n = 0u64;
    for (k, r) in results.into_iter().enumerate() {
        let r = r?;
        eprintln!("chain {k}: acceptance rate {:.3}", r.acceptance);
        if !r.ever_accepted {
            return Err(CliError::Numeric(format!(
                "chain {k} never obtained a finite likelihood estimate"
            )));
        }
        for (t, s) in totals.iter_mut().zip(&r.sums) {
            *t += s;
        }
        n += r.emitted;
    }
    let mut out = CsvOut::open(Some(&params_path(&a.out)), false)?;
    out.header(&["name", "value"])?;
    for (name, t) in names.iter().zip(&totals) {
        out.row([name.clone(), fmt_f64(t / n as f64)])?;
    }
    out.finish()
}

pub fn chain_path(prefix: &Path, k: usize) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".chain{k}"));
    PathBuf::from(s)
}

pub fn params_path(prefix: &Path) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".params.csv");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Parameter values, e.g. the `.params.csv` written by `fit`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Observations to forecast one step ahead, or, with `--horizon`, the
    /// history to forecast from.
    #[arg(long)]
    pub data: PathBuf,
    /// History filtered before the one-step forecasts start.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Forecast this far past the last observation, every `--step`.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const FORECAST_COLUMNS: [&str; 8] = [
    "time", "eta_mean", "eta_lower", "eta_upper", "obs_mean", "obs_lower", "obs_upper", "observed",
];

pub fn forecast(a: &ForecastArgs) -> Result<()> {
    let (cfg, model) = load_model(&a.config, a.params.as_deref())?;
    if is_events(&model) {
        return Err(CliError::Config("forecasting is not available for LGCP models".into()));
    }
    let spec = cfg.time_spec()?;
    let train = match &a.train {
        Some(p) => read_all(open_input(p)?, spec, false)?,
        None => Vec::new(),
    };
    let data = read_all(open_input(&a.data)?, spec, false)?;
    let first = train.first().or(data.first()).map(|y| y.time);
    let t_start = cfg.time.t_start.or(first).unwrap_or(0.0);
    let mut pf = ParticleFilter::new(&model, cfg.filter_config(a.particles, a.seed)?).map_err(CliError::from_run)?;
    let mut s = pf.init(t_start).map_err(CliError::from_run)?;
    for y in &train {
        pf.step(&mut s, *y).map_err(CliError::from_run)?;
    }
    let mut out = CsvOut::open(a.out.as_deref(), false)?;
    out.header(&FORECAST_COLUMNS)?;
    let mut key = 0u64;
    let emit = |out: &mut CsvOut, p: pomp::Prediction, observed: Option<f64>| {
        let mut row: Vec<String> = [p.time, p.eta_mean, p.eta_lower, p.eta_upper, p.obs_mean, p.obs_lower, p.obs_upper]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect();
        row.push(observed.map(fmt_f64).unwrap_or_default());
        out.row(row)
    };
    match a.horizon {
        None => {
            for y in &data {
                let p = pf.predict(&s, y.time, key).map_err(CliError::from_run)?;
                key += 1;
                emit(&mut out, p, Some(y.value))?;
                pf.step(&mut s, *y).map_err(CliError::from_run)?;
            }
        }
        Some(h) => {
            let dt = a
                .step
                .filter(|d| *d > 0.0)
                .ok_or_else(|| CliError::Config("--horizon needs a positive --step".into()))?;
            for y in &data {
                pf.step(&mut s, *y).map_err(CliError::from_run)?;
            }
            let t0 = s.t0;
            let steps = (h / dt * (1.0 + 1e-12)).floor() as u64;
            for k in 1..=steps {
                let p = pf.predict(&s, t0 + k as f64 * dt, k).map_err(CliError::from_run)?;
                emit(&mut out, p, None)?;
            }
        }
    }
    out.finish()
}
