//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts the same condition.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use pomp::diagnostics::chi_square;
use pomp::resample::{offspring_counts, resample_indices};
use pomp::{
    compose, compose_all, gaussian_model, identity_model, lgcp_model, path_log_likelihood, poisson_model,
    seasonal_model, simulate_at_times, FilterConfig, InitialStateParams, Model, Resampling, SdeParams, StateTree,
    TimedObservation,
};
use pomp_cli::verify::{
    conjugate_check, kalman_check, lgcp_weight_check, recovery_experiment, thinning_check, RecoverySetup,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_pomp");

// Tolerances.
const KALMAN_MAX_SE: f64 = 3.0;
const KALMAN_MAX_SECS: f64 = 10.0;
const VARIANCE_SLACK: f64 = 1.1;
const CONJUGATE_MAX_SE: f64 = 3.0;
const CONJUGATE_MAX_KS: f64 = 0.03;
const CONJUGATE_MAX_SECS: f64 = 60.0;
const RECOVERY_MIN_COVERED: usize = 18;
const RECOVERY_MAX_SECS: f64 = 15.0 * 60.0;
const THINNING_MAX_SE: f64 = 4.0;
const ALPHA: f64 = 0.001;
const LGCP_MAX_REL: f64 = 1e-3;
const ASSOCIATIVITY_TOL: f64 = 1e-12;
const MEAN_MAX_SE: f64 = 4.0;
const STREAM_MAX_GROWTH_KB: u64 = 4096;
const COVERAGE: (f64, f64) = (0.96, 1.0);

fn report(id: &str, pass: bool, detail: String) {
    let line = format!("{} {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{id}: {detail}");
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run(args: &[&str]) -> Vec<u8> {
    let o = Command::new(BIN).args(args).output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

#[test]
fn c01_kalman_equivalence() {
    let k = kalman_check(1, 100, 2000, 50).unwrap();
    let z = (k.mean() - k.kalman_ll).abs() / k.se();
    let secs = k.elapsed.as_secs_f64();
    report(
        "C1 kalman equivalence",
        z < KALMAN_MAX_SE && secs < KALMAN_MAX_SECS,
        format!(
            "kalman {:.4}, filter mean {:.4}, {z:.2} se apart (< {KALMAN_MAX_SE}), {secs:.2} s (< {KALMAN_MAX_SECS})",
            k.kalman_ll,
            k.mean()
        ),
    );
}

#[test]
fn c02_estimator_variance_decreases() {
    let model =
        poisson_model(SdeParams::brownian([0.0], [0.15]), InitialStateParams::new([2.0], [0.3])).unwrap();
    let times: Vec<f64> = (1..=200).map(f64::from).collect();
    let data = simulate_at_times(&model, &times, 0.0, 7).unwrap().observations;
    let vars: Vec<f64> = [250, 500, 1000, 2000]
        .iter()
        .map(|&n| {
            let lls: Vec<f64> = (0..50)
                .map(|r| path_log_likelihood(&model, &FilterConfig::new(n, 100 + r), data.iter().copied(), 0.0).unwrap())
                .collect();
            pomp::stats::variance(&lls)
        })
        .collect();
    let pass = vars.windows(2).all(|w| w[1] < VARIANCE_SLACK * w[0]);
    report(
        "C2 estimator consistency",
        pass,
        format!("ll variance at N=250,500,1000,2000: {vars:.4?} (each < {VARIANCE_SLACK} x previous)"),
    );
}

#[test]
fn c03_pmmh_conjugate_posterior() {
    let c = conjugate_check(3, 50_000).unwrap();
    let z = (c.chain_mean - c.posterior_mean).abs() / c.batch_se;
    let secs = c.elapsed.as_secs_f64();
    report(
        "C3 pmmh conjugate",
        z < CONJUGATE_MAX_SE && c.ks < CONJUGATE_MAX_KS && secs < CONJUGATE_MAX_SECS,
        format!(
            "posterior mean {:.5}, chain mean {:.5}, {z:.2} batch se (< {CONJUGATE_MAX_SE}), ks {:.4} (< {CONJUGATE_MAX_KS}), {secs:.2} s",
            c.posterior_mean, c.chain_mean, c.ks
        ),
    );
}

#[test]
fn c04_pmmh_recovery() {
    let setup = RecoverySetup::default();
    let start = Instant::now();
    let results: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| recovery_experiment(&setup, seed).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let mu = results.iter().filter(|r| r.mu_covered).count();
    let sigma = results.iter().filter(|r| r.sigma_covered).count();
    let acc: Vec<f64> = results.iter().map(|r| r.acceptance).collect();
    let mut misses = Vec::new();
    for (seed, r) in results.iter().enumerate() {
        if !r.mu_covered {
            misses.push(format!("seed {seed} mu ({:.4}, {:.4})", r.mu_interval.0, r.mu_interval.1));
        }
        if !r.sigma_covered {
            misses.push(format!("seed {seed} sigma ({:.4}, {:.4})", r.sigma_interval.0, r.sigma_interval.1));
        }
    }
    report(
        "C4 pmmh recovery",
        mu >= RECOVERY_MIN_COVERED && sigma >= RECOVERY_MIN_COVERED && secs < RECOVERY_MAX_SECS,
        format!(
            "mu covered {mu}/20, sigma covered {sigma}/20 (>= {RECOVERY_MIN_COVERED}), acceptance {:.2}..{:.2}, {secs:.0} s on {} threads (< {RECOVERY_MAX_SECS}); truth mu {}, sigma {}; misses: {}",
            acc.iter().cloned().fold(f64::INFINITY, f64::min),
            acc.iter().cloned().fold(0.0, f64::max),
            rayon::current_num_threads(),
            setup.mu,
            setup.sigma,
            if misses.is_empty() { "none".to_string() } else { misses.join(", ") }
        ),
    );
}

#[test]
fn c05_thinning_law() {
    let t = thinning_check(5, 5.0, 10.0, 10_000).unwrap();
    let z = (t.mean_count - t.expected).abs() / t.se;
    report(
        "C5 lgcp thinning",
        z < THINNING_MAX_SE && t.ks_pvalue > ALPHA,
        format!(
            "mean count {:.3} vs {} ({z:.2} se, < {THINNING_MAX_SE}), exponential ks p {:.4} (> {ALPHA})",
            t.mean_count, t.expected, t.ks_pvalue
        ),
    );
}

#[test]
fn c06_lgcp_weight_closed_form() {
    let mut worst: f64 = 0.0;
    for (rate, gap) in [(2.0, 1.3), (0.5, 4.0), (10.0, 0.05)] {
        let (w, exact) = lgcp_weight_check(rate, gap).unwrap();
        worst = worst.max(((w - exact) / exact).abs());
    }
    report(
        "C6 lgcp weight",
        worst < LGCP_MAX_REL,
        format!("max relative error {worst:.2e} (< {LGCP_MAX_REL})"),
    );
}

fn poisson(sigma: f64) -> Model {
    poisson_model(SdeParams::brownian([0.01], [sigma]), InitialStateParams::new([1.0], [0.3])).unwrap()
}

fn seasonal(period: f64, h: usize) -> Model {
    let d = 2 * h;
    seasonal_model(
        period,
        h,
        SdeParams::ou(vec![0.3; d], vec![0.0; d], vec![0.1; d]),
        InitialStateParams::new(vec![0.2; d], vec![0.5; d]),
        1.0,
    )
    .unwrap()
}

#[test]
fn c07_composition_laws() {
    let (a, b, c) = (poisson(0.1), seasonal(24.0, 2), seasonal(168.0, 3));
    let left = compose(&compose(&a, &b), &c);
    let right = compose(&a, &compose(&b, &c));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
        let t = rng.random_range(0.0..1000.0);
        let xl = StateTree::branch(
            StateTree::branch(StateTree::leaf(&x[..1]), StateTree::leaf(&x[1..5])),
            StateTree::leaf(&x[5..]),
        );
        let xr = StateTree::branch(
            StateTree::leaf(&x[..1]),
            StateTree::branch(StateTree::leaf(&x[1..5]), StateTree::leaf(&x[5..])),
        );
        let gl = left.linear_transform(&xl, t).unwrap();
        let gr = right.linear_transform(&xr, t).unwrap();
        worst = worst.max((gl - gr).abs());
    }
    let associative = worst <= ASSOCIATIVITY_TOL;

    let m = compose(&poisson(0.2), &seasonal(24.0, 1));
    let times: Vec<f64> = (1..=50).map(f64::from).collect();
    let ys = simulate_at_times(&m, &times, 0.0, 3).unwrap().observations;
    let cfg = FilterConfig::new(300, 11);
    let base = path_log_likelihood(&m, &cfg, ys.clone(), 0.0).unwrap();
    let e = identity_model();
    let identity = [compose(&e, &m), compose(&m, &e)]
        .iter()
        .all(|w| path_log_likelihood(w, &cfg, ys.clone(), 0.0).unwrap().to_bits() == base.to_bits());

    let g = gaussian_model(SdeParams::brownian([0.0], [0.1]), InitialStateParams::new([0.0], [1.0]), 1.0).unwrap();
    let pg = compose(&poisson(0.1), &g);
    let gp = compose(&g, &poisson(0.1));
    let witness = pg.log_density(2.0, 3.0).unwrap() != gp.log_density(2.0, 3.0).unwrap();

    report(
        "C7 composition laws",
        associative && identity && witness,
        format!(
            "associativity max |diff| {worst:.1e} over 1000 probes (<= {ASSOCIATIVITY_TOL}), identity bitwise {identity}, non-commutative witness {witness}"
        ),
    );
}

#[test]
fn c08_resampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut idx = Vec::new();
    let n = 50;
    let mut systematic_ok = true;
    for _ in 0..10_000 {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        resample_indices(Resampling::Systematic, &w, &mut rng, &mut idx).unwrap();
        for (c, wi) in offspring_counts(&idx, n).iter().zip(&w) {
            let e = n as f64 * wi;
            let c = *c as f64;
            systematic_ok &= c == e.floor() || c == e.ceil();
        }
    }

    let m = 100;
    let uniform = vec![1.0 / m as f64; m];
    let mut totals = vec![0.0; m];
    for _ in 0..10_000 {
        resample_indices(Resampling::Multinomial, &uniform, &mut rng, &mut idx).unwrap();
        for (t, c) in totals.iter_mut().zip(offspring_counts(&idx, m)) {
            *t += c as f64;
        }
    }
    let expected = vec![10_000.0; m];
    let (_, p) = chi_square(&totals, &expected).unwrap();

    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1).collect();
    let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let target: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
    let mut worst_z: f64 = 0.0;
    for scheme in [Resampling::Multinomial, Resampling::Systematic, Resampling::Stratified] {
        let means: Vec<f64> = (0..10_000)
            .map(|_| {
                resample_indices(scheme, &w, &mut rng, &mut idx).unwrap();
                idx.iter().map(|&i| x[i]).sum::<f64>() / n as f64
            })
            .collect();
        let se = (pomp::stats::variance(&means) / means.len() as f64).sqrt();
        let diff = (pomp::stats::mean(&means) - target).abs();
        let z = if se > 0.0 { diff / se } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z);
    }
    report(
        "C8 resampling",
        systematic_ok && p > ALPHA && worst_z < MEAN_MAX_SE,
        format!(
            "systematic floor/ceil over 1e4 trials {systematic_ok}, multinomial chi-square p {p:.4} (> {ALPHA}), weighted mean worst {worst_z:.2} se (< {MEAN_MAX_SE})"
        ),
    );
}

fn vm_hwm_kb(pid: u32) -> u64 {
    let status = fs::read_to_string(format!("/proc/{pid}/status")).unwrap();
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
        .unwrap()
}

/// Streams `rows` observations through `pomp filter --data -`. Returns the
/// peak resident set size, whether output arrived before the input was
/// finished, and the number of rows emitted.
fn stream_filter(cfg: &Path, rows: usize) -> (u64, bool, usize) {
    let mut child = Command::new(BIN)
        .args(["filter", "--config", s(cfg), "--data", "-", "--seed", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let pid = child.id();
    let mut stdin = child.stdin.take().unwrap();
    let stdout = child.stdout.take().unwrap();
    let (tx, rx) = mpsc::channel();
    let reader = std::thread::spawn(move || {
        let mut n = 0usize;
        for line in BufReader::new(stdout).lines() {
            line.unwrap();
            n += 1;
            tx.send(n).unwrap();
        }
        n
    });
    let mut buf = String::from("time,value\n");
    let row = |i: usize| format!("{},{}\n", i + 1, 3 + (i * 7919) % 11);
    let head = 1000.min(rows);
    for i in 0..head {
        buf.push_str(&row(i));
    }
    stdin.write_all(buf.as_bytes()).unwrap();
    stdin.flush().unwrap();
    // Output must appear while the input is still open.
    let early = rx.recv_timeout(Duration::from_secs(30)).map(|_| true).unwrap_or(false);
    let mut i = head;
    while i < rows {
        buf.clear();
        let end = (i + 10_000).min(rows);
        for k in i..end {
            buf.push_str(&row(k));
        }
        stdin.write_all(buf.as_bytes()).unwrap();
        i = end;
    }
    stdin.flush().unwrap();
    let mut seen = 0;
    while seen < rows + 1 {
        match rx.recv_timeout(Duration::from_secs(120)) {
            Ok(n) => seen = n,
            Err(_) => break,
        }
    }
    let hwm = vm_hwm_kb(pid);
    drop(stdin);
    let emitted = reader.join().unwrap();
    assert!(child.wait().unwrap().success());
    (hwm, early, emitted.saturating_sub(1))
}

#[test]
fn c09_streaming_memory_is_bounded() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("stream.toml");
    fs::write(
        &cfg,
        "[filter]\nparticles = 100\n\n[[model]]\nkind = \"poisson\"\ninit_mean = [1.5]\ninit_sd = [0.2]\nsde = { kind = \"brownian\", mu = [0.0], sigma = [0.05] }\n",
    )
    .unwrap();
    let (small, early_small, rows_small) = stream_filter(&cfg, 10_000);
    let (large, early_large, rows_large) = stream_filter(&cfg, 1_000_000);
    let growth = large.saturating_sub(small);
    report(
        "C9 streaming",
        early_small && early_large && rows_small == 10_000 && rows_large == 1_000_000 && growth < STREAM_MAX_GROWTH_KB,
        format!(
            "peak rss {small} kB at 1e4 rows, {large} kB at 1e6 rows (growth {growth} kB < {STREAM_MAX_GROWTH_KB}), incremental output {}, rows {rows_large}",
            early_small && early_large
        ),
    );
}

#[test]
fn c10_reproducibility() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = config("poisson_seasonal.toml");
    let lgcp = config("lgcp.toml");
    let data = d.join("data.csv");
    run(&["simulate", "--config", s(&cfg), "--horizon", "80", "--step", "1", "--seed", "4", "--out", s(&data)]);
    let events = d.join("events.csv");
    run(&["simulate", "--config", s(&lgcp), "--horizon", "40", "--seed", "4", "--out", s(&events)]);

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate", "--config", s(&cfg), "--horizon", "50", "--step", "0.5", "--seed", "9"].into_iter().map(String::from).collect()),
        ("simulate lgcp", vec!["simulate", "--config", s(&lgcp), "--horizon", "100", "--grid-dt", "0.01", "--seed", "9"].into_iter().map(String::from).collect()),
        ("filter", vec!["filter", "--config", s(&cfg), "--data", s(&data), "--seed", "9"].into_iter().map(String::from).collect()),
        ("filter lgcp", vec!["filter", "--config", s(&lgcp), "--data", s(&events), "--seed", "9"].into_iter().map(String::from).collect()),
        ("forecast", vec!["forecast", "--config", s(&cfg), "--data", s(&data), "--horizon", "10", "--step", "1", "--seed", "9"].into_iter().map(String::from).collect()),
        ("verify", vec!["verify", "lgcp-weight", "--seed", "9"].into_iter().map(String::from).collect()),
    ];
    let mut identical = true;
    for (name, args) in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let same = run(&args) == run(&args);
        if !same {
            std::io::stderr().write_all(format!("  {name} differs between runs\n").as_bytes()).unwrap();
        }
        identical &= same;
    }
    let fit = |prefix: &Path| {
        run(&[
            "fit", "--config", s(&cfg), "--data", s(&data), "--iterations", "60", "--burn-in", "10", "--particles",
            "50", "--chains", "2", "--seed", "9", "--out", s(prefix),
        ]);
        (0..2)
            .map(|k| fs::read(format!("{}.chain{k}", prefix.display())).unwrap())
            .chain([fs::read(format!("{}.params.csv", prefix.display())).unwrap()])
            .collect::<Vec<_>>()
    };
    identical &= fit(&d.join("a")) == fit(&d.join("b"));

    let serial = run(&["filter", "--config", s(&cfg), "--data", s(&data), "--seed", "9"]);
    let parallel = run(&["filter", "--config", s(&cfg), "--data", s(&data), "--seed", "9", "--parallel"]);
    let mut bitwise = serial == parallel;
    let m = compose_all(&[poisson(0.2), seasonal(24.0, 2), seasonal(168.0, 1)]);
    let times: Vec<f64> = (1..=60).map(f64::from).collect();
    let ys = simulate_at_times(&m, &times, 0.0, 5).unwrap().observations;
    for scheme in [Resampling::Multinomial, Resampling::Systematic, Resampling::Stratified] {
        let c = FilterConfig::new(400, 3).with_resampling(scheme);
        let a = path_log_likelihood(&m, &c, ys.clone(), 0.0).unwrap();
        let b = path_log_likelihood(&m, &c.clone().with_parallel(true), ys.clone(), 0.0).unwrap();
        bitwise &= a.to_bits() == b.to_bits();
    }
    let l = lgcp_model(SdeParams::ou([0.2], [0.0], [0.3]), InitialStateParams::new([0.0], [0.2])).unwrap();
    let ev: Vec<TimedObservation> = (1..=30).map(|i| TimedObservation::event(i as f64 * 0.8)).collect();
    let c = FilterConfig::new(200, 3);
    bitwise &= path_log_likelihood(&l, &c, ev.clone(), 0.0).unwrap().to_bits()
        == path_log_likelihood(&l, &c.clone().with_parallel(true), ev, 0.0).unwrap().to_bits();

    report(
        "C10 reproducibility",
        identical && bitwise,
        format!("byte-identical reruns of simulate/filter/fit/forecast/verify {identical}, parallel == serial {bitwise}"),
    );
}

#[test]
fn c11_forecast_coverage() {
    let dir = TempDir::new().unwrap();
    let cfg = config("poisson_seasonal.toml");
    let all = dir.path().join("all.csv");
    run(&["simulate", "--config", s(&cfg), "--horizon", "1200", "--step", "1", "--seed", "11", "--out", s(&all)]);
    let text = fs::read_to_string(&all).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let train = dir.path().join("train.csv");
    let held = dir.path().join("held.csv");
    fs::write(&train, format!("{}\n{}\n", lines[0], lines[1..201].join("\n"))).unwrap();
    fs::write(&held, format!("{}\n{}\n", lines[0], lines[201..].join("\n"))).unwrap();
    let out = run(&[
        "forecast", "--config", s(&cfg), "--train", s(&train), "--data", s(&held), "--particles", "1000", "--seed", "2",
    ]);
    let out = String::from_utf8(out).unwrap();
    let mut n = 0;
    let mut inside = 0;
    for row in out.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        n += 1;
        if f[5] <= f[7] && f[7] <= f[6] {
            inside += 1;
        }
    }
    let coverage = inside as f64 / n as f64;
    report(
        "C11 forecast coverage",
        n == 1000 && coverage >= COVERAGE.0 && coverage <= COVERAGE.1,
        format!("99% band covers {inside}/{n} held-out points = {coverage:.3} (in [{}, {}])", COVERAGE.0, COVERAGE.1),
    );
}
