use pomp::{
    compose, compose_all, identity_model, path_log_likelihood, poisson_model, resample_stratified,
    resample_systematic, seasonal_model, simulate_at_times, FilterConfig, InitialStateParams, Model, Resampling,
    SdeParams, StateTree, TimedObservation,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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

fn data(model: &Model, n: usize, seed: u64) -> Vec<TimedObservation> {
    let times: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    simulate_at_times(model, &times, 0.0, seed).unwrap().observations
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_of_nested_composition_is_associative(
        x in prop::collection::vec(-3.0f64..3.0, 7),
        t in 0.0f64..500.0,
    ) {
        let (a, b, c) = (poisson(0.1), seasonal(24.0, 1), seasonal(168.0, 2));
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        let xl = StateTree::branch(
            StateTree::branch(StateTree::leaf(&x[..1]), StateTree::leaf(&x[1..3])),
            StateTree::leaf(&x[3..]),
        );
        let xr = StateTree::branch(
            StateTree::leaf(&x[..1]),
            StateTree::branch(StateTree::leaf(&x[1..3]), StateTree::leaf(&x[3..])),
        );
        let gl = left.linear_transform(&xl, t).unwrap();
        let gr = right.linear_transform(&xr, t).unwrap();
        prop_assert!((gl - gr).abs() <= 1e-12 * (1.0 + gl.abs()));
    }

    #[test]
    fn systematic_counts_are_floor_or_ceil(raw in prop::collection::vec(0.0f64..1.0, 2..64), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let n = w.len();
        let idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = resample_systematic(&idx, &w, &mut rng).unwrap();
        let mut counts = vec![0usize; n];
        for i in out {
            counts[i] += 1;
        }
        for (c, wi) in counts.iter().zip(&w) {
            let e = n as f64 * wi;
            prop_assert!(*c as f64 >= e.floor() - 1e-9 && *c as f64 <= e.ceil() + 1e-9);
        }
    }

    #[test]
    fn stratified_counts_stay_near_expectation(raw in prop::collection::vec(0.0f64..1.0, 2..64), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 0.0);
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let n = w.len();
        let idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = resample_stratified(&idx, &w, &mut rng).unwrap();
        prop_assert_eq!(out.len(), n);
        let mut counts = vec![0usize; n];
        for i in out {
            counts[i] += 1;
        }
        for (c, wi) in counts.iter().zip(&w) {
            let e = n as f64 * wi;
            prop_assert!(*c as f64 >= e.floor() - 1.0 && *c as f64 <= e.ceil() + 1.0);
        }
    }
}

#[test]
fn identity_composition_leaves_likelihood_bitwise_unchanged() {
    let m = compose(&poisson(0.2), &seasonal(24.0, 1));
    let ys = data(&m, 40, 3);
    let cfg = FilterConfig::new(200, 9).with_resampling(Resampling::Systematic);
    let base = path_log_likelihood(&m, &cfg, ys.clone(), 0.0).unwrap();
    let e = identity_model();
    for wrapped in [compose(&e, &m), compose(&m, &e), compose_all(&[e.clone(), m.clone(), e.clone()])] {
        let ll = path_log_likelihood(&wrapped, &cfg, ys.clone(), 0.0).unwrap();
        assert_eq!(ll.to_bits(), base.to_bits());
    }
}

#[test]
fn parallel_filter_matches_serial_bitwise() {
    let m = compose_all(&[poisson(0.2), seasonal(24.0, 2), seasonal(168.0, 1)]);
    let ys = data(&m, 60, 5);
    for scheme in [Resampling::Multinomial, Resampling::Systematic, Resampling::Stratified] {
        let cfg = FilterConfig::new(500, 17).with_resampling(scheme);
        let serial = path_log_likelihood(&m, &cfg, ys.clone(), 0.0).unwrap();
        let parallel = path_log_likelihood(&m, &cfg.clone().with_parallel(true), ys.clone(), 0.0).unwrap();
        assert_eq!(serial.to_bits(), parallel.to_bits(), "{scheme}");
    }
}

#[test]
fn simulation_is_a_function_of_the_seed() {
    let m = compose(&poisson(0.3), &seasonal(24.0, 1));
    let times: Vec<f64> = (0..50).map(|i| 0.5 * i as f64 + 0.25).collect();
    let a = simulate_at_times(&m, &times, 0.0, 11).unwrap();
    let b = simulate_at_times(&m, &times, 0.0, 11).unwrap();
    let c = simulate_at_times(&m, &times, 0.0, 12).unwrap();
    assert_eq!(a.observations, b.observations);
    assert_eq!(a.states, b.states);
    assert_ne!(a.states, c.states);
}

#[test]
fn likelihood_is_reproducible_and_seed_dependent() {
    let m = poisson(0.4);
    let ys = data(&m, 50, 1);
    let cfg = FilterConfig::new(300, 2);
    let a = path_log_likelihood(&m, &cfg, ys.clone(), 0.0).unwrap();
    let b = path_log_likelihood(&m, &cfg, ys.clone(), 0.0).unwrap();
    let c = path_log_likelihood(&m, &FilterConfig::new(300, 3), ys, 0.0).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_ne!(a, c);
}
