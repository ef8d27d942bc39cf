use cotc_core::fixtures::{self, EXAMPLE1_ON_TIME, EXAMPLE1_PERIOD};
use cotc_core::simulator::{
    classify_orbit, estimate_multiplier, onset_search, simulate, step_cycle, OrbitKind, OrbitProbe,
    DEFAULT_SETTLE,
};
use cotc_core::{build_model, consistent_control, linearize, steady_state_at, RampSpec, Scheme};

const D: f64 = EXAMPLE1_ON_TIME;
const T: f64 = EXAMPLE1_PERIOD;

fn setup(ma: f64) -> (cotc_core::ConverterModel, f64, cotc_core::SteadyState) {
    let p = fixtures::example1();
    let m = build_model(&p, Scheme::VCotc).unwrap();
    let (vc, ss) = consistent_control(&m, D, T, p.vs, ma).unwrap();
    (m, vc, ss)
}

#[test]
fn one_cycle_from_the_fixed_point() {
    for ma in [0.0, 943.4, 9500.0] {
        let (m, vc, ss) = setup(ma);
        let step = step_cycle(&m, RampSpec::new(ma, D).unwrap(), &ss.x0_0, [5.0, vc], T).unwrap();
        assert!((step.period - T).abs() < 1e-12, "{}", step.period);
        for (a, b) in step.state.iter().zip(&ss.x0_0) {
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
        }
        assert!((step.y_at_switch - ma * step.period).abs() <= 1e-9 * vc.abs().max(1.0));
    }
}

#[test]
fn zero_perturbation_gives_a_constant_trace() {
    let (m, vc, ss) = setup(9500.0);
    let trace = simulate(&m, RampSpec::new(9500.0, D).unwrap(), &ss.x0_0, [5.0, vc], 200, T).unwrap();
    let periods = trace.periods();
    assert!(periods.iter().all(|t| (t - T).abs() < 1e-13));
    let again = simulate(&m, RampSpec::new(9500.0, D).unwrap(), &ss.x0_0, [5.0, vc], 200, T).unwrap();
    assert_eq!(trace, again);
}

#[test]
fn assigned_poles_settle_to_period_one() {
    let (m, vc, ss) = setup(9500.0);
    let x0: Vec<f64> = ss.x0_0.iter().map(|v| v * 1.01).collect();
    let trace = simulate(&m, RampSpec::new(9500.0, D).unwrap(), &x0, [5.0, vc], 640, T).unwrap();
    let dev: Vec<f64> = trace.records[100].state.iter().zip(&ss.x0_0).map(|(a, b)| (a - b).abs()).collect();
    assert!(dev.iter().zip(&ss.x0_0).all(|(d, x)| *d < 1e-9 * x.abs()));
    let class = classify_orbit(&trace, DEFAULT_SETTLE);
    assert_eq!(class.kind, OrbitKind::Period1);
}

#[test]
fn no_ramp_gives_subharmonic_oscillation() {
    let (m, vc, ss) = setup(0.0);
    let x0: Vec<f64> = ss.x0_0.iter().map(|v| v * (1.0 + 1e-4)).collect();
    let trace = simulate(&m, RampSpec::new(0.0, D).unwrap(), &x0, [5.0, vc], 1200, T).unwrap();
    let periods = trace.periods();
    // deviations alternate in sign and grow
    let dev: Vec<f64> = periods[..60].iter().map(|t| t - T).collect();
    assert!(dev.windows(2).all(|w| w[0] * w[1] < 0.0));
    assert!(dev[59].abs() > 10.0 * dev[1].abs());
    // the flip is subcritical: the orbit leaves for large excursions that
    // reach the on-time border instead of settling on a small period-2 orbit
    let class = classify_orbit(&trace, DEFAULT_SETTLE);
    assert_eq!(class.kind, OrbitKind::Other, "{class:?}");
    assert!(periods[DEFAULT_SETTLE..].iter().any(|t| *t == D));
}

#[test]
fn multiplier_from_simulation_matches_the_linearized_pole() {
    let (m, vc, ss) = setup(0.0);
    let ramp = RampSpec::new(0.0, D).unwrap();
    let mu = estimate_multiplier(&m, ramp, &ss.x0_0, [5.0, vc], T, 1e-6, 8).unwrap();
    let ss2 = steady_state_at(&m, D, T, [5.0, vc]).unwrap();
    let poles = linearize(&m, &ss2, 0.0).unwrap().sorted_poles().unwrap();
    assert!((mu - poles[0].re).abs() < 1e-3, "{mu} vs {:?}", poles);
    assert!((mu.abs() - 1.1).abs() <= 0.05, "{mu}");
}

#[test]
fn ramp_onset_by_simulation() {
    let (m, _, _) = setup(0.0);
    let probe = OrbitProbe::default();
    let ma = onset_search(500.0, 1500.0, 20, |ma| Ok(probe.run(&m, D, T, 5.0, ma)?.kind)).unwrap();
    eprintln!("ma* = {ma}");
    assert!((ma - 943.4).abs() < 0.01 * 943.4, "{ma}");
}

#[test]
fn duty_onset_by_simulation() {
    let (m, _, _) = setup(0.0);
    let probe = OrbitProbe::default();
    let duty = onset_search(0.3, 0.45, 20, |duty| Ok(probe.run(&m, D, D / duty, 2.0 / duty, 0.0)?.kind)).unwrap();
    eprintln!("D* = {duty}");
    assert!((duty - 0.36).abs() < 0.01, "{duty}");
}
