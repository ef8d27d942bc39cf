use cotc_core::bifurcation::s_exact;
use cotc_core::fixtures::{self, EXAMPLE1_ON_TIME, EXAMPLE1_PERIOD};
use cotc_core::harmonic::series_identities_check;
use cotc_core::numeric::{determinant, eigenvalues, expm, expm_integral, Matrix};
use cotc_core::simulator::step_cycle;
use cotc_core::{build_model, consistent_control, linearize, steady_state_at, BuckParams, RampSpec, Scheme};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b) / b.norm1().max(1.0)
}

fn config() -> impl Strategy<Value = (BuckParams, Scheme, f64, f64)> {
    (
        0.2f64..20.0,
        1e-6f64..20e-6,
        10e-6f64..500e-6,
        1e-3f64..50e-3,
        0.01f64..0.2,
        prop::sample::select(Scheme::ALL.to_vec()),
        0.1f64..0.8,
        0.5e-6f64..5e-6,
        1.0f64..20.0,
    )
        .prop_map(|(r, l, c, rc, ri, scheme, duty, period, vs)| {
            let p = BuckParams { r, l, c, rc, ri, vs, vc: 0.0 };
            (p, scheme, duty * period, period)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_semigroup(a in matrix(3), s in -1.5f64..1.5, t in -1.5f64..1.5) {
        let lhs = expm(&a, s + t).unwrap();
        let rhs = &expm(&a, s).unwrap() * &expm(&a, t).unwrap();
        prop_assert!(rel(&lhs, &rhs) < 1e-10);
        let id = &expm(&a, t).unwrap() * &expm(&a, -t).unwrap();
        prop_assert!(rel(&id, &Matrix::identity(3)) < 1e-10);
    }

    #[test]
    fn exponential_integral_identity(a in matrix(3), b in matrix(3), t in 0.0f64..1.5) {
        // A ∫₀ᵗ e^{Aσ} dσ B = (e^{At} − I) B
        let lhs = &a * &expm_integral(&a, &b, t).unwrap();
        let rhs = &(&expm(&a, t).unwrap() - &Matrix::identity(3)) * &b;
        prop_assert!(rel(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn determinant_is_the_product_of_eigenvalues(a in matrix(4)) {
        let ev = eigenvalues(&a).unwrap();
        let prod = ev.iter().fold(cotc_core::Complex64::new(1.0, 0.0), |acc, z| acc * z);
        let det = determinant(&a).unwrap();
        prop_assert!((prod.re - det).abs() < 1e-10 * det.abs().max(1.0));
        prop_assert!(prod.im.abs() < 1e-10 * det.abs().max(1.0));
        let trace: f64 = ev.iter().map(|z| z.re).sum();
        prop_assert!((trace - a.trace()).abs() < 1e-10 * a.norm1().max(1.0));
    }

    #[test]
    fn eigenvalues_agree_with_nalgebra(a in matrix(4)) {
        let na = nalgebra::DMatrix::from_row_slice(4, 4, a.as_slice());
        let mut theirs: Vec<_> = na.complex_eigenvalues().iter().copied().collect();
        let mut ours = eigenvalues(&a).unwrap();
        let key = |z: &cotc_core::Complex64| (z.re * 1e8).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
        ours.sort_by_key(key);
        theirs.sort_by_key(key);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).norm() < 1e-7 * a.norm1().max(1.0), "{ours:?} vs {theirs:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pole_assignment_duality((p, scheme, d, t) in config(), lambda in prop_oneof![-1.5f64..-0.05, 0.05f64..0.95]) {
        let m = build_model(&p, scheme).unwrap();
        let ss = steady_state_at(&m, d, t, p.input()).unwrap();
        let ma = s_exact(&m, &ss, lambda).unwrap();
        let lin = match linearize(&m, &ss, ma) {
            Ok(lin) => lin,
            Err(_) => return Err(TestCaseError::reject("switching slope degenerate")),
        };
        let poles = lin.poles().unwrap();
        let hit = poles.iter().map(|z| (z - lambda).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(hit < 1e-6, "λ = {lambda}, poles {poles:?}");
        // and back: each real nonzero pole reproduces the ramp
        for z in poles.iter().filter(|z| z.im.abs() < 1e-12 && z.re.abs() > 1e-3) {
            let back = s_exact(&m, &ss, z.re).unwrap();
            prop_assert!((back - ma).abs() < 1e-6 * ma.abs().max(1.0), "{back} vs {ma}");
        }
    }

    #[test]
    fn zero_pole_without_ramp((p, scheme, d, t) in config()) {
        let m = build_model(&p, scheme).unwrap();
        let ss = steady_state_at(&m, d, t, p.input()).unwrap();
        let lin = match linearize(&m, &ss, 0.0) {
            Ok(lin) => lin,
            Err(_) => return Err(TestCaseError::reject("switching slope degenerate")),
        };
        let smallest = lin.poles().unwrap().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(smallest < 1e-9, "{smallest}");
    }

    #[test]
    fn series_identities_hold(duty in 0.05f64..0.95) {
        let (a, b) = series_identities_check(duty, 20_000).unwrap();
        prop_assert!(a.abs() < 1e-4 && b.abs() < 1e-4, "{a} {b}");
    }
}

/// One-cycle deviation from the fixed point minus `Φ·δ`, for a perturbation
/// of size `eps` along `dir`.
fn linearization_residual(eps: f64, dir: &[f64]) -> f64 {
    let p = fixtures::example1();
    let m = build_model(&p, Scheme::VCotc).unwrap();
    let (d, t, ma) = (EXAMPLE1_ON_TIME, EXAMPLE1_PERIOD, 9500.0);
    let (vc, ss) = consistent_control(&m, d, t, p.vs, ma).unwrap();
    let lin = linearize(&m, &ss, ma).unwrap();
    let delta: Vec<f64> = dir.iter().map(|v| v * eps).collect();
    let x: Vec<f64> = ss.x0_0.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let next = step_cycle(&m, RampSpec::new(ma, d).unwrap(), &x, [p.vs, vc], t).unwrap().state;
    let predicted = lin.phi.mul_vec(&delta);
    next.iter()
        .zip(&ss.x0_0)
        .zip(&predicted)
        .map(|((a, b), c)| ((a - b) - c).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn linearization_is_second_order_accurate() {
    let x0 = {
        let p = fixtures::example1();
        let m = build_model(&p, Scheme::VCotc).unwrap();
        consistent_control(&m, EXAMPLE1_ON_TIME, EXAMPLE1_PERIOD, p.vs, 9500.0).unwrap().1.x0_0
    };
    let scale = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    for dir in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
        let r1 = linearization_residual(1e-5 * scale, &dir);
        let r2 = linearization_residual(0.5e-5 * scale, &dir);
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.5, "{dir:?}: {r1} / {r2} = {ratio}");
    }
}
