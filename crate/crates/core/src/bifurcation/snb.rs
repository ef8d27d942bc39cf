use super::splot::s_exact;
use super::{check_on_time, FormulaId, SlopeCoefficients};
use crate::error::{Error, Result};
use crate::model::{BuckParams, ConverterModel, Scheme};
use crate::numeric::{dot, expm, solve_linear, Lu, Matrix};
use crate::sampled::SteadyState;

/// `S(1)` for any model through the exact resolvent.
pub fn snb_boundary_general(m: &ConverterModel, ss: &SteadyState) -> Result<f64> {
    s_exact(m, ss, 1.0)
}

/// Exact buck SNB ramp slope
/// `C (I − e^{AT})⁻² (e^{AT} − e^{AT(1−D)}) B11 vs`.
///
/// Saddle-node bifurcation needs `ma` below this value.
pub fn snb_boundary_exact(m: &ConverterModel, vs: f64, d: f64, period: f64) -> Result<f64> {
    m.require_buck_structure("snb_boundary_exact")?;
    check_on_time(d, period)?;
    let n = m.dim();
    let e = expm(&m.a1, period)?;
    let lhs = &Matrix::identity(n) - &e;
    let rhs = super::pdb::on_increment(m, d, period)?;
    let once = solve_linear(&lhs, &rhs)?;
    let twice = solve_linear(&lhs, &once)?;
    Ok(dot(&m.c, &twice) * vs)
}

/// Taylor approximation of [`snb_boundary_exact`]; needs invertible `A1`
/// (regularize an integrator first).
pub fn snb_boundary_approx(m: &ConverterModel, vs: f64, d: f64, period: f64) -> Result<f64> {
    m.require_buck_structure("snb_boundary_approx")?;
    check_on_time(d, period)?;
    let k = SlopeCoefficients::of(m);
    let duty = d / period;
    let ainv_b = Lu::factor(&m.a1)?.solve(&m.b11());
    let c_ainv_b = dot(&m.c, &ainv_b);
    let value = duty / period * c_ainv_b - 0.5 * duty * duty * k.cb
        + (2.0 * duty.powi(3) - duty) / 12.0 * k.cab * period;
    Ok(value * vs)
}

/// SNB ramp threshold in circuit parameters: V-COTC uses
/// [`FormulaId::SnbVoltageMode`], C-COTC [`FormulaId::SnbCurrentMode`].
/// SNB needs `ma` below the returned value.
pub fn snb_scheme_threshold(p: &BuckParams, scheme: Scheme, d: f64, period: f64) -> Result<(f64, FormulaId)> {
    p.validate()?;
    check_on_time(d, period)?;
    let duty = d / period;
    let rho = p.rho();
    let (r, l, c, rc) = (p.r, p.l, p.c, p.rc);
    let cubic = (2.0 * duty.powi(3) - duty) / 12.0;
    match scheme {
        Scheme::VCotc => {
            let v = -duty / period - duty * duty * rho * rc / (2.0 * l)
                + cubic * period * rho * rho / (l * c) * (1.0 - rc * rc * c / l);
            Ok((v * p.vs, FormulaId::SnbVoltageMode))
        }
        Scheme::CCotc => {
            let v = -duty / (period * r) - duty * duty / (2.0 * l) - cubic * rho * rc * period / (l * l);
            Ok((v * p.vs * p.ri, FormulaId::SnbCurrentMode))
        }
        Scheme::VCotcCurrentRamp => Err(Error::Usage(
            "no circuit-parameter SNB threshold for V_COTC_CURRENT_RAMP; use snb-taylor".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::build_model;
    use crate::sampled::{linearize, steady_state_at};

    #[test]
    fn current_mode_threshold() {
        let p = fixtures::example8();
        let (v, f) = snb_scheme_threshold(&p, Scheme::CCotc, 0.26e-6, 1.04e-6).unwrap();
        assert_eq!(f, FormulaId::SnbCurrentMode);
        assert!((v + 67445.0).abs() < 0.01 * 67445.0, "{v}");
    }

    #[test]
    fn buck_form_matches_general_resolvent() {
        let p = fixtures::example8();
        let m = build_model(&p, Scheme::CCotc).unwrap();
        let ss = steady_state_at(&m, 0.26e-6, 1.04e-6, p.input()).unwrap();
        let a = snb_boundary_exact(&m, p.vs, 0.26e-6, 1.04e-6).unwrap();
        let b = snb_boundary_general(&m, &ss).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs(), "{a} vs {b}");
        let approx = snb_boundary_approx(&m, p.vs, 0.26e-6, 1.04e-6).unwrap();
        assert!((approx - a).abs() < 1e-3 * a.abs());
    }

    #[test]
    fn pole_at_one_on_the_boundary() {
        let p = fixtures::example8();
        let m = build_model(&p, Scheme::CCotc).unwrap();
        let ss = steady_state_at(&m, 0.26e-6, 1.04e-6, p.input()).unwrap();
        let ma = snb_boundary_exact(&m, p.vs, 0.26e-6, 1.04e-6).unwrap();
        let poles = linearize(&m, &ss, ma).unwrap().sorted_poles().unwrap();
        assert!((poles[1].re - 1.0).abs() < 1e-8, "{poles:?}");
    }

    #[test]
    fn voltage_mode_never_snb_with_positive_ramp() {
        let p = fixtures::example1();
        let m = build_model(&p, Scheme::VCotc).unwrap();
        assert!(snb_boundary_exact(&m, 5.0, 1.2e-6, 3e-6).unwrap() < 0.0);
        let (v, _) = snb_scheme_threshold(&p, Scheme::VCotc, 1.2e-6, 3e-6).unwrap();
        assert!(v < 0.0);
        let (tiny, _) = snb_scheme_threshold(&p, Scheme::VCotc, 1e-15, 3e-6).unwrap();
        assert!(tiny <= 0.0 && tiny.abs() < 1e-2);
    }
}
