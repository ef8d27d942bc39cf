use crate::error::{Error, Result};
use crate::model::ConverterModel;
use crate::numeric::{dot, solve_linear, Matrix, NumericError};
use crate::sampled::SteadyState;
use crate::sweep::{sweep, Execution, Range, SweepPoint};

/// Exact S plot: the ramp slope that places a real pole at `λ`,
/// `C (I − λ⁻¹ e^{A1 d} e^{A2(T−d)})⁻¹ ẋ⁰(0⁻)`. Zero at `λ = 0`.
pub fn s_exact(m: &ConverterModel, ss: &SteadyState, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    if !lambda.is_finite() {
        return Err(crate::error::invalid("lambda", "must be finite"));
    }
    let n = m.dim();
    let mono = &ss.on_transition * &ss.off_transition;
    let lhs = &Matrix::identity(n) - &mono.scale(1.0 / lambda);
    let x = solve_linear(&lhs, &ss.xdot0_minus).map_err(|e| match e {
        NumericError::Singular { .. } => Error::ResolventPole(lambda),
        other => other.into(),
    })?;
    Ok(dot(&m.c, &x))
}

/// S plot with `e^{At} ≈ I + At`:
/// `(λ/(λ−1)) C (I + (A1 d + A2(T−d))/(λ−1)) ẋ⁰(0⁻)`. Has a pole at `λ = 1`.
pub fn s_approx(m: &ConverterModel, ss: &SteadyState, lambda: f64) -> Result<f64> {
    if lambda == 1.0 {
        return Err(Error::ResolventPole(1.0));
    }
    let xdot = &ss.xdot0_minus;
    let d = ss.on_time;
    let off = ss.period - d;
    let a = &m.a1.scale(d) + &m.a2.scale(off);
    let ax = a.mul_vec(xdot);
    let k = lambda - 1.0;
    let v: Vec<f64> = xdot.iter().zip(&ax).map(|(x, y)| x + y / k).collect();
    Ok(lambda / k * dot(&m.c, &v))
}

/// Pole locus: the S plot over `λ` at a fixed operating point. Resolvent
/// poles appear as `NaN`.
pub fn pole_locus(
    m: &ConverterModel,
    ss: &SteadyState,
    lambdas: Range,
    exact: bool,
    exec: Execution,
) -> Vec<SweepPoint> {
    sweep(lambdas, exec, |l| {
        if exact {
            s_exact(m, ss, l)
        } else {
            s_approx(m, ss, l)
        }
    })
}
