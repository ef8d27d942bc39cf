//! Periodic steady state, the linearized cycle-to-cycle map, and z-domain
//! transfer functions.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{ConverterModel, Input, RampSpec};
use crate::numeric::{
    dot, eigenvalues, expm_integral, expm_with_forcing, find_root, outer, solve_complex,
    solve_linear, Matrix, NumericError,
};

/// The `T`-periodic orbit sampled at the start of a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// `x⁰(0)`, the state at the start of the on stage.
    pub x0_0: Vec<f64>,
    /// `x⁰(d)`, the state when the switch turns off.
    pub x0_d: Vec<f64>,
    /// `ẋ⁰(0⁻) = A2 x⁰(0) + B2 u`.
    pub xdot0_minus: Vec<f64>,
    pub period: f64,
    pub on_time: f64,
    pub u: Input,
    /// `e^{A1 d}`.
    pub on_transition: Matrix,
    /// `e^{A2 (T − d)}`.
    pub off_transition: Matrix,
}

impl SteadyState {
    pub fn duty(&self) -> f64 {
        self.on_time / self.period
    }

    /// Feedback signal at the end of the cycle, `y⁰(T) = C x⁰(0) + D u`.
    pub fn feedback_at_period(&self, m: &ConverterModel) -> f64 {
        m.feedback(&self.x0_0, self.u)
    }

    /// State on the periodic orbit at `t ∈ [0, T]`.
    pub fn state_at(&self, m: &ConverterModel, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.period).contains(&t) {
            return Err(invalid("t", format!("{t} lies outside [0, {}]", self.period)));
        }
        if t <= self.on_time {
            let (e, w) = expm_with_forcing(&m.a1, &m.b1u(self.u), t)?;
            Ok(add(&e.mul_vec(&self.x0_0), &w))
        } else {
            let (e, w) = expm_with_forcing(&m.a2, &m.b2u(self.u), t - self.on_time)?;
            Ok(add(&e.mul_vec(&self.x0_d), &w))
        }
    }

    pub fn output_at(&self, m: &ConverterModel, t: f64) -> Result<f64> {
        Ok(dot(&m.output_row(), &self.state_at(m, t)?))
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn check_timing(d: f64, period: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid("d", format!("on-time must be positive, got {d}")));
    }
    if !(period > d && period.is_finite()) {
        return Err(invalid("T", format!("period {period} must exceed the on-time {d}")));
    }
    Ok(())
}

/// Fixed point of the cycle map for a prescribed on-time `d` and period `T`.
pub fn steady_state_at(m: &ConverterModel, d: f64, period: f64, u: Input) -> Result<SteadyState> {
    check_timing(d, period)?;
    let n = m.dim();
    let (e1, w1) = expm_with_forcing(&m.a1, &m.b1u(u), d)?;
    let (e2, w2) = expm_with_forcing(&m.a2, &m.b2u(u), period - d)?;
    let mono = &e2 * &e1;
    let lhs = &Matrix::identity(n) - &mono;
    let rhs = add(&e2.mul_vec(&w1), &w2);
    let x0_0 = solve_linear(&lhs, &rhs).map_err(|e| match e {
        NumericError::Singular { condition } => Error::SingularSteadyState { condition },
        other => other.into(),
    })?;
    let x0_d = add(&e1.mul_vec(&x0_0), &w1);
    let xdot0_minus = add(&m.a2.mul_vec(&x0_0), &m.b2u(u));
    Ok(SteadyState {
        x0_0,
        x0_d,
        xdot0_minus,
        period,
        on_time: d,
        u,
        on_transition: e1,
        off_transition: e2,
    })
}

/// Control voltage `vc` for which `T` is a switching period with ramp `ma`,
/// together with the resulting steady state.
///
/// The steady state is affine in `vc`, so two evaluations fix it exactly.
pub fn consistent_control(
    m: &ConverterModel,
    d: f64,
    period: f64,
    vs: f64,
    ma: f64,
) -> Result<(f64, SteadyState)> {
    let residual = |vc: f64| -> Result<(f64, SteadyState)> {
        let ss = steady_state_at(m, d, period, [vs, vc])?;
        Ok((ss.feedback_at_period(m) - ma * period, ss))
    };
    let (r0, _) = residual(0.0)?;
    let (r1, _) = residual(1.0)?;
    let slope = r1 - r0;
    if slope == 0.0 || !slope.is_finite() {
        return Err(invalid("vc", "feedback does not depend on the control voltage"));
    }
    let vc = -r0 / slope;
    let (_, ss) = residual(vc)?;
    Ok((vc, ss))
}

/// A root of the steady-state switching condition `y⁰(T) − ma·T = 0`.
#[derive(Debug, Clone)]
pub struct PeriodRoot {
    pub period: f64,
    pub steady_state: SteadyState,
    /// 1 for a transversal crossing, 2 for a tangency (saddle-node).
    pub multiplicity: u32,
}

const PERIOD_GRID: usize = 2000;

/// Every period in `[t_lo, t_hi]` at which a periodic orbit with the given
/// on-time and ramp exists. More than one root signals a nearby saddle-node.
pub fn solve_period(
    m: &ConverterModel,
    ramp: &RampSpec,
    u: Input,
    t_lo: f64,
    t_hi: f64,
) -> Result<Vec<PeriodRoot>> {
    let d = ramp.on_time;
    if !(t_lo > d && t_hi > t_lo && t_hi.is_finite()) {
        return Err(invalid(
            "T range",
            format!("need d < T_lo < T_hi, got d = {d}, [{t_lo}, {t_hi}]"),
        ));
    }
    let f = |t: f64| -> Result<f64> {
        let ss = steady_state_at(m, d, t, u)?;
        Ok(ss.feedback_at_period(m) - ramp.ma * t)
    };
    let step = (t_hi - t_lo) / PERIOD_GRID as f64;
    let grid: Vec<f64> = (0..=PERIOD_GRID).map(|i| t_lo + step * i as f64).collect();
    let values = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * (t_hi - t_lo);

    let mut roots: Vec<(f64, u32)> = Vec::new();
    for i in 0..PERIOD_GRID {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            roots.push((grid[i], 1));
        } else if a.signum() != b.signum() && b != 0.0 {
            let r = find_root(|t| f(t).unwrap_or(f64::NAN), grid[i], grid[i + 1], tol)?;
            roots.push((r, 1));
        }
        // a local extremum of |f| that touches zero without a sign change
        if i > 0 && a != 0.0 {
            let prev = values[i - 1];
            let extremum = (a > 0.0 && a <= prev && a <= b) || (a < 0.0 && a >= prev && a >= b);
            if extremum && prev.signum() == a.signum() && b.signum() == a.signum() {
                let (t_min, v_min) = golden_min_abs(&f, grid[i - 1], grid[i + 1])?;
                if v_min.abs() <= 1e-9 * scale {
                    roots.push((t_min, 2));
                }
            }
        }
    }
    if values[PERIOD_GRID] == 0.0 {
        roots.push((t_hi, 1));
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));

    // crossings closer than a few grid steps belong to one tangency
    let merge = 2.0 * step;
    let mut merged: Vec<(f64, u32)> = Vec::new();
    for (t, k) in roots {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() <= merge => {
                last.0 = 0.5 * (last.0 + t);
                last.1 = (last.1 + k).min(2);
            }
            _ => merged.push((t, k)),
        }
    }
    merged
        .into_iter()
        .map(|(t, k)| {
            Ok(PeriodRoot {
                period: t,
                steady_state: steady_state_at(m, d, t, u)?,
                multiplicity: k,
            })
        })
        .collect()
}

fn golden_min_abs<F>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let mut fc = f(c)?.abs();
    let mut fe = f(e)?.abs();
    for _ in 0..80 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c)?.abs();
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e)?.abs();
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)?))
}

/// Small-signal sampled-data dynamics `x̂ₙ₊₁ = Φ x̂ₙ + Γ1 v̂s + Γ2 v̂c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedMap {
    pub phi: Matrix,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    /// Output row `E = (E1 + E2)/2`.
    pub evec: Vec<f64>,
    pub period: f64,
}

impl LinearizedMap {
    /// Sampled-data poles: the eigenvalues of `Φ`.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        Ok(eigenvalues(&self.phi)?)
    }

    /// Poles sorted by real part, then imaginary part.
    pub fn sorted_poles(&self) -> Result<Vec<Complex64>> {
        let mut p = self.poles()?;
        p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(p)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.poles()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.spectral_radius()? < 1.0)
    }
}

/// Linearizes the cycle map about `ss` for ramp slope `ma`.
pub fn linearize(m: &ConverterModel, ss: &SteadyState, ma: f64) -> Result<LinearizedMap> {
    let n = m.dim();
    let xdot = &ss.xdot0_minus;
    let slope = dot(&m.c, xdot);
    let denom = slope - ma;
    if denom.abs() <= 1e-12 * (slope.abs() + ma.abs()) || denom == 0.0 {
        return Err(Error::DegenerateSwitching { ma, slope });
    }
    let projector = &Matrix::identity(n) - &outer(xdot, &m.c).scale(1.0 / denom);
    let phi = &projector * &(&ss.off_transition * &ss.on_transition);

    let w1 = expm_integral(&m.a1, &m.b1, ss.on_time)?;
    let w2 = expm_integral(&m.a2, &m.b2, ss.period - ss.on_time)?;
    let forced = &(&ss.off_transition * &w1) + &w2;
    let mut gamma = &projector * &forced;
    for i in 0..n {
        for j in 0..2 {
            gamma[(i, j)] -= xdot[i] * m.d[j] / denom;
        }
    }
    Ok(LinearizedMap {
        phi,
        gamma1: gamma.col(0),
        gamma2: gamma.col(1),
        evec: m.output_row(),
        period: ss.period,
    })
}

/// Distance below which `z` counts as sitting on a pole.
pub const POLE_TOLERANCE: f64 = 1e-12;

fn resolvent_output(lin: &LinearizedMap, gamma: &[f64], z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(invalid("z", "must be finite"));
    }
    let on_pole = Error::PoleEvaluation { re: z.re, im: z.im };
    if lin.poles()?.iter().any(|p| (p - z).norm() <= POLE_TOLERANCE) {
        return Err(on_pole);
    }
    let n = lin.phi.rows();
    let re = &Matrix::identity(n).scale(z.re) - &lin.phi;
    let im = Matrix::identity(n).scale(z.im);
    let rhs: Vec<Complex64> = gamma.iter().map(|g| Complex64::new(*g, 0.0)).collect();
    let x = solve_complex(&re, &im, &rhs).map_err(|e| match e {
        NumericError::Singular { .. } => on_pole,
        other => other.into(),
    })?;
    Ok(lin
        .evec
        .iter()
        .zip(&x)
        .map(|(e, xi)| xi * *e)
        .sum())
}

/// Control-to-output transfer function `E (zI − Φ)⁻¹ Γ2`.
pub fn control_to_output(lin: &LinearizedMap, z: Complex64) -> Result<Complex64> {
    resolvent_output(lin, &lin.gamma2, z)
}

/// Audio susceptibility `E (zI − Φ)⁻¹ Γ1`.
pub fn audio_susceptibility(lin: &LinearizedMap, z: Complex64) -> Result<Complex64> {
    resolvent_output(lin, &lin.gamma1, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransferKind {
    ControlToOutput,
    AudioSusceptibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub hz: f64,
    pub value: Complex64,
}

/// Logarithmic frequency response `H(e^{jωT})` between `f_lo` and `f_hi`,
/// capped at half the switching frequency.
pub fn frequency_response(
    lin: &LinearizedMap,
    kind: TransferKind,
    f_lo: f64,
    f_hi: f64,
    points_per_decade: usize,
) -> Result<Vec<FrequencyPoint>> {
    let nyquist = 0.5 / lin.period;
    let f_hi = f_hi.min(nyquist);
    if !(f_lo > 0.0 && f_hi > f_lo) || points_per_decade == 0 {
        return Err(invalid("frequency range", format!("invalid range [{f_lo}, {f_hi}] Hz")));
    }
    let decades = (f_hi / f_lo).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| {
            let hz = f_lo * 10f64.powf(decades * i as f64 / n as f64);
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * hz * lin.period);
            let value = match kind {
                TransferKind::ControlToOutput => control_to_output(lin, z)?,
                TransferKind::AudioSusceptibility => audio_susceptibility(lin, z)?,
            };
            Ok(FrequencyPoint { hz, value })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{build_model, Scheme};

    fn example1() -> (ConverterModel, SteadyState) {
        let p = fixtures::example1();
        let m = build_model(&p, Scheme::VCotc).unwrap();
        let ss = steady_state_at(&m, 1.2e-6, 3e-6, p.input()).unwrap();
        (m, ss)
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let (m, ss) = example1();
        let back = ss.state_at(&m, ss.period).unwrap();
        let err = back
            .iter()
            .zip(&ss.x0_0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-9 * crate::numeric::norm2(&ss.x0_0), "residual {err}");
    }

    #[test]
    fn averaged_state_approximation() {
        let (_, ss) = example1();
        let (vs, d, t, r, l) = (5.0, 0.4, 3e-6, 0.5, 2e-6);
        let il = vs * d / r - vs * d * (1.0 - d) * t / (2.0 * l);
        assert!((ss.x0_0[0] - il).abs() / il < 0.05, "{:?}", ss.x0_0);
        assert!((ss.x0_0[1] - vs * d).abs() / (vs * d) < 0.05);
    }

    #[test]
    fn zero_dynamics_are_singular() {
        let z = Matrix::zeros(2, 2);
        let mut b1 = Matrix::zeros(2, 2);
        b1[(0, 0)] = 1.0;
        let m = ConverterModel::new(
            z.clone(),
            z.clone(),
            b1,
            z,
            vec![1.0, 0.0],
            [0.0, -1.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        )
        .unwrap();
        let r = steady_state_at(&m, 1.0, 2.0, [1.0, 0.0]);
        assert!(matches!(r, Err(Error::SingularSteadyState { .. })));
        // regularization makes it solvable
        assert!(steady_state_at(&m.regularized(1e-3), 1.0, 2.0, [1.0, 0.0]).is_ok());
    }

    #[test]
    fn poles_without_ramp() {
        let (m, ss) = example1();
        let lin = linearize(&m, &ss, 0.0).unwrap();
        let poles = lin.sorted_poles().unwrap();
        assert!(poles[1].norm() < 1e-9);
        assert!((poles[0].re + 1.0512).abs() < 1e-3, "{poles:?}");
        assert!(!lin.is_stable().unwrap());
    }

    #[test]
    fn pole_assignment_with_ramp() {
        let (m, ss) = example1();
        let poles = linearize(&m, &ss, 9500.0).unwrap().sorted_poles().unwrap();
        assert!((poles[0].re + 0.4989).abs() < 1e-3, "{poles:?}");
        assert!((poles[1].re + 0.1987).abs() < 1e-3);
    }

    #[test]
    fn degenerate_switching_rejected() {
        let (m, ss) = example1();
        let slope = dot(&m.c, &ss.xdot0_minus);
        assert!(matches!(
            linearize(&m, &ss, slope),
            Err(Error::DegenerateSwitching { .. })
        ));
    }

    #[test]
    fn gamma2_matches_simplified_form() {
        let (m, ss) = example1();
        let ma = 2500.0;
        let lin = linearize(&m, &ss, ma).unwrap();
        let denom = dot(&m.c, &ss.xdot0_minus) - ma;
        for (g, x) in lin.gamma2.iter().zip(&ss.xdot0_minus) {
            assert!((g - x / denom).abs() <= 1e-12 * (x / denom).abs());
        }
    }

    #[test]
    fn consistent_control_places_root() {
        let (m, _) = example1();
        let ma = 3000.0;
        let (vc, ss) = consistent_control(&m, 1.2e-6, 3e-6, 5.0, ma).unwrap();
        assert!((ss.feedback_at_period(&m) - ma * 3e-6).abs() < 1e-12);
        let ramp = RampSpec::new(ma, 1.2e-6).unwrap();
        let roots = solve_period(&m, &ramp, [5.0, vc], 1.5e-6, 6e-6).unwrap();
        assert!(roots.iter().any(|r| (r.period - 3e-6).abs() < 1e-15 * 1e3));
    }

    #[test]
    fn steep_ramp_has_a_single_root() {
        let (m, _) = example1();
        let ma = 1e7;
        let (vc, _) = consistent_control(&m, 1.2e-6, 3e-6, 5.0, ma).unwrap();
        let ramp = RampSpec::new(ma, 1.2e-6).unwrap();
        let roots = solve_period(&m, &ramp, [5.0, vc], 1.3e-6, 20e-6).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 1);
    }

    #[test]
    fn transfer_functions() {
        let p = fixtures::example8();
        let m = build_model(&p, Scheme::CCotc).unwrap();
        let ss = steady_state_at(&m, 0.26e-6, 1.04e-6, p.input()).unwrap();
        let lin = linearize(&m, &ss, 0.0).unwrap();
        let dc = control_to_output(&lin, Complex64::new(1.0, 0.0)).unwrap();
        assert!(dc.re.is_finite() && dc.im.abs() < 1e-9 * dc.re.abs());
        // cross-check against a direct (I − Φ) solve
        let direct = solve_linear(&(&Matrix::identity(2) - &lin.phi), &lin.gamma2).unwrap();
        assert!((dot(&lin.evec, &direct) - dc.re).abs() < 1e-9 * dc.re.abs());
        let far = control_to_output(&lin, Complex64::new(1e6, 0.0)).unwrap();
        assert!(far.norm() < 1e-5 * dc.norm());
        assert!(audio_susceptibility(&lin, Complex64::new(1.0, 0.0)).unwrap().re.is_finite());
        let pole = lin.sorted_poles().unwrap()[1];
        assert!(matches!(
            control_to_output(&lin, pole),
            Err(Error::PoleEvaluation { .. })
        ));
        let resp = frequency_response(&lin, TransferKind::ControlToOutput, 10.0, 1e9, 20).unwrap();
        assert!(resp.last().unwrap().hz <= 0.5 / 1.04e-6 * (1.0 + 1e-12));
    }
}
