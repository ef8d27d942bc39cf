use serde::Serialize;

use super::splot::s_exact;
use super::{check_on_time, require_positive, FormulaId, SlopeCoefficients};
use crate::error::{Error, Result};
use crate::model::{BuckParams, ConverterModel, Scheme};
use crate::numeric::{dot, expm, expm_with_forcing, find_root, solve_linear, Matrix};
use crate::sampled::SteadyState;

/// `S(−1)` for any model, through the exact resolvent at the steady state.
pub fn pdb_boundary_general(m: &ConverterModel, ss: &SteadyState) -> Result<f64> {
    s_exact(m, ss, -1.0)
}

/// Exact buck PDB ramp slope
/// `C (I − e^{2AT})⁻¹ (e^{AT} − e^{AT(1−D)}) B11 vs`.
///
/// The converter is stable against PDB when `ma` exceeds this value.
/// Defined for `0 < d ≤ T`.
pub fn pdb_boundary_exact(m: &ConverterModel, vs: f64, d: f64, period: f64) -> Result<f64> {
    m.require_buck_structure("pdb_boundary_exact")?;
    check_on_time(d, period)?;
    let n = m.dim();
    let e = expm(&m.a1, period)?;
    let lhs = &Matrix::identity(n) - &(&e * &e);
    let rhs = on_increment(m, d, period)?;
    let x = solve_linear(&lhs, &rhs)?;
    Ok(dot(&m.c, &x) * vs)
}

/// `(e^{AT} − e^{A(T−d)}) B11`, formed as `e^{A(T−d)} ∫₀ᵈ e^{Aσ} A B11 dσ`
/// so that it stays accurate as `d → 0`.
pub(super) fn on_increment(m: &ConverterModel, d: f64, period: f64) -> Result<Vec<f64>> {
    let ab = m.a1.mul_vec(&m.b11());
    let (_, inc) = expm_with_forcing(&m.a1, &ab, d)?;
    Ok(expm(&m.a1, period - d)?.mul_vec(&inc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TaylorOrder {
    /// Terms through `T²`.
    Full,
    /// First order in `T`; the classic ramp rule.
    Linear,
}

impl TaylorOrder {
    pub fn formula(self) -> FormulaId {
        match self {
            TaylorOrder::Full => FormulaId::PdbTaylor,
            TaylorOrder::Linear => FormulaId::PdbLinear,
        }
    }
}

/// Taylor approximations of [`pdb_boundary_exact`], valid when `T` is small
/// against `RC` and `√(LC)`.
pub fn pdb_boundary_approx(
    m: &ConverterModel,
    vs: f64,
    d: f64,
    period: f64,
    order: TaylorOrder,
) -> Result<f64> {
    m.require_buck_structure("pdb_boundary_approx")?;
    check_on_time(d, period)?;
    let k = SlopeCoefficients::of(m);
    let duty = d / period;
    let value = match order {
        TaylorOrder::Full => {
            -0.5 * duty * k.cb
                + 0.25 * duty * duty * k.cab * period
                + (duty - duty.powi(3)) / 12.0 * k.ca2b * period * period
        }
        TaylorOrder::Linear => 0.5 * duty * (0.5 * d * k.cab - k.cb),
    };
    Ok(value * vs)
}

/// PDB ramp slopes written directly in circuit parameters.
///
/// * [`FormulaId::PdbVoltageMode`]: V-COTC, linear order.
/// * [`FormulaId::PdbVoltageModeSimplified`]: V-COTC with `ρ = 1`, `Rc²C ≪ L`.
/// * [`FormulaId::PdbCurrentMode`]: C-COTC; negative for every duty, so the
///   converter never period-doubles without a negative ramp.
pub fn pdb_boundary_closed_form(
    p: &BuckParams,
    scheme: Scheme,
    d: f64,
    period: f64,
    formula: FormulaId,
) -> Result<f64> {
    p.validate()?;
    check_on_time(d, period)?;
    let duty = d / period;
    let rho = p.rho();
    let (l, c, rc) = (p.l, p.c, p.rc);
    match (formula, scheme) {
        (FormulaId::PdbVoltageMode, Scheme::VCotc) => Ok(duty * p.vs * rho * rho / (2.0 * l * c)
            * (0.5 * d * (1.0 - rc * rc * c / l) - rc * c / rho)),
        (FormulaId::PdbVoltageModeSimplified, Scheme::VCotc) => {
            Ok(duty * p.vs / (2.0 * l * c) * (0.5 * d - rc * c))
        }
        (FormulaId::PdbCurrentMode, Scheme::CCotc) => {
            Ok(-duty * p.vs * p.ri / (2.0 * l) * (d * rho * rc / (2.0 * l) + 1.0))
        }
        _ => Err(Error::Usage(format!(
            "formula {formula} is not a PDB closed form for {scheme}"
        ))),
    }
}

/// The duty cycle at which the PDB boundary crosses the ramp slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetPoint {
    pub duty: f64,
    pub period: f64,
    pub vs: f64,
}

const DUTY_GRID: usize = 400;

/// Operating point of the constant-output family: fixed `d` and `vo`, so
/// `T = d/D` and `vs = vo/D`.
fn duty_family(d: f64, vo: f64, duty: f64) -> (f64, f64) {
    (vo / duty, d / duty)
}

fn check_duty_range(d_lo: f64, d_hi: f64) -> Result<()> {
    if !(d_lo > 0.0 && d_hi <= 1.0 && d_hi > d_lo) {
        return Err(crate::error::invalid(
            "D range",
            format!("need 0 < lo < hi ≤ 1, got [{d_lo}, {d_hi}]"),
        ));
    }
    Ok(())
}

/// PDB onset along the constant-output family: the first duty in
/// `[d_lo, d_hi]`, scanning upward, where the boundary rises through `ma`.
/// Returns `None` when that never happens.
///
/// At very small duty the long period lets the filter resonance fold the
/// boundary back and forth, so the range should start above that regime.
pub fn pdb_onset_duty(
    m: &ConverterModel,
    ma: f64,
    d: f64,
    vo: f64,
    d_lo: f64,
    d_hi: f64,
) -> Result<Option<OnsetPoint>> {
    require_positive("d", d)?;
    require_positive("vo", vo)?;
    check_duty_range(d_lo, d_hi)?;
    let f = |duty: f64| -> Result<f64> {
        let (vs, period) = duty_family(d, vo, duty);
        Ok(pdb_boundary_exact(m, vs, d, period)? - ma)
    };
    let step = (d_hi - d_lo) / DUTY_GRID as f64;
    let mut prev_d = d_lo;
    let mut prev_f = f(prev_d)?;
    for i in 1..=DUTY_GRID {
        let duty = if i == DUTY_GRID { d_hi } else { d_lo + step * i as f64 };
        let value = f(duty)?;
        if prev_f <= 0.0 && value > 0.0 {
            let root = if prev_f == 0.0 {
                prev_d
            } else {
                find_root(|x| f(x).unwrap_or(f64::NAN), prev_d, duty, 1e-14)?
            };
            let (vs, period) = duty_family(d, vo, root);
            return Ok(Some(OnsetPoint {
                duty: root,
                period,
                vs,
            }));
        }
        prev_d = duty;
        prev_f = value;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DutyExtremum {
    pub duty: f64,
    pub value: f64,
}

/// Largest PDB ramp slope over `D ∈ [d_lo, d_hi]` along the constant-output
/// family: the smallest ramp that keeps the whole range stable.
///
/// A 400-point grid locates the maximum; golden-section search refines it to
/// `1e-6` relative in `D`.
pub fn max_ramp_over_duty(
    m: &ConverterModel,
    d: f64,
    vo: f64,
    d_lo: f64,
    d_hi: f64,
) -> Result<DutyExtremum> {
    check_duty_range(d_lo, d_hi)?;
    let f = |duty: f64| -> Result<f64> {
        let (vs, period) = duty_family(d, vo, duty);
        pdb_boundary_exact(m, vs, d, period)
    };
    let step = (d_hi - d_lo) / DUTY_GRID as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=DUTY_GRID {
        let v = f(d_lo + step * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut a = d_lo + step * best.0.saturating_sub(1) as f64;
    let mut b = (d_lo + step * (best.0 + 1) as f64).min(d_hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fe = f(e)?;
    while b - a > 1e-6 * b {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e)?;
        }
    }
    // the maximum may sit on an end point of the range
    let mut out = DutyExtremum {
        duty: 0.5 * (a + b),
        value: f(0.5 * (a + b))?,
    };
    for edge in [d_lo, d_hi] {
        let v = f(edge)?;
        if v > out.value {
            out = DutyExtremum { duty: edge, value: v };
        }
    }
    Ok(out)
}
