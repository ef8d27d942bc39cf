use serde::Serialize;

use super::{require_positive, FormulaId, SlopeCoefficients};
use crate::error::{invalid, Error, Result};
use crate::model::{build_model, BuckParams, Scheme};
use crate::numeric::{determinant, dot, find_root, Matrix};
use crate::sampled::{linearize, steady_state_at};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundDirection {
    /// Stable while the quantity stays below the value.
    Upper,
    /// Stable while the quantity stays above the value.
    Lower,
}

/// A design limit on a single quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub direction: BoundDirection,
    pub formula: FormulaId,
}

impl Bound {
    fn upper(value: f64, formula: FormulaId) -> Self {
        Self {
            value,
            direction: BoundDirection::Upper,
            formula,
        }
    }

    fn lower(value: f64, formula: FormulaId) -> Self {
        Self {
            value,
            direction: BoundDirection::Lower,
            formula,
        }
    }

    pub fn admits(&self, x: f64) -> bool {
        match self.direction {
            BoundDirection::Upper => x < self.value,
            BoundDirection::Lower => x > self.value,
        }
    }
}

fn mismatch(formula: FormulaId, scheme: Scheme) -> Error {
    Error::Usage(format!("formula {formula} does not apply to {scheme}"))
}

/// Closed-form limit on the constant on-time `d` that avoids PDB.
///
/// `duty` enters the ramp term `2ma/(D·vs)`; `period` is only read by
/// [`FormulaId::OnTimePole`]. The no-ramp formulas ignore `ma`.
pub fn max_on_time(
    p: &BuckParams,
    scheme: Scheme,
    ma: f64,
    duty: f64,
    period: f64,
    formula: FormulaId,
) -> Result<Bound> {
    p.validate()?;
    if !(duty > 0.0 && duty <= 1.0) {
        return Err(invalid("D", format!("duty must lie in (0, 1], got {duty}")));
    }
    let rho = p.rho();
    let (r, l, c, rc, ri) = (p.r, p.l, p.c, p.rc, p.ri);
    let ramp = 2.0 * ma / (duty * p.vs);
    let voltage = matches!(scheme, Scheme::VCotc);
    let current_ramp = matches!(scheme, Scheme::VCotcCurrentRamp);
    let half = match formula {
        FormulaId::OnTimeSlopeRatio => {
            let k = SlopeCoefficients::of(&build_model(p, scheme)?);
            if k.cab == 0.0 {
                return Err(Error::Usage("C·A1·B11 = 0: no on-time limit".into()));
            }
            let v = 2.0 * (k.cb + ramp) / k.cab;
            return Ok(if k.cab > 0.0 {
                Bound::upper(v, formula)
            } else {
                Bound::lower(v, formula)
            });
        }
        FormulaId::OnTimeVoltageMode if voltage => {
            (rho * rc / l + ramp) / (rho * rho / (l * c) * (1.0 - rc * rc * c / l))
        }
        FormulaId::OnTimeVoltageModeSimplified if voltage => rc * c + ramp * l * c,
        FormulaId::OnTimeNoRamp if voltage => rc * c / (rho * (1.0 - rc * rc * c / l)),
        FormulaId::OnTimeEsrRule if voltage => rc * c,
        FormulaId::OnTimePole if voltage => {
            require_positive("T", period)?;
            let rrc = (r + rc) * c;
            (rc * c + period * period / (4.0 * rrc)) / (1.0 + period / (2.0 * rrc))
        }
        FormulaId::OnTimeCurrentRamp if current_ramp => {
            (rho * rc + ri) * c
                / (rho * rho * (1.0 - rc * rc * c / l - rc * c * ri / (rho * l)))
        }
        FormulaId::OnTimeCurrentRampSimplified if current_ramp => (rc + ri) * c,
        _ => return Err(mismatch(formula, scheme)),
    };
    Ok(Bound::upper(2.0 * half, formula))
}

/// `det(I + Φ)`: changes sign when a real pole crosses −1.
pub fn pdb_margin(p: &BuckParams, scheme: Scheme, ma: f64, d: f64, period: f64) -> Result<f64> {
    let m = build_model(p, scheme)?;
    let ss = steady_state_at(&m, d, period, p.input())?;
    let lin = linearize(&m, &ss, ma)?;
    let n = m.dim();
    Ok(determinant(&(&Matrix::identity(n) + &lin.phi))?)
}

const SEARCH_GRID: usize = 200;

/// First sign change of `f` on a uniform grid over `[lo, hi]`, refined.
fn first_crossing<F>(f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let step = (hi - lo) / SEARCH_GRID as f64;
    let mut a = lo;
    let mut fa = f(a)?;
    for i in 1..=SEARCH_GRID {
        let b = lo + step * i as f64;
        let fb = f(b)?;
        if fa == 0.0 {
            return Ok(a);
        }
        if fa.signum() != fb.signum() {
            return Ok(find_root(|x| f(x).unwrap_or(f64::NAN), a, b, 1e-13 * (hi - lo))?);
        }
        a = b;
        fa = fb;
    }
    Err(crate::numeric::NumericError::Bracket {
        lo,
        hi,
        f_lo: f(lo)?,
        f_hi: fa,
    }
    .into())
}

/// Largest on-time with all poles inside the unit circle, found from the
/// eigenvalues of `Φ` with `D` held fixed (`T = d/D`).
pub fn max_on_time_exact(
    p: &BuckParams,
    scheme: Scheme,
    ma: f64,
    duty: f64,
    d_lo: f64,
    d_hi: f64,
) -> Result<Bound> {
    if !(duty > 0.0 && duty < 1.0) {
        return Err(invalid("D", format!("duty must lie in (0, 1), got {duty}")));
    }
    require_positive("d_lo", d_lo)?;
    let d = first_crossing(|d| pdb_margin(p, scheme, ma, d, d / duty), d_lo, d_hi)?;
    Ok(Bound::upper(d, FormulaId::OnTimeExact))
}

/// Closed-form minimum sense resistance for the current-ramp scheme.
pub fn min_sense_resistance(
    p: &BuckParams,
    d: f64,
    period: f64,
    formula: FormulaId,
) -> Result<Bound> {
    p.validate()?;
    require_positive("d", d)?;
    let rho = p.rho();
    let (r, l, c, rc) = (p.r, p.l, p.c, p.rc);
    let value = match formula {
        FormulaId::RiCurrentRamp => {
            (0.5 * d * rho * rho * (1.0 - rc * rc * c / l) - rho * rc * c)
                / (c + 0.5 * d * rho * rc * c / l)
        }
        FormulaId::RiEsrRule => d / (2.0 * c) - rc,
        FormulaId::RiPole => {
            require_positive("T", period)?;
            let off = period - d;
            (2.0 * d - 4.0 * rc * c - rho * period * off / (r * c))
                / (4.0 * c + rho * period * off / l)
        }
        _ => return Err(mismatch(formula, Scheme::VCotcCurrentRamp)),
    };
    Ok(Bound::lower(value, formula))
}

/// Smallest `Ri` that keeps the current-ramp scheme stable, from the
/// eigenvalues of `Φ`.
pub fn min_sense_resistance_exact(
    p: &BuckParams,
    ma: f64,
    d: f64,
    period: f64,
    ri_lo: f64,
    ri_hi: f64,
) -> Result<Bound> {
    if !(ri_lo >= 0.0 && ri_hi > ri_lo) {
        return Err(invalid("Ri range", format!("invalid range [{ri_lo}, {ri_hi}]")));
    }
    let ri = first_crossing(
        |ri| pdb_margin(&p.with_ri(ri), Scheme::VCotcCurrentRamp, ma, d, period),
        ri_lo,
        ri_hi,
    )?;
    Ok(Bound::lower(ri, FormulaId::RiExact))
}

/// Closed-form estimate of the nonzero pole without a ramp.
pub fn closed_form_pole(
    p: &BuckParams,
    scheme: Scheme,
    d: f64,
    period: f64,
    formula: FormulaId,
) -> Result<f64> {
    p.validate()?;
    require_positive("d", d)?;
    require_positive("T", period)?;
    let rho = p.rho();
    let (r, l, c, rc, ri) = (p.r, p.l, p.c, p.rc, p.ri);
    let off = period - d;
    match (formula, scheme) {
        (FormulaId::PoleSlopeRatio, _) | (FormulaId::PoleStateRatio, _) => {
            let m = build_model(p, scheme)?;
            let ss = steady_state_at(&m, d, period, p.input())?;
            if formula == FormulaId::PoleSlopeRatio {
                let a = &m.a1.scale(d) + &m.a2.scale(off);
                let num = dot(&m.c, &a.mul_vec(&ss.xdot0_minus));
                Ok(1.0 - num / dot(&m.c, &ss.xdot0_minus))
            } else {
                m.require_buck_structure("pole-state-ratio")?;
                let ax = m.a1.mul_vec(&ss.x0_0);
                let a2x = m.a1.mul_vec(&ax);
                Ok(1.0 - dot(&m.c, &a2x) * period / dot(&m.c, &ax))
            }
        }
        (FormulaId::PoleVoltageMode, Scheme::VCotc) => {
            Ok(1.0 + 2.0 * rho * period / (2.0 * rc * c + off) * (off / (2.0 * r * c) - 1.0))
        }
        (FormulaId::PoleVoltageModeSimplified, Scheme::VCotc) => {
            Ok(1.0 - 2.0 * period / (2.0 * rc * c + off))
        }
        (FormulaId::PoleCurrentRamp, Scheme::VCotcCurrentRamp) => Ok(1.0
            + 2.0 * rho * period / (2.0 * (rc + ri) * c + off)
                * (off / (2.0 * r * c) - 1.0 + ri * off / (2.0 * l))),
        (FormulaId::PoleCurrentMode, Scheme::CCotc) => {
            Ok(1.0 - rho * period * off / (2.0 * l * c))
        }
        _ => Err(mismatch(formula, scheme)),
    }
}

/// Mapping from a sampled-data pole to a continuous-time one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CtMap {
    /// `p = (1 − λ)/T`, the first-order map.
    Linear,
    /// `p = −ln(λ)/T`; needs `0 < λ`.
    Log,
}

/// Equivalent continuous-time pole (s⁻¹) of a real sampled-data pole `λ < 1`.
pub fn equivalent_ct_pole(lambda: f64, period: f64, map: CtMap) -> Result<f64> {
    require_positive("T", period)?;
    if lambda > 1.0 {
        return Err(invalid("lambda", format!("unstable pole {lambda} has no decay rate")));
    }
    match map {
        CtMap::Linear => Ok((1.0 - lambda) / period),
        CtMap::Log if lambda > 0.0 => Ok(-lambda.ln() / period),
        CtMap::Log => Err(invalid("lambda", "log map needs a positive pole")),
    }
}

/// Continuous-time pole of C-COTC in circuit parameters, `ρ(T − d)/(2LC)`.
pub fn current_mode_ct_pole(p: &BuckParams, d: f64, period: f64) -> Result<f64> {
    p.validate()?;
    Ok(p.rho() * (period - d) / (2.0 * p.l * p.c))
}
