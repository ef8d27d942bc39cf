//! Block-diagram converter models and the buck-converter builders.
//!
//! A model is the tuple `(A1, A2, B1, B2, C, D, E1, E2)`: stage S1 (switch on,
//! fixed duration `d`) evolves as `ẋ = A1 x + B1 u`, stage S2 as
//! `ẋ = A2 x + B2 u`, and S2 ends when `y = C x + D u` meets the ramp
//! `h(t) = ma·t`. The input is `u = (vs, vc)`.
//!
//! The buck builders fix the state ordering `x = (iL, vC)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{dot, Matrix};

/// Input pair `(vs, vc)`.
pub type Input = [f64; 2];

/// Feedback scheme of the constant on-time controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Output-voltage feedback (valley voltage control).
    #[serde(rename = "V_COTC")]
    VCotc,
    /// Sensed inductor-current feedback (valley current control).
    #[serde(rename = "C_COTC")]
    CCotc,
    /// Output voltage plus `Ri·iL` as the compensating ramp, no external ramp.
    #[serde(rename = "V_COTC_CURRENT_RAMP")]
    VCotcCurrentRamp,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::VCotc, Scheme::CCotc, Scheme::VCotcCurrentRamp];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::VCotc => "V_COTC",
            Scheme::CCotc => "C_COTC",
            Scheme::VCotcCurrentRamp => "V_COTC_CURRENT_RAMP",
        }
    }

    pub fn is_voltage_mode(self) -> bool {
        !matches!(self, Scheme::CCotc)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        match norm.as_str() {
            "V_COTC" | "V" => Ok(Scheme::VCotc),
            "C_COTC" | "C" => Ok(Scheme::CCotc),
            "V_COTC_CURRENT_RAMP" => Ok(Scheme::VCotcCurrentRamp),
            _ => Err(invalid(
                "scheme",
                format!("unknown scheme {s:?} (expected V_COTC, C_COTC or V_COTC_CURRENT_RAMP)"),
            )),
        }
    }
}

/// Physical buck-converter parameters, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuckParams {
    /// Load resistance (Ω).
    pub r: f64,
    /// Inductance (H).
    pub l: f64,
    /// Output capacitance (F).
    pub c: f64,
    /// Capacitor ESR (Ω).
    pub rc: f64,
    /// Current-sense resistance (Ω); zero when unused.
    pub ri: f64,
    /// Source voltage (V).
    pub vs: f64,
    /// Control voltage (V).
    pub vc: f64,
}

impl BuckParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("R", self.r), ("L", self.l), ("C", self.c), ("vs", self.vs)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("Rc", self.rc), ("Ri", self.ri)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if !self.vc.is_finite() {
            return Err(invalid("vc", "must be finite"));
        }
        Ok(())
    }

    /// `ρ = R / (R + Rc)`, equal to 1 for an ideal capacitor.
    pub fn rho(&self) -> f64 {
        self.r / (self.r + self.rc)
    }

    pub fn with_vs(mut self, vs: f64) -> Self {
        self.vs = vs;
        self
    }

    pub fn with_ri(mut self, ri: f64) -> Self {
        self.ri = ri;
        self
    }

    pub fn input(&self) -> Input {
        [self.vs, self.vc]
    }
}

/// Compensating ramp: slope `ma` (V/s) and the constant on-time `d` (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub ma: f64,
    pub on_time: f64,
}

impl RampSpec {
    pub fn new(ma: f64, on_time: f64) -> Result<Self> {
        if !(on_time.is_finite() && on_time > 0.0) {
            return Err(invalid("d", format!("on-time must be positive, got {on_time}")));
        }
        if !ma.is_finite() {
            return Err(invalid("ma", "ramp slope must be finite"));
        }
        Ok(Self { ma, on_time })
    }

    /// Ramp amplitude `Vh = ma·T` reached at the end of a period `T`.
    pub fn amplitude(&self, period: f64) -> f64 {
        self.ma * period
    }
}

/// Steady-state switching period and on-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub period: f64,
    pub on_time: f64,
}

impl OperatingPoint {
    pub fn from_period(on_time: f64, period: f64) -> Result<Self> {
        if !(on_time > 0.0 && period > on_time && period.is_finite()) {
            return Err(invalid(
                "T",
                format!("need 0 < d < T, got d = {on_time}, T = {period}"),
            ));
        }
        Ok(Self { period, on_time })
    }

    pub fn from_duty(on_time: f64, duty: f64) -> Result<Self> {
        if !(duty > 0.0 && duty < 1.0) {
            return Err(invalid("D", format!("duty must lie in (0, 1), got {duty}")));
        }
        Self::from_period(on_time, on_time / duty)
    }

    pub fn duty(&self) -> f64 {
        self.on_time / self.period
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.period
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }
}

/// The switched linear model of a converter under constant on-time control.
#[derive(Debug, Clone, PartialEq)]
pub struct ConverterModel {
    pub a1: Matrix,
    pub a2: Matrix,
    /// `N x 2`, columns act on `vs` and `vc`.
    pub b1: Matrix,
    pub b2: Matrix,
    /// Feedback row: `y = C x + D u`.
    pub c: Vec<f64>,
    pub d: [f64; 2],
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl ConverterModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a1: Matrix,
        a2: Matrix,
        b1: Matrix,
        b2: Matrix,
        c: Vec<f64>,
        d: [f64; 2],
        e1: Vec<f64>,
        e2: Vec<f64>,
    ) -> Result<Self> {
        let n = a1.rows();
        let consistent = n > 0
            && a1.is_square()
            && a2.rows() == n
            && a2.cols() == n
            && b1.rows() == n
            && b1.cols() == 2
            && b2.rows() == n
            && b2.cols() == 2
            && c.len() == n
            && e1.len() == n
            && e2.len() == n;
        if !consistent {
            return Err(invalid("model", "matrix dimensions are inconsistent"));
        }
        let finite = a1.is_finite()
            && a2.is_finite()
            && b1.is_finite()
            && b2.is_finite()
            && c.iter().chain(&e1).chain(&e2).chain(&d).all(|v| v.is_finite());
        if !finite {
            return Err(invalid("model", "entries must be finite"));
        }
        Ok(Self {
            a1,
            a2,
            b1,
            b2,
            c,
            d,
            e1,
            e2,
        })
    }

    pub fn dim(&self) -> usize {
        self.a1.rows()
    }

    /// `E = (E1 + E2) / 2`, the averaged output row.
    pub fn output_row(&self) -> Vec<f64> {
        self.e1
            .iter()
            .zip(&self.e2)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// First column of `B1`: the source-voltage input during the on stage.
    pub fn b11(&self) -> Vec<f64> {
        self.b1.col(0)
    }

    pub fn b1u(&self, u: Input) -> Vec<f64> {
        self.b1.mul_vec(&u)
    }

    pub fn b2u(&self, u: Input) -> Vec<f64> {
        self.b2.mul_vec(&u)
    }

    /// `y = C x + D u`.
    pub fn feedback(&self, x: &[f64], u: Input) -> f64 {
        dot(&self.c, x) + self.d[0] * u[0] + self.d[1] * u[1]
    }

    /// `A1 = A2`, `B21 = 0` and `B12 = B22`, the structure assumed by the
    /// closed-form buck boundaries.
    pub fn is_buck_structure(&self) -> bool {
        self.a1 == self.a2 && self.b2.col(0).iter().all(|v| *v == 0.0) && self.b1.col(1) == self.b2.col(1)
    }

    pub(crate) fn require_buck_structure(&self, what: &str) -> Result<()> {
        if self.is_buck_structure() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "{what} needs buck structure (A1 = A2, B21 = 0, B12 = B22)"
            )))
        }
    }

    /// Returns a copy with `δ` subtracted from the diagonal of `A1` and `A2`,
    /// moving an integrator pole at zero to `−δ`. Use `δ = 1e-9 s⁻¹` unless
    /// there is a reason not to.
    pub fn regularized(&self, delta: f64) -> Self {
        let shift = Matrix::identity(self.dim()).scale(delta);
        Self {
            a1: &self.a1 - &shift,
            a2: &self.a2 - &shift,
            ..self.clone()
        }
    }
}

/// Default integrator regularization for [`ConverterModel::regularized`].
pub const INTEGRATOR_DELTA: f64 = 1e-9;

/// Builds the buck-converter model for the chosen feedback scheme.
pub fn build_model(p: &BuckParams, scheme: Scheme) -> Result<ConverterModel> {
    p.validate()?;
    if scheme == Scheme::CCotc && p.ri <= 0.0 {
        return Err(invalid("Ri", "C_COTC needs a positive sense resistance"));
    }
    let rho = p.rho();
    let a = Matrix::from_rows(&[
        &[-rho * p.rc / p.l, -rho / p.l],
        &[rho / p.c, -rho / (p.r * p.c)],
    ])?;
    let mut b1 = Matrix::zeros(2, 2);
    b1[(0, 0)] = 1.0 / p.l;
    let b2 = Matrix::zeros(2, 2);
    let vo_row = vec![rho * p.rc, rho];
    let c = match scheme {
        Scheme::VCotc => vo_row.clone(),
        Scheme::CCotc => vec![p.ri, 0.0],
        Scheme::VCotcCurrentRamp => vec![rho * p.rc + p.ri, rho],
    };
    ConverterModel::new(a.clone(), a, b1, b2, c, [0.0, -1.0], vo_row.clone(), vo_row)
}

/// Slope used to normalize ramp slopes: the off-time inductor-current slope
/// `vs·D/L` times `Rc` (voltage schemes) or `Ri` (current scheme).
pub fn slope_normalizer(p: &BuckParams, duty: f64, scheme: Scheme) -> f64 {
    let k = match scheme {
        Scheme::CCotc => p.ri,
        Scheme::VCotc | Scheme::VCotcCurrentRamp => p.rc,
    };
    k * p.vs * duty / p.l
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example1() -> BuckParams {
        BuckParams {
            r: 0.5,
            l: 2e-6,
            c: 20e-6,
            rc: 0.02,
            ri: 0.0,
            vs: 5.0,
            vc: 0.0,
        }
    }

    fn example8() -> BuckParams {
        BuckParams {
            r: 10.0,
            l: 3.1e-6,
            c: 300e-6,
            rc: 4.5e-3,
            ri: 0.15,
            vs: 13.2,
            vc: 0.0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn voltage_mode_slopes() {
        let p = example1();
        let m = build_model(&p, Scheme::VCotc).unwrap();
        let b11 = m.b11();
        let rho = p.rho();
        assert!(rel(dot(&m.c, &b11), rho * p.rc / p.l) < 1e-14);
        let cab = dot(&m.c, &m.a1.mul_vec(&b11));
        let want = rho * rho / (p.l * p.c) * (1.0 - p.rc * p.rc * p.c / p.l);
        assert!(rel(cab, want) < 1e-13, "{cab} vs {want}");
    }

    #[test]
    fn current_mode_slopes() {
        let p = example8();
        let m = build_model(&p, Scheme::CCotc).unwrap();
        let b11 = m.b11();
        assert!(rel(dot(&m.c, &b11), p.ri / p.l) < 1e-14);
        let cab = dot(&m.c, &m.a1.mul_vec(&b11));
        let want = -p.rho() * p.ri * p.rc / (p.l * p.l);
        assert!(rel(cab, want) < 1e-13);
    }

    #[test]
    fn current_ramp_slopes() {
        let p = example1().with_ri(5e-3);
        let m = build_model(&p, Scheme::VCotcCurrentRamp).unwrap();
        let b11 = m.b11();
        let rho = p.rho();
        assert!(rel(dot(&m.c, &b11), (rho * p.rc + p.ri) / p.l) < 1e-14);
        let cab = dot(&m.c, &m.a1.mul_vec(&b11));
        let want = rho * rho / (p.l * p.c)
            * (1.0 - p.rc * p.rc * p.c / p.l - p.rc * p.c * p.ri / (rho * p.l));
        assert!(rel(cab, want) < 1e-12);
    }

    #[test]
    fn ideal_capacitor() {
        let p = BuckParams { rc: 0.0, ..example1() };
        assert_eq!(p.rho(), 1.0);
        let m = build_model(&p, Scheme::VCotc).unwrap();
        assert_eq!(m.c, vec![0.0, 1.0]);
        assert_eq!(slope_normalizer(&p, 0.4, Scheme::VCotc), 0.0);
    }

    #[test]
    fn builders_have_buck_structure() {
        for scheme in Scheme::ALL {
            let p = example1().with_ri(0.01);
            let m = build_model(&p, scheme).unwrap();
            assert!(m.is_buck_structure());
            assert_eq!(m.a1, m.a2);
            assert_eq!(m.d, [0.0, -1.0]);
            assert_eq!(m.e1, m.e2);
            assert_eq!(m.output_row(), m.e1);
        }
        let rho = example1().rho();
        assert!(rho > 0.0 && rho < 1.0);
    }

    #[test]
    fn normalizer_values() {
        let sf = slope_normalizer(&example1(), 0.4, Scheme::VCotc);
        assert!(rel(sf, 0.02 * 5.0 * 0.4 / 2e-6) < 1e-14);
        let sf8 = slope_normalizer(&example8(), 0.25, Scheme::CCotc);
        assert!(rel(sf8, 0.15 * 13.2 * 0.25 / 3.1e-6) < 1e-14);
        assert!((sf8 - 1.597e5).abs() < 100.0);
        assert!(((-1e5 / sf8) + 0.626).abs() < 0.01);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = BuckParams { l: 0.0, ..example1() };
        assert!(matches!(
            build_model(&bad, Scheme::VCotc),
            Err(Error::InvalidParameter { name: "L", .. })
        ));
        assert!(build_model(&example1(), Scheme::CCotc).is_err());
        assert!(OperatingPoint::from_duty(1e-6, 1.2).is_err());
        assert!(RampSpec::new(0.0, 0.0).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("v_cotc".parse::<Scheme>().unwrap(), Scheme::VCotc);
        assert_eq!("C-COTC".parse::<Scheme>().unwrap(), Scheme::CCotc);
        assert_eq!(
            "V_COTC_CURRENT_RAMP".parse::<Scheme>().unwrap(),
            Scheme::VCotcCurrentRamp
        );
        assert!("boost".parse::<Scheme>().is_err());
    }

    #[test]
    fn regularization_shifts_diagonal() {
        let m = build_model(&example1(), Scheme::VCotc).unwrap();
        let r = m.regularized(INTEGRATOR_DELTA);
        assert_eq!(r.a1[(0, 1)], m.a1[(0, 1)]);
        assert_eq!(r.a1[(0, 0)], m.a1[(0, 0)] - INTEGRATOR_DELTA);
    }

    #[test]
    fn operating_point_frequencies() {
        let op = OperatingPoint::from_duty(1.2e-6, 0.4).unwrap();
        assert!((op.period - 3e-6).abs() < 1e-20);
        assert!((op.fs() - 1.0 / 3e-6).abs() < 1e-6);
        assert!((op.omega_s() - 2.0 * std::f64::consts::PI / 3e-6).abs() < 1e-3);
    }
}
