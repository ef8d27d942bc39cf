//! S plots, pole loci, and PDB/SNB boundaries: exact evaluations next to the
//! closed-form design approximations they are meant to replace.
//!
//! Every approximate formula is tagged with a [`FormulaId`] so callers can
//! report which expression produced a number.

mod design;
mod pdb;
mod snb;
mod splot;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::ConverterModel;
use crate::numeric::dot;

pub use design::{
    closed_form_pole, current_mode_ct_pole, equivalent_ct_pole, max_on_time, max_on_time_exact,
    min_sense_resistance, min_sense_resistance_exact, pdb_margin, Bound, BoundDirection, CtMap,
};
pub use pdb::{
    max_ramp_over_duty, pdb_boundary_approx, pdb_boundary_closed_form, pdb_boundary_exact,
    pdb_boundary_general, pdb_onset_duty, DutyExtremum, OnsetPoint, TaylorOrder,
};
pub use snb::{
    snb_boundary_approx, snb_boundary_exact, snb_boundary_general, snb_scheme_threshold,
};
pub use splot::{pole_locus, s_approx, s_exact};

macro_rules! formulas {
    ($($variant:ident => $id:literal, $desc:literal;)*) => {
        /// Identifier of the expression used to compute a boundary or pole.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum FormulaId {
            $($variant),*
        }

        impl FormulaId {
            pub const ALL: &'static [FormulaId] = &[$(FormulaId::$variant),*];

            /// Stable kebab-case identifier used in tables and on the command line.
            pub fn id(self) -> &'static str {
                match self {
                    $(FormulaId::$variant => $id),*
                }
            }

            pub fn description(self) -> &'static str {
                match self {
                    $(FormulaId::$variant => $desc),*
                }
            }
        }
    };
}

formulas! {
    SplotExact => "splot-exact", "S(λ) from the exact resolvent";
    SplotApprox => "splot-linearized", "S(λ) with first-order matrix exponentials";
    PdbGeneral => "pdb-general", "S(−1) from the exact resolvent of a general model";
    PdbExact => "pdb-exact", "exact buck PDB ramp slope";
    PdbTaylor => "pdb-taylor", "buck PDB ramp slope, Taylor expansion to T²";
    PdbLinear => "pdb-linear", "buck PDB ramp slope, first order in T";
    PdbVoltageMode => "pdb-vcotc", "V-COTC PDB ramp slope from circuit parameters";
    PdbVoltageModeSimplified => "pdb-vcotc-simplified", "V-COTC PDB ramp slope for Rc²C ≪ L";
    PdbCurrentMode => "pdb-ccotc", "C-COTC PDB ramp slope (always negative)";
    OnTimeSlopeRatio => "on-time-slope-ratio", "max on-time from C·B11, C·A1·B11 and ma";
    OnTimeVoltageMode => "on-time-vcotc", "V-COTC max on-time with ramp";
    OnTimeVoltageModeSimplified => "on-time-vcotc-simplified", "V-COTC max on-time with ramp, Rc²C ≪ L";
    OnTimeNoRamp => "on-time-no-ramp", "V-COTC max on-time without ramp";
    OnTimeEsrRule => "on-time-esr-rule", "d/2 < RcC rule of thumb";
    OnTimePole => "on-time-pole", "max on-time from the closed-form pole, load included";
    OnTimeCurrentRamp => "on-time-current-ramp", "max on-time with Ri·iL as ramp";
    OnTimeCurrentRampSimplified => "on-time-current-ramp-simplified", "d/2 < (Rc + Ri)C rule";
    OnTimeExact => "on-time-exact", "max on-time from the eigenvalues of Φ";
    RiCurrentRamp => "min-ri-current-ramp", "min Ri from the current-ramp on-time bound";
    RiEsrRule => "min-ri-esr-rule", "min Ri from d/2 < (Rc + Ri)C";
    RiPole => "min-ri-pole", "min Ri from the closed-form pole, load included";
    RiExact => "min-ri-exact", "min Ri from the eigenvalues of Φ";
    PoleExact => "pole-exact", "eigenvalues of Φ";
    PoleSlopeRatio => "pole-slope-ratio", "pole from C(A1 d + A2(T − d))ẋ / Cẋ";
    PoleStateRatio => "pole-state-ratio", "pole from C·A1²·x⁰ / C·A1·x⁰";
    PoleVoltageMode => "pole-vcotc", "V-COTC pole from circuit parameters";
    PoleVoltageModeSimplified => "pole-vcotc-simplified", "V-COTC pole, load neglected";
    PoleCurrentRamp => "pole-current-ramp", "V-COTC pole with Ri·iL as ramp";
    PoleCurrentMode => "pole-ccotc", "C-COTC pole from circuit parameters";
    CtPoleLinear => "ct-pole-linear", "continuous-time pole (1 − λ)/T";
    CtPoleLog => "ct-pole-log", "continuous-time pole −ln(λ)/T";
    CtPoleCurrentMode => "ct-pole-ccotc", "C-COTC continuous-time pole ρ(T − d)/2LC";
    SnbGeneral => "snb-general", "S(1) from the exact resolvent of a general model";
    SnbExact => "snb-exact", "exact buck SNB ramp slope";
    SnbTaylor => "snb-taylor", "buck SNB ramp slope, Taylor expansion";
    SnbVoltageMode => "snb-vcotc", "V-COTC SNB ramp slope from circuit parameters";
    SnbCurrentMode => "snb-ccotc", "C-COTC SNB ramp slope from circuit parameters";
    HbPdb => "hb-pdb", "harmonic-balance PDB ramp slope";
    HbPdbFirstHarmonic => "hb-pdb-first-harmonic", "harmonic-balance PDB ramp slope, first harmonic only";
    LoopGainPdb => "loop-gain-pdb", "loop-gain PDB sum (boundary at 2)";
    LoopGainPdbFirstHarmonic => "loop-gain-pdb-first-harmonic", "loop-gain PDB, first harmonic (boundary at 1)";
    L1Plot => "l1-plot", "L1 sum over loop-gain harmonics (boundary at 2)";
    L2Plot => "l2-plot", "L2 sum over G harmonics (boundary at 2T·ma/vs)";
    HPlot => "h-plot", "one-sided H sum (boundary Re H = T·ma/vs)";
    HbSnb => "hb-snb", "harmonic-balance SNB condition";
    Simulation => "simulation", "cycle-by-cycle large-signal simulation";
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FormulaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        FormulaId::ALL
            .iter()
            .copied()
            .find(|f| f.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown formula id {s:?}")))
    }
}

impl Serialize for FormulaId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryKind {
    #[serde(rename = "PDB")]
    Pdb,
    #[serde(rename = "SNB")]
    Snb,
}

/// A critical value on a bifurcation boundary, tagged with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryResult {
    pub kind: BoundaryKind,
    pub critical_value: f64,
    pub unit: &'static str,
    pub formula: FormulaId,
}

impl BoundaryResult {
    pub fn ramp(kind: BoundaryKind, value: f64, formula: FormulaId) -> Self {
        Self {
            kind,
            critical_value: value,
            unit: "V/s",
            formula,
        }
    }

    /// Whether a ramp slope `ma` keeps the converter on the stable side.
    pub fn is_stable_for(&self, ma: f64) -> bool {
        self.critical_value < ma
    }
}

/// `C·B11`, `C·A1·B11` and `C·A1²·B11`: the slope coefficients in every
/// buck closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeCoefficients {
    pub cb: f64,
    pub cab: f64,
    pub ca2b: f64,
}

impl SlopeCoefficients {
    pub fn of(m: &ConverterModel) -> Self {
        let b = m.b11();
        let ab = m.a1.mul_vec(&b);
        let a2b = m.a1.mul_vec(&ab);
        Self {
            cb: dot(&m.c, &b),
            cab: dot(&m.c, &ab),
            ca2b: dot(&m.c, &a2b),
        }
    }
}

fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(crate::error::invalid(name, format!("must be positive, got {v}")))
    }
}

/// Checks `0 < d ≤ T`; the buck boundaries remain defined at `D = 1`.
fn check_on_time(d: f64, period: f64) -> Result<()> {
    require_positive("d", d)?;
    require_positive("T", period)?;
    if d > period * (1.0 + 1e-12) {
        return Err(crate::error::invalid(
            "d",
            format!("on-time {d} exceeds the period {period}"),
        ));
    }
    Ok(())
}
