//! Cycle-by-cycle iteration of the exact large-signal map.
//!
//! Each cycle runs the on stage for the fixed on-time `d`, then scans the off
//! stage on a uniform grid until the feedback `y(t) = C x(t) + D u` falls to
//! the ramp `ma·t` (`t` measured from the cycle start). The first sign change
//! is refined by safeguarded Newton iteration on the exact solution. If
//! `y(d) ≤ ma·d` the switch turns on again immediately and `Tₙ = d`.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{ConverterModel, Input, RampSpec};
use crate::numeric::{dot, expm_with_forcing, norm2, Matrix, NumericError};
use crate::sampled::consistent_control;

/// Scan steps per guessed period.
pub const SCAN_STEPS: usize = 1000;
/// The scan gives up after this many guessed periods.
pub const HORIZON_PERIODS: f64 = 10.0;
/// Cycles discarded before classification.
pub const DEFAULT_SETTLE: usize = 500;
const ROOT_TOL: f64 = 1e-12;
const CLASS_TOL: f64 = 1e-6;
const DELTA_MIN: f64 = 1e-5;

/// Result of one switching cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStep {
    /// `xₙ₊₁`.
    pub state: Vec<f64>,
    /// `Tₙ`.
    pub period: f64,
    /// `y(Tₙ)`, equal to the ramp amplitude `ma·Tₙ` unless the switch fired
    /// immediately.
    pub y_at_switch: f64,
}

/// Precomputed pieces of the large-signal map for one `(m, ramp, u)`.
#[derive(Debug, Clone)]
pub struct LargeSignalMap<'a> {
    m: &'a ConverterModel,
    ramp: RampSpec,
    on: Matrix,
    on_forcing: Vec<f64>,
    b2u: Vec<f64>,
    du: f64,
    scan: Option<(f64, Matrix, Vec<f64>)>,
}

fn affine(e: &Matrix, w: &[f64], x: &[f64], out: &mut [f64]) {
    let n = w.len();
    let a = e.as_slice();
    for i in 0..n {
        out[i] = w[i] + dot(&a[i * n..(i + 1) * n], x);
    }
}

impl<'a> LargeSignalMap<'a> {
    pub fn new(m: &'a ConverterModel, ramp: RampSpec, u: Input) -> Result<Self> {
        let (on, on_forcing) = expm_with_forcing(&m.a1, &m.b1u(u), ramp.on_time)?;
        Ok(Self {
            m,
            ramp,
            on,
            on_forcing,
            b2u: m.b2u(u),
            du: m.d[0] * u[0] + m.d[1] * u[1],
            scan: None,
        })
    }

    pub fn ramp(&self) -> RampSpec {
        self.ramp
    }

    fn off_state(&self, x: &[f64], tau: f64) -> Result<Vec<f64>> {
        let (e, w) = expm_with_forcing(&self.m.a2, &self.b2u, tau)?;
        let mut out = vec![0.0; x.len()];
        affine(&e, &w, x, &mut out);
        Ok(out)
    }

    fn g(&self, x: &[f64], t: f64) -> f64 {
        dot(&self.m.c, x) + self.du - self.ramp.ma * t
    }

    fn dg(&self, x: &[f64]) -> f64 {
        let xdot: Vec<f64> = self.m.a2.mul_vec(x).iter().zip(&self.b2u).map(|(a, b)| a + b).collect();
        dot(&self.m.c, &xdot) - self.ramp.ma
    }

    /// One cycle from `x` with scan step `T_guess/1000`.
    pub fn step(&mut self, x: &[f64], t_guess: f64) -> Result<CycleStep> {
        let d = self.ramp.on_time;
        if !(t_guess > d && t_guess.is_finite()) {
            return Err(invalid("T_guess", format!("{t_guess} must exceed the on-time {d}")));
        }
        if x.len() != self.m.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(NumericError::NonFinite("cycle start state")));
        }
        let n = x.len();
        let mut xd = vec![0.0; n];
        affine(&self.on, &self.on_forcing, x, &mut xd);
        if self.g(&xd, d) <= 0.0 {
            let y = dot(&self.m.c, &xd) + self.du;
            return Ok(CycleStep { state: xd, period: d, y_at_switch: y });
        }

        let dt = t_guess / SCAN_STEPS as f64;
        let rebuild = !matches!(&self.scan, Some((h, _, _)) if *h == dt);
        if rebuild {
            let (e, w) = expm_with_forcing(&self.m.a2, &self.b2u, dt)?;
            self.scan = Some((dt, e, w));
        }
        let (_, e, w) = self.scan.as_ref().expect("scan step built above");
        let horizon = HORIZON_PERIODS * t_guess;
        let max_steps = (horizon / dt).ceil() as usize;
        let mut cur = xd.clone();
        let mut next = vec![0.0; n];
        let mut k = 0usize;
        loop {
            if k >= max_steps {
                return Err(Error::MissedSwitching { cycle: 0, horizon });
            }
            affine(e, w, &cur, &mut next);
            if self.g(&next, d + (k + 1) as f64 * dt) <= 0.0 {
                break;
            }
            std::mem::swap(&mut cur, &mut next);
            k += 1;
        }

        // refine inside [d + k·dt, d + (k+1)·dt] from the grid state `cur`
        let t0 = d + k as f64 * dt;
        let g0 = self.g(&cur, t0);
        let g1 = self.g(&next, t0 + dt);
        let (mut lo, mut hi) = (0.0, dt);
        let mut tau = dt * g0 / (g0 - g1);
        let tol = ROOT_TOL * t_guess;
        let mut iterations = 0;
        loop {
            let xs = self.off_state(&cur, tau)?;
            let gv = self.g(&xs, t0 + tau);
            if gv > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let slope = self.dg(&xs);
            let mut nt = tau - gv / slope;
            if !(nt > lo && nt < hi) || !nt.is_finite() {
                nt = 0.5 * (lo + hi);
            }
            let converged = (nt - tau).abs() <= tol || hi - lo <= tol;
            tau = nt;
            iterations += 1;
            if converged || iterations >= 100 {
                break;
            }
        }
        let period = t0 + tau;
        let state = self.off_state(&xd, period - d)?;
        let y_at_switch = dot(&self.m.c, &state) + self.du;
        Ok(CycleStep { state, period, y_at_switch })
    }
}

/// One cycle of the large-signal map. Builds the map on every call; use
/// [`LargeSignalMap`] or [`simulate`] for repeated cycles.
pub fn step_cycle(m: &ConverterModel, ramp: RampSpec, x: &[f64], u: Input, t_guess: f64) -> Result<CycleStep> {
    LargeSignalMap::new(m, ramp, u)?.step(x, t_guess)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// `xₙ`, the state at the start of the cycle.
    pub state: Vec<f64>,
    pub period: f64,
    pub y_at_switch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleTrace {
    pub ramp: RampSpec,
    pub u: Input,
    pub records: Vec<CycleRecord>,
}

#[derive(Serialize)]
struct CsvRow {
    cycle: usize,
    #[serde(rename = "Tn_seconds")]
    tn: f64,
    #[serde(rename = "iL_amps")]
    il: f64,
    #[serde(rename = "vC_volts")]
    vc: f64,
    y_at_switch_volts: f64,
}

impl CycleTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn periods(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.period).collect()
    }

    /// CSV with columns `cycle, Tn_seconds, iL_amps, vC_volts, y_at_switch_volts`.
    /// Expects the two-state buck model.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for r in &self.records {
            w.serialize(CsvRow {
                cycle: r.cycle,
                tn: r.period,
                il: r.state.first().copied().unwrap_or(f64::NAN),
                vc: r.state.get(1).copied().unwrap_or(f64::NAN),
                y_at_switch_volts: r.y_at_switch,
            })
            .map_err(|e| Error::Usage(format!("writing trace: {e}")))?;
        }
        w.flush().map_err(|e| Error::Usage(format!("writing trace: {e}")))?;
        Ok(())
    }
}

/// Iterate the map for `ncycles` cycles from `x0`, warm-starting each scan
/// from the previous period.
pub fn simulate(
    m: &ConverterModel,
    ramp: RampSpec,
    x0: &[f64],
    u: Input,
    ncycles: usize,
    t_guess: f64,
) -> Result<CycleTrace> {
    if ncycles == 0 {
        return Err(invalid("ncycles", "at least one cycle is required"));
    }
    let mut map = LargeSignalMap::new(m, ramp, u)?;
    let mut x = x0.to_vec();
    let mut guess = t_guess;
    let mut records = Vec::with_capacity(ncycles);
    for cycle in 0..ncycles {
        let step = map.step(&x, guess).map_err(|e| match e {
            Error::MissedSwitching { horizon, .. } => Error::MissedSwitching { cycle, horizon },
            other => other,
        })?;
        records.push(CycleRecord {
            cycle,
            state: std::mem::replace(&mut x, step.state),
            period: step.period,
            y_at_switch: step.y_at_switch,
        });
        // keep the scan grid stable once the orbit is steady
        if step.period > ramp.on_time {
            guess = step.period;
        }
    }
    Ok(CycleTrace { ramp, u, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrbitKind {
    Period1,
    Period2,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitClass {
    pub kind: OrbitKind,
    /// One mean period for period-1, the two alternating ones for period-2.
    pub periods: Vec<f64>,
    /// Half the difference of the alternating periods; zero unless period-2.
    pub delta: f64,
}

fn spread(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, (hi - lo) / mean.abs())
}

/// Classify the orbit from the periods after `settle` cycles.
pub fn classify_orbit(trace: &CycleTrace, settle: usize) -> OrbitClass {
    let other = OrbitClass { kind: OrbitKind::Other, periods: Vec::new(), delta: 0.0 };
    if trace.len() <= settle + 32 {
        return other;
    }
    let tail = &trace.periods()[settle..];
    let (mean, rel) = spread(tail);
    if rel <= CLASS_TOL {
        return OrbitClass { kind: OrbitKind::Period1, periods: vec![mean], delta: 0.0 };
    }
    let even: Vec<f64> = tail.iter().step_by(2).copied().collect();
    let odd: Vec<f64> = tail.iter().skip(1).step_by(2).copied().collect();
    let (me, re) = spread(&even);
    let (mo, ro) = spread(&odd);
    let delta = 0.5 * (me - mo).abs();
    if re <= CLASS_TOL && ro <= CLASS_TOL && delta > DELTA_MIN * 0.5 * (me + mo) {
        let (short, long) = if me < mo { (me, mo) } else { (mo, me) };
        return OrbitClass { kind: OrbitKind::Period2, periods: vec![short, long], delta };
    }
    OrbitClass { kind: OrbitKind::Other, ..other }
}

/// How a single parameter value is simulated for classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitProbe {
    pub cycles: usize,
    pub settle: usize,
    /// Relative perturbation of the steady-state start.
    pub perturbation: f64,
}

impl Default for OrbitProbe {
    fn default() -> Self {
        Self { cycles: 20_000, settle: 20_000 - 64, perturbation: 1e-6 }
    }
}

impl OrbitProbe {
    /// Simulate from the periodic orbit with on-time `d` and period `T`,
    /// using the control voltage that makes `T` consistent with `ma`.
    pub fn run(&self, m: &ConverterModel, d: f64, period: f64, vs: f64, ma: f64) -> Result<OrbitClass> {
        let (vc, ss) = consistent_control(m, d, period, vs, ma)?;
        let x0: Vec<f64> = ss.x0_0.iter().map(|v| v * (1.0 + self.perturbation)).collect();
        let ramp = RampSpec::new(ma, d)?;
        let trace = simulate(m, ramp, &x0, [vs, vc], self.cycles, period)?;
        Ok(classify_orbit(&trace, self.settle))
    }
}

/// Bisection for the parameter at which the orbit stops being period-1.
///
/// `classify` maps a parameter value to an orbit kind; errors count as
/// [`OrbitKind::Other`]. The endpoints must disagree on period-1.
pub fn onset_search<F>(lo: f64, hi: f64, iterations: usize, classify: F) -> Result<f64>
where
    F: Fn(f64) -> Result<OrbitKind>,
{
    let stable = |x: f64| match classify(x) {
        Ok(kind) => kind == OrbitKind::Period1,
        Err(e) => {
            log::debug!("onset probe at {x} failed: {e}");
            false
        }
    };
    let (mut a, mut b) = (lo, hi);
    let sa = stable(a);
    let sb = stable(b);
    if sa == sb {
        let flag = |s: bool| if s { 1.0 } else { 0.0 };
        return Err(NumericError::Bracket { lo, hi, f_lo: flag(sa), f_hi: flag(sb) }.into());
    }
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        if stable(mid) == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Dominant multiplier estimated from simulation: each state axis is
/// perturbed by `eps·‖x*‖`, and the log deviation from the fixed point is
/// fitted by least squares over `cycles` cycles. Negative when the deviation
/// alternates in sign.
pub fn estimate_multiplier(
    m: &ConverterModel,
    ramp: RampSpec,
    fixed_point: &[f64],
    u: Input,
    period: f64,
    eps: f64,
    cycles: usize,
) -> Result<f64> {
    if cycles < 2 {
        return Err(invalid("cycles", "need at least two cycles to fit a slope"));
    }
    let mut map = LargeSignalMap::new(m, ramp, u)?;
    let scale = eps * norm2(fixed_point).max(f64::MIN_POSITIVE);
    let mut best = 0.0f64;
    for axis in 0..fixed_point.len() {
        let mut x = fixed_point.to_vec();
        x[axis] += scale;
        let mut logs = Vec::with_capacity(cycles);
        let mut devs: Vec<Vec<f64>> = Vec::with_capacity(cycles);
        for _ in 0..cycles {
            x = map.step(&x, period)?.state;
            let dev: Vec<f64> = x.iter().zip(fixed_point).map(|(a, b)| a - b).collect();
            logs.push(norm2(&dev).ln());
            devs.push(dev);
        }
        let k = cycles as f64;
        let mean_i = (k - 1.0) / 2.0;
        let mean_l = logs.iter().sum::<f64>() / k;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, l) in logs.iter().enumerate() {
            num += (i as f64 - mean_i) * (l - mean_l);
            den += (i as f64 - mean_i).powi(2);
        }
        let magnitude = (num / den).exp();
        let flips = devs.windows(2).filter(|w| dot(&w[0], &w[1]) < 0.0).count();
        let signed = if 2 * flips > devs.len() - 1 { -magnitude } else { magnitude };
        if signed.abs() > best.abs() {
            best = signed;
        }
    }
    Ok(best)
}
