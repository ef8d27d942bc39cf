use anyhow::{bail, Result};
use clap::Subcommand;

use cotc_core::bifurcation::{
    closed_form_pole, current_mode_ct_pole, equivalent_ct_pole, max_on_time, max_on_time_exact,
    min_sense_resistance, min_sense_resistance_exact, pdb_boundary_approx,
    pdb_boundary_closed_form, pdb_boundary_exact, pdb_boundary_general, s_approx, s_exact,
    snb_boundary_approx, snb_boundary_exact, snb_boundary_general, snb_scheme_threshold, Bound,
    CtMap, FormulaId, TaylorOrder,
};
use cotc_core::harmonic::{
    h_plot, hb_pdb_splot, hb_snb_condition, l1_plot, l2_plot, loop_gain_pdb, LoopGainForm,
};
use cotc_core::simulator::{classify_orbit, onset_search, simulate, OrbitKind, OrbitProbe};
use cotc_core::sweep::Range;
use cotc_core::{
    build_model, consistent_control, linearize, steady_state_at, ConverterModel, Error, Execution,
    RampSpec, Scheme, SteadyState,
};

use crate::config::{lookup, ConfigError, RawConfig, Setup};
use crate::table::{Column, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Periodic orbit at the configured on-time and period.
    SteadyState,
    /// Sampled-data poles (eigenvalues of Φ) or a closed-form pole estimate.
    Poles,
    /// S plot value S(λ) at the configured lambda.
    Splot,
    /// S(λ) over lambda_range; poles sit where S(λ) = ma.
    PoleLocus,
    /// Ramp slope at which a pole crosses −1.
    PdbBoundary,
    /// Ramp slope at which a pole crosses +1.
    SnbBoundary,
    /// Largest on-time free of period doubling at the configured duty.
    MaxOnTime,
    /// Smallest sense resistance for V_COTC_CURRENT_RAMP.
    MinRi,
    /// Harmonic-balance PDB ramp slope with convergence history.
    HbSplot,
    /// Loop-gain PDB sum; the boundary is 2.
    L1,
    /// L2 sum over G harmonics; the boundary is 2T·ma/vs.
    L2,
    /// One-sided H sum; the boundary is T·ma/vs.
    Hplot,
    /// Cycle-by-cycle large-signal trace.
    Simulate,
    /// Simulated onset of non-period-1 behaviour by bisection over --sweep KEY=lo:hi.
    Onset,
    /// Run the worked-example regression checks.
    Examples,
    /// List formula identifiers accepted by --formula.
    Formulas,
    /// List configuration keys with their units.
    Keys,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SteadyState => "steady-state",
            Command::Poles => "poles",
            Command::Splot => "splot",
            Command::PoleLocus => "pole-locus",
            Command::PdbBoundary => "pdb-boundary",
            Command::SnbBoundary => "snb-boundary",
            Command::MaxOnTime => "max-on-time",
            Command::MinRi => "min-ri",
            Command::HbSplot => "hb-splot",
            Command::L1 => "l1",
            Command::L2 => "l2",
            Command::Hplot => "hplot",
            Command::Simulate => "simulate",
            Command::Onset => "onset",
            Command::Examples => "examples",
            Command::Formulas => "formulas",
            Command::Keys => "keys",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub key: String,
    pub range: Range,
}

impl Sweep {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let Some((key, range)) = text.split_once('=') else {
            return Err(ConfigError(format!("--sweep expects KEY=lo:hi:n, got {text:?}")));
        };
        let key = key.trim();
        match lookup(key) {
            Some(k) if !k.unit.contains(':') => {}
            _ => return Err(ConfigError(format!("cannot sweep {key:?}: not a numeric key"))),
        }
        Ok(Self { key: key.to_string(), range: crate::config::parse_range(range)? })
    }

    fn column(&self) -> Column {
        Column::new(self.key.clone(), lookup(&self.key).map_or("", |k| k.unit))
    }
}

type Eval = Box<dyn Fn(&Setup) -> cotc_core::Result<Vec<f64>> + Send + Sync>;

/// What a pointwise command computes at one operating point.
struct Plan {
    formula: String,
    columns: Vec<Column>,
    meta: Vec<(String, String)>,
    eval: Eval,
}

impl Plan {
    fn new(formula: FormulaId, columns: Vec<Column>, eval: Eval) -> Self {
        Self { formula: formula.id().to_string(), columns, meta: Vec::new(), eval }
    }

    fn named(formula: &str, columns: Vec<Column>, eval: Eval) -> Self {
        Self { formula: formula.to_string(), columns, meta: Vec::new(), eval }
    }

    fn meta(mut self, k: &str, v: impl ToString) -> Self {
        self.meta.push((k.to_string(), v.to_string()));
        self
    }
}

fn pick(
    cmd: Command,
    requested: Option<FormulaId>,
    default: FormulaId,
    allowed: &[FormulaId],
) -> Result<FormulaId, ConfigError> {
    let f = requested.unwrap_or(default);
    if f == default || allowed.contains(&f) {
        return Ok(f);
    }
    let list: Vec<&str> = std::iter::once(default).chain(allowed.iter().copied()).map(FormulaId::id).collect();
    Err(ConfigError(format!(
        "formula {f} does not apply to {}; choose one of {}",
        cmd.name(),
        list.join(", ")
    )))
}

fn model(s: &Setup) -> cotc_core::Result<ConverterModel> {
    build_model(&s.params, s.scheme)
}

fn orbit(s: &Setup) -> cotc_core::Result<(ConverterModel, SteadyState)> {
    let m = model(s)?;
    let ss = steady_state_at(&m, s.d, s.period, s.params.input())?;
    Ok((m, ss))
}

fn ramp_columns() -> Vec<Column> {
    vec![
        Column::new("ma_crit", "volts_per_second"),
        Column::new("margin", "volts_per_second"),
    ]
}

fn with_margin(s: &Setup, crit: f64) -> Vec<f64> {
    vec![crit, s.ma - crit]
}

fn bound_plan(formula: FormulaId, name: &str, unit: &'static str, eval: Eval) -> Plan {
    Plan::new(formula, vec![Column::new(name, unit)], eval)
}

fn bound_value(b: Bound) -> Vec<f64> {
    vec![b.value]
}

fn plan(cmd: Command, requested: Option<FormulaId>) -> Result<Plan> {
    use FormulaId as F;
    let plan = match cmd {
        Command::SteadyState => Plan::named(
            "steady-state",
            vec![
                Column::new("x0_iL", "amps"),
                Column::new("x0_vC", "volts"),
                Column::new("xd_iL", "amps"),
                Column::new("xd_vC", "volts"),
                Column::new("y_T", "volts"),
                Column::new("vc_consistent", "volts"),
            ],
            Box::new(|s| {
                let (m, ss) = orbit(s)?;
                let (vc, _) = consistent_control(&m, s.d, s.period, s.params.vs, s.ma)?;
                Ok(vec![ss.x0_0[0], ss.x0_0[1], ss.x0_d[0], ss.x0_d[1], ss.feedback_at_period(&m), vc])
            }),
        ),
        Command::Poles => {
            let f = pick(
                cmd,
                requested,
                F::PoleExact,
                &[
                    F::PoleSlopeRatio,
                    F::PoleStateRatio,
                    F::PoleVoltageMode,
                    F::PoleVoltageModeSimplified,
                    F::PoleCurrentRamp,
                    F::PoleCurrentMode,
                    F::CtPoleLinear,
                    F::CtPoleLog,
                    F::CtPoleCurrentMode,
                ],
            )?;
            match f {
                F::PoleExact => Plan::new(
                    f,
                    vec![
                        Column::new("pole1_re", "dimensionless"),
                        Column::new("pole1_im", "dimensionless"),
                        Column::new("pole2_re", "dimensionless"),
                        Column::new("pole2_im", "dimensionless"),
                        Column::new("spectral_radius", "dimensionless"),
                    ],
                    Box::new(|s| {
                        let (m, ss) = orbit(s)?;
                        let lin = linearize(&m, &ss, s.ma)?;
                        let p = lin.sorted_poles()?;
                        Ok(vec![p[0].re, p[0].im, p[1].re, p[1].im, lin.spectral_radius()?])
                    }),
                ),
                F::CtPoleLinear | F::CtPoleLog => {
                    let map = if f == F::CtPoleLinear { CtMap::Linear } else { CtMap::Log };
                    bound_plan(
                        f,
                        "ct_pole",
                        "per_second",
                        Box::new(move |s| {
                            let (m, ss) = orbit(s)?;
                            let lambda = dominant_real_pole(&linearize(&m, &ss, s.ma)?.poles()?)?;
                            Ok(vec![equivalent_ct_pole(lambda, s.period, map)?])
                        }),
                    )
                    .meta("map", "dominant sampled-data pole")
                }
                F::CtPoleCurrentMode => bound_plan(
                    f,
                    "ct_pole",
                    "per_second",
                    Box::new(|s| Ok(vec![current_mode_ct_pole(&s.params, s.d, s.period)?])),
                ),
                _ => bound_plan(
                    f,
                    "pole",
                    "dimensionless",
                    Box::new(move |s| Ok(vec![closed_form_pole(&s.params, s.scheme, s.d, s.period, f)?])),
                ),
            }
        }
        Command::Splot | Command::PoleLocus => {
            let f = pick(cmd, requested, F::SplotExact, &[F::SplotApprox])?;
            Plan::new(
                f,
                vec![Column::new("S", "volts_per_second"), Column::new("S_minus_ma", "volts_per_second")],
                Box::new(move |s| {
                    let (m, ss) = orbit(s)?;
                    let v = if f == F::SplotExact { s_exact(&m, &ss, s.lambda)? } else { s_approx(&m, &ss, s.lambda)? };
                    Ok(vec![v, v - s.ma])
                }),
            )
        }
        Command::PdbBoundary => {
            let f = pick(
                cmd,
                requested,
                F::PdbExact,
                &[
                    F::PdbGeneral,
                    F::PdbTaylor,
                    F::PdbLinear,
                    F::PdbVoltageMode,
                    F::PdbVoltageModeSimplified,
                    F::PdbCurrentMode,
                    F::HbPdb,
                    F::HbPdbFirstHarmonic,
                ],
            )?;
            Plan::new(
                f,
                ramp_columns(),
                Box::new(move |s| {
                    let vs = s.params.vs;
                    let crit = match f {
                        F::PdbExact => pdb_boundary_exact(&model(s)?, vs, s.d, s.period)?,
                        F::PdbGeneral => {
                            let (m, ss) = orbit(s)?;
                            pdb_boundary_general(&m, &ss)?
                        }
                        F::PdbTaylor => pdb_boundary_approx(&model(s)?, vs, s.d, s.period, TaylorOrder::Full)?,
                        F::PdbLinear => pdb_boundary_approx(&model(s)?, vs, s.d, s.period, TaylorOrder::Linear)?,
                        F::HbPdb => hb_pdb_splot(&s.params, s.scheme, s.d, s.period, s.nh)?.value,
                        F::HbPdbFirstHarmonic => hb_pdb_splot(&s.params, s.scheme, s.d, s.period, 1)?.value,
                        _ => pdb_boundary_closed_form(&s.params, s.scheme, s.d, s.period, f)?,
                    };
                    Ok(with_margin(s, crit))
                }),
            )
            .meta("stable_when", "margin > 0")
        }
        Command::SnbBoundary => {
            let f = pick(
                cmd,
                requested,
                F::SnbExact,
                &[F::SnbGeneral, F::SnbTaylor, F::SnbVoltageMode, F::SnbCurrentMode, F::HbSnb],
            )?;
            Plan::new(
                f,
                ramp_columns(),
                Box::new(move |s| {
                    let vs = s.params.vs;
                    let crit = match f {
                        F::SnbExact => snb_boundary_exact(&model(s)?, vs, s.d, s.period)?,
                        F::SnbGeneral => {
                            let (m, ss) = orbit(s)?;
                            snb_boundary_general(&m, &ss)?
                        }
                        F::SnbTaylor => snb_boundary_approx(&model(s)?, vs, s.d, s.period)?,
                        F::HbSnb => vs * hb_snb_condition(&s.params, s.scheme, s.d, s.period, s.nh)?.value,
                        _ => {
                            let (v, id) = snb_scheme_threshold(&s.params, s.scheme, s.d, s.period)?;
                            if id != f {
                                return Err(Error::Usage(format!("formula {f} does not apply to {}", s.scheme)));
                            }
                            v
                        }
                    };
                    Ok(with_margin(s, crit))
                }),
            )
            .meta("stable_when", "margin > 0")
        }
        Command::MaxOnTime => {
            let f = pick(
                cmd,
                requested,
                F::OnTimeExact,
                &[
                    F::OnTimeSlopeRatio,
                    F::OnTimeVoltageMode,
                    F::OnTimeVoltageModeSimplified,
                    F::OnTimeNoRamp,
                    F::OnTimeEsrRule,
                    F::OnTimePole,
                    F::OnTimeCurrentRamp,
                    F::OnTimeCurrentRampSimplified,
                ],
            )?;
            bound_plan(
                f,
                "d_max",
                "seconds",
                Box::new(move |s| {
                    let duty = s.duty();
                    let b = if f == F::OnTimeExact {
                        // duty is held fixed while d varies
                        max_on_time_exact(&s.params, s.scheme, s.ma, duty, s.d * 1e-2, s.d * 10.0)?
                    } else {
                        max_on_time(&s.params, s.scheme, s.ma, duty, s.period, f)?
                    };
                    Ok(bound_value(b))
                }),
            )
            .meta("bound", "upper")
        }
        Command::MinRi => {
            let f = pick(cmd, requested, F::RiExact, &[F::RiCurrentRamp, F::RiEsrRule, F::RiPole])?;
            bound_plan(
                f,
                "Ri_min",
                "ohms",
                Box::new(move |s| {
                    let b = if f == F::RiExact {
                        let r = s.ri_range.unwrap_or(Range { lo: 1e-6, hi: 0.1, points: 2 });
                        min_sense_resistance_exact(&s.params, s.ma, s.d, s.period, r.lo, r.hi)?
                    } else {
                        min_sense_resistance(&s.params, s.d, s.period, f)?
                    };
                    Ok(bound_value(b))
                }),
            )
            .meta("bound", "lower")
            .meta("evaluated_scheme", Scheme::VCotcCurrentRamp)
        }
        Command::HbSplot => {
            let f = pick(cmd, requested, F::HbPdb, &[F::HbPdbFirstHarmonic])?;
            Plan::new(
                f,
                vec![
                    Column::new("S", "volts_per_second"),
                    Column::new("S_partial", "volts_per_second"),
                    Column::new("S_quarter_nh", "volts_per_second"),
                    Column::new("S_half_nh", "volts_per_second"),
                    Column::new("margin", "volts_per_second"),
                ],
                Box::new(move |s| {
                    let nh = if f == F::HbPdb { s.nh } else { 1 };
                    let h = hb_pdb_splot(&s.params, s.scheme, s.d, s.period, nh)?;
                    Ok(vec![h.value, h.partial, h.convergence[0].1, h.convergence[1].1, s.ma - h.value])
                }),
            )
            .meta("summation", "Cesaro mean over the last 10% of partial sums")
        }
        Command::L1 => {
            let f = pick(cmd, requested, F::L1Plot, &[F::LoopGainPdb, F::LoopGainPdbFirstHarmonic])?;
            match f {
                F::L1Plot => Plan::new(
                    f,
                    vec![Column::new("L1_re", "dimensionless"), Column::new("L1_im", "dimensionless")],
                    Box::new(|s| {
                        let z = l1_plot(&s.params, s.scheme, s.ma, s.d, s.period, s.nh)?;
                        Ok(vec![z.re, z.im])
                    }),
                )
                .meta("boundary", 2),
                _ => {
                    let form = if f == F::LoopGainPdb { LoopGainForm::Exact } else { LoopGainForm::FirstHarmonic };
                    bound_plan(
                        f,
                        "loop_gain",
                        "dimensionless",
                        Box::new(move |s| Ok(vec![loop_gain_pdb(&s.params, s.scheme, s.ma, s.d, s.period, s.nh, form)?])),
                    )
                    .meta("boundary", form.boundary())
                }
            }
        }
        Command::L2 | Command::Hplot => {
            let l2 = cmd == Command::L2;
            let f = pick(cmd, requested, if l2 { F::L2Plot } else { F::HPlot }, &[])?;
            let prefix = if l2 { "L2" } else { "H" };
            Plan::new(
                f,
                vec![
                    Column::new(format!("{prefix}_re"), "dimensionless"),
                    Column::new(format!("{prefix}_im"), "dimensionless"),
                    Column::new(format!("{prefix}_boundary"), "dimensionless"),
                ],
                Box::new(move |s| {
                    let (p, sc) = (&s.params, s.scheme);
                    let z = if l2 { l2_plot(p, sc, s.d, s.period, s.nh)? } else { h_plot(p, sc, s.d, s.period, s.nh)? };
                    let scale = if l2 { 2.0 } else { 1.0 };
                    Ok(vec![z.re, z.im, scale * s.period * s.ma / p.vs])
                }),
            )
            .meta("stable_when", "re < boundary")
        }
        Command::Simulate | Command::Onset | Command::Examples | Command::Formulas | Command::Keys => {
            bail!("{} is not a pointwise command", cmd.name())
        }
    };
    Ok(plan)
}

fn dominant_real_pole(poles: &[cotc_core::Complex64]) -> cotc_core::Result<f64> {
    let p = poles
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or_else(|| Error::Usage("no poles".into()))?;
    if p.im.abs() > 1e-12 * p.norm() {
        return Err(Error::Usage(format!(
            "dominant pole {} + {}j is complex; the continuous-time map needs a real pole",
            p.re, p.im
        )));
    }
    Ok(p.re)
}

fn base_table(formula: &str, columns: Vec<Column>, cmd: Command, raw: &RawConfig) -> ResultTable {
    let mut t = ResultTable::new(formula, columns);
    t.meta("command", cmd.name());
    for (k, v) in raw.entries() {
        t.meta(&k, v);
    }
    t
}

/// Evaluates a pointwise command once, or at every point of a sweep.
pub fn evaluate(
    cmd: Command,
    requested: Option<FormulaId>,
    raw: &RawConfig,
    sweep: Option<Sweep>,
) -> Result<ResultTable> {
    let need_ri = cmd != Command::MinRi;
    let base = raw.resolve_for(need_ri)?;
    let plan = plan(cmd, requested)?;
    let sweep = match (sweep, cmd) {
        (None, Command::PoleLocus) => Some(Sweep {
            key: "lambda".into(),
            range: base.lambda_range.unwrap_or(Range { lo: -2.0, hi: 2.0, points: 401 }),
        }),
        (s, _) => s,
    };
    let mut columns: Vec<Column> = sweep.iter().map(Sweep::column).collect();
    columns.extend(plan.columns.iter().cloned());
    let mut table = base_table(&plan.formula, columns, cmd, raw);
    for (k, v) in &plan.meta {
        table.meta(k, v);
    }
    if matches!(plan.formula.as_str(), "hb-pdb" | "hb-snb" | "l1-plot" | "l2-plot" | "h-plot" | "loop-gain-pdb") {
        table.meta("Nh", base.nh);
    }
    let Some(sweep) = sweep else {
        table.push((plan.eval)(&base)?);
        return Ok(table);
    };
    table.meta("sweep", format!("{}={}:{}:{}", sweep.key, sweep.range.lo, sweep.range.hi, sweep.range.points));
    let points = sweep
        .range
        .values()
        .into_iter()
        .map(|x| {
            let mut r = raw.clone();
            r.set_value(&sweep.key, x)?;
            Ok((x, r.resolve_for(need_ri)?))
        })
        .collect::<Result<Vec<(f64, Setup)>, ConfigError>>()?;
    let width = plan.columns.len();
    let rows = Execution::Parallel.map(&points, |(x, s)| {
        let values = (plan.eval)(s).unwrap_or_else(|e| {
            log::warn!("{}={x}: {e}", sweep.key);
            vec![f64::NAN; width]
        });
        std::iter::once(*x).chain(values).collect::<Vec<f64>>()
    });
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

/// Simulates the large-signal map from the perturbed periodic orbit.
pub fn run_simulation(raw: &RawConfig) -> Result<ResultTable> {
    let s = raw.resolve()?;
    let m = model(&s)?;
    let vc = if s.vc_given {
        s.params.vc
    } else {
        consistent_control(&m, s.d, s.period, s.params.vs, s.ma)?.0
    };
    let u = [s.params.vs, vc];
    let ss = steady_state_at(&m, s.d, s.period, u)?;
    let x0: Vec<f64> = ss.x0_0.iter().map(|v| v * (1.0 + s.perturbation)).collect();
    let ncycles = s.ncycles.unwrap_or(1000);
    let trace = simulate(&m, RampSpec::new(s.ma, s.d)?, &x0, u, ncycles, s.period)?;
    let settle = s.settle.unwrap_or(ncycles.saturating_sub(64));
    let class = classify_orbit(&trace, settle);

    let mut t = base_table(
        FormulaId::Simulation.id(),
        vec![
            Column::new("cycle", ""),
            Column::new("Tn", "seconds"),
            Column::new("iL", "amps"),
            Column::new("vC", "volts"),
            Column::new("y_at_switch", "volts"),
        ],
        Command::Simulate,
        raw,
    );
    t.meta("vc_used", vc)
        .meta("ncycles", ncycles)
        .meta("settle", settle)
        .meta("orbit", serde_json::to_value(class.kind)?.as_str().unwrap_or("OTHER"))
        .meta("orbit_delta_seconds", class.delta);
    for r in &trace.records {
        t.push(vec![r.cycle as f64, r.period, r.state[0], r.state[1], r.y_at_switch]);
    }
    Ok(t)
}

pub const ONSET_ITERATIONS: usize = 20;

/// Bisects `sweep.key` over `[lo, hi]` for the loss of period-1 behaviour.
pub fn run_onset(raw: &RawConfig, sweep: Option<Sweep>) -> Result<ResultTable> {
    let base = raw.resolve()?;
    let fallback = match (base.ma_range, base.d_range) {
        (Some(range), _) => Some(Sweep { key: "ma".into(), range }),
        (None, Some(range)) => Some(Sweep { key: "D".into(), range }),
        (None, None) => None,
    };
    let Some(sweep) = sweep.or(fallback) else {
        return Err(ConfigError("onset needs --sweep KEY=lo:hi, ma_range or D_range".into()).into());
    };
    let defaults = OrbitProbe::default();
    let cycles = base.ncycles.unwrap_or(defaults.cycles);
    let probe = OrbitProbe {
        cycles,
        settle: base.settle.unwrap_or(cycles.saturating_sub(64)),
        perturbation: base.perturbation,
    };
    // validate both ends before simulating
    for x in [sweep.range.lo, sweep.range.hi] {
        let mut r = raw.clone();
        r.set_value(&sweep.key, x)?;
        r.resolve()?;
    }
    let classify = |x: f64| -> cotc_core::Result<OrbitKind> {
        let mut r = raw.clone();
        r.set_value(&sweep.key, x).map_err(|e| Error::Usage(e.0))?;
        let s = r.resolve().map_err(|e| Error::Usage(e.0))?;
        let kind = probe.run(&model(&s)?, s.d, s.period, s.params.vs, s.ma)?.kind;
        log::info!("{}={x}: {kind:?}", sweep.key);
        Ok(kind)
    };
    let x = onset_search(sweep.range.lo, sweep.range.hi, ONSET_ITERATIONS, classify)?;
    let mut t = base_table(
        FormulaId::Simulation.id(),
        vec![Column::new(format!("{}_onset", sweep.key), sweep.column().unit)],
        Command::Onset,
        raw,
    );
    t.meta("search", format!("{}={}:{}", sweep.key, sweep.range.lo, sweep.range.hi))
        .meta("iterations", ONSET_ITERATIONS)
        .meta("cycles", probe.cycles)
        .meta("settle", probe.settle)
        .meta("perturbation", probe.perturbation);
    t.push(vec![x]);
    Ok(t)
}
