//! Flat `key = value` converter configuration. SI units only; `#` starts a
//! comment. Later assignments override earlier ones, and `--set` flags are
//! applied after the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use cotc_core::sweep::Range;
use cotc_core::{BuckParams, Scheme};

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Domain {
    Positive,
    NonNegative,
    Any,
    Duty,
    Count,
    Range,
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub unit: &'static str,
    domain: Domain,
    pub help: &'static str,
}

const fn key(name: &'static str, unit: &'static str, domain: Domain, help: &'static str) -> Key {
    Key { name, unit, domain, help }
}

/// Every accepted key except `scheme`.
pub const KEYS: &[Key] = &[
    key("R", "ohms", Domain::Positive, "load resistance"),
    key("L", "henries", Domain::Positive, "inductance"),
    key("C", "farads", Domain::Positive, "output capacitance"),
    key("Rc", "ohms", Domain::NonNegative, "capacitor ESR"),
    key("Ri", "ohms", Domain::NonNegative, "current-sense gain; required for C_COTC and V_COTC_CURRENT_RAMP"),
    key("vs", "volts", Domain::Positive, "source voltage; derived as vo/D when vo is given"),
    key("vc", "volts", Domain::Any, "control voltage (default 0)"),
    key("vo", "volts", Domain::Positive, "output voltage held fixed when D is swept"),
    key("d", "seconds", Domain::Positive, "on-time"),
    key("T", "seconds", Domain::Positive, "switching period; give T or D, not both"),
    key("D", "dimensionless", Domain::Duty, "duty cycle d/T; give T or D, not both"),
    key("ma", "volts_per_second", Domain::Any, "ramp slope (default 0)"),
    key("lambda", "dimensionless", Domain::Any, "S-plot evaluation point (default -1)"),
    key("Nh", "count", Domain::Count, "harmonic truncation order (default 2000)"),
    key("ncycles", "count", Domain::Count, "simulated cycles (default 1000; onset probes 20000)"),
    key("settle", "count", Domain::Count, "cycles dropped before orbit classification (default: all but the last 64)"),
    key("perturbation", "dimensionless", Domain::Any, "relative start perturbation for simulation (default 1e-6)"),
    key("D_range", "lo:hi:n", Domain::Range, "duty range for onset searches when ma_range is unset"),
    key("lambda_range", "lo:hi:n", Domain::Range, "pole-locus range (default -2:2:401)"),
    key("ma_range", "lo:hi:n", Domain::Range, "ramp range for onset searches"),
    key("Ri_range", "lo:hi:n", Domain::Range, "sense-resistance search range (default 1e-6:0.1:2)"),
];

pub fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

pub fn parse_range(text: &str) -> Result<Range, ConfigError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| ConfigError(format!("bad range bound {s:?} in {text:?}")));
    match parts.as_slice() {
        [lo, hi, n] => {
            let n = n.parse::<usize>().map_err(|_| ConfigError(format!("bad point count {n:?} in {text:?}")))?;
            Range::new(num(lo)?, num(hi)?, n).map_err(|e| ConfigError(e.to_string()))
        }
        [lo, hi] => Range::new(num(lo)?, num(hi)?, 2).map_err(|e| ConfigError(e.to_string())),
        _ => fail(format!("range {text:?} must look like lo:hi:n")),
    }
}

/// Raw configuration: validated values per key, not yet resolved.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    scheme: Option<Scheme>,
    values: BTreeMap<&'static str, f64>,
    ranges: BTreeMap<&'static str, Range>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| ConfigError(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies `KEY=VALUE` (spaces around `=` allowed).
    pub fn apply_assignment(&mut self, text: &str) -> Result<(), ConfigError> {
        let Some((k, v)) = text.split_once('=') else {
            return fail(format!("expected KEY=VALUE, got {text:?}"));
        };
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        if name == "scheme" {
            let scheme = Scheme::from_str(value).map_err(|_| {
                ConfigError(format!("scheme must be V_COTC, C_COTC or V_COTC_CURRENT_RAMP, got {value:?}"))
            })?;
            self.scheme = Some(scheme);
            return Ok(());
        }
        let Some(k) = lookup(name) else {
            return fail(format!("unknown key {name:?}"));
        };
        if k.domain == Domain::Range {
            self.ranges.insert(k.name, parse_range(value)?);
            return Ok(());
        }
        let x: f64 = value
            .parse()
            .map_err(|_| ConfigError(format!("{name} expects a number in {}, got {value:?}", k.unit)))?;
        self.set_number(k, x)
    }

    pub fn set_value(&mut self, name: &str, x: f64) -> Result<(), ConfigError> {
        match lookup(name) {
            Some(k) if k.domain != Domain::Range => {
                self.set_number(k, x)?;
                self.drop_alternative(name);
                Ok(())
            }
            _ => fail(format!("{name:?} is not a numeric key")),
        }
    }

    fn set_number(&mut self, k: &'static Key, x: f64) -> Result<(), ConfigError> {
        let ok = x.is_finite()
            && match k.domain {
                Domain::Positive => x > 0.0,
                Domain::NonNegative => x >= 0.0,
                Domain::Any => true,
                Domain::Duty => x > 0.0 && x <= 1.0,
                Domain::Count => x >= 1.0 && x.fract() == 0.0,
                Domain::Range => false,
            };
        if !ok {
            let want = match k.domain {
                Domain::Positive => "a positive value",
                Domain::NonNegative => "a non-negative value",
                Domain::Duty => "a duty in (0, 1]",
                Domain::Count => "a positive integer",
                _ => "a finite value",
            };
            return fail(format!("{} must be {want} in {}, got {x}", k.name, k.unit));
        }
        self.values.insert(k.name, x);
        Ok(())
    }

    /// Like [`RawConfig::apply_assignment`], but an override of `T` or `D`
    /// replaces the other one instead of conflicting with it.
    pub fn apply_override(&mut self, text: &str) -> Result<(), ConfigError> {
        self.apply_assignment(text)?;
        if let Some((k, _)) = text.split_once('=') {
            self.drop_alternative(k.trim());
        }
        Ok(())
    }

    fn drop_alternative(&mut self, name: &str) {
        match name {
            "T" => self.values.remove("D"),
            "D" => self.values.remove("T"),
            _ => None,
        };
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn require(&self, name: &'static str) -> Result<f64, ConfigError> {
        self.get(name).ok_or_else(|| {
            let unit = lookup(name).map_or("", |k| k.unit);
            ConfigError(format!("missing required key {name} ({unit})"))
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.unwrap_or(Scheme::VCotc)
    }

    /// The keys that were set, in canonical order, for table metadata.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![("scheme".to_string(), self.scheme().to_string())];
        for k in KEYS {
            if let Some(v) = self.values.get(k.name) {
                out.push((k.name.to_string(), v.to_string()));
            } else if let Some(r) = self.ranges.get(k.name) {
                out.push((k.name.to_string(), format!("{}:{}:{}", r.lo, r.hi, r.points)));
            }
        }
        out
    }

    pub fn resolve(&self) -> Result<Setup, ConfigError> {
        self.resolve_for(true)
    }

    /// `need_ri = false` skips the sense-resistance requirement, for
    /// searches where `Ri` is the unknown.
    pub fn resolve_for(&self, need_ri: bool) -> Result<Setup, ConfigError> {
        let scheme = self.scheme();
        let d = self.require("d")?;
        let period = match (self.get("T"), self.get("D")) {
            (Some(t), None) => t,
            (None, Some(duty)) => d / duty,
            (None, None) => return fail("give exactly one of T (seconds) or D (dimensionless); neither is set"),
            (Some(_), Some(_)) => return fail("give exactly one of T (seconds) or D (dimensionless), not both"),
        };
        if d > period {
            return fail(format!("on-time d = {d} s exceeds the period T = {period} s"));
        }
        let vs = match (self.get("vs"), self.get("vo")) {
            (Some(vs), None) => vs,
            (None, Some(vo)) => vo * period / d,
            (Some(_), Some(_)) => return fail("give vs (volts) or vo (volts), not both"),
            (None, None) => return fail("missing required key vs (volts)"),
        };
        let ri = match (scheme, self.get("Ri")) {
            (Scheme::VCotc, ri) => ri.unwrap_or(0.0),
            (_, Some(ri)) if ri > 0.0 => ri,
            (_, ri) if !need_ri => ri.unwrap_or(0.0),
            (s, _) => return fail(format!("scheme {s} needs a positive Ri (ohms)")),
        };
        let params = BuckParams {
            r: self.require("R")?,
            l: self.require("L")?,
            c: self.require("C")?,
            rc: self.require("Rc")?,
            ri,
            vs,
            vc: self.get("vc").unwrap_or(0.0),
        };
        params.validate().map_err(|e| ConfigError(e.to_string()))?;
        let count = |name, default: usize| self.get(name).map_or(default, |v| v as usize);
        Ok(Setup {
            scheme,
            params,
            d,
            period,
            ma: self.get("ma").unwrap_or(0.0),
            lambda: self.get("lambda").unwrap_or(-1.0),
            nh: count("Nh", cotc_core::harmonic::DEFAULT_NH),
            ncycles: self.get("ncycles").map(|v| v as usize),
            settle: self.get("settle").map(|v| v as usize),
            perturbation: self.get("perturbation").unwrap_or(1e-6),
            vc_given: self.values.contains_key("vc"),
            d_range: self.ranges.get("D_range").copied(),
            lambda_range: self.ranges.get("lambda_range").copied(),
            ma_range: self.ranges.get("ma_range").copied(),
            ri_range: self.ranges.get("Ri_range").copied(),
        })
    }
}

/// A validated configuration with the period resolved.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scheme: Scheme,
    pub params: BuckParams,
    pub d: f64,
    pub period: f64,
    pub ma: f64,
    pub lambda: f64,
    pub nh: usize,
    pub ncycles: Option<usize>,
    pub settle: Option<usize>,
    pub perturbation: f64,
    pub vc_given: bool,
    pub d_range: Option<Range>,
    pub lambda_range: Option<Range>,
    pub ma_range: Option<Range>,
    pub ri_range: Option<Range>,
}

impl Setup {
    pub fn duty(&self) -> f64 {
        self.d / self.period
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = "scheme = V_COTC\nR = 0.5\nL = 2e-6\nC = 20e-6 # farads\nRc = 0.02\nd = 1.2e-6\nT = 3e-6\nvs = 5\n";

    #[test]
    fn parses_a_full_config() {
        let mut raw = RawConfig::default();
        raw.apply_text(EXAMPLE1).unwrap();
        let s = raw.resolve().unwrap();
        assert_eq!(s.params.r, 0.5);
        assert_eq!(s.params.c, 2e-5);
        assert_eq!(s.period, 3e-6);
        assert_eq!(s.params.ri, 0.0);
    }

    #[test]
    fn duty_replaces_period() {
        let mut raw = RawConfig::default();
        raw.apply_text(EXAMPLE1).unwrap();
        raw.apply_override("D=0.5").unwrap();
        assert!((raw.resolve().unwrap().period - 2.4e-6).abs() < 1e-18);
    }

    #[test]
    fn constant_output_family() {
        let mut raw = RawConfig::default();
        raw.apply_text(&EXAMPLE1.replace("vs = 5", "vo = 2")).unwrap();
        let s = raw.resolve().unwrap();
        assert!((s.params.vs - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejections_name_the_key() {
        let mut raw = RawConfig::default();
        assert!(raw.set("Q", "1").unwrap_err().0.contains("Q"));
        assert!(raw.set("R", "-1").unwrap_err().0.contains("ohms"));
        assert!(raw.set("L", "abc").unwrap_err().0.contains("henries"));
        raw.apply_text(EXAMPLE1).unwrap();
        raw.set("scheme", "C_COTC").unwrap();
        assert!(raw.resolve().unwrap_err().0.contains("Ri"));
    }

    #[test]
    fn both_period_and_duty_in_a_file_are_rejected() {
        let mut raw = RawConfig::default();
        raw.apply_text(EXAMPLE1).unwrap();
        raw.apply_text("D = 0.4").unwrap();
        assert!(raw.resolve().unwrap_err().0.contains("not both"));
    }

    #[test]
    fn ranges() {
        let r = parse_range("0.2:1:200").unwrap();
        assert_eq!((r.lo, r.hi, r.points), (0.2, 1.0, 200));
        assert!(parse_range("1:2:x").is_err());
    }
}
