//! Harmonic-balance formulation: Fourier series of the switched voltage,
//! power-stage transfer functions, and the PDB/SNB conditions written as
//! sums over harmonics.
//!
//! Sums are truncated at `Nh` terms and accumulated in ascending `n`. The PDB
//! family decays only like `1/n`, so the reported value is the Cesàro mean of
//! the last 10% of partial sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{BuckParams, Scheme};

/// Default truncation order.
pub const DEFAULT_NH: usize = 2000;

const J: Complex64 = Complex64::new(0.0, 1.0);

fn check_timing(d: f64, period: f64) -> Result<()> {
    if !(d > 0.0 && period > 0.0 && d <= period && period.is_finite()) {
        return Err(invalid("d", format!("need 0 < d ≤ T, got d = {d}, T = {period}")));
    }
    Ok(())
}

fn check_nh(nh: usize) -> Result<()> {
    if nh == 0 {
        return Err(invalid("Nh", "truncation order must be at least 1"));
    }
    Ok(())
}

/// Fourier coefficient `cₙ` of the `T`-periodic switched voltage
/// (`vs` for `0 ≤ t < d`, zero otherwise). `c₀ = vs·d/T`.
pub fn square_wave_coeff(n: i64, vs: f64, d: f64, period: f64) -> Complex64 {
    if n == 0 {
        return Complex64::new(vs * d / period, 0.0);
    }
    let nf = n as f64;
    let ws = 2.0 * PI / period;
    (Complex64::new(1.0, 0.0) - (-J * nf * ws * d).exp()) * vs / (J * 2.0 * nf * PI)
}

/// Coefficient over the base period `2T` of a period-two switched voltage
/// whose second pulse starts at `T − δ`.
pub fn period2_coeff(n: i64, vs: f64, d: f64, period: f64, delta: f64) -> Complex64 {
    if n == 0 {
        return Complex64::new(vs * d / period, 0.0);
    }
    let nf = n as f64;
    let ws = 2.0 * PI / period;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let pulse = ((-J * nf * ws * d / 2.0).exp() - 1.0) * vs / (-J * 2.0 * nf * PI);
    pulse * (1.0 + sign * (J * nf * ws * delta / 2.0).exp())
}

fn denominator(s: Complex64, p: &BuckParams) -> (Complex64, Complex64) {
    let a2 = p.l * p.c * (1.0 + p.rc / p.r);
    let a1 = p.l / p.r + p.rc * p.c;
    (s * s * a2 + s * a1 + 1.0, s * 2.0 * a2 + a1)
}

/// Duty-to-output transfer function per volt of input,
/// `(s·Rc·C + 1) / (LC(1 + Rc/R)s² + (L/R + Rc·C)s + 1)`.
pub fn gv(s: Complex64, p: &BuckParams) -> Complex64 {
    (s * p.rc * p.c + 1.0) / denominator(s, p).0
}

/// Duty-to-inductor-current transfer function per volt of input.
pub fn gi(s: Complex64, p: &BuckParams) -> Complex64 {
    (s * (1.0 + p.rc / p.r) * p.c + 1.0 / p.r) / denominator(s, p).0
}

fn gv_prime(s: Complex64, p: &BuckParams) -> Complex64 {
    let (den, dden) = denominator(s, p);
    let num = s * p.rc * p.c + 1.0;
    (den * p.rc * p.c - num * dden) / (den * den)
}

fn gi_prime(s: Complex64, p: &BuckParams) -> Complex64 {
    let (den, dden) = denominator(s, p);
    let k = (1.0 + p.rc / p.r) * p.c;
    let num = s * k + 1.0 / p.r;
    (den * k - num * dden) / (den * den)
}

/// Feedback gain `G(s) = Gc(s)·(power-stage response)` with `Gc = −1`:
/// `−Gv` for V-COTC, `−Ri·Gi` for C-COTC, `−(Gv + Ri·Gi)` with the current ramp.
pub fn feedback_gain(s: Complex64, p: &BuckParams, scheme: Scheme) -> Complex64 {
    match scheme {
        Scheme::VCotc => -gv(s, p),
        Scheme::CCotc => -gi(s, p) * p.ri,
        Scheme::VCotcCurrentRamp => -(gv(s, p) + gi(s, p) * p.ri),
    }
}

/// Analytic `dG/ds`.
pub fn feedback_gain_prime(s: Complex64, p: &BuckParams, scheme: Scheme) -> Complex64 {
    match scheme {
        Scheme::VCotc => -gv_prime(s, p),
        Scheme::CCotc => -gi_prime(s, p) * p.ri,
        Scheme::VCotcCurrentRamp => -(gv_prime(s, p) + gi_prime(s, p) * p.ri),
    }
}

/// Loop gain `G(s)·vs / (ma·T)`. Unbounded without a ramp.
pub fn loop_gain(s: Complex64, p: &BuckParams, scheme: Scheme, ma: f64, period: f64) -> Result<Complex64> {
    if ma == 0.0 {
        return Err(Error::UnboundedLoopGain);
    }
    Ok(feedback_gain(s, p, scheme) * p.vs / (ma * period))
}

/// Steady-state feedback waveform `y⁰(t)` reconstructed from `Nh` harmonics.
/// With `Gc = −1` the `vc` term cancels.
pub fn y0_series(t: f64, p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Result<f64> {
    check_timing(d, period)?;
    let ws = 2.0 * PI / period;
    let gc0 = -1.0;
    let zero = Complex64::new(0.0, 0.0);
    let mut sum = zero;
    for n in 1..=nh as i64 {
        let w = n as f64 * ws;
        sum += square_wave_coeff(n, p.vs, d, period) * (J * w * t).exp() * feedback_gain(J * w, p, scheme);
    }
    let dc = feedback_gain(zero, p, scheme).re;
    Ok((1.0 + gc0) * p.vc - p.vs * (d / period) * dc - 2.0 * sum.re)
}

/// A truncated harmonic sum with its convergence history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicSum {
    /// Cesàro mean over the final 10% of partial sums.
    pub value: f64,
    /// Plain partial sum at `Nh`.
    pub partial: f64,
    pub nh: usize,
    /// `(Nh/4, Nh/2, Nh)` and the averaged value at each.
    pub convergence: [(usize, f64); 3],
}

fn cesaro_at(partials: &[f64], upto: usize) -> f64 {
    let upto = upto.clamp(1, partials.len());
    let k = (upto / 10).max(1);
    partials[upto - k..upto].iter().sum::<f64>() / k as f64
}

fn summarize(partials: Vec<f64>, scale: f64) -> HarmonicSum {
    let nh = partials.len();
    let at = |k: usize| (k.max(1), cesaro_at(&partials, k.max(1)) * scale);
    HarmonicSum {
        value: cesaro_at(&partials, nh) * scale,
        partial: partials[nh - 1] * scale,
        nh,
        convergence: [at(nh / 4), at(nh / 2), at(nh)],
    }
}

/// Partial sums of `Re Σ (e^{−jnπD} − 1)(−1)ⁿ G(jnωs/2)` for `n = 1..=Nh`.
fn pdb_partials(p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Vec<f64> {
    let half_ws = PI / period;
    let duty = d / period;
    let mut acc = 0.0;
    (1..=nh)
        .map(|n| {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let term = ((-J * nf * PI * duty).exp() - 1.0) * sign * feedback_gain(J * nf * half_ws, p, scheme);
            acc += term.re;
            acc
        })
        .collect()
}

/// Harmonic-balance S plot at `λ = −1`: the PDB ramp slope
/// `(vs/T) Re Σ (e^{−jnωs d/2} − 1)(−1)ⁿ G(jnωs/2)`.
/// `Nh = 1` gives the first-harmonic approximation.
pub fn hb_pdb_splot(p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Result<HarmonicSum> {
    check_timing(d, period)?;
    check_nh(nh)?;
    Ok(summarize(pdb_partials(p, scheme, d, period, nh), p.vs / period))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LoopGainForm {
    /// Two-sided sum; PDB where it equals 2.
    Exact,
    /// `Re[(1 − e^{−jωs d/2}) T(jωs/2)]`; PDB where it equals 1.
    FirstHarmonic,
}

impl LoopGainForm {
    pub fn boundary(self) -> f64 {
        match self {
            LoopGainForm::Exact => 2.0,
            LoopGainForm::FirstHarmonic => 1.0,
        }
    }
}

/// Loop-gain PDB condition value.
pub fn loop_gain_pdb(
    p: &BuckParams,
    scheme: Scheme,
    ma: f64,
    d: f64,
    period: f64,
    nh: usize,
    form: LoopGainForm,
) -> Result<f64> {
    check_timing(d, period)?;
    check_nh(nh)?;
    if ma == 0.0 {
        return Err(Error::UnboundedLoopGain);
    }
    let gain = p.vs / (ma * period);
    match form {
        LoopGainForm::Exact => {
            let partials = pdb_partials(p, scheme, d, period, nh);
            Ok(2.0 * gain * cesaro_at(&partials, nh))
        }
        LoopGainForm::FirstHarmonic => {
            let s = J * PI / period;
            let t = loop_gain(s, p, scheme, ma, period)?;
            Ok(((1.0 - (-J * PI * d / period).exp()) * t).re)
        }
    }
}

fn cesaro_complex(partials: &[Complex64]) -> Complex64 {
    let k = (partials.len() / 10).max(1);
    partials[partials.len() - k..].iter().sum::<Complex64>() / k as f64
}

/// Two-sided sum `Σ_{n=−Nh}^{Nh} (e^{−jnπD} − 1)(−1)ⁿ F(jnωs/2)`.
fn two_sided<F>(d: f64, period: f64, nh: usize, f: F) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let duty = d / period;
    let half_ws = PI / period;
    let mut acc = Complex64::new(0.0, 0.0);
    let partials: Vec<Complex64> = (1..=nh as i64)
        .map(|n| {
            for k in [n, -n] {
                let kf = k as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += ((-J * kf * PI * duty).exp() - 1.0) * sign * f(J * kf * half_ws);
            }
            acc
        })
        .collect();
    cesaro_complex(&partials)
}

/// L1 plot over the loop gain; PDB where it equals 2. The imaginary part is
/// returned as a realness check.
pub fn l1_plot(p: &BuckParams, scheme: Scheme, ma: f64, d: f64, period: f64, nh: usize) -> Result<Complex64> {
    check_timing(d, period)?;
    check_nh(nh)?;
    if ma == 0.0 {
        return Err(Error::UnboundedLoopGain);
    }
    let k = p.vs / (ma * period);
    Ok(two_sided(d, period, nh, |s| feedback_gain(s, p, scheme) * k))
}

/// L2 plot over `G`; PDB where it equals `2T·ma/vs`.
pub fn l2_plot(p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Result<Complex64> {
    check_timing(d, period)?;
    check_nh(nh)?;
    Ok(two_sided(d, period, nh, |s| feedback_gain(s, p, scheme)))
}

/// One-sided H plot; PDB where `Re H = T·ma/vs`.
pub fn h_plot(p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Result<Complex64> {
    check_timing(d, period)?;
    check_nh(nh)?;
    let duty = d / period;
    let half_ws = PI / period;
    let mut acc = Complex64::new(0.0, 0.0);
    let partials: Vec<Complex64> = (1..=nh)
        .map(|n| {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += ((-J * nf * PI * duty).exp() - 1.0) * sign * feedback_gain(J * nf * half_ws, p, scheme);
            acc
        })
        .collect();
    Ok(cesaro_complex(&partials))
}

/// Harmonic-balance SNB condition: the slope `dy⁰(T)/dT / vs`, compared
/// against `ma/vs`. SNB needs `ma/vs` below this value.
pub fn hb_snb_condition(p: &BuckParams, scheme: Scheme, d: f64, period: f64, nh: usize) -> Result<HarmonicSum> {
    check_timing(d, period)?;
    check_nh(nh)?;
    let ws = 2.0 * PI / period;
    let t2 = period * period;
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = d / t2 * feedback_gain(zero, p, scheme).re;
    let partials = (1..=nh)
        .map(|n| {
            let s = J * n as f64 * ws;
            let e = (-s * d).exp();
            let term = e * feedback_gain(s, p, scheme) * (d / t2)
                + (1.0 - e) * feedback_gain_prime(s, p, scheme) / t2;
            acc += 2.0 * term.re;
            acc
        })
        .collect();
    Ok(summarize(partials, 1.0))
}

/// Residuals of the two trigonometric series behind the V-COTC harmonic
/// boundary, each Cesàro-averaged over `n_terms`:
/// `Σ (1 − cos πkD)(−1)ᵏ/k² + π²D²/4` and `Σ sin(πkD)(−1)ᵏ/k + πD/2`.
pub fn series_identities_check(duty: f64, n_terms: usize) -> Result<(f64, f64)> {
    if !(duty > 0.0 && duty < 1.0) {
        return Err(invalid("D", format!("duty must lie in (0, 1), got {duty}")));
    }
    check_nh(n_terms)?;
    let (mut a, mut b) = (0.0, 0.0);
    let mut pa = Vec::with_capacity(n_terms);
    let mut pb = Vec::with_capacity(n_terms);
    for k in 1..=n_terms {
        let kf = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        a += (1.0 - (PI * kf * duty).cos()) * sign / (kf * kf);
        b += (PI * kf * duty).sin() * sign / kf;
        pa.push(a);
        pb.push(b);
    }
    let ra = cesaro_at(&pa, n_terms) + PI * PI * duty * duty / 4.0;
    let rb = cesaro_at(&pb, n_terms) + PI * duty / 2.0;
    Ok((ra, rb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_wave_coefficients() {
        assert_eq!(square_wave_coeff(0, 5.0, 1.2e-6, 3e-6).re, 5.0 * 0.4);
        assert!(square_wave_coeff(2, 1.0, 0.5, 1.0).norm() < 1e-15);
        assert!(square_wave_coeff(1, 1.0, 0.5, 1.0).norm() > 0.3);
    }

    #[test]
    fn square_wave_reconstruction() {
        let (vs, d, t, nh) = (5.0, 0.4, 1.0, 500);
        let mut sq = 0.0;
        let mut count = 0;
        for i in 0..1000 {
            let time = (i as f64 + 0.5) / 1000.0;
            if (time - d).abs() < 0.02 || time < 0.02 || time > 0.98 {
                continue;
            }
            let mut v = square_wave_coeff(0, vs, d, t).re;
            for n in 1..=nh as i64 {
                v += 2.0 * (square_wave_coeff(n, vs, d, t) * (J * n as f64 * 2.0 * PI * time).exp()).re;
            }
            let want = if time < d { vs } else { 0.0 };
            sq += (v - want).powi(2);
            count += 1;
        }
        let rms = (sq / count as f64).sqrt();
        assert!(rms < 0.02 * vs, "rms {rms}");
    }

    #[test]
    fn period_two_coefficients() {
        let (vs, d, t) = (1.0, 0.3, 1.0);
        for n in [1i64, 3, 5] {
            assert!(period2_coeff(n, vs, d, t, 0.0).norm() < 1e-15);
        }
        for k in [1i64, 2, 3] {
            let folded = period2_coeff(2 * k, vs, d, t, 0.0);
            assert!((folded - square_wave_coeff(k, vs, d, t)).norm() < 1e-14);
        }
        assert_eq!(period2_coeff(0, vs, d, t, 0.1).re, vs * d / t);
        // δ = 0.1T against a direct two-pulse oracle over [0, 2T)
        let delta = 0.1;
        let mut sq = 0.0;
        let mut count = 0;
        for i in 0..2000 {
            let time = 2.0 * (i as f64 + 0.5) / 2000.0;
            let on = time < d || (time >= t - delta && time < t - delta + d);
            let edges = [0.0, d, t - delta, t - delta + d, 2.0];
            if edges.iter().any(|e| (time - e).abs() < 0.03) {
                continue;
            }
            let mut v = period2_coeff(0, vs, d, t, delta).re;
            for n in 1..=1000i64 {
                v += 2.0 * (period2_coeff(n, vs, d, t, delta) * (J * n as f64 * PI * time).exp()).re;
            }
            sq += (v - if on { vs } else { 0.0 }).powi(2);
            count += 1;
        }
        assert!((sq / count as f64).sqrt() < 0.02);
    }

    #[test]
    fn transfer_function_properties() {
        let p = fixtures::example1();
        assert!((gv(c(0.0, 0.0), &p) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((gi(c(0.0, 0.0), &p) - c(1.0 / p.r, 0.0)).norm() < 1e-12);
        assert!(gv(c(0.0, 1e12), &p).norm() < 1e-3);
        assert!(gv(c(-1.0 / (p.rc * p.c), 0.0), &p).norm() < 1e-12);
        let zi = -1.0 / ((1.0 + p.rc / p.r) * p.r * p.c);
        assert!(gi(c(zi, 0.0), &p).norm() < 1e-9);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = fixtures::example8();
        for scheme in Scheme::ALL {
            let s = c(1.3e4, 2.2e5);
            let h = 1.0;
            let fd = (feedback_gain(s + h, &p, scheme) - feedback_gain(s - h, &p, scheme)) / (2.0 * h);
            let an = feedback_gain_prime(s, &p, scheme);
            assert!((fd - an).norm() < 1e-5 * an.norm(), "{scheme}: {fd} vs {an}");
        }
    }

    #[test]
    fn loop_gain_scaling() {
        let p = fixtures::example1();
        let s = c(0.0, 1e6);
        let t = loop_gain(s, &p, Scheme::VCotc, 1000.0, 3e-6).unwrap();
        let g = t * (1000.0 * 3e-6) / p.vs;
        assert!((g - feedback_gain(s, &p, Scheme::VCotc)).norm() < 1e-12 * g.norm());
        assert!(matches!(
            loop_gain(s, &p, Scheme::VCotc, 0.0, 3e-6),
            Err(Error::UnboundedLoopGain)
        ));
        let a = loop_gain_pdb(&p, Scheme::VCotc, 1000.0, 1.2e-6, 3e-6, 500, LoopGainForm::Exact).unwrap();
        let b = loop_gain_pdb(&p, Scheme::VCotc, 2000.0, 1.2e-6, 3e-6, 500, LoopGainForm::Exact).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn vanishing_on_time() {
        let p = fixtures::example1();
        let v = hb_pdb_splot(&p, Scheme::VCotc, 1e-16, 3e-6, 200).unwrap();
        assert!(v.value.abs() < 1e-4);
        let s = hb_snb_condition(&p, Scheme::VCotc, 1e-16, 3e-6, 200).unwrap();
        assert!(s.value.abs() < 1e-3);
    }

    #[test]
    fn periodic_waveform() {
        let p = fixtures::example1();
        let a = y0_series(0.7e-6, &p, Scheme::VCotc, 1.2e-6, 3e-6, 100).unwrap();
        let b = y0_series(3.7e-6, &p, Scheme::VCotc, 1.2e-6, 3e-6, 100).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn series_identities() {
        for duty in [0.4, 0.5] {
            let (a, b) = series_identities_check(duty, 100_000).unwrap();
            assert!(a.abs() < 1e-4 && b.abs() < 1e-4, "{duty}: {a} {b}");
        }
        let (a, b) = series_identities_check(1e-9, 1000).unwrap();
        assert!(a.abs() < 1e-6 && b.abs() < 1e-6);
    }

    #[test]
    fn voltage_mode_snb_is_negative() {
        let p = fixtures::example1();
        let v = hb_snb_condition(&p, Scheme::VCotc, 1.2e-6, 3e-6, 2000).unwrap();
        assert!(v.value < 0.0);
    }
}
