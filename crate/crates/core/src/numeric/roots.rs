//! Bracketing scalar root finder.
//!
//! Illinois-modified regula falsi, with a forced bisection step whenever two
//! consecutive steps fail to halve the bracket. Converges for any continuous
//! function with a sign change, including the kinked switching functions met
//! in the simulator, and is fully deterministic.

use crate::numeric::NumericError;

const MAX_ITERATIONS: usize = 500;

/// Relative bracket width used by [`find_root_default`].
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-12;

pub fn find_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    try_find_root(|x| Ok::<f64, NumericError>(f(x)), lo, hi, tol)
}

/// [`find_root`] with the tolerance set to `1e-12·|hi − lo|`.
pub fn find_root_default<F>(f: F, lo: f64, hi: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    find_root(f, lo, hi, DEFAULT_RELATIVE_TOL * (hi - lo).abs())
}

/// Root finder for fallible functions. Errors from `f` are passed through.
pub fn try_find_root<F, E>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericError>,
{
    if !(lo.is_finite() && hi.is_finite()) || !(tol > 0.0) {
        return Err(NumericError::NonFinite("find_root bracket").into());
    }
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(NumericError::Bracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        }
        .into());
    }
    // which end was retained on the previous step: -1 = a, +1 = b
    let mut retained = 0i8;
    let mut width_before = b - a;
    let mut slow_steps = 0;
    for _ in 0..MAX_ITERATIONS {
        if b - a <= tol {
            break;
        }
        let c = if slow_steps >= 2 {
            slow_steps = 0;
            0.5 * (a + b)
        } else {
            let c = (a * fb - b * fa) / (fb - fa);
            if c > a && c < b {
                c
            } else {
                0.5 * (a + b)
            }
        };
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if !fc.is_finite() {
            return Err(NumericError::NonFinite("find_root function value").into());
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if retained == 1 {
                fb *= 0.5;
            }
            retained = 1;
        } else {
            b = c;
            fb = fc;
            if retained == -1 {
                fa *= 0.5;
            }
            retained = -1;
        }
        let width = b - a;
        if width > 0.5 * width_before {
            slow_steps += 1;
        } else {
            slow_steps = 0;
            width_before = width;
        }
    }
    // recompute the unscaled values to pick the better endpoint
    let ga = f(a)?;
    let gb = f(b)?;
    Ok(if ga.abs() <= gb.abs() { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linear_root() {
        let r = find_root(|x| x - 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn square_root_of_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sine_crossing_is_pi() {
        let r = find_root_default(f64::sin, 3.0, 4.0).unwrap();
        assert!((r - PI).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change_is_a_bracket_error() {
        let r = find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10);
        assert!(matches!(r, Err(NumericError::Bracket { .. })));
    }

    #[test]
    fn reversed_bracket_and_endpoint_roots() {
        let r = find_root(|x| x - 0.25, 1.0, 0.0, 1e-14).unwrap();
        assert!((r - 0.25).abs() < 1e-14);
        assert_eq!(find_root(|x| x, 0.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn kinked_function_converges() {
        let f = |x: f64| if x < 0.3 { 1.0 - x } else { -(x - 0.3) * 1e6 + 0.7 };
        let r = find_root(f, 0.0, 1.0, 1e-14).unwrap();
        assert!((r - (0.3 + 0.7e-6)).abs() < 1e-13);
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| x.powi(3) - 2.0 * x - 5.0;
        let a = find_root(f, 2.0, 3.0, 1e-15).unwrap();
        let b = find_root(f, 2.0, 3.0, 1e-15).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
