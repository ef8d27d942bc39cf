//! Matrix exponential by scaling and squaring with a diagonal Padé core.
//!
//! The Padé degree is picked from {3, 5, 7, 9, 13} by comparing `‖A t‖₁`
//! with the backward-error thresholds θₘ of Higham (2005). Above θ₁₃ the
//! argument is halved `s = ⌈log₂(‖A t‖₁ / θ₁₃)⌉` times, the degree-13
//! approximant is evaluated, and the result is squared `s` times.

use crate::numeric::linsolve::Lu;
use crate::numeric::{Matrix, NumericError};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Returns `e^{A t}`. `t` may be zero or negative.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix, NumericError> {
    if !a.is_square() {
        return Err(NumericError::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() || !t.is_finite() {
        return Err(NumericError::NonFinite("expm"));
    }
    Ok(expm_unchecked(&a.scale(t)))
}

fn expm_unchecked(x: &Matrix) -> Matrix {
    let n = x.rows();
    let norm = x.norm1();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            return pade_low(x, coeffs);
        }
    }
    let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = x.scale(0.5f64.powi(squarings));
    let mut r = pade_13(&scaled);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Matrix {
    let p = v + u;
    let q = v - u;
    // q is well conditioned for arguments inside the θ bounds
    Lu::factor(&q)
        .expect("Padé denominator is nonsingular inside the θ bounds")
        .solve_matrix(&p)
}

fn pade_low(x: &Matrix, b: &[f64]) -> Matrix {
    let n = x.rows();
    let ident = Matrix::identity(n);
    let x2 = x * x;
    let mut power = ident.clone();
    let mut u_sum = Matrix::zeros(n, n);
    let mut v_sum = Matrix::zeros(n, n);
    for k in 0..(b.len() / 2) {
        v_sum = &v_sum + &power.scale(b[2 * k]);
        u_sum = &u_sum + &power.scale(b[2 * k + 1]);
        power = &power * &x2;
    }
    let u = x * &u_sum;
    pade_solve(&u, &v_sum)
}

fn pade_13(x: &Matrix) -> Matrix {
    let b = &PADE_13;
    let n = x.rows();
    let ident = Matrix::identity(n);
    let x2 = x * x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let inner_u = &(&x6.scale(b[13]) + &x4.scale(b[11])) + &x2.scale(b[9]);
    let u_sum = &(&(&(&(&x6 * &inner_u) + &x6.scale(b[7])) + &x4.scale(b[5])) + &x2.scale(b[3]))
        + &ident.scale(b[1]);
    let u = x * &u_sum;
    let inner_v = &(&x6.scale(b[12]) + &x4.scale(b[10])) + &x2.scale(b[8]);
    let v = &(&(&(&(&x6 * &inner_v) + &x6.scale(b[6])) + &x4.scale(b[4])) + &x2.scale(b[2]))
        + &ident.scale(b[0]);
    pade_solve(&u, &v)
}

/// Returns `∫₀ᵗ e^{Aσ} dσ · B` without inverting `A`.
///
/// The block matrix `[[A, B], [0, 0]]` is exponentiated and the top-right
/// block read off, so singular `A` needs no special handling.
pub fn expm_integral(a: &Matrix, b: &Matrix, t: f64) -> Result<Matrix, NumericError> {
    if !a.is_square() || b.rows() != a.rows() {
        return Err(NumericError::Dimension(format!(
            "expm_integral needs square A and B with matching rows, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if !a.is_finite() || !b.is_finite() || !t.is_finite() {
        return Err(NumericError::NonFinite("expm_integral"));
    }
    let n = a.rows();
    let k = b.cols();
    let mut aug = Matrix::zeros(n + k, n + k);
    aug.set_block(0, 0, a);
    aug.set_block(0, n, b);
    let e = expm_unchecked(&aug.scale(t));
    Ok(e.block(0, n, n, k))
}

/// `e^{At}` and `∫₀ᵗ e^{Aσ} dσ · b` for a single column `b`, from one exponential.
pub fn expm_with_forcing(
    a: &Matrix,
    b: &[f64],
    t: f64,
) -> Result<(Matrix, Vec<f64>), NumericError> {
    if !a.is_square() || b.len() != a.rows() {
        return Err(NumericError::Dimension(format!(
            "forcing vector of length {} does not match {}x{} matrix",
            b.len(),
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) || !t.is_finite() {
        return Err(NumericError::NonFinite("expm_with_forcing"));
    }
    let n = a.rows();
    let mut aug = Matrix::zeros(n + 1, n + 1);
    aug.set_block(0, 0, a);
    for (i, v) in b.iter().enumerate() {
        aug[(i, n)] = *v;
    }
    let full = expm_unchecked(&aug.scale(t));
    Ok((full.block(0, 0, n, n), full.block(0, n, n, 1).col(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn taylor_oracle(a: &Matrix, t: f64, terms: usize) -> Matrix {
        // halve until the series has no cancellation, then square back
        let mut halvings = 0;
        while a.norm1() * t.abs() / f64::from(1 << halvings) > 0.5 {
            halvings += 1;
        }
        let x = a.scale(t / f64::from(1 << halvings));
        let mut term = Matrix::identity(a.rows());
        let mut sum = term.clone();
        for k in 1..terms {
            term = (&term * &x).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..halvings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(e, Matrix::identity(2));
    }

    #[test]
    fn diagonal_case() {
        let (a, b, t) = (-3.0, 0.7, 1.3);
        let e = expm(&Matrix::diag(&[a, b]), t).unwrap();
        assert!((e[(0, 0)] - (a * t).exp()).abs() < 1e-14);
        assert!((e[(1, 1)] / (b * t).exp() - 1.0).abs() < 1e-13);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn quarter_rotation_matches_taylor_oracle() {
        let a = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        let e = expm(&a, PI / 2.0).unwrap();
        let oracle = taylor_oracle(&a, PI / 2.0, 50);
        assert!(e.max_abs_diff(&oracle) < 1e-14);
        let expected = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        assert!(e.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn every_pade_degree_matches_taylor() {
        let base = Matrix::from_rows(&[&[-0.3, 1.1, 0.2], &[0.4, -0.9, 0.5], &[0.0, 0.7, -1.4]])
            .unwrap();
        for scale in [0.005, 0.1, 0.5, 1.5, 3.0, 8.0] {
            let e = expm(&base, scale).unwrap();
            let oracle = taylor_oracle(&base, scale, 80);
            let rel = e.max_abs_diff(&oracle) / oracle.norm1();
            assert!(rel < 1e-13, "scale {scale}: rel err {rel}");
        }
    }

    #[test]
    fn non_square_and_non_finite_rejected() {
        assert!(matches!(
            expm(&Matrix::zeros(2, 3), 1.0),
            Err(NumericError::Dimension(_))
        ));
        let bad = Matrix::diag(&[f64::NAN, 1.0]);
        assert!(matches!(expm(&bad, 1.0), Err(NumericError::NonFinite(_))));
        assert!(matches!(
            expm(&Matrix::identity(2), f64::INFINITY),
            Err(NumericError::NonFinite(_))
        ));
    }

    #[test]
    fn integral_of_zero_matrix_is_t_times_b() {
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let r = expm_integral(&Matrix::zeros(2, 2), &b, 0.25).unwrap();
        assert!(r.max_abs_diff(&b.scale(0.25)) < 1e-15);
    }

    #[test]
    fn scalar_integral_matches_closed_form() {
        for a in [-2.0, -1e-3, 0.5, 3.0] {
            let t = 0.8;
            let r = expm_integral(&Matrix::diag(&[a]), &Matrix::column(&[1.0]), t).unwrap();
            let exact = ((a * t).exp() - 1.0) / a;
            assert!((r[(0, 0)] - exact).abs() < 1e-14 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn integral_dimension_mismatch() {
        let r = expm_integral(&Matrix::identity(2), &Matrix::zeros(3, 1), 1.0);
        assert!(matches!(r, Err(NumericError::Dimension(_))));
    }

    #[test]
    fn forcing_helper_agrees_with_separate_calls() {
        let a = Matrix::from_rows(&[&[-1.0, 2.0], &[-3.0, -0.5]]).unwrap();
        let b = [0.3, -1.2];
        let (e, w) = expm_with_forcing(&a, &b, 0.7).unwrap();
        assert!(e.max_abs_diff(&expm(&a, 0.7).unwrap()) < 1e-14);
        let w2 = expm_integral(&a, &Matrix::column(&b), 0.7).unwrap().col(0);
        assert!((w[0] - w2[0]).abs() < 1e-15 && (w[1] - w2[1]).abs() < 1e-15);
    }
}
