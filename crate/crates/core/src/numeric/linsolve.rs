use num_complex::Complex64;

use crate::numeric::{Matrix, NumericError};

/// Solves above this 1-norm condition number are reported as singular.
pub const CONDITION_LIMIT: f64 = 1e14;

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    norm1: f64,
}

impl Lu {
    pub fn factor(m: &Matrix) -> Result<Self, NumericError> {
        if !m.is_square() {
            return Err(NumericError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(NumericError::NonFinite("lu"));
        }
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(NumericError::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            norm1: m.norm1(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.col(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve_matrix(&Matrix::identity(self.dim()))
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dim()).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }

    /// 1-norm condition number. Exact rather than estimated, since N is tiny.
    pub fn condition(&self) -> f64 {
        let c = self.norm1 * self.inverse().norm1();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    fn checked(self) -> Result<Self, NumericError> {
        let condition = self.condition();
        if condition > CONDITION_LIMIT {
            return Err(NumericError::Singular { condition });
        }
        Ok(self)
    }
}

/// Solves `M x = v`, rejecting systems whose condition number exceeds [`CONDITION_LIMIT`].
pub fn solve_linear(m: &Matrix, v: &[f64]) -> Result<Vec<f64>, NumericError> {
    if v.len() != m.rows() {
        return Err(NumericError::Dimension(format!(
            "right-hand side has length {}, matrix has {} rows",
            v.len(),
            m.rows()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NumericError::NonFinite("solve_linear"));
    }
    Ok(Lu::factor(m)?.checked()?.solve(v))
}

pub fn solve_matrix(m: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    if b.rows() != m.rows() {
        return Err(NumericError::Dimension(format!(
            "right-hand side has {} rows, matrix has {}",
            b.rows(),
            m.rows()
        )));
    }
    Ok(Lu::factor(m)?.checked()?.solve_matrix(b))
}

pub fn determinant(m: &Matrix) -> Result<f64, NumericError> {
    match Lu::factor(m) {
        Ok(lu) => Ok(lu.determinant()),
        Err(NumericError::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Solves `(Re + j Im) x = b` through the equivalent real system of twice the size.
pub fn solve_complex(
    re: &Matrix,
    im: &Matrix,
    b: &[Complex64],
) -> Result<Vec<Complex64>, NumericError> {
    let n = re.rows();
    if !re.is_square() || im.rows() != n || im.cols() != n || b.len() != n {
        return Err(NumericError::Dimension(
            "complex solve needs matching square real and imaginary parts".into(),
        ));
    }
    let mut big = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = re[(i, j)];
            big[(i, j + n)] = -im[(i, j)];
            big[(i + n, j)] = im[(i, j)];
            big[(i + n, j + n)] = re[(i, j)];
        }
    }
    let rhs: Vec<f64> = b.iter().map(|c| c.re).chain(b.iter().map(|c| c.im)).collect();
    let x = solve_linear(&big, &rhs)?;
    Ok((0..n).map(|i| Complex64::new(x[i], x[i + n])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_returns_rhs() {
        let v = [1.5, -2.0, 3.25];
        assert_eq!(solve_linear(&Matrix::identity(3), &v).unwrap(), v.to_vec());
    }

    #[test]
    fn diagonal_solve() {
        let x = solve_linear(&Matrix::diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn singular_matrix_reports_condition() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0 + 1e-17]]).unwrap();
        match solve_linear(&m, &[1.0, 1.0]) {
            Err(NumericError::Singular { condition }) => assert!(condition > CONDITION_LIMIT),
            other => panic!("expected singularity error, got {other:?}"),
        }
        let near = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-15]]).unwrap();
        assert!(matches!(
            solve_linear(&near, &[1.0, 1.0]),
            Err(NumericError::Singular { .. })
        ));
    }

    #[test]
    fn determinant_with_pivoting() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(determinant(&m).unwrap(), -1.0);
        let z = Matrix::zeros(2, 2);
        assert_eq!(determinant(&z).unwrap(), 0.0);
    }

    #[test]
    fn complex_solve_matches_scalar_division() {
        let re = Matrix::diag(&[1.0, 2.0]);
        let im = Matrix::diag(&[1.0, -1.0]);
        let b = [Complex64::new(2.0, 0.0), Complex64::new(0.0, 5.0)];
        let x = solve_complex(&re, &im, &b).unwrap();
        let e0 = Complex64::new(2.0, 0.0) / Complex64::new(1.0, 1.0);
        let e1 = Complex64::new(0.0, 5.0) / Complex64::new(2.0, -1.0);
        assert!((x[0] - e0).norm() < 1e-14);
        assert!((x[1] - e1).norm() < 1e-14);
    }
}
