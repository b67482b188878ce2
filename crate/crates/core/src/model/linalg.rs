//! The handful of dense factorizations the solvers need.

use num_complex::Complex64;

use super::matrix::{inner, ComplexMatrix};
use super::ModelError;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(ModelError::ShapeMismatch {
            expected: (n, n),
            found: a.shape(),
        });
    }
    let scale = a.as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if a.hermitian_defect() > HERMITIAN_TOL * scale {
        return Err(ModelError::NotHermitian);
    }
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(ModelError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn hermitian_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
    let n = a.rows();
    if b.rows() != n {
        return Err(ModelError::ShapeMismatch {
            expected: (n, b.cols()),
            found: b.shape(),
        });
    }
    let l = cholesky(a)?;
    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
        // backward: Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

/// Solves `A x = b` for a single right-hand side.
pub fn hermitian_solve_vec(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, ModelError> {
    hermitian_solve(a, &ComplexMatrix::column_vector(b)).map(|x| x.column(0))
}

pub fn hermitian_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, ModelError> {
    hermitian_solve(a, &ComplexMatrix::identity(a.rows()))
}

/// Singular values of `a`, descending, from one-sided Jacobi on the real
/// embedding `[[Re, -Im], [Im, Re]]` (each complex singular value appears
/// twice there).
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    // work on the tall orientation so the column count is the smaller side
    let tall = if a.rows() >= a.cols() { a.clone() } else { a.adjoint() };
    let (m, n) = tall.shape();
    let (rm, rn) = (2 * m, 2 * n);
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; rm]; rn];
    for r in 0..m {
        for c in 0..n {
            let z = tall[(r, c)];
            cols[c][r] = z.re;
            cols[c][r + m] = z.im;
            cols[c + n][r] = -z.im;
            cols[c + n][r + m] = z.re;
        }
    }
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..rn {
            for q in p + 1..rn {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let xv = *x;
                    *x = c * xv - s * *y;
                    *y = s * xv + c * *y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.into_iter().step_by(2).collect()
}

/// Thin QR of a tall matrix by twice-iterated classical Gram–Schmidt.
fn thin_qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), ModelError> {
    let (m, n) = a.shape();
    let mut q_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut r = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _pass in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let coef = inner(qi, &v);
                r[(i, j)] += coef;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= coef * qk;
                }
            }
        }
        let nv = super::matrix::norm(&v);
        if nv == 0.0 {
            return Err(ModelError::RankDeficient);
        }
        r[(j, j)] = Complex64::new(nv, 0.0);
        q_cols.push(v.iter().map(|z| z / nv).collect());
    }
    let q = ComplexMatrix::from_fn(m, n, |row, col| q_cols[col][row]);
    Ok((q, r))
}

/// Right pseudo-inverse `H⁺ = Hᴴ (H Hᴴ)⁻¹` of a full-row-rank `K×N` matrix.
///
/// `tol` is relative to the largest singular value.
pub fn pseudo_inverse(h: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix, ModelError> {
    let (k, n) = h.shape();
    if k > n || k == 0 {
        return Err(ModelError::RankDeficient);
    }
    let sv = singular_values(h);
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    if largest == 0.0 || smallest < tol * largest {
        return Err(ModelError::RankDeficient);
    }
    // Hᴴ = Q R  =>  H⁺ = Q R⁻ᴴ
    let (q, r) = thin_qr(&h.adjoint())?;
    // Solve Rᴴ Y = I (Rᴴ lower triangular), H⁺ = Q Y.
    let mut y = ComplexMatrix::zeros(k, k);
    for c in 0..k {
        for i in 0..k {
            let mut s = if i == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for j in 0..i {
                s -= r[(j, i)].conj() * y[(j, c)];
            }
            y[(i, c)] = s / r[(i, i)].conj();
        }
    }
    Ok(q.matmul(&y))
}

/// Dense real solve with partial pivoting; `None` when singular.
pub fn real_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            let (upper, lower) = m.split_at_mut(row);
            for (dst, src) in lower[0][col..n].iter_mut().zip(&upper[col][col..n]) {
                *dst -= f * src;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::matrix::dot;
    use crate::rng::{complex_gaussian_matrix, seeded};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let mut rng = seeded(3);
        let b = complex_gaussian_matrix(3, 2, &mut rng);
        let x = hermitian_solve(&ComplexMatrix::identity(3), &b).unwrap();
        assert!(x.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let a = ComplexMatrix::from_rows(&[vec![c(2.0), c(0.0)], vec![c(0.0), c(4.0)]]).unwrap();
        let b = ComplexMatrix::column_vector(&[c(2.0), c(4.0)]);
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((x[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn random_pd_solve_residual() {
        let mut rng = seeded(11);
        let m = complex_gaussian_matrix(4, 4, &mut rng);
        let a = &m.matmul(&m.adjoint()) + &ComplexMatrix::identity(4);
        let b = complex_gaussian_matrix(4, 3, &mut rng);
        let x = hermitian_solve(&a, &b).unwrap();
        let resid = (&a.matmul(&x) - &b).frobenius_norm() / b.frobenius_norm();
        assert!(resid <= 1e-10, "residual {resid}");
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = ComplexMatrix::from_rows(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]).unwrap();
        assert_eq!(cholesky(&a), Err(ModelError::NotPositiveDefinite));
        let z = ComplexMatrix::zeros(2, 2);
        assert_eq!(cholesky(&z), Err(ModelError::NotPositiveDefinite));
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = ComplexMatrix::from_rows(&[vec![c(2.0), c(1.0)], vec![c(0.0), c(2.0)]]).unwrap();
        assert_eq!(cholesky(&a), Err(ModelError::NotHermitian));
    }

    #[test]
    fn pinv_identity() {
        let p = pseudo_inverse(&ComplexMatrix::identity(2), DEFAULT_RANK_TOL).unwrap();
        assert!(p.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn pinv_padded_diagonal() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0), c(0.0), c(0.0)], vec![c(0.0), c(2.0), c(0.0)]]).unwrap();
        let p = pseudo_inverse(&h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.shape(), (3, 2));
        assert!((p[(0, 0)] - c(1.0)).norm() < 1e-14);
        assert!((p[(1, 1)] - c(0.5)).norm() < 1e-14);
        assert!(p[(0, 1)].norm() < 1e-14 && p[(1, 0)].norm() < 1e-14);
        assert!(p[(2, 0)].norm() < 1e-14 && p[(2, 1)].norm() < 1e-14);
    }

    #[test]
    fn pinv_random_right_inverse() {
        let mut rng = seeded(5);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let p = pseudo_inverse(&h, DEFAULT_RANK_TOL).unwrap();
        assert!(h.matmul(&p).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-8);
    }

    #[test]
    fn pinv_rank_deficient() {
        let row = vec![c(1.0), Complex64::new(0.5, -0.25), c(2.0)];
        let h = ComplexMatrix::from_rows(&[row.clone(), row.iter().map(|z| z * 3.0).collect()]).unwrap();
        assert_eq!(pseudo_inverse(&h, DEFAULT_RANK_TOL), Err(ModelError::RankDeficient));
    }

    #[test]
    fn singular_values_match_diagonal() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(3.0), c(0.0), c(0.0)],
            vec![c(0.0), Complex64::new(0.0, 2.0), c(0.0)],
        ])
        .unwrap();
        let sv = singular_values(&h);
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 3.0).abs() < 1e-13 && (sv[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn singular_values_frobenius_identity() {
        let mut rng = seeded(8);
        let h = complex_gaussian_matrix(3, 5, &mut rng);
        let sv = singular_values(&h);
        let s2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((s2 - h.frobenius_norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn real_solve_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = real_solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(real_solve(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn dot_is_bilinear() {
        let a = [Complex64::new(0.0, 1.0)];
        let b = [Complex64::new(0.0, 1.0)];
        assert_eq!(dot(&a, &b), c(-1.0));
    }
}
