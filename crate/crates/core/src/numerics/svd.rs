//! One-sided (Hestenes) Jacobi SVD for small square matrices.

use super::matrix::{axpy, dot, norm, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// `m = u · diag(sigma) · vt`, singular values descending.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let us = {
            let mut us = self.u.clone();
            for i in 0..us.rows() {
                for (j, s) in self.sigma.iter().enumerate() {
                    us[(i, j)] *= s;
                }
            }
            us
        };
        us.matmul(&self.vt).expect("svd factors are square and conformant")
    }
}

/// Singular value decomposition of a square matrix.
///
/// Each left singular vector is flipped so that its first entry with
/// magnitude above round-off is non-negative; the matching right singular
/// vector is flipped with it. Columns of `u` belonging to (numerically) zero
/// singular values are completed to an orthonormal basis deterministically.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    let (n, cols) = m.shape();
    if n != cols {
        return Err(Error::Dimension(format!("svd needs a square matrix, got {n}x{cols}")));
    }
    if n == 0 {
        return Err(Error::Dimension("svd of an empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::Value("svd input contains non-finite entries".into()));
    }

    // Work on columns: a[j] is column j of the running product m·V.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = a.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let a: Vec<Vec<f64>> = order.iter().map(|&j| a[j].clone()).collect();
    let mut v: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    sigma = order.iter().map(|&j| sigma[j]).collect();

    let smax = sigma[0];
    let zero_tol = smax * (n as f64) * 1e-14;
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in a.iter().enumerate() {
        if sigma[j] > zero_tol && sigma[j] > 0.0 {
            let mut uj: Vec<f64> = col.iter().map(|x| x / sigma[j]).collect();
            // Re-orthogonalize against earlier columns; small singular values
            // lose orthogonality to round-off otherwise.
            for _ in 0..2 {
                for prev in &u {
                    let proj = dot(prev, &uj);
                    axpy(-proj, prev, &mut uj);
                }
            }
            let nu = norm(&uj);
            if nu > 1e-8 {
                uj.iter_mut().for_each(|x| *x /= nu);
                u.push(uj);
                continue;
            }
        }
        sigma[j] = sigma[j].max(0.0);
        u.push(complete_basis(&u, n));
    }

    for j in 0..n {
        if let Some(&lead) = u[j].iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                u[j].iter_mut().for_each(|x| *x = -*x);
                v[j].iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    let mut um = Matrix::zeros(n, n);
    let mut vt = Matrix::zeros(n, n);
    for j in 0..n {
        um.set_column(j, &u[j]);
        vt.row_mut(j).copy_from_slice(&v[j]);
    }
    Ok(SvdResult { u: um, sigma, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// First standard basis vector with a usable component orthogonal to `basis`.
fn complete_basis(basis: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut best: Option<Vec<f64>> = None;
    let mut best_norm = 0.0;
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = dot(b, &e);
                axpy(-proj, b, &mut e);
            }
        }
        let ne = norm(&e);
        if ne > 0.5 {
            e.iter_mut().for_each(|x| *x /= ne);
            return e;
        }
        if ne > best_norm {
            best_norm = ne;
            best = Some(e);
        }
    }
    let mut e = best.expect("basis of size < n always has a complement");
    e.iter_mut().for_each(|x| *x /= best_norm);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn is_orthogonal(m: &Matrix, tol: f64) -> bool {
        let g = m.t_matmul(m).unwrap();
        g.max_abs_diff(&Matrix::identity(m.rows())) <= tol
    }

    #[test]
    fn identity_decomposes_to_identity() {
        let r = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(r.sigma, vec![1.0, 1.0, 1.0]);
        assert_eq!(r.u, Matrix::identity(3));
        assert_eq!(r.vt, Matrix::identity(3));
    }

    #[test]
    fn diagonal_values_sorted() {
        let r = svd(&Matrix::diag(&[1.0, 3.0])).unwrap();
        assert!((r.sigma[0] - 3.0).abs() < 1e-15);
        assert!((r.sigma[1] - 1.0).abs() < 1e-15);
        assert!(r.reconstruct().max_abs_diff(&Matrix::diag(&[1.0, 3.0])) < 1e-14);
    }

    #[test]
    fn seeded_reconstruction() {
        let mut rng = seeded_rng(7, &[]);
        let data: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = Matrix::from_vec(4, 4, data).unwrap();
        let r = svd(&m).unwrap();
        let err = r.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm();
        assert!(err <= 1e-8, "reconstruction error {err}");
        assert!(is_orthogonal(&r.u, 1e-9));
        assert!(is_orthogonal(&r.vt.transpose(), 1e-9));
    }

    #[test]
    fn rank_deficient_still_orthogonal() {
        // rank-1 outer product plus an all-zero matrix
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = [0.3, 0.1, -1.0, 2.0];
        let mut m = Matrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = x[i] * y[j];
            }
        }
        for mat in [m, Matrix::zeros(4, 4)] {
            let r = svd(&mat).unwrap();
            assert!(is_orthogonal(&r.u, 1e-10));
            assert!(is_orthogonal(&r.vt.transpose(), 1e-10));
            assert!(r.reconstruct().max_abs_diff(&mat) < 1e-12);
        }
    }

    #[test]
    fn sign_convention_holds() {
        let mut rng = seeded_rng(99, &[]);
        let data: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = svd(&Matrix::from_vec(5, 5, data).unwrap()).unwrap();
        for j in 0..5 {
            let lead = r.u.column(j).into_iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(svd(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::Value(_))));
    }
}
