//! Dense linear algebra and scalar helpers.

mod matrix;
mod svd;

pub use matrix::{axpy, dot, norm, sq_dist, Matrix};
pub use svd::{svd, SvdResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG stream keyed by a base seed and a tag path, e.g.
/// `(seed, [client, round])`. Streams never depend on call order.
pub fn seeded_rng(seed: u64, tags: &[u64]) -> Rng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Temperature softmax with max-subtraction.
pub fn softmax(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Parameter(format!("softmax temperature must be positive, got {tau}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Value("softmax input contains non-finite entries".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| ((x - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Scales each nonzero row to unit ℓ2 norm. Zero rows are left as zero.
pub fn l2_normalize_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        normalize_in_place(out.row_mut(i));
    }
    out
}

/// Returns the norm before scaling; zero vectors stay zero.
pub fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Seeded orthogonal matrix: QR of a standard-normal matrix with the diagonal
/// of R made positive, then the last column flipped if needed so that
/// `det(Q) = +1` (so `d = 1` always yields `[1]`).
pub fn random_orthogonal(d: usize, seed: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::Parameter("orthogonal matrix dimension must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed, &[0x0_57A1]);
    let g = standard_normal_matrix(d, d, &mut rng);
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut col = g.column(j);
        // Gram-Schmidt twice: the reprojection keeps QᵀQ at round-off level.
        for _ in 0..2 {
            for prev in &q_cols {
                let r = dot(prev, &col);
                axpy(-r, prev, &mut col);
            }
        }
        let n = normalize_in_place(&mut col);
        if n < 1e-12 {
            return Err(Error::Value("degenerate Gaussian draw in random_orthogonal".into()));
        }
        q_cols.push(col);
    }
    // Gram-Schmidt with positive norms already yields diag(R) > 0, hence
    // sign(det Q) = sign(det G).
    if determinant(&g) < 0.0 {
        q_cols[d - 1].iter_mut().for_each(|x| *x = -*x);
    }
    let mut q = Matrix::zeros(d, d);
    for (j, c) in q_cols.iter().enumerate() {
        q.set_column(j, c);
    }
    Ok(q)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &Matrix) -> f64 {
    let n = m.rows();
    assert_eq!(n, m.cols(), "determinant of a non-square matrix");
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .expect("non-empty range");
        if a[(pivot, k)] == 0.0 {
            return 0.0;
        }
        if pivot != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(pivot, j)];
                a[(pivot, j)] = t;
            }
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for i in k + 1..n {
            let f = a[(i, k)] / p;
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    det
}
