//! Simplex-ETF anchors and Procrustes calibration of class means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, random_orthogonal, sq_dist, svd, Matrix};

/// Global semantic anchors; column `i` is the unit anchor of class `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtfAnchors {
    delta: Matrix,
}

impl EtfAnchors {
    pub fn from_matrix(delta: Matrix) -> Result<Self> {
        if delta.cols() < 2 {
            return Err(Error::Parameter("anchors need at least 2 classes".into()));
        }
        if !delta.is_finite() {
            return Err(Error::Value("anchors contain non-finite entries".into()));
        }
        Ok(Self { delta })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.delta
    }

    pub fn num_classes(&self) -> usize {
        self.delta.cols()
    }

    pub fn dim(&self) -> usize {
        self.delta.rows()
    }

    pub fn anchor(&self, class: usize) -> Vec<f64> {
        self.delta.column(class)
    }

    /// Largest deviation of an off-diagonal Gram entry from `-1/(C-1)`.
    pub fn gram_drift(&self) -> f64 {
        let c = self.num_classes();
        let target = -1.0 / (c as f64 - 1.0);
        let cols: Vec<Vec<f64>> = (0..c).map(|i| self.anchor(i)).collect();
        let mut worst = 0.0f64;
        for i in 0..c {
            for j in i + 1..c {
                worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
            }
        }
        worst
    }
}

/// `Δ = √(C/(C-1)) · Φ · (I − 𝟙𝟙ᵀ/C)` with Φ the first C columns of a
/// seeded orthogonal matrix.
pub fn construct_etf(num_classes: usize, dim: usize, seed: u64) -> Result<EtfAnchors> {
    if num_classes < 2 {
        return Err(Error::Parameter(format!("simplex ETF needs C >= 2, got {num_classes}")));
    }
    if dim < num_classes {
        return Err(Error::Parameter(format!(
            "simplex ETF needs embedding dim d >= C so the centered simplex keeps rank C-1 \
             with exact Gram structure (d = {dim}, C = {num_classes})"
        )));
    }
    let c = num_classes as f64;
    let phi = random_orthogonal(dim, seed)?.select_columns(&(0..num_classes).collect::<Vec<_>>());
    let mut centering = Matrix::identity(num_classes);
    for x in centering.data_mut() {
        *x -= 1.0 / c;
    }
    let delta = phi.matmul(&centering)?.scale((c / (c - 1.0)).sqrt());
    EtfAnchors::from_matrix(delta)
}

/// Per-class mean ego-embeddings of one client (columns), plus which
/// classes have at least one labeled training node.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticManifold {
    pub p: Matrix,
    pub present: Vec<bool>,
    pub counts: Vec<usize>,
}

impl SemanticManifold {
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.present.len()).filter(|&c| self.present[c]).collect()
    }
}

pub fn class_means(ego: &Matrix, labels: &[Option<usize>], train_mask: &[bool], num_classes: usize) -> SemanticManifold {
    let d = ego.cols();
    let mut sums = vec![vec![0.0; d]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for v in 0..ego.rows() {
        if !train_mask[v] {
            continue;
        }
        if let Some(c) = labels[v] {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(ego.row(v)) {
                *s += x;
            }
        }
    }
    let mut p = Matrix::zeros(d, num_classes);
    for c in 0..num_classes {
        if counts[c] > 0 {
            let col: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            p.set_column(c, &col);
        }
    }
    SemanticManifold {
        p,
        present: counts.iter().map(|&k| k > 0).collect(),
        counts,
    }
}

/// Orthogonal map aligning a client's class means with the anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRotation {
    r: Matrix,
}

impl CalibrationRotation {
    pub fn identity(d: usize) -> Self {
        Self { r: Matrix::identity(d) }
    }

    pub fn from_matrix(r: Matrix) -> Result<Self> {
        if r.rows() != r.cols() {
            return Err(Error::Dimension(format!("rotation must be square, got {:?}", r.shape())));
        }
        let err = r.t_matmul(&r)?.max_abs_diff(&Matrix::identity(r.rows()));
        if err > 1e-8 {
            return Err(Error::Value(format!("rotation is not orthogonal (|RᵀR - I| = {err:e})")));
        }
        Ok(Self { r })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.r.mat_vec(h).expect("embedding length matches rotation")
    }

    /// Calibrated embeddings `R·h_v` for every row.
    pub fn apply_rows(&self, ego: &Matrix) -> Matrix {
        ego.matmul(&self.r.transpose()).expect("embedding width matches rotation")
    }
}

/// Closed-form `argmin_{RᵀR = I} ‖R P̃ − Δ̃‖_F` over present classes:
/// `Δ̃ P̃ᵀ = U Σ Vᵀ`, `R = U Vᵀ`.
pub fn procrustes(manifold: &SemanticManifold, anchors: &EtfAnchors) -> Result<CalibrationRotation> {
    let present = manifold.present_classes();
    if present.is_empty() {
        return Err(Error::State("Procrustes alignment needs at least one present class".into()));
    }
    if manifold.p.rows() != anchors.dim() || manifold.p.cols() != anchors.num_classes() {
        return Err(Error::Dimension(format!(
            "class means {:?} vs anchors {:?}",
            manifold.p.shape(),
            anchors.matrix().shape()
        )));
    }
    let p = manifold.p.select_columns(&present);
    let delta = anchors.matrix().select_columns(&present);
    let cross = delta.matmul(&p.transpose())?;
    let f = svd(&cross)?;
    CalibrationRotation::from_matrix(f.u.matmul(&f.vt)?)
}

/// Mean over labeled training nodes of `‖R h_v − δ_{y_v}‖²`, and its
/// gradient with respect to the ego rows. Zero when there are no such nodes.
pub fn semantic_loss(
    ego: &Matrix,
    labels: &[Option<usize>],
    train_mask: &[bool],
    rotation: &CalibrationRotation,
    anchors: &EtfAnchors,
) -> Result<(f64, Matrix)> {
    if ego.cols() != anchors.dim() || rotation.matrix().rows() != ego.cols() {
        return Err(Error::Dimension(format!(
            "ego width {} vs anchor dim {} vs rotation {:?}",
            ego.cols(),
            anchors.dim(),
            rotation.matrix().shape()
        )));
    }
    let nodes: Vec<(usize, usize)> = (0..ego.rows())
        .filter(|&v| train_mask[v])
        .filter_map(|v| labels[v].map(|c| (v, c)))
        .collect();
    let mut grad = Matrix::zeros(ego.rows(), ego.cols());
    if nodes.is_empty() {
        return Ok((0.0, grad));
    }
    let anchors_cols: Vec<Vec<f64>> = (0..anchors.num_classes()).map(|c| anchors.anchor(c)).collect();
    let rt = rotation.matrix().transpose();
    let scale = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    for &(v, c) in &nodes {
        let calibrated = rotation.apply(ego.row(v));
        let residual: Vec<f64> = calibrated.iter().zip(&anchors_cols[c]).map(|(a, b)| a - b).collect();
        loss += dot(&residual, &residual);
        let back = rt.mat_vec(&residual)?;
        for (g, r) in grad.row_mut(v).iter_mut().zip(back) {
            *g = 2.0 * scale * r;
        }
    }
    Ok((loss * scale, grad))
}

/// Average `‖R h_v − δ_c‖²` over the training nodes of each class; `None`
/// for classes without training nodes on this client.
pub fn per_class_semantic_loss(
    ego: &Matrix,
    labels: &[Option<usize>],
    train_mask: &[bool],
    rotation: &CalibrationRotation,
    anchors: &EtfAnchors,
) -> Vec<Option<f64>> {
    let c = anchors.num_classes();
    let mut sums = vec![0.0; c];
    let mut counts = vec![0usize; c];
    for v in 0..ego.rows() {
        if let (true, Some(y)) = (train_mask[v], labels[v]) {
            sums[y] += sq_dist(&rotation.apply(ego.row(v)), &anchors.anchor(y));
            counts[y] += 1;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, k)| (k > 0).then(|| s / k as f64))
        .collect()
}
