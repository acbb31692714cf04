//! Ego / 1-hop / 2-hop backbone with hand-written gradients.
//!
//! ```text
//! ego    = tanh(X · w_ego)                          n × d
//! hop1   = mean of ego over N₁(v)                   n × d
//! hop2   = ½ (mean over N₁(v) + mean over N₂(v))    n × d
//! logits = [ego | hop1 | hop2] · w_cls + b_cls      n × C
//! ```
//!
//! Empty neighborhoods fall back: `N₂ = ∅` uses the N₁ mean for hop2, and
//! `N₁ = ∅` uses the node's own ego-embedding for both hops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{k_hop_sets, Graph, Split};
use crate::numerics::{axpy, seeded_rng, standard_normal_matrix, Matrix, Rng};
use crate::semantic::{semantic_loss, CalibrationRotation, EtfAnchors};
use crate::structural::{structural_loss, MatchingMatrix, StructuralTemplates};

/// Learnable weights of one client. Gradients use the same type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub w_ego: Matrix,
    pub w_cls: Matrix,
    pub b_cls: Vec<f64>,
}

impl ModelParams {
    /// Gaussian init with std `1/√fan_in`; bias starts at zero.
    pub fn init(feature_dim: usize, embed_dim: usize, num_classes: usize, rng: &mut Rng) -> Self {
        let w_ego = standard_normal_matrix(feature_dim, embed_dim, rng).scale(1.0 / (feature_dim as f64).sqrt());
        let w_cls = standard_normal_matrix(3 * embed_dim, num_classes, rng)
            .scale(1.0 / ((3 * embed_dim) as f64).sqrt());
        Self {
            w_ego,
            w_cls,
            b_cls: vec![0.0; num_classes],
        }
    }

    pub fn seeded(feature_dim: usize, embed_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self::init(feature_dim, embed_dim, num_classes, &mut seeded_rng(seed, &[0x0_1417]))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_ego: Matrix::zeros(self.w_ego.rows(), self.w_ego.cols()),
            w_cls: Matrix::zeros(self.w_cls.rows(), self.w_cls.cols()),
            b_cls: vec![0.0; self.b_cls.len()],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w_ego.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.w_ego.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.b_cls.len()
    }

    pub fn num_params(&self) -> usize {
        self.w_ego.data().len() + self.w_cls.data().len() + self.b_cls.len()
    }

    /// All parameters in a fixed order: w_ego, w_cls, b_cls.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(self.w_ego.data());
        out.extend_from_slice(self.w_cls.data());
        out.extend_from_slice(&self.b_cls);
        out
    }

    pub fn from_flat_like(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let a = self.w_ego.data().len();
        let b = a + self.w_cls.data().len();
        Ok(Self {
            w_ego: Matrix::from_vec(self.w_ego.rows(), self.w_ego.cols(), flat[..a].to_vec())?,
            w_cls: Matrix::from_vec(self.w_cls.rows(), self.w_cls.cols(), flat[a..b].to_vec())?,
            b_cls: flat[b..].to_vec(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.w_ego.is_finite() && self.w_cls.is_finite() && self.b_cls.iter().all(|x| x.is_finite())
    }

    fn check_shapes(&self, g: &Graph) -> Result<()> {
        let d = self.embed_dim();
        if self.feature_dim() != g.feature_dim() {
            return Err(Error::Dimension(format!(
                "w_ego expects {} features, graph has {}",
                self.feature_dim(),
                g.feature_dim()
            )));
        }
        if self.w_cls.rows() != 3 * d || self.w_cls.cols() != self.b_cls.len() {
            return Err(Error::Dimension(format!(
                "classifier is {}x{} with {} biases, expected {}x{}",
                self.w_cls.rows(),
                self.w_cls.cols(),
                self.b_cls.len(),
                3 * d,
                self.b_cls.len()
            )));
        }
        Ok(())
    }
}

type SparseRow = Vec<(usize, f64)>;

/// Fixed linear maps ego → hop1 and ego → hop2 for one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    hop1: Vec<SparseRow>,
    hop2: Vec<SparseRow>,
}

impl Propagation {
    pub fn new(g: &Graph) -> Self {
        let (hop1, hop2) = (0..g.num_nodes()).map(|v| hop_weights(g, v)).unzip();
        Self { hop1, hop2 }
    }

    pub fn num_nodes(&self) -> usize {
        self.hop1.len()
    }

    pub fn hop1_row(&self, v: usize) -> &[(usize, f64)] {
        &self.hop1[v]
    }

    pub fn hop2_row(&self, v: usize) -> &[(usize, f64)] {
        &self.hop2[v]
    }

    pub fn apply_hop1(&self, ego: &Matrix) -> Matrix {
        apply(&self.hop1, ego)
    }

    pub fn apply_hop2(&self, ego: &Matrix) -> Matrix {
        apply(&self.hop2, ego)
    }

    /// Adds `hop1ᵀ · d_hop1 + hop2ᵀ · d_hop2` into `d_ego`.
    pub fn backprop_into(&self, d_hop1: &Matrix, d_hop2: &Matrix, d_ego: &mut Matrix) {
        for (rows, grad) in [(&self.hop1, d_hop1), (&self.hop2, d_hop2)] {
            for (v, row) in rows.iter().enumerate() {
                let gv = grad.row(v);
                if gv.iter().all(|&x| x == 0.0) {
                    continue;
                }
                for &(u, w) in row {
                    axpy(w, gv, d_ego.row_mut(u));
                }
            }
        }
    }
}

/// Aggregation weights of node `v`'s hop-1 and hop-2 embeddings over ego rows.
pub fn hop_weights(g: &Graph, v: usize) -> (SparseRow, SparseRow) {
    let n1 = k_hop_sets(g, v, 1).expect("v is a valid node");
    if n1.is_empty() {
        return (vec![(v, 1.0)], vec![(v, 1.0)]);
    }
    let w1 = 1.0 / n1.len() as f64;
    let hop1: SparseRow = n1.iter().map(|&u| (u, w1)).collect();
    let n2 = k_hop_sets(g, v, 2).expect("v is a valid node");
    if n2.is_empty() {
        return (hop1.clone(), hop1);
    }
    let w2 = 0.5 / n2.len() as f64;
    let mut hop2: SparseRow = n1.iter().map(|&u| (u, 0.5 * w1)).collect();
    hop2.extend(n2.iter().map(|&u| (u, w2)));
    (hop1, hop2)
}

fn apply(rows: &[SparseRow], ego: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), ego.cols());
    for (v, row) in rows.iter().enumerate() {
        let dst = out.row_mut(v);
        for &(u, w) in row {
            axpy(w, ego.row(u), dst);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub ego: Matrix,
    pub hop1: Matrix,
    pub hop2: Matrix,
    /// `[ego | hop1 | hop2]`, the classifier input.
    pub combined: Matrix,
    pub logits: Matrix,
}

pub fn forward(params: &ModelParams, g: &Graph) -> Result<ForwardCache> {
    forward_with(params, g, &Propagation::new(g))
}

pub fn forward_with(params: &ModelParams, g: &Graph, prop: &Propagation) -> Result<ForwardCache> {
    params.check_shapes(g)?;
    if prop.num_nodes() != g.num_nodes() {
        return Err(Error::Dimension("propagation built for a different graph".into()));
    }
    let ego = g.features().matmul(&params.w_ego)?.map(f64::tanh);
    let hop1 = prop.apply_hop1(&ego);
    let hop2 = prop.apply_hop2(&ego);
    let d = params.embed_dim();
    let n = g.num_nodes();
    let mut combined = Matrix::zeros(n, 3 * d);
    for v in 0..n {
        let row = combined.row_mut(v);
        row[..d].copy_from_slice(ego.row(v));
        row[d..2 * d].copy_from_slice(hop1.row(v));
        row[2 * d..].copy_from_slice(hop2.row(v));
    }
    let mut logits = combined.matmul(&params.w_cls)?;
    for v in 0..n {
        axpy(1.0, &params.b_cls, logits.row_mut(v));
    }
    Ok(ForwardCache {
        ego,
        hop1,
        hop2,
        combined,
        logits,
    })
}

/// Row-wise softmax of a logit matrix.
pub fn class_probabilities(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for v in 0..p.rows() {
        let row = p.row_mut(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            z += *x;
        }
        row.iter_mut().for_each(|x| *x /= z);
    }
    p
}

/// Mean cross-entropy over labeled training nodes and its gradient with
/// respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[Option<usize>], train_mask: &[bool]) -> Result<(f64, Matrix)> {
    let nodes: Vec<(usize, usize)> = (0..logits.rows())
        .filter(|&v| train_mask[v])
        .filter_map(|v| labels[v].map(|c| (v, c)))
        .collect();
    if nodes.is_empty() {
        return Err(Error::State("cross-entropy needs at least one labeled training node".into()));
    }
    let scale = 1.0 / nodes.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &(v, c) in &nodes {
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[c];
        let g = grad.row_mut(v);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (row[j] - lse).exp() * scale;
        }
        g[c] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Upstream gradients on the forward activations.
pub struct ActivationGrads {
    pub logits: Option<Matrix>,
    pub ego: Matrix,
}

/// Chains activation gradients back to the parameters.
pub fn backward(
    params: &ModelParams,
    g: &Graph,
    prop: &Propagation,
    cache: &ForwardCache,
    upstream: ActivationGrads,
) -> Result<ModelParams> {
    let d = params.embed_dim();
    let n = g.num_nodes();
    let mut grads = params.zeros_like();
    let mut d_ego = upstream.ego;
    if let Some(d_logits) = upstream.logits {
        grads.w_cls = cache.combined.t_matmul(&d_logits)?;
        for v in 0..n {
            axpy(1.0, d_logits.row(v), &mut grads.b_cls);
        }
        let d_combined = d_logits.matmul(&params.w_cls.transpose())?;
        let mut d_hop1 = Matrix::zeros(n, d);
        let mut d_hop2 = Matrix::zeros(n, d);
        for v in 0..n {
            let row = d_combined.row(v);
            axpy(1.0, &row[..d], d_ego.row_mut(v));
            d_hop1.row_mut(v).copy_from_slice(&row[d..2 * d]);
            d_hop2.row_mut(v).copy_from_slice(&row[2 * d..]);
        }
        prop.backprop_into(&d_hop1, &d_hop2, &mut d_ego);
    }
    let mut d_pre = d_ego;
    for (dp, &e) in d_pre.data_mut().iter_mut().zip(cache.ego.data()) {
        *dp *= 1.0 - e * e;
    }
    grads.w_ego = g.features().t_matmul(&d_pre)?;
    Ok(grads)
}

/// Frozen per-round calibration targets.
#[derive(Clone, Copy)]
pub struct CalibrationTargets<'a> {
    pub anchors: &'a EtfAnchors,
    pub rotation: &'a CalibrationRotation,
    pub templates: &'a StructuralTemplates,
    pub matching: &'a MatchingMatrix,
    pub batch: &'a [usize],
}

/// Multipliers on the two calibration terms; `0` removes a term entirely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub semantic: f64,
    pub structural: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            semantic: 1.0,
            structural: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub ce: f64,
    pub semantic: f64,
    pub structural: f64,
    pub total: f64,
    pub grads: ModelParams,
}

/// `CE + w_sem · semantic + w_str · structural` and its parameter gradient.
/// The classifier only receives gradient from the CE term.
pub fn total_loss(
    params: &ModelParams,
    g: &Graph,
    prop: &Propagation,
    targets: Option<CalibrationTargets<'_>>,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    let cache = forward_with(params, g, prop)?;
    let (ce, d_logits) = cross_entropy(&cache.logits, g.labels(), g.mask(Split::Train))?;
    let mut d_ego = Matrix::zeros(g.num_nodes(), params.embed_dim());
    let (mut sem, mut stru) = (0.0, 0.0);
    if let Some(t) = targets {
        if weights.semantic != 0.0 {
            let (value, grad) = semantic_loss(&cache.ego, g.labels(), g.mask(Split::Train), t.rotation, t.anchors)?;
            sem = value;
            d_ego.add_scaled(weights.semantic, &grad)?;
        }
        if weights.structural != 0.0 {
            let s = structural_loss(t.matching, t.batch, &cache.ego, prop, t.templates)?;
            stru = s.value;
            d_ego.add_scaled(weights.structural, &s.grad_ego)?;
        }
    }
    let grads = backward(
        params,
        g,
        prop,
        &cache,
        ActivationGrads {
            logits: Some(d_logits),
            ego: d_ego,
        },
    )?;
    Ok(LossBreakdown {
        ce,
        semantic: sem,
        structural: stru,
        total: ce + weights.semantic * sem + weights.structural * stru,
        grads,
    })
}

/// `η_t = η₀ / (1 + t/τ)`: Σ η_t diverges and Σ η_t² converges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_steps: f64,
}

impl LrSchedule {
    pub fn rate(&self, step: usize) -> f64 {
        self.base / (1.0 + step as f64 / self.decay_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) || !(self.decay_steps > 0.0) {
            return Err(Error::Parameter(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base: 0.2,
            decay_steps: 20.0,
        }
    }
}

pub fn sgd_step(params: &ModelParams, grads: &ModelParams, lr: f64) -> Result<ModelParams> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Parameter(format!("learning rate must be positive, got {lr}")));
    }
    if !grads.is_finite() {
        return Err(Error::Value("non-finite gradient; aborting step".into()));
    }
    let mut out = params.clone();
    out.w_ego.add_scaled(-lr, &grads.w_ego)?;
    out.w_cls.add_scaled(-lr, &grads.w_cls)?;
    axpy(-lr, &grads.b_cls, &mut out.b_cls);
    Ok(out)
}
