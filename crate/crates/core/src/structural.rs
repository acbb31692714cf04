//! Radial sequences, template matching by entropic OT, and the structural
//! calibration loss.
//!
//! A radial sequence and a template are both 2×d matrices read as uniform
//! two-point measures in ℝ^d (hop-1 row, hop-2 row).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{hop_weights, Propagation};
use crate::numerics::{axpy, dot, normalize_in_place, norm, sq_dist, standard_normal_matrix, Matrix, Rng};

/// ℓ2-normalized hop-1 and hop-2 aggregates around `anchor_node`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSequence {
    pub rows: Matrix,
    pub anchor_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralTemplates {
    templates: Vec<Matrix>,
}

impl StructuralTemplates {
    /// Gaussian rows rescaled to unit norm.
    pub fn random(count: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("need at least one structural template".into()));
        }
        let templates = (0..count)
            .map(|_| {
                let mut t = standard_normal_matrix(2, dim, rng);
                for r in 0..2 {
                    normalize_in_place(t.row_mut(r));
                }
                t
            })
            .collect();
        Ok(Self { templates })
    }

    pub fn from_matrices(templates: Vec<Matrix>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Parameter("need at least one structural template".into()));
        }
        let d = templates[0].cols();
        for t in &templates {
            if t.rows() != 2 || t.cols() != d {
                return Err(Error::Dimension(format!("template shape {:?}, expected (2, {d})", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::Value("template has non-finite entries".into()));
            }
        }
        Ok(Self { templates })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.templates[0].cols()
    }

    pub fn get(&self, q: usize) -> &Matrix {
        &self.templates[q]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.templates.iter()
    }

    pub fn replace(&mut self, q: usize, t: Matrix) {
        assert_eq!(t.shape(), self.templates[q].shape());
        self.templates[q] = t;
    }
}

/// Sinkhorn diagnostics for one matching solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornStats {
    pub converged: bool,
    pub iterations: usize,
    /// Max row-sum error of the coupling scaled by B (rows of F).
    pub row_residual: f64,
    /// Max column-sum error of F against B/Q.
    pub col_residual: f64,
    /// Dual objective after each iteration; non-decreasing.
    pub dual_objective: Vec<f64>,
}

/// Soft assignment of B sampled nodes to Q templates; rows sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingMatrix {
    pub f: Matrix,
    pub stats: SinkhornStats,
}

impl MatchingMatrix {
    /// Wraps a given row-stochastic matrix (no solve).
    pub fn from_matrix(f: Matrix) -> Result<Self> {
        for b in 0..f.rows() {
            let row = f.row(b);
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::Value(format!("matching row {b} has negative or non-finite entries")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::Value(format!("matching row {b} sums to {s}")));
            }
        }
        Ok(Self {
            f,
            stats: SinkhornStats {
                converged: true,
                iterations: 0,
                row_residual: 0.0,
                col_residual: 0.0,
                dual_objective: Vec::new(),
            },
        })
    }

    pub fn batch_size(&self) -> usize {
        self.f.rows()
    }

    pub fn num_templates(&self) -> usize {
        self.f.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    /// Entropic regularization, relative to the mean cost.
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Parameter(format!("invalid Sinkhorn settings {self:?}")));
        }
        Ok(())
    }
}

/// Uniform sample of `min(B, n)` distinct nodes.
pub fn sample_structural_batch(g: &Graph, batch_size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return Err(Error::Parameter("structural batch size must be >= 1".into()));
    }
    let nodes: Vec<usize> = (0..g.num_nodes()).collect();
    Ok(nodes
        .choose_multiple(rng, batch_size.min(g.num_nodes()))
        .copied()
        .collect())
}

fn aggregate(row: &[(usize, f64)], ego: &Matrix) -> Vec<f64> {
    let mut h = vec![0.0; ego.cols()];
    for &(u, w) in row {
        axpy(w, ego.row(u), &mut h);
    }
    h
}

fn radial_from_rows(hop1: &[(usize, f64)], hop2: &[(usize, f64)], ego: &Matrix, node: usize) -> RadialSequence {
    let mut r1 = aggregate(hop1, ego);
    let mut r2 = aggregate(hop2, ego);
    normalize_in_place(&mut r1);
    normalize_in_place(&mut r2);
    RadialSequence {
        rows: Matrix::from_rows(&[r1, r2]).expect("two rows of width d"),
        anchor_node: node,
    }
}

pub fn radial_sequence(g: &Graph, ego: &Matrix, node: usize) -> Result<RadialSequence> {
    if node >= g.num_nodes() {
        return Err(Error::Value(format!("node {node} outside 0..{}", g.num_nodes())));
    }
    let (h1, h2) = hop_weights(g, node);
    Ok(radial_from_rows(&h1, &h2, ego, node))
}

pub fn radial_sequences(prop: &Propagation, ego: &Matrix, batch: &[usize]) -> Vec<RadialSequence> {
    batch
        .iter()
        .map(|&b| radial_from_rows(prop.hop1_row(b), prop.hop2_row(b), ego, b))
        .collect()
}

/// Which pairing of rows realizes the two-point OT optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pairing {
    Identity,
    Swapped,
}

/// Exact W₂² between uniform two-point measures with squared-Euclidean
/// cost; the optimum sits at one of the two permutation couplings.
/// Ties resolve to the identity pairing.
pub fn ot_plan(a: &Matrix, b: &Matrix) -> Result<(f64, Pairing)> {
    if a.shape() != b.shape() || a.rows() != 2 {
        return Err(Error::Dimension(format!("OT needs two 2×d inputs, got {:?} and {:?}", a.shape(), b.shape())));
    }
    let straight = sq_dist(a.row(0), b.row(0)) + sq_dist(a.row(1), b.row(1));
    let crossed = sq_dist(a.row(0), b.row(1)) + sq_dist(a.row(1), b.row(0));
    Ok(if straight <= crossed {
        (0.5 * straight, Pairing::Identity)
    } else {
        (0.5 * crossed, Pairing::Swapped)
    })
}

pub fn ot_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    ot_plan(a, b).map(|(v, _)| v)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn with uniform marginals (1/B rows, 1/Q columns) on
/// the raw `cost`. Returns F = B · coupling, whose rows sum to one.
///
/// The last half-step is the row update, so rows are exact and the column
/// residual carries the remaining error. Non-convergence is reported in
/// the stats, not as an error.
pub fn sinkhorn(cost: &Matrix, epsilon: f64, max_iters: usize, tol: f64) -> Result<MatchingMatrix> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("Sinkhorn epsilon must be positive, got {epsilon}")));
    }
    if !cost.is_finite() {
        return Err(Error::Value("Sinkhorn cost has non-finite entries".into()));
    }
    let (nb, nq) = cost.shape();
    if nb == 0 || nq == 0 {
        return Err(Error::Dimension("empty Sinkhorn cost matrix".into()));
    }
    let log_a = -(nb as f64).ln();
    let log_b = -(nq as f64).ln();
    let mut f = vec![0.0; nb];
    let mut g = vec![0.0; nq];

    let update_f = |f: &mut [f64], g: &[f64]| {
        for i in 0..nb {
            f[i] = epsilon * log_a - epsilon * log_sum_exp((0..nq).map(|j| (g[j] - cost[(i, j)]) / epsilon));
        }
    };
    let update_g = |f: &[f64], g: &mut [f64]| {
        for j in 0..nq {
            g[j] = epsilon * log_b - epsilon * log_sum_exp((0..nb).map(|i| (f[i] - cost[(i, j)]) / epsilon));
        }
    };
    let plan = |f: &[f64], g: &[f64]| {
        let mut p = Matrix::zeros(nb, nq);
        for i in 0..nb {
            for j in 0..nq {
                p[(i, j)] = ((f[i] + g[j] - cost[(i, j)]) / epsilon).exp();
            }
        }
        p
    };
    let dual = |f: &[f64], g: &[f64], p: &Matrix| {
        let mass: f64 = p.data().iter().sum();
        f.iter().sum::<f64>() / nb as f64 + g.iter().sum::<f64>() / nq as f64 - epsilon * mass + epsilon
    };
    let residuals = |p: &Matrix| {
        let row = (0..nb)
            .map(|i| (p.row(i).iter().sum::<f64>() * nb as f64 - 1.0).abs())
            .fold(0.0, f64::max);
        let col = (0..nq)
            .map(|j| ((0..nb).map(|i| p[(i, j)]).sum::<f64>() * nb as f64 - nb as f64 / nq as f64).abs())
            .fold(0.0, f64::max);
        (row, col)
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iters {
        update_f(&mut f, &g);
        update_g(&f, &mut g);
        iterations = it + 1;
        let p = plan(&f, &g);
        trace.push(dual(&f, &g, &p));
        // columns are exact after the g-update; rows carry the residual
        if residuals(&p).0 < tol {
            converged = true;
            break;
        }
    }
    update_f(&mut f, &g);
    let mut fm = plan(&f, &g);
    trace.push(dual(&f, &g, &fm));
    for x in fm.data_mut() {
        *x *= nb as f64;
    }
    let (row_residual, col_residual) = {
        let scaled_back = fm.scale(1.0 / nb as f64);
        residuals(&scaled_back)
    };
    Ok(MatchingMatrix {
        f: fm,
        stats: SinkhornStats {
            converged,
            iterations,
            row_residual,
            col_residual,
            dual_objective: trace,
        },
    })
}

/// OT cost between every radial sequence and every template.
pub fn cost_matrix(radials: &[RadialSequence], templates: &StructuralTemplates) -> Result<Matrix> {
    let mut c = Matrix::zeros(radials.len(), templates.len());
    for (b, r) in radials.iter().enumerate() {
        for (q, t) in templates.iter().enumerate() {
            c[(b, q)] = ot_distance(&r.rows, t)?;
        }
    }
    Ok(c)
}

/// Soft template assignment for one client. Costs are divided by their mean
/// before the solve, so `epsilon` is relative to the typical cost.
pub fn sinkhorn_match(
    radials: &[RadialSequence],
    templates: &StructuralTemplates,
    cfg: &SinkhornConfig,
) -> Result<MatchingMatrix> {
    cfg.validate()?;
    if radials.is_empty() {
        return Err(Error::Parameter("no radial sequences to match".into()));
    }
    let cost = cost_matrix(radials, templates)?;
    let mean = cost.data().iter().sum::<f64>() / cost.data().len() as f64;
    let scaled = if mean > 0.0 { cost.scale(1.0 / mean) } else { cost };
    let m = sinkhorn(&scaled, cfg.epsilon, cfg.max_iters, cfg.tol)?;
    if !m.stats.converged {
        log::debug!(
            "Sinkhorn stopped after {} iterations with column residual {:e}",
            m.stats.iterations,
            m.stats.col_residual
        );
    }
    Ok(m)
}

pub struct StructuralLoss {
    pub value: f64,
    pub grad_ego: Matrix,
}

/// `(1/B) Σ_b Σ_q F[b,q] · W(R_b, T_q)` with F held fixed, and its gradient
/// with respect to the ego rows (through the ℓ2 normalization and hop
/// aggregation; each pair's optimal pairing is held fixed).
pub fn structural_loss(
    matching: &MatchingMatrix,
    batch: &[usize],
    ego: &Matrix,
    prop: &Propagation,
    templates: &StructuralTemplates,
) -> Result<StructuralLoss> {
    let nb = batch.len();
    if matching.batch_size() != nb || matching.num_templates() != templates.len() {
        return Err(Error::Dimension(format!(
            "matching is {:?} for {nb} nodes and {} templates",
            matching.f.shape(),
            templates.len()
        )));
    }
    if ego.cols() != templates.dim() {
        return Err(Error::Dimension(format!(
            "ego width {} vs template width {}",
            ego.cols(),
            templates.dim()
        )));
    }
    let d = ego.cols();
    let mut grad_ego = Matrix::zeros(ego.rows(), d);
    if nb == 0 {
        return Ok(StructuralLoss { value: 0.0, grad_ego });
    }
    let inv_b = 1.0 / nb as f64;
    let mut value = 0.0;
    for (bi, &node) in batch.iter().enumerate() {
        let rows = [prop.hop1_row(node), prop.hop2_row(node)];
        let h = [aggregate(rows[0], ego), aggregate(rows[1], ego)];
        let norms = [norm(&h[0]), norm(&h[1])];
        let r: Vec<Vec<f64>> = (0..2)
            .map(|k| {
                if norms[k] > 0.0 {
                    h[k].iter().map(|x| x / norms[k]).collect()
                } else {
                    vec![0.0; d]
                }
            })
            .collect();
        let radial = Matrix::from_rows(&r)?;
        let mut d_r = [vec![0.0; d], vec![0.0; d]];
        for (q, t) in templates.iter().enumerate() {
            let w = matching.f[(bi, q)];
            if w == 0.0 {
                continue;
            }
            let (cost, pairing) = ot_plan(&radial, t)?;
            value += inv_b * w * cost;
            let partner = match pairing {
                Pairing::Identity => [0, 1],
                Pairing::Swapped => [1, 0],
            };
            for k in 0..2 {
                // ∂/∂r ½‖r − t‖² = r − t
                for (j, dr) in d_r[k].iter_mut().enumerate() {
                    *dr += inv_b * w * (r[k][j] - t[(partner[k], j)]);
                }
            }
        }
        for k in 0..2 {
            if norms[k] == 0.0 {
                continue;
            }
            // r = h/‖h‖  ⇒  ∂h = (∂r − r ⟨r, ∂r⟩) / ‖h‖
            let proj = dot(&r[k], &d_r[k]);
            let d_h: Vec<f64> = d_r[k].iter().zip(&r[k]).map(|(dr, rk)| (dr - rk * proj) / norms[k]).collect();
            for &(u, w) in rows[k] {
                axpy(w, &d_h, grad_ego.row_mut(u));
            }
        }
    }
    Ok(StructuralLoss { value, grad_ego })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_orthogonal, seeded_rng};

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn ot_examples() {
        let a = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(ot_distance(&a, &a).unwrap(), 0.0);
        let swapped = m(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(ot_distance(&a, &swapped).unwrap(), 0.0);
        let mut rng = seeded_rng(1, &[]);
        for _ in 0..50 {
            let x = standard_normal_matrix(2, 3, &mut rng);
            let y = standard_normal_matrix(2, 3, &mut rng);
            // brute force over the two vertex couplings
            let id = 0.5 * (sq_dist(x.row(0), y.row(0)) + sq_dist(x.row(1), y.row(1)));
            let sw = 0.5 * (sq_dist(x.row(0), y.row(1)) + sq_dist(x.row(1), y.row(0)));
            let v = ot_distance(&x, &y).unwrap();
            assert!((v - id.min(sw)).abs() < 1e-15);
            assert!((v - ot_distance(&y, &x).unwrap()).abs() < 1e-14);
            let q = random_orthogonal(3, 5).unwrap().transpose();
            let (xq, yq) = (x.matmul(&q).unwrap(), y.matmul(&q).unwrap());
            assert!((ot_distance(&xq, &yq).unwrap() - v).abs() < 1e-12);
        }
        assert!(ot_distance(&a, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sinkhorn_constant_cost_is_uniform() {
        let cost = Matrix::from_vec(4, 3, vec![0.7; 12]).unwrap();
        let f = sinkhorn(&cost, 0.05, 500, 1e-9).unwrap();
        for x in f.f.data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinkhorn_hard_assignment_limit() {
        let cost = m(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = sinkhorn(&cost, 0.05, 500, 1e-9).unwrap();
        assert!(f.f[(0, 0)] >= 0.99 && f.f[(1, 1)] >= 0.99);
        assert!(f.stats.converged);
    }

    #[test]
    fn sinkhorn_dual_is_monotone_and_marginals_hold() {
        let mut rng = seeded_rng(12, &[]);
        let cost = standard_normal_matrix(16, 5, &mut rng).map(f64::abs);
        let f = sinkhorn(&cost, 0.05, 2000, 1e-8).unwrap();
        assert!(f.stats.converged);
        for w in f.stats.dual_objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "dual decreased {} -> {}", w[0], w[1]);
        }
        for b in 0..16 {
            assert!((f.f.row(b).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        for q in 0..5 {
            let s: f64 = f.f.column(q).iter().sum();
            assert!((s - 16.0 / 5.0).abs() <= 1e-6);
        }
        assert!(sinkhorn(&cost, 0.0, 10, 1e-6).is_err());
    }

    #[test]
    fn sinkhorn_nonconvergence_is_flagged() {
        let mut rng = seeded_rng(2, &[]);
        let cost = standard_normal_matrix(8, 4, &mut rng).map(f64::abs);
        let f = sinkhorn(&cost, 0.001, 1, 1e-12).unwrap();
        assert!(!f.stats.converged);
        for b in 0..8 {
            assert!((f.f.row(b).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn radial_examples() {
        // star: center 0 with three leaves sharing the same ego vector u
        let x = Matrix::zeros(4, 1);
        let g = Graph::new(x, &[(0, 1), (0, 2), (0, 3)], vec![None; 4], 1).unwrap();
        let ego = m(&[vec![9.0, 9.0], vec![3.0, 4.0], vec![3.0, 4.0], vec![3.0, 4.0]]);
        let r = radial_sequence(&g, &ego, 0).unwrap();
        assert!((r.rows[(0, 0)] - 0.6).abs() < 1e-15 && (r.rows[(1, 1)] - 0.8).abs() < 1e-15);

        let iso = Graph::new(Matrix::zeros(1, 1), &[], vec![None], 1).unwrap();
        let r = radial_sequence(&iso, &m(&[vec![0.0, -2.0]]), 0).unwrap();
        assert_eq!(r.rows, m(&[vec![0.0, -1.0], vec![0.0, -1.0]]));
    }

    #[test]
    fn radial_on_four_path_by_hand() {
        // 0 - 1 - 2 - 3, ego rows chosen by hand
        let g = Graph::new(Matrix::zeros(4, 1), &[(0, 1), (1, 2), (2, 3)], vec![None; 4], 1).unwrap();
        let ego = m(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.0]]);
        // node 1: N1 = {0, 2} → h1 = (1, 0.5); N2 = {3} → h2 = ½((1, 0.5) + (-1, 0)) = (0, 0.25)
        let r = radial_sequence(&g, &ego, 1).unwrap();
        let n1 = (1.25f64).sqrt();
        assert!((r.rows[(0, 0)] - 1.0 / n1).abs() < 1e-15);
        assert!((r.rows[(0, 1)] - 0.5 / n1).abs() < 1e-15);
        assert_eq!(r.rows.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn structural_loss_examples() {
        let g = Graph::new(Matrix::zeros(3, 1), &[(0, 1), (1, 2)], vec![None; 3], 1).unwrap();
        let prop = Propagation::new(&g);
        let ego = m(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.2, 0.9]]);
        let batch = [0, 2];
        // Q = 1 zero template: each radial contributes ½(1 + 1) = 1
        let zero = StructuralTemplates::from_matrices(vec![Matrix::zeros(2, 2)]).unwrap();
        let f = MatchingMatrix::from_matrix(Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap()).unwrap();
        let l = structural_loss(&f, &batch, &ego, &prop, &zero).unwrap();
        assert!((l.value - 1.0).abs() < 1e-14);

        // templates equal to the radials with one-hot F → 0
        let radials = radial_sequences(&prop, &ego, &batch);
        let exact = StructuralTemplates::from_matrices(radials.iter().map(|r| r.rows.clone()).collect()).unwrap();
        let one_hot = MatchingMatrix::from_matrix(Matrix::identity(2)).unwrap();
        let l = structural_loss(&one_hot, &batch, &ego, &prop, &exact).unwrap();
        assert!(l.value.abs() < 1e-28);
        assert!(l.grad_ego.frobenius_norm() < 1e-14);
    }

    #[test]
    fn batch_sampling() {
        let g = Graph::new(Matrix::zeros(600, 1), &[], vec![None; 600], 1).unwrap();
        let mut all = sample_structural_batch(&g, 600, &mut seeded_rng(1, &[])).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..600).collect::<Vec<_>>());
        assert_eq!(sample_structural_batch(&g, 900, &mut seeded_rng(1, &[])).unwrap().len(), 600);
        let a = sample_structural_batch(&g, 100, &mut seeded_rng(5, &[])).unwrap();
        assert_eq!(a, sample_structural_batch(&g, 100, &mut seeded_rng(5, &[])).unwrap());
        let mut hits = vec![0usize; 600];
        for seed in 0..50 {
            for v in sample_structural_batch(&g, 100, &mut seeded_rng(seed, &[3])).unwrap() {
                hits[v] += 1;
            }
        }
        // pooled frequency is exactly 1/6; per-node frequency within ±0.05 of it on average
        let mean_abs_dev: f64 = hits.iter().map(|&h| (h as f64 / 50.0 - 1.0 / 6.0).abs()).sum::<f64>() / 600.0;
        assert!(mean_abs_dev < 0.05, "mean deviation {mean_abs_dev}");
        assert!(sample_structural_batch(&g, 0, &mut seeded_rng(1, &[])).is_err());
    }
}
