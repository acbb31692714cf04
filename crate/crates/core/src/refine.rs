//! Server-side refinement of the global anchors and structural templates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, normalize_in_place, seeded_rng, sq_dist, softmax, Matrix};
use crate::semantic::EtfAnchors;
use crate::structural::{ot_plan, MatchingMatrix, Pairing, RadialSequence, StructuralTemplates};

/// What a client uploads about its class geometry after local training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    /// d×C, column `i` is the calibrated mean of class `i` (zero when absent).
    pub k: Matrix,
    pub present: Vec<bool>,
    pub per_class_loss: Vec<Option<f64>>,
}

impl SemanticReport {
    pub fn validate(&self, anchors: &EtfAnchors) -> Result<()> {
        let c = anchors.num_classes();
        if self.k.shape() != (anchors.dim(), c) || self.present.len() != c || self.per_class_loss.len() != c {
            return Err(Error::Dimension(format!(
                "semantic report is {:?} for anchors of shape {:?}",
                self.k.shape(),
                anchors.matrix().shape()
            )));
        }
        for i in 0..c {
            if self.present[i] {
                if self.k.column(i).iter().any(|x| !x.is_finite()) {
                    return Err(Error::Value(format!("class {i} mean is not finite")));
                }
                match self.per_class_loss[i] {
                    Some(l) if l >= 0.0 && l.is_finite() => {}
                    other => return Err(Error::Value(format!("class {i} loss {other:?}"))),
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub radials: Vec<RadialSequence>,
    pub f: MatchingMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Softmax temperature of the difficulty weights.
    pub tau: f64,
    /// Largest chord step an anchor may take per round.
    pub eta: f64,
    pub eps: f64,
    /// Bracket width at which the template scale search stops.
    pub gw_tol: f64,
    pub gw_iters: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            eta: 0.1,
            eps: 1e-8,
            gw_tol: 1e-10,
            gw_iters: 200,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("eta", self.eta), ("eps", self.eps), ("gw_tol", self.gw_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("refine.{name} must be positive, got {v}")));
            }
        }
        if self.gw_iters == 0 {
            return Err(Error::Parameter("refine.gw_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean of `K_{m,i} − δ_i` over the clients that report class `i`; zero for
/// classes nobody reports.
pub fn deviation_vectors(reports: &[SemanticReport], anchors: &EtfAnchors) -> Result<Vec<Vec<f64>>> {
    if reports.is_empty() {
        return Err(Error::Parameter("no semantic reports".into()));
    }
    let (d, c) = (anchors.dim(), anchors.num_classes());
    let mut out = vec![vec![0.0; d]; c];
    for (i, v) in out.iter_mut().enumerate() {
        let delta = anchors.anchor(i);
        let mut count = 0usize;
        for r in reports {
            r.validate(anchors)?;
            if r.present[i] {
                count += 1;
                for (acc, (k, a)) in v.iter_mut().zip(r.k.column(i).iter().zip(&delta)) {
                    *acc += k - a;
                }
            }
        }
        if count > 0 {
            v.iter_mut().for_each(|x| *x /= count as f64);
        }
    }
    Ok(out)
}

/// Classes reported by at least one client.
pub fn reported_classes(reports: &[SemanticReport], num_classes: usize) -> Vec<bool> {
    (0..num_classes).map(|i| reports.iter().any(|r| r.present[i])).collect()
}

/// `softmax(L̄ / τ)` where `L̄_i` averages the per-class loss over the
/// clients that have class `i` (0 when none do).
pub fn difficulty_weights(reports: &[SemanticReport], tau: f64) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(Error::Parameter("no semantic reports".into()));
    }
    let c = reports[0].per_class_loss.len();
    let mean_loss: Vec<f64> = (0..c)
        .map(|i| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.per_class_loss[i]).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    softmax(&mean_loss, tau)
}

/// Repulsion `s_i = −Σ_{j≠i} δ_j / ‖δ_i − δ_j‖²`.
pub fn constraint_vector(anchors: &EtfAnchors, i: usize) -> Result<Vec<f64>> {
    let delta_i = anchors.anchor(i);
    let mut s = vec![0.0; anchors.dim()];
    for j in 0..anchors.num_classes() {
        if j == i {
            continue;
        }
        let delta_j = anchors.anchor(j);
        let d2 = sq_dist(&delta_i, &delta_j);
        if d2.sqrt() <= 1e-6 {
            return Err(Error::Geometry(format!("anchors {i} and {j} coincide")));
        }
        for (acc, x) in s.iter_mut().zip(&delta_j) {
            *acc -= x / d2;
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinedAnchor {
    pub anchor: Vec<f64>,
    /// Length of the step taken before projecting back to the sphere.
    pub chord: f64,
}

/// Clipped step toward `δ + γ v + s`, then projection onto the unit sphere.
pub fn refine_anchor(delta: &[f64], v: &[f64], gamma: f64, s: &[f64], cfg: &RefineConfig) -> Result<RefinedAnchor> {
    if (norm(delta) - 1.0).abs() > 1e-6 {
        return Err(Error::Value(format!("anchor norm {} is not 1", norm(delta))));
    }
    if v.len() != delta.len() || s.len() != delta.len() {
        return Err(Error::Dimension("anchor update vectors differ in length".into()));
    }
    let step: Vec<f64> = v.iter().zip(s).map(|(v, s)| gamma * v + s).collect();
    let len = norm(&step);
    let t = (cfg.eta / (len + cfg.eps)).min(1.0);
    let mut anchor: Vec<f64> = delta.iter().zip(&step).map(|(d, u)| d + t * u).collect();
    if normalize_in_place(&mut anchor) <= 1e-12 {
        return Err(Error::Geometry("anchor step collapsed to the origin".into()));
    }
    Ok(RefinedAnchor { anchor, chord: t * len })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorRefinement {
    pub anchors: EtfAnchors,
    pub drift: f64,
    pub max_chord: f64,
}

/// Refines every reported class against the old anchors; classes no client
/// reports keep their anchor.
pub fn refine_all_anchors(
    anchors: &EtfAnchors,
    reports: &[SemanticReport],
    cfg: &RefineConfig,
) -> Result<AnchorRefinement> {
    cfg.validate()?;
    let c = anchors.num_classes();
    let deviations = deviation_vectors(reports, anchors)?;
    let gamma = difficulty_weights(reports, cfg.tau)?;
    let reported = reported_classes(reports, c);
    let mut next = anchors.matrix().clone();
    let mut max_chord = 0.0f64;
    for i in 0..c {
        if !reported[i] {
            continue;
        }
        let s = constraint_vector(anchors, i)?;
        let r = refine_anchor(&anchors.anchor(i), &deviations[i], gamma[i], &s, cfg)?;
        max_chord = max_chord.max(r.chord);
        next.set_column(i, &r.anchor);
    }
    let anchors = EtfAnchors::from_matrix(next)?;
    let drift = anchors.gram_drift();
    log::debug!("anchor gram drift {drift:e}, largest chord {max_chord:e}");
    Ok(AnchorRefinement {
        anchors,
        drift,
        max_chord,
    })
}

/// Squared-loss GW between two uniform two-point spaces with intra-distances
/// `alpha` and `beta`, minimized over the couplings
/// `[[t, ½−t], [½−t, t]]`, `t ∈ [0, ½]`.
pub fn gw_from_distances(alpha: f64, beta: f64) -> f64 {
    // cost(t) = 4t(½−t)(α²+β²) + 2(t² + (½−t)²)(α−β)², a quadratic in t
    let cost = |t: f64| {
        let (a, b) = (t, 0.5 - t);
        4.0 * a * b * (alpha * alpha + beta * beta) + 2.0 * (a * a + b * b) * (alpha - beta).powi(2)
    };
    let quad = 4.0 * (alpha - beta).powi(2) - 4.0 * (alpha * alpha + beta * beta);
    let lin = 2.0 * (alpha * alpha + beta * beta) - 2.0 * (alpha - beta).powi(2);
    let mut best = cost(0.0).min(cost(0.5));
    if quad > 0.0 {
        let vertex = -lin / (2.0 * quad);
        if (0.0..=0.5).contains(&vertex) {
            best = best.min(cost(vertex));
        }
    }
    best.max(0.0)
}

pub fn intra_distance(m: &Matrix) -> f64 {
    sq_dist(m.row(0), m.row(1)).sqrt()
}

pub fn gw_2point(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != 2 || b.rows() != 2 {
        return Err(Error::Dimension(format!("GW needs 2-row inputs, got {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(gw_from_distances(intra_distance(a), intra_distance(b)))
}

/// Minimizes a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64, max_iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..max_iters {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(lo, f(lo)), (mid, f(mid)), (hi, f(hi)), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((mid, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
        .0
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateUpdate {
    pub template: Matrix,
    pub objective_before: f64,
    pub objective_after: f64,
    pub total_weight: f64,
}

/// `Σ_{m,b} F_m[b,q] · GW(radial_{m,b}, T)`.
pub fn template_objective(q: usize, reports: &[StructuralReport], template: &Matrix) -> Result<f64> {
    let beta = intra_distance(template);
    let mut total = 0.0;
    for r in reports {
        for (b, radial) in r.radials.iter().enumerate() {
            total += r.f.f[(b, q)] * gw_from_distances(intra_distance(&radial.rows), beta);
        }
    }
    Ok(total)
}

/// Re-fits template `q` to the radial sequences matched to it.
///
/// The scale (row separation) minimizes the weighted GW objective; the
/// position is the weighted mean of the matched radials, each aligned to
/// the current template's row order first.
pub fn update_template(
    q: usize,
    reports: &[StructuralReport],
    templates: &StructuralTemplates,
    cfg: &RefineConfig,
    seed: u64,
) -> Result<TemplateUpdate> {
    cfg.validate()?;
    if q >= templates.len() {
        return Err(Error::Value(format!("template {q} outside 0..{}", templates.len())));
    }
    let current = templates.get(q);
    let d = templates.dim();
    let mut weighted: Vec<(f64, f64)> = Vec::new();
    let mut mean = Matrix::zeros(2, d);
    let mut total_weight = 0.0;
    for r in reports {
        if r.f.batch_size() != r.radials.len() || r.f.num_templates() != templates.len() {
            return Err(Error::Dimension(format!(
                "structural report has {} radials and a {:?} matching",
                r.radials.len(),
                r.f.f.shape()
            )));
        }
        for (b, radial) in r.radials.iter().enumerate() {
            let w = r.f.f[(b, q)];
            if w <= 0.0 {
                continue;
            }
            total_weight += w;
            weighted.push((w, intra_distance(&radial.rows)));
            let (_, pairing) = ot_plan(&radial.rows, current)?;
            let order = match pairing {
                Pairing::Identity => [0, 1],
                Pairing::Swapped => [1, 0],
            };
            for (k, &src) in order.iter().enumerate() {
                for (m, x) in mean.row_mut(k).iter_mut().zip(radial.rows.row(src)) {
                    *m += w * x;
                }
            }
        }
    }
    let objective_before = template_objective(q, reports, current)?;
    if total_weight <= 0.0 {
        log::info!("template {q} received no mass; left unchanged");
        return Ok(TemplateUpdate {
            template: current.clone(),
            objective_before,
            objective_after: objective_before,
            total_weight,
        });
    }
    mean = mean.scale(1.0 / total_weight);

    let objective = |beta: f64| weighted.iter().map(|&(w, a)| w * gw_from_distances(a, beta)).sum::<f64>();
    let max_alpha = weighted.iter().map(|&(_, a)| a).fold(0.0, f64::max);
    let mut beta = golden_section(objective, 0.0, max_alpha, cfg.gw_tol, cfg.gw_iters);
    let old_beta = intra_distance(current);
    if objective(old_beta) < objective(beta) {
        beta = old_beta;
    }

    let mid: Vec<f64> = mean.row(0).iter().zip(mean.row(1)).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut dir: Vec<f64> = mean.row(0).iter().zip(mean.row(1)).map(|(a, b)| a - b).collect();
    if normalize_in_place(&mut dir) <= 1e-12 {
        let mut rng = seeded_rng(seed, &[0x0_7E3B, q as u64]);
        dir = crate::numerics::standard_normal_matrix(1, d, &mut rng).into_vec();
        normalize_in_place(&mut dir);
    }
    let mut template = Matrix::zeros(2, d);
    for j in 0..d {
        template[(0, j)] = mid[j] + 0.5 * beta * dir[j];
        template[(1, j)] = mid[j] - 0.5 * beta * dir[j];
    }
    let objective_after = template_objective(q, reports, &template)?;
    Ok(TemplateUpdate {
        template,
        objective_before,
        objective_after,
        total_weight,
    })
}

/// Updates every template; returns the new set and per-template results.
pub fn update_all_templates(
    reports: &[StructuralReport],
    templates: &StructuralTemplates,
    cfg: &RefineConfig,
    seed: u64,
) -> Result<(StructuralTemplates, Vec<TemplateUpdate>)> {
    let mut next = templates.clone();
    let mut updates = Vec::with_capacity(templates.len());
    for q in 0..templates.len() {
        let u = update_template(q, reports, templates, cfg, seed)?;
        next.replace(q, u.template.clone());
        updates.push(u);
    }
    Ok((next, updates))
}

/// Cosine similarity, used to compare update directions.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
