#![allow(dead_code)]

use fedgmc::graph::{generate_sbm, split_masks, Graph, SbmParams};
use fedgmc::model::{
    backward, forward, total_loss, ActivationGrads, CalibrationTargets, LossWeights, ModelParams, Propagation,
};
use fedgmc::numerics::{seeded_rng, Matrix};
use fedgmc::semantic::{class_means, construct_etf, procrustes, semantic_loss, CalibrationRotation, EtfAnchors};
use fedgmc::structural::{
    radial_sequences, sample_structural_batch, sinkhorn_match, structural_loss, MatchingMatrix, SinkhornConfig,
    StructuralTemplates,
};
use rand::Rng as _;

/// Small random labeled graph with a 50/25/25 split.
pub fn small_graph(seed: u64) -> Graph {
    let mut rng = seeded_rng(seed, &[0xF00D]);
    let n = rng.gen_range(12..=30);
    let c = rng.gen_range(2..=3);
    let g = generate_sbm(&SbmParams {
        num_nodes: n,
        num_classes: c,
        p_in: rng.gen_range(0.1..0.4),
        p_out: rng.gen_range(0.02..0.2),
        feature_dim: rng.gen_range(2..=6),
        feature_sep: 1.0,
        seed,
    })
    .unwrap();
    split_masks(g, [0.5, 0.25, 0.25], seed).unwrap()
}

pub struct Setup {
    pub graph: Graph,
    pub prop: Propagation,
    pub params: ModelParams,
    pub anchors: EtfAnchors,
    pub rotation: CalibrationRotation,
    pub templates: StructuralTemplates,
    pub matching: MatchingMatrix,
    pub batch: Vec<usize>,
}

impl Setup {
    pub fn new(seed: u64) -> Self {
        let graph = small_graph(seed);
        let mut rng = seeded_rng(seed, &[0xBEEF]);
        let d = rng.gen_range(graph.num_classes().max(2)..=8);
        let prop = Propagation::new(&graph);
        let params = ModelParams::init(graph.feature_dim(), d, graph.num_classes(), &mut rng);
        let anchors = construct_etf(graph.num_classes(), d, seed).unwrap();
        let ego = forward(&params, &graph).unwrap().ego;
        let train = graph.mask(fedgmc::graph::Split::Train);
        let rotation = procrustes(&class_means(&ego, graph.labels(), train, graph.num_classes()), &anchors).unwrap();
        let templates = StructuralTemplates::random(3, d, &mut rng).unwrap();
        let batch = sample_structural_batch(&graph, 8, &mut rng).unwrap();
        let radials = radial_sequences(&prop, &ego, &batch);
        let matching = sinkhorn_match(&radials, &templates, &SinkhornConfig::default()).unwrap();
        Setup {
            graph,
            prop,
            params,
            anchors,
            rotation,
            templates,
            matching,
            batch,
        }
    }

    pub fn targets(&self) -> CalibrationTargets<'_> {
        CalibrationTargets {
            anchors: &self.anchors,
            rotation: &self.rotation,
            templates: &self.templates,
            matching: &self.matching,
            batch: &self.batch,
        }
    }
}

/// Which objective a gradient check targets.
#[derive(Clone, Copy, Debug)]
pub enum Objective {
    CrossEntropy,
    Semantic,
    Structural,
    Composed,
}

/// Loss value and analytic parameter gradient of one objective.
pub fn objective(s: &Setup, params: &ModelParams, which: Objective) -> (f64, Vec<f64>) {
    let train = s.graph.mask(fedgmc::graph::Split::Train);
    match which {
        Objective::CrossEntropy => {
            let out = total_loss(params, &s.graph, &s.prop, None, LossWeights::default()).unwrap();
            (out.total, out.grads.to_flat())
        }
        Objective::Composed => {
            let out = total_loss(params, &s.graph, &s.prop, Some(s.targets()), LossWeights::default()).unwrap();
            (out.total, out.grads.to_flat())
        }
        Objective::Semantic | Objective::Structural => {
            let cache = forward(params, &s.graph).unwrap();
            let (value, d_ego) = match which {
                Objective::Semantic => {
                    semantic_loss(&cache.ego, s.graph.labels(), train, &s.rotation, &s.anchors).unwrap()
                }
                _ => {
                    let l = structural_loss(&s.matching, &s.batch, &cache.ego, &s.prop, &s.templates).unwrap();
                    (l.value, l.grad_ego)
                }
            };
            let g = backward(params, &s.graph, &s.prop, &cache, ActivationGrads { logits: None, ego: d_ego }).unwrap();
            (value, g.to_flat())
        }
    }
}

/// Central differences of `f` at `x`.
pub fn central_differences(x: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Worst relative error of the analytic gradient against finite
/// differences over `graphs` seeded setups.
pub fn worst_gradient_error(which: Objective, graphs: u64) -> f64 {
    (0..graphs)
        .map(|seed| {
            let s = Setup::new(seed);
            let (_, analytic) = objective(&s, &s.params, which);
            let flat = s.params.to_flat();
            let fd = central_differences(&flat, 1e-6, |x| {
                let p = s.params.from_flat_like(x).unwrap();
                objective(&s, &p, which).0
            });
            relative_error(&analytic, &fd)
        })
        .fold(0.0, f64::max)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    fedgmc::numerics::standard_normal_matrix(rows, cols, &mut seeded_rng(seed, &[0xCAFE]))
}
