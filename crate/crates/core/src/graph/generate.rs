use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::numerics::{normalize_in_place, seeded_rng, Matrix};

/// Stochastic block model with Gaussian class-conditional features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Norm of each class mean in feature space.
    pub feature_sep: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.feature_sep >= 0.0) || !self.feature_sep.is_finite() {
            return Err(Error::Parameter(format!("feature_sep = {} must be >= 0", self.feature_sep)));
        }
        if self.num_nodes == 0 || self.num_classes == 0 || self.feature_dim == 0 {
            return Err(Error::Parameter("SBM sizes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Classes are balanced (sizes differ by at most one)
/// and randomly placed; every node is labeled. Masks are left empty.
pub fn generate_sbm(params: &SbmParams) -> Result<Graph> {
    params.validate()?;
    let n = params.num_nodes;
    let c = params.num_classes;

    let mut label_rng = seeded_rng(params.seed, &[0x0_1ABE]);
    let mut labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    labels.shuffle(&mut label_rng);

    let mut edge_rng = seeded_rng(params.seed, &[0x0_ED6E]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { params.p_in } else { params.p_out };
            if edge_rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut feat_rng = seeded_rng(params.seed, &[0x0_FEA7]);
    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let mut m: Vec<f64> = (0..params.feature_dim)
                .map(|_| StandardNormal.sample(&mut feat_rng))
                .collect();
            normalize_in_place(&mut m);
            m.iter_mut().for_each(|x| *x *= params.feature_sep);
            m
        })
        .collect();
    let mut features = Matrix::zeros(n, params.feature_dim);
    for v in 0..n {
        for (x, mu) in features.row_mut(v).iter_mut().zip(&means[labels[v]]) {
            let noise: f64 = StandardNormal.sample(&mut feat_rng);
            *x = mu + noise;
        }
    }

    Graph::new(features, &edges, labels.into_iter().map(Some).collect(), c)
}
