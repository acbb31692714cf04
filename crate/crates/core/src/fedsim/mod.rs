//! Federated simulation: per-round client training against shared anchors
//! and templates, followed by server-side refinement.
//!
//! Clients never exchange parameters. Each round the server broadcasts the
//! anchors and templates; each client uploads calibrated class means,
//! per-class losses, radial sequences and its matching matrix.

mod history;
mod metrics;
mod persist;

use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use history::{export_embeddings, export_history, read_history, HistoryRow, HISTORY_HEADER};
pub use metrics::{accuracy, auc, evaluate, TaskMetric};
pub use persist::{read_params, write_params};

use crate::error::{Error, Result};
use crate::graph::{
    generate_sbm, load_graph, partition_nonoverlapping, partition_overlapping, split_masks, Graph, PartitionMode,
    PartitionSpec, SbmParams, Split, DEFAULT_SPLIT,
};
use crate::model::{forward_with, sgd_step, total_loss, CalibrationTargets, LossWeights, LrSchedule, ModelParams, Propagation};
use crate::numerics::{seeded_rng, Matrix};
use crate::refine::{
    refine_all_anchors, template_objective, update_all_templates, RefineConfig, SemanticReport, StructuralReport,
};
use crate::semantic::{class_means, construct_etf, per_class_semantic_loss, procrustes, CalibrationRotation, EtfAnchors};
use crate::structural::{
    radial_sequences, sample_structural_batch, sinkhorn_match, MatchingMatrix, SinkhornConfig, StructuralTemplates,
};

const PARAM_TAG: u64 = 0x0_1417;
const BATCH_TAG: u64 = 0x0_BA7C;
const TEMPLATE_TAG: u64 = 0x0_7E30;
const SPLIT_TAG: u64 = 0x0_5917;

/// Mechanisms switched off for a reduced run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_semantic: bool,
    pub no_structural: bool,
    pub no_refinement: bool,
}

impl Ablation {
    pub const LOCAL: Ablation = Ablation {
        no_semantic: true,
        no_structural: true,
        no_refinement: true,
    };

    pub fn is_full(&self) -> bool {
        *self == Ablation::default()
    }

    pub fn label(&self) -> String {
        if self.is_full() {
            return "full".into();
        }
        if *self == Ablation::LOCAL {
            return "local".into();
        }
        let mut parts = Vec::new();
        if self.no_semantic {
            parts.push("semantic");
        }
        if self.no_structural {
            parts.push("structural");
        }
        if self.no_refinement {
            parts.push("refinement");
        }
        format!("w/o {}", parts.join("+"))
    }
}

impl FromStr for Ablation {
    type Err = Error;

    /// Comma-separated subset of `semantic`, `structural`, `refinement`,
    /// or `local` for all three; `none` or empty for the full method.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Ablation::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "semantic" => out.no_semantic = true,
                "structural" => out.no_structural = true,
                "refinement" => out.no_refinement = true,
                "local" => out = Ablation::LOCAL,
                "none" => {}
                other => return Err(Error::Config(format!("unknown ablation '{other}'"))),
            }
        }
        Ok(out)
    }
}

/// Where the global graph comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DatasetSpec {
    Sbm(SbmParams),
    Files {
        edges: PathBuf,
        features: PathBuf,
        labels: PathBuf,
        num_classes: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSpec::Sbm(p) => generate_sbm(p),
            DatasetSpec::Files {
                edges,
                features,
                labels,
                num_classes,
            } => load_graph(edges, features, labels, *num_classes),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub embed_dim: usize,
    /// Nodes sampled per client for structural matching.
    pub batch_size: usize,
    pub num_templates: usize,
    pub lr: LrSchedule,
    pub loss_weights: LossWeights,
    pub refine: RefineConfig,
    pub sinkhorn: SinkhornConfig,
    pub partition: PartitionMode,
    pub split: [f64; 3],
    pub task_metric: TaskMetric,
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            num_clients: 5,
            rounds: 60,
            local_epochs: 3,
            embed_dim: 8,
            batch_size: 32,
            num_templates: 4,
            lr: LrSchedule::default(),
            loss_weights: LossWeights::default(),
            refine: RefineConfig::default(),
            sinkhorn: SinkhornConfig::default(),
            partition: PartitionMode::NonOverlapping,
            split: DEFAULT_SPLIT,
            task_metric: TaskMetric::Accuracy,
            ablation: Ablation::default(),
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        for (name, v) in [
            ("num_clients", self.num_clients),
            ("local_epochs", self.local_epochs),
            ("embed_dim", self.embed_dim),
            ("batch_size", self.batch_size),
            ("num_templates", self.num_templates),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.embed_dim < num_classes {
            return Err(Error::Config(format!(
                "embed_dim {} must be >= number of classes {num_classes}",
                self.embed_dim
            )));
        }
        if self.task_metric == TaskMetric::Auc && num_classes != 2 {
            return Err(Error::Config(format!("AUC needs a binary task, data has {num_classes} classes")));
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.lr.validate().map_err(wrap)?;
        self.refine.validate().map_err(wrap)?;
        self.sinkhorn.validate().map_err(wrap)?;
        for w in [self.loss_weights.semantic, self.loss_weights.structural] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("loss weights must be >= 0, got {w}")));
            }
        }
        if self.num_clients > 1 {
            PartitionSpec {
                num_clients: self.num_clients,
                mode: self.partition,
                seed: self.seed,
            }
            .validate()
            .map_err(wrap)?;
        }
        Ok(())
    }

    fn weights(&self) -> LossWeights {
        LossWeights {
            semantic: if self.ablation.no_semantic { 0.0 } else { self.loss_weights.semantic },
            structural: if self.ablation.no_structural { 0.0 } else { self.loss_weights.structural },
        }
    }
}

/// Splits the global graph into train/val/test and then into client subgraphs.
pub fn build_clients(global: Graph, cfg: &FederationConfig) -> Result<Vec<Graph>> {
    let g = split_masks(global, cfg.split, cfg.seed ^ SPLIT_TAG)?;
    if cfg.num_clients == 1 {
        return Ok(vec![g]);
    }
    let spec = PartitionSpec {
        num_clients: cfg.num_clients,
        mode: cfg.partition,
        seed: cfg.seed,
    };
    match cfg.partition {
        PartitionMode::NonOverlapping => partition_nonoverlapping(&g, &spec),
        PartitionMode::Overlapping => partition_overlapping(&g, &spec),
    }
}

/// One client's private state. Only the orchestrator that owns the whole
/// `Vec<ClientState>` can reach more than one of them.
#[derive(Clone, Debug)]
pub struct ClientState {
    id: usize,
    graph: Graph,
    prop: Propagation,
    params: ModelParams,
    rotation: CalibrationRotation,
    step: usize,
}

impl ClientState {
    pub fn new(id: usize, graph: Graph, embed_dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[PARAM_TAG, id as u64]);
        let params = ModelParams::init(graph.feature_dim(), embed_dim, graph.num_classes(), &mut rng);
        Self {
            id,
            prop: Propagation::new(&graph),
            rotation: CalibrationRotation::identity(embed_dim),
            graph,
            params,
            step: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn rotation(&self) -> &CalibrationRotation {
        &self.rotation
    }

    pub fn evaluate(&self, split: Split, metric: TaskMetric) -> Result<f64> {
        evaluate(&self.graph, &self.params, split, metric)
    }

    /// Calibrated ego-embeddings `R h_v` for every node.
    pub fn calibrated_embeddings(&self) -> Result<Matrix> {
        let cache = forward_with(&self.params, &self.graph, &self.prop)?;
        Ok(self.rotation.apply_rows(&cache.ego))
    }

    fn run_round(&mut self, round: usize, broadcast: &Broadcast, cfg: &FederationConfig) -> Result<ClientUpload> {
        let weights = cfg.weights();
        let structural_on = !cfg.ablation.no_structural;
        let labels = self.graph.labels();
        let train = self.graph.mask(Split::Train);
        let c = self.graph.num_classes();

        let cache = forward_with(&self.params, &self.graph, &self.prop)?;
        let manifold = class_means(&cache.ego, labels, train, c);
        self.rotation = procrustes(&manifold, &broadcast.anchors)?;

        let mut batch_rng = seeded_rng(cfg.seed, &[BATCH_TAG, self.id as u64, round as u64]);
        let (batch, matching) = if structural_on {
            let batch = sample_structural_batch(&self.graph, cfg.batch_size, &mut batch_rng)?;
            let radials = radial_sequences(&self.prop, &cache.ego, &batch);
            let f = sinkhorn_match(&radials, &broadcast.templates, &cfg.sinkhorn)?;
            (batch, f)
        } else {
            (Vec::new(), MatchingMatrix::from_matrix(Matrix::zeros(0, broadcast.templates.len()))?)
        };

        let targets = CalibrationTargets {
            anchors: &broadcast.anchors,
            rotation: &self.rotation,
            templates: &broadcast.templates,
            matching: &matching,
            batch: &batch,
        };
        let mut epoch_losses = Vec::with_capacity(cfg.local_epochs + 1);
        for _ in 0..cfg.local_epochs {
            let out = total_loss(&self.params, &self.graph, &self.prop, Some(targets), weights)?;
            epoch_losses.push(out.total);
            self.params = sgd_step(&self.params, &out.grads, cfg.lr.rate(self.step))?;
            self.step += 1;
        }
        // report every calibration term, even the ones switched off for training
        let post = total_loss(&self.params, &self.graph, &self.prop, Some(targets), LossWeights::default())?;
        epoch_losses.push(post.ce + weights.semantic * post.semantic + weights.structural * post.structural);

        let cache = forward_with(&self.params, &self.graph, &self.prop)?;
        let manifold = class_means(&cache.ego, labels, train, c);
        let mut k = self.rotation.matrix().matmul(&manifold.p)?;
        for (i, present) in manifold.present.iter().enumerate() {
            if !present {
                k.set_column(i, &vec![0.0; k.rows()]);
            }
        }
        let semantic = SemanticReport {
            k,
            present: manifold.present.clone(),
            per_class_loss: per_class_semantic_loss(&cache.ego, labels, train, &self.rotation, &broadcast.anchors),
        };
        let structural = structural_on.then(|| StructuralReport {
            radials: radial_sequences(&self.prop, &cache.ego, &batch),
            f: matching,
        });

        Ok(ClientUpload {
            semantic,
            structural,
            stats: ClientRoundStats {
                ce_loss: post.ce,
                sem_loss: if cfg.ablation.no_semantic { 0.0 } else { post.semantic },
                str_loss: if structural_on { post.structural } else { 0.0 },
                val_metric: self.evaluate(Split::Val, cfg.task_metric)?,
                test_metric: self.evaluate(Split::Test, cfg.task_metric)?,
                epoch_losses,
            },
        })
    }
}

/// Server state sent to every client at the start of a round.
#[derive(Clone, Debug, PartialEq)]
pub struct Broadcast {
    pub anchors: EtfAnchors,
    pub templates: StructuralTemplates,
}

/// Everything a client sends back; no raw features, labels or parameters.
#[derive(Clone, Debug)]
struct ClientUpload {
    semantic: SemanticReport,
    structural: Option<StructuralReport>,
    stats: ClientRoundStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundStats {
    pub ce_loss: f64,
    pub sem_loss: f64,
    pub str_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
    /// Training objective before each local epoch, then after the last.
    pub epoch_losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub clients: Vec<ClientRoundStats>,
    pub anchor_gram_drift: f64,
    pub max_anchor_chord: f64,
    pub gw_objectives: Vec<f64>,
    /// Per template: objective before the update, for descent checks.
    pub gw_objectives_before: Vec<f64>,
}

impl RoundRecord {
    pub fn mean_test_metric(&self) -> f64 {
        self.clients.iter().map(|c| c.test_metric).sum::<f64>() / self.clients.len() as f64
    }

    pub fn mean_val_metric(&self) -> f64 {
        self.clients.iter().map(|c| c.val_metric).sum::<f64>() / self.clients.len() as f64
    }

    /// Semantic plus structural loss summed over clients.
    pub fn calibration_loss(&self) -> f64 {
        self.clients.iter().map(|c| c.sem_loss + c.str_loss).sum()
    }

    pub fn gw_objective_mean(&self) -> f64 {
        if self.gw_objectives.is_empty() {
            0.0
        } else {
            self.gw_objectives.iter().sum::<f64>() / self.gw_objectives.len() as f64
        }
    }
}

pub struct FederationOutcome {
    pub history: Vec<RoundRecord>,
    pub clients: Vec<ClientState>,
    pub broadcast: Broadcast,
}

impl FederationOutcome {
    pub fn final_mean_test(&self) -> Option<f64> {
        self.history.last().map(RoundRecord::mean_test_metric)
    }
}

/// Loads the dataset and runs the federation on the default thread pool.
pub fn run_federation(cfg: &FederationConfig, dataset: &DatasetSpec) -> Result<FederationOutcome> {
    run_on_graph(cfg, dataset.load()?, None)
}

/// Runs the federation on `global`. `threads` limits client parallelism;
/// results do not depend on it.
pub fn run_on_graph(cfg: &FederationConfig, global: Graph, threads: Option<usize>) -> Result<FederationOutcome> {
    cfg.validate(global.num_classes())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg, global))
}

fn run_inner(cfg: &FederationConfig, global: Graph) -> Result<FederationOutcome> {
    let c = global.num_classes();
    let mut clients: Vec<ClientState> = build_clients(global, cfg)?
        .into_iter()
        .enumerate()
        .map(|(m, g)| ClientState::new(m, g, cfg.embed_dim, cfg.seed))
        .collect();
    let mut broadcast = Broadcast {
        anchors: construct_etf(c, cfg.embed_dim, cfg.seed)?,
        templates: StructuralTemplates::random(
            cfg.num_templates,
            cfg.embed_dim,
            &mut seeded_rng(cfg.seed, &[TEMPLATE_TAG]),
        )?,
    };
    let mut history = Vec::with_capacity(cfg.rounds);
    let mut unconverged = 0usize;

    for round in 1..=cfg.rounds {
        let snapshot = broadcast.clone();
        let uploads: Vec<Result<ClientUpload>> = clients
            .par_iter_mut()
            .map(|client| {
                client.run_round(round, &snapshot, cfg).map_err(|e| Error::Federation {
                    client: client.id,
                    round,
                    source: Box::new(e),
                })
            })
            .collect();
        let uploads = uploads.into_iter().collect::<Result<Vec<_>>>()?;

        let semantic: Vec<SemanticReport> = uploads.iter().map(|u| u.semantic.clone()).collect();
        let structural: Vec<StructuralReport> = uploads.iter().filter_map(|u| u.structural.clone()).collect();
        unconverged += structural.iter().filter(|r| !r.f.stats.converged).count();

        let (drift, chord) = if cfg.ablation.no_refinement {
            (broadcast.anchors.gram_drift(), 0.0)
        } else {
            let r = refine_all_anchors(&broadcast.anchors, &semantic, &cfg.refine)?;
            broadcast.anchors = r.anchors;
            (r.drift, r.max_chord)
        };

        let (gw_after, gw_before) = if cfg.ablation.no_structural {
            (Vec::new(), Vec::new())
        } else if cfg.ablation.no_refinement {
            let obj = (0..broadcast.templates.len())
                .map(|q| template_objective(q, &structural, broadcast.templates.get(q)))
                .collect::<Result<Vec<f64>>>()?;
            (obj.clone(), obj)
        } else {
            let round_seed = cfg.seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (next, updates) = update_all_templates(&structural, &broadcast.templates, &cfg.refine, round_seed)?;
            broadcast.templates = next;
            (
                updates.iter().map(|u| u.objective_after).collect(),
                updates.iter().map(|u| u.objective_before).collect(),
            )
        };

        let record = RoundRecord {
            round,
            clients: uploads.into_iter().map(|u| u.stats).collect(),
            anchor_gram_drift: drift,
            max_anchor_chord: chord,
            gw_objectives: gw_after,
            gw_objectives_before: gw_before,
        };
        log::info!(
            "round {round}: mean test {:.4}, calibration loss {:.6}",
            record.mean_test_metric(),
            record.calibration_loss()
        );
        history.push(record);
    }
    if unconverged > 0 {
        log::warn!(
            "{unconverged} of {} matching solves hit the Sinkhorn iteration limit",
            cfg.rounds * clients.len()
        );
    }

    Ok(FederationOutcome {
        history,
        clients,
        broadcast,
    })
}
