//! Run configuration file. TOML with one table per section:
//!
//! ```toml
//! [data]
//! source = "sbm"          # or "files"
//! num_nodes = 600
//! num_classes = 2
//! p_in = 0.01
//! p_out = 0.05
//! feature_dim = 8
//! feature_sep = 1.0
//! seed = 0
//! # for source = "files"; relative paths resolve against the config file
//! # edges = "graph/edges.txt"
//! # features = "graph/features.txt"
//! # labels = "graph/labels.txt"
//!
//! [federation]
//! clients = 5
//! rounds = 60
//! local_epochs = 3
//! embed_dim = 8
//! batch_size = 32
//! templates = 4
//! partition = "non-overlapping"   # or "overlapping"
//! split = [0.2, 0.4, 0.4]
//! metric = "accuracy"             # or "auc"
//! ablate = "none"                 # comma list of semantic, structural, refinement, or local
//! seed = 0
//!
//! [optim]
//! lr = 0.2
//! lr_decay_steps = 20.0
//! semantic_weight = 1.0
//! structural_weight = 1.0
//!
//! [refine]
//! tau = 1.0
//! eta = 0.1
//! eps = 1e-8
//! gw_tol = 1e-10
//! gw_iters = 200
//!
//! [sinkhorn]
//! epsilon = 0.05
//! max_iters = 500
//! tol = 1e-6
//!
//! [output]
//! dir = "out"
//! embeddings = false
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedsim::{Ablation, DatasetSpec, FederationConfig, TaskMetric};
use crate::graph::{PartitionMode, SbmParams, DEFAULT_SPLIT};
use crate::model::{LossWeights, LrSchedule};
use crate::refine::RefineConfig;
use crate::structural::SinkhornConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Sbm,
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_sep: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: DataSource::Sbm,
            num_nodes: 600,
            num_classes: 2,
            p_in: 0.01,
            p_out: 0.05,
            feature_dim: 8,
            feature_sep: 1.0,
            seed: 0,
            edges: None,
            features: None,
            labels: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationSection {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub embed_dim: usize,
    pub batch_size: usize,
    pub templates: usize,
    pub partition: PartitionMode,
    pub split: [f64; 3],
    pub metric: TaskMetric,
    pub ablate: String,
    pub seed: u64,
}

impl Default for FederationSection {
    fn default() -> Self {
        let d = FederationConfig::default();
        Self {
            clients: d.num_clients,
            rounds: d.rounds,
            local_epochs: d.local_epochs,
            embed_dim: d.embed_dim,
            batch_size: d.batch_size,
            templates: d.num_templates,
            partition: d.partition,
            split: DEFAULT_SPLIT,
            metric: d.task_metric,
            ablate: "none".into(),
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimSection {
    pub lr: f64,
    pub lr_decay_steps: f64,
    pub semantic_weight: f64,
    pub structural_weight: f64,
}

impl Default for OptimSection {
    fn default() -> Self {
        let lr = LrSchedule::default();
        let w = LossWeights::default();
        Self {
            lr: lr.base,
            lr_decay_steps: lr.decay_steps,
            semantic_weight: w.semantic,
            structural_weight: w.structural,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub embeddings: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            embeddings: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub federation: FederationSection,
    pub optim: OptimSection,
    #[serde(with = "refine_section")]
    pub refine: RefineConfig,
    #[serde(with = "sinkhorn_section")]
    pub sinkhorn: SinkhornConfig,
    pub output: OutputSection,
}

// The library structs derive serde without `default`; these shims let the
// file omit any of their keys.
mod refine_section {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Section {
        tau: f64,
        eta: f64,
        eps: f64,
        gw_tol: f64,
        gw_iters: usize,
    }

    impl Default for Section {
        fn default() -> Self {
            let d = RefineConfig::default();
            Section {
                tau: d.tau,
                eta: d.eta,
                eps: d.eps,
                gw_tol: d.gw_tol,
                gw_iters: d.gw_iters,
            }
        }
    }

    pub fn serialize<S: serde::Serializer>(c: &RefineConfig, s: S) -> std::result::Result<S::Ok, S::Error> {
        Section {
            tau: c.tau,
            eta: c.eta,
            eps: c.eps,
            gw_tol: c.gw_tol,
            gw_iters: c.gw_iters,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<RefineConfig, D::Error> {
        let s = Section::deserialize(d)?;
        Ok(RefineConfig {
            tau: s.tau,
            eta: s.eta,
            eps: s.eps,
            gw_tol: s.gw_tol,
            gw_iters: s.gw_iters,
        })
    }
}

mod sinkhorn_section {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Section {
        epsilon: f64,
        max_iters: usize,
        tol: f64,
    }

    impl Default for Section {
        fn default() -> Self {
            let d = SinkhornConfig::default();
            Section {
                epsilon: d.epsilon,
                max_iters: d.max_iters,
                tol: d.tol,
            }
        }
    }

    pub fn serialize<S: serde::Serializer>(c: &SinkhornConfig, s: S) -> std::result::Result<S::Ok, S::Error> {
        Section {
            epsilon: c.epsilon,
            max_iters: c.max_iters,
            tol: c.tol,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<SinkhornConfig, D::Error> {
        let s = Section::deserialize(d)?;
        Ok(SinkhornConfig {
            epsilon: s.epsilon,
            max_iters: s.max_iters,
            tol: s.tol,
        })
    }
}

impl RunConfig {
    /// Parses `text`; relative data paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for p in [&mut cfg.data.edges, &mut cfg.data.features, &mut cfg.data.labels]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Sets both the data seed and the federation seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.federation.seed = seed;
    }

    pub fn ablation(&self) -> Result<Ablation> {
        self.federation.ablate.parse()
    }

    pub fn federation(&self) -> Result<FederationConfig> {
        let f = &self.federation;
        Ok(FederationConfig {
            num_clients: f.clients,
            rounds: f.rounds,
            local_epochs: f.local_epochs,
            embed_dim: f.embed_dim,
            batch_size: f.batch_size,
            num_templates: f.templates,
            lr: LrSchedule {
                base: self.optim.lr,
                decay_steps: self.optim.lr_decay_steps,
            },
            loss_weights: LossWeights {
                semantic: self.optim.semantic_weight,
                structural: self.optim.structural_weight,
            },
            refine: self.refine,
            sinkhorn: self.sinkhorn,
            partition: f.partition,
            split: f.split,
            task_metric: f.metric,
            ablation: self.ablation()?,
            seed: f.seed,
        })
    }

    pub fn dataset(&self) -> Result<DatasetSpec> {
        let d = &self.data;
        match d.source {
            DataSource::Sbm => Ok(DatasetSpec::Sbm(SbmParams {
                num_nodes: d.num_nodes,
                num_classes: d.num_classes,
                p_in: d.p_in,
                p_out: d.p_out,
                feature_dim: d.feature_dim,
                feature_sep: d.feature_sep,
                seed: d.seed,
            })),
            DataSource::Files => {
                let need = |p: &Option<PathBuf>, key: &str| {
                    p.clone()
                        .ok_or_else(|| Error::Config(format!("data.source = \"files\" needs data.{key}")))
                };
                Ok(DatasetSpec::Files {
                    edges: need(&d.edges, "edges")?,
                    features: need(&d.features, "features")?,
                    labels: need(&d.labels, "labels")?,
                    num_classes: Some(d.num_classes),
                })
            }
        }
    }

    /// Checks everything that can be checked without loading the graph.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        match self.dataset()? {
            DatasetSpec::Sbm(p) => p.validate().map_err(wrap)?,
            DatasetSpec::Files {
                edges, features, labels, ..
            } => {
                for p in [edges, features, labels] {
                    if !p.is_file() {
                        return Err(Error::Config(format!("dataset file not found: {}", p.display())));
                    }
                }
            }
        }
        let split_sum: f64 = self.federation.split.iter().sum();
        if self.federation.split.iter().any(|&r| !(r >= 0.0)) || (split_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "federation.split must be non-negative and sum to 1, got {:?}",
                self.federation.split
            )));
        }
        self.federation()?.validate(self.data.num_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", Path::new(".")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        let fed = cfg.federation().unwrap();
        assert_eq!(fed, FederationConfig::default());
    }

    #[test]
    fn sections_and_dotted_keys() {
        let text = r#"
            federation.rounds = 7
            [data]
            p_in = 0.2
            [optim]
            lr = 0.05
            [refine]
            eta = 0.3
            [sinkhorn]
            epsilon = 0.1
        "#;
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        let fed = cfg.federation().unwrap();
        assert_eq!(fed.rounds, 7);
        assert_eq!(fed.lr.base, 0.05);
        assert_eq!(fed.refine.eta, 0.3);
        assert_eq!(fed.refine.tau, RefineConfig::default().tau);
        assert_eq!(fed.sinkhorn.epsilon, 0.1);
        assert_eq!(cfg.data.p_in, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["[federation]\nrouns = 3", "[nope]\nx = 1", "[refine]\ngw_lr = 0.1", "top = 1"] {
            assert!(matches!(RunConfig::parse(text, Path::new(".")), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.federation.ablate = "semantic,refinement".into();
        cfg.data.source = DataSource::Files;
        cfg.data.edges = Some("/tmp/e.txt".into());
        let back = RunConfig::parse(&cfg.to_toml(), Path::new("/elsewhere")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let cfg = RunConfig::parse("[data]\nsource = \"files\"\nedges = \"g/e.txt\"", Path::new("/cfg")).unwrap();
        assert_eq!(cfg.data.edges.as_deref(), Some(Path::new("/cfg/g/e.txt")));
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let bad = [
            "[federation]\nclients = 0",
            "[federation]\nsplit = [0.5, 0.5, 0.5]",
            "[federation]\nablate = \"everything\"",
            "[federation]\nembed_dim = 1",
            "[optim]\nlr = -1.0",
            "[data]\np_in = 2.0",
            "[data]\nsource = \"files\"",
            "[data]\nsource = \"files\"\nedges = \"missing-e\"\nfeatures = \"missing-f\"\nlabels = \"missing-l\"",
        ];
        for text in bad {
            let r = RunConfig::parse(text, Path::new("/nonexistent")).and_then(|c| c.validate());
            assert!(matches!(r, Err(Error::Config(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn seed_override_sets_both_seeds() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(42);
        assert_eq!(cfg.data.seed, 42);
        assert_eq!(cfg.federation().unwrap().seed, 42);
    }
}
