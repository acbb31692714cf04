use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::fedsim::{
    build_clients, evaluate, export_embeddings, export_history, read_history, read_params, run_on_graph,
    write_params, HistoryRow,
};
use crate::graph::{write_graph, Split};

pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const MODELS_DIR: &str = "models";
pub const EMBEDDINGS_DIR: &str = "embeddings";

pub fn model_path(run_dir: &Path, client: usize) -> PathBuf {
    run_dir.join(MODELS_DIR).join(format!("client_{client}.params"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub homophily: f64,
}

/// Generates (or loads) the configured graph and writes it to `out`.
pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<GraphSummary> {
    let spec = cfg.dataset()?;
    let g = spec.load()?;
    write_graph(&g, out)?;
    Ok(GraphSummary {
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        homophily: g.edge_homophily(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientMetrics {
    pub client: usize,
    pub val: f64,
    pub test: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub metric: String,
    pub seed: u64,
    pub clients: usize,
    pub rounds: usize,
    pub mean_val: f64,
    pub mean_test: f64,
    pub per_client: Vec<ClientMetrics>,
}

/// Runs the federation and writes the history, summary, resolved config,
/// final models and optionally embeddings into `cfg.output.dir`.
pub fn run(cfg: &RunConfig, threads: Option<usize>) -> Result<RunSummary> {
    cfg.validate()?;
    let fed = cfg.federation()?;
    let global = cfg.dataset()?.load()?;
    let out = &cfg.output.dir;
    let outcome = run_on_graph(&fed, global, threads)?;

    create_dir(out)?;
    create_dir(&out.join(MODELS_DIR))?;
    write_file(&out.join(CONFIG_FILE), &cfg.to_toml())?;
    export_history(&outcome.history, &out.join(HISTORY_FILE))?;
    for client in &outcome.clients {
        write_params(client.params(), &model_path(out, client.id()))?;
    }
    if cfg.output.embeddings {
        let dir = out.join(EMBEDDINGS_DIR);
        create_dir(&dir)?;
        for client in &outcome.clients {
            export_embeddings(client, &dir.join(format!("client_{}.csv", client.id())))?;
        }
    }

    let per_client: Vec<ClientMetrics> = match outcome.history.last() {
        Some(last) => last
            .clients
            .iter()
            .enumerate()
            .map(|(m, c)| ClientMetrics {
                client: m,
                val: c.val_metric,
                test: c.test_metric,
            })
            .collect(),
        None => Vec::new(),
    };
    let summary = RunSummary {
        method: fed.ablation.label(),
        metric: format!("{:?}", fed.task_metric).to_lowercase(),
        seed: fed.seed,
        clients: outcome.clients.len(),
        rounds: fed.rounds,
        mean_val: mean(per_client.iter().map(|c| c.val)),
        mean_test: mean(per_client.iter().map(|c| c.test)),
        per_client,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out.join(SUMMARY_FILE), &(json + "\n"))?;
    Ok(summary)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split: String,
    pub metric: String,
    pub mean: f64,
    pub per_client: Vec<f64>,
}

/// Recomputes `split` metrics of the saved models in `run_dir`.
/// All dumps are read before anything is evaluated.
pub fn eval(cfg: &RunConfig, run_dir: &Path, split: Split) -> Result<EvalSummary> {
    cfg.validate()?;
    let fed = cfg.federation()?;
    let clients = build_clients(cfg.dataset()?.load()?, &fed)?;
    let params = (0..clients.len())
        .map(|m| read_params(&model_path(run_dir, m)))
        .collect::<Result<Vec<_>>>()?;
    let mut per_client = Vec::with_capacity(clients.len());
    for (m, (g, p)) in clients.iter().zip(&params).enumerate() {
        if p.w_ego.rows() != g.feature_dim() || p.b_cls.len() != g.num_classes() {
            return Err(Error::Format(format!(
                "client {m}: model shape {:?}/{} does not fit {} features and {} classes",
                p.w_ego.shape(),
                p.b_cls.len(),
                g.feature_dim(),
                g.num_classes()
            )));
        }
        per_client.push(evaluate(g, p, split, fed.task_metric)?);
    }
    Ok(EvalSummary {
        split: format!("{split:?}").to_lowercase(),
        metric: format!("{:?}", fed.task_metric).to_lowercase(),
        mean: mean(per_client.iter().copied()),
        per_client,
    })
}

/// One input to [`report`]: runs sharing a label are seeds of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportInput {
    pub label: String,
    pub path: PathBuf,
}

impl ReportInput {
    /// `label=path`, or a bare path labeled by its parent directory.
    pub fn parse(arg: &str) -> Self {
        if let Some((label, path)) = arg.split_once('=') {
            return Self {
                label: label.to_string(),
                path: PathBuf::from(path),
            };
        }
        let path = PathBuf::from(arg);
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| arg.to_string());
        Self { label, path }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub runs: usize,
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

/// Final-round mean metric (over clients) of each run, then mean ± std over
/// the runs of each label. Labels keep their first-seen order.
pub fn report(inputs: &[ReportInput]) -> Result<Vec<ReportRow>> {
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for input in inputs {
        let rows = read_history(&input.path)?;
        let last = rows
            .iter()
            .map(|r| r.round)
            .max()
            .ok_or_else(|| Error::Format(format!("{}: history has no rounds", input.path.display())))?;
        let final_rows: Vec<&HistoryRow> = rows.iter().filter(|r| r.round == last).collect();
        let test = mean(final_rows.iter().map(|r| r.test_metric));
        let val = mean(final_rows.iter().map(|r| r.val_metric));
        match groups.iter_mut().find(|(l, _)| *l == input.label) {
            Some((_, runs)) => runs.push((test, val)),
            None => groups.push((input.label.clone(), vec![(test, val)])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(label, runs)| {
            let test: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let val: Vec<f64> = runs.iter().map(|r| r.1).collect();
            ReportRow {
                label,
                runs: runs.len(),
                test_mean: mean(test.iter().copied()),
                test_std: std_dev(&test),
                val_mean: mean(val.iter().copied()),
                val_std: std_dev(&val),
            }
        })
        .collect())
}

/// Markdown table, metrics in percent.
pub fn format_report(rows: &[ReportRow]) -> String {
    let mut out = String::from("| method | runs | test | val |\n|---|---|---|---|\n");
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {:.2}±{:.2} | {:.2}±{:.2} |",
            r.label,
            r.runs,
            100.0 * r.test_mean,
            100.0 * r.test_std,
            100.0 * r.val_mean,
            100.0 * r.val_std
        )
        .unwrap();
    }
    out
}
