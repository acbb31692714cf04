use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClientState, RoundRecord};
use crate::error::{Error, Result};

pub const HISTORY_HEADER: &str =
    "round,client_id,ce_loss,sem_loss,str_loss,val_metric,test_metric,anchor_gram_drift,gw_objective_mean";

/// One line of the history CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub round: usize,
    pub client_id: usize,
    pub ce_loss: f64,
    pub sem_loss: f64,
    pub str_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
    pub anchor_gram_drift: f64,
    pub gw_objective_mean: f64,
}

impl HistoryRow {
    pub fn from_records(records: &[RoundRecord]) -> Vec<HistoryRow> {
        records
            .iter()
            .flat_map(|r| {
                let gw = r.gw_objective_mean();
                r.clients.iter().enumerate().map(move |(m, c)| HistoryRow {
                    round: r.round,
                    client_id: m,
                    ce_loss: c.ce_loss,
                    sem_loss: c.sem_loss,
                    str_loss: c.str_loss,
                    val_metric: c.val_metric,
                    test_metric: c.test_metric,
                    anchor_gram_drift: r.anchor_gram_drift,
                    gw_objective_mean: gw,
                })
            })
            .collect()
    }
}

/// Writes one row per (round, client). Floats use the shortest
/// representation that parses back to the same value.
pub fn export_history(records: &[RoundRecord], path: &Path) -> Result<()> {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in HistoryRow::from_records(records) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.round,
            r.client_id,
            r.ce_loss,
            r.sem_loss,
            r.str_loss,
            r.val_metric,
            r.test_metric,
            r.anchor_gram_drift,
            r.gw_objective_mean
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "missing or unexpected history header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let int = |k: usize| fields[k].parse::<usize>().map_err(|_| err(format!("bad integer '{}'", fields[k])));
        let float = |k: usize| fields[k].parse::<f64>().map_err(|_| err(format!("bad number '{}'", fields[k])));
        rows.push(HistoryRow {
            round: int(0)?,
            client_id: int(1)?,
            ce_loss: float(2)?,
            sem_loss: float(3)?,
            str_loss: float(4)?,
            val_metric: float(5)?,
            test_metric: float(6)?,
            anchor_gram_drift: float(7)?,
            gw_objective_mean: float(8)?,
        });
    }
    Ok(rows)
}

/// `node_id,label,e_0..e_{d-1}` with calibrated ego-embeddings; node ids
/// are global, unlabeled nodes get `-1`.
pub fn export_embeddings(client: &ClientState, path: &Path) -> Result<()> {
    let emb = client.calibrated_embeddings()?;
    let mut out = String::from("node_id,label");
    for j in 0..emb.cols() {
        write!(out, ",e_{j}").unwrap();
    }
    out.push('\n');
    let g = client.graph();
    for v in 0..g.num_nodes() {
        let label = g.label(v).map_or(-1, |y| y as i64);
        write!(out, "{},{label}", g.global_ids()[v]).unwrap();
        for x in emb.row(v) {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
