//! Plain-text graph files.
//!
//! * edges: one `u v` pair per line, 0-based; `#` starts a comment
//! * features: one whitespace-separated row per node
//! * labels: one integer per node, `-1` for unlabeled

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a graph from the three text files. When `num_classes` is `None`
/// it is inferred as `max label + 1`.
pub fn load_graph(
    edges_path: &Path,
    features_path: &Path,
    labels_path: &Path,
    num_classes: Option<usize>,
) -> Result<Graph> {
    let feat_text = read(features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(&feat_text) {
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(features_path, line_no, format!("bad feature value '{tok}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    features_path,
                    line_no,
                    format!("expected {} features, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(features_path, 0, "no feature rows"));
    }
    let n = rows.len();
    let features = Matrix::from_rows(&rows)?;

    let label_text = read(labels_path)?;
    let mut labels = Vec::with_capacity(n);
    for (line_no, line) in content_lines(&label_text) {
        let value: i64 = line
            .parse()
            .map_err(|_| parse_err(labels_path, line_no, format!("bad label '{line}'")))?;
        let label = match value {
            -1 => None,
            v if v >= 0 => Some(v as usize),
            v => return Err(parse_err(labels_path, line_no, format!("negative label {v}"))),
        };
        if let (Some(l), Some(c)) = (label, num_classes) {
            if l >= c {
                return Err(Error::Value(format!(
                    "{}:{line_no}: label {l} out of range for {c} classes",
                    labels_path.display()
                )));
            }
        }
        labels.push(label);
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} has {} labels but {} has {n} feature rows",
            labels_path.display(),
            labels.len(),
            features_path.display()
        )));
    }
    let num_classes = num_classes.unwrap_or_else(|| labels.iter().flatten().max().map_or(1, |m| m + 1));

    let edge_text = read(edges_path)?;
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(&edge_text) {
        let mut toks = line.split_whitespace();
        let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(parse_err(edges_path, line_no, "expected 'u v'"));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| parse_err(edges_path, line_no, format!("bad node id '{t}'")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= n || v >= n {
            return Err(Error::Value(format!(
                "{}:{line_no}: edge ({u}, {v}) references a node outside 0..{n}",
                edges_path.display()
            )));
        }
        edges.push((u, v));
    }

    Graph::new(features, &edges, labels, num_classes)
}

/// Writes `edges.txt`, `features.txt` and `labels.txt` into `dir`.
pub fn write_graph(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for (u, v) in g.edges() {
        writeln!(edges, "{u} {v}").unwrap();
    }
    let mut feats = String::new();
    for v in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(v).iter().map(|x| x.to_string()).collect();
        writeln!(feats, "{}", row.join(" ")).unwrap();
    }
    let mut labels = String::new();
    for l in g.labels() {
        match l {
            Some(c) => writeln!(labels, "{c}").unwrap(),
            None => writeln!(labels, "-1").unwrap(),
        }
    }
    for (name, body) in [("edges.txt", edges), ("features.txt", feats), ("labels.txt", labels)] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmParams};

    fn write_files(dir: &Path, edges: &str, feats: &str, labels: &str) {
        fs::write(dir.join("e.txt"), edges).unwrap();
        fs::write(dir.join("f.txt"), feats).unwrap();
        fs::write(dir.join("l.txt"), labels).unwrap();
    }

    fn load(dir: &Path, c: Option<usize>) -> Result<Graph> {
        load_graph(&dir.join("e.txt"), &dir.join("f.txt"), &dir.join("l.txt"), c)
    }

    #[test]
    fn parses_comments_and_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), "# header\n0 1\n1 2 # trailing\n\n", "1 2\n3 4\n5 6\n", "0\n-1\n1\n");
        let g = load(dir.path(), None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.num_classes(), 2);
        assert_eq!(g.label(1), None);
        assert_eq!(g.features().row(2), &[5.0, 6.0]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), "0 1\n1 x\n", "1\n2\n", "0\n0\n");
        match load(dir.path(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        write_files(dir.path(), "0 1\n", "1 2\n3\n", "0\n0\n");
        assert!(matches!(load(dir.path(), None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn label_out_of_range_is_value_error() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), "0 1\n", "1\n2\n", "0\n5\n");
        assert!(matches!(load(dir.path(), Some(3)), Err(Error::Value(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load(dir.path(), None).unwrap_err();
        assert!(err.to_string().contains("f.txt"));
    }

    #[test]
    fn write_then_load_round_trips() {
        let g = generate_sbm(&SbmParams {
            num_nodes: 50,
            num_classes: 3,
            p_in: 0.2,
            p_out: 0.05,
            feature_dim: 3,
            feature_sep: 1.5,
            seed: 8,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_graph(&g, dir.path()).unwrap();
        let back = load_graph(
            &dir.path().join("edges.txt"),
            &dir.path().join("features.txt"),
            &dir.path().join("labels.txt"),
            Some(3),
        )
        .unwrap();
        assert_eq!(back, g);
    }
}
