//! Text dump of model parameters:
//!
//! ```text
//! fedgmc-params 1
//! w_ego <rows> <cols>
//! <one line of values per row>
//! w_cls <rows> <cols>
//! ...
//! b_cls 1 <len>
//! <values>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::Matrix;

const MAGIC: &str = "fedgmc-params";
const VERSION: u32 = 1;

fn write_block(out: &mut String, name: &str, m: &Matrix) {
    writeln!(out, "{name} {} {}", m.rows(), m.cols()).unwrap();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

pub fn write_params(params: &ModelParams, path: &Path) -> Result<()> {
    let mut out = format!("{MAGIC} {VERSION}\n");
    write_block(&mut out, "w_ego", &params.w_ego);
    write_block(&mut out, "w_cls", &params.w_cls);
    let bias = Matrix::from_vec(1, params.b_cls.len(), params.b_cls.clone())?;
    write_block(&mut out, "b_cls", &bias);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_block<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<Matrix> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("missing '{name}' block")))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match toks.as_slice() {
        [n, r, c] if *n == name => (
            r.parse::<usize>().map_err(|_| Error::Format(format!("bad row count in '{header}'")))?,
            c.parse::<usize>().map_err(|_| Error::Format(format!("bad column count in '{header}'")))?,
        ),
        _ => return Err(Error::Format(format!("expected '{name} <rows> <cols>', found '{header}'"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{name}: missing row {r}")))?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Format(format!("{name}: bad value in row {r}")))?;
        if vals.len() != cols {
            return Err(Error::Format(format!("{name}: row {r} has {} values, expected {cols}", vals.len())));
        }
        data.extend(vals);
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
        Some(t) if t.len() == 2 && t[0] == MAGIC => {
            if t[1] != VERSION.to_string() {
                return Err(Error::Format(format!("unsupported parameter version {}", t[1])));
            }
        }
        _ => return Err(Error::Format(format!("{} is not a parameter dump", path.display()))),
    }
    let w_ego = read_block(&mut lines, "w_ego")?;
    let w_cls = read_block(&mut lines, "w_cls")?;
    let bias = read_block(&mut lines, "b_cls")?;
    if lines.next().is_some() {
        return Err(Error::Format("trailing data after parameter blocks".into()));
    }
    if bias.rows() != 1 || w_cls.rows() != 3 * w_ego.cols() || w_cls.cols() != bias.cols() {
        return Err(Error::Format(format!(
            "inconsistent shapes: w_ego {:?}, w_cls {:?}, b_cls {:?}",
            w_ego.shape(),
            w_cls.shape(),
            bias.shape()
        )));
    }
    Ok(ModelParams {
        w_ego,
        w_cls,
        b_cls: bias.into_vec(),
    })
}
