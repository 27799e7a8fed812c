//! CSV and JSON file formats.
//!
//! Floats in CSV files are written with 17 significant digits so that two
//! runs can be compared byte for byte; JSON uses the shortest representation
//! that round-trips.

use std::fs;
use std::path::{Path, PathBuf};

use gen_en_core::experiments::{
    Cell, CriteriaResults, CurvesResults, ExperimentOutput, Failure, TprFprResults,
};
use gen_en_core::simulate::{Dataset, SeedRecord};
use gen_en_core::Matrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(field: &str, what: &str) -> Result<f64, CliError> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::Data(format!("{what}: cannot parse `{field}` as a number")))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Reads JSON; a missing file or a bad document is a configuration error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Dataset as CSV with header `x1..xp,y,beta`. The file has `max(n, p)`
/// rows; cells past the end of a column are left empty.
pub fn dataset_csv(d: &Dataset) -> Vec<u8> {
    let (n, p) = (d.n(), d.p());
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("beta".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..n.max(p)).map(|i| {
        let mut row: Vec<String> = if i < n {
            d.x.row(i).iter().map(|&v| fmt_float(v)).collect()
        } else {
            vec![String::new(); p]
        };
        row.push(if i < n { fmt_float(d.y[i]) } else { String::new() });
        row.push(if i < p { fmt_float(d.beta_star[i]) } else { String::new() });
        row
    });
    csv_bytes(&header, rows)
}

/// Design, response and (when present) true coefficients read from a dataset CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub beta: Option<Vec<f64>>,
}

pub fn read_dataset_csv(path: &Path) -> Result<DataFile, CliError> {
    let data_err = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let x_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('x') && h[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| data_err("missing `y` column".into()))?;
    let beta_col = headers.iter().position(|h| h == "beta");
    let p = x_cols.len();
    if p == 0 {
        return Err(data_err("no `x<j>` columns".into()));
    }

    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut beta = Vec::new();
    let mut rows_done = false;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let xs: Vec<&str> = x_cols.iter().map(|&c| rec.get(c).unwrap_or("")).collect();
        let blank = xs.iter().all(|s| s.trim().is_empty());
        if blank {
            rows_done = true;
        } else {
            if rows_done {
                return Err(data_err(format!("row {}: observation after blank rows", i + 1)));
            }
            for s in xs {
                values.push(parse_float(s, "x")?);
            }
            y.push(parse_float(rec.get(y_col).unwrap_or(""), "y")?);
        }
        if let Some(c) = beta_col {
            let s = rec.get(c).unwrap_or("").trim();
            if !s.is_empty() {
                beta.push(parse_float(s, "beta")?);
            }
        }
    }
    if y.is_empty() {
        return Err(data_err("no observations".into()));
    }
    let beta = match beta_col {
        Some(_) if beta.len() == p => Some(beta),
        Some(_) if beta.is_empty() => None,
        Some(_) => {
            return Err(data_err(format!("beta column has {} values, expected {p}", beta.len())))
        }
        None => None,
    };
    let x = Matrix::from_row_major(y.len(), p, values).map_err(|e| data_err(e.to_string()))?;
    Ok(DataFile { x, y, beta })
}

/// Plain matrix CSV without header.
pub fn matrix_csv(m: &Matrix) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_float(v)).collect();
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let data_err = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| data_err(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| parse_float(s, "matrix entry"))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Matrix::from_rows(&refs).map_err(|e| data_err(e.to_string()))
}

/// Everything about a simulated dataset that the CSV does not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub b: f64,
    pub noise_sigma: f64,
    pub alphas: [f64; 3],
    pub seed: SeedRecord,
    pub beta_star: Vec<f64>,
    pub epsilon: Vec<f64>,
}

/// JSON file recording the command and its fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
}

impl<C> Manifest<C> {
    pub fn new(command: &str, config: C) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
        }
    }
}

fn cell_fields(c: &Cell) -> [String; 4] {
    [c.p.to_string(), c.n.to_string(), c.q.to_string(), fmt_float(c.b)]
}

pub fn criteria_csv(r: &CriteriaResults) -> Vec<u8> {
    let header = [
        "p", "n", "q", "b", "rep", "seed", "ic", "eic", "gic", "eic_lambda", "eic_eta", "gic_lambda", "gic_eta",
    ];
    csv_bytes(
        &header,
        r.rows.iter().map(|row| {
            let mut v = cell_fields(&row.cell).to_vec();
            v.push(row.rep.to_string());
            v.push(row.seed.key.to_string());
            v.extend(
                [row.ic, row.eic, row.gic, row.eic_lambda, row.eic_eta, row.gic_lambda, row.gic_eta]
                    .map(fmt_float),
            );
            v
        }),
    )
}

pub fn criteria_summary_csv(r: &CriteriaResults) -> Vec<u8> {
    let header = [
        "p", "n", "q", "b", "criterion", "count", "min", "q1", "median", "q3", "max", "frac_below_one",
    ];
    csv_bytes(
        &header,
        r.summary.iter().map(|s| {
            let mut v = cell_fields(&s.cell).to_vec();
            v.push(s.criterion.clone());
            v.push(s.count.to_string());
            v.extend(
                [s.stats.min, s.stats.q1, s.stats.median, s.stats.q3, s.stats.max, s.frac_below_one]
                    .map(fmt_float),
            );
            v
        }),
    )
}

pub fn curves_csv(r: &CurvesResults) -> Vec<u8> {
    let header = [
        "p", "n", "q", "eta", "lmax_HA", "lmax_C11inv", "lmax_HB", "eq18_lhs", "eq18_rhs",
    ];
    csv_bytes(
        &header,
        r.rows.iter().map(|row| {
            let mut v = vec![row.p.to_string(), row.n.to_string(), row.q.to_string()];
            v.extend(
                [row.eta, row.lmax_ha, row.lmax_c11inv, row.lmax_hb, row.eq18_lhs, row.eq18_rhs]
                    .map(fmt_float),
            );
            v
        }),
    )
}

pub fn tprfpr_csv(r: &TprFprResults) -> Vec<u8> {
    let header = [
        "p", "n", "q", "b", "method", "rep", "best_lambda", "best_eta", "tpr", "fpr", "diff",
    ];
    csv_bytes(
        &header,
        r.rows.iter().map(|row| {
            let mut v = cell_fields(&row.cell).to_vec();
            v.push(row.method.name().into());
            v.push(row.rep.to_string());
            v.extend([row.best_lambda, row.best_eta, row.tpr, row.fpr, row.diff].map(fmt_float));
            v
        }),
    )
}

pub fn tprfpr_summary_csv(r: &TprFprResults) -> Vec<u8> {
    let header = [
        "p", "n", "q", "b", "method", "count", "mean_tpr", "mean_fpr", "mean_diff", "frac_sign_exact",
    ];
    csv_bytes(
        &header,
        r.summary.iter().map(|s| {
            let mut v = cell_fields(&s.cell).to_vec();
            v.push(s.method.name().into());
            v.push(s.count.to_string());
            v.extend([s.mean_tpr, s.mean_fpr, s.mean_diff, s.frac_sign_exact].map(fmt_float));
            v
        }),
    )
}

pub fn failures_csv(failures: &[Failure]) -> Vec<u8> {
    let header = ["p", "n", "q", "b", "rep", "seed", "message"];
    csv_bytes(
        &header,
        failures.iter().map(|f| {
            let mut v = cell_fields(&f.cell).to_vec();
            v.push(f.rep.to_string());
            v.push(f.seed.key.to_string());
            v.push(f.message.clone());
            v
        }),
    )
}

/// Writes the tables of an experiment into `dir`; returns the paths written.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<Vec<PathBuf>, CliError> {
    let (tables, failures): (Vec<(&str, Vec<u8>)>, &[Failure]) = match out {
        ExperimentOutput::Criteria(r) => (
            vec![("criteria.csv", criteria_csv(r)), ("criteria_summary.csv", criteria_summary_csv(r))],
            &r.failures,
        ),
        ExperimentOutput::Curves(r) => (vec![("curves.csv", curves_csv(r))], &r.failures),
        ExperimentOutput::Tprfpr(r) => (
            vec![("tprfpr.csv", tprfpr_csv(r)), ("tprfpr_summary.csv", tprfpr_summary_csv(r))],
            &r.failures,
        ),
    };
    let mut written = Vec::new();
    for (name, bytes) in tables.into_iter().chain([("failures.csv", failures_csv(failures))]) {
        let path = dir.join(name);
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
