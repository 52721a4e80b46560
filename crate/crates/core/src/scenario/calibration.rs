use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{regressors, HashrateModel};

/// Required CSV header names.
pub const CALIBRATION_COLUMNS: [&str; 5] = [
    "period",
    "miner_revenue_usd",
    "energy_or_hashrate",
    "asic_efficiency",
    "electricity_cost",
];

/// Ratio of smallest to largest singular value below which the design is
/// treated as rank deficient.
const SINGULAR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub period: i64,
    pub miner_revenue_usd: f64,
    pub energy_or_hashrate: f64,
    pub asic_efficiency: f64,
    pub electricity_cost: f64,
}

/// Rows sorted by strictly increasing period with positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    rows: Vec<CalibrationRow>,
}

impl CalibrationDataset {
    pub fn new(mut rows: Vec<CalibrationRow>) -> Result<Self, IngestError> {
        let mut report = LoadReport::default();
        for (i, row) in rows.iter().enumerate() {
            if let Some(message) = row_problem(row) {
                report.errors.push(RowError { line: i + 1, message });
            }
        }
        rows.sort_by_key(|r| r.period);
        for w in rows.windows(2) {
            if w[0].period == w[1].period {
                report.errors.push(RowError {
                    line: 0,
                    message: format!("duplicate period {}", w[0].period),
                });
            }
        }
        report.rows_read = rows.len();
        if !report.errors.is_empty() {
            return Err(IngestError::Rows(report));
        }
        Ok(CalibrationDataset { rows })
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn row_problem(row: &CalibrationRow) -> Option<String> {
    let values = [
        ("miner_revenue_usd", row.miner_revenue_usd),
        ("energy_or_hashrate", row.energy_or_hashrate),
        ("asic_efficiency", row.asic_efficiency),
        ("electricity_cost", row.electricity_cost),
    ];
    values
        .iter()
        .find(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(name, v)| format!("{name} must be positive, got {v}"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based data line (header excluded); 0 when not tied to one line.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error: missing columns {0:?}")]
    Schema(Vec<String>),
    #[error("{} row error(s), first: line {}: {}", .0.errors.len(), .0.errors[0].line, .0.errors[0].message)]
    Rows(LoadReport),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub fn ingest_csv(path: &Path) -> Result<CalibrationDataset, IngestError> {
    ingest_reader(std::fs::File::open(path)?)
}

/// Parses a calibration CSV; every bad row is collected into one report.
pub fn ingest_reader<R: Read>(reader: R) -> Result<CalibrationDataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 5];
    let mut missing = Vec::new();
    for (slot, name) in index.iter_mut().zip(CALIBRATION_COLUMNS) {
        match headers.iter().position(|h| h == name) {
            Some(i) => *slot = i,
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::Schema(missing));
    }

    let mut rows = Vec::new();
    let mut report = LoadReport::default();
    let mut seen = BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let cell = |k: usize| record.get(index[k]).unwrap_or("");
        let period = match cell(0).parse::<i64>() {
            Ok(p) => p,
            Err(_) => {
                report.errors.push(RowError {
                    line,
                    message: format!("period `{}` is not an integer", cell(0)),
                });
                continue;
            }
        };
        let mut values = [0.0; 4];
        let mut bad = None;
        for (j, v) in values.iter_mut().enumerate() {
            match cell(j + 1).parse::<f64>() {
                Ok(x) => *v = x,
                Err(_) => {
                    bad = Some(format!("{} `{}` is not numeric", CALIBRATION_COLUMNS[j + 1], cell(j + 1)));
                    break;
                }
            }
        }
        if let Some(message) = bad {
            report.errors.push(RowError { line, message });
            continue;
        }
        if !seen.insert(period) {
            report.errors.push(RowError {
                line,
                message: format!("duplicate period {period}"),
            });
            continue;
        }
        let row = CalibrationRow {
            period,
            miner_revenue_usd: values[0],
            energy_or_hashrate: values[1],
            asic_efficiency: values[2],
            electricity_cost: values[3],
        };
        if let Some(message) = row_problem(&row) {
            report.errors.push(RowError { line, message });
            continue;
        }
        rows.push(row);
    }
    if !report.errors.is_empty() {
        return Err(IngestError::Rows(report));
    }
    CalibrationDataset::new(rows)
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("underdetermined: {rows} rows, need at least 5")]
    Underdetermined { rows: usize },
    #[error("singular design matrix (condition ratio {0:e})")]
    Singular(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model: HashrateModel,
    pub alpha: [f64; 4],
    /// Absent when there are no residual degrees of freedom.
    pub std_errors: Option<[f64; 4]>,
    pub r_squared: f64,
    pub observations: usize,
}

/// Least squares of `ln N_{t+1}` on `[1, ln(1+eP_t), ln(1+eff_t), ln(1+c_t)]`.
pub fn fit_regression(data: &CalibrationDataset) -> Result<RegressionFit, FitError> {
    let rows = data.rows();
    if rows.len() < 5 {
        return Err(FitError::Underdetermined { rows: rows.len() });
    }
    let n = rows.len() - 1;
    let x = DMatrix::from_fn(n, 4, |i, j| {
        let r = &rows[i];
        regressors(r.miner_revenue_usd, r.asic_efficiency, r.electricity_cost)[j]
    });
    let y = DVector::from_fn(n, |i, _| rows[i + 1].energy_or_hashrate.ln());
    ols(&x, &y)
}

/// Ordinary least squares through the SVD of the design.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<RegressionFit, FitError> {
    let (n, k) = x.shape();
    let svd = x.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio < SINGULAR_RATIO {
        return Err(FitError::Singular(ratio));
    }
    let beta = svd.solve(y, 0.0).expect("u and v computed");
    let residuals = y - x * &beta;
    let sse = residuals.norm_squared();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };

    let std_errors = (n > k).then(|| {
        let sigma2 = sse / (n - k) as f64;
        let xtx_inv = (x.transpose() * x)
            .try_inverse()
            .expect("full rank design has invertible gram matrix");
        std::array::from_fn(|j| (sigma2 * xtx_inv[(j, j)]).sqrt())
    });
    let alpha = [beta[0], beta[1], beta[2], beta[3]];
    Ok(RegressionFit {
        model: HashrateModel::LogRegression { alpha },
        alpha,
        std_errors,
        r_squared,
        observations: n,
    })
}
