use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::units::Satoshi;

pub const TRAJECTORY_VERSION: u32 = 1;

/// Column order of the CSV export.
pub const CSV_COLUMNS: [&str; 15] = [
    "epoch",
    "D",
    "T",
    "DT",
    "N_est",
    "N_model",
    "mode",
    "bound",
    "median_total_reward",
    "median_miner_reward",
    "xi_mean",
    "agg_sp_targeted",
    "agg_sp_nakamoto",
    "pool",
    "remainder",
];

/// Observables of one epoch. `mode` and `bound` are the controller state in
/// effect while the epoch was mined; `T` is in time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub epoch: u64,
    #[serde(rename = "D")]
    pub difficulty: f64,
    #[serde(rename = "T")]
    pub elapsed: f64,
    #[serde(rename = "DT")]
    pub dt: f64,
    #[serde(rename = "N_est")]
    pub n_est: f64,
    #[serde(rename = "N_model")]
    pub n_model: f64,
    pub mode: String,
    pub bound: Option<Satoshi>,
    pub median_total_reward: Satoshi,
    pub median_miner_reward: Satoshi,
    pub xi_mean: f64,
    pub agg_sp_targeted: i64,
    pub agg_sp_nakamoto: i64,
    pub pool: Satoshi,
    pub remainder: Satoshi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub version: u32,
    pub records: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    Csv,
    Json,
}

impl TrajectoryFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TrajectoryFormat::Csv => "csv",
            TrajectoryFormat::Json => "json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            TrajectoryFormat::Csv => "text/csv",
            TrajectoryFormat::Json => "application/json",
        }
    }
}

impl std::str::FromStr for TrajectoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TrajectoryFormat::Csv),
            "json" => Ok(TrajectoryFormat::Json),
            other => Err(format!("unknown trajectory format `{other}` (expected csv or json)")),
        }
    }
}

/// Serialises records; the only producer of trajectory bytes.
pub fn render_trajectory(records: &[TrajectoryRecord], format: TrajectoryFormat) -> Vec<u8> {
    match format {
        TrajectoryFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(CSV_COLUMNS).expect("write to memory");
            for r in records {
                w.serialize(r).expect("write to memory");
            }
            w.into_inner().expect("flush to memory")
        }
        TrajectoryFormat::Json => {
            let doc = TrajectoryDocument {
                version: TRAJECTORY_VERSION,
                records: records.to_vec(),
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("records serialise");
            out.push(b'\n');
            out
        }
    }
}

pub fn export_trajectory(records: &[TrajectoryRecord], format: TrajectoryFormat, path: &Path) -> io::Result<()> {
    std::fs::write(path, render_trajectory(records, format))
}

pub fn import_trajectory_json(bytes: &[u8]) -> Result<Vec<TrajectoryRecord>, serde_json::Error> {
    let doc: TrajectoryDocument = serde_json::from_slice(bytes)?;
    if doc.version != TRAJECTORY_VERSION {
        return Err(serde::de::Error::custom(format!(
            "unsupported trajectory version {}",
            doc.version
        )));
    }
    Ok(doc.records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: u64, bound: Option<Satoshi>) -> TrajectoryRecord {
        TrajectoryRecord {
            epoch,
            difficulty: 1200.5,
            elapsed: 12_000.25,
            dt: 0.1,
            n_est: 2.0,
            n_model: 2.0,
            mode: if bound.is_some() { "ceiling" } else { "unconstrained" }.to_string(),
            bound,
            median_total_reward: 100,
            median_miner_reward: 90,
            xi_mean: -0.1,
            agg_sp_targeted: 1000,
            agg_sp_nakamoto: 1000,
            pool: 10,
            remainder: 0,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let out = String::from_utf8(render_trajectory(&[record(0, Some(90))], TrajectoryFormat::Csv)).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines[1], "0,1200.5,12000.25,0.1,2.0,2.0,ceiling,90,100,90,-0.1,1000,1000,10,0");
    }

    #[test]
    fn json_round_trip() {
        let records = vec![record(0, None), record(1, Some(5))];
        let bytes = render_trajectory(&records, TrajectoryFormat::Json);
        assert_eq!(import_trajectory_json(&bytes).unwrap(), records);
        assert_eq!(bytes, render_trajectory(&records, TrajectoryFormat::Json));
    }

    #[test]
    fn export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        export_trajectory(&[record(0, None)], TrajectoryFormat::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
        assert!(export_trajectory(&[], TrajectoryFormat::Csv, &dir.path().join("missing/t.csv")).is_err());
    }
}
