//! Append-only run store: one directory per run holding `record.jsonl`
//! (every status transition, newest last) and the rendered trajectories.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tn_core::{Scenario, TrajectoryFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLinks {
    pub csv: String,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub status: RunStatus,
    pub scenario: Scenario,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryLinks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("runs"))?;
        Ok(Store {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Creates the run directory and writes the first record.
    pub fn create(&self, record: &RunRecord) -> io::Result<()> {
        fs::create_dir_all(self.run_dir(&record.id))?;
        self.append(record)
    }

    /// Appends a new version of the record; writes to one id are serialised.
    pub fn append(&self, record: &RunRecord) -> io::Result<()> {
        let lock = self.lock_for(&record.id);
        let _guard = lock.lock().expect("run lock poisoned");
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.run_dir(&record.id).join("record.jsonl"))?;
        file.write_all(&line)?;
        file.sync_data()
    }

    /// Latest version of the record, or `None` for an unknown id.
    pub fn get(&self, id: &str) -> io::Result<Option<RunRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        let path = self.run_dir(id).join("record.jsonl");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let Some(last) = text.lines().rev().find(|l| !l.trim().is_empty()) else {
            return Ok(None);
        };
        serde_json::from_str(last).map(Some).map_err(io::Error::other)
    }

    fn trajectory_path(&self, id: &str, format: TrajectoryFormat) -> PathBuf {
        self.run_dir(id).join(format!("trajectory.{}", format.extension()))
    }

    /// Writes a rendered trajectory via a temporary file and rename.
    pub fn put_trajectory(&self, id: &str, format: TrajectoryFormat, bytes: &[u8]) -> io::Result<()> {
        let path = self.trajectory_path(id, format);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, path)
    }

    pub fn trajectory(&self, id: &str, format: TrajectoryFormat) -> io::Result<Vec<u8>> {
        fs::read(self.trajectory_path(id, format))
    }
}
