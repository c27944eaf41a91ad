//! File-driven pipeline: load a spec, synthesize, repair, report.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dmp::DmpError;
use crate::game::GameError;
use crate::repair::RepairError;
use crate::trajectory::TrajectoryError;

pub mod format;
pub mod load;
pub mod pipeline;
pub mod plots;
pub mod report;
pub mod suite;

pub use format::*;
pub use load::{liveness_goal, read_toml, Workbench};
pub use pipeline::{run, verify_report, RunOutput};
pub use plots::emit_plots;
pub use report::*;
pub use suite::{run_scenario_suite, CaseResult, SuiteFile};

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{}: {field}: {msg}", file.display())]
    Invalid { file: PathBuf, field: String, msg: String },
    #[error("{}: {msg}", file.display())]
    Io { file: PathBuf, msg: String },
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Dmp(#[from] DmpError),
    #[error("{0}")]
    Pipeline(String),
}

impl WorkbenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Invalid { .. } => 10,
            WorkbenchError::Io { .. } => 11,
            _ => 12,
        }
    }
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WorkbenchError> {
    let io = |e: std::io::Error| WorkbenchError::Io { file: path.to_path_buf(), msg: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// `report.toml`, `strategy.txt` and plot data under `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, WorkbenchError> {
    let mut files = vec![dir.join("report.toml")];
    write_atomic(&files[0], out.report.to_toml().as_bytes())?;
    if let Some(s) = &out.strategy {
        let p = dir.join("strategy.txt");
        write_atomic(&p, s.as_bytes())?;
        files.push(p);
    }
    files.extend(emit_plots(&out.report, &dir.join("plots"))?);
    Ok(files)
}

/// Load a report, rejecting unknown schema versions.
pub fn read_report(path: &Path) -> Result<RepairReport, WorkbenchError> {
    let r: RepairReport = load::read_toml(path)?;
    if r.schema != REPORT_SCHEMA {
        return Err(WorkbenchError::Invalid { file: path.to_path_buf(), field: "schema".into(), msg: format!("unknown schema `{}`", r.schema) });
    }
    Ok(r)
}
