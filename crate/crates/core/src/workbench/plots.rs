//! Plain-text plot data: cell grid and rollout point lists.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::report::{RepairReport, TrajectoryDump};
use super::{write_atomic, WorkbenchError};

fn point_line(points: &[Vec<f64>]) -> String {
    let pts: Vec<String> =
        points.iter().map(|p| p.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")).collect();
    pts.join(" ")
}

fn lines<'a>(dumps: impl Iterator<Item = &'a TrajectoryDump>) -> String {
    dumps.map(|d| point_line(&d.points) + "\n").collect()
}

/// Write `grid.csv` and, per skill and controller kind, one rollout per line
/// in `<skill>_<kind>.txt` with `_pass` and `_fail` partitions. Returns the
/// files written.
pub fn emit_plots(report: &RepairReport, out_dir: &Path) -> Result<Vec<PathBuf>, WorkbenchError> {
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), WorkbenchError> {
        let p = out_dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
        Ok(())
    };
    let dims = report.cells.first().map(|c| c.lo.len()).unwrap_or(0);
    let mut grid = String::from("cell");
    for side in ["lo", "hi"] {
        for d in 0..dims {
            grid.push_str(&format!(",{side}{d}"));
        }
    }
    grid.push('\n');
    for c in &report.cells {
        grid.push_str(&c.cell.join("&"));
        for x in c.lo.iter().chain(&c.hi) {
            grid.push_str(&format!(",{x:.6}"));
        }
        grid.push('\n');
    }
    put("grid.csv".into(), grid)?;

    let mut groups: BTreeMap<(&str, &str), Vec<&TrajectoryDump>> = BTreeMap::new();
    for d in &report.trajectories {
        groups.entry((&d.skill, &d.kind)).or_default().push(d);
    }
    for ((skill, kind), ds) in groups {
        put(format!("{skill}_{kind}.txt"), lines(ds.iter().copied()))?;
        put(format!("{skill}_{kind}_pass.txt"), lines(ds.iter().copied().filter(|d| d.passed)))?;
        put(format!("{skill}_{kind}_fail.txt"), lines(ds.iter().copied().filter(|d| !d.passed)))?;
    }
    Ok(written)
}
