//! File formats: sheet snapshot CSV and trajectory directories.
//!
//! Snapshot CSV: a `# schema:` comment line, then the header
//! `alpha,x,y,t,topology`, one row per sample, floats at 17 significant
//! digits so parsing reproduces the doubles exactly.
//!
//! Trajectory directory: `manifest.json` (config echo, digest, times, file
//! list, abort reason) plus one snapshot CSV per sample time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::c64;
use crate::evolve::Trajectory;
use crate::sheet::{SheetError, SheetState, Topology};

pub const SNAPSHOT_SCHEMA: &str = "brlab.snapshot.v1";
pub const MANIFEST_SCHEMA: &str = "brlab.trajectory.v1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Sheet(#[from] SheetError),
    #[error("manifest error: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits: lossless round trip for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write one sheet snapshot.
pub fn write_snapshot(path: &Path, state: &SheetState) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("# schema: {SNAPSHOT_SCHEMA}\n"));
    out.push_str("alpha,x,y,t,topology\n");
    let t = state.time();
    let topo = state.topology().as_str();
    let positions = state.positions();
    for (j, z) in positions.iter().enumerate() {
        let alpha = TAU * j as f64 / state.n() as f64;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(alpha),
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(t),
            topo
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Read a snapshot written by [`write_snapshot`]. Geometry checks are not
/// reapplied: evolved sheets may self-intersect and must stay loadable.
pub fn read_snapshot(path: &Path) -> Result<SheetState, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines.next().ok_or_else(|| IoError::Format {
        path: path.to_path_buf(),
        message: "empty snapshot file".into(),
    })?;
    if header.trim() != "alpha,x,y,t,topology" {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let bad = |message: String| IoError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut positions: Vec<Complex64> = Vec::new();
    let mut time = 0.0;
    let mut topology = None;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("row {ln}: expected 5 fields")));
        }
        let x: f64 = fields[1]
            .parse()
            .map_err(|e| bad(format!("row {ln}: bad x: {e}")))?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|e| bad(format!("row {ln}: bad y: {e}")))?;
        time = fields[3]
            .parse()
            .map_err(|e| bad(format!("row {ln}: bad t: {e}")))?;
        let topo = Topology::parse(fields[4].trim())
            .ok_or_else(|| bad(format!("row {ln}: unknown topology {:?}", fields[4])))?;
        if let Some(prev) = topology {
            if prev != topo {
                return Err(bad(format!("row {ln}: mixed topologies")));
            }
        }
        topology = Some(topo);
        positions.push(c64(x, y));
    }
    let topology = topology.ok_or_else(|| bad("no data rows".into()))?;
    let n = positions.len();
    let periodic = match topology {
        Topology::Closed => positions,
        Topology::PeriodicFlat => positions
            .into_iter()
            .enumerate()
            .map(|(j, z)| z - c64(TAU * j as f64 / n as f64, 0.0))
            .collect(),
    };
    let mut state = SheetState::from_periodic_part(topology, periodic, time)?;
    state.set_time(time);
    Ok(state)
}

/// Trajectory directory manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub config: String,
    pub config_digest: String,
    pub kernel: crate::kernel::KernelSpec,
    pub summation: String,
    pub n: usize,
    pub topology: Topology,
    pub times: Vec<f64>,
    pub snapshots: Vec<String>,
    pub abort_reason: Option<String>,
}

fn snapshot_filename(index: usize) -> String {
    format!("snapshot_{index:06}.csv")
}

/// Persist a trajectory: `manifest.json` plus one CSV per snapshot.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, config_echo: &str) -> Result<Manifest, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut names = Vec::with_capacity(traj.snapshots.len());
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let name = snapshot_filename(i);
        write_snapshot(&dir.join(&name), snap)?;
        names.push(name);
    }
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| IoError::Manifest("trajectory has no snapshots".into()))?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        config: config_echo.into(),
        config_digest: traj.provenance.config_digest.clone(),
        kernel: traj.provenance.kernel,
        summation: traj.provenance.summation.clone(),
        n: first.n(),
        topology: first.topology(),
        times: traj.times(),
        snapshots: names,
        abort_reason: traj.abort.as_ref().map(|a| a.describe()),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| IoError::Manifest(e.to_string()))?;
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(json.as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, IoError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| IoError::Manifest(e.to_string()))?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(IoError::Manifest(format!(
            "unsupported manifest schema {:?}",
            manifest.schema
        )));
    }
    Ok(manifest)
}

/// Load every snapshot referenced by the manifest. Corrupt or missing files
/// surface as `Err` entries so callers can report gaps without losing the
/// rest of the trajectory.
pub fn read_trajectory_snapshots(
    dir: &Path,
    manifest: &Manifest,
) -> Vec<(String, Result<SheetState, IoError>)> {
    manifest
        .snapshots
        .iter()
        .map(|name| (name.clone(), read_snapshot(&dir.join(name))))
        .collect()
}
