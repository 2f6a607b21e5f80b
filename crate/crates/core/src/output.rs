//! On-disk formats: `paths.csv`, `summary.json`, `manifest.json` and the
//! coupled-path trace `coupled.csv`.
//!
//! CSV files are comma separated with a header row, reals written with 17
//! significant digits, every line newline terminated.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::coupling::CoupledStep;
use crate::ensemble::{Ensemble, EnsembleSummary};
use crate::urn::{Checkpoint, PathTrace};

pub const PATHS_FILE: &str = "paths.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COUPLED_FILE: &str = "coupled.csv";

pub const PATHS_HEADER: &str =
    "path_index,n,Z,D,A,M,prefix_sq_qx,prefix_sq_qy,prefix_sqrtk_abs_da,prefix_k2_q4";
pub const COUPLED_HEADER: &str =
    "step,Z,Z_shadow,delta,delta_shadow,x_dominated,y_dominated,z_ordered,delta_ordered";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A real with 17 significant digits.
#[inline]
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_paths_csv<W: Write>(mut w: W, traces: &[PathTrace]) -> io::Result<()> {
    writeln!(w, "{PATHS_HEADER}")?;
    for t in traces {
        for c in &t.checkpoints {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                t.path_index,
                c.n,
                real(c.z),
                real(c.d),
                real(c.a),
                real(c.m),
                real(c.prefix_sq_qx),
                real(c.prefix_sq_qy),
                real(c.prefix_sqrtk_abs_da),
                real(c.prefix_k2_q4),
            )?;
        }
    }
    w.flush()
}

/// Reads `paths.csv` back into traces; rows may arrive in any order.
///
/// Per-step residuals are not persisted, so `max_identity_residual` is
/// recomputed over the checkpoints.
pub fn read_paths_csv(path: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathTrace>, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    let parse_err = |line: usize, msg: String| OutputError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut rows: Vec<(u64, Checkpoint)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if i == 0 {
            if line.trim() != PATHS_HEADER {
                return Err(parse_err(1, format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(parse_err(i + 1, format!("expected 10 fields, got {}", fields.len())));
        }
        let int = |k: usize| {
            fields[k]
                .parse::<u64>()
                .map_err(|e| parse_err(i + 1, format!("field {k}: {e}")))
        };
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| parse_err(i + 1, format!("field {k}: {e}")))
        };
        rows.push((
            int(0)?,
            Checkpoint {
                n: int(1)?,
                z: num(2)?,
                d: num(3)?,
                a: num(4)?,
                m: num(5)?,
                prefix_sq_qx: num(6)?,
                prefix_sq_qy: num(7)?,
                prefix_sqrtk_abs_da: num(8)?,
                prefix_k2_q4: num(9)?,
            },
        ));
    }
    rows.sort_by_key(|(p, c)| (*p, c.n));
    let z0 = crate::urn::proportion(cfg.x, cfg.y);
    let mut traces: Vec<PathTrace> = Vec::new();
    for (p, c) in rows {
        match traces.last_mut() {
            Some(t) if t.path_index == p => t.checkpoints.push(c),
            _ => traces.push(PathTrace {
                path_index: p,
                seed: cfg.master_seed,
                z0,
                checkpoints: vec![c],
                final_n: 0,
                final_z: 0.0,
                final_d: 0.0,
                max_identity_residual: 0.0,
            }),
        }
    }
    for t in &mut traces {
        let last = *t.last();
        t.final_n = last.n;
        t.final_z = last.z;
        t.final_d = last.d;
        t.max_identity_residual = t
            .checkpoints
            .iter()
            .map(|c| c.decomposition_residual(z0))
            .fold(0.0, f64::max);
    }
    Ok(traces)
}

pub fn write_summary(path: &Path, summary: &EnsembleSummary) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, summary).map_err(|source| OutputError::Json {
        path: path.display().to_string(),
        source,
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<EnsembleSummary, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| OutputError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_coupled_csv<W: Write>(mut w: W, steps: &[CoupledStep]) -> io::Result<()> {
    writeln!(w, "{COUPLED_HEADER}")?;
    for s in steps {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.step,
            real(s.z),
            real(s.z_shadow),
            u8::from(s.delta),
            u8::from(s.delta_shadow),
            u8::from(s.flags.x_dominated),
            u8::from(s.flags.y_dominated),
            u8::from(s.flags.z_ordered),
            u8::from(s.flags.delta_ordered),
        )?;
    }
    w.flush()
}

/// Record of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub master_seed: u64,
    pub config: String,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes `paths.csv`, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    ensemble: &Ensemble,
    workers: usize,
    started_unix: u64,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths_file = dir.join(PATHS_FILE);
    let file = File::create(&paths_file).map_err(io_err(&paths_file))?;
    write_paths_csv(BufWriter::new(file), &ensemble.traces).map_err(io_err(&paths_file))?;
    let summary_file = dir.join(SUMMARY_FILE);
    write_summary(&summary_file, &ensemble.summary)?;

    let manifest_file = dir.join(MANIFEST_FILE);
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: ensemble.config.master_seed,
        config: ensemble.config.to_text(),
        workers,
        started_unix,
        finished_unix: unix_now(),
        outputs: [PATHS_FILE, SUMMARY_FILE, MANIFEST_FILE]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| OutputError::Json {
        path: manifest_file.display().to_string(),
        source,
    })?;
    std::fs::write(&manifest_file, text + "\n").map_err(io_err(&manifest_file))?;
    Ok(vec![paths_file, summary_file, manifest_file])
}
