//! Report writers. Every file is written to a temporary sibling and renamed
//! into place, so readers never observe a partial file.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{DrewError, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| DrewError::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| DrewError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(DrewError::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// One row of a curve file: `attack,p_A,sigma,metric,value,stderr,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub attack: String,
    #[serde(rename = "p_A")]
    pub p_a: f64,
    pub sigma: f64,
    pub metric: String,
    pub value: f64,
    /// Empty for exact quantities.
    pub stderr: Option<f64>,
    pub seed: u64,
}

impl CurveRow {
    pub fn new(
        attack: &str,
        p_a: f64,
        sigma: f64,
        metric: &str,
        value: f64,
        stderr: Option<f64>,
        seed: u64,
    ) -> Self {
        Self {
            attack: attack.into(),
            p_a,
            sigma,
            metric: metric.into(),
            value,
            stderr,
            seed,
        }
    }
}

pub fn curves_to_csv(rows: &[CurveRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "attack", "p_A", "sigma", "metric", "value", "stderr", "seed",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| DrewError::io("<csv>", e.into_error()))
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    write_atomic(path, &curves_to_csv(rows)?)
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}
