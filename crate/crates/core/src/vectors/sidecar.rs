//! On-disk vector sidecars.
//!
//! Layout under a directory, one subdirectory per kind:
//!
//! ```text
//! <dir>/<kind>/index.json     {"format","version","kind","dim","labels":[...]}
//! <dir>/<kind>/YYYY-MM.json   {"format","version","kind","month","dim",
//!                              "states":[{"subreddit","entries":[[i,w],...]}]}
//! ```
//!
//! Entries are sorted by index and states by subreddit name.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SparseVector, VectorError, VectorKind, VectorSet};
use crate::corpus::StateId;
use crate::time::YearMonth;

pub const SIDECAR_FORMAT: &str = "modwatch-vectors";
pub const SIDECAR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    kind: VectorKind,
    dim: usize,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MonthFile {
    format: String,
    version: u32,
    kind: VectorKind,
    month: YearMonth,
    dim: usize,
    states: Vec<StateEntry>,
}

#[derive(Serialize, Deserialize)]
struct StateEntry {
    subreddit: String,
    entries: Vec<(u32, f64)>,
}

/// Write one sidecar per month plus the dimension index. Returns the month files written.
pub fn write_sidecars(set: &VectorSet, dir: &Path) -> Result<Vec<std::path::PathBuf>, VectorError> {
    let kind_dir = dir.join(set.kind.as_str());
    fs::create_dir_all(&kind_dir)?;
    let index = IndexFile {
        format: SIDECAR_FORMAT.into(),
        version: SIDECAR_VERSION,
        kind: set.kind,
        dim: set.dim,
        labels: set.labels.clone(),
    };
    fs::write(kind_dir.join("index.json"), to_json(&index)?)?;

    let mut by_month: BTreeMap<YearMonth, Vec<StateEntry>> = BTreeMap::new();
    for (id, v) in &set.vectors {
        by_month.entry(id.month).or_default().push(StateEntry {
            subreddit: id.subreddit.clone(),
            entries: v.entries().to_vec(),
        });
    }
    let mut written = Vec::new();
    for (month, states) in by_month {
        let file = MonthFile {
            format: SIDECAR_FORMAT.into(),
            version: SIDECAR_VERSION,
            kind: set.kind,
            month,
            dim: set.dim,
            states,
        };
        let path = kind_dir.join(format!("{month}.json"));
        fs::write(&path, to_json(&file)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_sidecars(dir: &Path, kind: VectorKind) -> Result<VectorSet, VectorError> {
    let kind_dir = dir.join(kind.as_str());
    let index: IndexFile = from_json(&fs::read_to_string(kind_dir.join("index.json"))?)?;
    check_header(&index.format, index.version, index.kind, kind)?;
    let mut paths: Vec<_> = fs::read_dir(&kind_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().is_some_and(|n| n != "index.json")
                && p.extension().is_some_and(|e| e == "json")
        })
        .collect();
    paths.sort();
    let mut vectors = BTreeMap::new();
    for p in paths {
        let file: MonthFile = from_json(&fs::read_to_string(&p)?)?;
        check_header(&file.format, file.version, file.kind, kind)?;
        if file.dim != index.dim {
            return Err(VectorError::LengthMismatch(file.dim, index.dim));
        }
        for s in file.states {
            if s.entries.iter().any(|e| e.0 as usize >= index.dim) {
                return Err(VectorError::Format(format!(
                    "index out of range in {}",
                    p.display()
                )));
            }
            vectors.insert(
                StateId::new(s.subreddit, file.month),
                SparseVector::from_entries(index.dim, s.entries),
            );
        }
    }
    Ok(VectorSet {
        kind,
        dim: index.dim,
        labels: index.labels,
        vectors,
    })
}

fn check_header(
    format: &str,
    version: u32,
    found: VectorKind,
    expected: VectorKind,
) -> Result<(), VectorError> {
    if format != SIDECAR_FORMAT || version != SIDECAR_VERSION {
        return Err(VectorError::Format(format!(
            "unsupported sidecar {format} v{version}"
        )));
    }
    if found != expected {
        return Err(VectorError::Format(format!(
            "expected {expected:?} vectors, found {found:?}"
        )));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, VectorError> {
    serde_json::to_string(v).map_err(|e| VectorError::Format(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, VectorError> {
    serde_json::from_str(s).map_err(|e| VectorError::Format(e.to_string()))
}
