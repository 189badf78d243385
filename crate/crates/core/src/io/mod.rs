//! On-disk formats, cohort loading and run manifests.
//!
//! Matrices and tables are CSV with every float written to 17 significant
//! digits; scans are JSONL; parameters and reports are JSON. Every writer
//! goes through [`write_atomic`].

mod manifest;
mod params;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::atlas::ParcellationAtlas;
use crate::cohort::Cohort;
use crate::error::{MltError, Result};
use crate::graph::LayeredConnectome;

pub use manifest::{FileDigest, RunManifest};
pub use params::{read_params, write_params, ParamsFile, PARAMS_FORMAT};
pub use tables::{
    atlas_to_csv, decompositions_from_json, decompositions_to_json, expression_to_csv, matrix_to_csv, parse_atlas_csv, parse_expression_csv, parse_matrix, parse_scans_jsonl, read_atlas, read_decompositions,
    read_expression, read_matrix, read_scans, scans_to_jsonl, stat_map_to_csv,
};

/// Float text that parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| MltError::io(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| MltError::Validation(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| MltError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        MltError::io(path, e)
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| MltError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MltError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Atlas, both graphs and the scans, checked against each other.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub connectome: LayeredConnectome,
    pub cohort: Cohort,
}

impl LoadedCohort {
    pub fn atlas(&self) -> &ParcellationAtlas {
        &self.connectome.atlas
    }
}

/// Load and validate a cohort. Subjects with one scan are kept; they simply
/// contribute no training pairs.
pub fn load_cohort(
    scans_path: impl AsRef<Path>,
    sc_path: impl AsRef<Path>,
    fc_path: impl AsRef<Path>,
    atlas_path: impl AsRef<Path>,
) -> Result<LoadedCohort> {
    let atlas = read_atlas(atlas_path)?;
    let sc = crate::graph::WeightedGraph::new(read_matrix(sc_path)?)?;
    let fc = crate::graph::WeightedGraph::new(read_matrix(fc_path)?)?;
    let connectome = LayeredConnectome::new(atlas, sc, fc)?;
    let cohort = Cohort::new(read_scans(scans_path)?)?;
    if cohort.n_subjects() > 0 && cohort.n_regions() != connectome.n() {
        return Err(MltError::Dimension {
            what: "scan SUVR length vs atlas".into(),
            expected: connectome.n(),
            got: cohort.n_regions(),
        });
    }
    Ok(LoadedCohort { connectome, cohort })
}
