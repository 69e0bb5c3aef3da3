//! On-disk projection bank: a JSON index next to f64 matrix blocks.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::{load_matrix, save_matrix, Dtype};
use crate::error::{Error, FormatError, Result};
use crate::unlearning::{BankEntry, ProjectionBank, UnlearnMode};

pub const BANK_INDEX: &str = "bank.json";
const BANK_FORMAT: &str = "npul-bank/1";
const BASE_FILE: &str = "base.bin";

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank_removed: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BankIndex {
    format: String,
    mode: Option<UnlearnMode>,
    base: String,
    rows: usize,
    cols: usize,
    domains: Vec<IndexEntry>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Format(FormatError::Manifest(msg.into()))
}

/// Writes `dir/bank.json`, `dir/base.bin` and one `projection_<i>.bin` per
/// projected domain. Creates `dir` if needed.
pub fn save_bank(dir: impl AsRef<Path>, bank: &ProjectionBank) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    save_matrix(dir.join(BASE_FILE), bank.base(), Dtype::F64)?;
    let mut domains = Vec::new();
    for (i, d) in bank.domains().iter().enumerate() {
        let entry = match bank.entry(d)? {
            BankEntry::Base => IndexEntry { domain: d.clone(), file: None, rank_removed: None },
            BankEntry::Projected { matrix, rank_removed } => {
                let file = format!("projection_{i}.bin");
                save_matrix(dir.join(&file), matrix, Dtype::F64)?;
                IndexEntry { domain: d.clone(), file: Some(file), rank_removed: Some(*rank_removed) }
            }
        };
        domains.push(entry);
    }
    let (rows, cols) = bank.base().shape();
    let index = BankIndex {
        format: BANK_FORMAT.into(),
        mode: bank.unlearn_mode().cloned(),
        base: BASE_FILE.into(),
        rows,
        cols,
        domains,
    };
    let mut text = serde_json::to_string_pretty(&index).map_err(|e| invalid(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(BANK_INDEX), text)?;
    Ok(())
}

fn checked_file(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    // index entries must stay inside the bank directory
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(invalid(format!("bank file name {name:?} is not a plain file name")));
    }
    Ok(dir.join(name))
}

pub fn load_bank(dir: impl AsRef<Path>) -> Result<ProjectionBank> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(BANK_INDEX))?;
    let index: BankIndex = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    if index.format != BANK_FORMAT {
        return Err(Error::Format(FormatError::VersionMismatch {
            found: index.format,
            expected: BANK_FORMAT.into(),
        }));
    }
    let base = load_matrix(checked_file(dir, &index.base)?)?;
    if base.shape() != (index.rows, index.cols) {
        return Err(invalid("base matrix shape disagrees with the bank index"));
    }
    let mut names = Vec::with_capacity(index.domains.len());
    let mut entries = BTreeMap::new();
    for e in index.domains {
        let entry = match (e.file, e.rank_removed) {
            (None, None) => BankEntry::Base,
            (Some(f), Some(rank_removed)) => {
                BankEntry::Projected { matrix: load_matrix(checked_file(dir, &f)?)?, rank_removed }
            }
            _ => return Err(invalid(format!("bank entry for {:?} is incomplete", e.domain))),
        };
        if entries.insert(e.domain.clone(), entry).is_some() {
            return Err(invalid(format!("duplicate bank domain {:?}", e.domain)));
        }
        names.push(e.domain);
    }
    if let Some(mode) = &index.mode {
        mode.validate(&names)?;
    }
    ProjectionBank::from_parts(base, index.mode, names, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{nullspace_projector, Matrix, DEFAULT_RANK_TOL};
    use crate::unlearning::apply_unlearning;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let domains: Vec<String> = vec!["photo".into(), "sketch".into()];
        let w = Matrix::new(2, 3, vec![0.1, -0.7, 1.0 / 3.0, 2.5, 1e-9, -4.0]).unwrap();
        let p = nullspace_projector(&Matrix::from_rows(&[[0.6, 0.0, 0.8]]).unwrap(), DEFAULT_RANK_TOL).unwrap();
        let mode = UnlearnMode::SelectiveDomain(["sketch".to_string()].into());
        let bank = apply_unlearning(&w, &mode, &domains, &[("sketch".to_string(), p)].into()).unwrap();
        save_bank(dir.path(), &bank).unwrap();
        assert_eq!(load_bank(dir.path()).unwrap(), bank);
        assert!(!dir.path().join("projection_0.bin").exists());
        assert!(dir.path().join("projection_1.bin").exists());
    }

    #[test]
    fn rejects_escaping_paths() {
        let dir = tempfile::tempdir().unwrap();
        let bank = ProjectionBank::untouched(Matrix::identity(2), &["a".to_string()]);
        save_bank(dir.path(), &bank).unwrap();
        let idx = dir.path().join(BANK_INDEX);
        let text = fs::read_to_string(&idx).unwrap().replace("base.bin", "../base.bin");
        fs::write(&idx, text).unwrap();
        assert!(matches!(load_bank(dir.path()), Err(Error::Format(_))));
    }
}
