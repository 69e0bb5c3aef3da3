use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{TextEmbedder, TextTable, ToyEncoderConfig};
use crate::error::{Error, FormatError, Result};
use crate::unlearning::UnlearnMode;

pub const MANIFEST_FORMAT: &str = "npul-manifest/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub generator: u64,
    pub encoder: u64,
    pub synthesis: u64,
    pub projection: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Global,
    Selective,
    Complete,
    TextOnly,
}

impl std::str::FromStr for ModeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "selective" => Ok(Self::Selective),
            "complete" => Ok(Self::Complete),
            "text_only" | "text-only" | "textonly" => Ok(Self::TextOnly),
            other => Err(Error::InvalidConfig(format!("unknown unlearning mode {other:?}"))),
        }
    }
}

/// Experiment description: label sets, the forget/retain split, dimensions,
/// seeds, and the embedding tables that make runs data-free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub classes: Vec<String>,
    pub domains: Vec<String>,
    pub forget_classes: Vec<String>,
    pub unlearn_domains: Vec<String>,
    pub mode: ModeKind,
    pub embedding_dim: usize,
    pub feature_dim: usize,
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<ToyEncoderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_embeddings: Option<TextTable>,
    /// Precomputed canonical visual embeddings (`h_c`, `h_c^d`); when present
    /// they replace synthesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_embeddings: Option<TextTable>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Format(FormatError::Manifest(msg.into()))
}

fn check_unique(what: &str, names: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if n.is_empty() {
            return Err(invalid(format!("empty {what} name")));
        }
        if !seen.insert(n) {
            return Err(invalid(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

fn check_table(what: &str, table: &TextTable, m: &Manifest, need_all: bool) -> Result<()> {
    for (name, v) in &table.classes {
        if !m.classes.contains(name) {
            return Err(invalid(format!("{what} has unknown class {name:?}")));
        }
        if v.len() != m.embedding_dim {
            return Err(invalid(format!("{what} vector for {name:?} has length {}", v.len())));
        }
    }
    for (class, per_domain) in &table.domains {
        if !m.classes.contains(class) {
            return Err(invalid(format!("{what} has unknown class {class:?}")));
        }
        for (domain, v) in per_domain {
            if !m.domains.contains(domain) {
                return Err(invalid(format!("{what} has unknown domain {domain:?}")));
            }
            if v.len() != m.embedding_dim {
                return Err(invalid(format!("{what} vector for {class:?}/{domain:?} has length {}", v.len())));
            }
        }
    }
    if need_all {
        if let Some(missing) = m.classes.iter().find(|c| !table.classes.contains_key(*c)) {
            return Err(invalid(format!("{what} lacks class {missing:?}")));
        }
    }
    Ok(())
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(Error::Format(FormatError::VersionMismatch {
                found: self.format.clone(),
                expected: MANIFEST_FORMAT.into(),
            }));
        }
        if self.classes.is_empty() || self.domains.is_empty() {
            return Err(invalid("manifest needs at least one class and one domain"));
        }
        check_unique("class", &self.classes)?;
        check_unique("domain", &self.domains)?;
        check_unique("forget class", &self.forget_classes)?;
        check_unique("unlearn domain", &self.unlearn_domains)?;
        if let Some(c) = self.forget_classes.iter().find(|c| !self.classes.contains(c)) {
            return Err(invalid(format!("forget class {c:?} is not a class")));
        }
        if let Some(d) = self.unlearn_domains.iter().find(|d| !self.domains.contains(d)) {
            return Err(invalid(format!("unlearn domain {d:?} is not a domain")));
        }
        if self.embedding_dim == 0 || self.feature_dim == 0 {
            return Err(invalid("dimensions must be positive"));
        }
        if let Some(enc) = &self.encoder {
            if enc.feature_dim != self.feature_dim {
                return Err(invalid("encoder feature_dim disagrees with manifest"));
            }
        }
        if let Some(t) = &self.text_embeddings {
            check_table("text_embeddings", t, self, true)?;
        }
        if let Some(t) = &self.canonical_embeddings {
            check_table("canonical_embeddings", t, self, false)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownLabel(format!("class {name:?}")))
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.domains
            .iter()
            .position(|d| d == name)
            .ok_or_else(|| Error::UnknownLabel(format!("domain {name:?}")))
    }

    pub fn retain_classes(&self) -> Vec<String> {
        self.classes.iter().filter(|c| !self.forget_classes.contains(c)).cloned().collect()
    }

    /// The mode this manifest requests, with its domain set.
    pub fn unlearn_mode(&self) -> Result<UnlearnMode> {
        let domains: BTreeSet<String> = self.unlearn_domains.iter().cloned().collect();
        let mode = match self.mode {
            ModeKind::Global => UnlearnMode::Global,
            ModeKind::TextOnly => UnlearnMode::TextOnly,
            ModeKind::Selective => UnlearnMode::SelectiveDomain(domains),
            ModeKind::Complete => UnlearnMode::CompleteSelectiveDomain(domains),
        };
        mode.validate(&self.domains)?;
        Ok(mode)
    }

    pub fn text_embedder(&self) -> Result<TextEmbedder> {
        let table = self
            .text_embeddings
            .clone()
            .ok_or_else(|| Error::InvalidConfig("manifest carries no text-embedding table".into()))?;
        TextEmbedder::from_table(table)
    }
}

pub fn save_manifest(path: impl AsRef<Path>, m: &Manifest) -> Result<()> {
    fs::write(path, m.to_json()?)?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| invalid("manifest is not UTF-8"))?;
    Manifest::from_json(text)
}
