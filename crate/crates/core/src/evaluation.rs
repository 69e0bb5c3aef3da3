//! Zero-shot classification through a projection bank, before/after
//! accuracy bookkeeping, and the accuracy-gap MIA score.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::Manifest;
use crate::encoder::TextEmbedder;
use crate::error::{Error, Result};
use crate::linalg::{cosine, Matrix};
use crate::unlearning::ProjectionBank;

/// Pre-projection features with per-sample domain and class indices into a
/// manifest's `domains` and `classes` lists.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEmbeddingSet {
    pub features: Matrix,
    pub domains: Vec<u32>,
    pub classes: Vec<u32>,
}

impl LabeledEmbeddingSet {
    pub fn new(features: Matrix, domains: Vec<u32>, classes: Vec<u32>) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::InvalidConfig("labeled set is empty".into()));
        }
        if domains.len() != n || classes.len() != n {
            return Err(Error::DimensionError(format!(
                "{n} feature rows but {} domain and {} class labels",
                domains.len(),
                classes.len()
            )));
        }
        Ok(Self { features, domains, classes })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn check_labels(&self, n_domains: usize, n_classes: usize) -> Result<()> {
        if let Some(&d) = self.domains.iter().find(|&&d| d as usize >= n_domains) {
            return Err(Error::UnknownLabel(format!("domain index {d}")));
        }
        if let Some(&c) = self.classes.iter().find(|&&c| c as usize >= n_classes) {
            return Err(Error::UnknownLabel(format!("class index {c}")));
        }
        Ok(())
    }
}

/// Index of the text with the highest cosine to `embedding`; the lowest
/// index wins ties.
pub fn nearest_text(embedding: &[f64], class_texts: &[Vec<f64>]) -> Result<usize> {
    if class_texts.is_empty() {
        return Err(Error::InvalidConfig("no class texts to classify against".into()));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, t) in class_texts.iter().enumerate() {
        let s = cosine(embedding, t)?;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

/// Projects `feature` through the bank entry for `domain` and returns the
/// predicted class index.
pub fn classify(feature: &[f64], bank: &ProjectionBank, domain: &str, class_texts: &[Vec<f64>]) -> Result<usize> {
    let projected = bank.effective(domain)?.vecmat(feature)?;
    nearest_text(&projected, class_texts)
}

/// `(BF_forget − AF_forget) − (BF_retain − AF_retain)`.
pub fn mia_score(bf_forget: f64, af_forget: f64, bf_retain: f64, af_retain: f64) -> Result<f64> {
    for v in [bf_forget, af_forget, bf_retain, af_retain] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::InvalidPercentage(v));
        }
    }
    Ok((bf_forget - af_forget) - (bf_retain - af_retain))
}

/// Rounds to the two decimals that reports carry.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn percent(&self) -> f64 {
        100.0 * self.correct as f64 / self.total as f64
    }
}

/// Before/after accuracy for one cell; `None` when the cell has no samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub bf: Option<f64>,
    pub af: Option<f64>,
    pub bf_counts: Option<Accuracy>,
    pub af_counts: Option<Accuracy>,
}

impl PhasePair {
    fn from_counts(bf: Accuracy, af: Accuracy) -> Self {
        let pct = |a: Accuracy| (a.total > 0).then(|| round2(a.percent()));
        let cnt = |a: Accuracy| (a.total > 0).then_some(a);
        Self { bf: pct(bf), af: pct(af), bf_counts: cnt(bf), af_counts: cnt(af) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub domain: String,
    pub targeted: bool,
    pub retain: PhasePair,
    pub forget: PhasePair,
    pub overall: PhasePair,
    pub mia: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: String,
    pub unlearn_domains: Vec<String>,
    pub forget_classes: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub domains: Vec<DomainReport>,
}

impl EvaluationReport {
    pub fn domain(&self, name: &str) -> Option<&DomainReport> {
        self.domains.iter().find(|d| d.domain == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(crate::error::FormatError::Manifest(e.to_string())))
    }

    /// One row per (domain, set, phase): `mode,domain,set,phase,accuracy,mia`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,domain,set,phase,accuracy,mia\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for d in &self.domains {
            for (set, pair) in [("retain", &d.retain), ("forget", &d.forget)] {
                for (phase, acc) in [("BF", pair.bf), ("AF", pair.af)] {
                    let _ = writeln!(out, "{},{},{},{},{},{}", self.mode, d.domain, set, phase, fmt(acc), fmt(d.mia));
                }
            }
        }
        out
    }
}

/// BF accuracies use the bank's base projection for every domain; AF route
/// each sample through the entry for its domain. Classification is over all
/// manifest class texts, forget classes included.
pub fn evaluate(
    data: &LabeledEmbeddingSet,
    bank: &ProjectionBank,
    manifest: &Manifest,
    text: &TextEmbedder,
) -> Result<EvaluationReport> {
    data.check_labels(manifest.domains.len(), manifest.classes.len())?;
    let class_texts = manifest
        .classes
        .iter()
        .map(|c| text.embed_text(c, None))
        .collect::<Result<Vec<_>>>()?;
    let forget_mask: Vec<bool> = manifest.classes.iter().map(|c| manifest.forget_classes.contains(c)).collect();

    // [domain][forget?][phase]
    let mut counts = vec![[[Accuracy { correct: 0, total: 0 }; 2]; 2]; manifest.domains.len()];
    let base = bank.base();
    let effective = manifest
        .domains
        .iter()
        .map(|d| bank.effective(d))
        .collect::<Result<Vec<_>>>()?;

    for i in 0..data.len() {
        let feature = data.features.row(i);
        let d = data.domains[i] as usize;
        let c = data.classes[i] as usize;
        let bf = nearest_text(&base.vecmat(feature)?, &class_texts)?;
        let af = nearest_text(&effective[d].vecmat(feature)?, &class_texts)?;
        let cell = &mut counts[d][forget_mask[c] as usize];
        for (phase, pred) in [bf, af].into_iter().enumerate() {
            cell[phase].total += 1;
            cell[phase].correct += (pred == c) as usize;
        }
    }

    let mode = bank.mode();
    let domains = manifest
        .domains
        .iter()
        .enumerate()
        .map(|(di, name)| {
            let [retain, forget] = counts[di];
            let sum = |p: usize| Accuracy {
                correct: retain[p].correct + forget[p].correct,
                total: retain[p].total + forget[p].total,
            };
            let retain = PhasePair::from_counts(retain[0], retain[1]);
            let forget = PhasePair::from_counts(forget[0], forget[1]);
            let overall = PhasePair::from_counts(sum(0), sum(1));
            let mia = match (forget.bf, forget.af, retain.bf, retain.af) {
                (Some(bf_f), Some(af_f), Some(bf_r), Some(af_r)) => Some(round2(mia_score(bf_f, af_f, bf_r, af_r)?)),
                _ => None,
            };
            Ok(DomainReport { domain: name.clone(), targeted: mode.targets(name), retain, forget, overall, mia })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut config = BTreeMap::new();
    config.insert("seed.generator".into(), manifest.seeds.generator.to_string());
    config.insert("seed.encoder".into(), manifest.seeds.encoder.to_string());
    config.insert("seed.synthesis".into(), manifest.seeds.synthesis.to_string());
    config.insert("seed.projection".into(), manifest.seeds.projection.to_string());
    config.insert("embedding_dim".into(), manifest.embedding_dim.to_string());
    config.insert("feature_dim".into(), manifest.feature_dim.to_string());

    Ok(EvaluationReport {
        mode: mode.label().to_string(),
        unlearn_domains: mode.domains().map(|d| d.iter().cloned().collect()).unwrap_or_default(),
        forget_classes: manifest.forget_classes.clone(),
        config,
        domains,
    })
}
