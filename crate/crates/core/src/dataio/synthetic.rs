//! Seeded multi-domain suites standing in for PACS/DomainNet-style data.
//!
//! Samples of class `c` in domain `d` embed near `normalize(t_c + δ·u_d + σ·ε)`.
//! Features are placed through the linear toy encoder's pseudo-inverse so
//! that `f·W` reproduces the target embedding, plus noise confined to the
//! complement of `W`'s column space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ModeKind, Seeds, MANIFEST_FORMAT};
use crate::encoder::{Encoder, SyntheticPrototypes, ToyEncoder, ToyEncoderConfig, ToyVariant};
use crate::error::{Error, Result};
use crate::evaluation::LabeledEmbeddingSet;
use crate::linalg::{cosine, dot, l2_normalize, orthonormal_columns, Matrix};
use crate::rng::{self, derive_seed};

pub const MAX_PROTOTYPE_DRAWS: usize = 100_000;

const PACS_DOMAINS: [&str; 4] = ["art_painting", "cartoon", "photo", "sketch"];
const PACS_CLASSES: [&str; 7] = ["dog", "elephant", "giraffe", "guitar", "horse", "house", "person"];
const DOMAINNET_DOMAINS: [&str; 6] = ["clipart", "infograph", "painting", "quickdraw", "real", "sketch"];

pub fn default_domain_names(n: usize) -> Vec<String> {
    match n {
        4 => PACS_DOMAINS.iter().map(|s| s.to_string()).collect(),
        6 => DOMAINNET_DOMAINS.iter().map(|s| s.to_string()).collect(),
        _ => (0..n).map(|i| format!("domain{i}")).collect(),
    }
}

pub fn default_class_names(n: usize) -> Vec<String> {
    if n == PACS_CLASSES.len() {
        PACS_CLASSES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("class{i}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGenConfig {
    pub classes: usize,
    pub domains: usize,
    pub samples_per_cell: usize,
    pub max_prototype_cosine: f64,
    pub domain_offset: f64,
    pub sample_noise: f64,
    pub seed: u64,
    /// The first `forget_count` classes form the forget set.
    pub forget_count: usize,
}

impl Default for SyntheticGenConfig {
    fn default() -> Self {
        Self {
            classes: 7,
            domains: 4,
            samples_per_cell: 50,
            max_prototype_cosine: 0.3,
            domain_offset: 0.4,
            sample_noise: 0.05,
            seed: 42,
            forget_count: 3,
        }
    }
}

impl SyntheticGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.domains == 0 || self.samples_per_cell == 0 {
            return Err(Error::InvalidConfig("classes, domains and samples must be positive".into()));
        }
        if self.forget_count > self.classes {
            return Err(Error::InvalidConfig(format!(
                "forget_count {} exceeds {} classes",
                self.forget_count, self.classes
            )));
        }
        for (name, v) in [
            ("max_prototype_cosine", self.max_prototype_cosine),
            ("domain_offset", self.domain_offset),
            ("sample_noise", self.sample_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Random `D × E` projection with orthonormal columns (Q of a seeded Gaussian).
pub fn random_projection(feature_dim: usize, embedding_dim: usize, seed: u64) -> Result<Matrix> {
    let mut r = rng::seeded(seed);
    let g = Matrix::new(feature_dim, embedding_dim, rng::standard_normal_vec(&mut r, feature_dim * embedding_dim))?;
    orthonormal_columns(&g)
}

fn random_unit(r: &mut rng::SeededRng, dim: usize) -> Vec<f64> {
    loop {
        if let Ok(v) = l2_normalize(&rng::standard_normal_vec(r, dim)) {
            return v;
        }
    }
}

/// Draws unit prototypes one at a time, accepting a candidate only if its
/// cosine with every accepted prototype is at most `max_cos`.
pub fn sample_prototypes(r: &mut rng::SeededRng, count: usize, dim: usize, max_cos: f64) -> Result<Vec<Vec<f64>>> {
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut draws = 0;
    while accepted.len() < count {
        if draws >= MAX_PROTOTYPE_DRAWS {
            return Err(Error::PrototypeSamplingFailed { draws });
        }
        draws += 1;
        let cand = random_unit(r, dim);
        if accepted.iter().all(|p| dot(p, &cand) <= max_cos) {
            accepted.push(cand);
        }
    }
    Ok(accepted)
}

fn check_orthonormal_columns(w: &Matrix) -> Result<()> {
    let gram = w.transpose().matmul(w)?;
    let err = gram.max_abs_diff(&Matrix::identity(w.cols()));
    if err > 1e-10 {
        return Err(Error::InvalidConfig(format!("projection columns are not orthonormal (error {err:e})")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SyntheticSuite {
    pub data: LabeledEmbeddingSet,
    pub manifest: Manifest,
    pub prototypes: SyntheticPrototypes,
}

/// Generates samples in domain-major, then class, then sample order.
pub fn generate_synthetic(cfg: &SyntheticGenConfig, encoder: &ToyEncoder, w: &Matrix) -> Result<SyntheticSuite> {
    cfg.validate()?;
    if encoder.config().variant != ToyVariant::Linear {
        return Err(Error::InvalidConfig("synthetic placement needs the linear encoder".into()));
    }
    if w.rows() != encoder.feature_dim() {
        return Err(Error::DimensionError(format!(
            "projection has {} rows, encoder emits {} features",
            w.rows(),
            encoder.feature_dim()
        )));
    }
    check_orthonormal_columns(w)?;
    let (feature_dim, dim) = w.shape();

    let solver = encoder.preimage_solver()?;
    let mut r = rng::seeded(cfg.seed);
    let prototypes = sample_prototypes(&mut r, cfg.classes, dim, cfg.max_prototype_cosine)?;
    let domain_directions: Vec<Vec<f64>> = (0..cfg.domains).map(|_| random_unit(&mut r, dim)).collect();

    let n = cfg.classes * cfg.domains * cfg.samples_per_cell;
    let mut features = Vec::with_capacity(n * feature_dim);
    let mut domain_labels = Vec::with_capacity(n);
    let mut class_labels = Vec::with_capacity(n);
    for (di, u) in domain_directions.iter().enumerate() {
        for (ci, t) in prototypes.iter().enumerate() {
            for _ in 0..cfg.samples_per_cell {
                let eps = rng::standard_normal_vec(&mut r, dim);
                let y: Vec<f64> = (0..dim)
                    .map(|k| t[k] + cfg.domain_offset * u[k] + cfg.sample_noise * eps[k])
                    .collect();
                let y = l2_normalize(&y)?;
                let nu = rng::standard_normal_vec(&mut r, feature_dim);
                let nu_in = w.vecmat(&nu)?;
                let back = w.matvec(&nu_in)?;
                let mut target = w.matvec(&y)?;
                for k in 0..feature_dim {
                    target[k] += cfg.sample_noise * (nu[k] - back[k]);
                }
                let x = solver.solve(&target)?;
                features.extend(encoder.encode(&x)?);
                domain_labels.push(di as u32);
                class_labels.push(ci as u32);
            }
        }
    }
    let data = LabeledEmbeddingSet::new(Matrix::new(n, feature_dim, features)?, domain_labels, class_labels)?;

    let protos = SyntheticPrototypes {
        classes: default_class_names(cfg.classes),
        domains: default_domain_names(cfg.domains),
        prototypes,
        domain_directions,
        domain_offset: cfg.domain_offset,
    };
    let mut notes = BTreeMap::new();
    notes.insert("generator".into(), serde_json::to_string(cfg).expect("config serializes"));
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        classes: protos.classes.clone(),
        domains: protos.domains.clone(),
        forget_classes: protos.classes[..cfg.forget_count].to_vec(),
        unlearn_domains: Vec::new(),
        mode: ModeKind::Global,
        embedding_dim: dim,
        feature_dim,
        seeds: Seeds { generator: cfg.seed, encoder: encoder.config().seed, ..Seeds::default() },
        encoder: Some(*encoder.config()),
        text_embeddings: Some(protos.to_table()?),
        canonical_embeddings: None,
        notes,
    };
    Ok(SyntheticSuite { data, manifest, prototypes: protos })
}

/// Full desk-scale setup driven by one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub generator: SyntheticGenConfig,
    pub input_dim: usize,
    pub feature_dim: usize,
    pub embedding_dim: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { generator: SyntheticGenConfig::default(), input_dim: 128, feature_dim: 64, embedding_dim: 32 }
    }
}

#[derive(Clone, Debug)]
pub struct DeskSuite {
    pub encoder: ToyEncoder,
    pub projection: Matrix,
    pub suite: SyntheticSuite,
}

impl SuiteConfig {
    pub fn seeds(&self) -> Seeds {
        let s = self.generator.seed;
        Seeds {
            generator: s,
            encoder: derive_seed(s, 1, 0),
            projection: derive_seed(s, 2, 0),
            synthesis: derive_seed(s, 3, 0),
        }
    }

    pub fn build(&self) -> Result<DeskSuite> {
        let seeds = self.seeds();
        let encoder = ToyEncoder::new(ToyEncoderConfig {
            variant: ToyVariant::Linear,
            input_dim: self.input_dim,
            feature_dim: self.feature_dim,
            seed: seeds.encoder,
        })?;
        let projection = random_projection(self.feature_dim, self.embedding_dim, seeds.projection)?;
        let mut suite = generate_synthetic(&self.generator, &encoder, &projection)?;
        suite.manifest.seeds = seeds;
        Ok(DeskSuite { encoder, projection, suite })
    }
}

/// Per (class, domain) cell: does the mean projected embedding sit closest
/// to its own class prototype?
#[derive(Clone, Debug, PartialEq)]
pub struct CellCheck {
    pub class: usize,
    pub domain: usize,
    pub own_cosine: f64,
    pub best_other_cosine: f64,
}

impl CellCheck {
    pub fn separable(&self) -> bool {
        self.own_cosine > self.best_other_cosine
    }
}

pub fn separability_certificate(
    data: &LabeledEmbeddingSet,
    w: &Matrix,
    prototypes: &[Vec<f64>],
    n_domains: usize,
) -> Result<Vec<CellCheck>> {
    let dim = w.cols();
    let n_classes = prototypes.len();
    let mut sums = vec![vec![0.0; dim]; n_classes * n_domains];
    let mut counts = vec![0usize; n_classes * n_domains];
    for i in 0..data.len() {
        let cell = data.classes[i] as usize * n_domains + data.domains[i] as usize;
        let h = l2_normalize(&w.vecmat(data.features.row(i))?)?;
        sums[cell].iter_mut().zip(&h).for_each(|(s, v)| *s += v);
        counts[cell] += 1;
    }
    let mut out = Vec::new();
    for c in 0..n_classes {
        for d in 0..n_domains {
            let cell = c * n_domains + d;
            if counts[cell] == 0 {
                continue;
            }
            let mean = &sums[cell];
            let own_cosine = cosine(mean, &prototypes[c])?;
            let mut best_other_cosine = f64::NEG_INFINITY;
            for (j, p) in prototypes.iter().enumerate() {
                if j != c {
                    best_other_cosine = best_other_cosine.max(cosine(mean, p)?);
                }
            }
            out.push(CellCheck { class: c, domain: d, own_cosine, best_other_cosine });
        }
    }
    Ok(out)
}
