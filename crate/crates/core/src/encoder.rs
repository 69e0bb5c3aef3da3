//! Visual encoders `f(x; θ)` producing pre-projection features, and the text
//! side of the joint embedding space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cosine, l2_normalize, norm, Matrix, Pseudoinverse};
use crate::rng;

/// A frozen differentiable map from input space `R^p` to feature space `R^D`.
pub trait Encoder: Send + Sync {
    fn input_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn encode(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `Jᵀ g` where `J` is the Jacobian of [`Encoder::encode`] at `x`.
    fn input_gradient(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>>;
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionError(format!("{what} has length {got}, expected {expected}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyVariant {
    Linear,
    Tanh,
}

impl std::str::FromStr for ToyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::InvalidConfig(format!("unknown encoder variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub variant: ToyVariant,
    pub input_dim: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        Self { variant: ToyVariant::Linear, input_dim: 128, feature_dim: 64, seed: 0 }
    }
}

#[derive(Clone, Debug)]
enum Layers {
    Linear { a: Matrix, b: Vec<f64> },
    Tanh { a1: Matrix, b1: Vec<f64>, a2: Matrix, b2: Vec<f64> },
}

/// Seeded stand-in for a frozen visual backbone.
///
/// Parameters are drawn once, in order, from a standard normal stream and
/// scaled by `1/√fan_in`: linear draws `A (D×p)` then `b (D)`; tanh draws
/// `A₁ (D×p)`, `b₁`, `A₂ (D×D)`, `b₂`. Matrices are filled row-major.
#[derive(Clone, Debug)]
pub struct ToyEncoder {
    config: ToyEncoderConfig,
    layers: Layers,
}

fn draw_matrix(rng: &mut rng::SeededRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng::standard_normal(rng) * scale).collect();
    Matrix::new(rows, cols, data).expect("finite normal draws")
}

fn draw_vec(rng: &mut rng::SeededRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng::standard_normal(rng) * scale).collect()
}

impl ToyEncoder {
    pub fn new(config: ToyEncoderConfig) -> Result<Self> {
        let ToyEncoderConfig { variant, input_dim: p, feature_dim: d, seed } = config;
        if d == 0 || p < d {
            return Err(Error::InvalidConfig(format!(
                "toy encoder needs input_dim >= feature_dim >= 1, got p={p}, D={d}"
            )));
        }
        let mut rng = rng::seeded(seed);
        let in_scale = 1.0 / (p as f64).sqrt();
        let layers = match variant {
            ToyVariant::Linear => {
                let a = draw_matrix(&mut rng, d, p, in_scale);
                let b = draw_vec(&mut rng, d, in_scale);
                Layers::Linear { a, b }
            }
            ToyVariant::Tanh => {
                let hidden_scale = 1.0 / (d as f64).sqrt();
                let a1 = draw_matrix(&mut rng, d, p, in_scale);
                let b1 = draw_vec(&mut rng, d, in_scale);
                let a2 = draw_matrix(&mut rng, d, d, hidden_scale);
                let b2 = draw_vec(&mut rng, d, hidden_scale);
                Layers::Tanh { a1, b1, a2, b2 }
            }
        };
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ToyEncoderConfig {
        &self.config
    }

    /// Bias vector of the linear variant, i.e. `encode(0)`.
    pub fn bias(&self) -> &[f64] {
        match &self.layers {
            Layers::Linear { b, .. } => b,
            Layers::Tanh { b2, .. } => b2,
        }
    }

    /// Minimum-norm input whose linear encoding equals `feature`.
    pub fn preimage(&self, feature: &[f64]) -> Result<Vec<f64>> {
        self.preimage_solver()?.solve(feature)
    }

    /// Factors the linear map once for many [`PreimageSolver::solve`] calls.
    pub fn preimage_solver(&self) -> Result<PreimageSolver<'_>> {
        let Layers::Linear { a, b } = &self.layers else {
            return Err(Error::InvalidConfig("preimage requires the linear encoder".into()));
        };
        Ok(PreimageSolver { pinv: Pseudoinverse::new(a)?, bias: b })
    }
}

pub struct PreimageSolver<'a> {
    pinv: Pseudoinverse,
    bias: &'a [f64],
}

impl PreimageSolver<'_> {
    pub fn solve(&self, feature: &[f64]) -> Result<Vec<f64>> {
        check_len("feature", feature.len(), self.bias.len())?;
        let rhs: Vec<f64> = feature.iter().zip(self.bias).map(|(f, b)| f - b).collect();
        self.pinv.solve(&rhs)
    }
}

impl Encoder for ToyEncoder {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("input", x.len(), self.config.input_dim)?;
        match &self.layers {
            Layers::Linear { a, b } => {
                let mut out = a.matvec(x)?;
                out.iter_mut().zip(b).for_each(|(o, b)| *o += b);
                Ok(out)
            }
            Layers::Tanh { a1, b1, a2, b2 } => {
                let hidden: Vec<f64> =
                    a1.matvec(x)?.iter().zip(b1).map(|(h, b)| (h + b).tanh()).collect();
                let mut out = a2.matvec(&hidden)?;
                out.iter_mut().zip(b2).for_each(|(o, b)| *o += b);
                Ok(out)
            }
        }
    }

    fn input_gradient(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_len("input", x.len(), self.config.input_dim)?;
        check_len("feature gradient", g.len(), self.config.feature_dim)?;
        match &self.layers {
            Layers::Linear { a, .. } => a.vecmat(g),
            Layers::Tanh { a1, b1, a2, .. } => {
                let pre = a1.matvec(x)?;
                let back = a2.vecmat(g)?;
                let gated: Vec<f64> = back
                    .iter()
                    .zip(pre.iter().zip(b1))
                    .map(|(gb, (h, b))| {
                        let t = (h + b).tanh();
                        gb * (1.0 - t * t)
                    })
                    .collect();
                a1.vecmat(&gated)
            }
        }
    }
}

/// Replays recorded features: the input is a weight vector over recorded
/// samples and the output the matching weighted sum, so `encode(eᵢ)` returns
/// the i-th stored feature row exactly.
#[derive(Clone, Debug)]
pub struct ReplayEncoder {
    features: Matrix,
}

impl ReplayEncoder {
    pub fn new(features: Matrix) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidMatrix("replay encoder needs recorded features".into()));
        }
        Ok(Self { features })
    }

    pub fn recorded(&self) -> &Matrix {
        &self.features
    }
}

impl Encoder for ReplayEncoder {
    fn input_dim(&self) -> usize {
        self.features.rows()
    }

    fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.features.vecmat(x)
    }

    fn input_gradient(&self, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_len("input", x.len(), self.features.rows())?;
        self.features.matvec(g)
    }
}

/// Text embeddings as stored in a manifest: one vector per class plus
/// optional per-(class, domain) vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TextTable {
    pub classes: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub domains: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

/// Seeded class prototypes `t_c` and unit domain directions `u_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPrototypes {
    pub classes: Vec<String>,
    pub domains: Vec<String>,
    pub prototypes: Vec<Vec<f64>>,
    pub domain_directions: Vec<Vec<f64>>,
    pub domain_offset: f64,
}

impl SyntheticPrototypes {
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

    /// `normalize(t_c + δ·u_d)`.
    pub fn domain_prototype(&self, class: usize, domain: usize) -> Result<Vec<f64>> {
        let offset = &self.domain_directions[domain];
        let mixed: Vec<f64> = self.prototypes[class]
            .iter()
            .zip(offset)
            .map(|(t, u)| t + self.domain_offset * u)
            .collect();
        l2_normalize(&mixed)
    }

    pub fn to_table(&self) -> Result<TextTable> {
        let mut table = TextTable::default();
        for (ci, name) in self.classes.iter().enumerate() {
            table.classes.insert(name.clone(), self.prototypes[ci].clone());
            let mut per_domain = BTreeMap::new();
            for (di, dname) in self.domains.iter().enumerate() {
                per_domain.insert(dname.clone(), self.domain_prototype(ci, di)?);
            }
            table.domains.insert(name.clone(), per_domain);
        }
        Ok(table)
    }

    pub fn max_pairwise_cosine(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.prototypes.len() {
            for j in (i + 1)..self.prototypes.len() {
                let c = cosine(&self.prototypes[i], &self.prototypes[j]).unwrap_or(1.0);
                worst = worst.max(c);
            }
        }
        worst
    }
}

/// Source of unit-norm text embeddings `t_c` and `t_c^d`.
#[derive(Clone, Debug)]
pub enum TextEmbedder {
    ManifestLookup { dim: usize, table: TextTable },
    SyntheticPrototype(SyntheticPrototypes),
}

const UNIT_TOL: f64 = 1e-12;

fn as_unit(v: &[f64]) -> Result<Vec<f64>> {
    if (norm(v) - 1.0).abs() <= UNIT_TOL {
        Ok(v.to_vec())
    } else {
        l2_normalize(v)
    }
}

impl TextEmbedder {
    pub fn from_table(table: TextTable) -> Result<Self> {
        let dim = table.classes.values().next().map(Vec::len).unwrap_or(0);
        let consistent = table.classes.values().all(|v| v.len() == dim)
            && table.domains.values().flat_map(|m| m.values()).all(|v| v.len() == dim);
        if dim == 0 || !consistent {
            return Err(Error::DimensionError("text table vectors must share one nonzero length".into()));
        }
        Ok(Self::ManifestLookup { dim, table })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ManifestLookup { dim, .. } => *dim,
            Self::SyntheticPrototype(p) => p.prototypes.first().map(Vec::len).unwrap_or(0),
        }
    }

    /// `t_c` when `domain` is `None`, otherwise the domain-conditioned `t_c^d`.
    pub fn embed_text(&self, class: &str, domain: Option<&str>) -> Result<Vec<f64>> {
        match self {
            Self::ManifestLookup { table, .. } => {
                let v = match domain {
                    None => table.classes.get(class),
                    Some(d) => table.domains.get(class).and_then(|m| m.get(d)),
                };
                let v = v.ok_or_else(|| {
                    Error::UnknownLabel(match domain {
                        None => format!("class {class:?}"),
                        Some(d) => format!("class {class:?} in domain {d:?}"),
                    })
                })?;
                as_unit(v)
            }
            Self::SyntheticPrototype(p) => {
                let ci = p.class_index(class)?;
                match domain {
                    None => as_unit(&p.prototypes[ci]),
                    Some(d) => p.domain_prototype(ci, p.domain_index(d)?),
                }
            }
        }
    }
}
