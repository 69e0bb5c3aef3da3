//! Augmented forget matrices, their nullspace projectors, and the per-domain
//! projection bank `W′ = W·P`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataio::Manifest;
use crate::encoder::{Encoder, TextEmbedder, TextTable};
use crate::error::{Error, Result};
use crate::linalg::{l2_normalize, nullspace_projector, Matrix, NullspaceProjector, DEFAULT_RANK_TOL};
use crate::rng::derive_seed;
use crate::synthesis::{residual_embedding, synthesize_canonical, SynthesisConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "domains", rename_all = "snake_case")]
pub enum UnlearnMode {
    /// Forget classes everywhere.
    Global,
    /// Forget classes only in the named domains.
    SelectiveDomain(BTreeSet<String>),
    /// Selective, with residual domain rows added to each forget matrix.
    CompleteSelectiveDomain(BTreeSet<String>),
    /// Baseline that removes only the text embeddings, in every domain.
    TextOnly,
}

impl UnlearnMode {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::SelectiveDomain(_) => "selective",
            Self::CompleteSelectiveDomain(_) => "complete",
            Self::TextOnly => "text_only",
        }
    }

    pub fn domains(&self) -> Option<&BTreeSet<String>> {
        match self {
            Self::SelectiveDomain(d) | Self::CompleteSelectiveDomain(d) => Some(d),
            Self::Global | Self::TextOnly => None,
        }
    }

    pub fn targets(&self, domain: &str) -> bool {
        self.domains().is_none_or(|d| d.contains(domain))
    }

    pub fn validate(&self, all_domains: &[String]) -> Result<()> {
        if let Some(ds) = self.domains() {
            if ds.is_empty() {
                return Err(Error::InvalidConfig(format!("{} mode needs at least one domain", self.label())));
            }
            if let Some(d) = ds.iter().find(|d| !all_domains.contains(d)) {
                return Err(Error::UnknownLabel(format!("domain {d:?}")));
            }
        }
        Ok(())
    }

    /// Targeted domains in manifest order.
    pub fn targeted<'a>(&self, all_domains: &'a [String]) -> Vec<&'a String> {
        all_domains.iter().filter(|d| self.targets(d)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Text,
    Visual,
    Residual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForgetRow {
    pub kind: RowKind,
    pub class: String,
    pub domain: Option<String>,
    /// Unit-normalized; normalization leaves the row span unchanged.
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForgetMatrix {
    pub rows: Vec<ForgetRow>,
}

impl ForgetMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let rows: Vec<&[f64]> = self.rows.iter().map(|r| r.vector.as_slice()).collect();
        Matrix::from_rows(&rows)
    }

    fn push(&mut self, kind: RowKind, class: &str, domain: Option<&str>, vector: Vec<f64>) {
        self.rows.push(ForgetRow { kind, class: class.to_string(), domain: domain.map(str::to_string), vector });
    }
}

/// A forget matrix and the domains whose projection it edits.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopedForgetMatrix {
    pub domains: Vec<String>,
    pub matrix: ForgetMatrix,
}

/// Synthesis target for Global mode's canonical embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalTarget {
    /// The domain-neutral text embedding `t_c`.
    #[default]
    Neutral,
    /// `normalize(mean_d t_c^d)`, pooling all domain-conditioned texts.
    DomainMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnlearnOptions {
    pub rel_tol: f64,
    /// One projector from all targeted domains' rows instead of one per domain.
    pub pooled: bool,
    pub global_target: GlobalTarget,
}

impl Default for UnlearnOptions {
    fn default() -> Self {
        Self { rel_tol: DEFAULT_RANK_TOL, pooled: false, global_target: GlobalTarget::Neutral }
    }
}

/// Where canonical visual embeddings come from.
#[derive(Clone, Copy)]
pub enum VisualSource<'a> {
    Synthesize { encoder: &'a dyn Encoder, config: SynthesisConfig },
    /// Precomputed `h_c` (per class) and `h_c^d` (per class and domain).
    Precomputed(&'a TextTable),
}

pub struct ForgetContext<'a> {
    pub classes: &'a [String],
    pub domains: &'a [String],
    pub text: &'a TextEmbedder,
    pub visual: VisualSource<'a>,
    pub projection: &'a Matrix,
    pub options: UnlearnOptions,
}

fn position(names: &[String], name: &str, what: &str) -> Result<usize> {
    names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownLabel(format!("{what} {name:?}")))
}

impl<'a> ForgetContext<'a> {
    /// Precomputed canonical embeddings in the manifest take precedence;
    /// otherwise synthesis runs through `encoder`, seeded from the manifest.
    pub fn from_manifest(
        manifest: &'a Manifest,
        text: &'a TextEmbedder,
        encoder: Option<&'a dyn Encoder>,
        projection: &'a Matrix,
        synthesis: SynthesisConfig,
        options: UnlearnOptions,
    ) -> Result<Self> {
        if projection.cols() != manifest.embedding_dim || projection.rows() != manifest.feature_dim {
            return Err(Error::DimensionError(format!(
                "projection is {}x{}, manifest expects {}x{}",
                projection.rows(),
                projection.cols(),
                manifest.feature_dim,
                manifest.embedding_dim
            )));
        }
        let visual = match (&manifest.canonical_embeddings, encoder) {
            (Some(table), _) => VisualSource::Precomputed(table),
            (None, Some(encoder)) => VisualSource::Synthesize {
                encoder,
                config: SynthesisConfig { init_seed: manifest.seeds.synthesis, ..synthesis },
            },
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "manifest has neither canonical embeddings nor an encoder to synthesize them".into(),
                ))
            }
        };
        Ok(Self { classes: &manifest.classes, domains: &manifest.domains, text, visual, projection, options })
    }

    pub fn dim(&self) -> usize {
        self.projection.cols()
    }

    fn text_row(&self, class: &str, domain: Option<&str>) -> Result<Vec<f64>> {
        let t = self.text.embed_text(class, domain)?;
        if t.len() != self.dim() {
            return Err(Error::DimensionError(format!(
                "text embedding of length {} for embedding dim {}",
                t.len(),
                self.dim()
            )));
        }
        Ok(t)
    }

    fn synthesis_target(&self, class: &str, domain: Option<&str>) -> Result<Vec<f64>> {
        match (domain, self.options.global_target) {
            (Some(d), _) => self.text_row(class, Some(d)),
            (None, GlobalTarget::Neutral) => self.text_row(class, None),
            (None, GlobalTarget::DomainMean) => {
                let mut acc = vec![0.0; self.dim()];
                for d in self.domains {
                    let t = self.text_row(class, Some(d))?;
                    acc.iter_mut().zip(&t).for_each(|(a, v)| *a += v);
                }
                l2_normalize(&acc)
            }
        }
    }

    /// Unit canonical visual embedding for `class`, optionally for one domain.
    pub fn canonical(&self, class: &str, domain: Option<&str>) -> Result<Vec<f64>> {
        let ci = position(self.classes, class, "class")?;
        let di = domain.map(|d| position(self.domains, d, "domain")).transpose()?;
        match self.visual {
            VisualSource::Synthesize { encoder, config } => {
                let target = self.synthesis_target(class, domain)?;
                let seed = derive_seed(config.init_seed, ci as u64 + 1, di.map_or(0, |d| d as u64 + 1));
                let res = synthesize_canonical(encoder, self.projection, &target, &config.with_seed(seed))?;
                l2_normalize(&res.canonical_embedding)
            }
            VisualSource::Precomputed(table) => {
                let v = match domain {
                    None => table.classes.get(class),
                    Some(d) => table.domains.get(class).and_then(|m| m.get(d)),
                };
                let v = v.ok_or_else(|| {
                    Error::UnknownLabel(format!("no canonical embedding for {class:?} in {domain:?}"))
                })?;
                if v.len() != self.dim() {
                    return Err(Error::DimensionError(format!("canonical embedding of length {}", v.len())));
                }
                l2_normalize(v)
            }
        }
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows >= self.dim() {
            return Err(Error::ForgetSubspaceFull { rows, rank: rows, dim: self.dim() });
        }
        Ok(())
    }

    fn text_block(&self, forget: &[String]) -> Result<ForgetMatrix> {
        let mut m = ForgetMatrix::default();
        for c in forget {
            m.push(RowKind::Text, c, None, self.text_row(c, None)?);
        }
        Ok(m)
    }

    /// Appends visual (and, for complete mode, residual) rows for one domain.
    fn domain_block(&self, m: &mut ForgetMatrix, forget: &[String], domain: &str, residual: bool) -> Result<()> {
        let visual: Vec<Vec<f64>> = forget.iter().map(|c| self.canonical(c, Some(domain))).collect::<Result<_>>()?;
        for (c, h) in forget.iter().zip(&visual) {
            m.push(RowKind::Visual, c, Some(domain), h.clone());
        }
        if residual {
            for (c, hd) in forget.iter().zip(&visual) {
                let hg = self.canonical(c, None)?;
                m.push(RowKind::Residual, c, Some(domain), residual_embedding(&hg, hd)?);
            }
        }
        Ok(())
    }

    /// Rows ordered text, visual, residual. Selective and complete modes
    /// produce one matrix per targeted domain unless `options.pooled`.
    pub fn build_forget_matrices(&self, mode: &UnlearnMode, forget: &[String]) -> Result<Vec<ScopedForgetMatrix>> {
        if forget.is_empty() {
            return Err(Error::InvalidConfig("forget set is empty".into()));
        }
        for c in forget {
            position(self.classes, c, "class")?;
        }
        let unique: BTreeSet<&String> = forget.iter().collect();
        if unique.len() != forget.len() {
            return Err(Error::InvalidConfig("forget set has duplicate classes".into()));
        }
        mode.validate(self.domains)?;
        let k = forget.len();
        let all: Vec<String> = self.domains.to_vec();

        match mode {
            UnlearnMode::TextOnly => {
                self.check_rows(k)?;
                Ok(vec![ScopedForgetMatrix { domains: all, matrix: self.text_block(forget)? }])
            }
            UnlearnMode::Global => {
                self.check_rows(2 * k)?;
                let mut m = self.text_block(forget)?;
                for c in forget {
                    m.push(RowKind::Visual, c, None, self.canonical(c, None)?);
                }
                Ok(vec![ScopedForgetMatrix { domains: all, matrix: m }])
            }
            UnlearnMode::SelectiveDomain(_) | UnlearnMode::CompleteSelectiveDomain(_) => {
                let residual = matches!(mode, UnlearnMode::CompleteSelectiveDomain(_));
                let per_domain = if residual { 2 * k } else { k };
                let targeted: Vec<String> = mode.targeted(self.domains).into_iter().cloned().collect();
                if self.options.pooled {
                    self.check_rows(k + per_domain * targeted.len())?;
                    let mut m = self.text_block(forget)?;
                    for d in &targeted {
                        self.domain_block(&mut m, forget, d, residual)?;
                    }
                    if residual {
                        // keep the text, visual, residual ordering across domains
                        m.rows.sort_by_key(|r| r.kind as u8);
                    }
                    Ok(vec![ScopedForgetMatrix { domains: targeted, matrix: m }])
                } else {
                    self.check_rows(k + per_domain)?;
                    targeted
                        .into_iter()
                        .map(|d| {
                            let mut m = self.text_block(forget)?;
                            self.domain_block(&mut m, forget, &d, residual)?;
                            Ok(ScopedForgetMatrix { domains: vec![d], matrix: m })
                        })
                        .collect()
                }
            }
        }
    }
}

pub fn compute_projector(m: &ForgetMatrix, rel_tol: f64) -> Result<NullspaceProjector> {
    nullspace_projector(&m.to_matrix()?, rel_tol)
}

#[derive(Clone, Debug, PartialEq)]
pub enum BankEntry {
    /// The untouched base projection.
    Base,
    Projected { matrix: Matrix, rank_removed: usize },
}

/// Per-domain effective projections. Untargeted domains resolve to the base
/// matrix itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionBank {
    base: Matrix,
    mode: Option<UnlearnMode>,
    entries: BTreeMap<String, BankEntry>,
    order: Vec<String>,
}

impl ProjectionBank {
    /// A bank with no unlearning applied.
    pub fn untouched(base: Matrix, domains: &[String]) -> Self {
        let entries = domains.iter().map(|d| (d.clone(), BankEntry::Base)).collect();
        Self { base, mode: None, entries, order: domains.to_vec() }
    }

    pub fn from_parts(
        base: Matrix,
        mode: Option<UnlearnMode>,
        domains: Vec<String>,
        entries: BTreeMap<String, BankEntry>,
    ) -> Result<Self> {
        if domains.len() != entries.len() || domains.iter().any(|d| !entries.contains_key(d)) {
            return Err(Error::InvalidConfig("bank entries must match its domain list".into()));
        }
        for e in entries.values() {
            if let BankEntry::Projected { matrix, .. } = e {
                if matrix.shape() != base.shape() {
                    return Err(Error::DimensionError("projected entry shape differs from base".into()));
                }
            }
        }
        Ok(Self { base, mode, entries, order: domains })
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn mode(&self) -> ModeRef<'_> {
        ModeRef(self.mode.as_ref())
    }

    pub fn unlearn_mode(&self) -> Option<&UnlearnMode> {
        self.mode.as_ref()
    }

    pub fn domains(&self) -> &[String] {
        &self.order
    }

    pub fn entry(&self, domain: &str) -> Result<&BankEntry> {
        self.entries.get(domain).ok_or_else(|| Error::UnknownLabel(format!("domain {domain:?}")))
    }

    pub fn effective(&self, domain: &str) -> Result<&Matrix> {
        Ok(match self.entry(domain)? {
            BankEntry::Base => &self.base,
            BankEntry::Projected { matrix, .. } => matrix,
        })
    }
}

/// Bank mode view where `None` means no unlearning was applied.
#[derive(Clone, Copy, Debug)]
pub struct ModeRef<'a>(pub Option<&'a UnlearnMode>);

impl ModeRef<'_> {
    pub fn label(&self) -> &'static str {
        self.0.map_or("none", UnlearnMode::label)
    }

    pub fn targets(&self, domain: &str) -> bool {
        self.0.is_some_and(|m| m.targets(domain))
    }

    pub fn domains(&self) -> Option<&BTreeSet<String>> {
        self.0.and_then(UnlearnMode::domains)
    }
}

/// Installs `W·P_d` for every targeted domain; others keep `W`.
pub fn apply_unlearning(
    w: &Matrix,
    mode: &UnlearnMode,
    domains: &[String],
    projectors: &BTreeMap<String, NullspaceProjector>,
) -> Result<ProjectionBank> {
    mode.validate(domains)?;
    let mut entries = BTreeMap::new();
    for d in domains {
        if !mode.targets(d) {
            entries.insert(d.clone(), BankEntry::Base);
            continue;
        }
        let p = projectors
            .get(d)
            .ok_or_else(|| Error::InvalidConfig(format!("no projector for targeted domain {d:?}")))?;
        if p.dim() != w.cols() {
            return Err(Error::DimensionError(format!(
                "projector is {0}x{0} but W has {1} columns",
                p.dim(),
                w.cols()
            )));
        }
        let matrix = w.matmul(p.matrix())?;
        entries.insert(d.clone(), BankEntry::Projected { matrix, rank_removed: p.rank_removed() });
    }
    ProjectionBank::from_parts(w.clone(), Some(mode.clone()), domains.to_vec(), entries)
}

#[derive(Clone, Debug)]
pub struct UnlearnOutcome {
    pub matrices: Vec<ScopedForgetMatrix>,
    pub projectors: BTreeMap<String, NullspaceProjector>,
    pub bank: ProjectionBank,
}

/// Forget matrices → projectors → bank in one call.
pub fn unlearn(ctx: &ForgetContext<'_>, mode: &UnlearnMode, forget: &[String]) -> Result<UnlearnOutcome> {
    let matrices = ctx.build_forget_matrices(mode, forget)?;
    let mut projectors = BTreeMap::new();
    for scoped in &matrices {
        let p = compute_projector(&scoped.matrix, ctx.options.rel_tol)?;
        for d in &scoped.domains {
            projectors.insert(d.clone(), p.clone());
        }
    }
    let bank = apply_unlearning(ctx.projection, mode, ctx.domains, &projectors)?;
    Ok(UnlearnOutcome { matrices, projectors, bank })
}
