//! Training-free, data-free class unlearning for dual-encoder models by
//! projecting the visual projection matrix onto the orthogonal complement of
//! a forget subspace.

pub mod dataio;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod rng;
pub mod synthesis;
pub mod unlearning;

pub use encoder::{
    Encoder, ReplayEncoder, SyntheticPrototypes, TextEmbedder, TextTable, ToyEncoder, ToyEncoderConfig, ToyVariant,
};
pub use error::{Error, FormatError, Result};
pub use evaluation::{evaluate, mia_score, Accuracy, DomainReport, EvaluationReport, LabeledEmbeddingSet, PhasePair};
pub use linalg::{nullspace_projector, thin_svd, Matrix, NullspaceProjector, SvdFactors, DEFAULT_RANK_TOL};
pub use synthesis::{synthesize_canonical, StopReason, SynthesisConfig, SynthesisResult};
pub use unlearning::{
    apply_unlearning, compute_projector, unlearn, BankEntry, ForgetContext, ForgetMatrix, ForgetRow, GlobalTarget,
    ProjectionBank, RowKind, ScopedForgetMatrix, UnlearnMode, UnlearnOptions, UnlearnOutcome, VisualSource,
};
