//! Canonical input synthesis by gradient ascent on the cosine between an
//! input's projected embedding and a text embedding.

use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::{dot, l2_normalize, norm, Matrix};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    /// Step multiplier after an accepted proposal; 1.0 never grows the step.
    pub growth: f64,
    pub min_step: f64,
    pub init_seed: u64,
    pub target_cosine: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            initial_step: 0.1,
            backtrack: 0.5,
            growth: 2.0,
            min_step: 1e-6,
            init_seed: 0,
            target_cosine: 0.999,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtracking factor {} outside (0, 1)",
                self.backtrack
            )));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(Error::InvalidConfig(format!("growth factor {} below 1", self.growth)));
        }
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_step ({}) < initial_step ({})",
                self.min_step, self.initial_step
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    MaxIters,
    StepUnderflow,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub canonical_input: Vec<f64>,
    /// `encode(x_c) · W`, not normalized.
    pub canonical_embedding: Vec<f64>,
    /// Objective at the start and after every accepted step.
    pub cosine_trajectory: Vec<f64>,
    pub iterations_used: usize,
    pub stop: StopReason,
}

impl SynthesisResult {
    pub fn final_cosine(&self) -> f64 {
        *self.cosine_trajectory.last().expect("trajectory holds the initial value")
    }
}

/// Cosine objective and its gradient with respect to the input.
#[derive(Clone, Debug)]
pub struct ObjectiveEval {
    pub cosine: f64,
    pub embedding: Vec<f64>,
    pub gradient: Vec<f64>,
}

pub fn projected_embedding(encoder: &dyn Encoder, w: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    w.vecmat(&encoder.encode(x)?)
}

fn objective_cosine(h: &[f64], target: &[f64]) -> f64 {
    let denom = norm(h) * norm(target);
    if denom == 0.0 {
        0.0
    } else {
        dot(h, target) / denom
    }
}

/// Objective value only; shares the exact arithmetic of [`objective`].
pub fn objective_value(encoder: &dyn Encoder, w: &Matrix, target: &[f64], x: &[f64]) -> Result<f64> {
    Ok(objective_cosine(&projected_embedding(encoder, w, x)?, target))
}

/// `cos(f(x)W, t)` for unit `t` and its gradient `∂/∂x`.
///
/// With `h = f(x)W` and `c = h·t/‖h‖`, `∂c/∂h = (t − c·h/‖h‖)/‖h‖`,
/// `∂c/∂f = W ∂c/∂h` and `∂c/∂x = Jᵀ ∂c/∂f`.
pub fn objective(encoder: &dyn Encoder, w: &Matrix, target: &[f64], x: &[f64]) -> Result<ObjectiveEval> {
    let embedding = projected_embedding(encoder, w, x)?;
    let n = norm(&embedding);
    let cosine = objective_cosine(&embedding, target);
    if n == 0.0 {
        return Ok(ObjectiveEval { cosine, embedding, gradient: vec![0.0; x.len()] });
    }
    let tn = norm(target);
    let d_embedding: Vec<f64> =
        target.iter().zip(&embedding).map(|(t, h)| (t / tn - cosine * h / n) / n).collect();
    let d_feature = w.matvec(&d_embedding)?;
    let gradient = encoder.input_gradient(x, &d_feature)?;
    Ok(ObjectiveEval { cosine, embedding, gradient })
}

fn check_shapes(encoder: &dyn Encoder, w: &Matrix, target: &[f64]) -> Result<()> {
    if w.rows() != encoder.feature_dim() || w.cols() != target.len() {
        return Err(Error::DimensionError(format!(
            "projection {}x{} does not connect feature dim {} to embedding dim {}",
            w.rows(),
            w.cols(),
            encoder.feature_dim(),
            target.len()
        )));
    }
    Ok(())
}

/// Seeded standard normal starting point for [`synthesize_canonical`].
pub fn initial_input(encoder: &dyn Encoder, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    rng::standard_normal_vec(&mut r, encoder.input_dim())
}

/// Gradient ascent from a seeded normal start. Each iteration takes one
/// gradient and proposes `x + step·∇`; the proposal is accepted only on a
/// strict increase, otherwise the step shrinks by `cfg.backtrack` and is
/// retried. Accepted steps multiply the step by `cfg.growth` for the next
/// iteration.
pub fn synthesize_canonical(
    encoder: &dyn Encoder,
    w: &Matrix,
    target: &[f64],
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    let tnorm = norm(target);
    if (tnorm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidTarget(tnorm));
    }
    check_shapes(encoder, w, target)?;
    let x0 = initial_input(encoder, cfg.init_seed);
    ascend(encoder, w, target, cfg, x0)
}

/// Same as [`synthesize_canonical`] but from a caller-supplied start.
pub fn ascend(
    encoder: &dyn Encoder,
    w: &Matrix,
    target: &[f64],
    cfg: &SynthesisConfig,
    x0: Vec<f64>,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    check_shapes(encoder, w, target)?;
    let mut x = x0;
    let mut eval = objective(encoder, w, target, &x)?;
    let mut trajectory = vec![eval.cosine];
    let mut step = cfg.initial_step;
    let mut iterations = 0;

    let stop = loop {
        if eval.cosine >= cfg.target_cosine {
            break StopReason::TargetReached;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        iterations += 1;
        let accepted = loop {
            if step < cfg.min_step {
                break None;
            }
            let candidate: Vec<f64> =
                x.iter().zip(&eval.gradient).map(|(xi, gi)| xi + step * gi).collect();
            let value = objective_value(encoder, w, target, &candidate)?;
            if value > eval.cosine {
                break Some(candidate);
            }
            step *= cfg.backtrack;
        };
        match accepted {
            Some(candidate) => {
                x = candidate;
                step *= cfg.growth;
                eval = objective(encoder, w, target, &x)?;
                trajectory.push(eval.cosine);
            }
            None => break StopReason::StepUnderflow,
        }
    };

    Ok(SynthesisResult {
        canonical_input: x,
        canonical_embedding: eval.embedding,
        cosine_trajectory: trajectory,
        iterations_used: iterations,
        stop,
    })
}

/// `normalize(h_domain − h_global)`; pass unit-normalized embeddings.
pub fn residual_embedding(h_global: &[f64], h_domain: &[f64]) -> Result<Vec<f64>> {
    if h_global.len() != h_domain.len() {
        return Err(Error::DimensionError(format!(
            "residual of embeddings with lengths {} and {}",
            h_global.len(),
            h_domain.len()
        )));
    }
    let diff: Vec<f64> = h_domain.iter().zip(h_global).map(|(d, g)| d - g).collect();
    if norm(&diff) < 1e-12 {
        return Err(Error::DegenerateResidual);
    }
    l2_normalize(&diff)
}

/// Worst relative errors of the analytic gradients against central
/// differences over seeded random probes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub probes: usize,
    pub step: f64,
    pub encoder_max_rel_err: f64,
    pub objective_max_rel_err: f64,
}

fn central_difference(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe)?;
        probe[i] = x[i] - step;
        let down = f(&probe)?;
        probe[i] = x[i];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    diff / norm(a).max(norm(b)).max(1e-12)
}

/// Probe `i` draws `x`, a feature-space cotangent `g` and a unit target from
/// `rng::derive_seed(seed, i, ·)`.
pub fn gradient_audit(encoder: &dyn Encoder, w: &Matrix, probes: usize, seed: u64, step: f64) -> Result<GradientAudit> {
    if probes == 0 || !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig("gradient audit needs probes >= 1 and a positive step".into()));
    }
    if w.rows() != encoder.feature_dim() {
        return Err(Error::DimensionError("projection rows must match the encoder feature dim".into()));
    }
    let (mut enc_worst, mut obj_worst) = (0.0_f64, 0.0_f64);
    for i in 0..probes as u64 {
        let x = rng::standard_normal_vec(&mut rng::seeded(rng::derive_seed(seed, i, 1)), encoder.input_dim());
        let g = rng::standard_normal_vec(&mut rng::seeded(rng::derive_seed(seed, i, 2)), encoder.feature_dim());
        let t = l2_normalize(&rng::standard_normal_vec(&mut rng::seeded(rng::derive_seed(seed, i, 3)), w.cols()))?;

        let analytic = encoder.input_gradient(&x, &g)?;
        let fd = central_difference(|z| Ok(dot(&encoder.encode(z)?, &g)), &x, step)?;
        enc_worst = enc_worst.max(relative_error(&analytic, &fd));

        let eval = objective(encoder, w, &t, &x)?;
        let fd = central_difference(|z| objective_value(encoder, w, &t, z), &x, step)?;
        obj_worst = obj_worst.max(relative_error(&eval.gradient, &fd));
    }
    Ok(GradientAudit { probes, step, encoder_max_rel_err: enc_worst, objective_max_rel_err: obj_worst })
}
