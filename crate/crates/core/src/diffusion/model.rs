//! Denoiser models: the identity being fingerprinted.
//!
//! Two real families plus a zero-predictor diagnostic:
//! - `AnalyticGmm` evaluates the exact posterior noise expectation of a
//!   Gaussian-mixture data distribution under the forward process, so its
//!   sampler is an exact probability-flow integrator for that mixture.
//! - `Mlp` is a small tanh network trained on the standard denoising
//!   objective; its identity comes from training randomness.
//! - `Null` predicts zero noise; the sampler degenerates to a rescaling,
//!   which several diagnostics rely on.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg;

use super::schedule::{NoiseSchedule, ScheduleSpec};

/// Mixture weights must sum to 1 within this tolerance at construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Data variance below this (but nonzero) is rejected; exactly zero is the
/// point-mass diagnostic case, accepted but non-invertible.
pub const MIN_POSITIVE_VARIANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    /// Row-major weight rows; `weight.len()` is the output width.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn out_dim(&self) -> usize {
        self.weight.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.first().map_or(0, |r| r.len())
    }
}

/// Where a trained model came from; carried so fine-tuning can resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProvenance {
    pub dataset: GmmParams,
    pub seed: u64,
    pub steps: u32,
    pub batch: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    AnalyticGmm(GmmParams),
    Mlp {
        layers: Vec<LinearLayer>,
        #[serde(skip_serializing_if = "Option::is_none")]
        provenance: Option<TrainProvenance>,
    },
    Null,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::AnalyticGmm(_) => "analytic_gmm",
            ModelKind::Mlp { .. } => "mlp",
            ModelKind::Null => "null",
        }
    }
}

/// Immutable noise predictor with a content-derived identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    dim: usize,
    kind: ModelKind,
    model_id: String,
}

impl DenoiserModel {
    pub fn analytic_gmm(dim: usize, params: GmmParams) -> Result<Self> {
        if params.weights.is_empty() || params.weights.len() != params.means.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} means",
                params.weights.len(),
                params.means.len()
            )));
        }
        if params.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "mixture weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = params.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        for mean in &params.means {
            if mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "gmm mean",
                    expected: dim,
                    got: mean.len(),
                });
            }
            if !linalg::all_finite(mean) {
                return Err(Error::NonFinite {
                    context: "gmm mean".into(),
                });
            }
        }
        if !params.variance.is_finite()
            || params.variance < 0.0
            || (params.variance > 0.0 && params.variance < MIN_POSITIVE_VARIANCE)
        {
            return Err(Error::InvalidArgument(format!(
                "data variance must be 0 (point mass) or at least {MIN_POSITIVE_VARIANCE}, got {}",
                params.variance
            )));
        }
        Ok(Self::seal(dim, ModelKind::AnalyticGmm(params)))
    }

    pub fn mlp(
        dim: usize,
        layers: Vec<LinearLayer>,
        provenance: Option<TrainProvenance>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("mlp needs at least one layer".into()));
        }
        let mut width = dim + TIME_EMBED_DIM;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::DimensionMismatch {
                    context: "mlp layer input",
                    expected: width,
                    got: layer.in_dim(),
                });
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::DimensionMismatch {
                    context: "mlp layer bias",
                    expected: layer.out_dim(),
                    got: layer.bias.len(),
                });
            }
            for row in &layer.weight {
                if row.len() != width || !linalg::all_finite(row) {
                    return Err(Error::InvalidArgument(format!(
                        "mlp layer {i} has a malformed weight row"
                    )));
                }
            }
            if !linalg::all_finite(&layer.bias) {
                return Err(Error::NonFinite {
                    context: "mlp bias".into(),
                });
            }
            width = layer.out_dim();
        }
        if width != dim {
            return Err(Error::DimensionMismatch {
                context: "mlp output",
                expected: dim,
                got: width,
            });
        }
        Ok(Self::seal(dim, ModelKind::Mlp { layers, provenance }))
    }

    pub fn null(dim: usize) -> Self {
        Self::seal(dim, ModelKind::Null)
    }

    fn seal(dim: usize, kind: ModelKind) -> Self {
        let model_id = content_hash(dim, &kind);
        DenoiserModel {
            dim,
            kind,
            model_id,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// A point-mass mixture (zero variance) collapses every trajectory onto
    /// the data point, so its sampler has no usable inverse.
    pub fn is_invertible(&self) -> bool {
        match &self.kind {
            ModelKind::AnalyticGmm(p) => p.variance > 0.0,
            ModelKind::Mlp { .. } | ModelKind::Null => true,
        }
    }

    /// Hash of the exact parameter bytes; used by the losslessness check.
    pub fn parameter_digest(&self) -> String {
        content_hash(self.dim, &self.kind)
    }

    /// Expected noise given the state `x` at grid index `t` (1 ..= steps).
    pub fn predict_noise(
        &self,
        schedule: &NoiseSchedule,
        x: &[f64],
        t: usize,
    ) -> Result<Vec<f64>> {
        if t < 1 || t > schedule.steps() {
            return Err(Error::InvalidArgument(format!(
                "step index {t} outside 1..={}",
                schedule.steps()
            )));
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "predict_noise input",
                expected: self.dim,
                got: x.len(),
            });
        }
        if !linalg::all_finite(x) {
            return Err(Error::NonFinite {
                context: "predict_noise input".into(),
            });
        }
        let a = schedule.alpha_bar(t);
        Ok(match &self.kind {
            ModelKind::AnalyticGmm(p) => gmm_noise(p, x, a),
            ModelKind::Mlp { layers, .. } => {
                mlp_forward(layers, x, time_embedding(t, schedule.steps()))
            }
            ModelKind::Null => vec![0.0; self.dim],
        })
    }
}

// ---- analytic mixture posterior -------------------------------------------

/// Per-component marginal scores and the posterior mixture mean, shared
/// between the plain and taped paths so both produce identical bits.
pub(crate) struct GmmStepTerms {
    /// sqrt(alpha_bar)
    pub sqrt_a: f64,
    /// Marginal variance alpha_bar * sigma^2 + (1 - alpha_bar).
    pub marginal_var: f64,
    /// Multiplier sqrt(1 - alpha_bar) / marginal_var.
    pub noise_coeff: f64,
    /// -1 / (2 * marginal_var)
    pub score_scale: f64,
    /// ln of each mixture weight.
    pub log_weights: Vec<f64>,
}

pub(crate) fn gmm_step_terms(params: &GmmParams, alpha_bar: f64) -> GmmStepTerms {
    let marginal_var = alpha_bar * params.variance + (1.0 - alpha_bar);
    GmmStepTerms {
        sqrt_a: alpha_bar.sqrt(),
        marginal_var,
        noise_coeff: (1.0 - alpha_bar).sqrt() / marginal_var,
        score_scale: -1.0 / (2.0 * marginal_var),
        log_weights: params.weights.iter().map(|w| w.ln()).collect(),
    }
}

fn gmm_noise(params: &GmmParams, x: &[f64], alpha_bar: f64) -> Vec<f64> {
    let terms = gmm_step_terms(params, alpha_bar);
    let k = params.means.len();

    // log responsibility scores: ln w_i + score_scale * ||x - sqrt_a mu_i||^2
    let mut scores = Vec::with_capacity(k);
    for i in 0..k {
        let shifted: Vec<f64> = x
            .iter()
            .zip(&params.means[i])
            .map(|(xi, mi)| xi - mi * terms.sqrt_a)
            .collect();
        let q = linalg::norm_sq(&shifted);
        scores.push(q * terms.score_scale + terms.log_weights[i]);
    }
    let lse = linalg::log_sum_exp(&scores);

    // posterior mean of the data point
    let mut posterior_mean = vec![0.0; x.len()];
    for i in 0..k {
        let r = (scores[i] - lse).exp();
        for (acc, mi) in posterior_mean.iter_mut().zip(&params.means[i]) {
            *acc += mi * r;
        }
    }

    x.iter()
        .zip(&posterior_mean)
        .map(|(xi, mi)| (xi - mi * terms.sqrt_a) * terms.noise_coeff)
        .collect()
}

// ---- mlp -------------------------------------------------------------------

pub const TIME_EMBED_DIM: usize = 3;

pub fn time_embedding(t: usize, steps: usize) -> [f64; TIME_EMBED_DIM] {
    let frac = t as f64 / steps as f64;
    let angle = 2.0 * std::f64::consts::PI * frac;
    [frac, angle.sin(), angle.cos()]
}

fn mlp_forward(layers: &[LinearLayer], x: &[f64], temb: [f64; TIME_EMBED_DIM]) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().copied().chain(temb).collect();
    let last = layers.len() - 1;
    for (i, layer) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.out_dim());
        for (row, b) in layer.weight.iter().zip(&layer.bias) {
            next.push(linalg::dot(row, &y) + b);
        }
        if i != last {
            for v in &mut next {
                *v = v.tanh();
            }
        }
        y = next;
    }
    y
}

// ---- identity ---------------------------------------------------------------

fn content_hash(dim: usize, kind: &ModelKind) -> String {
    let mut hasher = Sha256::new();
    hasher.update((dim as u64).to_le_bytes());
    hasher.update(kind.name().as_bytes());
    match kind {
        ModelKind::AnalyticGmm(p) => {
            hasher.update((p.weights.len() as u64).to_le_bytes());
            for w in &p.weights {
                hasher.update(w.to_bits().to_le_bytes());
            }
            for mean in &p.means {
                for v in mean {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
            hasher.update(p.variance.to_bits().to_le_bytes());
        }
        ModelKind::Mlp { layers, .. } => {
            hasher.update((layers.len() as u64).to_le_bytes());
            for layer in layers {
                hasher.update((layer.out_dim() as u64).to_le_bytes());
                hasher.update((layer.in_dim() as u64).to_le_bytes());
                for row in &layer.weight {
                    for v in row {
                        hasher.update(v.to_bits().to_le_bytes());
                    }
                }
                for v in &layer.bias {
                    hasher.update(v.to_bits().to_le_bytes());
                }
            }
        }
        ModelKind::Null => {}
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// ---- model file -------------------------------------------------------------

/// Self-describing on-disk form. Reading then writing is value-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub dim: usize,
    pub schedule: ScheduleSpec,
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_provenance: Option<AttackProvenance>,
    pub model_id: String,
}

/// Recorded when a model results from a modification attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackProvenance {
    pub source_model_id: String,
    pub attack: serde_json::Value,
}

pub const MODEL_SCHEMA: &str = "denoiser-model-v1";

impl ModelFile {
    pub fn new(
        model: &DenoiserModel,
        schedule: ScheduleSpec,
        seed: Option<u64>,
        attack_provenance: Option<AttackProvenance>,
    ) -> Self {
        ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            dim: model.dim(),
            schedule,
            kind: model.kind().clone(),
            seed,
            attack_provenance,
            model_id: model.model_id().to_string(),
        }
    }

    /// Validate and rebuild the model. The stored id must match the
    /// recomputed content hash.
    pub fn into_model(self) -> Result<DenoiserModel> {
        let model = match self.kind {
            ModelKind::AnalyticGmm(p) => DenoiserModel::analytic_gmm(self.dim, p)?,
            ModelKind::Mlp { layers, provenance } => {
                DenoiserModel::mlp(self.dim, layers, provenance)?
            }
            ModelKind::Null => DenoiserModel::null(self.dim),
        };
        if model.model_id() != self.model_id {
            return Err(Error::InvalidArgument(format!(
                "stored model_id {} does not match parameters (expected {})",
                self.model_id,
                model.model_id()
            )));
        }
        Ok(model)
    }
}
