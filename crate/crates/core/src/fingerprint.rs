//! Fingerprint noise synthesis.
//!
//! Starting from the inverted trajectory origin of a watermarked anchor, the
//! input noise is optimized against a joint objective: payload recovery from
//! the sampled output, output-side reconstruction of the anchor, and
//! input-side regularization toward the origin. The model itself is never
//! touched; only the input noise moves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::diffusion::{sample_traced, DenoiserModel, LatentCodec, NoiseSchedule};
use crate::error::{Error, Result};
use crate::files;
use crate::linalg;
use crate::optim::{Adam, AdamParams};
use crate::seed;
use crate::watermark::{bce_loss, bce_loss_traced, Anchor, WatermarkKey};

/// Seed for the fixed orthogonal transform inside the structural loss term;
/// part of the loss definition, not a tunable.
const STRUCTURE_TRANSFORM_SEED: u64 = 0x5354_5255_4354;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub iterations: u32,
    pub learning_rate: f64,
    pub lambda_rec: f64,
    pub lambda_reg: f64,
    pub gamma: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Sampler transitions per checkpoint segment.
    pub checkpoint_segment: usize,
    /// Stop early once the total loss drops below this.
    pub early_stop: f64,
    /// Used only for the random-initialization baseline draw.
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            iterations: 200,
            learning_rate: 0.1,
            lambda_rec: 0.6,
            lambda_reg: 0.05,
            gamma: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            checkpoint_segment: 1,
            early_stop: 1e-4,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidArgument(
                "optimizer needs at least 1 iteration".into(),
            ));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("lambda_rec", self.lambda_rec),
            ("lambda_reg", self.lambda_reg),
            ("gamma", self.gamma),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.checkpoint_segment == 0 {
            return Err(Error::InvalidArgument(
                "checkpoint segment must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn adam_params(&self) -> AdamParams {
        AdamParams {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Loss values for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub watermark: f64,
    pub reconstruction: f64,
    pub regularization: f64,
    pub total: f64,
}

/// One trigger-verification tuple: the anchor, the trajectory origin, the
/// optimized noise, and the optimization trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub model_id: String,
    pub baseline: bool,
    pub anchor: Anchor,
    /// Trajectory origin for standard runs; the Gaussian initialization for
    /// baseline runs (which is also what the regularizer anchors to).
    pub origin: Vec<f64>,
    pub noise: Vec<f64>,
    pub trace: Vec<LossParts>,
    pub iterations_run: u32,
    pub final_target_bit_accuracy: f64,
    pub config: OptimConfig,
    pub config_hash: String,
}

pub const RECORD_SCHEMA: &str = "fingerprint-record-v1";

/// On-disk wrapper so record files are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordFile {
    pub schema: String,
    #[serde(flatten)]
    pub record: FingerprintRecord,
}

impl From<FingerprintRecord> for RecordFile {
    fn from(record: FingerprintRecord) -> Self {
        RecordFile {
            schema: RECORD_SCHEMA.to_string(),
            record,
        }
    }
}

/// First-difference operator rows after a fixed seeded orthogonal transform;
/// penalizing differences of transformed coordinates measures structural
/// rather than pointwise deviation.
fn structure_transform(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(STRUCTURE_TRANSFORM_SEED);
    let q = linalg::seeded_orthonormal(&mut rng, dim, dim)
        .expect("square orthonormal basis always exists");
    // rows of D * Q where D is the (dim-1) x dim first-difference matrix
    (0..dim.saturating_sub(1))
        .map(|r| {
            (0..dim)
                .map(|c| q[r + 1][c] - q[r][c])
                .collect()
        })
        .collect()
}

/// Output-side loss: squared deviation from the anchor plus `gamma` times
/// the squared deviation of first differences under a fixed orthogonal
/// transform (the structural term).
pub fn rec_loss(generated: &[f64], anchor_point: &[f64], gamma: f64) -> Result<f64> {
    if generated.len() != anchor_point.len() {
        return Err(Error::DimensionMismatch {
            context: "rec_loss",
            expected: anchor_point.len(),
            got: generated.len(),
        });
    }
    let diff = linalg::sub(generated, anchor_point);
    let l2 = linalg::norm_sq(&diff);
    if gamma == 0.0 {
        return Ok(l2);
    }
    let rows = structure_transform(generated.len());
    let structural: f64 = rows.iter().map(|r| linalg::dot(r, &diff).powi(2)).sum();
    Ok(l2 + gamma * structural)
}

/// Input-side loss: squared distance from the anchor point in noise space.
pub fn reg_loss(z: &[f64], origin: &[f64]) -> Result<f64> {
    if z.len() != origin.len() {
        return Err(Error::DimensionMismatch {
            context: "reg_loss",
            expected: origin.len(),
            got: z.len(),
        });
    }
    Ok(linalg::norm_sq(&linalg::sub(z, origin)))
}

fn rec_loss_traced(
    tape: &mut Tape,
    generated: Var,
    anchor_point: &[f64],
    gamma: f64,
) -> Result<Var> {
    let target = tape.constant(anchor_point, &[anchor_point.len()])?;
    let diff = tape.sub(generated, target)?;
    let l2 = tape.sq_norm(diff)?;
    if gamma == 0.0 {
        return Ok(l2);
    }
    let rows = structure_transform(anchor_point.len());
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let m = tape.constant(&flat, &[rows.len(), anchor_point.len()])?;
    let transformed = tape.matvec(m, diff)?;
    let structural = tape.sq_norm(transformed)?;
    let weighted = tape.scale_const(structural, gamma)?;
    tape.add(l2, weighted)
}

fn reg_loss_traced(tape: &mut Tape, z: Var, origin: &[f64]) -> Result<Var> {
    let o = tape.constant(origin, &[origin.len()])?;
    let diff = tape.sub(z, o)?;
    tape.sq_norm(diff)
}

/// Taped joint objective at `z`; returns the total plus the three parts.
fn total_loss_traced(
    tape: &mut Tape,
    model: &Arc<DenoiserModel>,
    schedule: &Arc<NoiseSchedule>,
    codec: &LatentCodec,
    z: Var,
    anchor: &Anchor,
    key: &WatermarkKey,
    reg_anchor: &[f64],
    config: &OptimConfig,
) -> Result<(Var, LossParts)> {
    let grid = schedule.descending_grid();
    let latent_out = sample_traced(
        tape,
        model,
        schedule,
        z,
        &grid,
        Some(config.checkpoint_segment),
    )?;
    let generated = codec.decode_traced(tape, latent_out)?;

    let logits = key.decode_soft_traced(tape, generated)?;
    let watermark = bce_loss_traced(tape, &logits, &anchor.message)?;
    let reconstruction = rec_loss_traced(tape, generated, &anchor.watermarked, config.gamma)?;
    let regularization = reg_loss_traced(tape, z, reg_anchor)?;

    let rec_scaled = tape.scale_const(reconstruction, config.lambda_rec)?;
    let reg_scaled = tape.scale_const(regularization, config.lambda_reg)?;
    let partial = tape.add(watermark, rec_scaled)?;
    let total = tape.add(partial, reg_scaled)?;

    let parts = LossParts {
        watermark: tape.scalar_value(watermark),
        reconstruction: tape.scalar_value(reconstruction),
        regularization: tape.scalar_value(regularization),
        total: tape.scalar_value(total),
    };
    Ok((total, parts))
}

/// Plain evaluation of the joint objective (no tape); test and diagnostic
/// mirror of the traced path.
pub fn total_loss(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    codec: &LatentCodec,
    z: &[f64],
    anchor: &Anchor,
    key: &WatermarkKey,
    reg_anchor: &[f64],
    config: &OptimConfig,
) -> Result<LossParts> {
    let grid = schedule.descending_grid();
    let latent_out = crate::diffusion::sample(model, schedule, z, &grid)?;
    let generated = codec.decode(&latent_out)?;
    let watermark = bce_loss(&key.decode_soft(&generated)?, &anchor.message)?;
    let reconstruction = rec_loss(&generated, &anchor.watermarked, config.gamma)?;
    let regularization = reg_loss(z, reg_anchor)?;
    let total = watermark
        + config.lambda_rec * reconstruction
        + config.lambda_reg * regularization;
    Ok(LossParts {
        watermark,
        reconstruction,
        regularization,
        total,
    })
}

/// Bit accuracy of one atomic generation against the record's message.
fn target_bit_accuracy(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    codec: &LatentCodec,
    key: &WatermarkKey,
    anchor: &Anchor,
    z: &[f64],
) -> Result<f64> {
    let out = crate::diffusion::sample(model, schedule, z, &schedule.descending_grid())?;
    let decoded = key.decode_hard(&codec.decode(&out)?)?;
    crate::verify::bit_accuracy(&anchor.message, &decoded)
}

fn run_optimization(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    codec: &LatentCodec,
    anchor: &Anchor,
    key: &WatermarkKey,
    config: &OptimConfig,
    origin: Vec<f64>,
    init: Vec<f64>,
    baseline: bool,
) -> Result<FingerprintRecord> {
    config.validate()?;
    if anchor.watermarked.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "synthesize anchor",
            expected: model.dim(),
            got: anchor.watermarked.len(),
        });
    }

    let model_arc = Arc::new(model.clone());
    let schedule_arc = Arc::new(schedule.clone());
    let dim = model.dim();

    let mut z = init;
    let mut adam = Adam::new(config.adam_params(), &[dim]);
    let mut trace: Vec<LossParts> = Vec::with_capacity(config.iterations as usize + 1);
    let mut updates = 0u32;

    loop {
        let mut tape = Tape::new();
        let zv = tape.leaf(&z, &[dim])?;
        let (total, parts) = total_loss_traced(
            &mut tape,
            &model_arc,
            &schedule_arc,
            codec,
            zv,
            anchor,
            key,
            &origin,
            config,
        )?;
        if !parts.total.is_finite() {
            return Err(Error::NumericFailure {
                context: format!("loss diverged at iteration {updates}"),
            });
        }
        trace.push(parts);
        if updates >= config.iterations || parts.total < config.early_stop {
            break;
        }
        let grads = tape.backward(total, &[zv])?;
        adam.step(&mut [&mut z], &[&grads[0]], config.learning_rate)?;
        updates += 1;
    }

    let final_target_bit_accuracy =
        target_bit_accuracy(model, schedule, codec, key, anchor, &z)?;

    let config_hash = files::canonical_hash(config)?;
    Ok(FingerprintRecord {
        model_id: model.model_id().to_string(),
        baseline,
        anchor: anchor.clone(),
        origin,
        noise: z,
        trace,
        iterations_run: updates,
        final_target_bit_accuracy,
        config: *config,
        config_hash,
    })
}

/// Standard synthesis: initialize at the inverted trajectory origin of the
/// anchor and regularize toward it.
pub fn synthesize(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    codec: &LatentCodec,
    anchor: &Anchor,
    key: &WatermarkKey,
    config: &OptimConfig,
) -> Result<FingerprintRecord> {
    let latent_anchor = codec.encode(&anchor.watermarked)?;
    let origin = crate::diffusion::invert(
        model,
        schedule,
        &latent_anchor,
        &schedule.ascending_grid(),
    )?;
    let init = origin.clone();
    run_optimization(
        model, schedule, codec, anchor, key, config, origin, init, false,
    )
}

/// Trajectory-agnostic control: initialize from a seeded standard Gaussian
/// draw and regularize toward that draw instead of the trajectory origin.
pub fn synthesize_random_baseline(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    codec: &LatentCodec,
    anchor: &Anchor,
    key: &WatermarkKey,
    config: &OptimConfig,
) -> Result<FingerprintRecord> {
    let mut rng = seed::rng(config.seed);
    let init = seed::normal_vec(&mut rng, model.dim());
    let origin = init.clone();
    run_optimization(
        model, schedule, codec, anchor, key, config, origin, init, true,
    )
}

/// Loss-trace CSV rows for a record: iteration plus the four loss columns.
pub fn trace_csv(record: &FingerprintRecord) -> (Vec<String>, Vec<Vec<String>>) {
    let header = vec![
        "iteration".to_string(),
        "watermark_loss".to_string(),
        "reconstruction_loss".to_string(),
        "regularization_loss".to_string(),
        "total_loss".to_string(),
    ];
    let rows = record
        .trace
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                format!("{}", p.watermark),
                format!("{}", p.reconstruction),
                format!("{}", p.regularization),
                format!("{}", p.total),
            ]
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::GmmParams;
    use crate::watermark::{make_key, KeySpec, Message};

    fn test_setup(dim: usize) -> (DenoiserModel, NoiseSchedule, LatentCodec, WatermarkKey, Anchor)
    {
        let mut rng = seed::rng(420);
        let means: Vec<Vec<f64>> = (0..4)
            .map(|_| seed::normal_vec(&mut rng, dim).iter().map(|v| 2.0 * v).collect())
            .collect();
        let model = DenoiserModel::analytic_gmm(
            dim,
            GmmParams {
                weights: vec![0.25; 4],
                means,
                variance: 0.25,
            },
        )
        .unwrap();
        let schedule = NoiseSchedule::cosine(25).unwrap();
        let codec = LatentCodec::Identity;
        let key = make_key(KeySpec {
            seed: 7,
            bits: dim,
            dim,
            strength: 0.5,
            temperature: 8.0,
        })
        .unwrap();
        let carrier = seed::normal_vec(&mut rng, dim);
        let message = Message::random(&mut rng, dim);
        let anchor = key.embed(&carrier, &message).unwrap();
        (model, schedule, codec, key, anchor)
    }

    #[test]
    fn rec_loss_vanishes_at_the_anchor() {
        let a = vec![0.3, -0.2, 1.0, 0.0];
        assert_eq!(rec_loss(&a, &a, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn rec_loss_l2_term_is_exact_for_a_basis_bump() {
        let a = vec![0.0; 8];
        let mut g = a.clone();
        g[0] = 0.25;
        let pure_l2 = rec_loss(&g, &a, 0.0).unwrap();
        assert!((pure_l2 - 0.0625).abs() < 1e-15);
        // with gamma > 0 the structural term adds on top
        let with_structure = rec_loss(&g, &a, 0.2).unwrap();
        assert!(with_structure >= pure_l2);
    }

    #[test]
    fn zero_gamma_reduces_to_pure_l2() {
        let mut rng = seed::rng(88);
        let a = seed::normal_vec(&mut rng, 10);
        let g = seed::normal_vec(&mut rng, 10);
        let l2 = linalg::norm_sq(&linalg::sub(&g, &a));
        assert!((rec_loss(&g, &a, 0.0).unwrap() - l2).abs() < 1e-12);
        assert!(rec_loss(&g, &a, 0.2).unwrap() > l2);
    }

    #[test]
    fn reg_loss_is_squared_distance() {
        let o = vec![1.0, 2.0, 3.0];
        assert_eq!(reg_loss(&o, &o).unwrap(), 0.0);
        let z = vec![2.0, 2.0, 1.0];
        assert_eq!(reg_loss(&z, &o).unwrap(), 1.0 + 0.0 + 4.0);
    }

    #[test]
    fn total_loss_weights_combine_linearly() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig::default();
        let mut rng = seed::rng(5);
        let z = seed::normal_vec(&mut rng, 8);
        let parts = total_loss(&model, &schedule, &codec, &z, &anchor, &key, &z, &config).unwrap();
        let hand_sum =
            parts.watermark + 0.6 * parts.reconstruction + 0.05 * parts.regularization;
        assert!((parts.total - hand_sum).abs() < 1e-12);

        // zero weights collapse the total onto the watermark term
        let bare = OptimConfig {
            lambda_rec: 0.0,
            lambda_reg: 0.0,
            ..config
        };
        let parts = total_loss(&model, &schedule, &codec, &z, &anchor, &key, &z, &bare).unwrap();
        assert_eq!(parts.total, parts.watermark);
    }

    #[test]
    fn loss_at_the_origin_quantifies_the_inversion_residual() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig::default();
        let origin = crate::diffusion::invert(
            &model,
            &schedule,
            &codec.encode(&anchor.watermarked).unwrap(),
            &schedule.ascending_grid(),
        )
        .unwrap();
        let parts = total_loss(
            &model, &schedule, &codec, &origin, &anchor, &key, &origin, &config,
        )
        .unwrap();
        assert_eq!(parts.regularization, 0.0);
        assert!(parts.watermark > 0.0);
        assert!(parts.reconstruction > 0.0);
    }

    #[test]
    fn traced_total_matches_plain_total() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig::default();
        let mut rng = seed::rng(15);
        let z = seed::normal_vec(&mut rng, 8);
        let plain = total_loss(&model, &schedule, &codec, &z, &anchor, &key, &z, &config).unwrap();

        let model_arc = Arc::new(model);
        let sched_arc = Arc::new(schedule);
        let mut tape = Tape::new();
        let zv = tape.leaf(&z, &[8]).unwrap();
        let (_, traced) = total_loss_traced(
            &mut tape, &model_arc, &sched_arc, &codec, zv, &anchor, &key, &z, &config,
        )
        .unwrap();
        assert_eq!(plain.watermark, traced.watermark);
        assert_eq!(plain.reconstruction, traced.reconstruction);
        assert_eq!(plain.regularization, traced.regularization);
        assert_eq!(plain.total, traced.total);
    }

    #[test]
    fn noop_update_returns_the_origin_bitwise() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig {
            iterations: 1,
            learning_rate: 0.0,
            ..OptimConfig::default()
        };
        let record = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        assert_eq!(
            record.noise.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            record.origin.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(record.iterations_run, 1);
        assert_eq!(record.trace.len(), 2);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig {
            iterations: 10,
            ..OptimConfig::default()
        };
        let a = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        let b = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        assert_eq!(
            a.noise.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.noise.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn synthesis_descends_and_recovers_the_payload() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig {
            iterations: 60,
            ..OptimConfig::default()
        };
        let record = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        let first = record.trace.first().unwrap().total;
        let last = record.trace.last().unwrap().total;
        assert!(last <= first, "no descent: {first} -> {last}");
        assert!(
            record.final_target_bit_accuracy >= 0.9,
            "target accuracy {}",
            record.final_target_bit_accuracy
        );
    }

    #[test]
    fn model_parameters_are_untouched_by_synthesis() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let digest_before = model.parameter_digest();
        let config = OptimConfig {
            iterations: 5,
            ..OptimConfig::default()
        };
        let _ = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        assert_eq!(model.parameter_digest(), digest_before);
        assert_eq!(model.model_id(), digest_before);
    }

    #[test]
    fn baseline_flags_and_reanchors() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig {
            iterations: 5,
            seed: 99,
            ..OptimConfig::default()
        };
        let record =
            synthesize_random_baseline(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        assert!(record.baseline);
        // the regularization anchor is the Gaussian draw itself
        let mut rng = seed::rng(99);
        let draw = seed::normal_vec(&mut rng, 8);
        assert_eq!(record.origin, draw);
        // first-iteration regularization is exactly zero
        assert_eq!(record.trace[0].regularization, 0.0);
    }

    #[test]
    fn anchoring_keeps_the_standard_run_closer_to_the_origin() {
        let (model, schedule, codec, key, anchor) = test_setup(8);
        let config = OptimConfig {
            iterations: 40,
            ..OptimConfig::default()
        };
        let standard = synthesize(&model, &schedule, &codec, &anchor, &key, &config).unwrap();
        let mut baseline_dist = 0.0;
        let mut standard_dist = 0.0;
        for s in 0..4 {
            let cfg = OptimConfig { seed: s, ..config };
            let b =
                synthesize_random_baseline(&model, &schedule, &codec, &anchor, &key, &cfg).unwrap();
            baseline_dist +=
                linalg::norm(&linalg::sub(&b.noise, &standard.origin)) / 4.0;
        }
        standard_dist += linalg::norm(&linalg::sub(&standard.noise, &standard.origin));
        assert!(
            standard_dist < baseline_dist,
            "standard {standard_dist} vs baseline {baseline_dist}"
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (model, schedule, codec, key, _) = test_setup(8);
        let mut rng = seed::rng(1);
        let other_key = make_key(KeySpec {
            seed: 2,
            bits: 4,
            dim: 4,
            strength: 0.5,
            temperature: 8.0,
        })
        .unwrap();
        let carrier = seed::normal_vec(&mut rng, 4);
        let msg = Message::random(&mut rng, 4);
        let small_anchor = other_key.embed(&carrier, &msg).unwrap();
        let config = OptimConfig::default();
        assert!(matches!(
            synthesize(&model, &schedule, &codec, &small_anchor, &key, &config),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = OptimConfig {
            iterations: 0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            lambda_rec: -0.1,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            checkpoint_segment: 0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
