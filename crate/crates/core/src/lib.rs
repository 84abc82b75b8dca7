//! Fingerprinting laboratory for deterministic diffusion samplers.
//!
//! The pipeline: embed a payload into a carrier to form a watermarked
//! anchor, invert the target model's deterministic sampler to find the
//! trajectory origin that generates the anchor, then optimize the input
//! noise under dual-end anchoring (output reconstruction plus origin
//! regularization) until the model reproduces the payload. Ownership of a
//! suspect model is verified with nothing but atomic sampling calls: decode
//! the payload from each generated output, score bit accuracy, and test the
//! mean against random guessing with a one-sample t-test.

pub mod attacks;
pub mod autodiff;
pub mod diffusion;
pub mod error;
pub mod files;
pub mod fingerprint;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod seed;
pub mod verify;
pub mod watermark;

pub use diffusion::{
    CodecSpec, DenoiserModel, GmmParams, LatentCodec, ModelFile, ModelKind, NoiseSchedule,
    ScheduleSpec, TrainSettings,
};
pub use error::{Error, Result};
pub use fingerprint::{FingerprintRecord, LossParts, OptimConfig};
pub use harness::ExperimentConfig;
pub use verify::{Verdict, VerificationReport};
pub use watermark::{Anchor, KeySpec, Message, WatermarkKey};
