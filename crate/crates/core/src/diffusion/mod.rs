//! Deterministic diffusion machinery: schedule, denoiser models, the
//! sampler, its inverse, and the carrier/latent codec.

pub mod codec;
pub mod model;
pub mod sampler;
pub mod schedule;
pub mod traced;
pub mod train;

pub use codec::{CodecSpec, LatentCodec};
pub use model::{
    AttackProvenance, DenoiserModel, GmmParams, LinearLayer, ModelFile, ModelKind,
    TrainProvenance, MODEL_SCHEMA,
};
pub use sampler::{
    ddim_step, invert, invert_refined, roundtrip_error, sample, sample_stochastic,
};
pub use schedule::{NoiseSchedule, ScheduleSpec};
pub use traced::{ddim_step_traced, mlp_forward_traced, predict_noise_traced, sample_traced};
pub use train::{train_mlp_denoiser, TrainSettings};
