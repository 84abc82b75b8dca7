//! Carrier-space <-> latent-space map. Defaults to the identity; an optional
//! fixed orthogonal map stands in for a learned encoder/decoder pair while
//! keeping an exact inverse.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "codec", rename_all = "snake_case")]
pub enum CodecSpec {
    #[default]
    Identity,
    Orthogonal {
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub enum LatentCodec {
    Identity,
    Orthogonal {
        /// Row-major D x D orthogonal matrix; encode applies it, decode
        /// applies its transpose.
        rows: Vec<Vec<f64>>,
        seed: u64,
    },
}

impl LatentCodec {
    pub fn build(spec: CodecSpec, dim: usize) -> Result<Self> {
        Ok(match spec {
            CodecSpec::Identity => LatentCodec::Identity,
            CodecSpec::Orthogonal { seed: s } => {
                let mut rng = seed::rng(s);
                let rows = linalg::seeded_orthonormal(&mut rng, dim, dim)?;
                LatentCodec::Orthogonal { rows, seed: s }
            }
        })
    }

    pub fn spec(&self) -> CodecSpec {
        match self {
            LatentCodec::Identity => CodecSpec::Identity,
            LatentCodec::Orthogonal { seed, .. } => CodecSpec::Orthogonal { seed: *seed },
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if let LatentCodec::Orthogonal { rows, .. } = self {
            if rows.len() != len {
                return Err(Error::DimensionMismatch {
                    context: "codec input",
                    expected: rows.len(),
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// Carrier space -> latent space.
    pub fn encode(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(image.len())?;
        Ok(match self {
            LatentCodec::Identity => image.to_vec(),
            LatentCodec::Orthogonal { rows, .. } => {
                rows.iter().map(|r| linalg::dot(r, image)).collect()
            }
        })
    }

    /// Latent space -> carrier space (exact inverse of `encode`).
    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(latent.len())?;
        Ok(match self {
            LatentCodec::Identity => latent.to_vec(),
            LatentCodec::Orthogonal { rows, .. } => {
                let d = rows.len();
                let mut out = vec![0.0; d];
                for (r, row) in rows.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        out[c] += v * latent[r];
                    }
                }
                out
            }
        })
    }

    /// Taped decode, differentiable through the latent.
    pub fn decode_traced(&self, tape: &mut Tape, latent: Var) -> Result<Var> {
        match self {
            LatentCodec::Identity => Ok(latent),
            LatentCodec::Orthogonal { rows, .. } => {
                let d = rows.len();
                // transpose, flattened row-major
                let mut flat = vec![0.0; d * d];
                for (r, row) in rows.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        flat[c * d + r] = *v;
                    }
                }
                let m = tape.constant(&flat, &[d, d])?;
                tape.matvec(m, latent)
            }
        }
    }
}
