//! Spread-spectrum watermark codec over a seeded orthonormal pattern bank.
//!
//! `embed` first removes the carrier's projection onto the pattern span
//! (pre-whitening), then adds +/- strength along each pattern according to
//! the message bit, so a clean decode recovers the message exactly: every
//! logit is exactly +/- (temperature * strength). `decode_soft` is linear in
//! the input and therefore directly differentiable on the tape.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Everything needed to rebuild a key; travels with anchors and records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeySpec {
    pub seed: u64,
    pub bits: usize,
    pub dim: usize,
    pub strength: f64,
    pub temperature: f64,
}

/// Secret pattern bank plus embedding/decoding parameters.
#[derive(Debug, Clone)]
pub struct WatermarkKey {
    spec: KeySpec,
    patterns: Vec<Vec<f64>>,
}

/// Binary payload. Serialized as a bit string ("0110...").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    bits: Vec<u8>,
}

impl Message {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(
                "message bits must be 0 or 1".into(),
            ));
        }
        Ok(Message { bits })
    }

    pub fn random(rng: &mut impl rand::RngCore, len: usize) -> Self {
        Message {
            bits: (0..len).map(|_| (rng.next_u64() & 1) as u8).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn complement(&self) -> Self {
        Message {
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }
}

impl std::fmt::Display for Message {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Message {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!(
                    "invalid message character '{other}'"
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Message { bits })
    }
}

impl Serialize for Message {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Message {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Carrier, its watermarked form, the payload, and the key reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Anchor {
    pub carrier: Vec<f64>,
    pub watermarked: Vec<f64>,
    pub message: Message,
    pub key: KeySpec,
}

pub fn make_key(spec: KeySpec) -> Result<WatermarkKey> {
    if spec.bits == 0 || spec.bits > spec.dim {
        return Err(Error::InvalidArgument(format!(
            "payload of {} bits does not fit dimension {}",
            spec.bits, spec.dim
        )));
    }
    if spec.strength <= 0.0 || spec.temperature <= 0.0 {
        return Err(Error::InvalidArgument(
            "strength and temperature must be positive".into(),
        ));
    }
    let mut rng = seed::rng(spec.seed);
    let patterns = linalg::seeded_orthonormal(&mut rng, spec.bits, spec.dim)?;
    Ok(WatermarkKey { spec, patterns })
}

impl WatermarkKey {
    pub fn spec(&self) -> KeySpec {
        self.spec
    }

    pub fn bits(&self) -> usize {
        self.spec.bits
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    fn check_dim(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.spec.dim {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.spec.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Embed `message` into `carrier`: project out the pattern span, then add
    /// +/- strength per bit.
    pub fn embed(&self, carrier: &[f64], message: &Message) -> Result<Anchor> {
        self.check_dim(carrier.len(), "embed carrier")?;
        if message.len() != self.spec.bits {
            return Err(Error::DimensionMismatch {
                context: "embed message",
                expected: self.spec.bits,
                got: message.len(),
            });
        }
        let mut watermarked = carrier.to_vec();
        for (pattern, &bit) in self.patterns.iter().zip(message.bits()) {
            let host = linalg::dot(carrier, pattern);
            let target = self.spec.strength * (2.0 * bit as f64 - 1.0);
            for (w, p) in watermarked.iter_mut().zip(pattern) {
                *w += (target - host) * p;
            }
        }
        Ok(Anchor {
            carrier: carrier.to_vec(),
            watermarked,
            message: message.clone(),
            key: self.spec,
        })
    }

    /// Per-bit logits: temperature * <input, pattern_j>.
    pub fn decode_soft(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(input.len(), "decode input")?;
        Ok(self
            .patterns
            .iter()
            .map(|p| self.spec.temperature * linalg::dot(input, p))
            .collect())
    }

    /// Hard bits: positive logit decodes to 1; a zero logit ties to 0.
    pub fn decode_hard(&self, input: &[f64]) -> Result<Message> {
        let logits = self.decode_soft(input)?;
        Ok(Message {
            bits: logits.iter().map(|&l| u8::from(l > 0.0)).collect(),
        })
    }

    /// Taped logits, one scalar per bit; linear in the input.
    pub fn decode_soft_traced(&self, tape: &mut Tape, input: Var) -> Result<Vec<Var>> {
        self.check_dim(tape.value(input).len(), "decode input")?;
        self.patterns
            .iter()
            .map(|p| {
                let pattern = tape.constant(p, &[p.len()])?;
                let proj = tape.inner(input, pattern)?;
                tape.scale_const(proj, self.spec.temperature)
            })
            .collect()
    }
}

/// Softplus-stabilized binary cross-entropy against hard targets, averaged
/// over bits: mean_j [ softplus(logit_j) - bit_j * logit_j ].
pub fn bce_loss(logits: &[f64], message: &Message) -> Result<f64> {
    if logits.len() != message.len() {
        return Err(Error::DimensionMismatch {
            context: "bce logits",
            expected: message.len(),
            got: logits.len(),
        });
    }
    let mut total = 0.0;
    for (&l, &b) in logits.iter().zip(message.bits()) {
        total += linalg::log_sum_exp(&[0.0, l]) - b as f64 * l;
    }
    Ok(total / logits.len() as f64)
}

/// Taped version of `bce_loss`; mirrors the plain arithmetic.
pub fn bce_loss_traced(tape: &mut Tape, logits: &[Var], message: &Message) -> Result<Var> {
    if logits.len() != message.len() {
        return Err(Error::DimensionMismatch {
            context: "bce logits",
            expected: message.len(),
            got: logits.len(),
        });
    }
    let zero = tape.scalar_constant(0.0)?;
    let mut total = tape.scalar_constant(0.0)?;
    for (&l, &b) in logits.iter().zip(message.bits()) {
        let pair = tape.concat(&[zero, l])?;
        let softplus = tape.log_sum_exp(pair)?;
        let weighted = tape.scale_const(l, b as f64)?;
        let term = tape.sub(softplus, weighted)?;
        total = tape.add(total, term)?;
    }
    tape.scale_const(total, 1.0 / logits.len() as f64)
}
