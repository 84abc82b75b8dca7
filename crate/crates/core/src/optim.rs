//! Adam update rule with bias correction, over one or more flat parameter
//! buffers. Used both for noise optimization and for MLP denoiser training.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub struct Adam {
    params: AdamParams,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step_count: u64,
}

impl Adam {
    /// `sizes`: length of each parameter buffer that will be updated.
    pub fn new(params: AdamParams, sizes: &[usize]) -> Self {
        Adam {
            params,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }

    /// Apply one update. `buffers` and `grads` must match the construction
    /// sizes pairwise.
    pub fn step(&mut self, buffers: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if buffers.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::InvalidArgument(format!(
                "adam: expected {} buffers, got {} with {} gradients",
                self.first.len(),
                buffers.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let bias1 = 1.0 - beta1.powf(t);
        let bias2 = 1.0 - beta2.powf(t);

        for ((buf, grad), (m, v)) in buffers
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            if buf.len() != m.len() || grad.len() != m.len() {
                return Err(Error::InvalidArgument(format!(
                    "adam: buffer/gradient length {} or {} does not match state {}",
                    buf.len(),
                    grad.len(),
                    m.len()
                )));
            }
            for i in 0..m.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                buf[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
