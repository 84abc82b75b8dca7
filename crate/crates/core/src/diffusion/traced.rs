//! Tape-recorded counterparts of the forward pipeline.
//!
//! Each function composes the closed primitive set so the whole sampler ends
//! up differentiable with respect to the input noise (or, for training, the
//! network parameters). The arithmetic mirrors the plain path operation for
//! operation, so forward values agree bitwise with `sampler` and `model`.

use std::rc::Rc;
use std::sync::Arc;

use crate::autodiff::{ChainFn, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg;

use super::model::{gmm_step_terms, DenoiserModel, GmmParams, ModelKind, TIME_EMBED_DIM};
use super::sampler::{check_descending_grid, step_coefficients};
use super::schedule::NoiseSchedule;

/// Taped noise prediction at grid index `t`, treating model parameters as
/// constants. Gradient flows through `x` only.
pub fn predict_noise_traced(
    tape: &mut Tape,
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x: Var,
    t: usize,
) -> Result<Var> {
    if t < 1 || t > schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "step index {t} outside 1..={}",
            schedule.steps()
        )));
    }
    if tape.shape(x) != [model.dim()] {
        return Err(Error::DimensionMismatch {
            context: "predict_noise input",
            expected: model.dim(),
            got: tape.value(x).len(),
        });
    }
    let a = schedule.alpha_bar(t);
    match model.kind() {
        ModelKind::AnalyticGmm(params) => gmm_noise_traced(tape, params, x, a),
        ModelKind::Mlp { layers, .. } => {
            let layer_vars = layers
                .iter()
                .map(|layer| {
                    let flat: Vec<f64> = layer.weight.iter().flatten().copied().collect();
                    let w = tape.constant(&flat, &[layer.out_dim(), layer.in_dim()])?;
                    let b = tape.constant(&layer.bias, &[layer.bias.len()])?;
                    Ok((w, b))
                })
                .collect::<Result<Vec<_>>>()?;
            let temb = super::model::time_embedding(t, schedule.steps());
            mlp_forward_traced(tape, &layer_vars, x, temb)
        }
        ModelKind::Null => {
            let zeros = vec![0.0; model.dim()];
            tape.constant(&zeros, &[model.dim()])
        }
    }
}

fn gmm_noise_traced(tape: &mut Tape, params: &GmmParams, x: Var, alpha_bar: f64) -> Result<Var> {
    let terms = gmm_step_terms(params, alpha_bar);
    let k = params.means.len();
    let dim = tape.value(x).len();

    // log responsibility scores
    let mut scores = Vec::with_capacity(k);
    for i in 0..k {
        let scaled_mean: Vec<f64> = params.means[i].iter().map(|m| m * terms.sqrt_a).collect();
        let center = tape.constant(&scaled_mean, &[dim])?;
        let shifted = tape.sub(x, center)?;
        let q = tape.sq_norm(shifted)?;
        let scaled = tape.scale_const(q, terms.score_scale)?;
        let logw = tape.scalar_constant(terms.log_weights[i])?;
        scores.push(tape.add(scaled, logw)?);
    }
    let stacked = tape.concat(&scores)?;
    let lse = tape.log_sum_exp(stacked)?;

    // posterior mean of the data point
    let mut posterior_mean = tape.constant(&vec![0.0; dim], &[dim])?;
    for i in 0..k {
        let diff = tape.sub(scores[i], lse)?;
        let r = tape.exp(diff)?;
        let mean = tape.constant(&params.means[i], &[dim])?;
        let weighted = tape.scale(r, mean)?;
        posterior_mean = tape.add(posterior_mean, weighted)?;
    }

    let pulled = tape.scale_const(posterior_mean, terms.sqrt_a)?;
    let centered = tape.sub(x, pulled)?;
    tape.scale_const(centered, terms.noise_coeff)
}

/// Network forward with explicit parameter handles, shared by inference
/// (constants) and training (leaves).
pub fn mlp_forward_traced(
    tape: &mut Tape,
    layers: &[(Var, Var)],
    x: Var,
    temb: [f64; TIME_EMBED_DIM],
) -> Result<Var> {
    let temb_const = tape.constant(&temb, &[TIME_EMBED_DIM])?;
    let mut y = tape.concat(&[x, temb_const])?;
    let last = layers.len() - 1;
    for (i, (w, b)) in layers.iter().enumerate() {
        let pre = tape.matvec(*w, y)?;
        let biased = tape.add(pre, *b)?;
        y = if i != last { tape.tanh(biased)? } else { biased };
    }
    Ok(y)
}

/// Taped deterministic transition from `t` down to `t_prev`.
pub fn ddim_step_traced(
    tape: &mut Tape,
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x: Var,
    t: usize,
    t_prev: usize,
) -> Result<Var> {
    if t <= t_prev {
        return Err(Error::InvalidArgument(format!(
            "step must move to an earlier index: {t} -> {t_prev}"
        )));
    }
    let eps = predict_noise_traced(tape, model, schedule, x, t)?;
    let c = step_coefficients(schedule, t, t_prev);
    let eps_scaled = tape.scale_const(eps, c.eps_in)?;
    let centered = tape.sub(x, eps_scaled)?;
    let clean = tape.scale_const(centered, c.inv_signal_in)?;
    let signal = tape.scale_const(clean, c.signal_out)?;
    let noise = tape.scale_const(eps, c.eps_out)?;
    tape.add(signal, noise)
}

/// Taped sampler. With `checkpoint_segment = Some(s)` the chain is recorded
/// as one opaque node per `s` transitions and re-executed during backward;
/// `None` records every intermediate operation.
pub fn sample_traced(
    tape: &mut Tape,
    model: &Arc<DenoiserModel>,
    schedule: &Arc<NoiseSchedule>,
    z: Var,
    grid: &[usize],
    checkpoint_segment: Option<usize>,
) -> Result<Var> {
    check_descending_grid(schedule, grid)?;
    match checkpoint_segment {
        None => {
            let mut x = z;
            for w in grid.windows(2) {
                x = ddim_step_traced(tape, model, schedule, x, w[0], w[1])?;
            }
            Ok(x)
        }
        Some(segment_len) => {
            let steps: Vec<ChainFn> = grid
                .windows(2)
                .map(|w| {
                    let (t, t_prev) = (w[0], w[1]);
                    let model = Arc::clone(model);
                    let schedule = Arc::clone(schedule);
                    let f: ChainFn = Rc::new(move |tape: &mut Tape, v: Var| {
                        ddim_step_traced(tape, &model, &schedule, v, t, t_prev)
                    });
                    f
                })
                .collect();
            tape.checkpointed_chain(z, &steps, segment_len)
        }
    }
}

/// Convenience: taped forward values must agree with the plain path exactly.
#[allow(dead_code)]
pub(crate) fn assert_matches_plain(traced: &[f64], plain: &[f64]) {
    debug_assert_eq!(traced.len(), plain.len());
    for (a, b) in traced.iter().zip(plain) {
        debug_assert_eq!(a, b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::model::GmmParams;
    use crate::diffusion::sampler;
    use crate::seed;

    fn mixture(dim: usize) -> DenoiserModel {
        let mut rng = seed::rng(51);
        let means: Vec<Vec<f64>> = (0..3)
            .map(|_| seed::normal_vec(&mut rng, dim).iter().map(|v| 2.0 * v).collect())
            .collect();
        DenoiserModel::analytic_gmm(
            dim,
            GmmParams {
                weights: vec![0.25, 0.25, 0.5],
                means,
                variance: 0.25,
            },
        )
        .unwrap()
    }

    #[test]
    fn traced_gmm_forward_matches_plain_exactly() {
        let model = mixture(8);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let mut rng = seed::rng(8);
        let x = seed::normal_vec(&mut rng, 8);
        for t in [1, 9, 20, 25] {
            let plain = model.predict_noise(&sched, &x, t).unwrap();
            let mut tape = Tape::new();
            let xv = tape.leaf(&x, &[8]).unwrap();
            let ev = predict_noise_traced(&mut tape, &model, &sched, xv, t).unwrap();
            assert_eq!(tape.value(ev), plain.as_slice(), "t={t}");
        }
    }

    #[test]
    fn traced_sampler_matches_plain_exactly() {
        let model = Arc::new(mixture(8));
        let sched = Arc::new(NoiseSchedule::cosine(25).unwrap());
        let mut rng = seed::rng(12);
        let z = seed::normal_vec(&mut rng, 8);
        let grid = sched.descending_grid();
        let plain = sampler::sample(&model, &sched, &z, &grid).unwrap();

        for segment in [None, Some(1), Some(5), Some(25)] {
            let mut tape = Tape::new();
            let zv = tape.leaf(&z, &[8]).unwrap();
            let out = sample_traced(&mut tape, &model, &sched, zv, &grid, segment).unwrap();
            assert_eq!(tape.value(out), plain.as_slice(), "segment {segment:?}");
        }
    }

    #[test]
    fn traced_mlp_matches_plain_exactly() {
        use crate::diffusion::train::{train_mlp_denoiser, TrainSettings};
        let dataset = GmmParams {
            weights: vec![1.0],
            means: vec![vec![0.5; 6]],
            variance: 0.25,
        };
        let sched = NoiseSchedule::cosine(25).unwrap();
        let model = train_mlp_denoiser(
            6,
            &dataset,
            &sched,
            &TrainSettings {
                hidden: 8,
                steps: 3,
                batch: 4,
                learning_rate: 1e-3,
                seed: 4,
            },
        )
        .unwrap();
        let mut rng = seed::rng(3);
        let x = seed::normal_vec(&mut rng, 6);
        let plain = model.predict_noise(&sched, &x, 7).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(&x, &[6]).unwrap();
        let ev = predict_noise_traced(&mut tape, &model, &sched, xv, 7).unwrap();
        assert_eq!(tape.value(ev), plain.as_slice());
    }

    #[test]
    fn sampler_gradient_matches_finite_differences() {
        let model = Arc::new(mixture(6));
        let sched = Arc::new(NoiseSchedule::cosine(25).unwrap());
        let grid = sched.descending_grid();
        let mut rng = seed::rng(77);
        let z0 = seed::normal_vec(&mut rng, 6);
        let target = seed::normal_vec(&mut rng, 6);

        let eval = |z: &[f64]| {
            let mut tape = Tape::new();
            let zv = tape.leaf(z, &[6]).unwrap();
            let out = sample_traced(&mut tape, &model, &sched, zv, &grid, Some(1)).unwrap();
            let tv = tape.constant(&target, &[6]).unwrap();
            let d = tape.sub(out, tv).unwrap();
            let loss = tape.sq_norm(d).unwrap();
            tape.scalar_value(loss)
        };

        let h = 1e-5;
        let mut numeric = Vec::new();
        for i in 0..6 {
            let mut plus = z0.clone();
            let mut minus = z0.clone();
            plus[i] += h;
            minus[i] -= h;
            numeric.push((eval(&plus) - eval(&minus)) / (2.0 * h));
        }

        let mut tape = Tape::new();
        let zv = tape.leaf(&z0, &[6]).unwrap();
        let out = sample_traced(&mut tape, &model, &sched, zv, &grid, Some(1)).unwrap();
        let tv = tape.constant(&target, &[6]).unwrap();
        let d = tape.sub(out, tv).unwrap();
        let loss = tape.sq_norm(d).unwrap();
        let grads = tape.backward(loss, &[zv]).unwrap();
        for i in 0..6 {
            let denom = numeric[i].abs().max(1.0);
            assert!(
                ((grads[0][i] - numeric[i]) / denom).abs() <= 1e-5,
                "coord {i}: {} vs {}",
                grads[0][i],
                numeric[i]
            );
        }
    }
}
