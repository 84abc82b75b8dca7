//! Denoising-objective training for the MLP model family. Fully seeded: the
//! same settings always produce the same parameters, hence the same identity.

use rand::RngCore;

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamParams};
use crate::seed;

use super::model::{DenoiserModel, GmmParams, LinearLayer, TrainProvenance, TIME_EMBED_DIM};
use super::schedule::NoiseSchedule;
use super::traced::mlp_forward_traced;

#[derive(Debug, Clone, Copy)]
pub struct TrainSettings {
    pub hidden: usize,
    pub steps: u32,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hidden: 32,
            steps: 1200,
            batch: 16,
            learning_rate: 3e-3,
            seed: 0,
        }
    }
}

/// Draw one clean point from the mixture dataset.
pub fn sample_dataset(dataset: &GmmParams, rng: &mut impl RngCore) -> Vec<f64> {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut acc = 0.0;
    let mut comp = dataset.weights.len() - 1;
    for (i, w) in dataset.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            comp = i;
            break;
        }
    }
    let sd = dataset.variance.sqrt();
    dataset.means[comp]
        .iter()
        .map(|m| m + sd * seed::standard_normal(rng))
        .collect()
}

fn init_layers(dim: usize, hidden: usize, rng: &mut impl RngCore) -> Vec<LinearLayer> {
    let dims = [dim + TIME_EMBED_DIM, hidden, hidden, dim];
    dims.windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (1.0 / fan_in as f64).sqrt();
            let weight = (0..fan_out)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| scale * seed::standard_normal(rng))
                        .collect()
                })
                .collect();
            LinearLayer {
                weight,
                bias: vec![0.0; fan_out],
            }
        })
        .collect()
}

/// Train an MLP noise predictor on forward-process pairs from a mixture
/// dataset. `steps = 0` returns the seeded initialization unchanged.
pub fn train_mlp_denoiser(
    dim: usize,
    dataset: &GmmParams,
    schedule: &NoiseSchedule,
    settings: &TrainSettings,
) -> Result<DenoiserModel> {
    if settings.learning_rate <= 0.0 || !settings.learning_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            settings.learning_rate
        )));
    }
    if settings.batch == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if settings.hidden == 0 {
        return Err(Error::InvalidArgument("hidden width must be at least 1".into()));
    }
    // Validate the dataset through the same rules as an analytic model.
    let _ = DenoiserModel::analytic_gmm(dim, dataset.clone())?;

    let mut rng = seed::rng(settings.seed);
    let mut layers = init_layers(dim, settings.hidden, &mut rng);

    let provenance = TrainProvenance {
        dataset: dataset.clone(),
        seed: settings.seed,
        steps: settings.steps,
        batch: settings.batch,
        learning_rate: settings.learning_rate,
    };

    if settings.steps > 0 {
        let sizes: Vec<usize> = layers
            .iter()
            .flat_map(|l| [l.out_dim() * l.in_dim(), l.out_dim()])
            .collect();
        let mut adam = Adam::new(AdamParams::default(), &sizes);

        for _ in 0..settings.steps {
            run_training_step(
                &mut layers,
                dataset,
                schedule,
                settings.batch,
                settings.learning_rate,
                &mut adam,
                &mut rng,
            )?;
        }
    }

    DenoiserModel::mlp(dim, layers, Some(provenance))
}

/// Continue training existing layers; used by the fine-tuning proxy.
pub(crate) fn continue_training(
    dim: usize,
    mut layers: Vec<LinearLayer>,
    dataset: &GmmParams,
    schedule: &NoiseSchedule,
    steps: u32,
    learning_rate: f64,
    batch: usize,
    seed_value: u64,
) -> Result<Vec<LinearLayer>> {
    if learning_rate <= 0.0 || !learning_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let _ = DenoiserModel::analytic_gmm(dim, dataset.clone())?;
    let mut rng = seed::rng(seed_value);
    let sizes: Vec<usize> = layers
        .iter()
        .flat_map(|l| [l.out_dim() * l.in_dim(), l.out_dim()])
        .collect();
    let mut adam = Adam::new(AdamParams::default(), &sizes);
    for _ in 0..steps {
        run_training_step(
            &mut layers,
            dataset,
            schedule,
            batch,
            learning_rate,
            &mut adam,
            &mut rng,
        )?;
    }
    Ok(layers)
}

fn run_training_step(
    layers: &mut [LinearLayer],
    dataset: &GmmParams,
    schedule: &NoiseSchedule,
    batch: usize,
    learning_rate: f64,
    adam: &mut Adam,
    rng: &mut impl RngCore,
) -> Result<()> {
    let dim = dataset.means[0].len();
    let mut tape = Tape::new();

    // parameters as differentiable leaves
    let mut layer_vars = Vec::with_capacity(layers.len());
    for layer in layers.iter() {
        let flat: Vec<f64> = layer.weight.iter().flatten().copied().collect();
        let w = tape.leaf(&flat, &[layer.out_dim(), layer.in_dim()])?;
        let b = tape.leaf(&layer.bias, &[layer.bias.len()])?;
        layer_vars.push((w, b));
    }

    // batch loss: mean squared error against the injected noise
    let mut total = tape.scalar_constant(0.0)?;
    for _ in 0..batch {
        let x0 = sample_dataset(dataset, rng);
        let t = 1 + seed::uniform_index(rng, schedule.steps());
        let a = schedule.alpha_bar(t);
        let eps = seed::normal_vec(rng, dim);
        let xt: Vec<f64> = x0
            .iter()
            .zip(&eps)
            .map(|(x, e)| a.sqrt() * x + (1.0 - a).sqrt() * e)
            .collect();
        let xv = tape.constant(&xt, &[dim])?;
        let pred = mlp_forward_traced(
            &mut tape,
            &layer_vars,
            xv,
            super::model::time_embedding(t, schedule.steps()),
        )?;
        let target = tape.constant(&eps, &[dim])?;
        let diff = tape.sub(pred, target)?;
        let loss_i = tape.sq_norm(diff)?;
        total = tape.add(total, loss_i)?;
    }
    let loss = tape.scale_const(total, 1.0 / batch as f64)?;

    let wrt: Vec<_> = layer_vars.iter().flat_map(|(w, b)| [*w, *b]).collect();
    let grads = tape.backward(loss, &wrt)?;

    // flat views over the layer parameters, paired with their gradients
    let mut flat_weights: Vec<Vec<f64>> = layers
        .iter()
        .map(|l| l.weight.iter().flatten().copied().collect())
        .collect();
    {
        let mut buffers: Vec<&mut [f64]> = Vec::with_capacity(layers.len() * 2);
        // interleave weight/bias buffers in the same order as `wrt`
        let mut biases: Vec<&mut Vec<f64>> = layers.iter_mut().map(|l| &mut l.bias).collect();
        for (w, b) in flat_weights.iter_mut().zip(biases.iter_mut()) {
            buffers.push(w.as_mut_slice());
            buffers.push(b.as_mut_slice());
        }
        let grad_slices: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
        adam.step(&mut buffers, &grad_slices, learning_rate)?;
    }
    // write the updated flat weights back into row form
    for (layer, flat) in layers.iter_mut().zip(&flat_weights) {
        let cols = layer.in_dim();
        for (r, row) in layer.weight.iter_mut().enumerate() {
            row.copy_from_slice(&flat[r * cols..(r + 1) * cols]);
        }
    }
    Ok(())
}
