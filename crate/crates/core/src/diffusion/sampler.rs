//! Deterministic sampler and its inverse.
//!
//! The sampler integrates the probability-flow update from the terminal
//! noise index down to 0; the inverse runs the same algebra with the step
//! direction reversed, evaluating the noise prediction at the current
//! (earlier-time) state. That evaluation-point approximation is the sole
//! source of roundtrip error; `invert_refined` optionally tightens it with a
//! few fixed-point iterations for diagnostics.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

use super::model::DenoiserModel;
use super::schedule::NoiseSchedule;

/// Update coefficients for one transition: the clean point is read off the
/// input state, then recombined at the output index. Shared by the plain and
/// taped paths so both produce identical bits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepCoefficients {
    /// sqrt(1 - alpha_bar) at the input index
    pub eps_in: f64,
    /// 1 / sqrt(alpha_bar) at the input index
    pub inv_signal_in: f64,
    /// sqrt(alpha_bar) at the output index
    pub signal_out: f64,
    /// sqrt(1 - alpha_bar) at the output index
    pub eps_out: f64,
}

pub(crate) fn step_coefficients(
    schedule: &NoiseSchedule,
    from: usize,
    to: usize,
) -> StepCoefficients {
    let a_in = schedule.alpha_bar(from);
    let a_out = schedule.alpha_bar(to);
    StepCoefficients {
        eps_in: (1.0 - a_in).sqrt(),
        inv_signal_in: 1.0 / a_in.sqrt(),
        signal_out: a_out.sqrt(),
        eps_out: (1.0 - a_out).sqrt(),
    }
}

/// Apply the update given a precomputed noise estimate. Shared by the
/// deterministic step, the inversion, and the stochastic control.
fn apply_step(x: &[f64], eps: &[f64], c: StepCoefficients) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let clean = (x[i] - eps[i] * c.eps_in) * c.inv_signal_in;
        out.push(clean * c.signal_out + eps[i] * c.eps_out);
    }
    out
}

/// One deterministic transition from grid index `t` down to `t_prev`.
pub fn ddim_step(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: usize,
    t_prev: usize,
) -> Result<Vec<f64>> {
    if t <= t_prev {
        return Err(Error::InvalidArgument(format!(
            "step must move to an earlier index: {t} -> {t_prev}"
        )));
    }
    let eps = model.predict_noise(schedule, x, t)?;
    Ok(apply_step(x, &eps, step_coefficients(schedule, t, t_prev)))
}

pub(crate) fn check_descending_grid(schedule: &NoiseSchedule, grid: &[usize]) -> Result<()> {
    if grid.len() < 2 || grid[0] != schedule.steps() || *grid.last().unwrap() != 0 {
        return Err(Error::InvalidArgument(format!(
            "sampling grid must run from {} to 0, got {:?}...",
            schedule.steps(),
            &grid[..grid.len().min(4)]
        )));
    }
    for w in grid.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidArgument(
                "sampling grid must be strictly decreasing and end at 0".into(),
            ));
        }
    }
    Ok(())
}

fn check_ascending_grid(schedule: &NoiseSchedule, grid: &[usize]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0 || *grid.last().unwrap() != schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "inversion grid must run from 0 to {}, got {:?}...",
            schedule.steps(),
            &grid[..grid.len().min(4)]
        )));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "inversion grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Map terminal noise to a data-space point by chaining deterministic steps
/// along `grid`. Pure function of (model, input, grid).
pub fn sample(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    z: &[f64],
    grid: &[usize],
) -> Result<Vec<f64>> {
    check_descending_grid(schedule, grid)?;
    let mut x = z.to_vec();
    for w in grid.windows(2) {
        x = ddim_step(model, schedule, &x, w[0], w[1])?;
    }
    Ok(x)
}

/// Recover the terminal noise whose trajectory lands on `x0`. Uses the
/// current-state noise estimate, so the result carries a small
/// discretization residual; not differentiable, initialization only.
pub fn invert(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x0: &[f64],
    grid: &[usize],
) -> Result<Vec<f64>> {
    invert_refined(model, schedule, x0, grid, 0)
}

/// Inversion with `refine_iters` fixed-point corrections per transition
/// (re-evaluating the noise at the provisional later-time state). Intended
/// for roundtrip diagnostics; `refine_iters` is capped at 5.
pub fn invert_refined(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x0: &[f64],
    grid: &[usize],
    refine_iters: usize,
) -> Result<Vec<f64>> {
    check_ascending_grid(schedule, grid)?;
    if !model.is_invertible() {
        return Err(Error::InvalidArgument(
            "model collapses trajectories (zero data variance); inversion undefined".into(),
        ));
    }
    if refine_iters > 5 {
        return Err(Error::InvalidArgument(format!(
            "refinement is capped at 5 iterations, got {refine_iters}"
        )));
    }
    let mut x = x0.to_vec();
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // exact algebraic reverse of the hi -> lo transition; the noise is
        // estimated at the current lo-time state with the hi step index
        let mut eps = model.predict_noise(schedule, &x, hi)?;
        let coeff = step_coefficients(schedule, lo, hi);
        let mut next = apply_step(&x, &eps, coeff);
        for _ in 0..refine_iters {
            eps = model.predict_noise(schedule, &next, hi)?;
            next = apply_step(&x, &eps, coeff);
        }
        x = next;
    }
    Ok(x)
}

/// Deterministic-step sampler with per-step seeded noise injection,
/// parameterized like an ancestral sampler. `eta = 0` reduces to `sample`.
/// Control case for the scheduler study: the fingerprint should degrade.
pub fn sample_stochastic(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    z: &[f64],
    grid: &[usize],
    eta: f64,
    noise_seed: u64,
) -> Result<Vec<f64>> {
    check_descending_grid(schedule, grid)?;
    if eta < 0.0 || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be nonnegative, got {eta}"
        )));
    }
    let mut rng = seed::rng(noise_seed);
    let mut x = z.to_vec();
    for w in grid.windows(2) {
        let (t, t_prev) = (w[0], w[1]);
        let eps = model.predict_noise(schedule, &x, t)?;
        let a_t = schedule.alpha_bar(t);
        let a_p = schedule.alpha_bar(t_prev);
        let sigma = eta
            * ((1.0 - a_p) / (1.0 - a_t)).sqrt()
            * (1.0 - a_t / a_p).sqrt();
        // deterministic part with the noise direction shrunk to keep the
        // marginal variance, then the injected noise
        let dir = (1.0 - a_p - sigma * sigma).max(0.0).sqrt();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let clean = (x[i] - eps[i] * (1.0 - a_t).sqrt()) / a_t.sqrt();
            out.push(clean * a_p.sqrt() + eps[i] * dir + sigma * seed::standard_normal(&mut rng));
        }
        x = out;
    }
    Ok(x)
}

/// Relative roundtrip error of sample(invert(x0)) against x0.
pub fn roundtrip_error(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    x0: &[f64],
    refine_iters: usize,
) -> Result<f64> {
    let up = schedule.ascending_grid();
    let down = schedule.descending_grid();
    let z = invert_refined(model, schedule, x0, &up, refine_iters)?;
    let back = sample(model, schedule, &z, &down)?;
    let denom = linalg::norm(x0).max(1e-300);
    Ok(linalg::norm(&linalg::sub(&back, x0)) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::model::GmmParams;
    use crate::seed;

    fn point_mass(dim: usize, c: f64) -> DenoiserModel {
        DenoiserModel::analytic_gmm(
            dim,
            GmmParams {
                weights: vec![1.0],
                means: vec![vec![c; dim]],
                variance: 0.0,
            },
        )
        .unwrap()
    }

    fn single_gaussian(dim: usize, mean: f64, variance: f64) -> DenoiserModel {
        DenoiserModel::analytic_gmm(
            dim,
            GmmParams {
                weights: vec![1.0],
                means: vec![vec![mean; dim]],
                variance,
            },
        )
        .unwrap()
    }

    #[test]
    fn point_mass_sampler_returns_the_data_point() {
        let model = point_mass(4, 1.25);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let mut rng = seed::rng(3);
        let z = seed::normal_vec(&mut rng, 4);
        let out = sample(&model, &sched, &z, &sched.descending_grid()).unwrap();
        for v in out {
            assert!((v - 1.25).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn null_model_sampler_is_a_rescale() {
        let model = DenoiserModel::null(3);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let z = vec![0.5, -1.0, 2.0];
        let out = sample(&model, &sched, &z, &sched.descending_grid()).unwrap();
        let c = 1.0 / sched.alpha_bar(25).sqrt();
        for (o, zi) in out.iter().zip(&z) {
            assert!((o - zi * c).abs() < 1e-9 * c, "{o} vs {}", zi * c);
        }
    }

    #[test]
    fn null_model_inversion_is_the_inverse_rescale() {
        let model = DenoiserModel::null(3);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let x0 = vec![0.5, -1.0, 2.0];
        let z = invert(&model, &sched, &x0, &sched.ascending_grid()).unwrap();
        let c = sched.alpha_bar(25).sqrt();
        for (zi, xi) in z.iter().zip(&x0) {
            assert!((zi - xi * c).abs() < 1e-12, "{zi} vs {}", xi * c);
        }
    }

    #[test]
    fn single_step_matches_manual_recomputation() {
        let model = single_gaussian(3, 0.4, 0.25);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let x = vec![0.9, -0.3, 0.1];
        let (t, t_prev) = (13, 12);
        let got = ddim_step(&model, &sched, &x, t, t_prev).unwrap();
        // manual: clean estimate, then recombination
        let eps = model.predict_noise(&sched, &x, t).unwrap();
        let a_t = sched.alpha_bar(t);
        let a_p = sched.alpha_bar(t_prev);
        for i in 0..3 {
            let clean = (x[i] - (1.0 - a_t).sqrt() * eps[i]) / a_t.sqrt();
            let want = a_p.sqrt() * clean + (1.0 - a_p).sqrt() * eps[i];
            assert!((got[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn step_rejects_non_decreasing_indices() {
        let model = single_gaussian(2, 0.0, 1.0);
        let sched = NoiseSchedule::cosine(25).unwrap();
        assert!(ddim_step(&model, &sched, &[0.0, 0.0], 5, 5).is_err());
        assert!(ddim_step(&model, &sched, &[0.0, 0.0], 5, 9).is_err());
    }

    #[test]
    fn bad_grids_are_rejected() {
        let model = single_gaussian(2, 0.0, 1.0);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let z = vec![0.1, 0.2];
        assert!(sample(&model, &sched, &z, &[25, 10, 10, 0]).is_err());
        assert!(sample(&model, &sched, &z, &[25, 10, 1]).is_err());
        assert!(sample(&model, &sched, &z, &[20, 10, 0]).is_err());
        assert!(invert(&model, &sched, &z, &[0, 10, 9, 25]).is_err());
        assert!(invert(&model, &sched, &z, &[1, 10, 25]).is_err());
    }

    #[test]
    fn point_mass_inversion_is_an_error() {
        let model = point_mass(2, 0.0);
        let sched = NoiseSchedule::cosine(25).unwrap();
        assert!(matches!(
            invert(&model, &sched, &[0.1, 0.2], &sched.ascending_grid()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sampling_and_inversion_are_deterministic() {
        let model = single_gaussian(5, 0.2, 0.25);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let mut rng = seed::rng(17);
        let z = seed::normal_vec(&mut rng, 5);
        let a = sample(&model, &sched, &z, &sched.descending_grid()).unwrap();
        let b = sample(&model, &sched, &z, &sched.descending_grid()).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let ia = invert(&model, &sched, &a, &sched.ascending_grid()).unwrap();
        let ib = invert(&model, &sched, &a, &sched.ascending_grid()).unwrap();
        assert_eq!(
            ia.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            ib.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn roundtrip_error_is_small_positive_and_shrinks_with_steps() {
        let model = single_gaussian(16, 0.3, 0.25);
        let mut rng = seed::rng(21);
        // a plausible data-space point: near the data manifold
        let x0: Vec<f64> = (0..16)
            .map(|_| 0.3 + 0.5 * seed::standard_normal(&mut rng))
            .collect();
        let t25 = NoiseSchedule::cosine(25).unwrap();
        let t50 = NoiseSchedule::cosine(50).unwrap();
        let e25 = roundtrip_error(&model, &t25, &x0, 0).unwrap();
        let e50 = roundtrip_error(&model, &t50, &x0, 0).unwrap();
        assert!(e25 > 0.0);
        assert!(e25 <= 1e-3, "T=25 roundtrip {e25}");
        assert!(e50 <= 3e-4, "T=50 roundtrip {e50}");
        assert!(e50 < e25, "{e50} !< {e25}");
    }

    #[test]
    fn mean_perturbation_separates_models() {
        let sched = NoiseSchedule::cosine(25).unwrap();
        let base = GmmParams {
            weights: vec![0.5, 0.5],
            means: vec![vec![1.0; 8], vec![-1.0; 8]],
            variance: 0.25,
        };
        let mut shifted = base.clone();
        shifted.means[0][0] += 0.05;
        let a = DenoiserModel::analytic_gmm(8, base).unwrap();
        let b = DenoiserModel::analytic_gmm(8, shifted).unwrap();
        let mut rng = seed::rng(9);
        let z = seed::normal_vec(&mut rng, 8);
        let ya = sample(&a, &sched, &z, &sched.descending_grid()).unwrap();
        let yb = sample(&b, &sched, &z, &sched.descending_grid()).unwrap();
        let diff = linalg::norm(&linalg::sub(&ya, &yb));
        assert!(diff > 1e-3, "outputs too close: {diff}");
    }

    #[test]
    fn distinct_models_always_separate_on_random_inputs() {
        let sched = NoiseSchedule::cosine(25).unwrap();
        let a = single_gaussian(6, 0.0, 0.25);
        let b = single_gaussian(6, 0.01, 0.25);
        assert_ne!(a.model_id(), b.model_id());
        for s in 0..100 {
            let mut rng = seed::rng(1000 + s);
            let z = seed::normal_vec(&mut rng, 6);
            let ya = sample(&a, &sched, &z, &sched.descending_grid()).unwrap();
            let yb = sample(&b, &sched, &z, &sched.descending_grid()).unwrap();
            assert!(linalg::norm(&linalg::sub(&ya, &yb)) > 0.0, "seed {s}");
        }
    }

    #[test]
    fn stochastic_sampler_with_zero_eta_matches_deterministic() {
        let model = single_gaussian(4, 0.1, 0.25);
        let sched = NoiseSchedule::cosine(25).unwrap();
        let z = vec![0.4, -0.9, 1.3, 0.0];
        let det = sample(&model, &sched, &z, &sched.descending_grid()).unwrap();
        let sto = sample_stochastic(&model, &sched, &z, &sched.descending_grid(), 0.0, 5).unwrap();
        for (a, b) in det.iter().zip(&sto) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
