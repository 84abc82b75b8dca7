//! Discrete cumulative signal-retention schedule for the deterministic
//! sampler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COSINE_OFFSET: f64 = 0.008;
const FINAL_RETENTION_FLOOR: f64 = 1e-5;

/// Cumulative signal retention over `steps + 1` grid points, index 0 (clean
/// data, retention exactly 1) through `steps` (near-pure noise).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    steps: usize,
    alpha_bar: Vec<f64>,
}

/// What a model or config file stores; the table itself is rebuilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub steps: usize,
}

impl NoiseSchedule {
    /// Squared-cosine schedule rescaled so the first entry is exactly 1 and
    /// floored so the last entry stays strictly positive.
    pub fn cosine(steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "schedule needs at least 2 steps, got {steps}"
            )));
        }
        let f = |t: f64| {
            let angle = ((t / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET))
                * std::f64::consts::FRAC_PI_2;
            angle.cos().powi(2)
        };
        let norm = f(0.0);
        let mut alpha_bar: Vec<f64> = (0..=steps).map(|t| f(t as f64) / norm).collect();
        alpha_bar[0] = 1.0;
        let last = alpha_bar.len() - 1;
        alpha_bar[last] = alpha_bar[last].max(FINAL_RETENTION_FLOOR);

        for t in 0..steps {
            if alpha_bar[t + 1] >= alpha_bar[t] {
                return Err(Error::NumericFailure {
                    context: format!("schedule not strictly decreasing at step {}", t + 1),
                });
            }
        }
        if alpha_bar[last] > 1e-3 {
            return Err(Error::NumericFailure {
                context: format!(
                    "terminal retention {} above 1e-3; step count too small",
                    alpha_bar[last]
                ),
            });
        }
        Ok(NoiseSchedule { steps, alpha_bar })
    }

    pub fn from_spec(spec: ScheduleSpec) -> Result<Self> {
        Self::cosine(spec.steps)
    }

    pub fn spec(&self) -> ScheduleSpec {
        ScheduleSpec { steps: self.steps }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Retention at grid index `t` (0 ..= steps). Out-of-range is a caller
    /// bug; public operations validate `t` before indexing.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Full sampling grid steps, steps-1, ..., 0.
    pub fn descending_grid(&self) -> Vec<usize> {
        (0..=self.steps).rev().collect()
    }

    /// Full inversion grid 0, 1, ..., steps.
    pub fn ascending_grid(&self) -> Vec<usize> {
        (0..=self.steps).collect()
    }

    /// A coarser strictly-decreasing grid with `n` transitions over the same
    /// schedule, from `steps` down to 0.
    pub fn coarse_descending_grid(&self, n: usize) -> Result<Vec<usize>> {
        if n == 0 || n > self.steps {
            return Err(Error::InvalidArgument(format!(
                "coarse grid must have between 1 and {} transitions, got {n}",
                self.steps
            )));
        }
        let grid: Vec<usize> = (0..=n)
            .map(|i| (((n - i) * self.steps) as f64 / n as f64 + 0.5).floor() as usize)
            .collect();
        for w in grid.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "coarse grid with {n} transitions is not strictly decreasing"
                )));
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_entry_is_exactly_one() {
        let s = NoiseSchedule::cosine(25).unwrap();
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn strictly_decreasing_for_25_steps() {
        let s = NoiseSchedule::cosine(25).unwrap();
        for t in 0..25 {
            assert!(s.alpha_bar(t + 1) < s.alpha_bar(t));
        }
        assert!(s.alpha_bar(25) > 0.0 && s.alpha_bar(25) <= 1e-3);
    }

    #[test]
    fn midpoint_matches_closed_form() {
        // Independent evaluation of cos^2(((t/T + s)/(1 + s)) * pi/2) / norm
        // at T = 25, t = 12, s = 0.008, frozen from a scratch evaluation.
        let expected = 0.5250045332596436;
        let s = NoiseSchedule::cosine(25).unwrap();
        let direct = {
            let g = |t: f64| {
                (((t / 25.0 + 0.008) / 1.008) * std::f64::consts::PI / 2.0)
                    .cos()
                    .powi(2)
            };
            g(12.0) / g(0.0)
        };
        assert!((s.alpha_bar(12) - direct).abs() < 1e-15);
        assert!((s.alpha_bar(12) - expected).abs() < 1e-12);
    }

    #[test]
    fn too_few_steps_is_an_error() {
        assert!(NoiseSchedule::cosine(1).is_err());
        assert!(NoiseSchedule::cosine(0).is_err());
    }

    #[test]
    fn terminal_entry_is_floored() {
        let s = NoiseSchedule::cosine(25).unwrap();
        assert_eq!(s.alpha_bar(25), 1e-5);
    }

    #[test]
    fn coarse_grid_spans_full_range() {
        let s = NoiseSchedule::cosine(25).unwrap();
        let g = s.coarse_descending_grid(10).unwrap();
        assert_eq!(g.first(), Some(&25));
        assert_eq!(g.last(), Some(&0));
        assert_eq!(g.len(), 11);
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(s.coarse_descending_grid(0).is_err());
        assert!(s.coarse_descending_grid(26).is_err());
    }
}
