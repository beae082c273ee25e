use std::f64::consts::E;

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA_MIN: f64 = 0.01;
pub const DEFAULT_SIGMA_MAX: f64 = 0.3;
pub const DEFAULT_N_SCALES: usize = 100;

/// Decreasing noise levels `sigma_0 > ... > sigma_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    sigma_min: f64,
    sigma_max: f64,
    sigmas: Vec<f64>,
}

pub fn schedule(n: usize, sigma_min: f64, sigma_max: f64) -> Result<NoiseSchedule> {
    if n == 0 {
        return Err(Error::arg("schedule needs at least one noise scale"));
    }
    if !(sigma_min > 0.0) || !(sigma_max > 0.0) || !sigma_min.is_finite() || !sigma_max.is_finite()
    {
        return Err(Error::arg(format!(
            "noise levels must be positive and finite (min={sigma_min}, max={sigma_max})"
        )));
    }
    let sigmas = (0..=n)
        .map(|i| {
            let frac = 1.0 - i as f64 / n as f64;
            sigma_min + sigma_max * (1.0 + frac * (E - 1.0)).ln()
        })
        .collect();
    Ok(NoiseSchedule {
        sigma_min,
        sigma_max,
        sigmas,
    })
}

impl NoiseSchedule {
    pub fn n_scales(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    /// Transition variance `sigma_{i-1}^2 (sigma_i^2 - sigma_{i-1}^2) / sigma_i^2`.
    /// Signed: it is negative for a decreasing schedule, and only its ratio
    /// with the variance increment enters the score factor.
    pub fn tau_sq(&self, i: usize) -> f64 {
        let prev = self.sigmas[i - 1].powi(2);
        let cur = self.sigmas[i].powi(2);
        prev * (cur - prev) / cur
    }

    /// `(sigma_i^2 - sigma_{i-1}^2) / tau_i^2`, which reduces to
    /// `sigma_i^2 / sigma_{i-1}^2`.
    pub fn score_factor(&self, i: usize) -> f64 {
        let prev = self.sigmas[i - 1].powi(2);
        let cur = self.sigmas[i].powi(2);
        score_factor(cur - prev, self.tau_sq(i))
    }

    pub fn check_level(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_scales() {
            return Err(Error::arg(format!(
                "level {i} outside 1..={}",
                self.n_scales()
            )));
        }
        Ok(())
    }
}

/// Scaling applied to the network score for a variance increment `delta`
/// and transition variance `tau_sq`.
pub fn score_factor(delta: f64, tau_sq: f64) -> f64 {
    delta / tau_sq
}
