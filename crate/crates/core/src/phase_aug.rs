//! Phase augmentation: annealed Langevin sampling of complex images whose
//! magnitude matches a given magnitude-only image.
//!
//! The target is `p(x) p(m | x)` with `p(m | x) ~ exp(-eps ||m - |x|||^2)`.
//! Prior scores are conjugate (Wirtinger) gradients and the injected noise is
//! circular with `E|z|^2 = 1`, so the update `x + (gamma / 2) s + sqrt(gamma) z`
//! targets the density whose conjugate gradient is `s`.
//!
//! At level `i` the state carries noise of size `sigma_i`, so by default the
//! likelihood variance is widened accordingly: `1 / eps_i = 1 / eps + sigma_i^2`.
//! Without this the sharp final likelihood forces a step size at which the
//! prior barely moves the chain. The last Langevin state is denoised with
//! one step of size `sigma_N^2` along the posterior score.

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{centered_coord, dft_centered, ComplexGrid, RealGrid};
use crate::priors::{schedule, NoiseSchedule, Prior, DEFAULT_N_SCALES, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN};
use crate::rng;

/// Magnitudes below this are treated as this value in `x / |x|`.
pub const MAGNITUDE_FLOOR: f64 = 1e-8;

pub const DEFAULT_EPSILON: f64 = 20000.0;
pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_STEPS_PER_LEVEL: usize = 5;
pub const DEFAULT_SAMPLES: usize = 5;

#[derive(Clone, Debug)]
pub struct AugmentConfig {
    /// Likelihood sharpness.
    pub epsilon: f64,
    /// Step size at the first level; level `i` uses `gamma (sigma_i / sigma_0)^2`.
    pub gamma: f64,
    pub steps_per_level: usize,
    pub samples: usize,
    pub seed: u64,
    pub schedule: NoiseSchedule,
    /// Widen the likelihood by the level's noise variance.
    pub anneal_likelihood: bool,
    /// Finish with a noise-free step of size `sigma_N^2` that removes the
    /// residual sampling noise.
    pub denoise: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            gamma: DEFAULT_GAMMA,
            steps_per_level: DEFAULT_STEPS_PER_LEVEL,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            schedule: schedule(DEFAULT_N_SCALES, DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX).expect("default schedule"),
            anneal_likelihood: true,
            denoise: true,
        }
    }
}

impl AugmentConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::arg(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::arg(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.steps_per_level == 0 {
            return Err(Error::arg("at least one Langevin step per level is required"));
        }
        Ok(())
    }

    /// Step size used at level `i`.
    pub fn step_size(&self, i: usize) -> f64 {
        let r = self.schedule.sigma(i) / self.schedule.sigma(0);
        self.gamma * r * r
    }

    /// Likelihood sharpness used at level `i`.
    pub fn level_epsilon(&self, i: usize) -> f64 {
        if !self.anneal_likelihood || self.epsilon == 0.0 {
            return self.epsilon;
        }
        let s = self.schedule.sigma(i);
        1.0 / (1.0 / self.epsilon + s * s)
    }
}

/// Real gradient of `-eps ||m - |x|||^2`: `2 eps (m - |x|) x / |x|` per pixel.
pub fn magnitude_loglik_grad(x: &ComplexGrid, m: &RealGrid, eps: f64) -> Result<ComplexGrid> {
    x.check_shape(m, "magnitude image")?;
    Ok(x.zip_map(m, |v, &mag| {
        let a = v.norm().max(MAGNITUDE_FLOOR);
        v * (2.0 * eps * (mag - a) / a)
    }))
}

fn check_magnitude(m: &RealGrid) -> Result<()> {
    if m.is_empty() {
        return Err(Error::arg("empty magnitude image"));
    }
    if let Some(v) = m.data().iter().find(|v| !(**v >= 0.0 && **v <= 1.0 + 1e-9)) {
        return Err(Error::arg(format!("magnitude image must lie in [0, 1], found {v}")));
    }
    Ok(())
}

/// Starting point of chain `chain`: white complex noise at scale `sigma_0`.
pub fn initial_state(rows: usize, cols: usize, config: &AugmentConfig, chain: usize) -> ComplexGrid {
    let mut rng = rng::stream(config.seed, 2 * chain as u64);
    rng::complex_normal_grid(rows, cols, &mut rng).scale(config.schedule.sigma(0))
}

// conjugate gradient of the log-posterior; that of the likelihood is half its real gradient
fn posterior_score(x: &ComplexGrid, m: &RealGrid, prior: &dyn Prior, level: usize, eps: f64) -> Result<ComplexGrid> {
    let mut s = prior.score(x, level)?;
    s.axpy(0.5.into(), &magnitude_loglik_grad(x, m, eps)?);
    Ok(s)
}

fn run_chain(m: &RealGrid, prior: &dyn Prior, config: &AugmentConfig, chain: usize) -> Result<ComplexGrid> {
    let (rows, cols) = m.shape();
    let mut x = initial_state(rows, cols, config, chain);
    let mut rng = rng::stream(config.seed, 2 * chain as u64 + 1);
    let n = config.schedule.n_scales();
    let fail = |level, step| Error::Sampling {
        level,
        step,
        reason: format!("non-finite state in chain {chain}"),
    };
    for level in 1..=n {
        let gamma = config.step_size(level);
        let eps = config.level_epsilon(level);
        for step in 0..config.steps_per_level {
            let s = posterior_score(&x, m, prior, level, eps)?;
            let noise = rng::complex_normal_grid(rows, cols, &mut rng);
            for ((v, g), z) in x.data_mut().iter_mut().zip(s.data()).zip(noise.data()) {
                *v += g * (0.5 * gamma) + z * gamma.sqrt();
            }
            if !x.is_finite() {
                return Err(fail(level, step));
            }
        }
    }
    if config.denoise {
        let sigma = config.schedule.sigma(n);
        let s = posterior_score(&x, m, prior, n, config.level_epsilon(n))?;
        x.axpy((sigma * sigma).into(), &s);
        if !x.is_finite() {
            return Err(fail(n, config.steps_per_level));
        }
    }
    debug!("chain {chain} done");
    Ok(x)
}

/// Draws `config.samples` complex images for the magnitude image `m` in
/// `[0, 1]`. Chains are independent and seeded by `(seed, chain)`.
pub fn augment(m: &RealGrid, prior: &dyn Prior, config: &AugmentConfig) -> Result<Vec<ComplexGrid>> {
    config.validate()?;
    check_magnitude(m)?;
    let levels = prior.n_levels();
    if levels != 0 && levels != config.schedule.n_scales() {
        return Err(Error::arg(format!(
            "prior has {levels} noise levels but the sampler schedule has {}",
            config.schedule.n_scales()
        )));
    }
    (0..config.samples)
        .into_par_iter()
        .map(|chain| run_chain(m, prior, config, chain))
        .collect()
}

/// Pixels whose magnitude exceeds `fraction` of the maximum.
pub fn support(m: &RealGrid, fraction: f64) -> Vec<bool> {
    let t = fraction * m.max();
    m.data().iter().map(|&v| v > t).collect()
}

/// Mean spectral energy of the unit phasor `x / |x|` (zero off `support`)
/// over frequencies outside the central half band.
pub fn phase_highband_energy(x: &ComplexGrid, support: &[bool]) -> Result<f64> {
    if support.len() != x.len() {
        return Err(Error::arg("support mask does not match the image"));
    }
    let (rows, cols) = x.shape();
    let mut phasor = x.map(|v| {
        let a = v.norm();
        if a > MAGNITUDE_FLOOR {
            v / a
        } else {
            Default::default()
        }
    });
    for (p, &keep) in phasor.data_mut().iter_mut().zip(support) {
        if !keep {
            *p = Default::default();
        }
    }
    let spec = dft_centered(&phasor);
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..rows {
        for c in 0..cols {
            let high = centered_coord(r, rows).abs() > 0.25 || centered_coord(c, cols).abs() > 0.25;
            if high {
                total += spec.get(r, c).norm_sqr();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::arg("grid too small to have frequencies above half band"));
    }
    Ok(total / count as f64)
}

/// Root-mean-square wrapped phase difference between two images over `support`.
pub fn phase_rms_difference(a: &ComplexGrid, b: &ComplexGrid, support: &[bool]) -> Result<f64> {
    a.check_shape(b, "second image")?;
    if support.len() != a.len() {
        return Err(Error::arg("support mask does not match the image"));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((u, v), &keep) in a.data().iter().zip(b.data()).zip(support) {
        if keep {
            sum += (u * v.conj()).arg().powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::arg("empty support"));
    }
    Ok((sum / n as f64).sqrt())
}
