use std::sync::Arc;

use super::{NoiseSchedule, Prior};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::score_model::ScoreNet;

fn range_scale(x: &ComplexGrid) -> f64 {
    let m = x.max_abs();
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

fn check(
    net: &ScoreNet<f32>,
    schedule: &NoiseSchedule,
    x: &ComplexGrid,
    level: usize,
) -> Result<()> {
    if net.schedule() != schedule {
        return Err(Error::Config(format!(
            "score network was trained for {} noise scales on a different schedule",
            net.schedule().n_scales()
        )));
    }
    schedule.check_level(level)?;
    if x.is_empty() {
        return Err(Error::arg("empty image"));
    }
    Ok(())
}

/// Network score at level `level` scaled by the schedule factor. The image is
/// rescaled to unit maximum magnitude before evaluation and the gradient is
/// mapped back by the chain rule.
pub fn diffusion_score(
    net: &ScoreNet<f32>,
    schedule: &NoiseSchedule,
    x: &ComplexGrid,
    level: usize,
) -> Result<ComplexGrid> {
    check(net, schedule, x, level)?;
    let s = range_scale(x);
    let g = net.score(&x.scale(1.0 / s), level)?;
    Ok(g.scale(schedule.score_factor(level) / s))
}

/// Learned prior backed by a trained score network.
///
/// The proximal step is a gradient step whose length is `t * sigma_i^2` in the
/// normalized image range, so `t = 1` moves to the network's denoised estimate
/// at that level.
#[derive(Clone, Debug)]
pub struct DiffusionPrior {
    net: Arc<ScoreNet<f32>>,
    normalize: bool,
}

impl DiffusionPrior {
    pub fn new(net: Arc<ScoreNet<f32>>) -> Self {
        Self {
            net,
            normalize: true,
        }
    }

    /// Evaluate the network on images as given, without range rescaling.
    pub fn without_normalization(net: Arc<ScoreNet<f32>>) -> Self {
        Self {
            net,
            normalize: false,
        }
    }

    pub fn net(&self) -> &ScoreNet<f32> {
        &self.net
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        self.net.schedule()
    }

    fn scale(&self, x: &ComplexGrid) -> f64 {
        if self.normalize {
            range_scale(x)
        } else {
            1.0
        }
    }

    fn normalized_score(&self, u: &ComplexGrid, level: usize) -> Result<ComplexGrid> {
        let schedule = self.net.schedule();
        check(&self.net, schedule, u, level)?;
        Ok(self
            .net
            .score(u, level)?
            .scale(schedule.score_factor(level)))
    }
}

impl Prior for DiffusionPrior {
    fn name(&self) -> &str {
        "diffusion"
    }

    fn score(&self, x: &ComplexGrid, level: usize) -> Result<ComplexGrid> {
        let s = self.scale(x);
        Ok(self
            .normalized_score(&x.scale(1.0 / s), level)?
            .scale(1.0 / s))
    }

    fn prox(&self, z: &ComplexGrid, t: f64, level: usize) -> Result<ComplexGrid> {
        if !(t >= 0.0) {
            return Err(Error::arg(format!(
                "prox step must be nonnegative, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(z.clone());
        }
        let s = self.scale(z);
        let mut u = z.scale(1.0 / s);
        let g = self.normalized_score(&u, level)?;
        if !g.is_finite() {
            return Err(Error::Numerical(
                "prior `diffusion` produced a non-finite score".into(),
            ));
        }
        let step = t * self.schedule().sigma(level).powi(2);
        u.axpy(step.into(), &g);
        Ok(u.scale(s))
    }

    fn n_levels(&self) -> usize {
        self.net.schedule().n_scales()
    }
}
