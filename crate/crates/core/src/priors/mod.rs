//! Regularizers for the reconstruction solvers.
//!
//! A prior exposes its score, the conjugate gradient of its log-density at a
//! noise level. The solvers use the score as the negative gradient of the
//! penalty `R`, so `prox(z, t)` approximates `argmin |x - z|^2 / (2t) + R(x)`.

mod diffusion;
mod gaussian;
mod l2;
mod schedule;
pub mod wavelet;

pub use diffusion::{diffusion_score, DiffusionPrior};
pub use gaussian::{gaussian_score, GaussianPrior, GaussianPriorParams};
pub use l2::{L2Prior, WaveletPrior};
pub use schedule::{schedule, score_factor, NoiseSchedule, DEFAULT_N_SCALES, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN};
pub use wavelet::{haar_forward, haar_inverse, l1_wavelet_prox, soft_threshold};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

pub trait Prior: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, x: &ComplexGrid, level: usize) -> Result<ComplexGrid>;

    fn prox(&self, z: &ComplexGrid, t: f64, level: usize) -> Result<ComplexGrid> {
        prox_gradient_step(self, z, t, level)
    }

    fn has_exact_prox(&self) -> bool {
        false
    }

    /// `R(x)`, when it can be evaluated.
    fn penalty(&self, _x: &ComplexGrid, _level: usize) -> Option<f64> {
        None
    }

    /// Number of annealing levels; 0 for level-independent priors.
    fn n_levels(&self) -> usize {
        0
    }
}

/// One unit gradient step on the log-prior: `z + t * score(z)`.
pub fn prox_gradient_step<P: Prior + ?Sized>(
    prior: &P,
    z: &ComplexGrid,
    t: f64,
    level: usize,
) -> Result<ComplexGrid> {
    if !(t >= 0.0) {
        return Err(Error::arg(format!(
            "prox step must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(z.clone());
    }
    let s = prior.score(z, level)?;
    if !s.is_finite() {
        return Err(Error::Numerical(format!(
            "prior `{}` produced a non-finite score",
            prior.name()
        )));
    }
    z.check_shape(&s, "score")?;
    let mut out = z.clone();
    out.axpy(t.into(), &s);
    Ok(out)
}

/// Parse the prior names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    L2,
    L1Wavelet,
    Gauss,
    Diffusion,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Self::L2),
            "l1wav" => Ok(Self::L1Wavelet),
            "gauss" => Ok(Self::Gauss),
            "diffusion" => Ok(Self::Diffusion),
            other => Err(Error::arg(format!("unknown prior `{other}`"))),
        }
    }
}
