//! Linear reconstruction with known coils: `min 1/2 ||F_c x - y||^2 + alpha R(x)`.

use log::debug;

use super::linalg::{power_iteration, solve_cg};
use crate::acquisition::{adjoint, forward_model, CoilSet, SamplingMask};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::priors::Prior;

pub const DEFAULT_PICS_ITERS: usize = 100;
pub const POWER_ITERS: usize = 20;
pub const LIPSCHITZ_MARGIN: f64 = 1.05;

#[derive(Clone, Debug)]
pub struct PicsConfig {
    pub alpha: f64,
    pub iterations: usize,
    /// Scale data so the zero-filled image has unit maximum magnitude, and
    /// undo the scaling on output.
    pub normalize: bool,
    /// Advance annealed priors one level per `iterations / N` steps.
    pub bind_schedule: bool,
    pub restart: bool,
}

impl Default for PicsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            iterations: DEFAULT_PICS_ITERS,
            normalize: true,
            bind_schedule: true,
            restart: true,
        }
    }
}

fn normal_op<'a>(
    coils: &'a CoilSet,
    mask: &'a SamplingMask,
) -> impl Fn(&ComplexGrid) -> Result<ComplexGrid> + 'a {
    move |x| adjoint(&forward_model(x, coils.maps(), mask)?, coils, mask)
}

/// Solves `(F_c^H F_c + alpha I) x = F_c^H y` to relative residual `1e-8`.
pub fn pics_cg(
    ksp: &[ComplexGrid],
    coils: &CoilSet,
    mask: &SamplingMask,
    alpha: f64,
    max_iter: usize,
) -> Result<ComplexGrid> {
    if !(alpha >= 0.0) {
        return Err(Error::arg(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let rhs = adjoint(ksp, coils, mask)?;
    let op = normal_op(coils, mask);
    let x = solve_cg(
        |v| {
            let mut out = op(&v[0])?;
            out.axpy(alpha.into(), &v[0]);
            Ok(vec![out])
        },
        &[rhs],
        max_iter,
        1e-8,
    )?;
    Ok(x.into_iter().next().expect("one grid"))
}

/// Lipschitz bound of the data-term gradient.
pub fn lipschitz(coils: &CoilSet, mask: &SamplingMask) -> Result<f64> {
    let (rows, cols) = mask.shape();
    let op = normal_op(coils, mask);
    let l = power_iteration(
        |v| Ok(vec![op(&v[0])?]),
        &[ComplexGrid::zeros(rows, cols)],
        POWER_ITERS,
        0,
    )?;
    Ok(LIPSCHITZ_MARGIN * l)
}

/// Annealing level for iteration `k` of `iters` over `n` levels: `1..=n`.
pub fn bound_level(k: usize, iters: usize, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (1 + k * n / iters.max(1)).min(n)
    }
}

/// FISTA with prior proximal steps; returns the final iterate.
pub fn pics_fista(
    ksp: &[ComplexGrid],
    coils: &CoilSet,
    mask: &SamplingMask,
    prior: &dyn Prior,
    config: &PicsConfig,
) -> Result<ComplexGrid> {
    if config.iterations == 0 {
        return Err(Error::arg("iterations must be at least 1"));
    }
    if !(config.alpha >= 0.0) {
        return Err(Error::arg("alpha must be nonnegative"));
    }
    let zero_filled = adjoint(ksp, coils, mask)?;
    let scale = if config.normalize {
        let m = zero_filled.max_abs();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    } else {
        1.0
    };
    let y: Vec<ComplexGrid> = ksp.iter().map(|k| k.scale(1.0 / scale)).collect();
    let rhs = zero_filled.scale(1.0 / scale);
    let l = lipschitz(coils, mask)?;
    if !(l > 0.0) {
        return Err(Error::Numerical("data operator is zero".into()));
    }
    let op = normal_op(coils, mask);
    let objective = |x: &ComplexGrid, level: usize| -> Result<Option<f64>> {
        let r = forward_model(x, coils.maps(), mask)?;
        let data: f64 = r.iter().zip(&y).map(|(a, b)| a.sub(b).norm_sqr()).sum();
        Ok(prior
            .penalty(x, level)
            .map(|p| 0.5 * data + config.alpha * p))
    };

    let n_levels = if config.bind_schedule {
        prior.n_levels()
    } else {
        0
    };
    let t_step = config.alpha / l;
    let mut x = ComplexGrid::zeros(mask.rows(), mask.cols());
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut prev_obj = None;
    for k in 0..config.iterations {
        let level = if config.bind_schedule {
            bound_level(k, config.iterations, n_levels)
        } else {
            prior.n_levels()
        };
        // gradient of the data term is F^H F z - F^H y
        let mut v = op(&z)?;
        v = z.sub(&v.sub(&rhs).scale(1.0 / l));
        let x_new = prior.prox(&v, t_step, level)?;
        if !x_new.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite iterate at FISTA iteration {k}"
            )));
        }
        let mut restart = false;
        if config.restart {
            let obj = if prior.penalty(&x_new, level).is_some() {
                objective(&x_new, level)?
            } else {
                None
            };
            restart = match (obj, prev_obj) {
                (Some(o), Some(p)) => o > p,
                (None, _) => z.sub(&x_new).dot(&x_new.sub(&x)).re > 0.0,
                _ => false,
            };
            prev_obj = obj;
        }
        let t_new = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let momentum = if restart { 0.0 } else { (t - 1.0) / t_new };
        z = x_new.add(&x_new.sub(&x).scale(momentum));
        if restart {
            debug!("momentum restart at iteration {k}");
        }
        x = x_new;
        t = t_new;
    }
    Ok(x.scale(scale))
}

/// Adjoint reconstruction, `F_c^H y`.
pub fn zero_filled(
    ksp: &[ComplexGrid],
    coils: &CoilSet,
    mask: &SamplingMask,
) -> Result<ComplexGrid> {
    adjoint(ksp, coils, mask)
}
