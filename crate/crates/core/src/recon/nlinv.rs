//! Joint image and coil estimation by a two-stage iteratively regularized
//! Gauss-Newton method.
//!
//! Coils are represented through weighted k-space variables `h_j = w . DFT(c_j)`
//! with a Sobolev weight `w`, so the smoothness penalty `||w . DFT(c)||^2`
//! becomes a plain squared norm. The first `n - r` steps regularize the image
//! with `||x - x0||^2 / 2` around the initial guess `x0 = 1` and solve the
//! linearized problem by conjugate gradients. The last `r` steps use the given
//! prior at `x + dx` and FISTA.

use log::{debug, warn};
use num_complex::Complex64;

use super::linalg::{all_finite, axpy, conjugate_gradient, power_iteration, Stack};
use super::pics::LIPSCHITZ_MARGIN;
use crate::acquisition::{
    forward_model, jacobian_adjoint, jacobian_apply, sobolev_weight, CoilSet, SamplingMask,
    DEFAULT_SOBOLEV_A, DEFAULT_SOBOLEV_L,
};
use crate::error::{Error, Result};
use crate::grid::{dft_centered, idft_centered, stack_dot, stack_norm, ComplexGrid, RealGrid};
use crate::priors::Prior;

pub const NLINV_DATA_NORM: f64 = 100.0;

#[derive(Clone, Debug)]
pub struct NlinvConfig {
    pub n: usize,
    pub r: usize,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha_min: f64,
    pub cg_iters: usize,
    pub fista_iters: usize,
    pub sobolev_a: f64,
    pub sobolev_l: f64,
    /// Scale data to norm [`NLINV_DATA_NORM`] and undo the scaling on output.
    pub normalize: bool,
}

impl Default for NlinvConfig {
    fn default() -> Self {
        Self {
            n: 10,
            r: 4,
            alpha0: 1.0,
            beta0: 1.0,
            alpha_min: 1e-4,
            cg_iters: 30,
            fista_iters: 200,
            sobolev_a: DEFAULT_SOBOLEV_A,
            sobolev_l: DEFAULT_SOBOLEV_L,
            normalize: true,
        }
    }
}

impl NlinvConfig {
    fn validate(&self) -> Result<()> {
        if self.r > self.n {
            return Err(Error::arg(format!(
                "reg steps r={} exceed Gauss-Newton steps n={}",
                self.r, self.n
            )));
        }
        if !(self.alpha_min >= 0.0) || !(self.alpha0 > 0.0) || !(self.beta0 > 0.0) {
            return Err(Error::arg(
                "alpha0, beta0 must be positive and alpha_min nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlinvStep {
    pub alpha: f64,
    pub beta: f64,
    /// `||F(m) - y||` after the step, in the units of the input data.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct NlinvOutput {
    pub image: ComplexGrid,
    pub coils: CoilSet,
    pub trace: Vec<NlinvStep>,
}

impl NlinvOutput {
    /// Gauge-invariant coil-combined magnitude `|x| * RSS(c)`.
    pub fn combined(&self) -> RealGrid {
        self.image.abs().zip_map(&self.coils.rss(), |a, b| a * b)
    }

    /// The same model `x c_j` written as `(x RSS(c)) (c_j / RSS(c))`, so the
    /// coils have unit root-sum-of-squares wherever they are nonzero.
    pub fn normalized(&self) -> Result<(ComplexGrid, CoilSet)> {
        let rss = self.coils.rss();
        let image = self.image.zip_map(&rss, |v, w| v * w);
        let maps = self
            .coils
            .maps()
            .iter()
            .map(|c| c.zip_map(&rss, |v, &w| if w > 0.0 { v / w } else { Complex64::default() }))
            .collect();
        Ok((image, CoilSet::new(maps)?))
    }
}

struct Model<'a> {
    mask: &'a SamplingMask,
    w: RealGrid,
}

impl Model<'_> {
    fn coils(&self, h: &[ComplexGrid]) -> Stack {
        h.iter()
            .map(|hj| idft_centered(&hj.zip_map(&self.w, |v, w| v / w)))
            .collect()
    }

    fn coil_adjoint(&self, dc: Stack) -> Stack {
        dc.iter()
            .map(|d| dft_centered(d).zip_map(&self.w, |v, w| v / w))
            .collect()
    }

    fn apply(&self, x: &ComplexGrid, c: &[ComplexGrid], d: &[ComplexGrid]) -> Result<Stack> {
        jacobian_apply(x, c, &d[0], &self.coils(&d[1..]), self.mask)
    }

    fn adjoint(&self, x: &ComplexGrid, c: &[ComplexGrid], r: &[ComplexGrid]) -> Result<Stack> {
        let (dx, dc) = jacobian_adjoint(x, c, r, self.mask)?;
        let mut out = vec![dx];
        out.extend(self.coil_adjoint(dc));
        Ok(out)
    }

    fn normal(&self, x: &ComplexGrid, c: &[ComplexGrid], d: &[ComplexGrid]) -> Result<Stack> {
        self.adjoint(x, c, &self.apply(x, c, d)?)
    }
}

fn residual(y: &[ComplexGrid], fm: &[ComplexGrid]) -> Stack {
    y.iter().zip(fm).map(|(a, b)| a.sub(b)).collect()
}

/// Joint reconstruction; returns the image, coils and per-step trace.
pub fn nlinv(
    ksp: &[ComplexGrid],
    mask: &SamplingMask,
    config: &NlinvConfig,
    prior: &dyn Prior,
) -> Result<NlinvOutput> {
    config.validate()?;
    if ksp.is_empty() {
        return Err(Error::arg("no k-space channels"));
    }
    let (rows, cols) = mask.shape();
    for y in ksp {
        mask.check_shape(y.rows(), y.cols())?;
    }
    let data_scale = if config.normalize {
        let m =
            stack_norm(&ksp.iter().map(|y| mask.apply(y)).collect::<Vec<_>>()) / NLINV_DATA_NORM;
        if m > 0.0 {
            m
        } else {
            1.0
        }
    } else {
        1.0
    };
    let y: Stack = ksp
        .iter()
        .map(|k| mask.apply(k).scale(1.0 / data_scale))
        .collect();
    let model = Model {
        mask,
        w: sobolev_weight(rows, cols, config.sobolev_a, config.sobolev_l)?
            .weights()
            .clone(),
    };
    let nc = y.len();
    let x_init = ComplexGrid::filled(rows, cols, Complex64::new(1.0, 0.0));
    let mut x = x_init.clone();
    let mut h: Stack = (0..nc).map(|_| ComplexGrid::zeros(rows, cols)).collect();
    let mut alpha = config.alpha0;
    let mut beta = config.beta0;
    let mut trace = Vec::with_capacity(config.n);
    let stage2_total = config.r * config.fista_iters;
    let mut stage2_iter = 0;
    let mut last_residual = f64::INFINITY;

    for k in 0..config.n {
        let c = model.coils(&h);
        let r = residual(&y, &forward_model(&x, &c, mask)?);
        // With all coils zero the image block of the Jacobian vanishes and only
        // the penalty acts on x. A prior pulling toward zero would collapse x,
        // after which x and c take turns being zero, so x is held instead.
        let freeze_image = h.iter().all(|g| g.norm_sqr() == 0.0);
        let step: Stack = if k < config.n - config.r {
            // (DG^H DG + diag(alpha, beta)) d = DG^H r - (alpha (x - x0), beta h)
            let mut b = model.adjoint(&x, &c, &r)?;
            b[0].axpy((-alpha).into(), &x.sub(&x_init));
            if freeze_image {
                b[0] = ComplexGrid::zeros(rows, cols);
            }
            for (bj, hj) in b[1..].iter_mut().zip(&h) {
                bj.axpy((-beta).into(), hj);
            }
            // inner solves run a fixed iteration budget
            conjugate_gradient(
                |d| {
                    let mut out = model.normal(&x, &c, d)?;
                    out[0].axpy(alpha.into(), &d[0]);
                    if freeze_image {
                        out[0] = ComplexGrid::zeros(rows, cols);
                    }
                    for (o, dj) in out[1..].iter_mut().zip(&d[1..]) {
                        o.axpy(beta.into(), dj);
                    }
                    Ok(out)
                },
                &b,
                None,
                config.cg_iters,
                1e-14,
            )?
            .x
        } else {
            let mut template = vec![x.clone()];
            template.extend(h.iter().cloned());
            let lam = power_iteration(|d| model.normal(&x, &c, d), &template, 20, k as u64)?;
            let l = LIPSCHITZ_MARGIN * (lam + beta);
            let mut d: Stack = template
                .iter()
                .map(|g| ComplexGrid::zeros(g.rows(), g.cols()))
                .collect();
            let mut z = d.clone();
            let mut t = 1.0f64;
            for _ in 0..config.fista_iters {
                let level = super::pics::bound_level(stage2_iter, stage2_total, prior.n_levels());
                stage2_iter += 1;
                // gradient of 1/2 ||DG z - r||^2 + beta/2 ||h + z_h||^2
                let mut g = model.adjoint(&x, &c, &residual(&model.apply(&x, &c, &z)?, &r))?;
                for ((gj, hj), zj) in g[1..].iter_mut().zip(&h).zip(&z[1..]) {
                    gj.axpy(beta.into(), &hj.add(zj));
                }
                let mut v = z.clone();
                axpy(&mut v, (-1.0 / l).into(), &g);
                let image = prior.prox(&x.add(&v[0]), alpha / l, level)?;
                let mut d_new = v;
                d_new[0] = if freeze_image {
                    ComplexGrid::zeros(rows, cols)
                } else {
                    image.sub(&x)
                };
                if !all_finite(&d_new) {
                    return Err(Error::Numerical(format!(
                        "non-finite update in Gauss-Newton step {k}"
                    )));
                }
                let diff: Stack = d_new.iter().zip(&d).map(|(a, b)| a.sub(b)).collect();
                let zd: Stack = z.iter().zip(&d_new).map(|(a, b)| a.sub(b)).collect();
                let restart = stack_dot(&zd, &diff).re > 0.0;
                let t_new = if restart {
                    1.0
                } else {
                    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
                };
                let mom = if restart { 0.0 } else { (t - 1.0) / t_new };
                z = d_new.clone();
                axpy(&mut z, mom.into(), &diff);
                d = d_new;
                t = t_new;
            }
            d
        };
        if !all_finite(&step) {
            return Err(Error::Numerical(format!(
                "non-finite update in Gauss-Newton step {k}"
            )));
        }
        x = x.add(&step[0]);
        for (hj, dj) in h.iter_mut().zip(&step[1..]) {
            *hj = hj.add(dj);
        }
        let res = stack_norm(&residual(&y, &forward_model(&x, &model.coils(&h), mask)?));
        if res > last_residual {
            warn!("data residual increased at Gauss-Newton step {k}: {last_residual:.4e} -> {res:.4e}");
        }
        debug!("Gauss-Newton step {k}: alpha {alpha:.3e} beta {beta:.3e} residual {res:.4e}");
        last_residual = res;
        trace.push(NlinvStep {
            alpha,
            beta,
            residual: res * data_scale,
        });
        alpha = (alpha / 2.0).max(config.alpha_min);
        beta /= 2.0;
    }
    let coils = CoilSet::new(model.coils(&h))?;
    Ok(NlinvOutput {
        image: x.scale(data_scale),
        coils,
        trace,
    })
}
