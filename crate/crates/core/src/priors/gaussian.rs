//! Stationary complex Gaussian prior, diagonal in the centered DFT basis.
//! Its noise-smoothed family is available in closed form.

use num_complex::Complex64;
use rand::Rng;

use super::{NoiseSchedule, Prior};
use crate::error::{Error, Result};
use crate::grid::{centered_coord, dft_centered, idft_centered, ComplexGrid, RealGrid};
use crate::rng;

/// Density proportional to `exp(-sum_k p_k |X_k - M_k|^2)` with `X = DFT(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPriorParams {
    mean: ComplexGrid,
    precision: RealGrid,
    mean_spectrum: ComplexGrid,
}

impl GaussianPriorParams {
    pub fn new(mean: ComplexGrid, precision: RealGrid) -> Result<Self> {
        mean.check_shape(&precision, "precision spectrum")?;
        if let Some(p) = precision
            .data()
            .iter()
            .find(|p| !(**p > 0.0) || !p.is_finite())
        {
            return Err(Error::arg(format!(
                "precision entries must be positive and finite, found {p}"
            )));
        }
        let mean_spectrum = dft_centered(&mean);
        Ok(Self {
            mean,
            precision,
            mean_spectrum,
        })
    }

    /// Precision `p0 (1 + kappa |k|^2 / 0.5^2)`, rising toward the spectrum edge
    /// so that samples are smooth.
    pub fn smooth(rows: usize, cols: usize, p0: f64, kappa: f64) -> Result<Self> {
        let precision = RealGrid::from_fn(rows, cols, |r, c| {
            let kr = centered_coord(r, rows);
            let kc = centered_coord(c, cols);
            p0 * (1.0 + kappa * (kr * kr + kc * kc) / 0.25)
        });
        Self::new(ComplexGrid::zeros(rows, cols), precision)
    }

    /// Moment fit: sample mean and per-frequency inverse variance.
    pub fn from_samples(samples: &[ComplexGrid]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::arg("no samples to fit"))?;
        let (rows, cols) = first.shape();
        let mut mean = ComplexGrid::zeros(rows, cols);
        for s in samples {
            first.check_shape(s, "sample")?;
            mean.axpy(Complex64::new(1.0, 0.0), s);
        }
        mean.scale_mut(1.0 / samples.len() as f64);
        let m_hat = dft_centered(&mean);
        let mut var = RealGrid::zeros(rows, cols);
        for s in samples {
            let d = dft_centered(s);
            for ((v, a), b) in var.data_mut().iter_mut().zip(d.data()).zip(m_hat.data()) {
                *v += (a - b).norm_sqr();
            }
        }
        let n = samples.len() as f64;
        let precision = var.map(|v| n / v.max(1e-300));
        Self::new(mean, precision)
    }

    pub fn mean(&self) -> &ComplexGrid {
        &self.mean
    }

    pub fn precision(&self) -> &RealGrid {
        &self.precision
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    /// Draw from the prior convolved with `CN(0, sigma^2)` noise.
    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> ComplexGrid {
        let (rows, cols) = self.shape();
        let spec = ComplexGrid::from_fn(rows, cols, |r, c| {
            let i = r * cols + c;
            let sd = (1.0 / self.precision.data()[i] + sigma * sigma).sqrt();
            self.mean_spectrum.data()[i] + rng::complex_normal(rng) * sd
        });
        idft_centered(&spec)
    }

    // per-frequency precision of the smoothed density
    fn smoothed(&self, sigma: f64) -> impl Iterator<Item = f64> + '_ {
        let s2 = sigma * sigma;
        self.precision
            .data()
            .iter()
            .map(move |p| 1.0 / (1.0 / p + s2))
    }

    /// Log-density of the smoothed prior, up to an additive constant.
    pub fn log_density(&self, x: &ComplexGrid, sigma: f64) -> Result<f64> {
        self.mean.check_shape(x, "image")?;
        let d = dft_centered(x);
        Ok(-d
            .data()
            .iter()
            .zip(self.mean_spectrum.data())
            .zip(self.smoothed(sigma))
            .map(|((a, m), q)| q * (a - m).norm_sqr())
            .sum::<f64>())
    }
}

/// Conjugate (Wirtinger) gradient of the smoothed log-density:
/// `-(X_k - M_k) / (1/p_k + sigma^2)` mapped back to image space.
pub fn gaussian_score(
    params: &GaussianPriorParams,
    x: &ComplexGrid,
    sigma: f64,
) -> Result<ComplexGrid> {
    params.mean.check_shape(x, "image")?;
    let d = dft_centered(x);
    let g = ComplexGrid::from_vec(
        x.rows(),
        x.cols(),
        d.data()
            .iter()
            .zip(params.mean_spectrum.data())
            .zip(params.smoothed(sigma))
            .map(|((a, m), q)| -(a - m) * q)
            .collect(),
    )?;
    Ok(idft_centered(&g))
}

/// Gaussian prior usable by the solvers, optionally annealed along a schedule.
#[derive(Clone, Debug)]
pub struct GaussianPrior {
    params: GaussianPriorParams,
    schedule: Option<NoiseSchedule>,
}

impl GaussianPrior {
    pub fn new(params: GaussianPriorParams) -> Self {
        Self {
            params,
            schedule: None,
        }
    }

    pub fn with_schedule(params: GaussianPriorParams, schedule: NoiseSchedule) -> Self {
        Self {
            params,
            schedule: Some(schedule),
        }
    }

    pub fn params(&self) -> &GaussianPriorParams {
        &self.params
    }

    fn sigma(&self, level: usize) -> f64 {
        match &self.schedule {
            Some(s) => s.sigma(level.min(s.n_scales())),
            None => 0.0,
        }
    }
}

impl Prior for GaussianPrior {
    fn name(&self) -> &str {
        "gauss"
    }

    fn score(&self, x: &ComplexGrid, level: usize) -> Result<ComplexGrid> {
        gaussian_score(&self.params, x, self.sigma(level))
    }

    fn has_exact_prox(&self) -> bool {
        true
    }

    /// Minimizer of `|x - z|^2 / (2t) + R(x)`, solved per frequency.
    fn prox(&self, z: &ComplexGrid, t: f64, level: usize) -> Result<ComplexGrid> {
        self.params.mean.check_shape(z, "image")?;
        if t == 0.0 {
            return Ok(z.clone());
        }
        let zh = dft_centered(z);
        let out = ComplexGrid::from_vec(
            z.rows(),
            z.cols(),
            zh.data()
                .iter()
                .zip(self.params.mean_spectrum.data())
                .zip(self.params.smoothed(self.sigma(level)))
                .map(|((a, m), q)| (a + m * (t * q)) / (1.0 + t * q))
                .collect(),
        )?;
        Ok(idft_centered(&out))
    }

    fn penalty(&self, x: &ComplexGrid, level: usize) -> Option<f64> {
        self.params
            .log_density(x, self.sigma(level))
            .ok()
            .map(|l| -0.5 * l)
    }

    fn n_levels(&self) -> usize {
        self.schedule.as_ref().map_or(0, |s| s.n_scales())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_at_mean() {
        let p = GaussianPriorParams::new(
            rng::complex_normal_grid(8, 8, &mut rng::stream(1, 0)),
            RealGrid::filled(8, 8, 3.0),
        )
        .unwrap();
        for sigma in [0.0, 0.1, 10.0] {
            assert!(gaussian_score(&p, p.mean(), sigma).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn large_sigma_flattens() {
        let p = GaussianPriorParams::smooth(8, 8, 2.0, 1.0).unwrap();
        let x = rng::complex_normal_grid(8, 8, &mut rng::stream(2, 0));
        assert!(gaussian_score(&p, &x, 1e6).unwrap().norm() < 1e-9);
    }

    #[test]
    fn white_prior_score_is_scaled_residual() {
        let p = GaussianPriorParams::new(ComplexGrid::zeros(8, 8), RealGrid::filled(8, 8, 4.0))
            .unwrap();
        let x = rng::complex_normal_grid(8, 8, &mut rng::stream(3, 0));
        let s = gaussian_score(&p, &x, 0.5).unwrap();
        let expect = x.scale(-1.0 / (0.25 + 0.25));
        assert!(s.sub(&expect).norm() < 1e-12);
    }

    #[test]
    fn nonpositive_precision_rejected() {
        let mut prec = RealGrid::filled(4, 4, 1.0);
        *prec.get_mut(1, 1) = 0.0;
        assert!(GaussianPriorParams::new(ComplexGrid::zeros(4, 4), prec).is_err());
    }

    #[test]
    fn moment_fit_recovers_precision() {
        let p = GaussianPriorParams::smooth(8, 8, 10.0, 3.0).unwrap();
        let mut r = rng::stream(5, 0);
        let samples: Vec<_> = (0..4000).map(|_| p.sample(0.0, &mut r)).collect();
        let fit = GaussianPriorParams::from_samples(&samples).unwrap();
        for (a, b) in fit.precision().data().iter().zip(p.precision().data()) {
            assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
        }
    }
}
