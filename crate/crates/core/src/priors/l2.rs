use super::Prior;
use crate::error::Result;
use crate::grid::ComplexGrid;

/// `R(x) = ||x - x0||^2 / 2` with center `x0` (zero by default), score `x0 - x`.
#[derive(Clone, Debug, Default)]
pub struct L2Prior {
    center: Option<ComplexGrid>,
}

impl L2Prior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn centered(center: ComplexGrid) -> Self {
        Self {
            center: Some(center),
        }
    }

    fn offset(&self, x: &ComplexGrid) -> Result<ComplexGrid> {
        match &self.center {
            Some(c) => {
                c.check_shape(x, "image")?;
                Ok(x.sub(c))
            }
            None => Ok(x.clone()),
        }
    }
}

impl Prior for L2Prior {
    fn name(&self) -> &str {
        "l2"
    }

    fn score(&self, x: &ComplexGrid, _level: usize) -> Result<ComplexGrid> {
        Ok(self.offset(x)?.scale(-1.0))
    }

    fn has_exact_prox(&self) -> bool {
        true
    }

    fn prox(&self, z: &ComplexGrid, t: f64, _level: usize) -> Result<ComplexGrid> {
        let shrunk = self.offset(z)?.scale(1.0 / (1.0 + t));
        Ok(match &self.center {
            Some(c) => shrunk.add(c),
            None => shrunk,
        })
    }

    fn penalty(&self, x: &ComplexGrid, _level: usize) -> Option<f64> {
        self.offset(x).ok().map(|d| 0.5 * d.norm_sqr())
    }
}

/// `R(x) = lambda * ||detail(Haar x)||_1`.
#[derive(Clone, Copy, Debug)]
pub struct WaveletPrior {
    pub lambda: f64,
    pub levels: usize,
}

impl WaveletPrior {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            levels: super::wavelet::DEFAULT_LEVELS,
        }
    }
}

impl Prior for WaveletPrior {
    fn name(&self) -> &str {
        "l1wav"
    }

    /// Subgradient of `-R`, with zero chosen at vanishing coefficients.
    fn score(&self, x: &ComplexGrid, _level: usize) -> Result<ComplexGrid> {
        let mut w = super::wavelet::haar_forward(x, self.levels)?;
        let (rows, cols) = w.shape();
        let levels = super::wavelet::effective_levels(rows, cols, self.levels);
        let (ar, ac) = (rows >> levels, cols >> levels);
        for r in 0..rows {
            for c in 0..cols {
                let v = w.get_mut(r, c);
                let m = v.norm();
                *v = if (r < ar && c < ac) || m == 0.0 {
                    Default::default()
                } else {
                    -*v * (self.lambda / m)
                };
            }
        }
        super::wavelet::haar_inverse(&w, self.levels)
    }

    fn has_exact_prox(&self) -> bool {
        true
    }

    fn prox(&self, z: &ComplexGrid, t: f64, _level: usize) -> Result<ComplexGrid> {
        super::wavelet::l1_wavelet_prox(z, t * self.lambda, self.levels)
    }

    fn penalty(&self, x: &ComplexGrid, _level: usize) -> Option<f64> {
        super::wavelet::l1_wavelet_norm(x, self.levels)
            .ok()
            .map(|n| self.lambda * n)
    }
}
