use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{centered_coord, idft_centered, rss, ComplexGrid, RealGrid};
use crate::rng;

/// Per-channel complex receive sensitivities over the image grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilSet {
    maps: Vec<ComplexGrid>,
}

impl CoilSet {
    pub fn new(maps: Vec<ComplexGrid>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::arg("coil set needs at least one channel"))?;
        for m in &maps[1..] {
            first.check_shape(m, "coil map")?;
        }
        Ok(Self { maps })
    }

    /// A single coil of unit sensitivity.
    pub fn unit(rows: usize, cols: usize) -> Self {
        Self {
            maps: vec![ComplexGrid::filled(rows, cols, Complex64::new(1.0, 0.0))],
        }
    }

    pub fn nc(&self) -> usize {
        self.maps.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }

    pub fn maps(&self) -> &[ComplexGrid] {
        &self.maps
    }

    pub fn into_maps(self) -> Vec<ComplexGrid> {
        self.maps
    }

    pub fn rss(&self) -> RealGrid {
        rss(&self.maps)
    }
}

/// True when `(r, c)` lies inside the centered band keeping a `fraction` of
/// each axis. The DC sample is always inside.
pub fn in_central_band(r: usize, c: usize, rows: usize, cols: usize, fraction: f64) -> bool {
    let half = 0.5 * fraction;
    centered_coord(r, rows).abs() <= half && centered_coord(c, cols).abs() <= half
}

/// Complex Gaussian field whose spectrum is supported on the central band.
pub fn lowpass_random_field<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    fraction: f64,
    rng: &mut R,
) -> ComplexGrid {
    let spectrum = ComplexGrid::from_fn(rows, cols, |r, c| {
        let z = rng::complex_normal(rng);
        if in_central_band(r, c, rows, cols, fraction) {
            z
        } else {
            Complex64::default()
        }
    });
    idft_centered(&spectrum)
}

/// Smooth random sensitivities, jointly normalized to unit root-sum-of-squares.
pub fn simulate_coils(
    rows: usize,
    cols: usize,
    nc: usize,
    smoothness: f64,
    seed: u64,
) -> Result<CoilSet> {
    if nc == 0 {
        return Err(Error::arg("coil count must be at least 1"));
    }
    if !(smoothness > 0.0 && smoothness <= 1.0) {
        return Err(Error::arg(format!(
            "smoothness must be in (0, 1], got {smoothness}"
        )));
    }
    let mut maps: Vec<ComplexGrid> = (0..nc)
        .map(|j| lowpass_random_field(rows, cols, smoothness, &mut rng::stream(seed, j as u64)))
        .collect();
    let norm = rss(&maps);
    for m in &mut maps {
        for (v, n) in m.data_mut().iter_mut().zip(norm.data()) {
            *v /= n.max(1e-300);
        }
    }
    CoilSet::new(maps)
}
