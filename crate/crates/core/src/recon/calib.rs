use std::f64::consts::PI;

use num_complex::Complex64;

use crate::acquisition::{CoilSet, SamplingMask};
use crate::error::{Error, Result};
use crate::grid::{idft_centered, rss, ComplexGrid};

fn hann(i: usize, n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let x = (i as f64 + 0.5) / n as f64;
    (PI * x).sin().powi(2)
}

/// Coil maps from the fully sampled central block: a Hann-apodized
/// low-resolution image per channel divided by the root-sum-of-squares,
/// which is floored at `1e-3` of its maximum.
pub fn estimate_coils_calib(ksp: &[ComplexGrid], mask: &SamplingMask) -> Result<CoilSet> {
    if !mask.has_calibration() {
        return Err(Error::Config(
            "mask has no fully sampled calibration block".into(),
        ));
    }
    let (rows, cols) = mask.shape();
    let (cr, cc) = mask.calibration();
    let (r0, c0) = mask.calibration_origin();
    let images: Vec<ComplexGrid> = ksp
        .iter()
        .map(|y| {
            if y.shape() != (rows, cols) {
                return Err(Error::arg("k-space channel shape differs from the mask"));
            }
            let block = ComplexGrid::from_fn(rows, cols, |r, c| {
                if r >= r0 && r < r0 + cr && c >= c0 && c < c0 + cc {
                    *y.get(r, c) * (hann(r - r0, cr) * hann(c - c0, cc))
                } else {
                    Complex64::default()
                }
            });
            Ok(idft_centered(&block))
        })
        .collect::<Result<_>>()?;
    if images.is_empty() {
        return Err(Error::arg("no k-space channels"));
    }
    let norm = rss(&images);
    let floor = 1e-3 * norm.max();
    if !(floor > 0.0) {
        return Err(Error::Numerical(
            "calibration block is empty (zero k-space)".into(),
        ));
    }
    let maps = images
        .into_iter()
        .map(|img| img.zip_map(&norm, |v, n| v / n.max(floor)))
        .collect();
    CoilSet::new(maps)
}
