//! Magnitude-image quality metrics.

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub reference: String,
    pub test: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

fn check(a: &RealGrid, b: &RealGrid) -> Result<()> {
    a.check_shape(b, "test image")?;
    if a.is_empty() {
        return Err(Error::arg("empty images"));
    }
    Ok(())
}

/// `20 log10(max(ref) / RMSE)`; `+inf` for identical inputs.
pub fn psnr(reference: &RealGrid, test: &RealGrid) -> Result<f64> {
    check(reference, test)?;
    let peak = reference.max();
    if !(peak > 0.0) {
        return Err(Error::arg("reference image has no positive peak"));
    }
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

pub fn psnr_complex(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    psnr(&reference.abs(), &test.abs())
}

const WIN: usize = 11;
const WIN_SD: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn gaussian_window() -> [f64; WIN] {
    let mut w = [0.0; WIN];
    let c = (WIN / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * WIN_SD * WIN_SD)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

// separable "valid" filtering
fn filter(img: &[f64], rows: usize, cols: usize, w: &[f64; WIN]) -> (Vec<f64>, usize, usize) {
    let orows = rows + 1 - WIN;
    let ocols = cols + 1 - WIN;
    let mut tmp = vec![0.0; rows * ocols];
    for r in 0..rows {
        for c in 0..ocols {
            tmp[r * ocols + c] = (0..WIN).map(|k| w[k] * img[r * cols + c + k]).sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for r in 0..orows {
        for c in 0..ocols {
            out[r * ocols + c] = (0..WIN).map(|k| w[k] * tmp[(r + k) * ocols + c]).sum();
        }
    }
    (out, orows, ocols)
}

/// Mean structural similarity over all full 11x11 Gaussian windows
/// (sd 1.5, K1 0.01, K2 0.03) with dynamic range `max(ref)`.
pub fn ssim(reference: &RealGrid, test: &RealGrid) -> Result<f64> {
    check(reference, test)?;
    let (rows, cols) = reference.shape();
    if rows < WIN || cols < WIN {
        return Err(Error::arg(format!(
            "SSIM needs at least {WIN}x{WIN} images"
        )));
    }
    let range = reference.max();
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let w = gaussian_window();
    let x = reference.data();
    let y = test.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, _, _) = filter(x, rows, cols, &w);
    let (my, _, _) = filter(y, rows, cols, &w);
    let (sxx, _, _) = filter(&xx, rows, cols, &w);
    let (syy, _, _) = filter(&yy, rows, cols, &w);
    let (sxy, _, _) = filter(&xy, rows, cols, &w);
    let n = mx.len();
    let mut total = 0.0;
    for i in 0..n {
        let vx = sxx[i] - mx[i] * mx[i];
        let vy = syy[i] - my[i] * my[i];
        let cov = sxy[i] - mx[i] * my[i];
        let num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
        let den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}

pub fn ssim_complex(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    ssim(&reference.abs(), &test.abs())
}

pub fn compare(
    reference: &RealGrid,
    test: &RealGrid,
    ref_id: &str,
    test_id: &str,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        reference: ref_id.to_string(),
        test: test_id.to_string(),
        psnr_db: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
    })
}
