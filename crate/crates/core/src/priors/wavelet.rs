//! Orthonormal multi-level 2D Haar transform and complex soft thresholding.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

pub const DEFAULT_LEVELS: usize = 4;

/// Number of levels actually applied: the recursion stops once an extent
/// would become odd.
pub fn effective_levels(rows: usize, cols: usize, levels: usize) -> usize {
    let mut l = 0;
    while l < levels && (rows >> l).is_multiple_of(2) && (cols >> l).is_multiple_of(2) && rows >> l > 0 && cols >> l > 0 {
        l += 1;
    }
    l
}

fn check_nonempty(x: &ComplexGrid) -> Result<()> {
    if x.is_empty() {
        return Err(Error::arg("empty grid"));
    }
    Ok(())
}

fn haar_1d(buf: &mut [Complex64], tmp: &mut Vec<Complex64>) {
    let h = buf.len() / 2;
    tmp.clear();
    tmp.resize(buf.len(), Complex64::default());
    for i in 0..h {
        let a = buf[2 * i];
        let b = buf[2 * i + 1];
        tmp[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
        tmp[h + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(tmp);
}

fn ihaar_1d(buf: &mut [Complex64], tmp: &mut Vec<Complex64>) {
    let h = buf.len() / 2;
    tmp.clear();
    tmp.resize(buf.len(), Complex64::default());
    for i in 0..h {
        let s = buf[i];
        let d = buf[h + i];
        tmp[2 * i] = (s + d) * std::f64::consts::FRAC_1_SQRT_2;
        tmp[2 * i + 1] = (s - d) * std::f64::consts::FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(tmp);
}

// apply `f` to the rows then the columns of the top-left `r x c` block
fn separable(
    g: &mut ComplexGrid,
    r: usize,
    c: usize,
    f: fn(&mut [Complex64], &mut Vec<Complex64>),
    cols_first: bool,
) {
    let ncols = g.cols();
    let mut tmp = Vec::new();
    let mut line = vec![Complex64::default(); r.max(c)];
    let do_rows = |g: &mut ComplexGrid, tmp: &mut Vec<Complex64>| {
        for i in 0..r {
            let row = &mut g.data_mut()[i * ncols..i * ncols + c];
            f(row, tmp);
        }
    };
    let mut do_cols = |g: &mut ComplexGrid, tmp: &mut Vec<Complex64>| {
        for j in 0..c {
            for i in 0..r {
                line[i] = g.data()[i * ncols + j];
            }
            f(&mut line[..r], tmp);
            for i in 0..r {
                g.data_mut()[i * ncols + j] = line[i];
            }
        }
    };
    if cols_first {
        do_cols(g, &mut tmp);
        do_rows(g, &mut tmp);
    } else {
        do_rows(g, &mut tmp);
        do_cols(g, &mut tmp);
    }
}

/// Forward transform in Mallat layout: the approximation band occupies the
/// top-left `rows/2^L x cols/2^L` block.
pub fn haar_forward(x: &ComplexGrid, levels: usize) -> Result<ComplexGrid> {
    check_nonempty(x)?;
    let levels = effective_levels(x.rows(), x.cols(), levels);
    let mut g = x.clone();
    let (mut r, mut c) = x.shape();
    for _ in 0..levels {
        separable(&mut g, r, c, haar_1d, false);
        r /= 2;
        c /= 2;
    }
    Ok(g)
}

pub fn haar_inverse(w: &ComplexGrid, levels: usize) -> Result<ComplexGrid> {
    check_nonempty(w)?;
    let levels = effective_levels(w.rows(), w.cols(), levels);
    let mut g = w.clone();
    for l in (0..levels).rev() {
        let r = w.rows() >> l;
        let c = w.cols() >> l;
        separable(&mut g, r, c, ihaar_1d, true);
    }
    Ok(g)
}

/// `u * max(0, 1 - theta/|u|)`.
pub fn soft_threshold(u: Complex64, theta: f64) -> Complex64 {
    let m = u.norm();
    if m <= theta {
        Complex64::default()
    } else {
        u * (1.0 - theta / m)
    }
}

fn is_approximation(r: usize, c: usize, rows: usize, cols: usize, levels: usize) -> bool {
    r < rows >> levels && c < cols >> levels
}

/// Proximal map of `threshold * ||detail(Haar x)||_1`.
pub fn l1_wavelet_prox(z: &ComplexGrid, threshold: f64, levels: usize) -> Result<ComplexGrid> {
    if threshold < 0.0 {
        return Err(Error::arg("threshold must be nonnegative"));
    }
    let mut w = haar_forward(z, levels)?;
    if threshold == 0.0 {
        return Ok(z.clone());
    }
    let (rows, cols) = w.shape();
    let levels = effective_levels(rows, cols, levels);
    for r in 0..rows {
        for c in 0..cols {
            if !is_approximation(r, c, rows, cols, levels) {
                let v = w.get_mut(r, c);
                *v = soft_threshold(*v, threshold);
            }
        }
    }
    haar_inverse(&w, levels)
}

/// `||detail(Haar x)||_1`.
pub fn l1_wavelet_norm(x: &ComplexGrid, levels: usize) -> Result<f64> {
    let w = haar_forward(x, levels)?;
    let (rows, cols) = w.shape();
    let levels = effective_levels(rows, cols, levels);
    let mut s = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            if !is_approximation(r, c, rows, cols, levels) {
                s += w.get(r, c).norm();
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(rows: usize, cols: usize, seed: u64) -> ComplexGrid {
        rng::complex_normal_grid(rows, cols, &mut rng::stream(seed, 0))
    }

    #[test]
    fn round_trip_and_parseval() {
        let x = random(32, 16, 1);
        let w = haar_forward(&x, 4).unwrap();
        assert!((w.norm() - x.norm()).abs() < 1e-12 * x.norm());
        assert!(haar_inverse(&w, 4).unwrap().sub(&x).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn single_level_2x2() {
        let x = ComplexGrid::from_vec(
            2,
            2,
            [1.0, 2.0, 3.0, 4.0]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
        .unwrap();
        let w = haar_forward(&x, 1).unwrap();
        let expect = [5.0, -1.0, -2.0, 0.0];
        for (a, b) in w.data().iter().zip(expect) {
            assert!((a.re - b).abs() < 1e-12 && a.im == 0.0, "{w:?}");
        }
    }

    #[test]
    fn scalar_shrink() {
        let v = soft_threshold(Complex64::new(3.0, 4.0), 2.5);
        assert!((v - Complex64::new(1.5, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_threshold_is_identity() {
        let x = random(16, 16, 2);
        assert_eq!(l1_wavelet_prox(&x, 0.0, 4).unwrap(), x);
    }

    #[test]
    fn huge_threshold_keeps_block_means() {
        let x = random(16, 16, 3);
        let p = l1_wavelet_prox(&x, 1e9, 2).unwrap();
        for br in 0..4 {
            for bc in 0..4 {
                let mut mean = Complex64::default();
                for r in 0..4 {
                    for c in 0..4 {
                        mean += x.get(4 * br + r, 4 * bc + c);
                    }
                }
                mean /= 16.0;
                for r in 0..4 {
                    for c in 0..4 {
                        assert!((p.get(4 * br + r, 4 * bc + c) - mean).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn recursion_stops_at_odd_extent() {
        assert_eq!(effective_levels(24, 16, 4), 3);
        assert_eq!(effective_levels(8, 8, 4), 3);
        assert_eq!(effective_levels(7, 8, 4), 0);
        assert!(l1_wavelet_prox(&ComplexGrid::zeros(0, 4), 0.1, 4).is_err());
    }
}
