use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::ComplexGrid;

struct Plan2 {
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, usize, bool), Arc<Plan2>>> = RefCell::new(HashMap::new());
}

fn plan(rows: usize, cols: usize, inverse: bool) -> Arc<Plan2> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((rows, cols, inverse))
            .or_insert_with(|| {
                let dir = if inverse {
                    FftDirection::Inverse
                } else {
                    FftDirection::Forward
                };
                let mut planner = FftPlanner::new();
                let row = planner.plan_fft(cols, dir);
                let col = planner.plan_fft(rows, dir);
                let scratch_len = row
                    .get_inplace_scratch_len()
                    .max(col.get_inplace_scratch_len());
                Arc::new(Plan2 {
                    row,
                    col,
                    scratch_len,
                })
            })
            .clone()
    })
}

/// Index in the shifted array that element `i` moves to under `fftshift`
/// on an axis of length `n`.
#[inline]
pub fn fftshift_index(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

/// Circular roll of a row-major grid: `out[(r + dr) % rows][(c + dc) % cols] = in[r][c]`.
fn roll(data: &[Complex64], rows: usize, cols: usize, dr: usize, dc: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    for r in 0..rows {
        let rr = (r + dr) % rows;
        let src = &data[r * cols..(r + 1) * cols];
        let dst = &mut out[rr * cols..(rr + 1) * cols];
        for (c, v) in src.iter().enumerate() {
            dst[(c + dc) % cols] = *v;
        }
    }
    out
}

fn transform(img: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let (rows, cols) = img.shape();
    let p = plan(rows, cols, inverse);
    // ifftshift == roll by -(n/2) == roll by n - n/2
    let mut buf = roll(img.data(), rows, cols, rows - rows / 2, cols - cols / 2);
    let mut scratch = vec![Complex64::default(); p.scratch_len];

    for row in buf.chunks_exact_mut(cols) {
        p.row.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = buf[r * cols + c];
        }
        p.col.process_with_scratch(&mut column, &mut scratch);
        for r in 0..rows {
            buf[r * cols + c] = column[r];
        }
    }

    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    let out = roll(&buf, rows, cols, rows / 2, cols / 2);
    ComplexGrid::from_vec(rows, cols, out).expect("shape preserved")
}

/// Orthonormal 2D DFT with the zero frequency at index `(rows/2, cols/2)`.
pub fn dft_centered(img: &ComplexGrid) -> ComplexGrid {
    transform(img, false)
}

/// Inverse of [`dft_centered`]; also its adjoint.
pub fn idft_centered(ksp: &ComplexGrid) -> ComplexGrid {
    transform(ksp, true)
}
