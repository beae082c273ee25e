use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{centered_coord, ComplexGrid};
use crate::rng;

/// Binary k-space inclusion pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    rows: usize,
    cols: usize,
    kept: Vec<bool>,
    acceleration: f64,
    calib_rows: usize,
    calib_cols: usize,
}

impl SamplingMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            kept: vec![true; rows * cols],
            acceleration: 1.0,
            calib_rows: rows,
            calib_cols: cols,
        }
    }

    /// Builds a mask from a grid; nonzero entries are kept. Calibration extents
    /// are taken as the largest fully sampled centered block.
    pub fn from_grid(grid: &ComplexGrid) -> Self {
        let (rows, cols) = grid.shape();
        let kept: Vec<bool> = grid.data().iter().map(|v| v.norm() != 0.0).collect();
        let mut mask = Self {
            rows,
            cols,
            kept,
            acceleration: 1.0,
            calib_rows: 0,
            calib_cols: 0,
        };
        mask.acceleration = mask.realized_acceleration();
        let (cr, cc) = mask.detect_calibration();
        mask.calib_rows = cr;
        mask.calib_cols = cc;
        mask
    }

    pub fn to_grid(&self) -> ComplexGrid {
        ComplexGrid::from_fn(self.rows, self.cols, |r, c| {
            if self.is_kept(r, c) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_kept(&self, r: usize, c: usize) -> bool {
        self.kept[r * self.cols + c]
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    /// Nominal undersampling factor requested at generation time.
    pub fn acceleration(&self) -> f64 {
        self.acceleration
    }

    pub fn calibration(&self) -> (usize, usize) {
        (self.calib_rows, self.calib_cols)
    }

    pub fn has_calibration(&self) -> bool {
        self.calib_rows > 0 && self.calib_cols > 0
    }

    /// First row/column of the centered calibration block.
    pub fn calibration_origin(&self) -> (usize, usize) {
        (
            self.rows / 2 - self.calib_rows / 2,
            self.cols / 2 - self.calib_cols / 2,
        )
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn fraction_kept(&self) -> f64 {
        self.kept_count() as f64 / self.kept.len() as f64
    }

    pub fn realized_acceleration(&self) -> f64 {
        let n = self.kept_count();
        if n == 0 {
            f64::INFINITY
        } else {
            self.kept.len() as f64 / n as f64
        }
    }

    /// Zeroes excluded locations.
    pub fn apply(&self, ksp: &ComplexGrid) -> ComplexGrid {
        let mut out = ksp.clone();
        self.apply_mut(&mut out);
        out
    }

    pub fn apply_mut(&self, ksp: &mut ComplexGrid) {
        for (v, &k) in ksp.data_mut().iter_mut().zip(&self.kept) {
            if !k {
                *v = Complex64::default();
            }
        }
    }

    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if (rows, cols) == (self.rows, self.cols) {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "mask is {}x{} but data is {rows}x{cols}",
                self.rows, self.cols
            )))
        }
    }

    fn block_full(&self, nr: usize, nc: usize) -> bool {
        let r0 = self.rows / 2 - nr / 2;
        let c0 = self.cols / 2 - nc / 2;
        (r0..r0 + nr).all(|r| (c0..c0 + nc).all(|c| self.is_kept(r, c)))
    }

    fn detect_calibration(&self) -> (usize, usize) {
        if !self.is_kept(self.rows / 2, self.cols / 2) {
            return (0, 0);
        }
        // grow a centered rectangle greedily, preferring the axis that stays full
        let (mut nr, mut nc) = (1, 1);
        loop {
            let grow_r = nr < self.rows && self.block_full(nr + 1, nc);
            let grow_c = nc < self.cols && self.block_full(nr, nc + 1);
            match (grow_r, grow_c) {
                (false, false) => break,
                (true, _) if nr <= nc || !grow_c => nr += 1,
                _ => nc += 1,
            }
        }
        if nr * nc <= 1 {
            (0, 0)
        } else {
            (nr, nc)
        }
    }

    fn mark_calibration(&mut self, calib_rows: usize, calib_cols: usize) {
        self.calib_rows = calib_rows;
        self.calib_cols = calib_cols;
        if calib_rows == 0 || calib_cols == 0 {
            return;
        }
        let (r0, c0) = self.calibration_origin();
        for r in r0..r0 + calib_rows {
            for c in c0..c0 + calib_cols {
                self.kept[r * self.cols + c] = true;
            }
        }
    }
}

fn check_calib(rows: usize, cols: usize, calib_rows: usize, calib_cols: usize) -> Result<()> {
    if calib_rows > rows || calib_cols > cols {
        return Err(Error::arg(format!(
            "calibration region {calib_rows}x{calib_cols} exceeds grid {rows}x{cols}"
        )));
    }
    Ok(())
}

#[inline]
fn on_lattice(i: usize, n: usize, stride: usize) -> bool {
    (i as isize - (n / 2) as isize).rem_euclid(stride as isize) == 0
}

/// Keeps every `accel`-th phase-encode line (columns, aligned so the DC line
/// is always sampled) plus `calib_lines` central lines. All readout points on
/// a kept line are sampled.
pub fn make_mask_1d(
    rows: usize,
    cols: usize,
    accel: usize,
    calib_lines: usize,
) -> Result<SamplingMask> {
    if accel == 0 {
        return Err(Error::arg("acceleration must be at least 1"));
    }
    if calib_lines > cols {
        return Err(Error::arg(format!(
            "{calib_lines} calibration lines exceed {cols} phase-encode lines"
        )));
    }
    let kept = (0..rows * cols)
        .map(|i| on_lattice(i % cols, cols, accel))
        .collect();
    let mut mask = SamplingMask {
        rows,
        cols,
        kept,
        acceleration: accel as f64,
        calib_rows: 0,
        calib_cols: 0,
    };
    if calib_lines > 0 {
        mask.mark_calibration(rows, calib_lines);
    }
    Ok(mask)
}

/// Cartesian lattice keeping every `(accel_r, accel_c)`-th point plus a fully
/// sampled central block.
pub fn make_mask_2d(
    rows: usize,
    cols: usize,
    accel_r: usize,
    accel_c: usize,
    calib_rows: usize,
    calib_cols: usize,
) -> Result<SamplingMask> {
    if accel_r == 0 || accel_c == 0 {
        return Err(Error::arg("acceleration factors must be at least 1"));
    }
    check_calib(rows, cols, calib_rows, calib_cols)?;
    let kept = (0..rows * cols)
        .map(|i| on_lattice(i / cols, rows, accel_r) && on_lattice(i % cols, cols, accel_c))
        .collect();
    let mut mask = SamplingMask {
        rows,
        cols,
        kept,
        acceleration: (accel_r * accel_c) as f64,
        calib_rows: 0,
        calib_cols: 0,
    };
    mask.mark_calibration(calib_rows, calib_cols);
    Ok(mask)
}

/// Tuning knobs for variable-density Poisson-disc generation.
#[derive(Clone, Debug)]
pub struct PoissonOptions {
    /// Radius growth with normalized distance from the k-space center:
    /// `r(k) = r0 * (1 + density_slope * |k|)`.
    pub density_slope: f64,
    /// Candidates tried around an active sample before it is retired.
    pub candidates: usize,
    /// Bisection steps on `r0`.
    pub max_retries: usize,
    /// Accepted relative deviation of the realized acceleration.
    pub tolerance: f64,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self {
            density_slope: 2.0,
            candidates: 30,
            max_retries: 40,
            tolerance: 0.10,
        }
    }
}

struct DartThrower<'a> {
    rows: usize,
    cols: usize,
    opts: &'a PoissonOptions,
}

impl DartThrower<'_> {
    fn radius(&self, r0: f64, r: usize, c: usize) -> f64 {
        let kr = centered_coord(r, self.rows);
        let kc = centered_coord(c, self.cols);
        r0 * (1.0 + self.opts.density_slope * (kr * kr + kc * kc).sqrt())
    }

    fn free(&self, kept: &[bool], r: usize, c: usize, radius: f64) -> bool {
        if kept[r * self.cols + c] {
            return false;
        }
        let reach = radius.ceil() as isize;
        let r2 = radius * radius;
        for dr in -reach..=reach {
            let rr = r as isize + dr;
            if rr < 0 || rr >= self.rows as isize {
                continue;
            }
            for dc in -reach..=reach {
                let cc = c as isize + dc;
                if cc < 0 || cc >= self.cols as isize {
                    continue;
                }
                if kept[rr as usize * self.cols + cc as usize] && ((dr * dr + dc * dc) as f64) < r2
                {
                    return false;
                }
            }
        }
        true
    }

    /// Bridson-style dart throwing with a position-dependent exclusion radius.
    fn generate(&self, r0: f64, seed: u64) -> Vec<bool> {
        let mut rng = rng::stream(seed, 0x706f_6973);
        let mut kept = vec![false; self.rows * self.cols];
        let start = (
            rng.random_range(0..self.rows),
            rng.random_range(0..self.cols),
        );
        kept[start.0 * self.cols + start.1] = true;
        let mut active = vec![start];
        while !active.is_empty() {
            let idx = rng.random_range(0..active.len());
            let (pr, pc) = active[idx];
            let step = self.radius(r0, pr, pc).max(1.0);
            let mut placed = false;
            for _ in 0..self.opts.candidates {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let dist = rng.random_range(step..2.0 * step);
                let qr = (pr as f64 + dist * theta.sin()).round();
                let qc = (pc as f64 + dist * theta.cos()).round();
                if qr < 0.0 || qc < 0.0 || qr >= self.rows as f64 || qc >= self.cols as f64 {
                    continue;
                }
                let (qr, qc) = (qr as usize, qc as usize);
                if self.free(&kept, qr, qc, self.radius(r0, qr, qc)) {
                    kept[qr * self.cols + qc] = true;
                    active.push((qr, qc));
                    placed = true;
                    break;
                }
            }
            if !placed {
                active.swap_remove(idx);
            }
        }
        kept
    }
}

/// Variable-density Poisson-disc mask whose realized acceleration (including
/// the calibration block) is within 10% of `target_accel`.
pub fn make_mask_poisson(
    rows: usize,
    cols: usize,
    target_accel: f64,
    calib_rows: usize,
    calib_cols: usize,
    seed: u64,
) -> Result<SamplingMask> {
    make_mask_poisson_with(
        rows,
        cols,
        target_accel,
        calib_rows,
        calib_cols,
        seed,
        &PoissonOptions::default(),
    )
}

pub fn make_mask_poisson_with(
    rows: usize,
    cols: usize,
    target_accel: f64,
    calib_rows: usize,
    calib_cols: usize,
    seed: u64,
    opts: &PoissonOptions,
) -> Result<SamplingMask> {
    if !(target_accel > 1.0) || !target_accel.is_finite() {
        return Err(Error::arg(format!(
            "Poisson-disc target acceleration must exceed 1, got {target_accel}"
        )));
    }
    check_calib(rows, cols, calib_rows, calib_cols)?;
    let thrower = DartThrower { rows, cols, opts };

    let build = |r0: f64| {
        let mut mask = SamplingMask {
            rows,
            cols,
            kept: thrower.generate(r0, seed),
            acceleration: target_accel,
            calib_rows: 0,
            calib_cols: 0,
        };
        mask.mark_calibration(calib_rows, calib_cols);
        mask
    };

    // realized acceleration grows with r0
    let (mut lo, mut hi) = (0.25, (rows.max(cols) as f64).max(2.0));
    let mut best: Option<(f64, SamplingMask)> = None;
    for _ in 0..opts.max_retries {
        let r0 = 0.5 * (lo + hi);
        let mask = build(r0);
        let achieved = mask.realized_acceleration();
        let err = (achieved / target_accel - 1.0).abs();
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, mask));
        }
        if err < 0.02 {
            break;
        }
        if achieved < target_accel {
            lo = r0;
        } else {
            hi = r0;
        }
    }
    let (err, mask) = best.expect("at least one attempt");
    if err <= opts.tolerance {
        Ok(mask)
    } else {
        Err(Error::Generation {
            reason: format!(
                "target acceleration {target_accel} not reachable on {rows}x{cols} within {:.0}%",
                opts.tolerance * 100.0
            ),
            achieved: mask.realized_acceleration(),
        })
    }
}
