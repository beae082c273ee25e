//! Multi-coil Fourier model `F(x, c)_j = M . DFT(x . c_j)`, its adjoint for
//! fixed coils, and the bilinear Jacobian used by Gauss-Newton.

use super::{CoilSet, SamplingMask};
use crate::error::{Error, Result};
use crate::grid::{dft_centered, idft_centered, ComplexGrid};
use crate::rng;

fn check_stack(stack: &[ComplexGrid], rows: usize, cols: usize, what: &str) -> Result<()> {
    if stack.is_empty() {
        return Err(Error::arg(format!("{what}: empty channel stack")));
    }
    for g in stack {
        if g.shape() != (rows, cols) {
            return Err(Error::arg(format!(
                "{what}: channel is {}x{}, expected {rows}x{cols}",
                g.rows(),
                g.cols()
            )));
        }
    }
    Ok(())
}

fn project(mask: &SamplingMask, img: &ComplexGrid) -> ComplexGrid {
    let mut k = dft_centered(img);
    mask.apply_mut(&mut k);
    k
}

fn back_project(mask: &SamplingMask, ksp: &ComplexGrid) -> ComplexGrid {
    idft_centered(&mask.apply(ksp))
}

/// Noiseless forward model for a fixed coil set.
pub fn forward_model(
    img: &ComplexGrid,
    coils: &[ComplexGrid],
    mask: &SamplingMask,
) -> Result<Vec<ComplexGrid>> {
    let (rows, cols) = img.shape();
    check_stack(coils, rows, cols, "coils")?;
    mask.check_shape(rows, cols)?;
    Ok(coils
        .iter()
        .map(|c| project(mask, &img.hadamard(c)))
        .collect())
}

/// Simulated acquisition: forward model plus circular complex Gaussian noise of
/// standard deviation `noise_sd` on kept samples only.
pub fn forward(
    img: &ComplexGrid,
    coils: &CoilSet,
    mask: &SamplingMask,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<ComplexGrid>> {
    if noise_sd < 0.0 {
        return Err(Error::arg("noise standard deviation must be nonnegative"));
    }
    let mut ksp = forward_model(img, coils.maps(), mask)?;
    if noise_sd > 0.0 {
        for (j, ch) in ksp.iter_mut().enumerate() {
            let mut rng = rng::stream(seed, j as u64);
            for (v, &kept) in ch.data_mut().iter_mut().zip(mask.kept()) {
                let z = rng::complex_normal(&mut rng);
                if kept {
                    *v += z * noise_sd;
                }
            }
        }
    }
    Ok(ksp)
}

/// `sum_j conj(c_j) . IDFT(M . y_j)`.
pub fn adjoint(ksp: &[ComplexGrid], coils: &CoilSet, mask: &SamplingMask) -> Result<ComplexGrid> {
    adjoint_model(ksp, coils.maps(), mask)
}

pub fn adjoint_model(
    ksp: &[ComplexGrid],
    coils: &[ComplexGrid],
    mask: &SamplingMask,
) -> Result<ComplexGrid> {
    let (rows, cols) = mask.shape();
    check_stack(ksp, rows, cols, "k-space")?;
    check_stack(coils, rows, cols, "coils")?;
    if ksp.len() != coils.len() {
        return Err(Error::arg(format!(
            "{} k-space channels but {} coils",
            ksp.len(),
            coils.len()
        )));
    }
    let mut out = ComplexGrid::zeros(rows, cols);
    for (y, c) in ksp.iter().zip(coils) {
        let img = back_project(mask, y);
        for ((o, v), s) in out.data_mut().iter_mut().zip(img.data()).zip(c.data()) {
            *o += s.conj() * v;
        }
    }
    Ok(out)
}

/// `F'(x, c)(dx, dc)_j = M . DFT(dx . c_j + x . dc_j)`.
pub fn jacobian_apply(
    x: &ComplexGrid,
    coils: &[ComplexGrid],
    dx: &ComplexGrid,
    dcoils: &[ComplexGrid],
    mask: &SamplingMask,
) -> Result<Vec<ComplexGrid>> {
    let (rows, cols) = x.shape();
    x.check_shape(dx, "jacobian image update")?;
    check_stack(coils, rows, cols, "coils")?;
    check_stack(dcoils, rows, cols, "coil update")?;
    mask.check_shape(rows, cols)?;
    if coils.len() != dcoils.len() {
        return Err(Error::arg("coil and coil-update channel counts differ"));
    }
    Ok(coils
        .iter()
        .zip(dcoils)
        .map(|(c, dc)| {
            let img = ComplexGrid::from_vec(
                rows,
                cols,
                dx.data()
                    .iter()
                    .zip(c.data())
                    .zip(x.data().iter().zip(dc.data()))
                    .map(|((a, b), (p, q))| a * b + p * q)
                    .collect(),
            )
            .expect("shape");
            project(mask, &img)
        })
        .collect())
}

/// Adjoint of [`jacobian_apply`] on the product space `(dx, dc_1..dc_nc)`.
pub fn jacobian_adjoint(
    x: &ComplexGrid,
    coils: &[ComplexGrid],
    residual: &[ComplexGrid],
    mask: &SamplingMask,
) -> Result<(ComplexGrid, Vec<ComplexGrid>)> {
    let (rows, cols) = x.shape();
    check_stack(coils, rows, cols, "coils")?;
    check_stack(residual, rows, cols, "residual")?;
    mask.check_shape(rows, cols)?;
    if coils.len() != residual.len() {
        return Err(Error::arg("coil and residual channel counts differ"));
    }
    let mut dx = ComplexGrid::zeros(rows, cols);
    let mut dcoils = Vec::with_capacity(coils.len());
    for (c, r) in coils.iter().zip(residual) {
        let img = back_project(mask, r);
        for ((o, v), s) in dx.data_mut().iter_mut().zip(img.data()).zip(c.data()) {
            *o += s.conj() * v;
        }
        dcoils.push(img.zip_map(x, |v, p| p.conj() * v));
    }
    Ok((dx, dcoils))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::make_mask_2d;
    use num_complex::Complex64;

    #[test]
    fn full_mask_unit_coil_is_plain_dft() {
        let img = ComplexGrid::from_fn(8, 8, |r, c| Complex64::new(r as f64, c as f64 * 0.5));
        let k = forward(
            &img,
            &CoilSet::unit(8, 8),
            &SamplingMask::full(8, 8),
            0.0,
            0,
        )
        .unwrap();
        assert!(k[0].sub(&dft_centered(&img)).norm() < 1e-12);
    }

    #[test]
    fn noise_only_on_kept_samples() {
        let mask = make_mask_2d(16, 16, 2, 2, 0, 0).unwrap();
        let k = forward(
            &ComplexGrid::zeros(16, 16),
            &CoilSet::unit(16, 16),
            &mask,
            0.1,
            3,
        )
        .unwrap();
        for (v, &kept) in k[0].data().iter().zip(mask.kept()) {
            assert_eq!(v.norm() == 0.0, !kept);
        }
    }

    #[test]
    fn adjoint_of_impulse_is_impulse() {
        let mut img = ComplexGrid::zeros(8, 8);
        *img.get_mut(3, 5) = Complex64::new(1.0, 0.0);
        let coils = CoilSet::unit(8, 8);
        let mask = SamplingMask::full(8, 8);
        let back = adjoint(
            &forward(&img, &coils, &mask, 0.0, 0).unwrap(),
            &coils,
            &mask,
        )
        .unwrap();
        assert!(back.sub(&img).norm() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let img = ComplexGrid::zeros(8, 8);
        let coils = CoilSet::unit(4, 4);
        assert!(forward(&img, &coils, &SamplingMask::full(8, 8), 0.0, 0).is_err());
    }
}
