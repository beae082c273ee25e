#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magprior::acquisition::{CoilSet, SamplingMask};
use magprior::grid::ComplexGrid;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C = Complex64;

pub fn to_vec(x: &ComplexGrid) -> DVector<C> {
    DVector::from_column_slice(x.data())
}

pub fn to_grid(v: &DVector<C>, rows: usize, cols: usize) -> ComplexGrid {
    ComplexGrid::from_vec(rows, cols, v.iter().copied().collect()).unwrap()
}

/// Dense centered unitary DFT on row-major flattened grids.
pub fn dft_matrix(rows: usize, cols: usize) -> DMatrix<C> {
    let n = rows * cols;
    let norm = 1.0 / (n as f64).sqrt();
    let tau = 2.0 * std::f64::consts::PI;
    DMatrix::from_fn(n, n, |k, p| {
        let (kr, kc) = ((k / cols) as f64 - (rows / 2) as f64, (k % cols) as f64 - (cols / 2) as f64);
        let (pr, pc) = ((p / cols) as f64 - (rows / 2) as f64, (p % cols) as f64 - (cols / 2) as f64);
        C::from_polar(norm, -tau * (kr * pr / rows as f64 + kc * pc / cols as f64))
    })
}

/// Stacked dense forward operator `[M D diag(c_j)]_j`.
pub fn dense_forward(coils: &CoilSet, mask: &SamplingMask) -> DMatrix<C> {
    let (rows, cols) = mask.shape();
    let n = rows * cols;
    let d = dft_matrix(rows, cols);
    let m = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        mask.kept().iter().map(|&k| C::new(if k { 1.0 } else { 0.0 }, 0.0)),
    ));
    let mut a = DMatrix::zeros(n * coils.nc(), n);
    for (j, cj) in coils.maps().iter().enumerate() {
        let block = &m * &d * DMatrix::from_diagonal(&to_vec(cj));
        a.view_mut((j * n, 0), (n, n)).copy_from(&block);
    }
    a
}

pub fn stacked(ksp: &[ComplexGrid]) -> DVector<C> {
    DVector::from_iterator(
        ksp.iter().map(|k| k.len()).sum(),
        ksp.iter().flat_map(|k| k.data().iter().copied()),
    )
}

pub fn magprior(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magprior"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn magprior")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = magprior(dir, args);
    assert!(
        out.status.success(),
        "magprior {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Little-endian float32 NIfTI-1 single file.
pub fn write_nifti(path: &Path, n: usize, nz: usize, f: impl Fn(usize, usize, usize) -> f32) {
    let mut h = vec![0u8; 352];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    for (off, v) in [(40, 3i16), (42, n as i16), (44, n as i16), (46, nz as i16), (48, 1), (50, 1), (52, 1), (54, 1), (70, 16), (72, 32)] {
        h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    }
    for (off, v) in [(80, 1.0f32), (84, 1.0), (88, 1.0), (108, 352.0), (112, 1.0)] {
        h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    }
    h[344..348].copy_from_slice(b"n+1\0");
    for z in 0..nz {
        for y in 0..n {
            for x in 0..n {
                h.extend(f(x, y, z).to_le_bytes());
            }
        }
    }
    std::fs::write(path, h).unwrap();
}

const SMALL_RECIPE: &str = "\
[experiment]
seed = 3
slices = 2

[input]
size = 24

[coils]
count = 4

[mask]
kind = poisson
accel = 2, 3
calib = 6

[sim]
noise_sd = 0.005

[pics]
iters = 40

[nlinv]
n = 6
r = 2
fista_iters = 30
";

/// Every subcommand once, writing into `dir`.
pub fn pipeline(dir: &Path) {
    ok(dir, &["phantom", "--rows", "24", "--cols", "24", "--kind", "random-ellipses", "--phase", "smooth-random", "--count", "3", "--seed", "4", "--out", "img"]);
    ok(dir, &["coils", "--rows", "24", "--cols", "24", "--coils", "4", "--seed", "1", "--out", "coils"]);
    ok(dir, &["mask", "--rows", "24", "--cols", "24", "--accel", "2", "--calib", "6", "--seed", "2", "--out", "mask"]);
    ok(dir, &["mask", "--rows", "24", "--cols", "24", "--kind", "1d", "--accel", "2", "--calib", "4", "--out", "mask1d"]);
    ok(dir, &["mask", "--rows", "24", "--cols", "24", "--kind", "2d", "--accel", "2", "--accel-c", "2", "--calib", "4", "--out", "mask2d"]);
    ok(dir, &["phantom", "--rows", "24", "--cols", "24", "--out", "truth"]);
    ok(dir, &["sim", "--image", "truth", "--coils", "coils", "--mask", "mask", "--noise-sd", "0.01", "--seed", "5", "--out", "ksp"]);
    ok(dir, &["pics", "--ksp", "ksp", "--mask", "mask", "--coils", "coils", "--prior", "l1wav", "--alpha", "0.003", "--iters", "30", "--out", "rec_wav"]);
    ok(dir, &["pics", "--ksp", "ksp", "--mask", "mask", "--coils", "coils", "--solver", "cg", "--out", "rec_cg"]);
    ok(dir, &["pics", "--ksp", "ksp", "--mask", "mask", "--coils", "coils", "--prior", "gauss", "--schedule-N", "10", "--iters", "30", "--out", "rec_gauss"]);
    ok(dir, &["nlinv", "--ksp", "ksp", "--mask", "mask", "--gn-steps", "5", "--reg-steps", "2", "--fista-iters", "20", "--out", "rec_nlinv", "--coils-out", "coils_nlinv"]);
    ok(dir, &["metrics", "--ref", "truth", "--test", "rec_cg", "--out", "metrics.csv"]);

    std::fs::create_dir_all(dir.join("train")).unwrap();
    ok(dir, &["phantom", "--rows", "16", "--cols", "16", "--kind", "random-ellipses", "--count", "6", "--out", "train/set"]);
    ok(dir, &["train-prior", "--data", "train", "--epochs", "2", "--batch", "3", "--width", "4", "--depth", "2", "--schedule-N", "5", "--seed", "1", "--out", "ckpt"]);
    ok(dir, &["augment-phase", "--in", "train/set", "--prior", "ckpt", "--schedule-N", "5", "--samples", "2", "--steps-per-level", "2", "--out", "aug_net"]);
    ok(dir, &["augment-phase", "--in", "truth", "--prior", "gauss", "--schedule-N", "10", "--samples", "2", "--out", "aug_gauss"]);

    write_nifti(&dir.join("vol.nii"), 64, 3, |x, y, z| {
        let r = (x as f32 - 32.0).hypot(y as f32 - 32.0);
        if r < 12.0 + 4.0 * z as f32 {
            100.0
        } else {
            0.0
        }
    });
    ok(dir, &["prep", "--in", "vol.nii", "--out", "prep", "--target", "64", "--noise-sd", "0.2", "--seed", "7"]);

    std::fs::write(dir.join("small.toml"), SMALL_RECIPE).unwrap();
    ok(dir, &["run", "--recipe", "small.toml", "--out", "run"]);
}

pub fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

