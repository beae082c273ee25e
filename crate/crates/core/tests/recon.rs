mod common;

use common::*;
use magprior::acquisition::*;
use magprior::grid::ComplexGrid;
use magprior::metrics::psnr;
use magprior::priors::*;
use magprior::recon::*;
use magprior::rng;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

fn rel(a: &ComplexGrid, b: &ComplexGrid) -> f64 {
    a.sub(b).norm() / b.norm()
}

fn setup(size: usize, nc: usize, seed: u64) -> (ComplexGrid, CoilSet, SamplingMask) {
    let img = phantom(size, size, PhantomKind::RandomEllipses, PhaseModel::SmoothRandom, seed).unwrap();
    let coils = if nc == 1 {
        CoilSet::new(vec![lowpass_random_field(size, size, 0.2, &mut rng::stream(seed, 9))]).unwrap()
    } else {
        simulate_coils(size, size, nc, 0.2, seed).unwrap()
    };
    let mask = make_mask_poisson(size, size, 2.0, 4, 4, seed).unwrap();
    (img, coils, mask)
}

fn dense_cg_error(size: usize, coils: &CoilSet, mask: &SamplingMask, alpha: f64) -> f64 {
    let img = phantom(size, size, PhantomKind::RandomEllipses, PhaseModel::SmoothRandom, 3).unwrap();
    let y = forward(&img, coils, mask, 0.01, 1).unwrap();
    let n = size * size;
    let a = dense_forward(coils, mask);
    let ah = a.adjoint();
    let lhs = &ah * &a + DMatrix::<C>::identity(n, n) * C::new(alpha, 0.0);
    let oracle = lhs.lu().solve(&(&ah * stacked(&y))).unwrap();
    let x = pics_cg(&y, coils, mask, alpha, 500).unwrap();
    rel(&x, &to_grid(&oracle, size, size))
}

#[test]
fn pics_cg_matches_dense_direct_solve() {
    let coil = lowpass_random_field(8, 8, 0.2, &mut rng::stream(4, 0));
    let e = dense_cg_error(8, &CoilSet::new(vec![coil]).unwrap(), &SamplingMask::full(8, 8), 0.1);
    assert!(e <= 1e-8, "single coil: relative error {e}");
    // undersampled multi-coil: the residual tolerance times the condition number
    let (_, coils, mask) = setup(12, 3, 3);
    let e = dense_cg_error(12, &coils, &mask, 0.02);
    assert!(e <= 1e-6, "three coils: relative error {e}");
}

#[test]
fn pics_fista_gaussian_prior_matches_closed_form_map() {
    let n = 16;
    let (img, coils, mask) = setup(n, 1, 5);
    let y = forward(&img, &coils, &mask, 0.0, 0).unwrap();
    let mean = img.scale(0.5);
    let precision = GaussianPriorParams::smooth(n, n, 1.0, 4.0).unwrap().precision().clone();
    let prior = GaussianPrior::new(GaussianPriorParams::new(mean.clone(), precision.clone()).unwrap());
    let alpha = 0.05;
    let cfg = PicsConfig {
        alpha,
        iterations: 3000,
        normalize: false,
        ..Default::default()
    };
    let x = pics_fista(&y, &coils, &mask, &prior, &cfg).unwrap();

    // penalty 1/2 (x - mu)^H D^H P D (x - mu)
    let a = dense_forward(&coils, &mask);
    let d = dft_matrix(n, n);
    let p = DMatrix::from_diagonal(&DVector::from_iterator(n * n, precision.data().iter().map(|&v| C::new(v, 0.0))));
    let sigma_inv = d.adjoint() * p * &d * C::new(alpha, 0.0);
    let lhs = a.adjoint() * &a + &sigma_inv;
    let rhs = a.adjoint() * stacked(&y) + &sigma_inv * to_vec(&mean);
    let oracle = to_grid(&lhs.lu().solve(&rhs).unwrap(), n, n);
    let e = rel(&x, &oracle);
    assert!(e <= 1e-4, "relative error {e}");
}

#[test]
fn unregularized_full_sampling_is_least_squares() {
    let (img, coils, _) = setup(16, 4, 7);
    let mask = SamplingMask::full(16, 16);
    let y = forward(&img, &coils, &mask, 0.0, 0).unwrap();
    let cfg = PicsConfig {
        alpha: 0.0,
        iterations: 300,
        normalize: false,
        ..Default::default()
    };
    let x = pics_fista(&y, &coils, &mask, &L2Prior::new(), &cfg).unwrap();
    let r = forward(&x, &coils, &mask, 0.0, 0).unwrap();
    let res: f64 = r.iter().zip(&y).map(|(a, b)| a.sub(b).norm_sqr()).sum::<f64>().sqrt();
    assert!(res <= 1e-6, "residual {res}");
}

fn objective(x: &ComplexGrid, y: &[ComplexGrid], coils: &CoilSet, mask: &SamplingMask, alpha: f64, prior: &dyn Prior) -> f64 {
    let r = forward(x, coils, mask, 0.0, 0).unwrap();
    let data: f64 = r.iter().zip(y).map(|(a, b)| a.sub(b).norm_sqr()).sum();
    0.5 * data + alpha * prior.penalty(x, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fista_never_ends_above_the_zero_objective(seed in 0u64..1000, alpha in 0.001f64..0.5, wavelet in any::<bool>()) {
        let (img, coils, mask) = setup(16, 2, seed);
        let y = forward(&img, &coils, &mask, 0.02, seed).unwrap();
        let prior: Box<dyn Prior> = if wavelet { Box::new(WaveletPrior::new(1.0)) } else { Box::new(L2Prior::new()) };
        let cfg = PicsConfig { alpha, iterations: 30, normalize: false, ..Default::default() };
        let x = pics_fista(&y, &coils, &mask, prior.as_ref(), &cfg).unwrap();
        let zero = ComplexGrid::zeros(16, 16);
        prop_assert!(objective(&x, &y, &coils, &mask, alpha, prior.as_ref()) <= objective(&zero, &y, &coils, &mask, alpha, prior.as_ref()));
    }

    #[test]
    fn pics_cg_satisfies_normal_equations(seed in 0u64..1000, alpha in 0.01f64..1.0) {
        let (img, coils, mask) = setup(12, 3, seed);
        let y = forward(&img, &coils, &mask, 0.01, seed).unwrap();
        let x = pics_cg(&y, &coils, &mask, alpha, 500).unwrap();
        let rhs = adjoint(&y, &coils, &mask).unwrap();
        let mut lhs = adjoint(&forward(&x, &coils, &mask, 0.0, 0).unwrap(), &coils, &mask).unwrap();
        lhs.axpy(alpha.into(), &x);
        prop_assert!(lhs.sub(&rhs).norm() <= 1e-8 * rhs.norm());
    }
}

#[test]
fn l1_wavelet_recovers_piecewise_constant_image() {
    let n = 64;
    // constant on 8x8 blocks, nonzero on a sparse subset: sparse in the Haar basis
    let img = ComplexGrid::from_fn(n, n, |r, c| {
        let (br, bc) = (r / 8, c / 8);
        if (br * 3 + bc * 5) % 7 == 0 {
            C::new(0.5 + 0.5 * ((br + bc) % 2) as f64, 0.0)
        } else {
            C::default()
        }
    });
    let coils = simulate_coils(n, n, 8, 0.05, 1).unwrap();
    let mask = make_mask_poisson(n, n, 4.0, 12, 12, 2).unwrap();
    let y = forward(&img, &coils, &mask, 0.0, 0).unwrap();
    let cfg = PicsConfig {
        alpha: 1e-4,
        iterations: 300,
        ..Default::default()
    };
    let x = pics_fista(&y, &coils, &mask, &WaveletPrior::new(1.0), &cfg).unwrap();
    let p = psnr(&img.abs(), &x.abs()).unwrap();
    assert!(p >= 40.0, "PSNR {p:.2} dB");
}

fn nlinv_case(size: usize, accel: f64) -> (ComplexGrid, Vec<ComplexGrid>, SamplingMask) {
    let img = phantom(size, size, PhantomKind::SheppLogan, PhaseModel::None, 0).unwrap();
    let coils = simulate_coils(size, size, 4, 0.05, 2).unwrap();
    let mask = if accel > 1.0 {
        make_mask_poisson(size, size, accel, 8, 8, 1).unwrap()
    } else {
        SamplingMask::full(size, size)
    };
    let y = forward(&img, &coils, &mask, 0.0, 0).unwrap();
    (img, y, mask)
}

#[test]
fn nlinv_regularization_sequence_halves_with_floor() {
    let (_, y, mask) = nlinv_case(16, 1.0);
    let cfg = NlinvConfig {
        n: 10,
        r: 2,
        alpha_min: 0.02,
        fista_iters: 5,
        cg_iters: 5,
        ..Default::default()
    };
    let out = nlinv(&y, &mask, &cfg, &L2Prior::new()).unwrap();
    assert_eq!(out.trace.len(), 10);
    for (k, s) in out.trace.iter().enumerate() {
        assert_eq!(s.alpha, (0.5f64.powi(k as i32)).max(0.02));
        assert_eq!(s.beta, 0.5f64.powi(k as i32));
    }
    assert_eq!(out.trace[3].alpha, 0.125);
}

#[test]
fn nlinv_rejects_bad_configs() {
    let (_, y, mask) = nlinv_case(8, 1.0);
    let cfg = NlinvConfig {
        n: 3,
        r: 4,
        ..Default::default()
    };
    assert!(nlinv(&y, &mask, &cfg, &L2Prior::new()).is_err());
    assert!(nlinv(&[], &mask, &NlinvConfig::default(), &L2Prior::new()).is_err());
}

#[test]
fn two_stage_with_centered_l2_equals_single_stage() {
    let size = 16;
    let (_, y, mask) = nlinv_case(size, 2.0);
    let base = NlinvConfig {
        n: 4,
        cg_iters: 400,
        fista_iters: 20000,
        ..Default::default()
    };
    let single = nlinv(&y, &mask, &NlinvConfig { r: 0, ..base.clone() }, &L2Prior::new()).unwrap();
    let x0 = ComplexGrid::filled(size, size, C::new(1.0, 0.0));
    let two = nlinv(&y, &mask, &NlinvConfig { r: base.n, ..base }, &L2Prior::centered(x0)).unwrap();
    let e = rel(&two.image, &single.image);
    let ec: f64 = two
        .coils
        .maps()
        .iter()
        .zip(single.coils.maps())
        .map(|(a, b)| rel(a, b))
        .fold(0.0, f64::max);
    assert!(e <= 1e-6 && ec <= 1e-6, "image {e:.3e}, coils {ec:.3e}");
}

#[test]
fn nlinv_output_is_gauge_normalized() {
    let (img, y, mask) = nlinv_case(16, 1.0);
    let out = nlinv(&y, &mask, &NlinvConfig { r: 0, ..Default::default() }, &L2Prior::new()).unwrap();
    let (combined, coils) = out.normalized().unwrap();
    for (a, b) in combined.abs().data().iter().zip(out.combined().data()) {
        assert!((a - b).abs() < 1e-12);
    }
    // the model x c_j is unchanged
    for (cn, c) in coils.maps().iter().zip(out.coils.maps()) {
        assert!(combined.hadamard(cn).sub(&out.image.hadamard(c)).norm() < 1e-9 * img.norm());
    }
}
