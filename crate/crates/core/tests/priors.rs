use magprior::grid::{dft_centered, ComplexGrid};
use magprior::priors::*;
use magprior::rng;
use num_complex::Complex64;
use proptest::prelude::*;

fn noise(rows: usize, cols: usize, seed: u64) -> ComplexGrid {
    rng::complex_normal_grid(rows, cols, &mut rng::stream(seed, 0))
}

/// Central differences of `f` along the real and imaginary part of a few
/// pixels, returned as complex numbers `df/dre + i df/dim`.
fn real_gradient_fd(x: &ComplexGrid, f: impl Fn(&ComplexGrid) -> f64, pixels: &[(usize, usize)]) -> Vec<Complex64> {
    let h = 1e-6;
    pixels
        .iter()
        .map(|&(r, c)| {
            let mut parts = [0.0; 2];
            for (k, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
                let mut p = x.clone();
                *p.get_mut(r, c) += dir;
                let mut m = x.clone();
                *m.get_mut(r, c) -= dir;
                parts[k] = (f(&p) - f(&m)) / (2.0 * h);
            }
            Complex64::new(parts[0], parts[1])
        })
        .collect()
}

const PIXELS: [(usize, usize); 4] = [(0, 0), (3, 5), (7, 2), (6, 7)];

fn check_penalty_gradient(prior: &dyn Prior, x: &ComplexGrid, level: usize) {
    let fd = real_gradient_fd(x, |v| prior.penalty(v, level).unwrap(), &PIXELS);
    let s = prior.score(x, level).unwrap();
    for (g, &(r, c)) in fd.iter().zip(&PIXELS) {
        let expect = -*s.get(r, c);
        assert!(
            (g - expect).norm() <= 1e-6 * expect.norm().max(1.0),
            "{} at ({r},{c}): fd {g} vs -score {expect}",
            prior.name()
        );
    }
}

#[test]
fn l2_score_is_negative_penalty_gradient() {
    let x = noise(8, 8, 1);
    check_penalty_gradient(&L2Prior::new(), &x, 0);
    check_penalty_gradient(&L2Prior::centered(noise(8, 8, 2)), &x, 0);
}

#[test]
fn gaussian_score_is_negative_penalty_gradient() {
    let x = noise(8, 8, 3);
    let params = GaussianPriorParams::new(noise(8, 8, 4), GaussianPriorParams::smooth(8, 8, 2.0, 3.0).unwrap().precision().clone()).unwrap();
    check_penalty_gradient(&GaussianPrior::new(params.clone()), &x, 0);
    let sched = schedule(10, 0.01, 0.3).unwrap();
    check_penalty_gradient(&GaussianPrior::with_schedule(params, sched), &x, 4);
}

#[test]
fn smoothed_gaussian_score_is_half_log_density_gradient() {
    // the score is the conjugate gradient, half the real gradient
    let params = GaussianPriorParams::smooth(8, 8, 1.5, 2.0).unwrap();
    let x = noise(8, 8, 5);
    for sigma in [0.0, 0.1, 0.3] {
        let fd = real_gradient_fd(&x, |v| params.log_density(v, sigma).unwrap(), &PIXELS);
        let s = gaussian_score(&params, &x, sigma).unwrap();
        for (g, &(r, c)) in fd.iter().zip(&PIXELS) {
            let expect = *s.get(r, c) * 2.0;
            assert!((g - expect).norm() <= 1e-6 * expect.norm().max(1.0));
        }
    }
}

#[test]
fn gaussian_smoothed_score_matches_convolution_oracle() {
    // Convolving N(M, 1/(2p)) per real component with N(0, sigma^2/2) gives
    // precision 1/(1/p + sigma^2) per frequency of the unitary DFT.
    let params = GaussianPriorParams::smooth(6, 6, 4.0, 1.0).unwrap();
    let x = noise(6, 6, 6);
    let sigma = 0.2;
    let xs = dft_centered(&x);
    let expect: Vec<Complex64> = xs
        .data()
        .iter()
        .zip(params.precision().data())
        .map(|(v, p)| -v / (1.0 / p + sigma * sigma))
        .collect();
    let got = dft_centered(&gaussian_score(&params, &x, sigma).unwrap());
    for (a, b) in got.data().iter().zip(&expect) {
        assert!((a - b).norm() < 1e-12);
    }
}

fn prox_objective(prior: &dyn Prior, x: &ComplexGrid, z: &ComplexGrid, t: f64) -> f64 {
    x.sub(z).norm_sqr() / (2.0 * t) + prior.penalty(x, 0).unwrap()
}

#[test]
fn exact_proxes_satisfy_optimality() {
    let z = noise(8, 8, 7);
    let t = 0.7;
    let gauss = GaussianPrior::new(GaussianPriorParams::smooth(8, 8, 1.0, 4.0).unwrap());
    let smooth_priors: [&dyn Prior; 3] = [&L2Prior::new(), &L2Prior::centered(noise(8, 8, 8)), &gauss];
    for p in smooth_priors {
        assert!(p.has_exact_prox());
        let x = p.prox(&z, t, 0).unwrap();
        // (z - x) / t = grad R(x) = -score(x)
        let lhs = z.sub(&x).scale(1.0 / t);
        let rhs = p.score(&x, 0).unwrap().scale(-1.0);
        assert!(lhs.sub(&rhs).norm() < 1e-10 * rhs.norm().max(1.0), "{}", p.name());
    }
    // nonsmooth: compare the objective against random perturbations
    let wav = WaveletPrior::new(0.3);
    let x = wav.prox(&z, t, 0).unwrap();
    let f0 = prox_objective(&wav, &x, &z, t);
    for k in 0..50 {
        let d = noise(8, 8, 100 + k).scale(1e-3);
        assert!(prox_objective(&wav, &x.add(&d), &z, t) >= f0 - 1e-12);
    }
}

#[test]
fn l1_prox_fixed_point_is_zero_detail() {
    // a pure approximation-band image is left unchanged
    let z = ComplexGrid::filled(16, 16, Complex64::new(0.4, -0.2));
    let out = l1_wavelet_prox(&z, 10.0, 4).unwrap();
    assert!(out.sub(&z).norm() < 1e-12);
}

#[test]
fn haar_levels_stop_at_odd_extent() {
    let x = noise(12, 12, 9);
    // 12 -> 6 -> 3 stops after two levels
    let w4 = haar_forward(&x, 4).unwrap();
    let w2 = haar_forward(&x, 2).unwrap();
    assert!(w4.sub(&w2).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn haar_is_orthonormal(rp in 0u32..4, cp in 0u32..4, levels in 0usize..5, seed in any::<u64>()) {
        let rows = 3usize << rp;
        let cols = 5usize << cp;
        let x = noise(rows, cols, seed);
        let w = haar_forward(&x, levels).unwrap();
        prop_assert!((w.norm() - x.norm()).abs() < 1e-10 * x.norm());
        let back = haar_inverse(&w, levels).unwrap();
        prop_assert!(back.sub(&x).norm() < 1e-10 * x.norm());
    }

    #[test]
    fn soft_threshold_is_nonexpansive(ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0, bi in -3.0f64..3.0, th in 0.0f64..2.0) {
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let d = (soft_threshold(a, th) - soft_threshold(b, th)).norm();
        prop_assert!(d <= (a - b).norm() + 1e-12);
        prop_assert!(soft_threshold(a, th).norm() <= a.norm());
    }

    #[test]
    fn l1_wavelet_prox_is_nonexpansive(seed in any::<u64>(), th in 0.0f64..1.0) {
        let a = noise(16, 16, seed);
        let b = noise(16, 16, seed ^ 0x5555);
        let pa = l1_wavelet_prox(&a, th, 3).unwrap();
        let pb = l1_wavelet_prox(&b, th, 3).unwrap();
        prop_assert!(pa.sub(&pb).norm() <= a.sub(&b).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn gaussian_prox_is_nonexpansive(seed in any::<u64>(), t in 0.01f64..10.0, p0 in 0.1f64..5.0) {
        let prior = GaussianPrior::new(GaussianPriorParams::smooth(8, 8, p0, 2.0).unwrap());
        let a = noise(8, 8, seed);
        let b = noise(8, 8, seed.wrapping_add(1));
        let d = prior.prox(&a, t, 0).unwrap().sub(&prior.prox(&b, t, 0).unwrap()).norm();
        prop_assert!(d <= a.sub(&b).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn schedule_is_strictly_decreasing(n in 1usize..300, lo in 0.001f64..0.1, span in 0.01f64..1.0) {
        let hi = lo + span;
        let s = schedule(n, lo, hi).unwrap();
        prop_assert!((s.sigma(n) - lo).abs() < 1e-15);
        prop_assert!((s.sigma(0) - (lo + hi)).abs() < 1e-12);
        for i in 1..=n {
            prop_assert!(s.sigma(i) < s.sigma(i - 1));
        }
    }
}

#[test]
fn schedule_rejects_bad_bounds() {
    assert!(schedule(0, 0.01, 0.3).is_err());
    assert!(schedule(10, -0.1, 0.3).is_err());
}
