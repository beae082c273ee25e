use magprior::acquisition::*;
use magprior::grid::{dft_centered, idft_centered, stack_dot, ComplexGrid};
use magprior::rng;
use num_complex::Complex64;
use proptest::prelude::*;

fn random_stack(nc: usize, rows: usize, cols: usize, seed: u64, tag: u64) -> Vec<ComplexGrid> {
    let mut r = rng::stream(seed, tag);
    (0..nc)
        .map(|_| rng::complex_normal_grid(rows, cols, &mut r))
        .collect()
}

// direct-summation centered DFT along both axes
fn dft_direct(x: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let (rows, cols) = x.shape();
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    ComplexGrid::from_fn(rows, cols, |kr, kc| {
        let mut acc = Complex64::default();
        for r in 0..rows {
            for c in 0..cols {
                let ph = 2.0
                    * std::f64::consts::PI
                    * (((kr as f64 - (rows / 2) as f64) * (r as f64 - (rows / 2) as f64))
                        / rows as f64
                        + ((kc as f64 - (cols / 2) as f64) * (c as f64 - (cols / 2) as f64))
                            / cols as f64);
                acc += *x.get(r, c) * Complex64::from_polar(1.0, sign * ph);
            }
        }
        acc * norm
    })
}

#[test]
fn fft_matches_direct_summation() {
    for (rows, cols) in [(8, 8), (5, 6), (7, 4)] {
        let x = random_stack(1, rows, cols, 3, 0).remove(0);
        let fast = dft_centered(&x);
        let slow = dft_direct(&x, false);
        assert!(
            fast.sub(&slow).norm() < 1e-12 * slow.norm(),
            "{rows}x{cols}"
        );
        let back = idft_centered(&x);
        assert!(back.sub(&dft_direct(&x, true)).norm() < 1e-12 * x.norm());
    }
}

fn mask_for(seed: u64) -> SamplingMask {
    make_mask_poisson(32, 32, 3.0, 8, 8, seed).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

#[test]
fn forward_adjoint_dot_test() {
    for trial in 0..20 {
        let seed = 100 + trial;
        let coils = CoilSet::new(random_stack(4, 32, 32, seed, 1)).unwrap();
        let mask = mask_for(seed);
        let x = random_stack(1, 32, 32, seed, 2).remove(0);
        let y = random_stack(4, 32, 32, seed, 3);
        let lhs = stack_dot(&forward(&x, &coils, &mask, 0.0, 0).unwrap(), &y);
        let rhs = x.dot(&adjoint(&y, &coils, &mask).unwrap());
        assert!(rel(lhs, rhs) < 1e-12, "trial {trial}: {lhs} vs {rhs}");
    }
}

#[test]
fn jacobian_dot_test() {
    for trial in 0..20 {
        let seed = 200 + trial;
        let x = random_stack(1, 32, 32, seed, 0).remove(0);
        let c = random_stack(4, 32, 32, seed, 1);
        let dx = random_stack(1, 32, 32, seed, 2).remove(0);
        let dc = random_stack(4, 32, 32, seed, 3);
        let r = random_stack(4, 32, 32, seed, 4);
        let mask = mask_for(seed);
        let lhs = stack_dot(&jacobian_apply(&x, &c, &dx, &dc, &mask).unwrap(), &r);
        let (ax, ac) = jacobian_adjoint(&x, &c, &r, &mask).unwrap();
        let rhs = dx.dot(&ax) + stack_dot(&dc, &ac);
        assert!(rel(lhs, rhs) < 1e-12, "trial {trial}");
    }
}

#[test]
fn jacobian_matches_finite_difference_of_bilinear_model() {
    let x = random_stack(1, 16, 16, 7, 0).remove(0);
    let c = random_stack(3, 16, 16, 7, 1);
    let dx = random_stack(1, 16, 16, 7, 2).remove(0);
    let dc = random_stack(3, 16, 16, 7, 3);
    let mask = SamplingMask::full(16, 16);
    let h = 1e-6;
    let plus = forward_model(
        &x.add(&dx.scale(h)),
        &c.iter()
            .zip(&dc)
            .map(|(a, b)| a.add(&b.scale(h)))
            .collect::<Vec<_>>(),
        &mask,
    )
    .unwrap();
    let minus = forward_model(
        &x.sub(&dx.scale(h)),
        &c.iter()
            .zip(&dc)
            .map(|(a, b)| a.sub(&b.scale(h)))
            .collect::<Vec<_>>(),
        &mask,
    )
    .unwrap();
    let j = jacobian_apply(&x, &c, &dx, &dc, &mask).unwrap();
    for ((p, m), jj) in plus.iter().zip(&minus).zip(&j) {
        let fd = p.sub(m).scale(0.5 / h);
        assert!(fd.sub(jj).norm() < 1e-6 * jj.norm());
    }
}

#[test]
fn forward_noise_is_deterministic() {
    let img = phantom(16, 16, PhantomKind::SheppLogan, PhaseModel::None, 0).unwrap();
    let coils = simulate_coils(16, 16, 2, 0.3, 1).unwrap();
    let mask = SamplingMask::full(16, 16);
    let a = forward(&img, &coils, &mask, 0.05, 9).unwrap();
    let b = forward(&img, &coils, &mask, 0.05, 9).unwrap();
    let c = forward(&img, &coils, &mask, 0.05, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dft_round_trip(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let x = random_stack(1, rows, cols, seed, 0).remove(0);
        let back = idft_centered(&dft_centered(&x));
        prop_assert!(back.sub(&x).norm() <= 1e-12 * x.norm().max(1e-300));
        let k = dft_centered(&x);
        prop_assert!((k.norm() - x.norm()).abs() <= 1e-12 * x.norm());
    }

    #[test]
    fn adjoint_identity_random_shapes(rows in 2usize..10, cols in 2usize..10, nc in 1usize..4, seed in any::<u64>()) {
        let coils = CoilSet::new(random_stack(nc, rows, cols, seed, 1)).unwrap();
        let mask = SamplingMask::from_grid(&ComplexGrid::from_fn(rows, cols, |r, c| {
            Complex64::new(!(r * 7 + c * 3 + seed as usize).is_multiple_of(3) as u8 as f64, 0.0)
        }));
        let x = random_stack(1, rows, cols, seed, 2).remove(0);
        let y = random_stack(nc, rows, cols, seed, 3);
        let lhs = stack_dot(&forward(&x, &coils, &mask, 0.0, 0).unwrap(), &y);
        let rhs = x.dot(&adjoint(&y, &coils, &mask).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(rhs.norm()).max(1e-300));
    }

    #[test]
    fn mask_fraction_within_band_when_calibration_small(accel in 2usize..6, seed in any::<u64>()) {
        let m = make_mask_poisson(64, 64, accel as f64, 8, 8, seed % 1000).unwrap();
        let f = m.fraction_kept();
        let r = accel as f64;
        prop_assert!(f >= 0.8 / r && f <= 1.25 / r, "fraction {f} for accel {r}");
        let m1 = make_mask_1d(64, 64, accel, 4).unwrap();
        let f1 = m1.fraction_kept();
        prop_assert!(f1 >= 0.8 / r && f1 <= 1.25 / r);
    }
}
