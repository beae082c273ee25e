use magprior::acquisition::{phantom, PhaseModel, PhantomKind};
use magprior::grid::{ComplexGrid, RealGrid};
use magprior::phase_aug::*;
use magprior::priors::*;
use magprior::rng;
use magprior::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn magnitude(size: usize, seed: u64) -> RealGrid {
    phantom(size, size, PhantomKind::RandomEllipses, PhaseModel::None, seed).unwrap().abs()
}

fn gauss_prior(size: usize, sched: &NoiseSchedule) -> GaussianPrior {
    GaussianPrior::with_schedule(GaussianPriorParams::smooth(size, size, 1.0, 1000.0).unwrap(), sched.clone())
}

fn small_config() -> AugmentConfig {
    AugmentConfig {
        schedule: schedule(30, DEFAULT_SIGMA_MIN, DEFAULT_SIGMA_MAX).unwrap(),
        samples: 3,
        seed: 5,
        ..Default::default()
    }
}

fn rel_magnitude_error(x: &ComplexGrid, m: &RealGrid) -> f64 {
    let d: f64 = x.abs().data().iter().zip(m.data()).map(|(a, b)| (a - b).powi(2)).sum();
    d.sqrt() / m.norm()
}

#[test]
fn scalar_gradient_matches_finite_differences() {
    let m = RealGrid::filled(1, 1, 0.7);
    let x0 = Complex64::new(0.3, -0.4);
    let eps = 3.0;
    let f = |v: Complex64| -eps * (0.7 - v.norm()).powi(2);
    let h = 1e-6;
    let fd = Complex64::new(
        (f(x0 + h) - f(x0 - h)) / (2.0 * h),
        (f(x0 + Complex64::new(0.0, h)) - f(x0 - Complex64::new(0.0, h))) / (2.0 * h),
    );
    let g = magnitude_loglik_grad(&ComplexGrid::filled(1, 1, x0), &m, eps).unwrap().data()[0];
    assert!((g - fd).norm() < 1e-8, "{g} vs {fd}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn likelihood_gradient_commutes_with_global_phase(seed in any::<u64>(), phi in -3.2f64..3.2, eps in 0.0f64..1e4) {
        let x = rng::complex_normal_grid(6, 6, &mut rng::stream(seed, 0));
        let m = rng::complex_normal_grid(6, 6, &mut rng::stream(seed, 1)).abs();
        let rot = Complex64::from_polar(1.0, phi);
        let a = magnitude_loglik_grad(&x.map(|v| v * rot), &m, eps).unwrap();
        let b = magnitude_loglik_grad(&x, &m, eps).unwrap().map(|v| v * rot);
        prop_assert!(a.sub(&b).norm() <= 1e-9 * b.norm().max(1.0));
    }

    #[test]
    fn likelihood_gradient_is_radial(seed in any::<u64>(), eps in 0.1f64..100.0) {
        let x = rng::complex_normal_grid(5, 5, &mut rng::stream(seed, 2));
        let m = rng::complex_normal_grid(5, 5, &mut rng::stream(seed, 3)).abs();
        let g = magnitude_loglik_grad(&x, &m, eps).unwrap();
        for (gv, xv) in g.data().iter().zip(x.data()) {
            // g / (x/|x|) is real
            prop_assert!((gv * xv.conj()).im.abs() <= 1e-9 * (gv.norm() * xv.norm()).max(1e-12));
        }
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let m = magnitude(24, 1);
    let cfg = small_config();
    let prior = gauss_prior(24, &cfg.schedule);
    let a = augment(&m, &prior, &cfg).unwrap();
    let b = augment(&m, &prior, &cfg).unwrap();
    assert_eq!(a, b);
    let c = augment(&m, &prior, &AugmentConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn samples_differ_in_phase_and_agree_in_magnitude() {
    let m = magnitude(32, 2);
    let cfg = AugmentConfig { samples: 5, ..small_config() };
    let prior = gauss_prior(32, &cfg.schedule);
    let out = augment(&m, &prior, &cfg).unwrap();
    assert_eq!(out.len(), 5);
    let supp = support(&m, 0.05);
    for (i, a) in out.iter().enumerate() {
        assert!(rel_magnitude_error(a, &m) <= 0.05, "sample {i}: {}", rel_magnitude_error(a, &m));
        for b in &out[i + 1..] {
            assert!(phase_rms_difference(a, b, &supp).unwrap() > 0.0);
        }
    }
}

#[test]
fn smooth_prior_suppresses_high_frequency_phase() {
    let m = magnitude(32, 3);
    let cfg = AugmentConfig { samples: 2, ..small_config() };
    let prior = gauss_prior(32, &cfg.schedule);
    let supp = support(&m, 0.05);
    let init = phase_highband_energy(&initial_state(32, 32, &cfg, 0), &supp).unwrap();
    for x in augment(&m, &prior, &cfg).unwrap() {
        let e = phase_highband_energy(&x, &supp).unwrap();
        assert!(init >= 10.0 * e, "init {init:.3e}, sample {e:.3e}");
    }
}

#[test]
fn zero_epsilon_ignores_the_magnitude() {
    let cfg = AugmentConfig { epsilon: 0.0, samples: 1, ..small_config() };
    let prior = gauss_prior(16, &cfg.schedule);
    let a = augment(&magnitude(16, 4), &prior, &cfg).unwrap();
    let b = augment(&RealGrid::filled(16, 16, 0.5), &prior, &cfg).unwrap();
    assert_eq!(a, b);
}

struct Broken;

impl Prior for Broken {
    fn name(&self) -> &str {
        "broken"
    }

    fn score(&self, x: &ComplexGrid, _level: usize) -> magprior::Result<ComplexGrid> {
        Ok(x.map(|_| Complex64::new(f64::NAN, 0.0)))
    }
}

#[test]
fn nan_chain_reports_level_and_step() {
    let err = augment(&magnitude(8, 0), &Broken, &small_config()).unwrap_err();
    assert!(matches!(err, Error::Sampling { level: 1, step: 0, .. }), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let m = magnitude(8, 0);
    let prior = L2Prior::new();
    for cfg in [
        AugmentConfig { gamma: 0.0, ..small_config() },
        AugmentConfig { epsilon: -1.0, ..small_config() },
        AugmentConfig { steps_per_level: 0, ..small_config() },
    ] {
        assert!(matches!(augment(&m, &prior, &cfg), Err(Error::Argument(_))));
    }
    // a level-dependent prior must share the sampler schedule
    let other = gauss_prior(8, &schedule(10, 0.01, 0.3).unwrap());
    assert!(augment(&m, &other, &small_config()).is_err());
}
