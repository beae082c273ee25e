use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use super::coils::lowpass_random_field;
use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    SheppLogan,
    RandomEllipses,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp-logan" => Ok(Self::SheppLogan),
            "random-ellipses" => Ok(Self::RandomEllipses),
            other => Err(Error::arg(format!("unknown phantom kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseModel {
    None,
    SmoothRandom,
}

impl FromStr for PhaseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "smooth-random" => Ok(Self::SmoothRandom),
            other => Err(Error::arg(format!("unknown phase model `{other}`"))),
        }
    }
}

/// Spectral support of the random phase field.
const PHASE_BAND: f64 = 0.08;

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    intensity: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    theta: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

// modified Shepp-Logan (Toft): intensity, a, b, x0, y0, angle in degrees
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

fn shepp_logan() -> Vec<Ellipse> {
    SHEPP_LOGAN
        .iter()
        .map(|e| Ellipse {
            intensity: e[0],
            a: e[1],
            b: e[2],
            x0: e[3],
            y0: e[4],
            theta: e[5].to_radians(),
        })
        .collect()
}

fn random_ellipses<R: Rng + ?Sized>(rng: &mut R) -> Vec<Ellipse> {
    let mut out = vec![Ellipse {
        intensity: rng.random_range(0.4..0.8),
        a: rng.random_range(0.6..0.85),
        b: rng.random_range(0.6..0.85),
        x0: rng.random_range(-0.05..0.05),
        y0: rng.random_range(-0.05..0.05),
        theta: rng.random_range(0.0..PI),
    }];
    let count = rng.random_range(4..9);
    for _ in 0..count {
        let sign = if rng.random_bool(0.35) { -1.0 } else { 1.0 };
        out.push(Ellipse {
            intensity: sign * rng.random_range(0.1..0.5),
            a: rng.random_range(0.06..0.35),
            b: rng.random_range(0.06..0.35),
            x0: rng.random_range(-0.45..0.45),
            y0: rng.random_range(-0.45..0.45),
            theta: rng.random_range(0.0..PI),
        });
    }
    out
}

fn rasterize(rows: usize, cols: usize, ellipses: &[Ellipse]) -> RealGrid {
    let mut img = RealGrid::from_fn(rows, cols, |r, c| {
        let x = -1.0 + 2.0 * (c as f64 + 0.5) / cols as f64;
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / rows as f64;
        ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum::<f64>()
            .max(0.0)
    });
    let max = img.max();
    if max > 0.0 {
        img.data_mut().iter_mut().for_each(|v| *v /= max);
    }
    img
}

/// Smooth random phase map with values in `(-pi, pi]`.
pub fn smooth_phase<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> RealGrid {
    let field = lowpass_random_field(rows, cols, PHASE_BAND, rng).map(|v| v.re);
    let peak = field.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    field.map(|&v| {
        let phi = if peak > 0.0 { PI * v / peak } else { 0.0 };
        if phi <= -PI {
            PI
        } else {
            phi
        }
    })
}

/// Piecewise-constant test object with magnitude in `[0, 1]` (max exactly 1).
pub fn phantom(
    rows: usize,
    cols: usize,
    kind: PhantomKind,
    phase: PhaseModel,
    seed: u64,
) -> Result<ComplexGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::arg("phantom extent must be positive"));
    }
    let ellipses = match kind {
        PhantomKind::SheppLogan => shepp_logan(),
        PhantomKind::RandomEllipses => random_ellipses(&mut rng::stream(seed, 0)),
    };
    let magnitude = rasterize(rows, cols, &ellipses);
    Ok(match phase {
        PhaseModel::None => ComplexGrid::from_real(&magnitude),
        PhaseModel::SmoothRandom => {
            let phi = smooth_phase(rows, cols, &mut rng::stream(seed, 1));
            magnitude.zip_map(&phi, |&m, &p| Complex64::from_polar(m, p))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shepp_logan_is_real_with_unit_max() {
        let p = phantom(64, 64, PhantomKind::SheppLogan, PhaseModel::None, 0).unwrap();
        assert!(p.data().iter().all(|v| v.im == 0.0 && v.re >= 0.0));
        assert!((p.max_abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_ellipses_deterministic_and_normalized() {
        let a = phantom(
            32,
            32,
            PhantomKind::RandomEllipses,
            PhaseModel::SmoothRandom,
            9,
        )
        .unwrap();
        let b = phantom(
            32,
            32,
            PhantomKind::RandomEllipses,
            PhaseModel::SmoothRandom,
            9,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!((a.max_abs() - 1.0).abs() < 1e-12);
        assert!(a.data().iter().all(|v| v.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn phase_in_half_open_interval() {
        let phi = smooth_phase(32, 32, &mut rng::stream(4, 4));
        assert!(phi.data().iter().all(|&p| p > -PI && p <= PI));
    }

    #[test]
    fn unknown_kind_is_argument_error() {
        assert!(matches!(
            "cube".parse::<PhantomKind>(),
            Err(Error::Argument(_))
        ));
    }
}
