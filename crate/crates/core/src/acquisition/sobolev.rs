use crate::error::{Error, Result};
use crate::grid::{centered_coord, RealGrid};

/// k-space weight `w(k) = (1 + a |k|^2)^(l/2)` penalizing rough coil maps.
#[derive(Clone, Debug)]
pub struct SobolevWeight {
    w: RealGrid,
    a: f64,
    l: f64,
}

pub const DEFAULT_SOBOLEV_A: f64 = 220.0;
pub const DEFAULT_SOBOLEV_L: f64 = 32.0;

impl SobolevWeight {
    pub fn weights(&self) -> &RealGrid {
        &self.w
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

pub fn sobolev_weight(rows: usize, cols: usize, a: f64, l: f64) -> Result<SobolevWeight> {
    if !(a >= 0.0) || !(l >= 0.0) {
        return Err(Error::arg(format!(
            "Sobolev parameters must be nonnegative (a={a}, l={l})"
        )));
    }
    let w = RealGrid::from_fn(rows, cols, |r, c| {
        let kr = centered_coord(r, rows);
        let kc = centered_coord(c, cols);
        (1.0 + a * (kr * kr + kc * kc)).powf(0.5 * l)
    });
    Ok(SobolevWeight { w, a, l })
}
