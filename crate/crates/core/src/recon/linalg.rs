//! Iterative solvers over stacks of complex grids.

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{stack_dot, stack_norm, ComplexGrid};
use crate::rng;

pub type Stack = Vec<ComplexGrid>;

pub fn zeros_like(s: &[ComplexGrid]) -> Stack {
    s.iter()
        .map(|g| ComplexGrid::zeros(g.rows(), g.cols()))
        .collect()
}

/// `y += a * x`
pub fn axpy(y: &mut [ComplexGrid], a: Complex64, x: &[ComplexGrid]) {
    for (yy, xx) in y.iter_mut().zip(x) {
        yy.axpy(a, xx);
    }
}

pub fn scale(x: &[ComplexGrid], a: f64) -> Stack {
    x.iter().map(|g| g.scale(a)).collect()
}

pub fn sub(a: &[ComplexGrid], b: &[ComplexGrid]) -> Stack {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub fn all_finite(x: &[ComplexGrid]) -> bool {
    x.iter().all(|g| g.is_finite())
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Stack,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradients for a Hermitian positive (semi)definite operator.
/// Stops at `||b - A x|| <= tol ||b||` or after `max_iter` iterations.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[ComplexGrid]) -> Result<Stack>,
    b: &[ComplexGrid],
    x0: Option<Stack>,
    max_iter: usize,
    tol: f64,
) -> Result<CgOutcome> {
    let bnorm = stack_norm(b);
    let mut x = x0.unwrap_or_else(|| zeros_like(b));
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: zeros_like(b),
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let ax = apply(&x)?;
    let mut r = sub(b, &ax);
    let mut p = r.clone();
    let mut rr = stack_dot(&r, &r).re;
    let mut it = 0;
    while it < max_iter && rr.sqrt() > tol * bnorm {
        let ap = apply(&p)?;
        let pap = stack_dot(&p, &ap).re;
        if !(pap > 0.0) {
            break;
        }
        let a = rr / pap;
        axpy(&mut x, a.into(), &p);
        axpy(&mut r, (-a).into(), &ap);
        let rr_new = stack_dot(&r, &r).re;
        let beta = rr_new / rr;
        for (pp, rv) in p.iter_mut().zip(&r) {
            *pp = rv.add(&pp.scale(beta));
        }
        rr = rr_new;
        it += 1;
        if !rr.is_finite() {
            return Err(Error::Numerical(format!(
                "conjugate gradients diverged at iteration {it}"
            )));
        }
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        rel_residual: rr.sqrt() / bnorm,
    })
}

/// CG that warns when the requested tolerance was not reached.
pub fn solve_cg(
    apply: impl FnMut(&[ComplexGrid]) -> Result<Stack>,
    b: &[ComplexGrid],
    max_iter: usize,
    tol: f64,
) -> Result<Stack> {
    let out = conjugate_gradient(apply, b, None, max_iter, tol)?;
    if out.rel_residual > tol {
        warn!(
            "conjugate gradients stopped after {} iterations at relative residual {:.3e}",
            out.iterations, out.rel_residual
        );
    }
    Ok(out.x)
}

/// Largest eigenvalue estimate of a Hermitian positive operator, from a
/// fixed-seed random start.
pub fn power_iteration(
    mut apply: impl FnMut(&[ComplexGrid]) -> Result<Stack>,
    template: &[ComplexGrid],
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let mut r = rng::stream(seed, 0x5eed);
    let mut v: Stack = template
        .iter()
        .map(|g| rng::complex_normal_grid(g.rows(), g.cols(), &mut r))
        .collect();
    let n = stack_norm(&v);
    v = scale(&v, 1.0 / n);
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let w = apply(&v)?;
        lambda = stack_dot(&v, &w).re;
        let n = stack_norm(&w);
        if n == 0.0 {
            return Ok(0.0);
        }
        v = scale(&w, 1.0 / n);
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: Vec<f64>) -> impl FnMut(&[ComplexGrid]) -> Result<Stack> {
        move |x: &[ComplexGrid]| {
            Ok(vec![ComplexGrid::from_vec(
                x[0].rows(),
                x[0].cols(),
                x[0].data().iter().zip(&d).map(|(v, s)| v * s).collect(),
            )
            .unwrap()])
        }
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let d: Vec<f64> = (0..16).map(|i| 1.0 + i as f64).collect();
        let b = vec![rng::complex_normal_grid(4, 4, &mut rng::stream(1, 0))];
        let out = conjugate_gradient(diag_op(d.clone()), &b, None, 100, 1e-12).unwrap();
        for ((x, bb), s) in out.x[0].data().iter().zip(b[0].data()).zip(&d) {
            assert!((x * s - bb).norm() < 1e-10);
        }
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let d: Vec<f64> = (0..16).map(|i| if i == 5 { 7.0 } else { 1.0 }).collect();
        let t = vec![ComplexGrid::zeros(4, 4)];
        let l = power_iteration(diag_op(d), &t, 60, 0).unwrap();
        assert!((l - 7.0).abs() < 1e-9);
    }
}
