//! Periodic trapezoidal routes for ε > 0.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::kernel::{green_1d, Spectral};
use crate::error::{Error, Result};
use crate::lattice::LatticePoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TorusResult {
    pub value: Complex64,
    /// Points per axis of the accepted rule.
    pub n: usize,
    /// Change against the rule with n/2 points per axis.
    pub change: f64,
}

fn require_absorption(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "the torus route needs a positive absorption".into(),
        ))
    }
}

/// Trapezoidal sum over the first d-1 coordinates with the closed-form 1D
/// kernel in the last one, N points per axis.
fn reduced_sum(x: &LatticePoint, e: f64, eps: f64, n: usize) -> Result<Complex64> {
    let d = x.dim();
    let c = x.coords();
    let last = c[d - 1];
    let m = d - 1;
    let h = 2.0 * PI / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; m];
    loop {
        let mut phase = 0.0;
        let mut shift = 0.0;
        for (i, &j) in idx.iter().enumerate() {
            let k = h * j as f64;
            phase += k * c[i] as f64;
            shift += 2.0 * k.cos();
        }
        let z = Spectral::new(e, Complex64::new(shift, eps));
        acc += Complex64::from_polar(1.0, phase) * green_1d(last, z)?;
        let mut i = 0;
        loop {
            if i == m {
                return Ok(acc / (n as f64).powi(m as i32));
            }
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Trapezoidal sum of e^{ik·x}/(-φ(k) - E - iε) over the full torus.
fn direct_sum(x: &LatticePoint, e: f64, eps: f64, n: usize) -> Complex64 {
    let d = x.dim();
    let c = x.coords();
    let h = 2.0 * PI / n as f64;
    let z = Complex64::new(e, eps);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; d];
    loop {
        let mut phase = 0.0;
        let mut sym = 0.0;
        for (i, &j) in idx.iter().enumerate() {
            let k = h * j as f64;
            phase += k * c[i] as f64;
            sym += 2.0 * k.cos();
        }
        acc += Complex64::from_polar(1.0, phase) / (-sym - z);
        let mut i = 0;
        loop {
            if i == d {
                return acc / (n as f64).powi(d as i32);
            }
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn doubling(n0: usize, n_max: usize, tol: f64, mut f: impl FnMut(usize) -> Result<Complex64>) -> Result<TorusResult> {
    let mut n = n0.max(2);
    let mut prev = f(n)?;
    let mut change = f64::INFINITY;
    while n * 2 <= n_max {
        n *= 2;
        let cur = f(n)?;
        change = (cur - prev).norm();
        prev = cur;
        if change <= tol {
            return Ok(TorusResult { value: cur, n, change });
        }
    }
    Err(Error::QuadratureNotConverged { change, tol })
}

/// Dimensional-reduction route: doubles N from `n0` until the change is
/// below `tol`, failing once N would exceed `n_max`.
pub fn green_torus(x: &LatticePoint, e: f64, eps: f64, n0: usize, n_max: usize, tol: f64) -> Result<TorusResult> {
    require_absorption(eps)?;
    if x.dim() == 1 {
        let v = green_1d(x.coords()[0], Spectral::energy(e, eps))?;
        return Ok(TorusResult {
            value: v,
            n: 1,
            change: 0.0,
        });
    }
    doubling(n0, n_max, tol, |n| reduced_sum(x, e, eps, n))
}

/// Full d-dimensional trapezoidal route (cross-check only).
pub fn green_torus_direct(
    x: &LatticePoint,
    e: f64,
    eps: f64,
    n0: usize,
    n_max: usize,
    tol: f64,
) -> Result<TorusResult> {
    require_absorption(eps)?;
    doubling(n0, n_max, tol, |n| Ok(direct_sum(x, e, eps, n)))
}
