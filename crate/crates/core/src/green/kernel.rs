//! One-dimensional kernel and the split spectral parameter.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Distance to ±2 below which a real argument counts as a band edge.
pub const BAND_EDGE_TOL: f64 = 1e-13;

/// A complex spectral parameter stored as `base + delta`, where `base` is an
/// exactly representable reference value and `delta` carries the small,
/// precisely computed remainder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectral {
    pub base: f64,
    pub delta: Complex64,
}

impl Spectral {
    pub fn new(base: f64, delta: Complex64) -> Self {
        Spectral { base, delta }
    }

    /// E + iε.
    pub fn energy(e: f64, eps: f64) -> Self {
        Spectral::new(e, Complex64::new(0.0, eps))
    }

    pub fn value(&self) -> Complex64 {
        self.delta + self.base
    }

    pub fn re(&self) -> f64 {
        self.base + self.delta.re
    }

    pub fn im(&self) -> f64 {
        self.delta.im
    }

    /// `self - c` for an exactly representable shift `c`.
    pub fn minus(&self, c: f64) -> Complex64 {
        self.delta + (self.base - c)
    }
}

/// Decaying root ρ of ρ + 1/ρ = w together with ρ - 1/ρ, given the precise
/// differences `w - 2` and `w + 2`. On the real band the boundary value with
/// |ρ| = 1, Im ρ > 0 is taken. Only an exact band edge is rejected here.
pub fn h1_root(w: Complex64, wm2: Complex64, wp2: Complex64) -> Result<(Complex64, Complex64)> {
    if w.im == 0.0 {
        if wm2.re == 0.0 || wp2.re == 0.0 {
            return Err(Error::BandEdge { w: w.re });
        }
        if wm2.re < 0.0 && wp2.re > 0.0 {
            let sq = (-wm2.re * wp2.re).sqrt();
            let root = Complex64::new(0.5 * w.re, 0.5 * sq);
            return Ok((root, Complex64::new(0.0, sq)));
        }
    }
    let r = wm2.sqrt() * wp2.sqrt();
    if r == Complex64::new(0.0, 0.0) {
        return Err(Error::BandEdge { w: w.re });
    }
    let s1 = w + r;
    let s2 = w - r;
    if s1.norm_sqr() >= s2.norm_sqr() {
        Ok((2.0 / s1, -r))
    } else {
        Ok((2.0 / s2, r))
    }
}

/// Solution of h(x+1) + h(x-1) - w h(x) = δ_{x,0} that decays, or is the
/// outgoing boundary value for real w in (-2, 2).
pub fn h1(x: i64, w: Complex64) -> Result<Complex64> {
    if w.im == 0.0 && ((w.re - 2.0).abs() < BAND_EDGE_TOL || (w.re + 2.0).abs() < BAND_EDGE_TOL) {
        return Err(Error::BandEdge { w: w.re });
    }
    let (root, denom) = h1_root(w, w - 2.0, w + 2.0)?;
    Ok(power(root, x.unsigned_abs()) / denom)
}

/// The one-dimensional outgoing Green's function G₁(x; z) = -h1(x; -z).
pub fn green_1d(x: i64, z: Spectral) -> Result<Complex64> {
    let (root, denom) = green_1d_root(z)?;
    Ok(-power(root, x.unsigned_abs()) / denom)
}

/// (ρ, ρ - 1/ρ) for w = -z.
pub fn green_1d_root(z: Spectral) -> Result<(Complex64, Complex64)> {
    let w = -z.value();
    h1_root(w, -z.minus(-2.0), -z.minus(2.0))
}

/// ρⁿ by binary powering.
pub fn power(root: Complex64, n: u64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut b = root;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        e >>= 1;
        if e > 0 {
            b *= b;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn defect(w: Complex64, x: i64) -> f64 {
        let d = if x == 0 { 1.0 } else { 0.0 };
        (h1(x + 1, w).unwrap() + h1(x - 1, w).unwrap() - w * h1(x, w).unwrap() - d).norm()
    }

    #[test]
    fn centre_of_band() {
        let w = Complex64::new(0.0, 0.0);
        assert!((h1(0, w).unwrap() - Complex64::new(0.0, -0.5)).norm() < 1e-16);
        assert!((h1(1, w).unwrap() - Complex64::new(0.5, 0.0)).norm() < 1e-16);
        for x in -6..=6 {
            assert!(defect(w, x) < 1e-15);
        }
    }

    #[test]
    fn outside_band_is_real_and_decays() {
        let w = Complex64::new(3.0, 0.0);
        let rate = (1.5f64).acosh();
        for x in -8i64..=8 {
            let v = h1(x, w).unwrap();
            assert_eq!(v.im, 0.0);
            assert!(defect(w, x) < 1e-14);
            let ratio = h1(x.abs() + 1, w).unwrap().re / v.re;
            assert!((ratio - (-rate).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn in_band_closed_form() {
        let w = Complex64::new(1.0, 0.0);
        let kappa = PI / 3.0;
        for x in -7i64..=7 {
            let want = Complex64::from_polar(1.0, kappa * x.abs() as f64) / Complex64::new(0.0, 2.0 * kappa.sin());
            assert!((h1(x, w).unwrap() - want).norm() < 1e-14);
            assert!(defect(w, x) < 1e-14);
        }
    }

    #[test]
    fn boundary_value_is_limit_from_below() {
        for a in [-1.7, -0.3, 0.0, 0.9, 1.99] {
            let exact = h1(5, Complex64::new(a, 0.0)).unwrap();
            let near = h1(5, Complex64::new(a, -1e-10)).unwrap();
            assert!((exact - near).norm() < 1e-6, "a = {a}");
        }
    }

    #[test]
    fn band_edges_are_rejected() {
        assert!(matches!(h1(0, Complex64::new(2.0, 0.0)), Err(Error::BandEdge { .. })));
        assert!(matches!(h1(3, Complex64::new(-2.0, 0.0)), Err(Error::BandEdge { .. })));
        assert!(h1(0, Complex64::new(2.0, -1e-3)).is_ok());
    }

    #[test]
    fn complex_argument_defect() {
        for w in [
            Complex64::new(0.4, -0.2),
            Complex64::new(-2.5, -1e-3),
            Complex64::new(2.0, -0.5),
        ] {
            for x in -5..=5 {
                assert!(defect(w, x) < 1e-13);
            }
        }
    }

    #[test]
    fn one_dimensional_green_defect() {
        for e in [-1.5, -0.2, 0.0, 1.0, 1.9] {
            for eps in [0.0, 0.1, 1e-3] {
                let z = Spectral::energy(e, eps);
                for x in -5i64..=5 {
                    let g = |n| green_1d(n, z).unwrap();
                    let d = if x == 0 { 1.0 } else { 0.0 };
                    let r = -g(x + 1) - g(x - 1) - z.value() * g(x) - d;
                    assert!(r.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn power_matches_powi() {
        let r = Complex64::from_polar(0.97, 1.234);
        for n in [0u64, 1, 2, 7, 64, 301] {
            assert!((power(r, n) - r.powi(n as i32)).norm() < 1e-13);
        }
    }
}
