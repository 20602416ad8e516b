//! Recovery of the phased amplitude from pairs or triples of phaseless samples.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::FreeWaves;
use crate::lattice::{lattice_phase, reduce_angle, Direction, LatticePoint};
use crate::phaseless::PhaselessSample;

/// Default rejection threshold for |D|.
pub const DELTA_MIN: f64 = 1e-3;
/// |sin| below which a one-dimensional separation counts as degenerate.
pub const SEPARATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Thm21,
    Prop24,
    Prop25,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Thm21 => "thm21",
            Method::Prop24 => "prop24",
            Method::Prop25 => "prop25",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryResult {
    pub f_plus: Complex64,
    pub det_d: Complex64,
    pub abs_det: f64,
    /// Distance of the argument of D to πZ (one-dimensional methods: the
    /// smallest |sin| among the separations).
    pub arg_distance: f64,
    pub method: Method,
    pub s: Option<f64>,
    /// |g - conj(f)| when the 2×2 system is solved for an unconstrained pair (f, g).
    pub conjugate_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Recovery {
    Accepted(RecoveryResult),
    Rejected { abs_det: f64, threshold: f64 },
}

impl Recovery {
    /// Turns a near-singular determinant into an explicit rejection.
    pub fn classify(r: Result<RecoveryResult>) -> Result<Recovery> {
        match r {
            Ok(v) => Ok(Recovery::Accepted(v)),
            Err(Error::NearSingularD { abs_det, threshold }) => Ok(Recovery::Rejected { abs_det, threshold }),
            Err(e) => Err(e),
        }
    }

    pub fn accepted(&self) -> Option<&RecoveryResult> {
        match self {
            Recovery::Accepted(r) => Some(r),
            Recovery::Rejected { .. } => None,
        }
    }
}

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// dist(θ, πZ).
pub fn distance_to_pi_z(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    r.min(PI - r)
}

fn same_k(a: &PhaselessSample, b: &PhaselessSample) -> Result<()> {
    if a.k != b.k {
        return Err(Error::InvalidArgument(
            "samples were taken with different incident waves".into(),
        ));
    }
    if a.dim() != b.dim() || a.k.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Solves [[e^{-iφx}, e^{iφx}], [e^{-iφy}, e^{iφy}]] (f, g) = (bx, by)
/// without using g = conj(f); returns |g - conj(f)|.
fn conjugate_mismatch(phi_x: f64, phi_y: f64, bx: f64, by: f64) -> f64 {
    let m = Matrix2::new(cis(-phi_x), cis(phi_x), cis(-phi_y), cis(phi_y));
    match m
        .lu()
        .solve(&Vector2::new(Complex64::new(bx, 0.0), Complex64::new(by, 0.0)))
    {
        Some(v) => (v[1] - v[0].conj()).norm(),
        None => f64::INFINITY,
    }
}

/// D = 2i sin(θ) with θ = k·ζ + γx·x - γy·y, evaluated as the difference of
/// the reduced phases k·y - γy·y and k·x - γx·x. Returns (D, θ).
pub fn det_d_with(x: &LatticePoint, y: &LatticePoint, k: &[f64], gx: &[f64], gy: &[f64]) -> (Complex64, f64) {
    let px = reduce_angle(lattice_phase(k, x) - lattice_phase(gx, x));
    let py = reduce_angle(lattice_phase(k, y) - lattice_phase(gy, y));
    let theta = reduce_angle(py - px);
    (Complex64::new(0.0, 2.0 * theta.sin()), theta)
}

/// D for the measurement pair (x, y) with the outgoing points of `free`.
pub fn det_d(x: &LatticePoint, y: &LatticePoint, k: &[f64], free: &FreeWaves) -> Result<(Complex64, f64)> {
    let gx = free.outgoing_point(&x.direction()?)?;
    let gy = free.outgoing_point(&y.direction()?)?;
    Ok(det_d_with(x, y, k, &gx, &gy))
}

/// The limiting argument (k - k*(ω))·ζ, reduced to (-π, π].
pub fn limiting_argument(k: &[f64], omega: &Direction, zeta: &LatticePoint, free: &FreeWaves) -> Result<f64> {
    let g = free.outgoing_point(omega)?;
    let diff: Vec<f64> = k.iter().zip(&g).map(|(a, b)| a - b).collect();
    Ok(lattice_phase(&diff, zeta))
}

/// f⁺ from samples at x and y with explicitly supplied outgoing points.
pub fn recover_thm21_with(
    ax: &PhaselessSample,
    ay: &PhaselessSample,
    k: &[f64],
    gx: &[f64],
    gy: &[f64],
    delta_min: f64,
) -> Result<RecoveryResult> {
    let (x, y) = (&ax.x, &ay.x);
    let px = reduce_angle(lattice_phase(k, x) - lattice_phase(gx, x));
    let py = reduce_angle(lattice_phase(k, y) - lattice_phase(gy, y));
    let (det, theta) = det_d_with(x, y, k, gx, gy);
    let abs_det = det.norm();
    if !(abs_det >= delta_min) {
        return Err(Error::NearSingularD {
            abs_det,
            threshold: delta_min,
        });
    }
    let f = (cis(py) * ax.a - cis(px) * ay.a) / det;
    Ok(RecoveryResult {
        f_plus: f,
        det_d: det,
        abs_det,
        arg_distance: distance_to_pi_z(theta),
        method: Method::Thm21,
        s: ax.s,
        conjugate_mismatch: conjugate_mismatch(px, py, ax.a, ay.a),
    })
}

/// f⁺(k, ω) from a(x, k) and a(y, k) with the outgoing points k*(x̂), k*(ŷ).
pub fn recover_thm21(
    ax: &PhaselessSample,
    ay: &PhaselessSample,
    free: &FreeWaves,
    delta_min: f64,
) -> Result<RecoveryResult> {
    same_k(ax, ay)?;
    let d = ax.dim();
    if d < 2 {
        return Err(Error::InvalidArgument("this recovery needs d >= 2".into()));
    }
    if free.energy().dim() != d {
        return Err(Error::DimensionMismatch {
            expected: free.energy().dim(),
            found: d,
        });
    }
    if !free.energy().convex_regime() {
        return Err(Error::NonConvexRegime {
            energy: free.energy().value(),
            dim: d,
        });
    }
    let gx = free.outgoing_point(&ax.x.direction()?)?;
    let gy = free.outgoing_point(&ay.x.direction()?)?;
    recover_thm21_with(ax, ay, &ax.k, &gx, &gy, delta_min)
}

/// Change of the recovered f⁺ when k and both outgoing points are shifted
/// by 2πz.
pub fn gauge_shift_difference(
    ax: &PhaselessSample,
    ay: &PhaselessSample,
    free: &FreeWaves,
    z: &[i64],
    delta_min: f64,
) -> Result<f64> {
    same_k(ax, ay)?;
    if z.len() != ax.dim() {
        return Err(Error::DimensionMismatch {
            expected: ax.dim(),
            found: z.len(),
        });
    }
    let gx = free.outgoing_point(&ax.x.direction()?)?;
    let gy = free.outgoing_point(&ay.x.direction()?)?;
    let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(z).map(|(a, n)| a + 2.0 * PI * *n as f64).collect() };
    let base = recover_thm21_with(ax, ay, &ax.k, &gx, &gy, delta_min)?;
    let moved = recover_thm21_with(ax, ay, &shift(&ax.k), &shift(&gx), &shift(&gy), delta_min)?;
    Ok((base.f_plus - moved.f_plus).norm())
}

pub fn gauge_shift_test(
    ax: &PhaselessSample,
    ay: &PhaselessSample,
    free: &FreeWaves,
    z: &[i64],
    delta_min: f64,
) -> Result<bool> {
    Ok(gauge_shift_difference(ax, ay, free, z, delta_min)? < 1e-12)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceptionalSetReport {
    pub omegas: Vec<Direction>,
    pub distances: Vec<f64>,
    pub deltas: Vec<f64>,
    pub fractions: Vec<f64>,
}

pub fn default_deltas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

/// dist((k - k*(ω))·ζ, πZ) over a direction grid, with the fraction of
/// directions below each δ.
pub fn exceptional_scan(
    k: &[f64],
    zeta: &LatticePoint,
    free: &FreeWaves,
    omegas: &[Direction],
    deltas: &[f64],
) -> Result<ExceptionalSetReport> {
    if !free.energy().convex_regime() {
        return Err(Error::NonConvexRegime {
            energy: free.energy().value(),
            dim: free.energy().dim(),
        });
    }
    let distances: Vec<f64> = omegas
        .iter()
        .map(|w| limiting_argument(k, w, zeta, free).map(distance_to_pi_z))
        .collect::<Result<_>>()?;
    let n = distances.len().max(1) as f64;
    let fractions = deltas
        .iter()
        .map(|&dl| distances.iter().filter(|&&v| v < dl).count() as f64 / n)
        .collect();
    Ok(ExceptionalSetReport {
        omegas: omegas.to_vec(),
        distances,
        deltas: deltas.to_vec(),
        fractions,
    })
}

fn d1_inputs(samples: &[&PhaselessSample]) -> Result<f64> {
    for s in samples {
        same_k(samples[0], s)?;
        if s.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: s.dim(),
            });
        }
        if s.x.coords()[0] >= 0 {
            return Err(Error::InvalidArgument(format!(
                "measurement points must be negative, got {}",
                s.x.coords()[0]
            )));
        }
    }
    let k = samples[0].k[0];
    if !(k > 0.0 && k < PI) {
        return Err(Error::InvalidArgument(format!("expected 0 < k < pi, got {k}")));
    }
    Ok(k)
}

fn sep_sine(k: f64, n: i64) -> f64 {
    lattice_phase(&[k], &LatticePoint::new(vec![n])).sin()
}

/// s₂₁ from two samples left of the support, given an estimate of |s₂₁|².
pub fn recover_prop24(ax: &PhaselessSample, ay: &PhaselessSample, s21_sq: f64) -> Result<RecoveryResult> {
    let k = d1_inputs(&[ax, ay])?;
    let (x, y) = (ax.x.coords()[0], ay.x.coords()[0]);
    let sine = sep_sine(2.0 * k, y - x);
    if sine.abs() < SEPARATION_TOL {
        return Err(Error::DegenerateSeparation { sine: sine.abs() });
    }
    let det = Complex64::new(0.0, 2.0 * sine);
    let ex = cis(lattice_phase(&[2.0 * k], &ax.x));
    let ey = cis(lattice_phase(&[2.0 * k], &ay.x));
    let s21 = (ey * ax.a - ex * ay.a + (ex - ey) * s21_sq) / det;
    let px = lattice_phase(&[2.0 * k], &ax.x);
    let py = lattice_phase(&[2.0 * k], &ay.x);
    Ok(RecoveryResult {
        f_plus: s21,
        det_d: det,
        abs_det: det.norm(),
        arg_distance: sine.abs(),
        method: Method::Prop24,
        s: None,
        conjugate_mismatch: conjugate_mismatch(px, py, ax.a - s21_sq, ay.a - s21_sq),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub result: RecoveryResult,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Solves q = |s₂₁(q)|² by Newton's method from q = 0. The residual is a
/// convex parabola in q, so the iterates increase monotonically to its
/// smaller root, which is the true |s₂₁|² whenever the slope of the map
/// there is below 1 (always the case when |s₂₁| < |cos k(y - x)|). Reports
/// `converged = false` when the parabola has no real root.
pub fn recover_prop24_fixed_point(
    ax: &PhaselessSample,
    ay: &PhaselessSample,
    max_iter: usize,
    tol: f64,
) -> Result<FixedPoint> {
    let base = recover_prop24(ax, ay, 0.0)?;
    let c = recover_prop24(ax, ay, 1.0)?.f_plus - base.f_plus;
    let mut q = 0.0;
    let mut r = base;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let g = r.f_plus.norm_sqr() - q;
        let dg = 2.0 * (r.f_plus.conj() * c).re - 1.0;
        if !(dg < 0.0) {
            break;
        }
        let next = q - g / dg;
        change = (next - q).abs();
        q = next;
        r = recover_prop24(ax, ay, q)?;
        if change < tol {
            return Ok(FixedPoint {
                result: r,
                iterations: it,
                converged: true,
                last_change: change,
            });
        }
    }
    Ok(FixedPoint {
        result: r,
        iterations: max_iter,
        converged: false,
        last_change: change,
    })
}

/// Picks y = x - m, 1 ≤ m ≤ `max_sep`, maximising |cos km| subject to
/// |sin 2km| ≥ `min_sine`.
pub fn choose_prop24_pair(k: f64, x: i64, max_sep: i64, min_sine: f64) -> Result<(i64, i64)> {
    (1..=max_sep)
        .filter(|&m| sep_sine(2.0 * k, m).abs() >= min_sine)
        .max_by(|&a, &b| {
            let ca = lattice_phase(&[k], &LatticePoint::new(vec![a])).cos().abs();
            let cb = lattice_phase(&[k], &LatticePoint::new(vec![b])).cos().abs();
            ca.total_cmp(&cb).then(b.cmp(&a))
        })
        .map(|m| (x, x - m))
        .ok_or(Error::DegenerateSeparation { sine: 0.0 })
}

/// The determinant of the three-point system as a product and as a sum.
pub fn prop25_determinants(k: f64, x: [i64; 3]) -> (Complex64, Complex64) {
    let [x1, x2, x3] = x;
    let prod = 8.0 * sep_sine(k, x2 - x3) * sep_sine(k, x2 - x1) * sep_sine(k, x1 - x3);
    let sum = 2.0 * (sep_sine(2.0 * k, x3 - x2) + sep_sine(2.0 * k, x2 - x1) + sep_sine(2.0 * k, x1 - x3));
    (Complex64::new(0.0, prod), Complex64::new(0.0, sum))
}

/// s₂₁ from three samples left of the support; no |s₂₁|² input needed.
pub fn recover_prop25(a1: &PhaselessSample, a2: &PhaselessSample, a3: &PhaselessSample) -> Result<RecoveryResult> {
    let k = d1_inputs(&[a1, a2, a3])?;
    let x = [a1.x.coords()[0], a2.x.coords()[0], a3.x.coords()[0]];
    let sines = [
        sep_sine(k, x[1] - x[2]),
        sep_sine(k, x[1] - x[0]),
        sep_sine(k, x[0] - x[2]),
    ];
    let min_sine = sines.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min_sine < SEPARATION_TOL {
        return Err(Error::DegenerateSeparation { sine: min_sine });
    }
    let (det, additive) = prop25_determinants(k, x);
    let identity = (det - additive).norm();
    let span = (x[0] - x[2]).abs().max((x[0] - x[1]).abs()).max((x[1] - x[2]).abs());
    if identity > 1e-12 * (span as f64 / 64.0).max(1.0) {
        return Err(Error::NoConvergence {
            what: "three-point determinant identity",
            residual: identity,
        });
    }
    let ph: Vec<f64> = [a1, a2, a3].iter().map(|s| lattice_phase(&[2.0 * k], &s.x)).collect();
    let e: Vec<Complex64> = ph.iter().map(|&p| cis(p)).collect();
    let (d21, d31) = (a2.a - a1.a, a3.a - a1.a);
    let s21 = ((e[2] - e[0]) * d21 + (e[0] - e[1]) * d31) / det;
    let m = Matrix2::new(
        cis(-ph[1]) - cis(-ph[0]),
        e[1] - e[0],
        cis(-ph[2]) - cis(-ph[0]),
        e[2] - e[0],
    );
    let mismatch = match m
        .lu()
        .solve(&Vector2::new(Complex64::new(d21, 0.0), Complex64::new(d31, 0.0)))
    {
        Some(v) => (v[1] - v[0].conj()).norm(),
        None => f64::INFINITY,
    };
    Ok(RecoveryResult {
        f_plus: s21,
        det_d: det,
        abs_det: det.norm(),
        arg_distance: min_sine,
        method: Method::Prop25,
        s: None,
        conjugate_mismatch: mismatch,
    })
}

/// Triple x1 = `start` > x2 > x3 ≥ start - `span` maximising |D|.
pub fn choose_prop25_triple(k: f64, start: i64, span: i64) -> Result<[i64; 3]> {
    let mut best: Option<([i64; 3], f64)> = None;
    for x2 in (start - span..start).rev() {
        for x3 in (start - span..x2).rev() {
            let t = [start, x2, x3];
            let v = prop25_determinants(k, t).0.norm();
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((t, v));
            }
        }
    }
    match best {
        Some((t, v)) if v >= 8.0 * SEPARATION_TOL => Ok(t),
        _ => Err(Error::DegenerateSeparation { sine: 0.0 }),
    }
}
