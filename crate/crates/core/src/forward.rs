//! Lippmann-Schwinger solve for ψ⁺, evaluation of ψ⁺ and ψ_sc anywhere on
//! the lattice, and reference extraction of the scattering amplitude.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dispersion::{gamma_of_omega, phi};
use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::lattice::{int_point, lattice_phase, reduce_angle, Direction, Energy, LatticePoint, Potential};

/// Free-equation residual below which a plane wave counts as a solution.
pub const FREE_RESIDUAL_TOL: f64 = 1e-12;

/// Whether the plane waves solving the free equation are e^{iγ·x} with γ on
/// Γ(E) itself or on the translate Γ(E) + π·1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Direct,
    Shifted,
}

/// Residual |(-Δ - E) e^{ik·x}| at `x`, relative to |e^{ik·x}| = 1.
pub fn free_residual(k: &[f64], e: f64, x: &LatticePoint) -> f64 {
    let psi = |p: &LatticePoint| Complex64::from_polar(1.0, lattice_phase(k, p));
    let lap: Complex64 = x.neighbors().iter().map(psi).sum();
    (-lap - e * psi(x)).norm()
}

fn max_free_residual(k: &[f64], e: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| {
            let p = LatticePoint::new((0..k.len()).map(|_| rng.random_range(-50..=50)).collect());
            free_residual(k, e, &p)
        })
        .fold(0.0, f64::max)
}

/// The operational set of incident wave vectors and the outgoing point in
/// each direction: the point k* of the free-wave set whose group velocity
/// 2 sin k* points along +ω. It equals γ(σω, E), shifted by π·1 for the
/// `Shifted` branch, with σ = ±1 resolved once per energy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeWaves {
    energy: Energy,
    branch: Branch,
    orientation: f64,
}

impl FreeWaves {
    pub fn resolve(energy: Energy) -> Result<Self> {
        let d = energy.dim();
        let e = energy.value();
        let probe = Direction::new((1..=d).map(|i| 1.0 + 0.37 * i as f64).collect())?;
        let g = gamma_of_omega(&probe, &energy)?.gamma;
        let shifted: Vec<f64> = g.iter().map(|c| c + PI).collect();
        let branch = if max_free_residual(&g, e, 1) < FREE_RESIDUAL_TOL {
            Branch::Direct
        } else if max_free_residual(&shifted, e, 2) < FREE_RESIDUAL_TOL {
            Branch::Shifted
        } else {
            return Err(Error::NoConvergence {
                what: "free-wave branch resolution",
                residual: max_free_residual(&shifted, e, 2),
            });
        };
        for orientation in [1.0, -1.0] {
            let fw = FreeWaves {
                energy,
                branch,
                orientation,
            };
            let k = fw.outgoing_point(&probe)?;
            let v: Vec<f64> = k.iter().map(|c| c.sin()).collect();
            let along = probe.dot(&v);
            let perp = v
                .iter()
                .zip(probe.components())
                .map(|(a, w)| (a - along * w).powi(2))
                .sum::<f64>()
                .sqrt();
            if along > 0.0 && perp < 1e-8 * along {
                return Ok(fw);
            }
        }
        Err(Error::NoConvergence {
            what: "outgoing orientation",
            residual: f64::NAN,
        })
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn describe(&self) -> String {
        format!(
            "free waves: {:?} branch, outgoing point = gamma({}omega, E){}",
            self.branch,
            if self.orientation > 0.0 { "" } else { "-" },
            if self.branch == Branch::Shifted { " + pi*1" } else { "" }
        )
    }

    /// The outgoing point k*(ω), components reduced to (-π, π].
    pub fn outgoing_point(&self, omega: &Direction) -> Result<Vec<f64>> {
        let w = if self.orientation > 0.0 {
            omega.clone()
        } else {
            omega.neg()
        };
        let g = gamma_of_omega(&w, &self.energy)?.gamma;
        let shift = if self.branch == Branch::Shifted { PI } else { 0.0 };
        Ok(g.iter().map(|c| reduce_angle(c + shift)).collect())
    }

    /// k*(x̂)·x reduced to (-π, π].
    pub fn outgoing_phase(&self, x: &LatticePoint) -> Result<f64> {
        let k = self.outgoing_point(&x.direction()?)?;
        Ok(lattice_phase(&k, x))
    }
}

/// A plane wave e^{ik·x} solving the free equation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncidentWave {
    k: Vec<f64>,
    energy: Energy,
}

impl IncidentWave {
    /// The incident wave travelling along `direction`.
    pub fn along(direction: &Direction, free: &FreeWaves) -> Result<Self> {
        let k = free.outgoing_point(direction)?;
        IncidentWave::new(k, *free.energy())
    }

    /// Validates an explicit wave vector.
    pub fn new(k: Vec<f64>, energy: Energy) -> Result<Self> {
        if k.len() != energy.dim() {
            return Err(Error::DimensionMismatch {
                expected: energy.dim(),
                found: k.len(),
            });
        }
        let r = max_free_residual(&k, energy.value(), 3);
        if r >= FREE_RESIDUAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "e^(ik.x) does not solve the free equation (residual {r:e}, -phi(k) = {})",
                -phi(&k)
            )));
        }
        Ok(IncidentWave { k, energy })
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn value(&self, x: &LatticePoint) -> Complex64 {
        Complex64::from_polar(1.0, lattice_phase(&self.k, x))
    }
}

/// ψ⁺ on the support of v plus what is needed to evaluate it elsewhere.
pub struct ScatteringSolution {
    incident: IncidentWave,
    potential: Potential,
    support: Vec<LatticePoint>,
    psi_on_support: Vec<Complex64>,
    green: Arc<GreenEvaluator>,
    linear_residual: f64,
}

/// Solves ψ(x) = ψ₀(x) - Σ_y G(x - y) v(y) ψ(y) on supp v by dense LU.
pub fn solve_forward(v: &Potential, incident: &IncidentWave, green: Arc<GreenEvaluator>) -> Result<ScatteringSolution> {
    let d = v.dim();
    if incident.energy().dim() != d || green.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: incident.energy().dim(),
        });
    }
    if green.energy().value() != incident.energy().value() {
        return Err(Error::InvalidArgument(
            "Green's function and incident wave use different energies".into(),
        ));
    }
    let support: Vec<LatticePoint> = v.entries().map(|(p, _)| p.clone()).collect();
    let vals: Vec<Complex64> = v.entries().map(|(_, c)| *c).collect();
    let n = support.len();
    if n == 0 {
        return Ok(ScatteringSolution {
            incident: incident.clone(),
            potential: v.clone(),
            support,
            psi_on_support: vec![],
            green,
            linear_residual: 0.0,
        });
    }
    let mut offsets = Vec::with_capacity(n * n);
    for x in &support {
        for y in &support {
            offsets.push(x.sub(y));
        }
    }
    let g = green.values(&offsets)?;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        g[i * n + j] * vals[j] + delta
    });
    let rhs = DVector::from_iterator(n, support.iter().map(|x| incident.value(x)));
    let psi = a.clone().lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    let r = (&a * &psi - &rhs).norm();
    let scale = 1.0 + rhs.norm();
    if !r.is_finite() || r > 1e-10 * scale {
        return Err(Error::SingularSystem);
    }
    Ok(ScatteringSolution {
        incident: incident.clone(),
        potential: v.clone(),
        support,
        psi_on_support: psi.iter().copied().collect(),
        green,
        linear_residual: r / scale,
    })
}

impl ScatteringSolution {
    pub fn incident(&self) -> &IncidentWave {
        &self.incident
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn green(&self) -> &Arc<GreenEvaluator> {
        &self.green
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// The same solution evaluating ψ away from the support with another
    /// Green's function evaluator at the same energy.
    pub fn with_green(&self, green: Arc<GreenEvaluator>) -> Result<ScatteringSolution> {
        if green.energy() != self.green.energy() || green.eps() != self.green.eps() {
            return Err(Error::InvalidArgument(
                "replacement evaluator differs in energy or absorption".into(),
            ));
        }
        Ok(ScatteringSolution {
            incident: self.incident.clone(),
            potential: self.potential.clone(),
            support: self.support.clone(),
            psi_on_support: self.psi_on_support.clone(),
            green,
            linear_residual: self.linear_residual,
        })
    }

    /// Relative residual of the dense solve.
    pub fn linear_residual(&self) -> f64 {
        self.linear_residual
    }

    pub fn psi_on_support(&self) -> BTreeMap<LatticePoint, Complex64> {
        self.support
            .iter()
            .cloned()
            .zip(self.psi_on_support.iter().copied())
            .collect()
    }

    /// ψ_sc at many points, sharing Green's function batches.
    pub fn scattered_many(&self, xs: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let n = self.support.len();
        if n == 0 {
            return Ok(vec![Complex64::new(0.0, 0.0); xs.len()]);
        }
        let mut offsets = Vec::with_capacity(xs.len() * n);
        for x in xs {
            for y in &self.support {
                offsets.push(x.sub(y));
            }
        }
        let g = self.green.values(&offsets)?;
        let weights: Vec<Complex64> = self
            .support
            .iter()
            .zip(&self.psi_on_support)
            .map(|(y, psi)| self.potential.get(y) * psi)
            .collect();
        Ok(g.chunks(n)
            .map(|row| -row.iter().zip(&weights).map(|(g, w)| g * w).sum::<Complex64>())
            .collect())
    }

    pub fn scattered(&self, x: &LatticePoint) -> Result<Complex64> {
        Ok(self.scattered_many(std::slice::from_ref(x))?[0])
    }

    pub fn evaluate_psi_many(&self, xs: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let sc = self.scattered_many(xs)?;
        Ok(xs.iter().zip(sc).map(|(x, s)| self.incident.value(x) + s).collect())
    }

    pub fn evaluate_psi(&self, x: &LatticePoint) -> Result<Complex64> {
        Ok(self.evaluate_psi_many(std::slice::from_ref(x))?[0])
    }

    /// |(-Δ + v - E)ψ⁺(x)|.
    pub fn pde_residual(&self, x: &LatticePoint) -> Result<f64> {
        let mut pts = vec![x.clone()];
        pts.extend(x.neighbors());
        let psi = self.evaluate_psi_many(&pts)?;
        let lap: Complex64 = psi[1..].iter().sum();
        let e = self.incident.energy().value();
        Ok((-lap + (self.potential.get(x) - e) * psi[0]).norm())
    }
}

/// Reference value of f⁺(k, ω) with extraction metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FarField {
    pub omega: Direction,
    /// Accelerated value.
    pub f_plus: Complex64,
    /// Normalised ψ_sc at Int(sω) for the largest s.
    pub raw: Complex64,
    pub s_values: Vec<f64>,
    /// Total order of the fitted correction polynomial (0 for d = 1).
    pub order: usize,
    /// Change of the fit when the smallest s is dropped.
    pub error_estimate: f64,
    pub points: usize,
}

/// Default s-grids for [`extract_f_reference`].
pub fn default_s_grid(dim: usize) -> Vec<f64> {
    match dim {
        1 => vec![1.0],
        2 => vec![40.0, 80.0, 160.0, 320.0],
        _ => vec![20.0, 40.0, 80.0, 160.0],
    }
}

/// f_ref(k, ω) = lim |x|^{(d-1)/2} e^{-ik*(x̂)·x} ψ_sc(x) along x = Int(sω).
///
/// For d = 1 a single point just outside the support is exact. For d ≥ 2
/// the normalised field g(x) at Int(sω) and its lattice neighbours is
/// fitted by a low-order polynomial in 1/|x| and the tangential
/// deviations of x̂ from ω; the constant term is returned.
pub fn extract_f_reference(
    sol: &ScatteringSolution,
    free: &FreeWaves,
    omega: &Direction,
    s_grid: &[f64],
) -> Result<FarField> {
    extract_f_reference_with_order(sol, free, omega, s_grid, default_fit_order(sol.dim()))
}

/// Total order of the correction polynomial.
pub fn default_fit_order(dim: usize) -> usize {
    if dim == 1 {
        0
    } else {
        3
    }
}

/// [`extract_f_reference`] with an explicit total order of the correction polynomial.
pub fn extract_f_reference_with_order(
    sol: &ScatteringSolution,
    free: &FreeWaves,
    omega: &Direction,
    s_grid: &[f64],
    order: usize,
) -> Result<FarField> {
    let d = sol.dim();
    if omega.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: omega.dim(),
        });
    }
    if !free.energy().convex_regime() {
        return Err(Error::NonConvexRegime {
            energy: free.energy().value(),
            dim: d,
        });
    }
    if d == 1 {
        return far_field_1d(sol, free, omega);
    }
    let basis = omega.tangent_basis();
    let mut pts = Vec::new();
    let mut group = Vec::new();
    for (gi, &s) in s_grid.iter().enumerate() {
        let xi: Vec<f64> = omega.components().iter().map(|c| s * c).collect();
        let x0 = int_point(&xi);
        let mut cand = vec![x0.clone()];
        cand.extend(x0.neighbors());
        for p in cand {
            if !p.is_origin() && !sol.potential().in_support_box(&p) {
                pts.push(p);
                group.push(gi);
            }
        }
    }
    let psi = sol.scattered_many(&pts)?;
    let mut rows = Vec::with_capacity(pts.len());
    let mut g = Vec::with_capacity(pts.len());
    for (p, v) in pts.iter().zip(&psi) {
        let r = p.norm();
        let xh = p.direction()?;
        let t: Vec<f64> = basis
            .iter()
            .map(|b| {
                xh.components()
                    .iter()
                    .zip(omega.components())
                    .zip(b)
                    .map(|((a, w), bb)| (a - w) * bb)
                    .sum()
            })
            .collect();
        rows.push(design_row(&t, 1.0 / r, order));
        let ph = free.outgoing_phase(p)?;
        g.push(v * Complex64::from_polar(r.powf(0.5 * (d as f64 - 1.0)), -ph));
    }
    let ncol = rows[0].len();
    let groups = s_grid.len();
    let fit = |keep: &dyn Fn(usize) -> bool| -> Result<Complex64> {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| keep(group[i])).collect();
        if idx.len() < ncol + 1 {
            return Err(Error::ExtrapolationUnstable(format!(
                "{} points for {} unknowns",
                idx.len(),
                ncol
            )));
        }
        let a = DMatrix::from_fn(idx.len(), ncol, |i, j| rows[idx[i]][j]);
        let br = DVector::from_iterator(idx.len(), idx.iter().map(|&i| g[i].re));
        let bi = DVector::from_iterator(idx.len(), idx.iter().map(|&i| g[i].im));
        let svd = a.svd(true, true);
        let cr = svd
            .solve(&br, 1e-13)
            .map_err(|e| Error::ExtrapolationUnstable(e.to_string()))?;
        let ci = svd
            .solve(&bi, 1e-13)
            .map_err(|e| Error::ExtrapolationUnstable(e.to_string()))?;
        let v = Complex64::new(cr[0], ci[0]);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::ExtrapolationUnstable("non-finite fit".into()))
        }
    };
    let f_plus = fit(&|_| true)?;
    let error_estimate = if groups > 2 {
        (fit(&|gi| gi != 0)? - f_plus).norm()
    } else {
        f64::NAN
    };
    let last = s_grid.len() - 1;
    let raw_idx = (0..pts.len()).find(|&i| group[i] == last).unwrap_or(pts.len() - 1);
    Ok(FarField {
        omega: omega.clone(),
        f_plus,
        raw: g[raw_idx],
        s_values: s_grid.to_vec(),
        order,
        error_estimate,
        points: pts.len(),
    })
}

/// All monomials in (t, 1/r) of total degree at most `order`.
fn design_row(t: &[f64], r_inv: f64, order: usize) -> Vec<f64> {
    let mut lin: Vec<f64> = t.to_vec();
    lin.push(r_inv);
    let mut row = vec![1.0];
    let mut layer: Vec<(usize, f64)> = vec![(0, 1.0)];
    for _ in 0..order {
        let mut next = Vec::new();
        for &(first, m) in &layer {
            for (i, v) in lin.iter().enumerate().skip(first) {
                next.push((i, m * v));
            }
        }
        row.extend(next.iter().map(|&(_, m)| m));
        layer = next;
    }
    row
}

fn far_field_1d(sol: &ScatteringSolution, free: &FreeWaves, omega: &Direction) -> Result<FarField> {
    let (lo, hi) = match sol.potential().support_box() {
        Some(b) => (b.lo[0], b.hi[0]),
        None => (0, 0),
    };
    let x = if omega.components()[0] < 0.0 {
        (lo - 1).min(-1)
    } else {
        (hi + 1).max(1)
    };
    let p = LatticePoint::new(vec![x]);
    let v = sol.scattered(&p)? * Complex64::from_polar(1.0, -free.outgoing_phase(&p)?);
    Ok(FarField {
        omega: omega.clone(),
        f_plus: v,
        raw: v,
        s_values: vec![x.unsigned_abs() as f64],
        order: 0,
        error_estimate: 0.0,
        points: 1,
    })
}

/// Reflection s₂₁ and transmission t of a one-dimensional potential for
/// the wave e^{ikx}, 0 < k < π, incident from the left, by propagating the
/// three-term recurrence from the right.
pub fn transfer_matrix_d1(v: &Potential, incident: &IncidentWave) -> Result<(Complex64, Complex64)> {
    if v.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: v.dim(),
        });
    }
    let k = incident.k()[0];
    if !(k > 0.0 && k < PI) {
        return Err(Error::InvalidArgument(format!(
            "transfer matrix expects 0 < k < pi, got {k}"
        )));
    }
    let e = incident.energy().value();
    let (lo, hi) = match v.support_box() {
        Some(b) => (b.lo[0], b.hi[0]),
        None => return Ok((Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))),
    };
    let wave = |x: i64, sign: f64| Complex64::from_polar(1.0, sign * lattice_phase(&[k], &LatticePoint::new(vec![x])));
    // ψ = e^{ikx} on x ≥ hi
    let mut next = wave(hi + 1, 1.0);
    let mut cur = wave(hi, 1.0);
    let mut x = hi;
    while x > lo - 2 {
        let vx = v.get(&LatticePoint::new(vec![x]));
        let prev = (vx - e) * cur - next;
        next = cur;
        cur = prev;
        x -= 1;
    }
    // cur = ψ(lo - 2), next = ψ(lo - 1); fit A e^{ikx} + B e^{-ikx}
    let (x1, x2) = (lo - 2, lo - 1);
    let m = nalgebra::Matrix2::new(wave(x1, 1.0), wave(x1, -1.0), wave(x2, 1.0), wave(x2, -1.0));
    let ab = m
        .lu()
        .solve(&nalgebra::Vector2::new(cur, next))
        .ok_or(Error::SingularSystem)?;
    let (a, b) = (ab[0], ab[1]);
    Ok((b / a, 1.0 / a))
}

#[cfg(test)]
mod tests;
