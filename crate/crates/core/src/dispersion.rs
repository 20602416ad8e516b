//! Level surfaces Γ(E) = {φ(k) = E} of the lattice symbol and their
//! normal parameterisation γ(ω, E).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Direction, Energy, LatticePoint};

/// KKT residual at which the Newton iteration stops.
pub const KKT_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 50;

/// φ(k) = 2 Σ cos k_i.
pub fn phi(k: &[f64]) -> f64 {
    2.0 * k.iter().map(|c| c.cos()).sum::<f64>()
}

/// ∇φ(k) = -2 sin k.
pub fn grad_phi(k: &[f64]) -> Vec<f64> {
    k.iter().map(|c| -2.0 * c.sin()).collect()
}

/// A point of Γ(E) together with its outward normal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub gamma: Vec<f64>,
    pub omega: Direction,
    pub mu: f64,
    pub kkt_residual: f64,
}

/// ζ ↦ ζ - (ω·ζ)ω.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentialProjection {
    omega: Direction,
}

impl TangentialProjection {
    pub fn new(omega: Direction) -> Self {
        TangentialProjection { omega }
    }

    pub fn apply(&self, zeta: &[f64]) -> Vec<f64> {
        let p = self.omega.dot(zeta);
        zeta.iter()
            .zip(self.omega.components())
            .map(|(z, w)| z - p * w)
            .collect()
    }
}

fn require_convex(omega: &Direction, e: &Energy) -> Result<()> {
    if omega.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: omega.dim(),
        });
    }
    if !e.convex_regime() {
        return Err(Error::NonConvexRegime {
            energy: e.value(),
            dim: e.dim(),
        });
    }
    Ok(())
}

/// The point of Γ(E) with outward normal ω.
///
/// For E > 0 the point lies in the component around the origin, for E < 0
/// in the component around π·1 (reported inside [0, 2π]^d). In d = 1 the
/// two-point set {±arccos(E/2)} is used for every admissible E.
pub fn gamma_of_omega(omega: &Direction, e: &Energy) -> Result<DispersionPoint> {
    require_convex(omega, e)?;
    let d = e.dim();
    let ev = e.value();
    if d == 1 {
        let g = omega.components()[0].signum() * (ev / 2.0).acos();
        return Ok(DispersionPoint {
            gamma: vec![g],
            omega: omega.clone(),
            mu: g * omega.components()[0],
            kkt_residual: 0.0,
        });
    }
    let (gamma, res) = solve_positive(omega.components(), ev.abs())?;
    let gamma = if ev < 0.0 {
        gamma.iter().map(|g| g + PI).collect()
    } else {
        gamma
    };
    let mu = omega.dot(&gamma);
    Ok(DispersionPoint {
        gamma,
        omega: omega.clone(),
        mu,
        kkt_residual: res,
    })
}

/// μ(ω, E) = γ(ω, E)·ω.
pub fn mu_of_omega(omega: &Direction, e: &Energy) -> Result<f64> {
    Ok(gamma_of_omega(omega, e)?.mu)
}

/// For E < 0 (d ≥ 2): the positive remainder μ₋ in μ = π·1·ω + μ₋.
pub fn mu_minus(omega: &Direction, e: &Energy) -> Result<f64> {
    require_convex(omega, e)?;
    if e.value() >= 0.0 || e.dim() == 1 {
        return Err(Error::InvalidArgument(
            "the shifted decomposition applies to E < 0 with d >= 2".into(),
        ));
    }
    let (g, _) = solve_positive(omega.components(), -e.value())?;
    Ok(omega.dot(&g))
}

/// γ(x̂, E)·x as a dot product with the integer point (not reduced).
pub fn phase_exponent(x: &LatticePoint, e: &Energy) -> Result<f64> {
    let g = gamma_of_omega(&x.direction()?, e)?;
    Ok(g.gamma.iter().zip(x.coords()).map(|(g, &c)| g * c as f64).sum())
}

/// (k - γ(ω, E))·ζ.
pub fn d_asymptotic_argument(k: &[f64], omega: &Direction, zeta: &LatticePoint, e: &Energy) -> Result<f64> {
    let g = gamma_of_omega(omega, e)?;
    Ok(k.iter()
        .zip(&g.gamma)
        .zip(zeta.coords())
        .map(|((k, g), &z)| (k - g) * z as f64)
        .sum())
}

/// KKT residual of F(k, λ) = (ω + 2λ sin k, φ(k) - E).
fn kkt(omega: &[f64], e: f64, k: &[f64], lambda: f64) -> Vec<f64> {
    let mut f: Vec<f64> = omega.iter().zip(k).map(|(w, k)| w + 2.0 * lambda * k.sin()).collect();
    f.push(phi(k) - e);
    f
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Point on the ray t ↦ t·dir with φ = e, for 0 < e < 2d and the ray
/// restricted to the cube around the origin.
fn ray_point(dir: &[f64], e: f64) -> Vec<f64> {
    let m = dir.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let (mut lo, mut hi) = (0.0, PI / m);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k: Vec<f64> = dir.iter().map(|c| c * mid).collect();
        if phi(&k) > e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    dir.iter().map(|c| c * r).collect()
}

fn lambda_ls(omega: &[f64], k: &[f64]) -> f64 {
    let s: Vec<f64> = k.iter().map(|c| c.sin()).collect();
    let ss: f64 = s.iter().map(|c| c * c).sum();
    -omega.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / (2.0 * ss)
}

/// Support-function maximiser on the origin component of Γ(e), 0 < e.
fn solve_positive(omega: &[f64], e: f64) -> Result<(Vec<f64>, f64)> {
    let k0 = ray_point(omega, e);
    if let Some(sol) = newton(omega, e, k0.clone()) {
        return Ok(sol);
    }
    let k1 = golden_section(omega, e);
    newton(omega, e, k1.clone())
        .or_else(|| {
            let lam = lambda_ls(omega, &k1);
            let r = norm(&kkt(omega, e, &k1, lam));
            (r < 1e-9).then_some((k1, r))
        })
        .ok_or(Error::NoConvergence {
            what: "gamma solver",
            residual: f64::NAN,
        })
}

fn newton(omega: &[f64], e: f64, mut k: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let d = omega.len();
    let mut lam = lambda_ls(omega, &k);
    let mut f = kkt(omega, e, &k, lam);
    let mut r = norm(&f);
    for _ in 0..MAX_NEWTON {
        if r <= KKT_TOL {
            break;
        }
        let mut jac = nalgebra::DMatrix::<f64>::zeros(d + 1, d + 1);
        for i in 0..d {
            jac[(i, i)] = 2.0 * lam * k[i].cos();
            jac[(i, d)] = 2.0 * k[i].sin();
            jac[(d, i)] = -2.0 * k[i].sin();
        }
        let rhs = nalgebra::DVector::from_iterator(d + 1, f.iter().map(|c| -c));
        let step = jac.lu().solve(&rhs)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let kn: Vec<f64> = k.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let ln = lam + t * step[d];
            let fnew = kkt(omega, e, &kn, ln);
            let rn = norm(&fnew);
            if rn < r || rn <= KKT_TOL {
                k = kn;
                lam = ln;
                f = fnew;
                r = rn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let inside = k.iter().all(|c| c.abs() < PI);
    let outward = lam < 0.0;
    (r <= KKT_TOL && inside && outward).then_some((k, r))
}

/// Maximise k·ω over Γ(e) by cyclic golden-section search on the
/// tangential coefficients of the ray direction ω + Σ t_j τ_j.
fn golden_section(omega: &[f64], e: f64) -> Vec<f64> {
    let dir = Direction::from_unit(omega.to_vec()).expect("unit direction");
    let basis = dir.tangent_basis();
    let point = |t: &[f64]| {
        let mut v = omega.to_vec();
        for (tj, b) in t.iter().zip(&basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += tj * bi;
            }
        }
        ray_point(&v, e)
    };
    let value = |t: &[f64]| {
        let k = point(t);
        k.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>()
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut t = vec![0.0; basis.len()];
    for _sweep in 0..8 {
        for j in 0..t.len() {
            let (mut a, mut b) = (t[j] - 1.0, t[j] + 1.0);
            let eval = |x: f64, t: &mut Vec<f64>| {
                t[j] = x;
                value(t)
            };
            let mut c = b - g * (b - a);
            let mut dd = a + g * (b - a);
            let mut fc = eval(c, &mut t);
            let mut fd = eval(dd, &mut t);
            while b - a > 1e-12 {
                if fc > fd {
                    b = dd;
                    dd = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = eval(c, &mut t);
                } else {
                    a = c;
                    c = dd;
                    fc = fd;
                    dd = a + g * (b - a);
                    fd = eval(dd, &mut t);
                }
            }
            t[j] = 0.5 * (a + b);
        }
    }
    point(&t)
}

type CacheKey = (Vec<i64>, u64);

/// Memo of γ(ω, E) keyed by ω quantised to 1e-9 and the bits of E. A hit is
/// returned only when the stored direction matches exactly.
#[derive(Default)]
pub struct GammaCache {
    map: RwLock<HashMap<CacheKey, DispersionPoint>>,
}

impl GammaCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(omega: &Direction, e: &Energy) -> CacheKey {
        let q = omega.components().iter().map(|c| (c * 1e9).round() as i64).collect();
        (q, e.value().to_bits())
    }

    pub fn get(&self, omega: &Direction, e: &Energy) -> Result<DispersionPoint> {
        let key = Self::key(omega, e);
        if let Some(p) = self.map.read().expect("gamma cache poisoned").get(&key) {
            if p.omega == *omega {
                return Ok(p.clone());
            }
        }
        let p = gamma_of_omega(omega, e)?;
        self.map
            .write()
            .expect("gamma cache poisoned")
            .entry(key)
            .or_insert_with(|| p.clone());
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("gamma cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::check_energy;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&[0.0, 0.0, 0.0]), 6.0);
        assert!(close(phi(&[PI, PI]), -4.0, 1e-15));
        assert!(close(phi(&[PI / 3.0, PI / 3.0]), 2.0, 1e-14));
    }

    #[test]
    fn gamma_examples() {
        let e = check_energy(2.0, 2).unwrap();
        let p = gamma_of_omega(&Direction::axis(2, 0), &e).unwrap();
        assert!(close(p.gamma[0], PI / 2.0, 1e-12) && close(p.gamma[1], 0.0, 1e-12));
        assert!(close(p.mu, PI / 2.0, 1e-12));

        let w = Direction::new(vec![1.0, 1.0]).unwrap();
        let p = gamma_of_omega(&w, &e).unwrap();
        assert!(close(p.gamma[0], PI / 3.0, 1e-12) && close(p.gamma[1], PI / 3.0, 1e-12));
        assert!(close(p.mu, 2.0 * PI / (3.0 * 2f64.sqrt()), 1e-12));

        let e1 = check_energy(0.7, 1).unwrap();
        let p = gamma_of_omega(&Direction::axis(1, 0).neg(), &e1).unwrap();
        assert!(close(p.gamma[0], -(0.35f64).acos(), 1e-15));
    }

    #[test]
    fn mu_examples() {
        let e = check_energy(1.0, 1).unwrap();
        assert!(close(mu_of_omega(&Direction::axis(1, 0), &e).unwrap(), PI / 3.0, 1e-15));
        let e = check_energy(2.0, 2).unwrap();
        assert!(close(mu_of_omega(&Direction::axis(2, 0), &e).unwrap(), PI / 2.0, 1e-12));
    }

    #[test]
    fn negative_energy_shift() {
        let e = check_energy(-2.0, 2).unwrap();
        let w = Direction::axis(2, 0);
        let p = gamma_of_omega(&w, &e).unwrap();
        // γ(ω, -2) = π·1 + γ(ω, 2) = (3π/2, π)
        assert!(close(p.gamma[0], 1.5 * PI, 1e-12) && close(p.gamma[1], PI, 1e-12));
        assert!(close(phi(&p.gamma), -2.0, 1e-12));
        let mm = mu_minus(&w, &e).unwrap();
        assert!(close(mm, PI / 2.0, 1e-12) && mm > 0.0);
        assert!(close(p.mu, PI * 1.0 + mm, 1e-12));
        assert!(p.gamma.iter().all(|g| (0.0..2.0 * PI).contains(g)));
    }

    #[test]
    fn phase_exponent_examples() {
        let e = check_energy(2.0, 2).unwrap();
        for n in [1i64, 5, 40] {
            let v = phase_exponent(&LatticePoint::new(vec![n, 0]), &e).unwrap();
            assert!(close(v, n as f64 * PI / 2.0, 1e-11));
        }
        let e1 = check_energy(1.0, 1).unwrap();
        let v = phase_exponent(&LatticePoint::new(vec![-5]), &e1).unwrap();
        assert!(close(v, 5.0 * PI / 3.0, 1e-14));

        let e = check_energy(2.7, 2).unwrap();
        let x = LatticePoint::new(vec![7, 3]);
        let mu = mu_of_omega(&x.direction().unwrap(), &e).unwrap();
        assert!(close(phase_exponent(&x, &e).unwrap(), mu * x.norm(), 1e-10));
    }

    #[test]
    fn asymptotic_argument_examples() {
        let e = check_energy(2.0, 2).unwrap();
        let k = gamma_of_omega(&Direction::axis(2, 0), &e).unwrap().gamma;
        let zeta = LatticePoint::new(vec![1, 1]);
        let v = d_asymptotic_argument(&k, &Direction::axis(2, 1), &zeta, &e).unwrap();
        assert!(close(v, 0.0, 1e-12));
        let v = d_asymptotic_argument(&k, &Direction::axis(2, 0), &zeta, &e).unwrap();
        assert!(close(v, 0.0, 1e-12));
        // ζ orthogonal to k - γ
        let w = Direction::new(vec![1.0, 1.0]).unwrap();
        let g = gamma_of_omega(&w, &e).unwrap().gamma;
        let diff: Vec<f64> = k.iter().zip(&g).map(|(a, b)| a - b).collect();
        assert!(diff[0] != 0.0);
        let zeta = LatticePoint::new(vec![0, 3]);
        let v = d_asymptotic_argument(&k, &w, &zeta, &e).unwrap();
        assert!(close(v, 3.0 * diff[1], 1e-12));
    }

    #[test]
    fn rejects_non_convex_regime() {
        let e = check_energy(1.0, 3).unwrap();
        assert!(matches!(
            gamma_of_omega(&Direction::axis(3, 0), &e),
            Err(Error::NonConvexRegime { .. })
        ));
    }

    /// argmax of k·ω over the explicit branches k2 = ±arccos(E/2 - cos k1)
    /// of the planar level curve: coarse grid, then golden refinement.
    fn branch_support(omega: &Direction, e: f64) -> (f64, Vec<f64>) {
        let k1max = (e / 2.0 - 1.0).acos();
        let point = |k1: f64, sign: f64| vec![k1, sign * (e / 2.0 - k1.cos()).clamp(-1.0, 1.0).acos()];
        let value = |k1: f64, sign: f64| omega.dot(&point(k1, sign));
        let mut best = (f64::NEG_INFINITY, vec![]);
        for sign in [1.0, -1.0] {
            let n = 4000;
            let h = 2.0 * k1max / n as f64;
            let i = (0..=n)
                .max_by(|&a, &b| value(-k1max + h * a as f64, sign).total_cmp(&value(-k1max + h * b as f64, sign)))
                .unwrap();
            let (mut lo, mut hi) = (
                (-k1max + h * (i as f64 - 1.0)).max(-k1max),
                (-k1max + h * (i as f64 + 1.0)).min(k1max),
            );
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let a = hi - g * (hi - lo);
                let b = lo + g * (hi - lo);
                if value(a, sign) < value(b, sign) {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            let k1 = 0.5 * (lo + hi);
            if value(k1, sign) > best.0 {
                best = (value(k1, sign), point(k1, sign));
            }
        }
        best
    }

    #[test]
    fn gamma_matches_branch_oracle() {
        let e = check_energy(2.7, 2).unwrap();
        for i in 0..64 {
            let w = Direction::polar(2.0 * PI * (i as f64 + 0.3) / 64.0);
            let p = gamma_of_omega(&w, &e).unwrap();
            let (v, k) = branch_support(&w, 2.7);
            assert!(p.mu >= v - 1e-12, "support value below the oracle maximum");
            assert!(p.mu - v < 1e-12);
            assert!(norm(&[k[0] - p.gamma[0], k[1] - p.gamma[1]]) < 1e-6);
        }
    }

    #[test]
    fn level_set_and_normal_hold_for_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, ev) in [(2usize, 2.5), (2, 0.3), (3, 3.1), (3, 5.5), (2, -1.7), (3, -4.4)] {
            let e = check_energy(ev, d).unwrap();
            for _ in 0..200 {
                let w = Direction::random(d, &mut rng);
                let p = gamma_of_omega(&w, &e).unwrap();
                assert!((phi(&p.gamma) - ev).abs() < 1e-10);
                // normal: for the origin component the outward normal is along sin k
                let shift = if ev < 0.0 { PI } else { 0.0 };
                let s: Vec<f64> = p.gamma.iter().map(|g| (g - shift).sin()).collect();
                let along = w.dot(&s);
                let perp = norm(&TangentialProjection::new(w.clone()).apply(&s));
                let angle = perp.atan2(along);
                assert!(angle.abs() < 1e-8, "angle {angle}");
                if ev > 0.0 {
                    assert!(p.mu > 0.0);
                } else {
                    assert!(mu_minus(&w, &e).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn support_property_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = check_energy(5.0, 3).unwrap();
        let w = Direction::random(3, &mut rng);
        let p = gamma_of_omega(&w, &e).unwrap();
        for _ in 0..10_000 {
            let dir = Direction::random(3, &mut rng);
            let k = ray_point(dir.components(), 5.0);
            assert!(w.dot(&k) <= p.mu + 1e-12);
        }
    }

    #[test]
    fn first_order_normal_degeneracy_slope() {
        use crate::fit::loglog_slope;
        use crate::lattice::measurement_points;
        let e = check_energy(2.5, 2).unwrap();
        let w = Direction::polar(0.61);
        let zeta = LatticePoint::new(vec![1, 2]);
        let mut s_vals = vec![];
        let mut errs = vec![];
        for j in 0..8 {
            let s = 20.0 * 2f64.powi(j);
            let (x, y) = measurement_points(s, &w, &zeta).unwrap();
            let gx = gamma_of_omega(&x.direction().unwrap(), &e).unwrap().gamma;
            let gy = gamma_of_omega(&y.direction().unwrap(), &e).unwrap().gamma;
            let diff: Vec<f64> = gy.iter().zip(&gx).map(|(a, b)| a - b).collect();
            s_vals.push(s);
            errs.push(w.dot(&diff).abs());
        }
        assert!(loglog_slope(&s_vals, &errs).unwrap().slope <= -1.8);
    }

    #[test]
    fn direction_convergence_slope() {
        use crate::fit::loglog_slope;
        use crate::lattice::measurement_points;
        let w = Direction::new(vec![0.3, -0.5, 0.8]).unwrap();
        let zeta = LatticePoint::new(vec![1, 0, -1]);
        let proj = TangentialProjection::new(w.clone());
        let pz = proj.apply(&zeta.to_f64());
        let mut s_vals = vec![];
        let mut errs = vec![];
        for j in 0..8 {
            let s = 20.0 * 2f64.powi(j);
            let (x, y) = measurement_points(s, &w, &zeta).unwrap();
            let xh = x.direction().unwrap();
            let yh = y.direction().unwrap();
            let r: Vec<f64> = (0..3)
                .map(|i| s * (yh.components()[i] - xh.components()[i]) - pz[i])
                .collect();
            s_vals.push(s);
            errs.push(norm(&r));
        }
        assert!(loglog_slope(&s_vals, &errs).unwrap().slope <= -0.8);
    }

    #[test]
    fn cache_returns_solver_values() {
        let cache = GammaCache::new();
        let e = check_energy(2.5, 2).unwrap();
        let w = Direction::polar(1.0);
        let a = cache.get(&w, &e).unwrap();
        let b = cache.get(&w, &e).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, gamma_of_omega(&w, &e).unwrap());
        assert_eq!(cache.len(), 1);
    }

    proptest! {
        #[test]
        fn shift_symmetry(k in proptest::collection::vec(-10.0f64..10.0, 1..5)) {
            let shifted: Vec<f64> = k.iter().map(|c| c + PI).collect();
            prop_assert!((phi(&shifted) + phi(&k)).abs() < 1e-12);
        }

        #[test]
        fn projection_is_orthogonal(th in 0.0f64..6.3, z in proptest::collection::vec(-5i64..5, 2)) {
            let w = Direction::polar(th);
            let p = TangentialProjection::new(w.clone());
            let zf: Vec<f64> = z.iter().map(|&c| c as f64).collect();
            prop_assert!(w.dot(&p.apply(&zf)).abs() < 1e-12);
        }

        #[test]
        fn gamma_reflects_with_direction(th in 0.0f64..6.3, e in 0.2f64..3.9) {
            let en = check_energy(e, 2).unwrap();
            let w = Direction::polar(th);
            let a = gamma_of_omega(&w, &en).unwrap();
            let b = gamma_of_omega(&w.neg(), &en).unwrap();
            for (x, y) in a.gamma.iter().zip(&b.gamma) {
                prop_assert!((x + y).abs() < 1e-10);
            }
        }
    }
}
