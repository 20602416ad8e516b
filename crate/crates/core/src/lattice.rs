//! Lattice-domain primitives: points of Z^d, unit directions, compactly
//! supported potentials and the admissible energy set.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of a [`Direction`].
pub const DIRECTION_NORM_TOL: f64 = 1e-12;

/// A point of the square lattice Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "lattice points need d >= 1");
        LatticePoint(coords)
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint::new(vec![0; dim])
    }

    /// The unit vector e_axis.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        LatticePoint::new(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Exact squared Euclidean norm.
    pub fn norm_sq(&self) -> i128 {
        self.0.iter().map(|&c| (c as i128) * (c as i128)).sum()
    }

    /// Euclidean norm: exact integer sum of squares, one square root.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), other.dim());
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), other.dim());
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }

    /// The 2d nearest neighbours, ordered +e_0, -e_0, +e_1, ...
    pub fn neighbors(&self) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for i in 0..self.dim() {
            for step in [1, -1] {
                let mut c = self.0.clone();
                c[i] += step;
                out.push(LatticePoint(c));
            }
        }
        out
    }

    /// The direction x/|x|.
    pub fn direction(&self) -> Result<Direction> {
        if self.is_origin() {
            return Err(Error::ZeroPoint);
        }
        Direction::new(self.to_f64())
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint::new(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `k · x` reduced to (-π, π]. Each product is reduced before summation so
/// that large lattice coordinates do not inflate the rounding error.
pub fn lattice_phase(k: &[f64], x: &LatticePoint) -> f64 {
    assert_eq!(k.len(), x.dim());
    let sum: f64 = k
        .iter()
        .zip(x.coords())
        .map(|(&ki, &xi)| reduce_angle(reduce_angle(ki) * xi as f64))
        .sum();
    reduce_angle(sum)
}

/// Reduce an angle to (-π, π].
pub fn reduce_angle(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// A unit vector in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalises a non-zero vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidArgument("empty direction".into()));
        }
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!("cannot normalise {v:?}")));
        }
        Ok(Direction(v.into_iter().map(|c| c / n).collect()))
    }

    /// Accepts a vector that is already of unit length.
    pub fn from_unit(v: Vec<f64>) -> Result<Self> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (n - 1.0).abs() > DIRECTION_NORM_TOL {
            return Err(Error::InvalidArgument(format!("direction {v:?} has norm {n}")));
        }
        Ok(Direction(v))
    }

    pub fn axis(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Direction(v)
    }

    /// Direction at angle `theta` in the plane (d = 2).
    pub fn polar(theta: f64) -> Self {
        Direction(vec![theta.cos(), theta.sin()])
    }

    /// A uniformly distributed direction on S^{d-1}.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            // Box-Muller pairs give a standard normal vector.
            let v: Vec<f64> = (0..dim)
                .map(|_| {
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                })
                .collect();
            if let Ok(d) = Direction::new(v) {
                return d;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn neg(&self) -> Direction {
        Direction(self.0.iter().map(|c| -c).collect())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// An orthonormal basis of the tangent space ω^⊥ (d - 1 vectors).
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
        // Gram-Schmidt on the coordinate axes, least aligned first.
        let mut axes: Vec<usize> = (0..d).collect();
        axes.sort_by(|&a, &b| self.0[a].abs().total_cmp(&self.0[b].abs()));
        for &ax in &axes {
            if basis.len() + 1 == d {
                break;
            }
            let mut v = vec![0.0; d];
            v[ax] = 1.0;
            let p = self.dot(&v);
            for (vi, oi) in v.iter_mut().zip(&self.0) {
                *vi -= p * oi;
            }
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 1e-8 {
                basis.push(v.into_iter().map(|c| c / n).collect());
            }
        }
        basis
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.0
    }
}

/// Truncation toward zero in every coordinate: sgn(ξ_i)·⌊|ξ_i|⌋.
pub fn int_point(xi: &[f64]) -> LatticePoint {
    LatticePoint::new(xi.iter().map(|c| c.trunc() as i64).collect())
}

/// The measurement pair x = Int(sω), y = x + ζ.
pub fn measurement_points(s: f64, omega: &Direction, zeta: &LatticePoint) -> Result<(LatticePoint, LatticePoint)> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("s must be positive, got {s}")));
    }
    if omega.dim() != zeta.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            found: zeta.dim(),
        });
    }
    if zeta.is_origin() {
        return Err(Error::ZeroOffset);
    }
    let scaled: Vec<f64> = omega.components().iter().map(|c| s * c).collect();
    let x = int_point(&scaled);
    if x.is_origin() {
        return Err(Error::ZeroPoint);
    }
    let y = x.add(zeta);
    Ok((x, y))
}

/// Axis-aligned integer box `lo <= x <= hi` (inclusive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl SupportBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("malformed support box".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument(format!("empty support box {lo:?}..{hi:?}")));
        }
        Ok(SupportBox { lo, hi })
    }

    /// The cube [-r, r]^d.
    pub fn centered(dim: usize, radius: i64) -> Self {
        SupportBox {
            lo: vec![-radius; dim],
            hi: vec![radius; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &LatticePoint) -> bool {
        x.dim() == self.dim()
            && x.coords()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (l, h))| l <= c && c <= h)
    }

    /// All lattice points of the box in lexicographic order.
    pub fn points(&self) -> Vec<LatticePoint> {
        let mut out = vec![Vec::new()];
        for (l, h) in self.lo.iter().zip(&self.hi) {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (*l..=*h).map(move |c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(LatticePoint::new).collect()
    }
}

/// A compactly supported complex potential.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim: usize,
    entries: BTreeMap<LatticePoint, Complex64>,
    support_box: Option<SupportBox>,
}

impl Potential {
    /// Builds a potential whose support box is the bounding box of the
    /// non-zero entries.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (LatticePoint, Complex64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, v) in entries {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite value at {p}")));
            }
            if v != Complex64::new(0.0, 0.0) {
                map.insert(p, v);
            }
        }
        let support_box = bounding_box(dim, map.keys());
        Ok(Potential {
            dim,
            entries: map,
            support_box,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Potential {
            dim,
            entries: BTreeMap::new(),
            support_box: None,
        }
    }

    /// Replaces the support box by a larger one.
    pub fn with_support_box(mut self, b: SupportBox) -> Result<Self> {
        if b.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.dim(),
            });
        }
        if let Some(p) = self.entries.keys().find(|p| !b.contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "support box does not contain non-zero entry {p}"
            )));
        }
        self.support_box = Some(b);
        Ok(self)
    }

    /// Values drawn uniformly from `[lo, hi)` at every point of the box
    /// (plus an imaginary part from the same range when `complex`).
    pub fn random<R: Rng + ?Sized>(
        support: &SupportBox,
        range: (f64, f64),
        complex: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let (lo, hi) = range;
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("empty value range {lo}..{hi}")));
        }
        let mut entries = Vec::new();
        for p in support.points() {
            let re = rng.random_range(lo..hi);
            let im = if complex { rng.random_range(lo..hi) } else { 0.0 };
            entries.push((p, Complex64::new(re, im)));
        }
        Potential::new(support.dim(), entries)?.with_support_box(support.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_box(&self) -> Option<&SupportBox> {
        self.support_box.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    pub fn get(&self, x: &LatticePoint) -> Complex64 {
        self.entries.get(x).copied().unwrap_or_default()
    }

    /// Non-zero entries in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (&LatticePoint, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when `x` lies in the recorded support box.
    pub fn in_support_box(&self, x: &LatticePoint) -> bool {
        self.support_box.as_ref().is_some_and(|b| b.contains(x))
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(p, v)| PotentialRecord {
                    point: p.coords().to_vec(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
            support_box: self.support_box.clone(),
        }
    }

    pub fn from_file(file: PotentialFile) -> Result<Self> {
        let entries = file
            .entries
            .into_iter()
            .map(|r| (LatticePoint::new(r.point), Complex64::new(r.re, r.im)));
        let v = Potential::new(file.dim, entries)?;
        match file.support_box {
            Some(b) => v.with_support_box(b),
            None => Ok(v),
        }
    }

    /// Reads a potential file; `.toml` files are parsed as TOML, anything
    /// else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: PotentialFile = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        Potential::from_file(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = self.to_file();
        let text = if path.extension().is_some_and(|e| e == "toml") {
            toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn bounding_box<'a>(dim: usize, pts: impl Iterator<Item = &'a LatticePoint>) -> Option<SupportBox> {
    let mut lo = vec![i64::MAX; dim];
    let mut hi = vec![i64::MIN; dim];
    let mut any = false;
    for p in pts {
        any = true;
        for (i, &c) in p.coords().iter().enumerate() {
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    any.then_some(SupportBox { lo, hi })
}

/// On-disk potential: `dim` plus a list of `{point, re, im}` records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub dim: usize,
    pub entries: Vec<PotentialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_box: Option<SupportBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialRecord {
    pub point: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// An admissible energy E ∈ [-2d, 2d] \ S₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    value: f64,
    dim: usize,
    convex_regime: bool,
}

impl Energy {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 2d - 4 < |E| < 2d: Γ(E) is smooth and strictly convex.
    pub fn convex_regime(&self) -> bool {
        self.convex_regime
    }
}

/// The singular set S₀ = {2d - 4j : j = 0..=d} (band edges and van Hove
/// energies of the d-dimensional lattice).
pub fn singular_energies(dim: usize) -> Vec<f64> {
    (0..=dim).map(|j| 2.0 * dim as f64 - 4.0 * j as f64).collect()
}

pub fn check_energy(value: f64, dim: usize) -> Result<Energy> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("energy {value} is not finite")));
    }
    let max = 2.0 * dim as f64;
    if value.abs() > max {
        return Err(Error::OutOfBand { energy: value, dim });
    }
    // S₀ consists of small integers, so exact comparison is meaningful.
    if singular_energies(dim).contains(&value) {
        return Err(Error::SingularEnergy { energy: value, dim });
    }
    let convex_regime = value.abs() > max - 4.0 && value.abs() < max;
    Ok(Energy {
        value,
        dim,
        convex_regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_examples() {
        let e = check_energy(2.5, 2).unwrap();
        assert!(e.convex_regime());
        assert_eq!(check_energy(0.0, 2), Err(Error::SingularEnergy { energy: 0.0, dim: 2 }));
        assert_eq!(check_energy(7.0, 3), Err(Error::OutOfBand { energy: 7.0, dim: 3 }));
        assert!(!check_energy(1.0, 3).unwrap().convex_regime());
        assert!(check_energy(0.0, 1).unwrap().convex_regime());
        assert!(matches!(check_energy(-2.0, 1), Err(Error::SingularEnergy { .. })));
        assert!(matches!(check_energy(6.0, 3), Err(Error::SingularEnergy { .. })));
    }

    #[test]
    fn energy_grid_matches_singular_set() {
        for d in 1..=4usize {
            let s0 = singular_energies(d);
            // rational grid with step 1/4 covering [-2d, 2d]
            for i in -(8 * d as i64)..=(8 * d as i64) {
                let e = i as f64 / 4.0;
                let ok = check_energy(e, d).is_ok();
                assert_eq!(ok, !s0.contains(&e), "d={d} E={e}");
            }
        }
    }

    #[test]
    fn int_point_examples() {
        let xi: Vec<f64> = [0.6, -0.8].iter().map(|c| 2.7 * c).collect();
        assert_eq!(int_point(&xi), LatticePoint::new(vec![1, -2]));
        assert_eq!(int_point(&[0.9, -0.9]), LatticePoint::new(vec![0, 0]));
        assert_eq!(int_point(&[3.0, 4.0]), LatticePoint::new(vec![3, 4]));
    }

    #[test]
    fn measurement_point_examples() {
        let (x, y) = measurement_points(10.0, &Direction::axis(2, 0), &LatticePoint::new(vec![0, 1])).unwrap();
        assert_eq!(x.coords(), &[10, 0]);
        assert_eq!(y.coords(), &[10, 1]);

        let w = Direction::from_unit(vec![0.6, 0.8]).unwrap();
        let (x, y) = measurement_points(5.5, &w, &LatticePoint::new(vec![1, 0])).unwrap();
        assert_eq!(x.coords(), &[3, 4]);
        assert_eq!(y.coords(), &[4, 4]);

        assert_eq!(
            measurement_points(0.5, &Direction::axis(2, 0), &LatticePoint::new(vec![1, 0])),
            Err(Error::ZeroPoint)
        );
        assert_eq!(
            measurement_points(3.0, &Direction::axis(2, 0), &LatticePoint::origin(2)),
            Err(Error::ZeroOffset)
        );
    }

    #[test]
    fn norm_is_exact_sum_of_squares() {
        let x = LatticePoint::new(vec![3, -4, 12]);
        assert_eq!(x.norm_sq(), 169);
        assert_eq!(x.norm(), 13.0);
    }

    #[test]
    fn potential_box_and_file_round_trip() {
        let v = Potential::new(
            2,
            vec![
                (LatticePoint::new(vec![0, 0]), Complex64::new(0.5, 0.0)),
                (LatticePoint::new(vec![1, -1]), Complex64::new(-0.25, 0.1)),
                (LatticePoint::new(vec![2, 2]), Complex64::new(0.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(v.len(), 2);
        assert!(!v.is_real());
        let b = v.support_box().unwrap();
        assert_eq!(b.lo, vec![0, -1]);
        assert_eq!(b.hi, vec![1, 0]);
        let back = Potential::from_file(v.to_file()).unwrap();
        assert_eq!(back, v);
        assert!(v
            .clone()
            .with_support_box(SupportBox::new(vec![0, 0], vec![1, 1]).unwrap())
            .is_err());
    }

    #[test]
    fn box_points_enumerates_everything() {
        let b = SupportBox::centered(3, 1);
        let pts = b.points();
        assert_eq!(pts.len(), 27);
        assert!(pts.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let w = Direction::new(vec![0.3, -1.2, 0.7]).unwrap();
        let t = w.tangent_basis();
        assert_eq!(t.len(), 2);
        for (i, a) in t.iter().enumerate() {
            assert!(w.dot(a).abs() < 1e-14);
            for (j, b) in t.iter().enumerate() {
                let p: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lattice_phase_is_reduced_dot_product() {
        let k = [1.3, -0.4];
        let x = LatticePoint::new(vec![7, 3]);
        let direct = reduce_angle(1.3 * 7.0 - 0.4 * 3.0);
        assert!((lattice_phase(&k, &x) - direct).abs() < 1e-13);
        let shifted = [1.3 + 2.0 * PI, -0.4 - 4.0 * PI];
        assert!((lattice_phase(&shifted, &x) - direct).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn int_point_is_identity_on_integers(c in proptest::collection::vec(-1000i64..1000, 1..4)) {
            let xi: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            let p = int_point(&xi);
            prop_assert_eq!(p.coords(), c.as_slice());
        }

        #[test]
        fn int_point_within_unit_sup_distance(s in 0.1f64..1e4, theta in 0.0f64..(2.0 * PI)) {
            let w = Direction::polar(theta);
            let xi: Vec<f64> = w.components().iter().map(|c| s * c).collect();
            let x = int_point(&xi);
            for (a, b) in x.coords().iter().zip(&xi) {
                prop_assert!((*a as f64 - b).abs() < 1.0);
                // truncation never moves away from zero
                prop_assert!((*a as f64).abs() <= b.abs());
            }
        }
    }

    #[test]
    fn int_point_norm_ratio_tends_to_one() {
        let w = Direction::new(vec![0.37, -0.81, 0.2]).unwrap();
        let mut prev = f64::INFINITY;
        for p in 1..7 {
            let s = 10f64.powi(p);
            let xi: Vec<f64> = w.components().iter().map(|c| s * c).collect();
            let dev = (int_point(&xi).norm() / s - 1.0).abs();
            assert!(dev < 2.0 / s);
            assert!(dev <= prev + 1e-15 || dev < 1e-9);
            prev = dev;
        }
    }
}
