//! Outgoing lattice Green's function of (-Δ - E - iε) on Z^d, d ≤ 3.

mod kernel;
mod nested;
mod quadrature;
mod torus;

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{loglog_slope, LineFit};
use crate::lattice::{int_point, Direction, Energy, LatticePoint};

pub use kernel::{green_1d, h1, h1_root, Spectral, BAND_EDGE_TOL};
pub use nested::{bandwidth_bucket, level_nodes, Grid, LevelNode, NestedEvaluator};
pub use quadrature::{gauss_rule, tanh_sinh, DeNode, GAUSS_ORDER};
pub use torus::{green_torus, green_torus_direct, TorusResult};

/// Default absorption ladder ε_j = 0.1·2^{-j}, j = 0..=6.
pub fn default_ladder() -> Vec<f64> {
    (0..=6).map(|j| 0.1 * 0.5f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenConfig {
    /// Recompute at doubled resolution and compare.
    pub verify: bool,
    /// Allowed change between the two resolutions.
    pub tol: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            verify: true,
            tol: 1e-9,
        }
    }
}

/// Offsets are reduced to sorted absolute values; G is invariant under the
/// hyperoctahedral group so this is the cache key.
pub fn canonical_offset(x: &[i64]) -> Vec<i64> {
    let mut c: Vec<i64> = x.iter().map(|v| v.abs()).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c
}

/// Cached evaluator of G(x; E + iε).
pub struct GreenEvaluator {
    energy: Energy,
    eps: f64,
    config: GreenConfig,
    cache: RwLock<HashMap<Vec<i64>, Complex64>>,
}

impl GreenEvaluator {
    pub fn new(energy: Energy, eps: f64, config: GreenConfig) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("absorption must be >= 0, got {eps}")));
        }
        if energy.dim() > 3 {
            return Err(Error::InvalidArgument("green supports d <= 3".into()));
        }
        Ok(GreenEvaluator {
            energy,
            eps,
            config,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn config(&self) -> &GreenConfig {
        &self.config
    }

    pub fn spectral(&self) -> Spectral {
        Spectral::energy(self.energy.value(), self.eps)
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("green cache poisoned").len()
    }

    pub fn value(&self, x: &LatticePoint) -> Result<Complex64> {
        Ok(self.values(std::slice::from_ref(x))?[0])
    }

    /// G at every requested offset. Offsets are grouped by bandwidth bucket
    /// and each group is computed on the bounding box of its canonical
    /// offsets, so the value at a given offset never depends on the batch.
    pub fn values(&self, xs: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        if let Some(bad) = xs.iter().find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let keys: Vec<Vec<i64>> = xs.iter().map(|x| canonical_offset(x.coords())).collect();
        let missing: Vec<Vec<i64>> = {
            let cache = self.cache.read().expect("green cache poisoned");
            let mut m: Vec<Vec<i64>> = keys.iter().filter(|k| !cache.contains_key(*k)).cloned().collect();
            m.sort();
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let mut groups: BTreeMap<u32, Vec<Vec<i64>>> = BTreeMap::new();
            for k in missing {
                groups.entry(bandwidth_bucket(&k)).or_default().push(k);
            }
            for (bucket, group) in groups {
                let computed = self.compute_group(bucket, &group)?;
                let mut cache = self.cache.write().expect("green cache poisoned");
                for (k, v) in group.into_iter().zip(computed) {
                    cache.insert(k, v);
                }
            }
        }
        let cache = self.cache.read().expect("green cache poisoned");
        Ok(keys.iter().map(|k| cache[k]).collect())
    }

    fn compute_group(&self, bucket: u32, group: &[Vec<i64>]) -> Result<Vec<Complex64>> {
        let z = self.spectral();
        if self.dim() == 1 {
            return group.iter().map(|k| green_1d(k[0], z)).collect();
        }
        let d = self.dim();
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let lo = group.iter().map(|k| k[i]).min().expect("non-empty group");
                let hi = group.iter().map(|k| k[i]).max().expect("non-empty group");
                (lo, hi)
            })
            .collect();
        let index = |k: &[i64]| {
            let mut idx = 0usize;
            for (i, &(lo, hi)) in ranges.iter().enumerate() {
                idx = idx * (hi - lo + 1) as usize + (k[i] - lo) as usize;
            }
            idx
        };
        let base = NestedEvaluator::new(Grid { bucket, resolution: 1 }).evaluate(z, &ranges)?;
        if !self.config.verify {
            return Ok(group.iter().map(|k| base[index(k)]).collect());
        }
        let fine = NestedEvaluator::new(Grid { bucket, resolution: 2 }).evaluate(z, &ranges)?;
        let mut out = Vec::with_capacity(group.len());
        for k in group {
            let i = index(k);
            let change = (fine[i] - base[i]).norm();
            if change > self.config.tol {
                return Err(Error::QuadratureNotConverged {
                    change,
                    tol: self.config.tol,
                });
            }
            out.push(fine[i]);
        }
        Ok(out)
    }

    /// |(-Δ - E - iε)G(x) - δ_{x,0}|.
    pub fn defect(&self, x: &LatticePoint) -> Result<f64> {
        let mut pts = vec![x.clone()];
        pts.extend(x.neighbors());
        let v = self.values(&pts)?;
        let z = self.spectral().value();
        let lap: Complex64 = v[1..].iter().sum();
        let delta = if x.is_origin() { 1.0 } else { 0.0 };
        Ok((-lap - z * v[0] - delta).norm())
    }

    /// Maximum defect over the block [-r, r]^d.
    pub fn max_defect(&self, radius: i64) -> Result<f64> {
        let pts = crate::lattice::SupportBox::centered(self.dim(), radius).points();
        let mut all = pts.clone();
        for p in &pts {
            all.extend(p.neighbors());
        }
        self.values(&all)?;
        pts.iter().try_fold(0.0f64, |m, p| Ok(m.max(self.defect(p)?)))
    }
}

/// Single evaluation of G(x; E + iε).
pub fn green(x: &LatticePoint, e: &Energy, eps: f64, config: &GreenConfig) -> Result<Complex64> {
    GreenEvaluator::new(*e, eps, config.clone())?.value(x)
}

/// Result of the ε → 0 extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolated {
    pub value: Complex64,
    pub error_estimate: f64,
    pub ladder: Vec<f64>,
    pub samples: Vec<Complex64>,
}

/// G(x; E + i0) by Richardson extrapolation (3-point Neville in ε on the
/// three smallest rungs) over an absorption ladder.
pub fn green_extrapolated(x: &LatticePoint, e: &Energy, ladder: &[f64], config: &GreenConfig) -> Result<Extrapolated> {
    if ladder.len() < 4 {
        return Err(Error::InvalidArgument("the ladder needs at least four rungs".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("ladder must be positive and decreasing".into()));
    }
    let samples: Vec<Complex64> = ladder
        .iter()
        .map(|&eps| green(x, e, eps, config))
        .collect::<Result<_>>()?;
    let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if diffs.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-14) {
        return Err(Error::ExtrapolationUnstable(format!(
            "successive differences are not decreasing: {diffs:?}"
        )));
    }
    let n = ladder.len();
    let value = neville_at_zero(&ladder[n - 3..], &samples[n - 3..]);
    let prev = neville_at_zero(&ladder[n - 4..n - 1], &samples[n - 4..n - 1]);
    Ok(Extrapolated {
        value,
        error_estimate: (value - prev).norm(),
        ladder: ladder.to_vec(),
        samples,
    })
}

/// Polynomial interpolation through (x_i, y_i) evaluated at 0.
fn neville_at_zero(x: &[f64], y: &[Complex64]) -> Complex64 {
    let mut p = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i] * x[i + m] - p[i + 1] * x[i]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}

/// Fitted slope of log|G(Int(sω))| against log s.
pub fn green_farfield_check(omega: &Direction, green: &GreenEvaluator, s_grid: &[f64]) -> Result<LineFit> {
    let e = green.energy();
    if !e.convex_regime() {
        return Err(Error::NonConvexRegime {
            energy: e.value(),
            dim: e.dim(),
        });
    }
    let pts: Vec<LatticePoint> = s_grid
        .iter()
        .map(|&s| {
            let xi: Vec<f64> = omega.components().iter().map(|c| s * c).collect();
            int_point(&xi)
        })
        .collect();
    let vals = green.values(&pts)?;
    let mags: Vec<f64> = vals.iter().map(|v| v.norm()).collect();
    loglog_slope(s_grid, &mags)
}
