//! Nested boundary-value quadrature for the outgoing Green's function.
//!
//! G_m(x; z) = (1/π) ∫_0^π cos(k x₀) G_{m-1}(x'; z + 2 cos k) dk, ending in the
//! closed form G₁. The inner function is singular where Re(z) + 2 cos k hits
//! the set {2(m-1) - 4j}; the integral is split there, the variable o = ±u²
//! is used next to the split and the first panel is tanh-sinh. Values of z
//! at anchored nodes are carried as `Spectral` with the remainder computed
//! from the offset, so the singular behaviour is resolved to full precision.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::kernel::{green_1d_root, power, Spectral};
use super::quadrature::{gauss_rule, tanh_sinh};
use crate::error::Result;

/// Bandwidth bucket width.
pub const BUCKET: f64 = 8.0;
const MIN_OMEGA: f64 = 40.0;
const U_PANEL_RATIO: f64 = 0.7;
const DE_T_MAX: f64 = 4.0;

/// Bandwidth of the integrand for offset x: Ω = 2|x|₁ + 4, rounded up to a
/// multiple of [`BUCKET`].
pub fn bandwidth_bucket(x: &[i64]) -> u32 {
    let l1: i64 = x.iter().map(|c| c.abs()).sum();
    let omega = 2.0 * l1 as f64 + 4.0;
    ((omega / BUCKET).ceil() * BUCKET) as u32
}

/// Panel sizes for one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub bucket: u32,
    /// 1 for the base rule; 2 halves every panel and the tanh-sinh step.
    pub resolution: u32,
}

impl Grid {
    fn bulk_len(&self) -> f64 {
        20.0 / (self.bucket as f64).max(MIN_OMEGA) / self.resolution as f64
    }

    fn u_len(&self) -> f64 {
        U_PANEL_RATIO * self.bulk_len()
    }

    fn de_step(&self, complex: bool) -> f64 {
        let h = 0.125 / self.resolution as f64;
        if complex {
            0.5 * h
        } else {
            h
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Near {
    Zero,
    Pi,
    Mid,
}

/// A point k_c where Re(z) + 2 cos k_c = s, with t the distance to the
/// nearer end of [0, π] when `near` is not `Mid`.
#[derive(Clone, Copy, Debug)]
struct Split {
    s: f64,
    k: f64,
    t: f64,
    near: Near,
}

impl Split {
    /// 2 cos(k_c + o) - 2 cos(k_c), computed without cancellation.
    fn shift(&self, o: f64) -> f64 {
        let sm = match self.near {
            Near::Zero => (self.t + 0.5 * o).sin(),
            Near::Pi => (self.t - 0.5 * o).sin(),
            Near::Mid => (self.k + 0.5 * o).sin(),
        };
        -4.0 * sm * (0.5 * o).sin()
    }

    fn left_len(&self) -> f64 {
        match self.near {
            Near::Zero => self.t,
            Near::Pi => PI - self.t,
            Near::Mid => self.k,
        }
    }

    fn right_len(&self) -> f64 {
        match self.near {
            Near::Zero => PI - self.t,
            Near::Pi => self.t,
            Near::Mid => PI - self.k,
        }
    }
}

/// Singular values of G_m as a function of z.
pub fn singular_set(m: usize) -> impl Iterator<Item = f64> {
    (0..=m).map(move |j| 2.0 * m as f64 - 4.0 * j as f64)
}

/// The (at most one) split of the level integrating G_{m-1}.
fn find_split(m: usize, z: Spectral) -> Option<Split> {
    let dr = z.delta.re;
    for s in singular_set(m - 1) {
        let c = (s - z.base) - dr;
        if !(c > -2.0 && c < 2.0) {
            continue;
        }
        let split = if c > 1.0 {
            let g = (z.base + 2.0 - s) + dr;
            let t = 2.0 * (0.25 * g).sqrt().asin();
            Split {
                s,
                k: t,
                t,
                near: Near::Zero,
            }
        } else if c < -1.0 {
            let g = (s - z.base + 2.0) - dr;
            let t = 2.0 * (0.25 * g).sqrt().asin();
            Split {
                s,
                k: PI - t,
                t,
                near: Near::Pi,
            }
        } else {
            let k = (0.5 * c).acos();
            Split {
                s,
                k,
                t: k,
                near: Near::Mid,
            }
        };
        if split.t > 0.0 && split.t < PI {
            return Some(split);
        }
    }
    None
}

/// A quadrature node of one level: position, weight (including 1/π) and
/// the spectral parameter passed to the inner level.
#[derive(Clone, Copy, Debug)]
pub struct LevelNode {
    pub k: f64,
    pub weight: f64,
    pub z: Spectral,
}

fn push_gauss(out: &mut Vec<(f64, f64)>, a: f64, b: f64, panels: usize) {
    let len = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * len;
        for &(x, w) in gauss_rule() {
            out.push((lo + 0.5 * len * (x + 1.0), 0.5 * len * w));
        }
    }
}

/// Nodes (ρ, weight) on [0, len] for a half-segment whose left end is
/// singular: ρ = u² on u-panels, the first of them tanh-sinh, then
/// ordinary panels in ρ.
fn anchored_rule(len: f64, grid: &Grid, complex: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let lu = grid.u_len();
    let u_star = grid.bulk_len() / (2.0 * lu);
    let u_end = len.sqrt().min(u_star);
    let nu = (u_end / lu).ceil().max(1.0) as usize;
    let du = u_end / nu as f64;
    for n in tanh_sinh(du, grid.de_step(complex), DE_T_MAX) {
        out.push((n.left * n.left, 2.0 * n.left * n.weight));
    }
    let mut upan = Vec::new();
    if nu > 1 {
        push_gauss(&mut upan, du, u_end, nu - 1);
    }
    for (u, w) in upan {
        out.push((u * u, 2.0 * u * w));
    }
    let r0 = u_end * u_end;
    if len > r0 {
        let np = ((len - r0) / grid.bulk_len()).ceil().max(1.0) as usize;
        push_gauss(&mut out, r0, len, np);
    }
    out
}

/// Nodes of the level integrating G_{m-1} at parameter z.
pub fn level_nodes(m: usize, z: Spectral, grid: &Grid) -> Vec<LevelNode> {
    let complex = z.im() != 0.0;
    let mut nodes = Vec::new();
    match find_split(m, z) {
        None => {
            let mut pts = Vec::new();
            let np = (PI / grid.bulk_len()).ceil() as usize;
            push_gauss(&mut pts, 0.0, PI, np);
            for (k, w) in pts {
                nodes.push(LevelNode {
                    k,
                    weight: w / PI,
                    z: Spectral::new(z.base, z.delta + 2.0 * k.cos()),
                });
            }
        }
        Some(sp) => {
            let im = Complex64::new(0.0, z.im());
            for (sign, len) in [(-1.0, sp.left_len()), (1.0, sp.right_len())] {
                for (rho, w) in anchored_rule(len, grid, complex) {
                    let o = sign * rho;
                    nodes.push(LevelNode {
                        k: sp.k + o,
                        weight: w / PI,
                        z: Spectral::new(sp.s, im + sp.shift(o)),
                    });
                }
            }
        }
    }
    nodes
}

/// Inclusive range of one canonical coordinate.
pub type Range = (i64, i64);

fn range_len(r: &Range) -> usize {
    (r.1 - r.0 + 1) as usize
}

/// Evaluates G_m(x; z) for every x in the product of `ranges` (row-major,
/// first coordinate slowest), accumulating into `out`.
pub struct NestedEvaluator {
    grid: Grid,
    scratch: Vec<Vec<Complex64>>,
    cos_buf: Vec<f64>,
}

impl NestedEvaluator {
    pub fn new(grid: Grid) -> Self {
        NestedEvaluator {
            grid,
            scratch: Vec::new(),
            cos_buf: Vec::new(),
        }
    }

    pub fn evaluate(&mut self, z: Spectral, ranges: &[Range]) -> Result<Vec<Complex64>> {
        let total: usize = ranges.iter().map(range_len).product();
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        self.scratch = (0..ranges.len())
            .map(|l| {
                let n: usize = ranges[l + 1..].iter().map(range_len).product();
                vec![Complex64::new(0.0, 0.0); n]
            })
            .collect();
        self.level(0, z, ranges, &mut out)?;
        Ok(out)
    }

    fn level(&mut self, depth: usize, z: Spectral, ranges: &[Range], out: &mut [Complex64]) -> Result<()> {
        let m = ranges.len() - depth;
        let (lo, hi) = ranges[depth];
        if m == 1 {
            let (root, denom) = green_1d_root(z)?;
            let mut p = power(root, lo as u64) / denom;
            for slot in out.iter_mut().take((hi - lo + 1) as usize) {
                *slot -= p;
                p *= root;
            }
            return Ok(());
        }
        let nodes = level_nodes(m, z, &self.grid);
        let mut buf = std::mem::take(&mut self.scratch[depth]);
        let inner = buf.len();
        let n0 = (hi - lo + 1) as usize;
        for node in nodes {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            self.level(depth + 1, node.z, ranges, &mut buf)?;
            cos_range(node.k, lo, n0, &mut self.cos_buf);
            for (i, &c) in self.cos_buf.iter().enumerate() {
                let f = node.weight * c;
                let dst = &mut out[i * inner..(i + 1) * inner];
                for (d, b) in dst.iter_mut().zip(&buf) {
                    *d += f * b;
                }
            }
        }
        self.scratch[depth] = buf;
        Ok(())
    }
}

/// cos(k·x) for x = lo, lo+1, ..., by the three-term recurrence.
fn cos_range(k: f64, lo: i64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    let c0 = (k * lo as f64).cos();
    out.push(c0);
    if n == 1 {
        return;
    }
    let c1 = (k * (lo + 1) as f64).cos();
    out.push(c1);
    let two_c = 2.0 * k.cos();
    for i in 2..n {
        let next = two_c * out[i - 1] - out[i - 2];
        out.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_location_is_precise() {
        // Re z = 4 - 1e-12 at the level integrating G_1 (singular at ±2)
        let z = Spectral::new(4.0, Complex64::new(-1e-12, 0.0));
        let sp = find_split(2, z).unwrap();
        assert_eq!(sp.near, Near::Pi);
        // 4 - 1e-12 + 2cos(π - t) = 2  ⇒  4 sin²(t/2) = 1e-12
        let want = 2.0 * (0.25e-12f64).sqrt().asin();
        assert!((sp.t - want).abs() < 1e-22);
        assert!(find_split(2, Spectral::new(4.0, Complex64::new(1e-12, 0.0))).is_none());
    }

    #[test]
    fn at_most_one_split_per_level() {
        for m in 2..=4usize {
            for i in 0..200 {
                let re = -2.0 * m as f64 + 4.0 * m as f64 * (i as f64 + 0.5) / 200.0;
                let n = singular_set(m - 1)
                    .filter(|s| {
                        let c = s - re;
                        c > -2.0 && c < 2.0
                    })
                    .count();
                assert!(n <= 1);
            }
        }
    }

    #[test]
    fn anchored_shift_matches_direct_difference() {
        let z = Spectral::new(2.5, Complex64::new(0.0, 0.0));
        let sp = find_split(2, z).unwrap();
        for o in [0.3, -0.2, 1e-3, -1e-5] {
            let direct = 2.0 * (sp.k + o).cos() - 2.0 * sp.k.cos();
            assert!((sp.shift(o) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_integrate_constants() {
        let grid = Grid {
            bucket: 40,
            resolution: 1,
        };
        for re in [2.5, 0.7, 3.9, 5.0] {
            let nodes = level_nodes(2, Spectral::new(re, Complex64::new(0.0, 0.0)), &grid);
            let s: f64 = nodes.iter().map(|n| n.weight).sum();
            assert!((s - 1.0).abs() < 1e-13, "re = {re}: {s}");
            let c: f64 = nodes.iter().map(|n| n.weight * (3.0 * n.k).cos()).sum();
            assert!(c.abs() < 1e-13);
        }
    }

    #[test]
    fn cos_recurrence() {
        let mut v = Vec::new();
        cos_range(0.731, 37, 9, &mut v);
        for (i, c) in v.iter().enumerate() {
            assert!((c - (0.731 * (37 + i) as f64).cos()).abs() < 1e-13);
        }
    }
}
