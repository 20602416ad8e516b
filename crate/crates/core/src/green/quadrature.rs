//! Panel rules: Gauss-Legendre for smooth panels, tanh-sinh for panels with
//! an endpoint singularity.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

/// Number of Gauss-Legendre nodes per panel.
pub const GAUSS_ORDER: usize = 20;

/// Gauss-Legendre nodes and weights on [-1, 1], cached.
pub fn gauss_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut v = GaussLegendre::new(GAUSS_ORDER)
            .expect("valid order")
            .into_node_weight_pairs();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

/// A tanh-sinh node on [0, L]: distance from the left end, distance from
/// the right end, and weight. Both gaps are computed without cancellation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeNode {
    pub left: f64,
    pub right: f64,
    pub weight: f64,
}

/// tanh-sinh rule on [0, len] with step `h` and truncation |t| ≤ `t_max`.
/// Nodes whose weight falls below 1e-300 are dropped.
pub fn tanh_sinh(len: f64, h: f64, t_max: f64) -> Vec<DeNode> {
    let n = (t_max / h).round() as i64;
    let mut out = Vec::with_capacity(2 * n as usize + 1);
    for j in -n..=n {
        let t = j as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        // x = len / (1 + e^{-2u}); gaps from both ends
        let ep = (2.0 * u).exp();
        let em = (-2.0 * u).exp();
        let left = len / (1.0 + em);
        let right = len / (1.0 + ep);
        let ch = u.cosh();
        let weight = h * len * FRAC_PI_2 * t.cosh() / (2.0 * ch * ch);
        if weight > 1e-300 && left > 0.0 && right > 0.0 {
            out.push(DeNode { left, right, weight });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let s: f64 = gauss_rule().iter().map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        let tot: f64 = gauss_rule().iter().map(|(_, w)| w).sum();
        assert!((tot - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let nodes = tanh_sinh(2.0, 1.0 / 8.0, 4.0);
        // ∫_0^2 x^{-1/2} dx = 2√2
        let s: f64 = nodes.iter().map(|n| n.weight / n.left.sqrt()).sum();
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-13);
        // ∫_0^2 ln x dx = 2 ln 2 - 2
        let s: f64 = nodes.iter().map(|n| n.weight * n.left.ln()).sum();
        assert!((s - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-13);
        for n in &nodes {
            assert!((n.left + n.right - 2.0).abs() < 1e-15);
        }
    }
}
