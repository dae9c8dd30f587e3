//! One-dimensional quadrature rules for standardized factor laws.
//!
//! All rules integrate against *probability* measures, so weights sum to 1
//! and the first moments reproduce the standardized law exactly: mean 0,
//! variance 1. Nodes and weights come from the Golub–Welsch algorithm
//! (symmetric tridiagonal Jacobi matrix, eigenvalues are the nodes, squared
//! first eigenvector components are the normalized weights).

use nalgebra::DMatrix;

/// Nodes and weights of a quadrature rule for a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// k-th raw moment under the rule.
    pub fn moment(&self, k: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x.powi(k as i32))
            .sum()
    }
}

/// Eigendecomposition of a symmetric tridiagonal Jacobi matrix with zero
/// diagonal and the given off-diagonal, returning (nodes, first-row-of-U).
fn golub_welsch(offdiag: &[f64]) -> QuadratureRule {
    let k = offdiag.len() + 1;
    let mut jacobi = DMatrix::<f64>::zeros(k, k);
    for (i, &b) in offdiag.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Hermite rule for the standard normal measure: `sum w_i f(x_i)`
/// approximates `E[f(Z)]`, Z ~ N(0,1). Exact for polynomials of degree
/// 2k−1.
pub fn gauss_hermite(points: usize) -> QuadratureRule {
    assert!(points >= 1, "quadrature rule needs at least one node");
    // probabilists' Hermite recurrence: off-diagonal sqrt(i)
    let offdiag: Vec<f64> = (1..points).map(|i| (i as f64).sqrt()).collect();
    golub_welsch(&offdiag)
}

/// Gauss–Legendre rule for the uniform measure on [−√3, √3] (the
/// standardized uniform law: mean 0, variance 1).
pub fn gauss_legendre_uniform(points: usize) -> QuadratureRule {
    assert!(points >= 1, "quadrature rule needs at least one node");
    // Legendre recurrence on [-1,1]: off-diagonal i/sqrt(4i^2-1)
    let offdiag: Vec<f64> = (1..points)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    let mut rule = golub_welsch(&offdiag);
    let scale = 3f64.sqrt();
    for x in &mut rule.nodes {
        *x *= scale;
    }
    rule
}

/// Exact two-point rule for the Rademacher law (±1 with probability ½).
pub fn rademacher_rule() -> QuadratureRule {
    QuadratureRule {
        nodes: vec![-1.0, 1.0],
        weights: vec![0.5, 0.5],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn check_standardized(rule: &QuadratureRule, fourth: f64) {
        assert_abs_diff_eq!(rule.moment(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.moment(1), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rule.moment(2), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rule.moment(4), fourth, epsilon = 1e-8);
    }

    #[test]
    fn hermite_moments() {
        for k in [8, 16, 48, 64] {
            check_standardized(&gauss_hermite(k), 3.0);
        }
        // sixth moment of N(0,1) is 15
        assert_abs_diff_eq!(gauss_hermite(16).moment(6), 15.0, epsilon = 1e-8);
    }

    #[test]
    fn legendre_uniform_moments() {
        for k in [8, 16, 48] {
            check_standardized(&gauss_legendre_uniform(k), 9.0 / 5.0);
        }
    }

    #[test]
    fn rademacher_moments() {
        check_standardized(&rademacher_rule(), 1.0);
    }

    #[test]
    fn hermite_integrates_smooth_function() {
        // E[cos(Z)] = exp(-1/2)
        let rule = gauss_hermite(48);
        let got: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.cos())
            .sum();
        assert_abs_diff_eq!(got, (-0.5f64).exp(), epsilon = 1e-13);
    }
}
