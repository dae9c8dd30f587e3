//! One-time eigendecomposition of the class covariance and the
//! q-dimensional signal-subspace algebra.
//!
//! With `Q = (lambda I + theta Sigma)^{-1}`, every quantity the
//! self-consistent system needs reduces to scalar sums over the spectrum
//! of Sigma plus q×q algebra on the informative Gram matrix: because the
//! signal subspace is Sigma-invariant (`Sigma V_info = V_info G`),
//! `Q V_info = V_info (lambda I_q + theta G)^{-1}`. The O(p^3) work
//! happens once per model; a lambda sweep reuses the spectrum.

use crate::model::LfmmSpec;
use crate::Error;
use nalgebra::{DMatrix, DVector};

/// Which trace normalization `sigma^2 = (gamma^2/·) tr (Q Sigma)^2` uses.
/// The per-sample (1/n) form is the production default; the per-dimension
/// variant exists for sensitivity tests only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sigma2Norm {
    #[default]
    PerSample,
    PerDimension,
}

/// Cached spectral data for one (model, n, lambda) triple.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    /// Eigenvalues of Sigma, sorted descending, all positive.
    sigma_eigs: DVector<f64>,
    /// Matching orthonormal eigenvectors (columns).
    eigvecs: DMatrix<f64>,
    /// Informative Gram matrix `G = V_infoᵀ V_info`.
    gram: DMatrix<f64>,
    s: DVector<f64>,
    n: usize,
    p: usize,
    lambda: f64,
}

impl SpectralCache {
    /// Eigendecompose `Sigma = V Vᵀ` and capture the signal-subspace data.
    pub fn build(spec: &LfmmSpec, n: usize, lambda: f64) -> Result<Self, Error> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveLambda(lambda));
        }
        if n == 0 {
            return Err(Error::InvalidSpec {
                violations: vec!["sample size n must be >= 1".to_string()],
            });
        }
        let p = spec.p();
        let sigma = spec.class_covariance();
        let trace = sigma.trace();
        let eig = sigma.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let sigma_eigs = DVector::from_fn(p, |i, _| eig.eigenvalues[order[i]]);
        let eigvecs = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        if sigma_eigs.min() <= 0.0 {
            return Err(Error::Eigensolver(format!(
                "Sigma is not positive definite (min eigenvalue {:.3e})",
                sigma_eigs.min()
            )));
        }
        let rel_defect = (sigma_eigs.sum() - trace).abs() / trace.abs().max(1.0);
        if rel_defect > 1e-8 {
            return Err(Error::Eigensolver(format!(
                "eigenvalue sum disagrees with tr Sigma (relative defect {rel_defect:.3e})"
            )));
        }
        let v_info = spec.v_info();
        let gram = v_info.transpose() * v_info;
        Ok(SpectralCache {
            sigma_eigs,
            eigvecs,
            gram,
            s: spec.s().clone(),
            n,
            p,
            lambda,
        })
    }

    /// Reuse the spectrum for a different ridge strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, Error> {
        if !(lambda > 0.0) {
            return Err(Error::NonPositiveLambda(lambda));
        }
        Ok(SpectralCache {
            lambda,
            ..self.clone()
        })
    }

    pub fn sigma_eigs(&self) -> &DVector<f64> {
        &self.sigma_eigs
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.s.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `kappa(theta) = (1/n) tr Sigma Q = (1/n) sum_i s_i/(lambda + theta s_i)`.
    pub fn kappa_of_theta(&self, theta: f64) -> f64 {
        assert!(theta >= 0.0, "theta must be nonnegative");
        self.sigma_eigs
            .iter()
            .map(|&e| e / (self.lambda + theta * e))
            .sum::<f64>()
            / self.n as f64
    }

    /// `(1/n) tr (Q Sigma)^2`, the variance transfer factor.
    pub fn trace_qsigma_sq(&self, theta: f64) -> f64 {
        self.trace_qsigma_sq_with(theta, Sigma2Norm::PerSample)
    }

    pub fn trace_qsigma_sq_with(&self, theta: f64, norm: Sigma2Norm) -> f64 {
        assert!(theta >= 0.0, "theta must be nonnegative");
        let denom = match norm {
            Sigma2Norm::PerSample => self.n as f64,
            Sigma2Norm::PerDimension => self.p as f64,
        };
        self.sigma_eigs
            .iter()
            .map(|&e| (e / (self.lambda + theta * e)).powi(2))
            .sum::<f64>()
            / denom
    }

    /// `sigma^2 = (gamma^2/n) tr (Q Sigma)^2`.
    pub fn sigma2_of(&self, theta: f64, gamma: f64) -> f64 {
        assert!(gamma >= 0.0, "gamma must be nonnegative");
        gamma * gamma * self.trace_qsigma_sq(theta)
    }

    /// Signal response of the resolvent: with `xi = eta mu + sum_k omega_k v_k`,
    /// returns `m = muᵀ Q xi` and `psi_k = v_kᵀ Q xi` through the exact
    /// q-dimensional reduction `psi = G (lambda I_q + theta G)^{-1} (eta s + omega)`.
    pub fn signal_response(&self, theta: f64, eta: f64, omega: &DVector<f64>) -> (f64, DVector<f64>) {
        assert!(theta >= 0.0, "theta must be nonnegative");
        assert_eq!(omega.len(), self.q());
        let q = self.q();
        let shifted = DMatrix::identity(q, q) * self.lambda + &self.gram * theta;
        let rhs = &self.s * eta + omega;
        let w = shifted
            .lu()
            .solve(&rhs)
            .expect("lambda I + theta G is positive definite for lambda > 0");
        let psi = &self.gram * w;
        let m = self.s.dot(&psi);
        (m, psi)
    }

    /// Apply `Q = (lambda I + theta Sigma)^{-1}` to a vector through the
    /// eigenbasis.
    pub fn q_apply(&self, theta: f64, v: &DVector<f64>) -> DVector<f64> {
        assert!(theta >= 0.0, "theta must be nonnegative");
        let mut coeffs = self.eigvecs.transpose() * v;
        for i in 0..self.p {
            coeffs[i] /= self.lambda + theta * self.sigma_eigs[i];
        }
        &self.eigvecs * coeffs
    }

    /// Apply the symmetric square root `Sigma^{1/2}` to a vector.
    pub fn sigma_sqrt_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.eigvecs.transpose() * v;
        for i in 0..self.p {
            coeffs[i] *= self.sigma_eigs[i].sqrt();
        }
        &self.eigvecs * coeffs
    }
}
