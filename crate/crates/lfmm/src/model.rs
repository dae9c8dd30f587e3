//! The linear factor mixture model: construction, validation, sampling,
//! and the matched-moments Gaussian mixture.
//!
//! A feature vector is `x = sum_k (y s_k + e_k) v_k` with label `y = ±1`,
//! deterministic factor directions `v_1..v_p`, signals `s_k > 0` on the
//! first `q` (informative) factors, and standardized independent noises
//! `e_k`. Class-conditional moments are `mu = sum_{k<=q} s_k v_k` and
//! `Sigma = V Vᵀ`.

use crate::quadrature::{self, QuadratureRule};
use crate::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A standardized factor noise law: mean 0, variance 1, symmetric about 0,
/// finite fourth moment. The catalog is closed; a new law would need a
/// moment certification and a quadrature rule registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Standard normal.
    Gaussian,
    /// ±1 with probability ½ each.
    Rademacher,
    /// Uniform on [−√3, √3].
    Uniform,
}

impl NoiseLaw {
    pub fn from_name(name: &str) -> Result<Self, Error> {
        match name {
            "gaussian" => Ok(NoiseLaw::Gaussian),
            "rademacher" => Ok(NoiseLaw::Rademacher),
            "uniform" => Ok(NoiseLaw::Uniform),
            other => Err(Error::UnsupportedNoiseLaw(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseLaw::Gaussian => "gaussian",
            NoiseLaw::Rademacher => "rademacher",
            NoiseLaw::Uniform => "uniform",
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, NoiseLaw::Gaussian)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::Gaussian => StandardNormal.sample(rng),
            NoiseLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::Uniform => rng.gen_range(-(3f64.sqrt())..3f64.sqrt()),
        }
    }

    /// Quadrature rule realizing `E[f(e)]` for this law. `points` is used
    /// by the continuous laws; the Rademacher rule is exact with 2 nodes.
    pub fn quadrature_rule(&self, points: usize) -> QuadratureRule {
        match self {
            NoiseLaw::Gaussian => quadrature::gauss_hermite(points),
            NoiseLaw::Rademacher => quadrature::rademacher_rule(),
            NoiseLaw::Uniform => quadrature::gauss_legendre_uniform(points),
        }
    }
}

/// Full generative description of a linear factor mixture model.
#[derive(Debug, Clone, PartialEq)]
pub struct LfmmSpec {
    p: usize,
    q: usize,
    s: DVector<f64>,
    v: DMatrix<f64>,
    noise_laws: Vec<NoiseLaw>,
    rho: f64,
}

/// A sampled training or test set: feature columns plus ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<i8>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

/// One validation check with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Structured validation outcome: per-invariant pass/fail plus the norm
/// diagnostics the high-dimensional regime cares about.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub mu_norm: f64,
    pub sigma_norm: f64,
    pub sigma_inv_norm: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Relative tolerance for the signal/noise subspace orthogonality check.
/// The theory assumes exact orthogonality; floating point needs a margin.
pub const ORTHOGONALITY_RTOL: f64 = 1e-8;

impl LfmmSpec {
    /// Build a spec from a factor matrix `v` (columns are the directions,
    /// the first `s.len()` of them informative), noise laws (one per
    /// factor), and the class prior `rho = Pr(y = -1)`.
    pub fn new(
        v: DMatrix<f64>,
        s: Vec<f64>,
        noise_laws: Vec<NoiseLaw>,
        rho: f64,
    ) -> Result<Self, Error> {
        let p = v.nrows();
        let q = s.len();
        let mut violations = Vec::new();
        if v.ncols() != p {
            violations.push(format!("V must be square, got {}x{}", p, v.ncols()));
        }
        if q == 0 || q > p {
            violations.push(format!("need 1 <= q <= p, got q={q}, p={p}"));
        }
        if noise_laws.len() != p {
            violations.push(format!(
                "need one noise law per factor, got {} for p={p}",
                noise_laws.len()
            ));
        }
        if !(0.0..=1.0).contains(&rho) {
            violations.push(format!("rho must lie in [0,1], got {rho}"));
        }
        if s.iter().any(|&sk| !(sk > 0.0)) {
            violations.push("every informative signal s_k must be > 0".to_string());
        }
        if !violations.is_empty() {
            return Err(Error::InvalidSpec { violations });
        }
        Ok(LfmmSpec {
            p,
            q,
            s: DVector::from_vec(s),
            v,
            noise_laws,
            rho,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Direction of factor `k` (column of V).
    pub fn v_col(&self, k: usize) -> DVector<f64> {
        self.v.column(k).into_owned()
    }

    /// The informative block `[v_1 .. v_q]`.
    pub fn v_info(&self) -> DMatrix<f64> {
        self.v.columns(0, self.q).into_owned()
    }

    pub fn noise_laws(&self) -> &[NoiseLaw] {
        &self.noise_laws
    }

    /// Laws of the informative factors only; these are the only laws the
    /// asymptotic system ever sees.
    pub fn informative_laws(&self) -> &[NoiseLaw] {
        &self.noise_laws[..self.q]
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Class-conditional mean for `y = +1`: `mu = sum_{k<=q} s_k v_k`.
    pub fn class_mean(&self) -> DVector<f64> {
        self.v_info() * &self.s
    }

    /// Class-conditional covariance `Sigma = V Vᵀ` (same for both classes).
    pub fn class_covariance(&self) -> DMatrix<f64> {
        &self.v * self.v.transpose()
    }

    /// Check the model invariants and collect the norm diagnostics.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        // signal/noise orthogonality
        let mut max_rel = 0.0f64;
        for j in 0..self.q {
            let vj = self.v.column(j);
            let nj = vj.norm();
            for k in self.q..self.p {
                let vk = self.v.column(k);
                let rel = vj.dot(&vk).abs() / (nj * vk.norm());
                max_rel = max_rel.max(rel);
            }
        }
        checks.push(CheckResult {
            name: "orthogonality".to_string(),
            passed: max_rel <= ORTHOGONALITY_RTOL,
            detail: format!("max relative signal/noise overlap {max_rel:.3e}"),
        });

        // full column rank of V, via its singular values (also feeds the
        // Sigma norm diagnostics since sigma(Sigma) = sigma(V)^2)
        let svals = self.v.clone().singular_values();
        let smax = svals.max();
        let smin = svals.min();
        checks.push(CheckResult {
            name: "rank".to_string(),
            passed: smin > 1e-10 * smax.max(1.0),
            detail: format!("singular value range [{smin:.3e}, {smax:.3e}]"),
        });

        checks.push(CheckResult {
            name: "signal_positivity".to_string(),
            passed: self.s.iter().all(|&sk| sk > 0.0),
            detail: format!("min s_k = {:.3e}", self.s.min()),
        });

        ValidationReport {
            checks,
            mu_norm: self.class_mean().norm(),
            sigma_norm: smax * smax,
            sigma_inv_norm: if smin > 0.0 { 1.0 / (smin * smin) } else { f64::INFINITY },
        }
    }

    /// Draw `n` labeled samples. Deterministic under `seed`; per-sample
    /// draw order is label first, then the p factor noises.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mu = self.class_mean();
        let mut e = DMatrix::<f64>::zeros(self.p, n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label: i8 = if rng.gen::<f64>() < self.rho { -1 } else { 1 };
            y.push(label);
            for k in 0..self.p {
                e[(k, i)] = self.noise_laws[k].sample(&mut rng);
            }
        }
        let mut x = &self.v * e;
        for (i, &label) in y.iter().enumerate() {
            let sgn = label as f64;
            for r in 0..self.p {
                x[(r, i)] += sgn * mu[r];
            }
        }
        Dataset { x, y }
    }

    /// Draw `n` (label, score) pairs for a fixed classifier without
    /// materializing the feature matrix, using
    /// `betaᵀx = y betaᵀmu + (Vᵀbeta)ᵀ e`. Distribution-identical to
    /// scoring `sample(n, seed)` column by column.
    pub fn sample_scores(&self, beta: &DVector<f64>, n: usize, seed: u64) -> Vec<(i8, f64)> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bmu = beta.dot(&self.class_mean());
        let w = self.v.transpose() * beta;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let label: i8 = if rng.gen::<f64>() < self.rho { -1 } else { 1 };
            let mut score = label as f64 * bmu;
            for k in 0..self.p {
                score += w[k] * self.noise_laws[k].sample(&mut rng);
            }
            out.push((label, score));
        }
        out
    }

    /// The Gaussian mixture with the same class-conditional means and
    /// covariances: every noise law replaced by the standard normal.
    pub fn equivalent_gmm(&self) -> LfmmSpec {
        LfmmSpec {
            noise_laws: vec![NoiseLaw::Gaussian; self.p],
            ..self.clone()
        }
    }
}

/// Sample a Haar-distributed orthogonal matrix: Gaussian matrix, QR, and
/// the diagonal of R forced positive so the distribution is exactly Haar
/// and the draw is deterministic under the seed.
pub fn build_haar_orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    assert!(p >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let qr = a.qr();
    let r_diag: Vec<f64> = (0..p).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
