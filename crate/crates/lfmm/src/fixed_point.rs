//! The self-consistent system for the order parameters and its solver.
//!
//! The asymptotic behavior of the ridge ERM classifier is captured by
//! `q+3` scalars `(theta, eta, gamma, omega_1..omega_q)` coupled through
//! the score variable `r = y m + sigma ẽ + sum_k psi_k e_k`:
//!
//! ```text
//! theta = -E[h'_kappa(r,y)]        eta = E[y h_kappa(r,y)]
//! gamma = sqrt(E[h_kappa(r,y)^2])  omega_k = E[h_kappa(r,y) e_k] + theta psi_k
//! ```
//!
//! with `kappa, m, sigma^2, psi` the spectral-cache responses at the
//! current parameters. Expectations over `(y, e_1..e_q, ẽ)` are realized
//! by a tensor-product quadrature grid; noise factors `k > q` never enter
//! the system, so they are not gridded at all.

use crate::losses::Loss;
use crate::model::{LfmmSpec, NoiseLaw};
use crate::quadrature::{gauss_hermite, QuadratureRule};
use crate::spectral::SpectralCache;
use crate::Error;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Tensor-product quadrature over `(y, e_1..e_q, ẽ)`.
///
/// Weights sum to 1; each factor dimension reproduces its law's moments to
/// quadrature exactness; the label marginal carries `Pr(y=-1) = rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationGrid {
    q: usize,
    rho: f64,
    /// Per informative factor: the law and its 1-d rule.
    factor_laws: Vec<NoiseLaw>,
    factor_rules: Vec<QuadratureRule>,
    /// Gauss–Hermite rule for the Gaussian ẽ coordinate.
    tilde_rule: QuadratureRule,
    // flattened nodes, node-major; e has stride q
    y: Vec<f64>,
    e: Vec<f64>,
    etilde: Vec<f64>,
    w: Vec<f64>,
}

impl ExpectationGrid {
    /// Build the grid for a model's informative factors. `gh_points`
    /// controls the Gauss–Hermite/Gauss–Legendre resolutions (Rademacher
    /// factors always get their exact 2-point rule).
    pub fn build(spec: &LfmmSpec, gh_points: usize) -> Result<Self, Error> {
        if gh_points < 8 {
            return Err(Error::Config(format!(
                "gh_points must be at least 8, got {gh_points}"
            )));
        }
        let q = spec.q();
        let rho = spec.rho();
        let factor_laws: Vec<NoiseLaw> = spec.informative_laws().to_vec();
        let factor_rules: Vec<QuadratureRule> = factor_laws
            .iter()
            .map(|law| law.quadrature_rule(gh_points))
            .collect();
        let tilde_rule = gauss_hermite(gh_points);

        let n_nodes: usize =
            2 * factor_rules.iter().map(|r| r.len()).product::<usize>() * tilde_rule.len();
        let mut y = Vec::with_capacity(n_nodes);
        let mut e = Vec::with_capacity(n_nodes * q);
        let mut etilde = Vec::with_capacity(n_nodes);
        let mut w = Vec::with_capacity(n_nodes);

        let mut idx = vec![0usize; q];
        for (yv, yw) in [(-1.0, rho), (1.0, 1.0 - rho)] {
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                let mut ew = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    ew *= factor_rules[k].weights[i];
                }
                for (tx, tw) in tilde_rule.nodes.iter().zip(&tilde_rule.weights) {
                    y.push(yv);
                    for (k, &i) in idx.iter().enumerate() {
                        e.push(factor_rules[k].nodes[i]);
                    }
                    etilde.push(*tx);
                    w.push(yw * ew * tw);
                }
                // odometer over the factor indices
                let mut k = 0;
                loop {
                    if k == q {
                        break;
                    }
                    idx[k] += 1;
                    if idx[k] < factor_rules[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == q {
                    break;
                }
            }
        }
        Ok(ExpectationGrid {
            q,
            rho,
            factor_laws,
            factor_rules,
            tilde_rule,
            y,
            e,
            etilde,
            w,
        })
    }

    pub fn node_count(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn factor_laws(&self) -> &[NoiseLaw] {
        &self.factor_laws
    }

    pub fn factor_rules(&self) -> &[QuadratureRule] {
        &self.factor_rules
    }

    pub fn tilde_rule(&self) -> &QuadratureRule {
        &self.tilde_rule
    }

    pub fn weight_sum(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Weight carried by the `y = -1` cells.
    pub fn weight_on_negative_class(&self) -> f64 {
        self.y
            .iter()
            .zip(&self.w)
            .filter(|(y, _)| **y < 0.0)
            .map(|(_, w)| w)
            .sum()
    }

    /// Marginal moment `E[e_k^power]` realized by the grid.
    pub fn factor_moment(&self, k: usize, power: u32) -> f64 {
        self.factor_rules[k].moment(power)
    }
}

/// The q+3 unknowns of the self-consistent system.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderParameters {
    pub theta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub omega: DVector<f64>,
}

impl OrderParameters {
    /// The default strictly-interior starting point.
    pub fn init(q: usize) -> Self {
        OrderParameters {
            theta: 0.5,
            eta: 0.0,
            gamma: 1.0,
            omega: DVector::zeros(q),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.theta - other.theta)
            .abs()
            .max((self.eta - other.eta).abs())
            .max((self.gamma - other.gamma).abs());
        for k in 0..self.omega.len() {
            d = d.max((self.omega[k] - other.omega[k]).abs());
        }
        d
    }
}

/// Quantities derived from the order parameters through the spectral
/// cache: `kappa`, the score-law constants `m, sigma^2`, and the
/// informative responses `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedScalars {
    pub kappa: f64,
    pub m: f64,
    pub sigma2: f64,
    pub psi: DVector<f64>,
}

impl DerivedScalars {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.kappa - other.kappa)
            .abs()
            .max((self.m - other.m).abs())
            .max((self.sigma2 - other.sigma2).abs());
        for k in 0..self.psi.len() {
            d = d.max((self.psi[k] - other.psi[k]).abs());
        }
        d
    }
}

/// The four expectation functionals of the system, evaluated on a grid.
#[derive(Debug, Clone)]
pub struct Expectations {
    pub e_h_prime: f64,
    pub e_yh: f64,
    pub e_h2: f64,
    pub e_he: DVector<f64>,
}

/// Damped-Picard solver configuration.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Extra solves from random starting points; disagreement beyond 1e-6
    /// raises the multi-solution warning in the diagnostics.
    pub restarts: usize,
    pub restart_seed: u64,
    pub record_trajectory: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 2000,
            restarts: 0,
            restart_seed: 0,
            record_trajectory: false,
        }
    }
}

/// Outcome bookkeeping for one solve.
#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub theta_clamps: usize,
    pub multi_solution_warning: bool,
    pub trajectory: Option<Vec<OrderParameters>>,
}

/// Evaluate the four expectations at fixed score-law constants.
pub fn expectations(
    grid: &ExpectationGrid,
    loss: Loss,
    kappa: f64,
    m: f64,
    sigma2: f64,
    psi: &DVector<f64>,
) -> Result<Expectations, Error> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositiveKappa(kappa));
    }
    assert!(sigma2 >= 0.0, "sigma2 must be nonnegative");
    assert_eq!(psi.len(), grid.q);
    let sigma = sigma2.sqrt();
    let q = grid.q;
    let mut e_h_prime = 0.0;
    let mut e_yh = 0.0;
    let mut e_h2 = 0.0;
    let mut e_he = DVector::<f64>::zeros(q);
    for i in 0..grid.y.len() {
        let y = grid.y[i];
        let w = grid.w[i];
        let mut r = y * m + sigma * grid.etilde[i];
        for k in 0..q {
            r += psi[k] * grid.e[i * q + k];
        }
        let ev = loss.prox_inner(kappa, r, y);
        e_h_prime += w * ev.h_prime;
        e_yh += w * y * ev.h_value;
        e_h2 += w * ev.h_value * ev.h_value;
        for k in 0..q {
            e_he[k] += w * ev.h_value * grid.e[i * q + k];
        }
    }
    Ok(Expectations {
        e_h_prime,
        e_yh,
        e_h2,
        e_he,
    })
}

/// One full update of the system: derived scalars at the current
/// parameters, then the refreshed parameters. The omega update uses the
/// freshly computed theta with the current-iterate psi; the two
/// conventions coincide at any fixed point.
pub fn step(
    params: &OrderParameters,
    cache: &SpectralCache,
    grid: &ExpectationGrid,
    loss: Loss,
) -> Result<(OrderParameters, DerivedScalars), Error> {
    let kappa = cache.kappa_of_theta(params.theta);
    let (m, psi) = cache.signal_response(params.theta, params.eta, &params.omega);
    let sigma2 = cache.sigma2_of(params.theta, params.gamma.max(0.0));
    let ex = expectations(grid, loss, kappa, m, sigma2, &psi)?;
    let theta = -ex.e_h_prime;
    let next = OrderParameters {
        theta,
        eta: ex.e_yh,
        gamma: ex.e_h2.max(0.0).sqrt(),
        omega: ex.e_he + &psi * theta,
    };
    Ok((
        next,
        DerivedScalars {
            kappa,
            m,
            sigma2,
            psi,
        },
    ))
}

/// Solve the system by damped Picard iteration from `init`.
///
/// Non-convergence after `max_iter` is reported through the diagnostics
/// (`converged = false`), not as an error.
pub fn solve(
    cache: &SpectralCache,
    grid: &ExpectationGrid,
    loss: Loss,
    init: OrderParameters,
    settings: &SolverSettings,
) -> Result<(OrderParameters, DerivedScalars, SolveDiagnostics), Error> {
    assert!(
        settings.damping > 0.0 && settings.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    assert!(settings.tol > 0.0, "tolerance must be positive");
    let (params, mut diag) = solve_single(cache, grid, loss, init, settings)?;

    if settings.restarts > 0 && diag.converged {
        let mut rng = ChaCha20Rng::seed_from_u64(settings.restart_seed);
        for _ in 0..settings.restarts {
            let q = cache.q();
            let start = OrderParameters {
                theta: rng.gen_range(0.05..1.5),
                eta: rng.gen_range(-1.0..1.0),
                gamma: rng.gen_range(0.1..2.0),
                omega: DVector::from_fn(q, |_, _| rng.gen_range(-0.5..0.5)),
            };
            let (alt, alt_diag) = solve_single(cache, grid, loss, start, settings)?;
            if alt_diag.converged && alt.max_abs_diff(&params) > 1e-6 {
                diag.multi_solution_warning = true;
            }
        }
    }

    let derived = derived_at(cache, &params);
    Ok((params, derived, diag))
}

/// Derived scalars evaluated at a parameter point (used to report the
/// final state and by the closed-form cross-path).
pub fn derived_at(cache: &SpectralCache, params: &OrderParameters) -> DerivedScalars {
    let kappa = cache.kappa_of_theta(params.theta);
    let (m, psi) = cache.signal_response(params.theta, params.eta, &params.omega);
    let sigma2 = cache.sigma2_of(params.theta, params.gamma.max(0.0));
    DerivedScalars {
        kappa,
        m,
        sigma2,
        psi,
    }
}

fn solve_single(
    cache: &SpectralCache,
    grid: &ExpectationGrid,
    loss: Loss,
    init: OrderParameters,
    settings: &SolverSettings,
) -> Result<(OrderParameters, SolveDiagnostics), Error> {
    let d = settings.damping;
    let mut params = init;
    let mut trajectory = settings.record_trajectory.then(Vec::new);
    let mut theta_clamps = 0usize;
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < settings.max_iter {
        let (next, _) = step(&params, cache, grid, loss)?;
        let mut updated = OrderParameters {
            theta: (1.0 - d) * params.theta + d * next.theta,
            eta: (1.0 - d) * params.eta + d * next.eta,
            gamma: (1.0 - d) * params.gamma + d * next.gamma,
            omega: &params.omega * (1.0 - d) + &next.omega * d,
        };
        if updated.theta < 0.0 {
            updated.theta = 0.0;
            theta_clamps += 1;
        }
        residual = updated.max_abs_diff(&params);
        params = updated;
        iterations += 1;
        if let Some(t) = trajectory.as_mut() {
            t.push(params.clone());
        }
        if residual <= settings.tol {
            converged = true;
            break;
        }
    }
    Ok((
        params,
        SolveDiagnostics {
            iterations,
            final_residual: residual,
            converged,
            theta_clamps,
            multi_solution_warning: false,
            trajectory,
        },
    ))
}

/// Square-loss solution by the reduced scalar route, independent of the
/// grid/quadrature path.
///
/// For the square loss `h(t,y) = (y - t)/(1 + kappa)` exactly, so
/// `theta = 1/(1 + kappa(theta))` is a one-dimensional root-find, omega
/// vanishes identically, `(m, eta, psi)` follow from the signal response
/// linearly, and `gamma^2` solves a scalar linear equation.
pub fn closed_form_square_loss(cache: &SpectralCache) -> (OrderParameters, DerivedScalars) {
    // theta (1 + kappa(theta)) - 1 is strictly increasing with a sign
    // change on [0, 1]; bisect to machine precision
    let f = |theta: f64| theta * (1.0 + cache.kappa_of_theta(theta)) - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let kappa = cache.kappa_of_theta(theta);

    // unit-eta response gives c = s'M s and M s in one call
    let q = cache.q();
    let (c, ms) = cache.signal_response(theta, 1.0, &DVector::zeros(q));
    let m = c / (1.0 + kappa + c);
    let eta = 1.0 / (1.0 + kappa + c);
    let psi = ms * eta;
    let t2 = cache.trace_qsigma_sq(theta);
    let one_k = 1.0 + kappa;
    // gamma^2 (1+kappa)^2 = (1-m)^2 + sigma^2 + |psi|^2 with sigma^2 = gamma^2 t2;
    // the denominator is positive because t2 <= kappa/theta = kappa(1+kappa)
    let gamma2 = ((1.0 - m).powi(2) + psi.norm_squared()) / (one_k * one_k - t2);
    let params = OrderParameters {
        theta,
        eta,
        gamma: gamma2.sqrt(),
        omega: DVector::zeros(q),
    };
    let derived = DerivedScalars {
        kappa,
        m,
        sigma2: gamma2 * t2,
        psi,
    };
    (params, derived)
}

/// Serializable report of a solved system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub theta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub omega: Vec<f64>,
    pub kappa: f64,
    pub m: f64,
    pub sigma2: f64,
    pub psi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl FixedPointReport {
    pub fn new(
        params: &OrderParameters,
        derived: &DerivedScalars,
        diag: &SolveDiagnostics,
    ) -> Self {
        FixedPointReport {
            theta: params.theta,
            eta: params.eta,
            gamma: params.gamma,
            omega: params.omega.iter().copied().collect(),
            kappa: derived.kappa,
            m: derived.m,
            sigma2: derived.sigma2,
            psi: derived.psi.iter().copied().collect(),
            iterations: diag.iterations,
            residual: diag.final_residual,
            converged: diag.converged,
        }
    }
}
