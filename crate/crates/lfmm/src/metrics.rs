//! Asymptotic predictions from solved order parameters: score laws,
//! train/test accuracies, densities, and the Gaussian-universality audit.
//!
//! The out-of-sample score converges to `r = y m + sigma ẽ + sum_k psi_k e_k`,
//! so every prediction is an expectation over the informative-factor cells
//! with the Gaussian ẽ coordinate integrated in closed form: `Pr(yr > 0)`
//! through the normal CDF, densities as quadrature-weighted Gaussian
//! mixtures. In-sample scores pass through the proximal map, whose strict
//! monotonicity turns `Pr(y prox(r) > 0)` into a threshold crossing at
//! exactly `t0 = kappa l'(0, y)`.

use crate::fixed_point::{
    solve, DerivedScalars, ExpectationGrid, OrderParameters, SolverSettings,
};
use crate::losses::Loss;
use crate::model::{LfmmSpec, NoiseLaw};
use crate::quadrature::QuadratureRule;
use crate::spectral::SpectralCache;
use crate::Error;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::collections::BTreeMap;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF limit of `N(x; 0, sigma^2)` as sigma -> 0: a step with half mass at 0.
fn indicator_limit(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// The limiting law of the predicted score, fully determined by
/// `(m, sigma, psi)`, the informative factor laws, and the class prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLaw {
    pub m: f64,
    pub sigma: f64,
    pub psi: DVector<f64>,
    pub informative_laws: Vec<NoiseLaw>,
    pub rho: f64,
}

impl ScoreLaw {
    /// Assemble the score law from a solved system. Only the informative
    /// factor laws enter; noise factors are structurally invisible.
    pub fn from_solution(spec: &LfmmSpec, derived: &DerivedScalars) -> Self {
        ScoreLaw {
            m: derived.m,
            sigma: derived.sigma2.max(0.0).sqrt(),
            psi: derived.psi.clone(),
            informative_laws: spec.informative_laws().to_vec(),
            rho: spec.rho(),
        }
    }

    fn factor_rules(&self, grid: &ExpectationGrid) -> Vec<QuadratureRule> {
        debug_assert_eq!(grid.factor_laws(), self.informative_laws.as_slice());
        grid.factor_rules().to_vec()
    }
}

/// Visit every informative-factor quadrature cell: `f(nodes, weight)`.
fn for_each_cell(rules: &[QuadratureRule], mut f: impl FnMut(&[f64], f64)) {
    let q = rules.len();
    if q == 0 {
        f(&[], 1.0);
        return;
    }
    let mut idx = vec![0usize; q];
    let mut nodes = vec![0.0f64; q];
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            nodes[k] = rules[k].nodes[i];
            w *= rules[k].weights[i];
        }
        f(&nodes, w);
        let mut k = 0;
        loop {
            if k == q {
                return;
            }
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Asymptotic generalization accuracy `Pr(y r > 0)`.
///
/// The ẽ coordinate is integrated exactly through the normal CDF; the
/// `sigma = 0` boundary degenerates to the indicator limit.
pub fn generalization_accuracy(law: &ScoreLaw, grid: &ExpectationGrid) -> f64 {
    let rules = law.factor_rules(grid);
    let mut acc = 0.0;
    for (y, wy) in [(-1.0, law.rho), (1.0, 1.0 - law.rho)] {
        for_each_cell(&rules, |nodes, w| {
            // y r = m + sigma (y ẽ) + sum_k psi_k (y e_k); y ẽ ~ ẽ
            let mut arg = law.m;
            for (k, &e) in nodes.iter().enumerate() {
                arg += law.psi[k] * y * e;
            }
            let p = if law.sigma > 0.0 {
                normal_cdf(arg / law.sigma)
            } else {
                indicator_limit(arg)
            };
            acc += wy * w * p;
        });
    }
    acc
}

/// Asymptotic training accuracy `Pr(y prox_{kappa, l(.,y)}(r) > 0)`.
///
/// `prox` is strictly increasing with `prox(t0) = 0` at `t0 = kappa l'(0,y)`,
/// so the event is `r > t0` for `y = +1` and `r < t0` for `y = -1`, again
/// with an exact normal CDF in ẽ.
pub fn training_accuracy(law: &ScoreLaw, loss: Loss, kappa: f64, grid: &ExpectationGrid) -> f64 {
    assert!(kappa > 0.0, "training accuracy needs kappa > 0");
    let rules = law.factor_rules(grid);
    let mut acc = 0.0;
    for (y, wy) in [(-1.0f64, law.rho), (1.0, 1.0 - law.rho)] {
        let t0 = kappa * loss.grad(0.0, y);
        for_each_cell(&rules, |nodes, w| {
            let mut cell_mean = y * law.m;
            for (k, &e) in nodes.iter().enumerate() {
                cell_mean += law.psi[k] * e;
            }
            // Pr(r > t0) for y = +1, Pr(r < t0) for y = -1
            let arg = y * (cell_mean - t0);
            let p = if law.sigma > 0.0 {
                normal_cdf(arg / law.sigma)
            } else {
                indicator_limit(arg)
            };
            acc += wy * w * p;
        });
    }
    acc
}

/// Which score distribution to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum ScoreKind {
    /// Out-of-sample scores: the law of `r` itself.
    Test,
    /// In-sample scores: the law of `prox_{kappa, l(.,y)}(r)`, obtained by
    /// the change of variables through the monotone proximal map.
    Train { loss: Loss, kappa: f64 },
}

/// Density of the predicted-score law on a sorted grid, as a
/// quadrature-weighted Gaussian mixture (exact for discrete factors).
pub fn score_density(law: &ScoreLaw, kind: ScoreKind, x_grid: &[f64], grid: &ExpectationGrid) -> Vec<f64> {
    assert!(
        x_grid.windows(2).all(|w| w[0] <= w[1]),
        "x_grid must be sorted"
    );
    assert!(law.sigma > 0.0, "the mixture density needs sigma > 0");
    let rules = law.factor_rules(grid);
    let mut dens = vec![0.0f64; x_grid.len()];
    for (y, wy) in [(-1.0f64, law.rho), (1.0, 1.0 - law.rho)] {
        for_each_cell(&rules, |nodes, w| {
            let mut cell_mean = y * law.m;
            for (k, &e) in nodes.iter().enumerate() {
                cell_mean += law.psi[k] * e;
            }
            let cw = wy * w;
            match kind {
                ScoreKind::Test => {
                    for (d, &x) in dens.iter_mut().zip(x_grid) {
                        *d += cw * normal_pdf((x - cell_mean) / law.sigma) / law.sigma;
                    }
                }
                ScoreKind::Train { loss, kappa } => {
                    // u = prox(r): r = u + kappa l'(u,y), dr/du = 1 + kappa l''(u,y)
                    for (d, &u) in dens.iter_mut().zip(x_grid) {
                        let r = u + kappa * loss.grad(u, y);
                        let jac = 1.0 + kappa * loss.hess_left(u, y);
                        *d += cw * normal_pdf((r - cell_mean) / law.sigma) / law.sigma * jac;
                    }
                }
            }
        });
    }
    dens
}

/// Mean, variance, and kurtosis of the test-score law, from the exact
/// mixture moments (each cell contributes a normal with variance sigma^2).
pub fn score_moments(law: &ScoreLaw, grid: &ExpectationGrid) -> (f64, f64, f64) {
    let rules = law.factor_rules(grid);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for (y, wy) in [(-1.0f64, law.rho), (1.0, 1.0 - law.rho)] {
        for_each_cell(&rules, |nodes, w| {
            let mut cell_mean = y * law.m;
            for (k, &e) in nodes.iter().enumerate() {
                cell_mean += law.psi[k] * e;
            }
            cells.push((cell_mean, wy * w));
        });
    }
    let mean: f64 = cells.iter().map(|(c, w)| w * c).sum();
    let s2 = law.sigma * law.sigma;
    let var: f64 = cells
        .iter()
        .map(|(c, w)| w * ((c - mean).powi(2) + s2))
        .sum();
    let m4: f64 = cells
        .iter()
        .map(|(c, w)| {
            let d2 = (c - mean).powi(2);
            w * (d2 * d2 + 6.0 * d2 * s2 + 3.0 * s2 * s2)
        })
        .sum();
    (mean, var, m4 / (var * var))
}

/// CDF of the test-score law at a point (mixture of normal CDFs).
pub fn score_cdf(law: &ScoreLaw, grid: &ExpectationGrid, x: f64) -> f64 {
    let rules = law.factor_rules(grid);
    let mut cdf = 0.0;
    for (y, wy) in [(-1.0f64, law.rho), (1.0, 1.0 - law.rho)] {
        for_each_cell(&rules, |nodes, w| {
            let mut cell_mean = y * law.m;
            for (k, &e) in nodes.iter().enumerate() {
                cell_mean += law.psi[k] * e;
            }
            let p = if law.sigma > 0.0 {
                normal_cdf((x - cell_mean) / law.sigma)
            } else {
                indicator_limit(x - cell_mean)
            };
            cdf += wy * w * p;
        });
    }
    cdf
}

/// Settings for the universality audit.
#[derive(Debug, Clone)]
pub struct AuditSettings {
    pub gh_points: usize,
    pub solver: SolverSettings,
    /// Per-parameter agreement threshold for the classifier verdict.
    pub parameter_threshold: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            gh_points: 48,
            solver: SolverSettings::default(),
            parameter_threshold: 1e-6,
        }
    }
}

/// Outcome of comparing a model against its equivalent Gaussian mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniversalityVerdict {
    pub classifier_universal: bool,
    pub in_distribution_universal: bool,
    /// Absolute parameter differences, solved LFMM vs equivalent GMM.
    pub parameter_deltas: BTreeMap<String, f64>,
    /// |generalization accuracy under the LFMM law − under the GMM law|.
    pub accuracy_delta: f64,
    pub lfmm_accuracy: f64,
    pub gmm_accuracy: f64,
}

/// Solve the system for a model and for its equivalent GMM and compare.
///
/// The classifier verdict asks whether all solved parameters agree below
/// the threshold; the in-distribution verdict additionally requires every
/// informative factor law to be Gaussian (the structural condition under
/// which the score law itself is unchanged).
pub fn universality_audit(
    spec: &LfmmSpec,
    loss: Loss,
    lambda: f64,
    n: usize,
    settings: &AuditSettings,
) -> Result<UniversalityVerdict, Error> {
    let gmm = spec.equivalent_gmm();
    let cache = SpectralCache::build(spec, n, lambda)?;

    let solve_one = |model: &LfmmSpec| -> Result<
        (OrderParameters, DerivedScalars, ExpectationGrid),
        Error,
    > {
        let grid = ExpectationGrid::build(model, settings.gh_points)?;
        let (params, derived, diag) = solve(
            &cache,
            &grid,
            loss,
            OrderParameters::init(model.q()),
            &settings.solver,
        )?;
        if !diag.converged {
            return Err(Error::NonConvergence {
                iterations: diag.iterations,
                residual: diag.final_residual,
            });
        }
        Ok((params, derived, grid))
    };

    let (p_lfmm, d_lfmm, grid_lfmm) = solve_one(spec)?;
    let (p_gmm, d_gmm, grid_gmm) = solve_one(&gmm)?;

    let mut deltas = BTreeMap::new();
    deltas.insert("theta".to_string(), (p_lfmm.theta - p_gmm.theta).abs());
    deltas.insert("eta".to_string(), (p_lfmm.eta - p_gmm.eta).abs());
    deltas.insert("gamma".to_string(), (p_lfmm.gamma - p_gmm.gamma).abs());
    for k in 0..spec.q() {
        deltas.insert(
            format!("omega_{}", k + 1),
            (p_lfmm.omega[k] - p_gmm.omega[k]).abs(),
        );
        deltas.insert(
            format!("psi_{}", k + 1),
            (d_lfmm.psi[k] - d_gmm.psi[k]).abs(),
        );
    }
    deltas.insert("kappa".to_string(), (d_lfmm.kappa - d_gmm.kappa).abs());
    deltas.insert("m".to_string(), (d_lfmm.m - d_gmm.m).abs());
    deltas.insert("sigma2".to_string(), (d_lfmm.sigma2 - d_gmm.sigma2).abs());

    let classifier_universal = deltas.values().all(|&d| d < settings.parameter_threshold);
    let in_distribution_universal =
        classifier_universal && spec.informative_laws().iter().all(|l| l.is_gaussian());

    let lfmm_accuracy =
        generalization_accuracy(&ScoreLaw::from_solution(spec, &d_lfmm), &grid_lfmm);
    let gmm_accuracy = generalization_accuracy(&ScoreLaw::from_solution(&gmm, &d_gmm), &grid_gmm);

    Ok(UniversalityVerdict {
        classifier_universal,
        in_distribution_universal,
        parameter_deltas: deltas,
        accuracy_delta: (lfmm_accuracy - gmm_accuracy).abs(),
        lfmm_accuracy,
        gmm_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::closed_form_square_loss;
    use crate::model::build_haar_orthogonal;
    use approx::assert_abs_diff_eq;

    fn spec_with(p: usize, s: Vec<f64>, laws_head: &[NoiseLaw], scale: f64, seed: u64) -> LfmmSpec {
        let mut v = build_haar_orthogonal(p, seed);
        for i in 0..p {
            v[(i, 0)] *= scale;
        }
        let mut laws = vec![NoiseLaw::Gaussian; p];
        laws[..laws_head.len()].copy_from_slice(laws_head);
        LfmmSpec::new(v, s, laws, 0.5).unwrap()
    }

    fn law(m: f64, sigma: f64, psi: Vec<f64>, laws: Vec<NoiseLaw>) -> ScoreLaw {
        ScoreLaw {
            m,
            sigma,
            psi: DVector::from_vec(psi),
            informative_laws: laws,
            rho: 0.5,
        }
    }

    fn grid_for(laws_head: &[NoiseLaw], gh: usize) -> ExpectationGrid {
        let spec = spec_with(16, vec![1.0; laws_head.len()], laws_head, 1.0, 3);
        ExpectationGrid::build(&spec, gh).unwrap()
    }

    #[test]
    fn zero_mean_gives_chance_level() {
        for laws in [
            vec![NoiseLaw::Gaussian],
            vec![NoiseLaw::Rademacher],
            vec![NoiseLaw::Uniform],
        ] {
            let grid = grid_for(&laws, 32);
            let l = law(0.0, 0.4, vec![0.3], laws);
            assert_abs_diff_eq!(generalization_accuracy(&l, &grid), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_accuracy_closed_form() {
        let grid = grid_for(&[NoiseLaw::Gaussian, NoiseLaw::Gaussian], 48);
        let l = law(0.65, 0.13, vec![0.4, 0.08], vec![NoiseLaw::Gaussian; 2]);
        let expected =
            normal_cdf(l.m / (l.sigma * l.sigma + l.psi.norm_squared()).sqrt());
        // the identity is exact; the grid realizes it to quadrature
        // accuracy, which for this steep CDF at gh = 48 is ~1e-7
        assert_abs_diff_eq!(generalization_accuracy(&l, &grid), expected, epsilon = 2e-6);
    }

    #[test]
    fn accuracy_monotone_in_m_and_step_limit() {
        let grid = grid_for(&[NoiseLaw::Gaussian], 32);
        let mut last = 0.0;
        for i in 1..8 {
            let l = law(0.2 * i as f64, 0.3, vec![0.2], vec![NoiseLaw::Gaussian]);
            let acc = generalization_accuracy(&l, &grid);
            assert!(acc > last);
            last = acc;
        }
        // sigma -> 0, psi -> 0 with m > 0 degenerates to certainty
        let l = law(0.4, 0.0, vec![0.0], vec![NoiseLaw::Gaussian]);
        assert_abs_diff_eq!(generalization_accuracy(&l, &grid), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn training_accuracy_square_threshold() {
        // square loss: prox(r) = (r + kappa y)/(1 + kappa), so the event
        // is exactly y r > -kappa
        let grid = grid_for(&[NoiseLaw::Gaussian], 48);
        let l = law(0.48, 0.17, vec![0.34], vec![NoiseLaw::Gaussian]);
        let kappa = 0.18;
        let got = training_accuracy(&l, Loss::Square, kappa, &grid);
        let expected = normal_cdf(
            (l.m + kappa) / (l.sigma * l.sigma + l.psi.norm_squared()).sqrt(),
        );
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10);
    }

    #[test]
    fn training_accuracy_approaches_generalization_as_kappa_vanishes() {
        let grid = grid_for(&[NoiseLaw::Rademacher], 32);
        let l = law(0.3, 0.25, vec![0.2], vec![NoiseLaw::Rademacher]);
        for loss in [Loss::Square, Loss::Logistic, Loss::SquareHinge] {
            let tiny = training_accuracy(&l, loss, 1e-10, &grid);
            let gen = generalization_accuracy(&l, &grid);
            assert_abs_diff_eq!(tiny, gen, epsilon = 1e-8);
        }
    }

    #[test]
    fn training_accuracy_exceeds_generalization_at_positive_kappa() {
        let grid = grid_for(&[NoiseLaw::Gaussian], 32);
        let l = law(0.4, 0.3, vec![0.25], vec![NoiseLaw::Gaussian]);
        for loss in [Loss::Square, Loss::Logistic, Loss::SquareHinge] {
            let train = training_accuracy(&l, loss, 0.5, &grid);
            assert!(train > generalization_accuracy(&l, &grid));
        }
    }

    #[test]
    fn density_normalization_and_nonnegativity() {
        let grid = grid_for(&[NoiseLaw::Uniform], 48);
        let l = law(0.48, 0.17, vec![0.34], vec![NoiseLaw::Uniform]);
        let xs: Vec<f64> = (0..4001).map(|i| -4.0 + 0.002 * i as f64).collect();
        for kind in [
            ScoreKind::Test,
            ScoreKind::Train {
                loss: Loss::Logistic,
                kappa: 0.3,
            },
        ] {
            let d = score_density(&l, kind, &xs, &grid);
            assert!(d.iter().all(|&v| v >= 0.0));
            let integral: f64 = d.windows(2).map(|w| 0.001 * (w[0] + w[1])).sum();
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn gaussian_factor_density_is_two_component_mixture() {
        let grid = grid_for(&[NoiseLaw::Gaussian], 48);
        let l = law(0.5, 0.2, vec![0.3], vec![NoiseLaw::Gaussian]);
        let sd = (l.sigma * l.sigma + 0.3f64 * 0.3).sqrt();
        let xs = [-1.2, -0.4, 0.0, 0.3, 0.9];
        let d = score_density(&l, ScoreKind::Test, &xs, &grid);
        for (i, &x) in xs.iter().enumerate() {
            let expected = 0.5 * normal_pdf((x - 0.5) / sd) / sd
                + 0.5 * normal_pdf((x + 0.5) / sd) / sd;
            assert_abs_diff_eq!(d[i], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn rademacher_factor_density_is_four_component_mixture() {
        let grid = grid_for(&[NoiseLaw::Rademacher], 32);
        let l = law(0.5, 0.2, vec![0.3], vec![NoiseLaw::Rademacher]);
        let xs = [-1.0, -0.2, 0.4, 1.1];
        let d = score_density(&l, ScoreKind::Test, &xs, &grid);
        for (i, &x) in xs.iter().enumerate() {
            let mut expected = 0.0;
            for ym in [-0.5, 0.5] {
                for pe in [-0.3, 0.3] {
                    expected += 0.25 * normal_pdf((x - ym - pe) / 0.2) / 0.2;
                }
            }
            assert_abs_diff_eq!(d[i], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn score_moments_known_cases() {
        // degenerate class separation: the law is one gaussian, kurtosis 3
        let grid = grid_for(&[NoiseLaw::Gaussian], 32);
        let l = law(0.0, 0.2, vec![0.3], vec![NoiseLaw::Gaussian]);
        let (mean, var, kurt) = score_moments(&l, &grid);
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 0.04 + 0.09, epsilon = 1e-10);
        assert_abs_diff_eq!(kurt, 3.0, epsilon = 1e-8);

        // class separation makes the mixture bimodal: kurtosis drops
        let l = law(0.5, 0.2, vec![0.3], vec![NoiseLaw::Gaussian]);
        let (_, var, kurt) = score_moments(&l, &grid);
        assert_abs_diff_eq!(var, 0.25 + 0.13, epsilon = 1e-10);
        assert!(kurt < 3.0);

        // a dominant uniform factor drags the kurtosis below 3
        let grid = grid_for(&[NoiseLaw::Uniform], 48);
        let l = law(0.01, 0.05, vec![1.0], vec![NoiseLaw::Uniform]);
        let (_, _, kurt) = score_moments(&l, &grid);
        assert!(kurt < 2.2, "kurtosis {kurt}");
    }

    #[test]
    fn score_cdf_matches_density_integral() {
        let grid = grid_for(&[NoiseLaw::Uniform], 48);
        let l = law(0.4, 0.25, vec![0.3], vec![NoiseLaw::Uniform]);
        let xs: Vec<f64> = (0..6001).map(|i| -5.0 + 0.002 * i as f64).collect();
        let d = score_density(&l, ScoreKind::Test, &xs, &grid);
        let integral_to_1: f64 = d
            .windows(2)
            .zip(xs.windows(2))
            .take_while(|(_, x)| x[1] <= 1.0)
            .map(|(w, _)| 0.001 * (w[0] + w[1]))
            .sum();
        assert_abs_diff_eq!(integral_to_1, score_cdf(&l, &grid, 1.0), epsilon = 1e-5);
    }

    #[test]
    fn score_law_ignores_noise_factor_laws() {
        let a = spec_with(20, vec![1.0], &[NoiseLaw::Rademacher], 1.0, 9);
        let mut laws = vec![NoiseLaw::Uniform; 20];
        laws[0] = NoiseLaw::Rademacher;
        let b = LfmmSpec::new(build_haar_orthogonal(20, 9), vec![1.0], laws, 0.5).unwrap();
        let cache = SpectralCache::build(&a, 60, 1.0).unwrap();
        let (_, derived) = closed_form_square_loss(&cache);
        assert_eq!(
            ScoreLaw::from_solution(&a, &derived),
            ScoreLaw::from_solution(&b, &derived)
        );
    }

    #[test]
    fn audit_all_gaussian_is_fully_universal() {
        let spec = spec_with(80, vec![1.5, 0.5], &[], 2.0, 5);
        let verdict =
            universality_audit(&spec, Loss::Logistic, 1.0, 240, &AuditSettings::default())
                .unwrap();
        assert!(verdict.classifier_universal);
        assert!(verdict.in_distribution_universal);
        assert!(verdict.parameter_deltas.values().all(|&d| d < 1e-10));
        assert!(verdict.accuracy_delta < 1e-10);
    }

    #[test]
    fn audit_square_loss_on_rademacher_factor() {
        let spec = spec_with(80, vec![1.5, 0.5], &[NoiseLaw::Rademacher], 2.0, 6);
        let verdict =
            universality_audit(&spec, Loss::Square, 1.0, 240, &AuditSettings::default()).unwrap();
        assert!(verdict.classifier_universal);
        assert!(!verdict.in_distribution_universal);
        // same classifier, but the score law feels the discrete factor
        assert!(verdict.accuracy_delta > 1e-4);
    }

    #[test]
    fn audit_logistic_on_rademacher_factor_breaks_down() {
        let spec = spec_with(80, vec![1.5, 0.5], &[NoiseLaw::Rademacher], 2.0, 7);
        let verdict =
            universality_audit(&spec, Loss::Logistic, 0.25, 240, &AuditSettings::default())
                .unwrap();
        assert!(!verdict.classifier_universal);
        assert!(!verdict.in_distribution_universal);
        assert!(verdict.accuracy_delta > 0.0);
    }
}
