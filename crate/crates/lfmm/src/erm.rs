//! Ridge-regularized ERM training and the Monte Carlo experiment layer
//! that validates the asymptotic theory against sampled data.
//!
//! Training is a damped-free Newton iteration on the strictly convex
//! objective `(1/n) sum_i l(x_iᵀb, y_i) + (lambda/2)|b|^2`; the Hessian
//! `(1/n) X D Xᵀ + lambda I` stays positive definite for lambda > 0 even
//! where the square hinge's curvature vanishes. Trials are independent,
//! seeded disjointly, and reduced in trial order, so a report is
//! bit-reproducible.

use crate::losses::Loss;
use crate::model::{Dataset, LfmmSpec};
use crate::fixed_point::OrderParameters;
use crate::spectral::SpectralCache;
use crate::Error;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A trained ridge ERM classifier with its optimality certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub beta: DVector<f64>,
    pub objective_value: f64,
    pub grad_norm: f64,
    pub newton_iterations: usize,
    /// Objective value after each Newton step (line search keeps it
    /// strictly decreasing).
    pub objective_history: Vec<f64>,
}

/// Newton stopping rule.
#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

fn objective(data: &Dataset, loss: Loss, lambda: f64, beta: &DVector<f64>, scores: &DVector<f64>) -> f64 {
    let n = data.n() as f64;
    let mut obj = 0.0;
    for i in 0..data.n() {
        obj += loss.value(scores[i], data.y[i] as f64);
    }
    obj / n + 0.5 * lambda * beta.norm_squared()
}

/// Train by Newton with backtracking line search until the gradient norm
/// drops below `tol`. For the square loss the first step is the exact
/// linear solve `(X Xᵀ/n + lambda I) b = X y / n`.
pub fn train(
    data: &Dataset,
    loss: Loss,
    lambda: f64,
    settings: &TrainSettings,
) -> Result<TrainedClassifier, Error> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let p = data.x.nrows();
    let n = data.n();
    let nf = n as f64;
    let mut beta = DVector::<f64>::zeros(p);
    let mut scores = DVector::<f64>::zeros(n);
    let mut obj = objective(data, loss, lambda, &beta, &scores);
    let mut history = vec![obj];

    for iter in 0..settings.max_iter {
        // gradient (1/n) X l' + lambda b
        let lgrad = DVector::from_fn(n, |i, _| loss.grad(scores[i], data.y[i] as f64));
        let grad = (&data.x * &lgrad) / nf + &beta * lambda;
        let grad_norm = grad.norm();
        if grad_norm <= settings.tol {
            return Ok(TrainedClassifier {
                beta,
                objective_value: obj,
                grad_norm,
                newton_iterations: iter,
                objective_history: history,
            });
        }

        // Hessian (1/n) X D Xᵀ + lambda I with D = diag l'' (left limits)
        let mut xd = data.x.clone();
        for i in 0..n {
            let d = loss.hess_left(scores[i], data.y[i] as f64);
            for r in 0..p {
                xd[(r, i)] *= d;
            }
        }
        let mut hess = (&xd * data.x.transpose()) / nf;
        for r in 0..p {
            hess[(r, r)] += lambda;
        }
        let direction = hess
            .cholesky()
            .ok_or_else(|| Error::Eigensolver("Newton Hessian not positive definite".into()))?
            .solve(&(-&grad));

        // Armijo backtracking with an allowance for objective round-off;
        // near the optimum the true decrease sits below f64 noise while
        // the Newton step is still the right move
        let slope = grad.dot(&direction);
        let noise = 1e-14 * (1.0 + obj.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &beta + &direction * step;
            let cand_scores = data.x.transpose() * &candidate;
            let cand_obj = objective(data, loss, lambda, &candidate, &cand_scores);
            if cand_obj <= obj + 1e-4 * step * slope + noise {
                beta = candidate;
                scores = cand_scores;
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::TrainingDiverged {
                iterations: iter,
                grad_norm,
            });
        }
        history.push(obj);
    }

    let lgrad = DVector::from_fn(n, |i, _| loss.grad(scores[i], data.y[i] as f64));
    let grad_norm = ((&data.x * &lgrad) / nf + &beta * lambda).norm();
    if grad_norm <= settings.tol {
        Ok(TrainedClassifier {
            beta,
            objective_value: obj,
            grad_norm,
            newton_iterations: settings.max_iter,
            objective_history: history,
        })
    } else {
        Err(Error::TrainingDiverged {
            iterations: settings.max_iter,
            grad_norm,
        })
    }
}

/// Relative norm of the stationarity defect
/// `lambda b + (1/n) sum_i l'(bᵀx_i, y_i) x_i`, the first-order optimality
/// certificate independent of the Newton internals.
pub fn stationarity_residual(
    clf: &TrainedClassifier,
    data: &Dataset,
    loss: Loss,
    lambda: f64,
) -> f64 {
    let n = data.n();
    let scores = data.x.transpose() * &clf.beta;
    let lgrad = DVector::from_fn(n, |i, _| loss.grad(scores[i], data.y[i] as f64));
    let defect = &clf.beta * lambda + (&data.x * &lgrad) / n as f64;
    defect.norm() / (lambda * clf.beta.norm()).max(1.0)
}

/// Draw the high-dimensional equivalent classifier
/// `b̃ = Q (eta mu + sum_k omega_k v_k + gamma Sigma^{1/2} u)`,
/// `u ~ N(0, I_p / n)`, through the spectral cache.
pub fn sample_equivalent_classifier(
    cache: &SpectralCache,
    spec: &LfmmSpec,
    params: &OrderParameters,
    seed: u64,
) -> DVector<f64> {
    let p = spec.p();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut xi = spec.class_mean() * params.eta;
    for k in 0..spec.q() {
        xi += spec.v_col(k) * params.omega[k];
    }
    let u = DVector::from_fn(p, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z / (cache.n() as f64).sqrt()
    });
    let noise = cache.sigma_sqrt_apply(&u) * params.gamma;
    cache.q_apply(params.theta, &(xi + noise))
}

/// One Monte Carlo trial inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub grad_norm: f64,
    pub newton_iterations: usize,
    /// Training failure, if any; accuracies are NaN in that case.
    pub error: Option<String>,
    /// Raw test scores, kept only on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// Aggregated Monte Carlo results. Means and standard deviations are over
/// the successful trials (sample standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub seed: u64,
    pub n: usize,
    pub n_test: usize,
    pub trials: Vec<TrialRecord>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub mean_train_accuracy: f64,
    pub std_train_accuracy: f64,
}

impl McReport {
    pub fn successful_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.error.is_none()).count()
    }

    /// Standard error of the mean test accuracy.
    pub fn test_accuracy_se(&self) -> f64 {
        self.std_test_accuracy / (self.successful_trials() as f64).sqrt()
    }

    /// One row per trial; numeric columns only.
    pub fn write_trials_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "trial,train_seed,test_seed,train_accuracy,test_accuracy,grad_norm,newton_iterations,error"
        )?;
        for t in &self.trials {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t.index,
                t.train_seed,
                t.test_seed,
                t.train_accuracy,
                t.test_accuracy,
                t.grad_norm,
                t.newton_iterations,
                t.error.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }
}

/// Options for a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McSettings {
    pub train: TrainSettings,
    /// Keep the raw test scores of every trial in the report.
    pub collect_scores: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            train: TrainSettings::default(),
            collect_scores: false,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Disjoint per-trial seed streams derived from the experiment seed.
fn trial_seed(base: u64, trial: usize, role: u64) -> u64 {
    splitmix64(base ^ splitmix64(2 * trial as u64 + role))
}

/// Train/test Monte Carlo over independent trials: sample a training set
/// from `spec_train`, fit, then measure sign accuracy on fresh samples
/// from `spec_test`. Ties `bᵀx = 0` count as errors.
pub fn cross_test(
    spec_train: &LfmmSpec,
    spec_test: &LfmmSpec,
    loss: Loss,
    lambda: f64,
    n: usize,
    n_test: usize,
    trials: usize,
    seed: u64,
    settings: &McSettings,
) -> Result<McReport, Error> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".to_string()));
    }
    if n_test == 0 {
        return Err(Error::Config("n_test must be >= 1".to_string()));
    }
    if spec_train.p() != spec_test.p() {
        return Err(Error::Config(format!(
            "train and test specs must share p, got {} vs {}",
            spec_train.p(),
            spec_test.p()
        )));
    }
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let train_seed = trial_seed(seed, t, 0);
            let test_seed = trial_seed(seed, t, 1);
            let data = spec_train.sample(n, train_seed);
            match train(&data, loss, lambda, &settings.train) {
                Ok(clf) => {
                    let scores_train = data.x.transpose() * &clf.beta;
                    let train_hits = (0..n)
                        .filter(|&i| data.y[i] as f64 * scores_train[i] > 0.0)
                        .count();
                    let scored = spec_test.sample_scores(&clf.beta, n_test, test_seed);
                    let test_hits = scored
                        .iter()
                        .filter(|(y, s)| *y as f64 * *s > 0.0)
                        .count();
                    TrialRecord {
                        index: t,
                        train_seed,
                        test_seed,
                        train_accuracy: train_hits as f64 / n as f64,
                        test_accuracy: test_hits as f64 / n_test as f64,
                        grad_norm: clf.grad_norm,
                        newton_iterations: clf.newton_iterations,
                        error: None,
                        scores: settings
                            .collect_scores
                            .then(|| scored.iter().map(|(_, s)| *s).collect()),
                    }
                }
                Err(e) => TrialRecord {
                    index: t,
                    train_seed,
                    test_seed,
                    train_accuracy: f64::NAN,
                    test_accuracy: f64::NAN,
                    grad_norm: f64::NAN,
                    newton_iterations: 0,
                    error: Some(e.to_string()),
                    scores: None,
                },
            }
        })
        .collect();

    let ok: Vec<&TrialRecord> = records.iter().filter(|t| t.error.is_none()).collect();
    let mean_std = |pick: fn(&TrialRecord) -> f64| -> (f64, f64) {
        if ok.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let k = ok.len() as f64;
        let mean = ok.iter().map(|t| pick(t)).sum::<f64>() / k;
        let var = if ok.len() > 1 {
            ok.iter().map(|t| (pick(t) - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let (mean_test_accuracy, std_test_accuracy) = mean_std(|t| t.test_accuracy);
    let (mean_train_accuracy, std_train_accuracy) = mean_std(|t| t.train_accuracy);
    Ok(McReport {
        seed,
        n,
        n_test,
        trials: records,
        mean_test_accuracy,
        std_test_accuracy,
        mean_train_accuracy,
        std_train_accuracy,
    })
}

/// In-distribution Monte Carlo: train and test on the same model.
pub fn run_trials(
    spec: &LfmmSpec,
    loss: Loss,
    lambda: f64,
    n: usize,
    n_test: usize,
    trials: usize,
    seed: u64,
    settings: &McSettings,
) -> Result<McReport, Error> {
    cross_test(spec, spec, loss, lambda, n, n_test, trials, seed, settings)
}
