use crate::CommonOpts;
use lfmm::config::ExperimentConfig;
use lfmm::erm::{cross_test, run_trials, train, McReport, McSettings, TrainSettings};
use lfmm::fixed_point::{solve, ExpectationGrid, FixedPointReport, OrderParameters};
use lfmm::losses::Loss;
use lfmm::metrics::{
    generalization_accuracy, score_cdf, score_density, score_moments, training_accuracy,
    universality_audit, AuditSettings, ScoreKind, ScoreLaw, UniversalityVerdict,
};
use lfmm::model::LfmmSpec;
use lfmm::spectral::SpectralCache;
use lfmm::Error;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub fn error_json(err: &Error) -> String {
    let kind = match err {
        Error::InvalidSpec { .. } => "invalid_spec",
        Error::NonPositiveKappa(_) | Error::NonPositiveLambda(_) => "domain",
        Error::NonSmoothLoss(_) | Error::UnknownLoss(_) => "loss",
        Error::UnsupportedNoiseLaw(_) => "noise_law",
        Error::Eigensolver(_) => "numerical",
        Error::TrainingDiverged { .. } => "training_diverged",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    };
    let violations: Vec<String> = match err {
        Error::InvalidSpec { violations } => violations.clone(),
        _ => Vec::new(),
    };
    serde_json::json!({
        "error": { "kind": kind, "message": err.to_string(), "violations": violations }
    })
    .to_string()
}

struct Ctx {
    cfg: ExperimentConfig,
    spec: LfmmSpec,
    loss: Loss,
    out: PathBuf,
}

pub fn run(name: &str, opts: &CommonOpts) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = opts.workers {
        // a later build_global is a no-op if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;

    let base = opts.config.parent().unwrap_or_else(|| Path::new("."));
    let spec = cfg.model.build_spec(base)?;
    let report = spec.validate();
    if !report.passed() {
        return Err(Error::InvalidSpec {
            violations: report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} ({})", c.name, c.detail))
                .collect(),
        });
    }

    write_meta(name, opts, &out)?;
    let loss = cfg.loss()?;
    let ctx = Ctx {
        cfg,
        spec,
        loss,
        out,
    };
    match name {
        "solve" => cmd_solve(&ctx),
        "simulate" => cmd_simulate(&ctx),
        "histogram" => cmd_histogram(&ctx),
        "universality" => cmd_universality(&ctx),
        other => Err(Error::Config(format!("unknown command {other}"))),
    }
}

/// Timestamps live only in this sidecar; all other outputs are
/// byte-reproducible.
fn write_meta(name: &str, opts: &CommonOpts, out: &Path) -> Result<(), Error> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "command": name,
        "config": opts.config.display().to_string(),
        "workers": opts.workers,
        "seed_override": opts.seed,
        "timestamp_unix": timestamp,
    });
    write_text(&out.join("run_meta.json"), &format!("{meta:#}\n"))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

#[derive(Serialize)]
struct SolveRecord {
    lambda: f64,
    #[serde(flatten)]
    report: FixedPointReport,
    generalization_accuracy: f64,
    training_accuracy: f64,
    theta_clamps: usize,
    multi_solution_warning: bool,
}

/// Solve the system for every lambda in the sweep (in parallel; the
/// eigendecomposition is shared). Non-convergence anywhere is an error.
fn solve_all(ctx: &Ctx) -> Result<Vec<SolveRecord>, Error> {
    let lambdas = ctx.cfg.lambdas();
    let grid = ExpectationGrid::build(&ctx.spec, ctx.cfg.gh_points)?;
    let settings = ctx.cfg.solver.to_settings();
    let base_cache = SpectralCache::build(&ctx.spec, ctx.cfg.n, lambdas[0])?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let cache = base_cache.with_lambda(lambda)?;
            let (params, derived, diag) = solve(
                &cache,
                &grid,
                ctx.loss,
                OrderParameters::init(ctx.spec.q()),
                &settings,
            )?;
            if !diag.converged {
                return Err(Error::NonConvergence {
                    iterations: diag.iterations,
                    residual: diag.final_residual,
                });
            }
            let law = ScoreLaw::from_solution(&ctx.spec, &derived);
            Ok(SolveRecord {
                lambda,
                generalization_accuracy: generalization_accuracy(&law, &grid),
                training_accuracy: training_accuracy(&law, ctx.loss, derived.kappa, &grid),
                theta_clamps: diag.theta_clamps,
                multi_solution_warning: diag.multi_solution_warning,
                report: FixedPointReport::new(&params, &derived, &diag),
            })
        })
        .collect()
}

fn fixed_point_path(out: &Path, idx: usize, total: usize) -> PathBuf {
    if total == 1 {
        out.join("fixed_point.json")
    } else {
        out.join(format!("fixed_point_{idx:03}.json"))
    }
}

fn write_fixed_point_reports(ctx: &Ctx, records: &[SolveRecord]) -> Result<(), Error> {
    for (i, rec) in records.iter().enumerate() {
        write_json(&fixed_point_path(&ctx.out, i, records.len()), rec)?;
    }
    Ok(())
}

fn cmd_solve(ctx: &Ctx) -> Result<(), Error> {
    let records = solve_all(ctx)?;
    write_fixed_point_reports(ctx, &records)?;

    let mut csv = String::from(
        "lambda,theta,eta,gamma,kappa,m,sigma2,gen_accuracy,train_accuracy,iterations,converged\n",
    );
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.lambda,
            r.report.theta,
            r.report.eta,
            r.report.gamma,
            r.report.kappa,
            r.report.m,
            r.report.sigma2,
            r.generalization_accuracy,
            r.training_accuracy,
            r.report.iterations,
            r.report.converged
        ));
    }
    write_text(&ctx.out.join("sweep.csv"), &csv)
}

fn trials_path(out: &Path, idx: usize, total: usize) -> PathBuf {
    if total == 1 {
        out.join("trials.csv")
    } else {
        out.join(format!("trials_{idx:03}.csv"))
    }
}

fn cmd_simulate(ctx: &Ctx) -> Result<(), Error> {
    let records = solve_all(ctx)?;
    write_fixed_point_reports(ctx, &records)?;

    let mc = McSettings::default();
    let mut csv = String::from("lambda,theory_acc,emp_mean,emp_std,z_score\n");
    let mut failed_trials = 0usize;
    for (i, rec) in records.iter().enumerate() {
        let report = run_trials(
            &ctx.spec,
            ctx.loss,
            rec.lambda,
            ctx.cfg.n,
            ctx.cfg.n_test,
            ctx.cfg.trials,
            ctx.cfg.seed,
            &mc,
        )?;
        let mut buf = Vec::new();
        report.write_trials_csv(&mut buf)?;
        std::fs::write(trials_path(&ctx.out, i, records.len()), buf)?;

        failed_trials += report.trials.len() - report.successful_trials();
        let z = (report.mean_test_accuracy - rec.generalization_accuracy)
            / report.test_accuracy_se();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.lambda,
            rec.generalization_accuracy,
            report.mean_test_accuracy,
            report.std_test_accuracy,
            z
        ));
    }
    write_text(&ctx.out.join("sweep.csv"), &csv)?;
    if failed_trials > 0 {
        return Err(Error::Config(format!(
            "{failed_trials} trial(s) failed to train; see the trials CSV"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct HistogramSummary {
    lambda: f64,
    n_train: usize,
    n_test: usize,
    bins: usize,
    ks_distance: f64,
    theory_mean: f64,
    theory_variance: f64,
    theory_kurtosis: f64,
    train_seed: u64,
    test_seed: u64,
}

fn single_lambda(ctx: &Ctx, what: &str) -> Result<f64, Error> {
    let lambdas = ctx.cfg.lambdas();
    if lambdas.len() != 1 {
        return Err(Error::Config(format!(
            "{what} needs a single lambda, got a sweep of {}",
            lambdas.len()
        )));
    }
    Ok(lambdas[0])
}

fn cmd_histogram(ctx: &Ctx) -> Result<(), Error> {
    let lambda = single_lambda(ctx, "histogram")?;
    let records = solve_all(ctx)?;
    let rec = &records[0];
    write_json(&ctx.out.join("fixed_point.json"), rec)?;

    // one classifier, fresh scores; seeds derived from the experiment seed
    let train_seed = ctx.cfg.seed;
    let test_seed = ctx.cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let data = ctx.spec.sample(ctx.cfg.n, train_seed);
    let clf = train(&data, ctx.loss, lambda, &TrainSettings::default())?;
    let mut scores: Vec<f64> = ctx
        .spec
        .sample_scores(&clf.beta, ctx.cfg.n_test, test_seed)
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    scores.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    // histogram on a padded range; densities normalized to integrate to 1
    let bins = ctx.cfg.hist_bins;
    let (lo_raw, hi_raw) = (scores[0], scores[scores.len() - 1]);
    let pad = 0.05 * (hi_raw - lo_raw).max(1e-12);
    let (lo, hi) = (lo_raw - pad, hi_raw + pad);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &scores {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centers: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let mut hist_csv = String::from("score,density\n");
    for (c, k) in centers.iter().zip(&counts) {
        hist_csv.push_str(&format!(
            "{},{}\n",
            c,
            *k as f64 / (scores.len() as f64 * width)
        ));
    }
    write_text(&ctx.out.join("hist_empirical.csv"), &hist_csv)?;

    // theoretical density and CDF on the same grid
    let grid = ExpectationGrid::build(&ctx.spec, ctx.cfg.gh_points)?;
    let derived = lfmm::fixed_point::DerivedScalars {
        kappa: rec.report.kappa,
        m: rec.report.m,
        sigma2: rec.report.sigma2,
        psi: nalgebra::DVector::from_vec(rec.report.psi.clone()),
    };
    let law = ScoreLaw::from_solution(&ctx.spec, &derived);
    let dens = score_density(&law, ScoreKind::Test, &centers, &grid);
    let mut dens_csv = String::from("score,density\n");
    for (c, d) in centers.iter().zip(&dens) {
        dens_csv.push_str(&format!("{c},{d}\n"));
    }
    write_text(&ctx.out.join("density_theory.csv"), &dens_csv)?;

    // Kolmogorov-Smirnov distance between the empirical score CDF and the
    // theoretical mixture CDF, checking both sides of each jump
    let nf = scores.len() as f64;
    let mut ks = 0.0f64;
    for (i, &s) in scores.iter().enumerate() {
        let f = score_cdf(&law, &grid, s);
        ks = ks
            .max(((i + 1) as f64 / nf - f).abs())
            .max((i as f64 / nf - f).abs());
    }
    let (theory_mean, theory_variance, theory_kurtosis) = score_moments(&law, &grid);
    write_json(
        &ctx.out.join("histogram.json"),
        &HistogramSummary {
            lambda,
            n_train: ctx.cfg.n,
            n_test: ctx.cfg.n_test,
            bins,
            ks_distance: ks,
            theory_mean,
            theory_variance,
            theory_kurtosis,
            train_seed,
            test_seed,
        },
    )
}

#[derive(Serialize)]
struct CrossTestSummary {
    trials: usize,
    n: usize,
    n_test: usize,
    /// Train on the equivalent GMM, test on the LFMM.
    train_on_gmm_mean: f64,
    train_on_gmm_std: f64,
    /// Train and test on the LFMM.
    train_on_lfmm_mean: f64,
    train_on_lfmm_std: f64,
    accuracy_gap: f64,
    joint_se: f64,
    z_score: f64,
}

#[derive(Serialize)]
struct UniversalityOutput {
    lambda: f64,
    audit: UniversalityVerdict,
    cross_test: CrossTestSummary,
}

fn cmd_universality(ctx: &Ctx) -> Result<(), Error> {
    let lambda = single_lambda(ctx, "universality")?;
    let audit_settings = AuditSettings {
        gh_points: ctx.cfg.gh_points,
        solver: ctx.cfg.solver.to_settings(),
        ..AuditSettings::default()
    };
    let audit = universality_audit(&ctx.spec, ctx.loss, lambda, ctx.cfg.n, &audit_settings)?;

    let mc = McSettings::default();
    let gmm = ctx.spec.equivalent_gmm();
    let on_gmm: McReport = cross_test(
        &gmm,
        &ctx.spec,
        ctx.loss,
        lambda,
        ctx.cfg.n,
        ctx.cfg.n_test,
        ctx.cfg.trials,
        ctx.cfg.seed,
        &mc,
    )?;
    let on_lfmm = run_trials(
        &ctx.spec,
        ctx.loss,
        lambda,
        ctx.cfg.n,
        ctx.cfg.n_test,
        ctx.cfg.trials,
        ctx.cfg.seed.wrapping_add(1),
        &mc,
    )?;
    let gap = (on_gmm.mean_test_accuracy - on_lfmm.mean_test_accuracy).abs();
    let joint_se = (on_gmm.test_accuracy_se().powi(2) + on_lfmm.test_accuracy_se().powi(2)).sqrt();
    let out = UniversalityOutput {
        lambda,
        audit,
        cross_test: CrossTestSummary {
            trials: ctx.cfg.trials,
            n: ctx.cfg.n,
            n_test: ctx.cfg.n_test,
            train_on_gmm_mean: on_gmm.mean_test_accuracy,
            train_on_gmm_std: on_gmm.std_test_accuracy,
            train_on_lfmm_mean: on_lfmm.mean_test_accuracy,
            train_on_lfmm_std: on_lfmm.std_test_accuracy,
            accuracy_gap: gap,
            joint_se,
            z_score: gap / joint_se,
        },
    };
    write_json(&ctx.out.join("universality.json"), &out)
}
