//! Experiment configuration: TOML documents describing a model, a loss,
//! a ridge path, run sizes, and solver settings, plus the dense matrix
//! file formats for explicit factor matrices.

use crate::losses::Loss;
use crate::model::{build_haar_orthogonal, LfmmSpec, NoiseLaw};
use crate::fixed_point::SolverSettings;
use crate::Error;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// How the factor matrix V is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VConstruction {
    /// Haar-distributed orthogonal matrix.
    Haar,
    /// Haar matrix with the first column scaled by `diag_scale`, keeping
    /// the signal and noise subspaces exactly orthogonal.
    DiagScaledHaar,
    /// Read V from `matrix_file` (.csv or .bin).
    ExplicitMatrixFile,
}

/// Generative model description, as serialized in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub p: usize,
    /// Number of informative factors; defaults to `s.len()`.
    #[serde(default)]
    pub q: Option<usize>,
    pub s: Vec<f64>,
    pub rho: f64,
    pub v_construction: VConstruction,
    #[serde(default)]
    pub diag_scale: Option<f64>,
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
    /// One law per factor. A shorter list is extended by repeating its
    /// last entry, so `["rademacher", "gaussian"]` means a Rademacher
    /// first factor and Gaussian everything else.
    pub noise_laws: Vec<String>,
    /// Seed for the random matrix draw.
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    fn expand_noise_laws(&self) -> Result<Vec<NoiseLaw>, Error> {
        if self.noise_laws.is_empty() {
            return Err(Error::Config("noise_laws must not be empty".to_string()));
        }
        if self.noise_laws.len() > self.p {
            return Err(Error::Config(format!(
                "noise_laws has {} entries for p = {}",
                self.noise_laws.len(),
                self.p
            )));
        }
        let mut laws = Vec::with_capacity(self.p);
        for name in &self.noise_laws {
            laws.push(NoiseLaw::from_name(name)?);
        }
        let last = *laws.last().unwrap();
        laws.resize(self.p, last);
        Ok(laws)
    }

    /// Materialize the model; `base` resolves a relative `matrix_file`.
    pub fn build_spec(&self, base: &Path) -> Result<LfmmSpec, Error> {
        if let Some(q) = self.q {
            if q != self.s.len() {
                return Err(Error::Config(format!(
                    "q = {q} disagrees with s of length {}",
                    self.s.len()
                )));
            }
        }
        let v = match self.v_construction {
            VConstruction::Haar => build_haar_orthogonal(self.p, self.seed),
            VConstruction::DiagScaledHaar => {
                let scale = self.diag_scale.ok_or_else(|| {
                    Error::Config("diag_scaled_haar requires diag_scale".to_string())
                })?;
                let mut v = build_haar_orthogonal(self.p, self.seed);
                for i in 0..self.p {
                    v[(i, 0)] *= scale;
                }
                v
            }
            VConstruction::ExplicitMatrixFile => {
                let file = self.matrix_file.as_ref().ok_or_else(|| {
                    Error::Config("explicit_matrix_file requires matrix_file".to_string())
                })?;
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base.join(file)
                };
                let v = read_matrix(&path)?;
                if v.nrows() != self.p || v.ncols() != self.p {
                    return Err(Error::Config(format!(
                        "matrix file {} is {}x{}, expected {}x{}",
                        path.display(),
                        v.nrows(),
                        v.ncols(),
                        self.p,
                        self.p
                    )));
                }
                v
            }
        };
        LfmmSpec::new(v, self.s.clone(), self.expand_noise_laws()?, self.rho)
    }
}

/// The ridge strength(s) to run: a scalar or an explicit list. When the
/// field is absent entirely, the default log2 sweep applies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Single(f64),
    List(Vec<f64>),
}

/// The published sweep grid: `2^-9, 2^-8, ..., 2^6`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-9..=6).map(|k| 2f64.powi(k)).collect()
}

fn default_n_test() -> usize {
    100_000
}

fn default_trials() -> usize {
    100
}

fn default_gh_points() -> usize {
    48
}

/// Solver block of a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverConfig {
            damping: s.damping,
            tol: s.tol,
            max_iter: s.max_iter,
            restarts: s.restarts,
        }
    }
}

impl SolverConfig {
    pub fn to_settings(&self) -> SolverSettings {
        SolverSettings {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            ..SolverSettings::default()
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub loss: String,
    #[serde(default)]
    pub lambda: Option<LambdaSpec>,
    pub n: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_gh_points")]
    pub gh_points: usize,
    /// Experiment seed (trial sampling); the model draw has its own.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Histogram resolution for the score-distribution command.
    #[serde(default = "default_hist_bins")]
    pub hist_bins: usize,
    /// Output directory; a CLI flag may override it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_hist_bins() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn loss(&self) -> Result<Loss, Error> {
        Loss::from_name(&self.loss)
    }

    /// The resolved, always-nonempty lambda list.
    pub fn lambdas(&self) -> Vec<f64> {
        match &self.lambda {
            None => default_lambda_grid(),
            Some(LambdaSpec::Single(v)) => vec![*v],
            Some(LambdaSpec::List(vs)) => vs.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.loss()?;
        self.model.expand_noise_laws()?;
        let lambdas = self.lambdas();
        if lambdas.is_empty() {
            return Err(Error::Config("lambda sweep must not be empty".to_string()));
        }
        if lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config(
                "every lambda in the sweep must be positive".to_string(),
            ));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".to_string()));
        }
        if self.n_test == 0 {
            return Err(Error::Config("n_test must be >= 1".to_string()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".to_string()));
        }
        if self.gh_points < 8 {
            return Err(Error::Config("gh_points must be at least 8".to_string()));
        }
        if self.hist_bins < 2 {
            return Err(Error::Config("hist_bins must be at least 2".to_string()));
        }
        Ok(())
    }
}

const MATRIX_MAGIC: &[u8; 8] = b"LFMMMAT1";

/// Read a dense matrix from `.csv` (rows of comma-separated values) or
/// `.bin` (magic `LFMMMAT1`, u64-le rows, u64-le cols, f64-le row-major).
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Error> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_matrix_csv(path),
        Some("bin") => read_matrix_bin(path),
        _ => Err(Error::Config(format!(
            "matrix file {} must end in .csv or .bin",
            path.display()
        ))),
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Config(format!(
                    "{}:{}: ragged row ({} values, expected {})",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: empty matrix", path.display())));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<(), Error> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_bin(path: &Path) -> Result<DMatrix<f64>, Error> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Config(format!(
            "{}: bad magic, not an LFMMMAT1 file",
            path.display()
        )));
    }
    let mut dims = [0u8; 16];
    file.read_exact(&mut dims)?;
    let rows = u64::from_le_bytes(dims[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(dims[8..].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; rows * cols * 8];
    file.read_exact(&mut payload)?;
    let mut values = Vec::with_capacity(rows * cols);
    for chunk in payload.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    // row-major on disk
    Ok(DMatrix::from_fn(rows, cols, |i, j| values[i * cols + j]))
}

pub fn write_matrix_bin(path: &Path, m: &DMatrix<f64>) -> Result<(), Error> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(MATRIX_MAGIC)?;
    file.write_all(&(m.nrows() as u64).to_le_bytes())?;
    file.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            file.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}
