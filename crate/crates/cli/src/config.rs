use std::path::Path;

use anyhow::{bail, Context, Result};
use epfrag::graph::{EpConfig, FailurePolicy, Schedule};
use epfrag::linalg::Mat;
use epfrag::models::{Dataset, Likelihood, ModelSpec, Priors, SplineSpec};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodName {
    Gaussian,
    Logistic,
    Probit,
    Poisson,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Sequential,
    Parallel,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FailureName {
    Abort,
    KeepOld,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub likelihood: LikelihoodName,
    pub response: String,
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    #[serde(default = "yes")]
    pub intercept: bool,
    pub group: Option<String>,
    pub spline: Option<SplineFile>,
    #[serde(default)]
    pub priors: PriorsFile,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub ep: EpFile,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineFile {
    pub column: String,
    pub knots: usize,
}

/// Prior settings; `sigma_beta` is either a variance (σ²_β·I) or a full matrix
/// given as rows.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsFile {
    pub mu_beta: Option<Vec<f64>>,
    pub sigma_beta: Option<SigmaBeta>,
    pub a_grp: Option<f64>,
    pub a_spl: Option<f64>,
    pub a_eps: Option<f64>,
    pub nu: Option<f64>,
    pub known_variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SigmaBeta {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpFile {
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub tol: Option<f64>,
    pub schedule: Option<ScheduleName>,
    pub on_update_failure: Option<FailureName>,
}

/// Command-line overrides of the `[ep]` table.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct EpOverrides {
    /// Damping factor in [0, 1).
    #[arg(long = "eps")]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleName>,
    #[arg(long = "on-failure", value_enum)]
    pub on_failure: Option<FailureName>,
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid model file {}", path.display()))
}

impl ModelFile {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let likelihood = match self.likelihood {
            LikelihoodName::Gaussian => Likelihood::Gaussian,
            LikelihoodName::Logistic => Likelihood::Logistic,
            LikelihoodName::Probit => Likelihood::Probit,
            LikelihoodName::Poisson => Likelihood::Poisson,
        };
        let d = Priors::default();
        let p = &self.priors;
        let d_beta = self.fixed_effects.len() + usize::from(self.intercept);
        let sigma_beta = match &p.sigma_beta {
            None => None,
            Some(SigmaBeta::Scalar(v)) => Some(Mat::identity(d_beta).scale(*v)),
            Some(SigmaBeta::Rows(rows)) => Some(Mat::from_rows(rows).context("priors.sigma_beta")?),
        };
        let spec = ModelSpec {
            likelihood,
            response: self.response.clone(),
            fixed_effects: self.fixed_effects.clone(),
            intercept: self.intercept,
            group: self.group.clone(),
            spline: self.spline.as_ref().map(|s| SplineSpec { column: s.column.clone(), knots: s.knots }),
            priors: Priors {
                mu_beta: p.mu_beta.clone(),
                sigma_beta,
                a_grp: p.a_grp.unwrap_or(d.a_grp),
                a_spl: p.a_spl.unwrap_or(d.a_spl),
                a_eps: p.a_eps.unwrap_or(d.a_eps),
                nu: p.nu.unwrap_or(d.nu),
                known_variance: p.known_variance,
            },
            standardize: self.standardize,
        };
        spec.validate().context("invalid model file")?;
        Ok(spec)
    }

    pub fn ep_config(&self, over: &EpOverrides) -> Result<EpConfig<f64>> {
        let mut cfg = EpConfig::default();
        let file = &self.ep;
        if let Some(v) = over.epsilon.or(file.epsilon) {
            cfg.epsilon = v;
        }
        if let Some(v) = over.max_iterations.or(file.max_iterations) {
            cfg.max_iterations = v;
        }
        if let Some(v) = over.tol.or(file.tol) {
            cfg.tol = v;
        }
        if let Some(s) = over.schedule.or(file.schedule) {
            cfg.schedule = match s {
                ScheduleName::Sequential => Schedule::DeterministicSequential,
                ScheduleName::Parallel => Schedule::ParallelSweep,
            };
        }
        if let Some(f) = over.on_failure.or(file.on_update_failure) {
            cfg.on_update_failure = match f {
                FailureName::Abort => FailurePolicy::Abort,
                FailureName::KeepOld => FailurePolicy::KeepOldMessage,
            };
        }
        if !(0.0..1.0).contains(&cfg.epsilon) {
            bail!("ep.epsilon must lie in [0, 1), got {}", cfg.epsilon);
        }
        if cfg.max_iterations == 0 {
            bail!("ep.max_iterations must be at least 1");
        }
        if !(cfg.tol > 0.0) {
            bail!("ep.tol must be positive, got {}", cfg.tol);
        }
        Ok(cfg)
    }
}

/// Reads a headed CSV of numbers; lines starting with `#` are skipped.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading data file {}", path.display()))?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() {
        bail!("data file {} has no header row", path.display());
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("data row {}", row + 1))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("column `{}` row {}: `{field}` is not a number", names[j], row + 1))?;
            columns[j].push(v);
        }
    }
    Ok(Dataset::new(names, columns)?)
}
