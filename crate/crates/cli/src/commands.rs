use crate::args::{Command, Common, Format};
use crate::output::{float, to_json};
use ccrflow::fermion::{self, FermionCovariance, FermionLimitSpectra};
use ccrflow::flow::{self, TrajectoryRecord};
use ccrflow::gaussian::{self, Measure};
use ccrflow::io::MatrixJson;
use ccrflow::linalg::{self, HermEigen, RMat};
use ccrflow::star::{Classification, CovarianceForm, StarSpace, Tolerances};
use ccrflow::suite;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("validation error: {0}")]
    Validation(#[from] ccrflow::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("contract failure: {0}")]
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Text written to the output, plus whether the run met its contract.
pub struct Outcome {
    pub text: String,
    pub contract_failure: Option<String>,
}

impl From<String> for Outcome {
    fn from(text: String) -> Self {
        Outcome { text, contract_failure: None }
    }
}

pub fn tolerances(overrides: &[String]) -> CliResult<Tolerances> {
    let mut tol = Tolerances::default();
    for item in overrides {
        let (name, value) = item.split_once('=').ok_or_else(|| CliError::Usage(format!("--tol expects NAME=VALUE, got '{item}'")))?;
        let value: f64 = value.trim().parse().map_err(|_| CliError::Usage(format!("--tol {name}: '{value}' is not a number")))?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(CliError::Usage(format!("--tol {name}: must be positive")));
        }
        match name.trim() {
            "herm_rel" => tol.herm_rel = value,
            "psd_rel" => tol.psd_rel = value,
            "spec" => tol.spec = value,
            "degenerate_rel" => tol.degenerate_rel = value,
            other => return Err(CliError::Usage(format!("unknown tolerance '{other}'"))),
        }
    }
    Ok(tol)
}

pub fn parse_measure(text: &str) -> CliResult<Measure> {
    match text.to_ascii_lowercase().as_str() {
        "liouville" => Ok(Measure::Liouville),
        "euclidean" => Ok(Measure::Euclidean),
        other => {
            let m = other
                .strip_prefix("explicit:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|m| *m > 0.0 && m.is_finite())
                .ok_or_else(|| CliError::Usage(format!("unknown measure '{text}' (liouville, euclidean, explicit:<m> with m > 0)")))?;
            Ok(Measure::Explicit(m))
        }
    }
}

fn read_matrix(path: &Path) -> CliResult<linalg::CMat> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    let json: MatrixJson =
        serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.to_owned(), message: e.to_string() })?;
    Ok(json.to_matrix()?)
}

fn read_form(path: &Path, tol: Tolerances) -> CliResult<CovarianceForm> {
    let m = read_matrix(path)?;
    Ok(CovarianceForm::with_tolerances(StarSpace::new(m.nrows())?, m, tol)?)
}

fn rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn json_only(format: Option<Format>, command: &str) -> CliResult<()> {
    match format {
        Some(Format::Csv) => Err(CliError::Usage(format!("{command} writes JSON only; csv is available for trajectory"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct FlowOutput {
    r: f64,
    form: MatrixJson,
    ratio_spectrum: Vec<f64>,
    sigma_deviation: f64,
}

#[derive(Serialize)]
struct TrajectoryOutput<'a> {
    records: &'a [TrajectoryRecord],
    loewner_step_min: &'a [f64],
    loewner_decreasing: bool,
    distances_decreasing: bool,
}

#[derive(Serialize)]
struct NormalFormOutput {
    basis: Vec<Vec<f64>>,
    mus: Vec<f64>,
    degenerate_dim: usize,
    canonical_sigma: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ClassifyOutput {
    ratio_spectrum: Vec<f64>,
    #[serde(flatten)]
    classification: Classification,
}

#[derive(Serialize)]
struct FermionOutput {
    eigenvalues: Vec<f64>,
    r: Option<f64>,
    flowed: Option<MatrixJson>,
    flowed_eigenvalues: Option<Vec<f64>>,
    limits: Option<FermionLimitSpectra>,
    /// Why the limit tables were not applied.
    limits_skipped: Option<String>,
}

pub const CSV_HEADER: [&str; 5] = ["r", "lambda_min", "lambda_max", "dist_to_limit", "extremality_residual"];

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    for rec in records {
        w.write_record([
            float(rec.r),
            float(rec.lambda_min()),
            float(rec.lambda_max()),
            float(rec.dist_to_limit),
            float(rec.extremality_residual),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is UTF-8")
}

pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|k| 2f64.powi(k)).collect()
}

pub fn run(command: &Command, common: &Common) -> CliResult<Outcome> {
    let tol = tolerances(&common.tol)?;
    let format = common.format;
    match command {
        Command::Flow { input, r } => {
            json_only(format, "flow")?;
            let s = read_form(input, tol)?;
            let p = flow::flow(&s, *r)?;
            Ok(to_json(&FlowOutput {
                r: *r,
                form: MatrixJson::from_matrix(p.form.matrix()),
                ratio_spectrum: p.form.ratio_operator().spectrum().to_vec(),
                sigma_deviation: p.sigma_deviation(&s),
            })
            .into())
        }
        Command::Trajectory { input, r_grid } => {
            let s = read_form(input, tol)?;
            let grid = r_grid.clone().unwrap_or_else(default_grid);
            let t = flow::flow_trajectory(&s, &grid)?;
            Ok(match format {
                Some(Format::Csv) => trajectory_csv(&t.records),
                _ => to_json(&TrajectoryOutput {
                    records: &t.records,
                    loewner_step_min: &t.step_min_eigenvalues,
                    loewner_decreasing: t.loewner_decreasing(),
                    distances_decreasing: t.distances_decreasing(),
                }),
            }
            .into())
        }
        Command::NormalForm { input } => {
            json_only(format, "normal-form")?;
            let s = read_form(input, tol)?;
            let nf = s.normal_form()?;
            Ok(to_json(&NormalFormOutput {
                basis: rows(&nf.basis),
                mus: nf.mus.clone(),
                degenerate_dim: nf.degenerate_dim,
                canonical_sigma: rows(&nf.canonical_sigma()),
            })
            .into())
        }
        Command::Classify { input } => {
            json_only(format, "classify")?;
            let s = read_form(input, tol)?;
            Ok(to_json(&ClassifyOutput {
                ratio_spectrum: s.ratio_operator().spectrum().to_vec(),
                classification: s.classify(),
            })
            .into())
        }
        Command::DensityPower { input, r, measure } => {
            json_only(format, "density-power")?;
            let s = read_form(input, tol)?;
            let record = gaussian::density_power_record(&s, *r, parse_measure(measure)?)?;
            Ok(to_json(&record).into())
        }
        Command::Verify => {
            let report = suite::run(common.seed)?;
            let text = match format {
                Some(Format::Json) => to_json(&report),
                Some(Format::Csv) => return Err(CliError::Usage("verify writes a table or JSON".into())),
                None => report.table(),
            };
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed && !c.informational).map(|c| c.name).collect();
            let contract_failure = (!failed.is_empty()).then(|| format!("verify: {} failed", failed.join(", ")));
            Ok(Outcome { text, contract_failure })
        }
        Command::Fermion { input, r } => {
            json_only(format, "fermion")?;
            let m = read_matrix(input)?;
            let cov = FermionCovariance::with_tolerance(m, tol.herm_rel)?;
            let flowed = r.map(|r| fermion::fermion_flow(&cov, r)).transpose()?;
            let (limits, limits_skipped) = match fermion::fermion_limit_spectra(&cov, tol.spec) {
                Ok(l) => (Some(l), None),
                Err(e @ ccrflow::Error::NotComplementary { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            Ok(to_json(&FermionOutput {
                eigenvalues: HermEigen::new(cov.matrix()).values,
                r: *r,
                flowed_eigenvalues: flowed.as_ref().map(|f| HermEigen::new(f.matrix()).values),
                flowed: flowed.as_ref().map(|f| MatrixJson::from_matrix(f.matrix())),
                limits,
                limits_skipped,
            })
            .into())
        }
    }
}

pub fn write(common: &Common, text: &str) -> CliResult<()> {
    match &common.output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_contract_failures_exit_with_two() {
        assert_eq!(CliError::Contract("verify".into()).exit_code(), 2);
        assert_eq!(CliError::Usage("csv".into()).exit_code(), 1);
        assert_eq!(CliError::Validation(ccrflow::Error::NonPositiveR(-1.0)).exit_code(), 1);
    }

    #[test]
    fn measures_parse() {
        assert_eq!(parse_measure("liouville").unwrap(), Measure::Liouville);
        assert_eq!(parse_measure("Euclidean").unwrap(), Measure::Euclidean);
        assert_eq!(parse_measure("explicit:0.25").unwrap(), Measure::Explicit(0.25));
        assert!(parse_measure("explicit:-1").is_err());
        assert!(parse_measure("lebesgue").is_err());
    }
}
