use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::DVector;
use serde::Serialize;

use selinf::diagnostics::influence_constant;
use selinf::events::{coefficient_contrast, covariance_test_bounds, first_knot_event, lasso_event};
use selinf::lasso::solve_lasso;
use selinf::simharness::{run_campaign_with, DesignSpec, SimulationConfig};
use selinf::truncnorm::{
    confidence_interval, truncation_interval, two_sided_pivot, upper_tail_pivot, PivotInputs,
    TruncationInterval,
};
use selinf::{DesignMatrix, GlmFamily};

use crate::csvio::{read_design, read_response};

/// Version of the `fit` and `covtest` report layouts.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Failures, each mapped to its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0:#}")]
    Input(#[from] anyhow::Error),
    #[error("degenerate selection: {0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Degenerate(_) => 3,
        }
    }
}

fn library(err: selinf::Error) -> CliError {
    match err {
        selinf::Error::DegenerateSelection { .. } => CliError::Degenerate(err.to_string()),
        other => CliError::Input(anyhow!(other)),
    }
}

/// A finished command: its report and exit code.
pub struct Completed {
    pub json: String,
    pub exit_code: u8,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).context("cannot serialize report")?;
    s.push('\n');
    Ok(s)
}

/// Penalty given as a number or as the rule `four_sigma_sqrt_log_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    FourSigmaSqrtLogP,
}

impl std::str::FromStr for LambdaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "four_sigma_sqrt_log_p" {
            return Ok(Self::FourSigmaSqrtLogP);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Self::Value(v)),
            _ => Err(format!("expected a positive number or four_sigma_sqrt_log_p, got {s:?}")),
        }
    }
}

fn load_data(design: &Path, response: &Path) -> Result<(DesignMatrix, DVector<f64>), CliError> {
    let x = read_design(design)?;
    let y = read_response(response)?;
    if y.len() != x.n() {
        return Err(anyhow!(
            "{} has {} rows but {} has {}",
            design.display(),
            x.n(),
            response.display(),
            y.len()
        )
        .into());
    }
    Ok((x, DVector::from_vec(y)))
}

fn check_sigma(sigma: f64) -> Result<f64, CliError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(anyhow!("--sigma must be positive, got {sigma}").into());
    }
    Ok(sigma)
}

#[derive(Debug, Serialize)]
struct CoefficientReport {
    index: usize,
    lasso_estimate: f64,
    /// Least-squares coefficient on the active set, `ηᵀy`.
    estimate: f64,
    p_value: f64,
    interval: Option<[f64; 2]>,
    truncation: TruncationInterval,
    influence: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    schema_version: u32,
    command: &'static str,
    n: usize,
    p: usize,
    lambda: f64,
    sigma: f64,
    alpha: f64,
    active: Vec<usize>,
    signs: Vec<i8>,
    kkt_residual: f64,
    constraints: usize,
    max_influence: Option<f64>,
    coefficients: Vec<CoefficientReport>,
}

pub fn fit(
    design: &Path,
    response: &Path,
    lambda: LambdaSpec,
    sigma: f64,
    alpha: f64,
) -> Result<Completed, CliError> {
    let sigma = check_sigma(sigma)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(anyhow!("--alpha must lie in (0, 1), got {alpha}").into());
    }
    let (x, y) = load_data(design, response)?;
    let lambda = match lambda {
        LambdaSpec::Value(v) => v,
        LambdaSpec::FourSigmaSqrtLogP => {
            if x.p() < 2 {
                return Err(anyhow!("four_sigma_sqrt_log_p needs at least two columns").into());
            }
            4.0 * sigma * (x.p() as f64).ln().sqrt()
        }
    };
    let fit = solve_lasso(&x, &y, lambda).map_err(library)?;
    let mut report = FitReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "fit",
        n: x.n(),
        p: x.p(),
        lambda,
        sigma,
        alpha,
        active: fit.active.clone(),
        signs: fit.signs.clone(),
        kkt_residual: fit.kkt_residual,
        constraints: 0,
        max_influence: None,
        coefficients: Vec::new(),
    };
    if fit.active.is_empty() {
        return Ok(Completed {
            json: to_json(&report)?,
            exit_code: 2,
        });
    }

    let event = lasso_event(&x, &fit.active, &fit.signs, lambda).map_err(library)?;
    let sigma_diag = DVector::from_element(x.n(), sigma * sigma);
    report.constraints = event.constraint_count();
    let mut max_influence: f64 = 0.0;
    for &j in &fit.active {
        let eta = coefficient_contrast(&x, &fit.active, j).map_err(library)?;
        let (interval, geom) = truncation_interval(&event, &sigma_diag, &eta, &y).map_err(library)?;
        let inputs = PivotInputs::new(geom.observed, geom.eta_variance, 0.0, interval).map_err(library)?;
        let p_value = two_sided_pivot(&inputs).map_err(library)?;
        let ci = confidence_interval(&inputs, alpha).ok().map(|(lo, hi)| [lo, hi]);
        let influence = influence_constant(&event, &sigma_diag, &eta).map_err(library)?;
        max_influence = max_influence.max(influence.m);
        report.coefficients.push(CoefficientReport {
            index: j,
            lasso_estimate: fit.beta[j],
            estimate: geom.observed,
            p_value,
            interval: ci,
            truncation: interval,
            influence: influence.m,
        });
    }
    report.max_influence = Some(max_influence);
    Ok(Completed {
        json: to_json(&report)?,
        exit_code: 0,
    })
}

#[derive(Debug, Serialize)]
struct CovtestReport {
    schema_version: u32,
    command: &'static str,
    family: &'static str,
    n: usize,
    p: usize,
    variance: f64,
    index: usize,
    sign: i8,
    lambda1: f64,
    truncation: TruncationInterval,
    theta_jj: f64,
    skipped_zero_denominators: usize,
    p_value: f64,
}

/// Global-null covariance test at the first knot. Without `sigma`, the
/// Bernoulli and Poisson null variances are used; Gaussian data need `sigma`.
pub fn covtest(
    design: &Path,
    response: &Path,
    family: GlmFamily,
    sigma: Option<f64>,
) -> Result<Completed, CliError> {
    let variance = match (family, sigma) {
        (_, Some(s)) => check_sigma(s)?.powi(2),
        (GlmFamily::Gaussian, None) => bail_input("--sigma is required for the gaussian family")?,
        (f, None) => f.null_variance(),
    };
    let (x, y) = load_data(design, response)?;
    let knot = first_knot_event(&x, &y, family).map_err(library)?;
    let sigma_diag = DVector::from_element(x.n(), variance);
    let bounds = covariance_test_bounds(&x, &y, &sigma_diag, knot.event.label(), family).map_err(library)?;
    let truncation = TruncationInterval::new(bounds.lower, bounds.upper);
    let inputs = PivotInputs::new(knot.lambda1, bounds.theta_jj, 0.0, truncation).map_err(library)?;
    let report = CovtestReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: "covtest",
        family: family.name(),
        n: x.n(),
        p: x.p(),
        variance,
        index: knot.index,
        sign: knot.sign,
        lambda1: knot.lambda1,
        truncation,
        theta_jj: bounds.theta_jj,
        skipped_zero_denominators: bounds.skipped_zero_denominators,
        p_value: upper_tail_pivot(&inputs).map_err(library)?,
    };
    Ok(Completed {
        json: to_json(&report)?,
        exit_code: 0,
    })
}

fn bail_input<T>(msg: &str) -> Result<T, CliError> {
    Err(CliError::Input(anyhow!(msg.to_string())))
}

/// Paths written by `simulate`.
pub struct SimulationFiles {
    pub report: PathBuf,
    pub pivots: PathBuf,
    pub usable_pivots: usize,
    pub ks_statistic: f64,
}

pub fn simulate(
    config_path: &Path,
    out_dir: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<SimulationFiles, CliError> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read {}", config_path.display()))?;
    let mut cfg = SimulationConfig::from_json(&text)
        .map_err(|e| anyhow!("{}: {e}", config_path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let user = match &cfg.design {
        DesignSpec::UserCsv(path) => {
            let base = config_path.parent().unwrap_or(Path::new("."));
            Some(read_design(&base.join(path))?)
        }
        _ => None,
    };
    let outcome = run_campaign_with(&cfg, user.as_ref(), workers).map_err(library)?;
    let report = &outcome.report;

    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let report_path = out_dir.join("report.json");
    let pivots_path = out_dir.join("pivots.csv");
    fs::write(&report_path, report.to_json().map_err(library)?)
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    fs::write(&pivots_path, report.pivots_csv())
        .with_context(|| format!("cannot write {}", pivots_path.display()))?;
    if report.usable_pivots < cfg.replications {
        eprintln!(
            "warning: {} usable pivots of {} requested after {} replications",
            report.usable_pivots, cfg.replications, report.attempted_replications
        );
    }
    Ok(SimulationFiles {
        report: report_path,
        pivots: pivots_path,
        usable_pivots: report.usable_pivots,
        ks_statistic: report.ks_statistic,
    })
}
