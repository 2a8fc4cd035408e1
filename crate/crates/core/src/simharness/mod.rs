//! Reproducible Monte Carlo campaigns over the selection and pivot pipeline.

mod config;
mod family;
mod report;
mod rng;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use config::{
    DesignSpec, Experiment, LambdaRule, SimulationConfig, Target, DEFAULT_ALPHA, DEFAULT_CAP_FACTOR,
    DEFAULT_KAPPA,
};
pub use family::{draw_errors, ErrorFamily, ErrorFamilyName, MIN_STUDENT_DF};
pub use report::{ks_statistic, CampaignDiagnostics, SimulationReport, SkipCounts, SCHEMA_VERSION};
pub use rng::{design_rng, replication_rng};

use crate::design::DesignMatrix;
use crate::diagnostics::{
    approximation_bound_kernel, influence_constant, log_p_delta, log_p_rate, pivot_rate_condition,
    RateConfig,
};
use crate::error::{invalid, Error, Result};
use crate::events::{
    coefficient_contrast, covariance_test_bounds, first_knot_event, lasso_event, GlmFamily, StateLabel,
};
use crate::lasso::solve_lasso;
use crate::truncnorm::{
    confidence_interval, delta_assumption_check, truncation_interval, two_sided_pivot,
    upper_tail_pivot, DeltaCheckConfig, PivotInputs, TruncationInterval, SANDWICH_TOL,
};

/// Replications evaluated per parallel batch. Fixed so that the set of
/// replications examined never depends on the worker count.
const BATCH: usize = 256;
/// Fewest usable pivots a campaign may end with.
pub const MIN_USABLE_PIVOTS: usize = 10;
/// Pivots at or below this count as rejections.
const REJECTION_LEVEL: f64 = 0.05;

/// Builds the campaign's design. `user` must be given for `user_csv` designs
/// and is ignored otherwise.
pub fn generate_design(cfg: &SimulationConfig, user: Option<&DesignMatrix>) -> Result<DesignMatrix> {
    let (n, p) = (cfg.n, cfg.p);
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be at least 1"));
    }
    let gaussian = |rng: &mut rand_chacha::ChaCha20Rng| -> DMatrix<f64> {
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        DMatrix::from_row_slice(n, p, &data)
    };
    match &cfg.design {
        DesignSpec::RowIidNormalColumnNormalized => {
            let raw = gaussian(&mut design_rng(cfg.seed));
            DesignMatrix::new(raw)?.normalize_columns()
        }
        DesignSpec::Orthonormal => {
            if p > n {
                return Err(invalid(format!("design: orthonormal needs p <= n, got p = {p}, n = {n}")));
            }
            let qr = gaussian(&mut design_rng(cfg.seed)).qr();
            let r = qr.r();
            let mut q = qr.q();
            for j in 0..p {
                if r[(j, j)] < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            DesignMatrix::new(q)
        }
        DesignSpec::UserCsv(path) => {
            let x = user.ok_or_else(|| invalid(format!("design: user_csv design {path} was not loaded")))?;
            if x.n() != n || x.p() != p {
                return Err(invalid(format!(
                    "design: {path} is {} x {}, config declares {n} x {p}",
                    x.n(),
                    x.p()
                )));
            }
            Ok(x.clone())
        }
    }
}

/// One usable replication.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotRecord {
    pub index: u64,
    pub pivot: f64,
    pub label: StateLabel,
    pub observed: f64,
    pub variance: f64,
    /// Mean at which the pivot was evaluated.
    pub mean: f64,
    /// `ηᵀXβ⁰`.
    pub true_mean: f64,
    pub interval: TruncationInterval,
    /// Selective interval for the true mean, when the experiment builds one.
    pub confidence_interval: Option<(f64, f64)>,
    pub influence: f64,
    pub constraints: usize,
    pub zero_rows: usize,
}

impl PivotRecord {
    pub fn covers(&self) -> Option<bool> {
        self.confidence_interval
            .map(|(lo, hi)| lo <= self.true_mean && self.true_mean <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Usable(PivotRecord, bool),
    EmptySelection,
    Tie,
    SandwichViolation,
    Failed,
}

/// Full result of a campaign: the serializable report and per-replication records.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub report: SimulationReport,
    pub records: Vec<PivotRecord>,
}

struct Setup {
    x: DesignMatrix,
    mu: DVector<f64>,
    sigma_diag: DVector<f64>,
    lambda: f64,
}

/// Response `Xβ⁰ + ε` of replication `index`.
pub fn replication_response(cfg: &SimulationConfig, x: &DesignMatrix, index: u64) -> Result<DVector<f64>> {
    let mu = x.times(&DVector::from_column_slice(&cfg.beta0))?;
    let eps = draw_errors(&cfg.family, cfg.n, &mut replication_rng(cfg.seed, index))?;
    Ok(mu + DVector::from_vec(eps))
}

/// Runs a campaign on the default thread pool with a generated design.
pub fn run_campaign(cfg: &SimulationConfig) -> Result<SimulationReport> {
    Ok(run_campaign_with(cfg, None, None)?.report)
}

/// Runs a campaign with an optional user design and worker count. The
/// output is identical for every worker count.
pub fn run_campaign_with(
    cfg: &SimulationConfig,
    user_design: Option<&DesignMatrix>,
    workers: Option<usize>,
) -> Result<CampaignOutcome> {
    cfg.validate()?;
    let x = generate_design(cfg, user_design)?;
    let mu = x.times(&DVector::from_column_slice(&cfg.beta0))?;
    let setup = Setup {
        sigma_diag: DVector::from_element(cfg.n, cfg.family.variance),
        lambda: cfg.lambda(),
        x,
        mu,
    };
    match workers {
        Some(0) => Err(invalid("workers: must be at least 1")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| invalid(format!("workers: cannot start thread pool: {e}")))?;
            pool.install(|| collect(cfg, &setup))
        }
        None => collect(cfg, &setup),
    }
}

fn collect(cfg: &SimulationConfig, setup: &Setup) -> Result<CampaignOutcome> {
    let cap = cfg.replication_cap();
    let mut records = Vec::with_capacity(cfg.replications);
    let mut skipped = SkipCounts::default();
    let mut coverage_failures = 0;
    let mut attempted = 0;
    'batches: while attempted < cap && records.len() < cfg.replications {
        let end = (attempted + BATCH).min(cap);
        let outcomes: Vec<Outcome> = (attempted..end)
            .into_par_iter()
            .map(|i| replicate(cfg, setup, i as u64))
            .collect();
        for outcome in outcomes {
            attempted += 1;
            match outcome {
                Outcome::Usable(rec, ci_failed) => {
                    coverage_failures += usize::from(ci_failed);
                    records.push(rec);
                }
                Outcome::EmptySelection => skipped.empty_selection += 1,
                Outcome::Tie => skipped.ties += 1,
                Outcome::SandwichViolation => skipped.sandwich_violations += 1,
                Outcome::Failed => skipped.numerical_failures += 1,
            }
            if records.len() == cfg.replications {
                break 'batches;
            }
        }
    }
    if records.len() < MIN_USABLE_PIVOTS {
        return Err(Error::Campaign {
            usable: records.len(),
            required: MIN_USABLE_PIVOTS,
            attempted,
        });
    }
    let report = summarize(cfg, setup, &records, attempted, skipped, coverage_failures)?;
    Ok(CampaignOutcome { report, records })
}

fn replicate(cfg: &SimulationConfig, setup: &Setup, index: u64) -> Outcome {
    let eps = match draw_errors(&cfg.family, cfg.n, &mut replication_rng(cfg.seed, index)) {
        Ok(e) => DVector::from_vec(e),
        Err(_) => return Outcome::Failed,
    };
    let y = &setup.mu + eps;
    let result = match cfg.experiment {
        Experiment::LassoPivot => lasso_replication(cfg, setup, &y, index),
        Experiment::CovtestPivot => covtest_replication(cfg, setup, &y, index),
    };
    result.unwrap_or_else(|e| match e {
        Error::DegenerateSelection { .. } => Outcome::Tie,
        _ => Outcome::Failed,
    })
}

fn lasso_replication(
    cfg: &SimulationConfig,
    setup: &Setup,
    y: &DVector<f64>,
    index: u64,
) -> Result<Outcome> {
    let x = &setup.x;
    let fit = solve_lasso(x, y, setup.lambda)?;
    if fit.active.is_empty() {
        return Ok(Outcome::EmptySelection);
    }
    let event = lasso_event(x, &fit.active, &fit.signs, setup.lambda)?;
    let eta = coefficient_contrast(x, &fit.active, fit.active[0])?;
    let (interval, geom) = truncation_interval(&event, &setup.sigma_diag, &eta, y)?;
    if !interval.contains(geom.observed, SANDWICH_TOL) {
        return Ok(Outcome::SandwichViolation);
    }
    let true_mean = eta.dot(&setup.mu);
    let mean = match cfg.target {
        Target::TrueMean => true_mean,
        Target::ZeroNull => 0.0,
    };
    let inputs = PivotInputs::new(geom.observed, geom.eta_variance, mean, interval)?;
    let pivot = two_sided_pivot(&inputs)?;
    let (ci, ci_failed) = match confidence_interval(&inputs, cfg.alpha) {
        Ok(ci) => (Some(ci), false),
        Err(_) => (None, true),
    };
    let influence = influence_constant(&event, &setup.sigma_diag, &eta)?;
    Ok(Outcome::Usable(
        PivotRecord {
            index,
            pivot,
            label: event.label().clone(),
            observed: geom.observed,
            variance: geom.eta_variance,
            mean,
            true_mean,
            interval,
            confidence_interval: ci,
            influence: influence.m,
            constraints: influence.r,
            zero_rows: influence.zero_rows.len(),
        },
        ci_failed,
    ))
}

fn covtest_replication(
    cfg: &SimulationConfig,
    setup: &Setup,
    y: &DVector<f64>,
    index: u64,
) -> Result<Outcome> {
    let x = &setup.x;
    let knot = first_knot_event(x, y, GlmFamily::Gaussian)?;
    let label = knot.event.label().clone();
    let bounds = covariance_test_bounds(x, y, &setup.sigma_diag, &label, GlmFamily::Gaussian)?;
    let interval = TruncationInterval::new(bounds.lower, bounds.upper);
    if !interval.contains(knot.lambda1, SANDWICH_TOL) {
        return Ok(Outcome::SandwichViolation);
    }
    let eta = x.values().column(knot.index) * f64::from(knot.sign);
    let true_mean = eta.dot(&setup.mu);
    let mean = match cfg.target {
        Target::TrueMean => true_mean,
        Target::ZeroNull => GlmFamily::Gaussian.null_mean(),
    };
    let inputs = PivotInputs::new(knot.lambda1, bounds.theta_jj, mean, interval)?;
    let pivot = upper_tail_pivot(&inputs)?;
    let influence = influence_constant(&knot.event, &setup.sigma_diag, &eta)?;
    Ok(Outcome::Usable(
        PivotRecord {
            index,
            pivot,
            label,
            observed: knot.lambda1,
            variance: bounds.theta_jj,
            mean,
            true_mean,
            interval,
            confidence_interval: None,
            influence: influence.m,
            constraints: influence.r,
            zero_rows: influence.zero_rows.len(),
        },
        false,
    ))
}

fn summarize(
    cfg: &SimulationConfig,
    setup: &Setup,
    records: &[PivotRecord],
    attempted: usize,
    skipped: SkipCounts,
    coverage_failures: usize,
) -> Result<SimulationReport> {
    let pivots: Vec<f64> = records.iter().map(|r| r.pivot).collect();
    let usable = pivots.len();
    let ks = ks_statistic(&pivots)?;
    let rejections = pivots.iter().filter(|&&p| p <= REJECTION_LEVEL).count();

    let coverage_rate = match cfg.experiment {
        Experiment::LassoPivot => {
            let covered = records.iter().filter(|r| r.covers() == Some(true)).count();
            Some(covered as f64 / usable as f64)
        }
        Experiment::CovtestPivot => None,
    };

    let mut selected_counts = BTreeMap::new();
    let mut states = BTreeSet::new();
    for r in records {
        let key = match &r.label {
            StateLabel::Lasso { active, .. } => active.len().to_string(),
            StateLabel::Knot { index, .. } => index.to_string(),
        };
        *selected_counts.entry(key).or_insert(0) += 1;
        states.insert(r.label.clone());
    }

    let mut influences: Vec<f64> = records.iter().map(|r| r.influence).collect();
    influences.sort_by(f64::total_cmp);
    let max_influence = influences[usable - 1];
    let median_influence = if usable % 2 == 1 {
        influences[usable / 2]
    } else {
        0.5 * (influences[usable / 2 - 1] + influences[usable / 2])
    };
    let max_constraints = records.iter().map(|r| r.constraints).max().unwrap_or(0);
    let card_s = states.len() as f64;

    let delta = log_p_delta(cfg.p, cfg.kappa);
    let (delta, width_rate, distance_rate) = match DeltaCheckConfig::new(delta) {
        Ok(check) => {
            let intervals: Vec<TruncationInterval> = records.iter().map(|r| r.interval).collect();
            let (w, d) = delta_assumption_check(&intervals, &check)?;
            (Some(delta), Some(w), Some(d))
        }
        Err(_) => (None, None, None),
    };
    let rate_cfg = RateConfig::new(
        log_p_delta(cfg.p.max(2), cfg.kappa),
        cfg.n,
        cfg.kappa,
        cfg.family.sigma(),
        cfg.p,
    )?;

    let diagnostics = CampaignDiagnostics {
        max_influence,
        median_influence,
        max_constraints,
        observed_state_count: states.len(),
        zero_rows: records.iter().map(|r| r.zero_rows).sum(),
        delta,
        width_violation_rate: width_rate,
        distance_violation_rate: distance_rate,
        approximation_bound_kernel: approximation_bound_kernel(
            max_influence,
            cfg.n,
            max_constraints,
            card_s,
        )?,
        pivot_rate_condition: pivot_rate_condition(&rate_cfg, max_influence, max_constraints, card_s)?,
        log_p_rate: log_p_rate(cfg.n, cfg.p, cfg.kappa),
    };

    Ok(SimulationReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        lambda: match cfg.experiment {
            Experiment::LassoPivot => Some(setup.lambda),
            Experiment::CovtestPivot => None,
        },
        third_abs_moment: cfg.family.third_abs_moment(),
        attempted_replications: attempted,
        usable_pivots: usable,
        skipped,
        sandwich_violations: skipped.sandwich_violations,
        ks_statistic: ks,
        rejection_rate_at_05: rejections as f64 / usable as f64,
        coverage_rate,
        coverage_failures,
        selected_counts,
        diagnostics,
        pivots,
    })
}
