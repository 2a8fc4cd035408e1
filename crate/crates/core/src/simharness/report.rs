use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::SimulationConfig;
use crate::error::{invalid, Result};

/// Version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Replications that produced no pivot, by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    /// LASSO selected nothing; no pivot is defined there.
    pub empty_selection: usize,
    /// Tied first-knot scores; the replication is replaced by the next one.
    pub ties: usize,
    /// Observed statistic outside its truncation interval.
    pub sandwich_violations: usize,
    /// Solver or factorization failures.
    pub numerical_failures: usize,
}

/// Campaign-level diagnostics aggregated over usable replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignDiagnostics {
    pub max_influence: f64,
    pub median_influence: f64,
    /// Largest constraint count `r`.
    pub max_constraints: usize,
    /// Distinct selected states seen.
    pub observed_state_count: usize,
    /// Rows dropped from `M` for being orthogonal to the contrast, summed.
    pub zero_rows: usize,
    /// `δ = (log p)^{−(1+κ)/2}`; absent when it is not below one (p < 3).
    pub delta: Option<f64>,
    /// Fraction of truncation intervals narrower than `δ`.
    pub width_violation_rate: Option<f64>,
    /// Fraction of truncation intervals farther than `1/δ` from the origin.
    pub distance_violation_rate: Option<f64>,
    /// Approximation-error kernel at the campaign's worst `M`, `r`, state count.
    pub approximation_bound_kernel: f64,
    /// Rate condition at the same inputs.
    pub pivot_rate_condition: f64,
    /// `n^{−1/2}(log p)^{7+3κ}`.
    pub log_p_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config: SimulationConfig,
    /// Penalty used by LASSO campaigns.
    pub lambda: Option<f64>,
    /// `E|ε|³` of the error family.
    pub third_abs_moment: f64,
    pub attempted_replications: usize,
    pub usable_pivots: usize,
    pub skipped: SkipCounts,
    pub sandwich_violations: usize,
    pub ks_statistic: f64,
    pub rejection_rate_at_05: f64,
    pub coverage_rate: Option<f64>,
    /// Intervals whose inversion failed; counted as misses in `coverage_rate`.
    pub coverage_failures: usize,
    /// Active-set sizes (LASSO) or entering columns (covariance test).
    pub selected_counts: BTreeMap<String, usize>,
    pub diagnostics: CampaignDiagnostics,
    pub pivots: Vec<f64>,
}

impl SimulationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| invalid(format!("report serialization failed: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Pivots as a one-column CSV with header `pivot`.
    pub fn pivots_csv(&self) -> String {
        let mut out = String::from("pivot\n");
        for p in &self.pivots {
            out.push_str(&format!("{p}\n"));
        }
        out
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `pivots` and
/// the uniform CDF on `[0, 1]`.
pub fn ks_statistic(pivots: &[f64]) -> Result<f64> {
    if pivots.is_empty() {
        return Err(invalid("ks_statistic needs at least one value"));
    }
    if let Some(v) = pivots.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("pivot {v} lies outside [0, 1]")));
    }
    let mut sorted = pivots.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let above = (i + 1) as f64 / n - u;
            let below = u - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max))
}
