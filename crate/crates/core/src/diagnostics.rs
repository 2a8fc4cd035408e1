//! Diagnostics for the asymptotic regime: influence constants, the rate
//! expressions that must vanish for the pivot to converge, sparsity and
//! eigenvalue bounds for the LASSO, and the smoothed maximum.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{check_len, invalid, Result};
use crate::events::SelectionEvent;
use crate::linalg::{eigen_range, GramFactor};

/// Influence of a single observation on `(ηᵀy, L, U)` for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSummary {
    /// `M = max_{i,j} |A_ij / (AΣη)_i| + ‖η‖∞` over participating rows.
    pub m: f64,
    /// Number of constraints `r`; zero when nothing was selected.
    pub r: usize,
    /// Distinct selected states behind this summary.
    pub observed_state_count: usize,
    /// Rows with `(AΣη)_i = 0`. They are orthogonal to the contrast, enter
    /// neither `L` nor `U`, and are left out of `M`.
    pub zero_rows: Vec<usize>,
}

/// Rows with `|(AΣη)_i| ≤ ZERO_ROW_TOL·max_k |(AΣη)_k|` count as orthogonal.
pub const ZERO_ROW_TOL: f64 = 1e-12;

pub fn influence_constant(
    event: &SelectionEvent,
    sigma_diag: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<InfluenceSummary> {
    check_len("variance vector", event.dim(), sigma_diag.len())?;
    check_len("contrast", event.dim(), eta.len())?;
    let sigma_eta = sigma_diag.component_mul(eta);
    if !(eta.dot(&sigma_eta) > 0.0) {
        return Err(invalid("ηᵀΣη must be positive"));
    }
    let projections = event.a() * &sigma_eta;
    let cutoff = ZERO_ROW_TOL * projections.amax();
    let mut worst: f64 = 0.0;
    let mut zero_rows = Vec::new();
    for (i, row) in event.a().row_iter().enumerate() {
        let d = projections[i].abs();
        if d <= cutoff {
            zero_rows.push(i);
            continue;
        }
        worst = worst.max(row.amax() / d);
    }
    Ok(InfluenceSummary {
        m: worst + eta.amax(),
        r: event.constraint_count(),
        observed_state_count: 1,
        zero_rows,
    })
}

/// Influence when the model is fixed in advance: `M = ‖η‖∞` with no constraints.
pub fn influence_without_selection(eta: &DVector<f64>) -> InfluenceSummary {
    InfluenceSummary {
        m: eta.amax(),
        r: 0,
        observed_state_count: 1,
        zero_rows: Vec::new(),
    }
}

/// Smoothing parameter `β ≥ 1` of the log-sum-exp maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedMaxParams {
    beta: f64,
}

impl SmoothedMaxParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(invalid(format!("smoothing parameter must be finite and >= 1, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `Γ(v, β) = (1/β)·log Σ_j exp(β v_j)`, evaluated after shifting by the
/// maximum. Always `max(v) ≤ Γ ≤ max(v) + log(s)/β`.
pub fn smoothed_max(values: &[f64], params: SmoothedMaxParams) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("smoothed maximum of an empty collection"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("smoothed maximum needs finite values"));
    }
    let beta = params.beta;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|&v| (beta * (v - top)).exp()).sum();
    Ok(top + sum.ln() / beta)
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Kernel `[(log(r·|S|))⁴ · n · M³]^{1/5}` of the distance between the
/// non-Gaussian and Gaussian laws of `(ηᵀy, L, U)`.
///
/// The multiplicative constant depends on the test function and the third
/// moment and is not included, so values compare only within one campaign.
pub fn approximation_bound_kernel(m: f64, n: usize, r: usize, card_s: f64) -> Result<f64> {
    require_positive("M", m)?;
    require_positive("card_S", card_s)?;
    if n == 0 || r == 0 {
        return Err(invalid("n and r must be positive"));
    }
    let log_states = (r as f64 * card_s).ln();
    Ok((log_states.powi(4) * n as f64 * m.powi(3)).powf(0.2))
}

/// Inputs of the convergence rate condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub delta: f64,
    pub n: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub p: usize,
}

impl RateConfig {
    pub fn new(delta: f64, n: usize, kappa: f64, sigma: f64, p: usize) -> Result<Self> {
        require_positive("delta", delta)?;
        require_positive("kappa", kappa)?;
        require_positive("sigma", sigma)?;
        if n == 0 || p == 0 {
            return Err(invalid("n and p must be positive"));
        }
        Ok(Self {
            delta,
            n,
            kappa,
            sigma,
            p,
        })
    }

    /// Uses `δ = (log p)^{−(1+κ)/2}`, the width/distance scale for LASSO
    /// and covariance-test events with `λ ∝ √(log p)`.
    pub fn with_log_p_delta(n: usize, p: usize, kappa: f64, sigma: f64) -> Result<Self> {
        if p < 2 {
            return Err(invalid("log p scaling needs p >= 2"));
        }
        Self::new(log_p_delta(p, kappa), n, kappa, sigma, p)
    }
}

/// `δ = (log p)^{−(1+κ)/2}`.
pub fn log_p_delta(p: usize, kappa: f64) -> f64 {
    (p as f64).ln().powf(-(1.0 + kappa) / 2.0)
}

/// `δ⁻⁶ · M³ · n · (log r + log |S|)⁴`; the pivot converges when this
/// tends to zero.
pub fn pivot_rate_condition(cfg: &RateConfig, m: f64, r: usize, card_s: f64) -> Result<f64> {
    require_positive("M", m)?;
    require_positive("card_S", card_s)?;
    if r == 0 {
        return Err(invalid("r must be positive"));
    }
    let logs = (r as f64).ln() + card_s.ln();
    Ok(cfg.delta.powi(-6) * m.powi(3) * cfg.n as f64 * logs.powi(4))
}

/// `n^{−1/2} (log p)^{7+3κ}`, the sufficient rate for both the LASSO and the
/// covariance test under bounded `max |X_ij| = O(n^{−1/2})`.
pub fn log_p_rate(n: usize, p: usize, kappa: f64) -> f64 {
    (n as f64).powf(-0.5) * (p as f64).ln().powf(7.0 + 3.0 * kappa)
}

/// Bound on the LASSO active set size and the state count it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityBound {
    /// `16 Q² K / m²`.
    pub max_active: f64,
    /// `c = 16 Q² / m²`, so that `|S| ≤ p^{cK}`.
    pub c: f64,
    pub k: usize,
    /// True when `Q` and `m` are eigenvalue proxies rather than known constants.
    pub proxy: bool,
}

impl SparsityBound {
    /// `log |S| ≤ cK log p`.
    pub fn log_state_count(&self, p: usize) -> f64 {
        self.c * self.k as f64 * (p as f64).ln()
    }
}

pub fn sparsity_bound(q: f64, m: f64, k: usize) -> Result<SparsityBound> {
    require_positive("Q", q)?;
    require_positive("m", m)?;
    let c = 16.0 * q * q / (m * m);
    Ok(SparsityBound {
        max_active: c * k as f64,
        c,
        k,
        proxy: false,
    })
}

/// Sparsity bound with `Q = φ_max(XᵀX)` and `m` replaced by the smallest
/// eigenvalue of `X_AᵀX_A` on the true support `A`.
pub fn sparsity_bound_proxy(x: &DesignMatrix, support: &[usize]) -> Result<SparsityBound> {
    if support.is_empty() {
        return Err(invalid("proxy needs a nonempty support"));
    }
    let (_, q) = eigen_range(&x.values().tr_mul(x.values()));
    let xa = x.select_columns(support);
    let (m, _) = eigen_range(&xa.tr_mul(&xa));
    let mut bound = sparsity_bound(q, m, support.len())?;
    bound.proxy = true;
    Ok(bound)
}

/// Outcome of the entrywise bound on `(X_EᵀX_E)⁻¹X_Eᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixInfluence {
    /// `max_{ij} |((X_EᵀX_E)⁻¹X_Eᵀ)_ij|`.
    pub lhs: f64,
    /// `(|E| / ν²) · max_{ij} |X_ij|`.
    pub rhs: f64,
    pub holds: bool,
    /// Smallest eigenvalue of `X_EᵀX_E`.
    pub min_eigenvalue: f64,
    /// Whether that eigenvalue is at least `ν²`.
    pub precondition_met: bool,
}

pub fn submatrix_influence_check(
    x: &DesignMatrix,
    active: &[usize],
    nu: f64,
) -> Result<SubmatrixInfluence> {
    require_positive("nu", nu)?;
    if active.is_empty() {
        return Err(invalid("active set is empty"));
    }
    if let Some(&j) = active.iter().find(|&&j| j >= x.p()) {
        return Err(invalid(format!("active index {j} out of range")));
    }
    let xe = x.select_columns(active);
    let gram = xe.tr_mul(&xe);
    let (min_eigenvalue, _) = eigen_range(&gram);
    let lhs = GramFactor::new(gram)?.solve_matrix(&xe.transpose()).amax();
    let rhs = active.len() as f64 / (nu * nu) * x.max_abs_entry();
    Ok(SubmatrixInfluence {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10,
        min_eigenvalue,
        precondition_met: min_eigenvalue >= nu * nu,
    })
}

/// `max_{i≠j} |x_iᵀx_j|`; the covariance-test denominators are at least
/// `1 − ρ²` when this is at most `ρ²` and `Σ = σ²I`.
pub fn max_abs_column_correlation(x: &DesignMatrix) -> f64 {
    let g = x.values().tr_mul(x.values());
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..i {
            worst = worst.max(g[(i, j)].abs());
        }
    }
    worst
}

/// `2 max |X_ij| / (1 − ρ²)`, the influence bound for the first-knot event.
pub fn covtest_influence_bound(x: &DesignMatrix, rho_squared: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho_squared) {
        return Err(invalid(format!("rho^2 must lie in [0, 1), got {rho_squared}")));
    }
    Ok(2.0 * x.max_abs_entry() / (1.0 - rho_squared))
}

/// Scale checks behind the LASSO convergence statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoRegime {
    /// `√n · max |X_ij|`, bounded when `max |X_ij| = O(n^{−1/2})`.
    pub scaled_max_entry: f64,
    /// `‖β⁰‖∞ / √(log p)`, bounded when `‖β⁰‖∞ = O(√(log p))`.
    pub scaled_signal: f64,
    /// `n^{−1/2} (log p)^{7+3κ}`, which must vanish.
    pub rate: f64,
    /// `λ / (σ √(log p))`; the sparsity bound assumes at least 4.
    pub lambda_ratio: f64,
}

pub fn lasso_regime(
    x: &DesignMatrix,
    beta0: &DVector<f64>,
    lambda: f64,
    sigma: f64,
    kappa: f64,
) -> Result<LassoRegime> {
    check_len("beta0", x.p(), beta0.len())?;
    require_positive("sigma", sigma)?;
    require_positive("kappa", kappa)?;
    if x.p() < 2 {
        return Err(invalid("regime checks need p >= 2"));
    }
    let n = x.n();
    let p = x.p();
    let log_p = (p as f64).ln();
    Ok(LassoRegime {
        scaled_max_entry: (n as f64).sqrt() * x.max_abs_entry(),
        scaled_signal: beta0.amax() / log_p.sqrt(),
        rate: log_p_rate(n, p, kappa),
        lambda_ratio: lambda / (sigma * log_p.sqrt()),
    })
}
