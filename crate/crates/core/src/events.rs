//! Affine selection events `{y : A y ≤ b}` and the contrasts used for
//! inference after selection.
//!
//! Two selection procedures are covered: the LASSO at a fixed λ, whose state
//! is the active set with its signs `(E, z_E)`, and the first knot of an
//! ℓ₁-penalized GLM path, whose state is the entering variable and the sign
//! of its score `(j*, s*)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::GramFactor;

/// Slack allowed on `A y ≤ b` when testing membership.
pub const MEMBERSHIP_SLACK: f64 = 1e-10;

/// Relative tolerance under which two absolute scores count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Which selected state an event describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    /// LASSO active set `E` (increasing) and signs `z_E`.
    Lasso { active: Vec<usize>, signs: Vec<i8> },
    /// First variable to enter the path and the sign of its score.
    Knot { index: usize, sign: i8 },
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Lasso { active, signs } => {
                write!(f, "E=")?;
                for (k, (j, s)) in active.iter().zip(signs).enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}{}", if *s > 0 { '+' } else { '-' }, j)?;
                }
                if active.is_empty() {
                    write!(f, "{{}}")?;
                }
                Ok(())
            }
            StateLabel::Knot { index, sign } => {
                write!(f, "j*={index},s*={}", if *sign > 0 { '+' } else { '-' })
            }
        }
    }
}

/// A polyhedral selection event.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEvent {
    a: DMatrix<f64>,
    b: DVector<f64>,
    label: StateLabel,
}

impl SelectionEvent {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, label: StateLabel) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(invalid("selection event needs at least one constraint"));
        }
        check_len("constraint offsets", a.nrows(), b.len())?;
        Ok(Self { a, b, label })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn label(&self) -> &StateLabel {
        &self.label
    }

    /// Number of constraints `k`.
    pub fn constraint_count(&self) -> usize {
        self.a.nrows()
    }

    /// Response dimension `n`.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `max_i ((A y)_i − b_i)`; non-positive inside the event.
    pub fn max_violation(&self, y: &DVector<f64>) -> Result<f64> {
        check_len("response", self.dim(), y.len())?;
        let ay = &self.a * y;
        Ok(ay
            .iter()
            .zip(self.b.iter())
            .map(|(l, r)| l - r)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `A y ≤ b + slack` with [`MEMBERSHIP_SLACK`].
    pub fn contains(&self, y: &DVector<f64>) -> Result<bool> {
        Ok(self.max_violation(y)? <= MEMBERSHIP_SLACK)
    }

    /// Smallest Euclidean distance from `y` to any constraint hyperplane.
    /// Rows that are identically zero are ignored.
    pub fn facet_distance(&self, y: &DVector<f64>) -> Result<f64> {
        check_len("response", self.dim(), y.len())?;
        let ay = &self.a * y;
        let mut best = f64::INFINITY;
        for (i, row) in self.a.row_iter().enumerate() {
            let norm = row.norm();
            if norm > 0.0 {
                best = best.min((self.b[i] - ay[i]).abs() / norm);
            }
        }
        Ok(best)
    }
}

fn validate_state(p: usize, active: &[usize], signs: &[i8]) -> Result<()> {
    if active.is_empty() {
        return Err(invalid("active set is empty"));
    }
    check_len("sign vector", active.len(), signs.len())?;
    if active.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("active set must be strictly increasing"));
    }
    if let Some(&j) = active.iter().find(|&&j| j >= p) {
        return Err(invalid(format!("active index {j} out of range for p = {p}")));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(invalid("signs must be +1 or -1"));
    }
    Ok(())
}

/// Selection event of the LASSO state `(E, z_E)` at penalty `lambda`.
///
/// The first `|E|` rows are the sign block
/// `−diag(z_E)(X_EᵀX_E)⁻¹X_Eᵀ y ≤ −λ diag(z_E)(X_EᵀX_E)⁻¹z_E`.
/// When `|E| < p` they are followed by the `2(p − |E|)` rows that keep the
/// inactive correlations inside `[−λ, λ]`:
/// `±X_{−E}ᵀ(I − P_E) y ≤ λ(1 ∓ X_{−E}ᵀX_E(X_EᵀX_E)⁻¹z_E)`.
pub fn lasso_event(
    x: &DesignMatrix,
    active: &[usize],
    signs: &[i8],
    lambda: f64,
) -> Result<SelectionEvent> {
    validate_state(x.p(), active, signs)?;
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let xe = x.select_columns(active);
    let gram = GramFactor::of_columns(&xe)?;
    let z = DVector::from_iterator(signs.len(), signs.iter().map(|&s| f64::from(s)));

    // (X_EᵀX_E)⁻¹ X_Eᵀ, |E| × n
    let pinv = gram.solve_matrix(&xe.transpose());
    let ginv_z = gram.solve(&z);

    let e = active.len();
    let n = x.n();
    let inactive: Vec<usize> = (0..x.p()).filter(|j| active.binary_search(j).is_err()).collect();
    let k = e + 2 * inactive.len();

    let mut a = DMatrix::zeros(k, n);
    let mut b = DVector::zeros(k);
    for i in 0..e {
        let zi = z[i];
        a.row_mut(i).copy_from(&(pinv.row(i) * -zi));
        b[i] = -lambda * zi * ginv_z[i];
    }
    if !inactive.is_empty() {
        let xo = x.select_columns(&inactive);
        // X_{-E}ᵀ (I - X_E (X_EᵀX_E)⁻¹ X_Eᵀ)
        let cross = xo.tr_mul(&xe);
        let resid_rows = xo.transpose() - &cross * &pinv;
        let w = &cross * &ginv_z;
        let m = inactive.len();
        for r in 0..m {
            a.row_mut(e + r).copy_from(&resid_rows.row(r));
            b[e + r] = lambda * (1.0 - w[r]);
            a.row_mut(e + m + r).copy_from(&(-resid_rows.row(r)));
            b[e + m + r] = lambda * (1.0 + w[r]);
        }
    }
    SelectionEvent::new(
        a,
        b,
        StateLabel::Lasso {
            active: active.to_vec(),
            signs: signs.to_vec(),
        },
    )
}

/// `η = X_E (X_EᵀX_E)⁻¹ e_j`, so that `ηᵀμ` is the coefficient of `x_j` in the
/// best linear approximation of `μ` by the columns in `E`.
pub fn coefficient_contrast(x: &DesignMatrix, active: &[usize], j: usize) -> Result<DVector<f64>> {
    let pos = active
        .iter()
        .position(|&a| a == j)
        .ok_or_else(|| invalid(format!("index {j} is not in the active set")))?;
    if let Some(&bad) = active.iter().find(|&&a| a >= x.p()) {
        return Err(invalid(format!("active index {bad} out of range for p = {}", x.p())));
    }
    let xe = x.select_columns(active);
    let gram = GramFactor::of_columns(&xe)?;
    let mut unit = DVector::zeros(active.len());
    unit[pos] = 1.0;
    Ok(&xe * gram.solve(&unit))
}

/// Canonical exponential families with their null mean `∇Λ(0)` and null
/// variance `Λ''(0)`. The set is closed; only these three are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl GlmFamily {
    pub fn null_mean(self) -> f64 {
        match self {
            GlmFamily::Gaussian => 0.0,
            GlmFamily::Bernoulli => 0.5,
            GlmFamily::Poisson => 1.0,
        }
    }

    pub fn null_variance(self) -> f64 {
        match self {
            GlmFamily::Gaussian => 1.0,
            GlmFamily::Bernoulli => 0.25,
            GlmFamily::Poisson => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Bernoulli => "bernoulli",
            GlmFamily::Poisson => "poisson",
        }
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(GlmFamily::Gaussian),
            "bernoulli" => Ok(GlmFamily::Bernoulli),
            "poisson" => Ok(GlmFamily::Poisson),
            other => Err(invalid(format!("unknown GLM family `{other}`"))),
        }
    }
}

/// The first knot of the penalized GLM path.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstKnot {
    pub event: SelectionEvent,
    /// Entering column `j*`.
    pub index: usize,
    /// Sign `s*` of its null score.
    pub sign: i8,
    /// `λ₁ = ‖Xᵀ(y − ∇Λ(0)·1)‖∞`.
    pub lambda1: f64,
    /// Null scores `Xᵀ(y − ∇Λ(0)·1)`.
    pub scores: DVector<f64>,
}

/// Null scores `Xᵀ(y − ∇Λ(0)·1)`.
pub fn null_scores(x: &DesignMatrix, y: &DVector<f64>, family: GlmFamily) -> Result<DVector<f64>> {
    check_len("response", x.n(), y.len())?;
    let centered = y.add_scalar(-family.null_mean());
    Ok(x.values().tr_mul(&centered))
}

pub fn first_knot_event(x: &DesignMatrix, y: &DVector<f64>, family: GlmFamily) -> Result<FirstKnot> {
    let p = x.p();
    if p < 2 {
        return Err(invalid("the first-knot event needs at least two columns"));
    }
    let scores = null_scores(x, y, family)?;

    let mut best = 0;
    for j in 1..p {
        if scores[j].abs() > scores[best].abs() {
            best = j;
        }
    }
    let top = scores[best].abs();
    let tol = TIE_TOL * top.max(1.0);
    if let Some(other) = (0..p).find(|&j| j != best && (top - scores[j].abs()).abs() <= tol) {
        let (first, second) = (best.min(other), best.max(other));
        return Err(Error::DegenerateSelection { first, second });
    }
    let sign: i8 = if scores[best] >= 0.0 { 1 } else { -1 };
    let s = f64::from(sign);

    let xm = x.values();
    let n = x.n();
    let mu = DVector::from_element(n, family.null_mean());
    let xj = xm.column(best);
    let mut a = DMatrix::zeros(2 * p, n);
    let mut b = DVector::zeros(2 * p);
    for k in 0..p {
        let xk = xm.column(k);
        let plus = (xk - xj * s).transpose();
        let minus = (-xk - xj * s).transpose();
        b[k] = plus.dot(&mu.transpose());
        b[p + k] = minus.dot(&mu.transpose());
        a.row_mut(k).copy_from(&plus);
        a.row_mut(p + k).copy_from(&minus);
    }
    let event = SelectionEvent::new(a, b, StateLabel::Knot { index: best, sign })?;
    Ok(FirstKnot {
        event,
        index: best,
        sign,
        lambda1: s * scores[best],
        scores,
    })
}

/// `Θ = XᵀΣX` with `Σ = diag(sigma_diag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCovariance {
    pub theta: DMatrix<f64>,
}

pub fn score_covariance(x: &DesignMatrix, sigma_diag: &DVector<f64>) -> Result<ScoreCovariance> {
    check_len("variance vector", x.n(), sigma_diag.len())?;
    if let Some(i) = sigma_diag.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(invalid(format!("variance {i} must be positive and finite")));
    }
    let xm = x.values();
    let mut weighted = xm.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= sigma_diag[i];
    }
    let mut theta = xm.tr_mul(&weighted);
    // symmetrize away rounding asymmetry
    let t = theta.transpose();
    theta = (theta + t) * 0.5;
    Ok(ScoreCovariance { theta })
}

/// Truncation limits of the exact Gaussian covariance test.
#[derive(Debug, Clone, PartialEq)]
pub struct CovTestBounds {
    pub lower: f64,
    pub upper: f64,
    /// `Θ_{j*j*}`, the null variance of the winning score.
    pub theta_jj: f64,
    /// Number of `(s, k)` terms dropped because their denominator vanished.
    pub skipped_zero_denominators: usize,
}

/// Denominators `1 − s s* Θ_{j*k}/Θ_{j*j*}` with magnitude at or below this
/// are treated as zero and skipped.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Truncation interval `(L, U)` for `λ₁` given the knot `(j*, s*)`, in the
/// centered scale `y − μ` with `μ = ∇Λ(0)·1`.
///
/// `L` is the supremum and `U` the infimum of
/// `s (x_k − Θ_{j*k}/Θ_{j*j*} x_{j*})ᵀ(y − μ) / (1 − s s* Θ_{j*k}/Θ_{j*j*})`
/// over `k ≠ j*`, `s = ±1`, split by the sign of the denominator.
pub fn covariance_test_bounds(
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma_diag: &DVector<f64>,
    knot: &StateLabel,
    family: GlmFamily,
) -> Result<CovTestBounds> {
    let (jstar, sstar) = match *knot {
        StateLabel::Knot { index, sign } => (index, f64::from(sign)),
        _ => return Err(invalid("covariance test bounds need a first-knot state")),
    };
    if jstar >= x.p() {
        return Err(invalid(format!("knot index {jstar} out of range")));
    }
    check_len("response", x.n(), y.len())?;
    check_len("variance vector", x.n(), sigma_diag.len())?;
    if let Some(i) = sigma_diag.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(invalid(format!("variance {i} must be positive and finite")));
    }
    let xm = x.values();
    let xj = xm.column(jstar);
    let sigma_xj = xj.component_mul(sigma_diag);
    let theta_row = xm.tr_mul(&sigma_xj);
    let theta_jj = theta_row[jstar];
    if !(theta_jj > 0.0) {
        return Err(invalid(format!("Θ_j*j* = {theta_jj} is not positive")));
    }
    let centered = y.add_scalar(-family.null_mean());
    let scores = xm.tr_mul(&centered);

    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut skipped = 0;
    for k in (0..x.p()).filter(|&k| k != jstar) {
        let ratio = theta_row[k] / theta_jj;
        let resid_score = scores[k] - ratio * scores[jstar];
        for s in [-1.0, 1.0] {
            let denom = 1.0 - s * sstar * ratio;
            if denom.abs() <= DENOMINATOR_TOL {
                skipped += 1;
                continue;
            }
            let value = s * resid_score / denom;
            if denom > 0.0 {
                lower = lower.max(value);
            } else {
                upper = upper.min(value);
            }
        }
    }
    Ok(CovTestBounds {
        lower,
        upper,
        theta_jj,
        skipped_zero_denominators: skipped,
    })
}
