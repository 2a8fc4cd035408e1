//! Truncation intervals, the truncated-Gaussian CDF, selective p-values and
//! confidence intervals.
//!
//! For an event `{A y ≤ b}` and a contrast `η`, write
//! `α = AΣη / ηᵀΣη`. Holding the part of `y` orthogonal to `Ση` fixed, the
//! event is the interval `L ≤ ηᵀy ≤ U` with
//!
//! ```text
//! L = max_{α_j < 0} (b_j − (Ay)_j + α_j ηᵀy) / α_j
//! U = min_{α_j > 0} (b_j − (Ay)_j + α_j ηᵀy) / α_j
//! ```
//!
//! Under Gaussian errors `ηᵀy` is then a normal variable truncated to
//! `[L, U]`, and its CDF evaluated at the observation is uniform.
//!
//! The CDF is computed in three regimes. When the standardized interval
//! straddles zero the `erf` difference is used directly. When it lies
//! entirely on one side both masses are rescaled by `exp(a²/2)` using the
//! scaled complementary error function, which keeps intervals tens of
//! standard deviations into the tail representable. If even that cannot
//! resolve the interval, the limiting exponential law is used.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::events::SelectionEvent;
use crate::normal::{central_mass, erfcx, scaled_sf};

/// Rows with `|α_j| ≤ ALPHA_ZERO_TOL·‖α‖∞` belong to neither bound.
pub const ALPHA_ZERO_TOL: f64 = 1e-12;

/// Slack on `L ≤ ηᵀy ≤ U` accepted by [`PivotInputs::new`].
pub const SANDWICH_TOL: f64 = 1e-9;

/// Interval `[lower, upper]` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationInterval {
    #[serde(with = "extended")]
    pub lower: f64,
    #[serde(with = "extended")]
    pub upper: f64,
}

impl TruncationInterval {
    pub const UNBOUNDED: Self = Self {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// True when `lower − tol ≤ v ≤ upper + tol`.
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lower - tol <= v && v <= self.upper + tol
    }
}

/// Geometry of the event along the contrast direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGeometry {
    /// `α = AΣη / ηᵀΣη`, one entry per constraint.
    pub alpha: DVector<f64>,
    /// `ηᵀΣη`.
    pub eta_variance: f64,
    /// `ηᵀy`.
    pub observed: f64,
    /// Constraints with `α_j` treated as zero.
    pub zero_rows: Vec<usize>,
}

/// Computes `(L, U)` and the constraint geometry for `ηᵀy`.
pub fn truncation_interval(
    event: &SelectionEvent,
    sigma_diag: &DVector<f64>,
    eta: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(TruncationInterval, ConstraintGeometry)> {
    let n = event.dim();
    check_len("variance vector", n, sigma_diag.len())?;
    check_len("contrast", n, eta.len())?;
    check_len("response", n, y.len())?;

    let sigma_eta = sigma_diag.component_mul(eta);
    let eta_variance = eta.dot(&sigma_eta);
    if !(eta_variance > 0.0 && eta_variance.is_finite()) {
        return Err(invalid(format!("ηᵀΣη = {eta_variance} must be positive")));
    }
    let alpha = (event.a() * &sigma_eta) / eta_variance;
    let observed = eta.dot(y);
    let slack = event.b() - event.a() * y;

    let cutoff = ALPHA_ZERO_TOL * alpha.amax();
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut zero_rows = Vec::new();
    for (j, &aj) in alpha.iter().enumerate() {
        if aj.abs() <= cutoff {
            zero_rows.push(j);
            continue;
        }
        let bound = slack[j] / aj + observed;
        if aj < 0.0 {
            lower = lower.max(bound);
        } else {
            upper = upper.min(bound);
        }
    }
    Ok((
        TruncationInterval { lower, upper },
        ConstraintGeometry {
            alpha,
            eta_variance,
            observed,
            zero_rows,
        },
    ))
}

/// CDF and survival of a normal law truncated to `[a, b]`, both computed
/// without subtracting from one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMass {
    pub cdf: f64,
    pub sf: f64,
}

/// `F(x; σ², m, a, b)`, the CDF of `N(m, σ²)` truncated to `[a, b]`.
///
/// Values of `x` outside `[a, b]` clamp to 0 or 1. Endpoints may be infinite.
pub fn truncated_gaussian_cdf(x: f64, variance: f64, mean: f64, a: f64, b: f64) -> Result<f64> {
    truncated_gaussian_mass(x, variance, mean, a, b).map(|m| m.cdf)
}

/// Like [`truncated_gaussian_cdf`] but also returns the survival `1 − F`
/// evaluated independently.
pub fn truncated_gaussian_mass(
    x: f64,
    variance: f64,
    mean: f64,
    a: f64,
    b: f64,
) -> Result<TruncatedMass> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(invalid(format!("variance {variance} must be positive and finite")));
    }
    if !mean.is_finite() {
        return Err(invalid(format!("mean {mean} must be finite")));
    }
    if x.is_nan() || !(a < b) {
        return Err(invalid(format!("need a < b and a numeric x, got a = {a}, b = {b}, x = {x}")));
    }
    if x <= a {
        return Ok(TruncatedMass { cdf: 0.0, sf: 1.0 });
    }
    if x >= b {
        return Ok(TruncatedMass { cdf: 1.0, sf: 0.0 });
    }
    let sd = variance.sqrt();
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    let zx = (x - mean) / sd;

    let mass = if za >= 0.0 {
        right_tail(zx, za, zb)
    } else if zb <= 0.0 {
        // reflect into the right tail
        let r = right_tail(-zx, -zb, -za);
        TruncatedMass {
            cdf: r.sf,
            sf: r.cdf,
        }
    } else {
        let total = central_mass(za, zb);
        TruncatedMass {
            cdf: (central_mass(za, zx) / total).clamp(0.0, 1.0),
            sf: (central_mass(zx, zb) / total).clamp(0.0, 1.0),
        }
    };
    Ok(mass)
}

/// Standardized truncation `0 ≤ a < x < b ≤ ∞`, with every mass divided by
/// `exp(−a²/2)`.
fn right_tail(x: f64, a: f64, b: f64) -> TruncatedMass {
    let ea = scaled_sf(a);
    let ex = scaled_sf(x) * (-0.5 * (x - a) * (x + a)).exp();
    let eb = if b.is_infinite() {
        0.0
    } else {
        scaled_sf(b) * (-0.5 * (b - a) * (b + a)).exp()
    };
    let total = ea - eb;
    if total > 0.0 && total.is_finite() && (ea - ex) >= 0.0 && (ex - eb) >= 0.0 {
        let cdf = ((ea - ex) / total).clamp(0.0, 1.0);
        let sf = ((ex - eb) / total).clamp(0.0, 1.0);
        if cdf + sf > 0.5 {
            return TruncatedMass { cdf, sf };
        }
    }
    exponential_limit(x, a, b)
}

/// Limit of the right-tail truncated law when `a` is so large that the
/// density on `[a, b]` is `∝ exp(−a(t − a))`.
fn exponential_limit(x: f64, a: f64, b: f64) -> TruncatedMass {
    let rate = a.max(f64::MIN_POSITIVE);
    let dx = rate * (x - a);
    let db = rate * (b - a);
    if db.is_infinite() {
        let sf = (-dx).exp();
        return TruncatedMass {
            cdf: -(-dx).exp_m1(),
            sf,
        };
    }
    let denom = -(-db).exp_m1();
    if denom > 0.0 {
        TruncatedMass {
            cdf: (-(-dx).exp_m1() / denom).clamp(0.0, 1.0),
            sf: (((-dx).exp() - (-db).exp()) / denom).clamp(0.0, 1.0),
        }
    } else {
        let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
        TruncatedMass { cdf: t, sf: 1.0 - t }
    }
}

/// Arguments of the pivot `F(ηᵀy; ηᵀΣη, ηᵀμ, L, U)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotInputs {
    pub observed: f64,
    pub variance: f64,
    pub mean: f64,
    pub interval: TruncationInterval,
}

impl PivotInputs {
    /// Checks `L ≤ observed ≤ U` within [`SANDWICH_TOL`] and a positive variance.
    pub fn new(observed: f64, variance: f64, mean: f64, interval: TruncationInterval) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid(format!("variance {variance} must be positive")));
        }
        if !interval.contains(observed, SANDWICH_TOL) {
            return Err(invalid(format!(
                "observed value {observed} lies outside [{}, {}]",
                interval.lower, interval.upper
            )));
        }
        Ok(Self {
            observed,
            variance,
            mean,
            interval,
        })
    }

    pub fn mass(&self) -> Result<TruncatedMass> {
        truncated_gaussian_mass(
            self.observed,
            self.variance,
            self.mean,
            self.interval.lower,
            self.interval.upper,
        )
    }
}

/// `P = 2·min(F, 1 − F)`.
pub fn two_sided_pivot(inputs: &PivotInputs) -> Result<f64> {
    let m = inputs.mass()?;
    Ok((2.0 * m.cdf.min(m.sf)).min(1.0))
}

/// Upper-tail pivot `1 − F`, the p-value of a one-sided test against larger means.
pub fn upper_tail_pivot(inputs: &PivotInputs) -> Result<f64> {
    Ok(inputs.mass()?.sf)
}

fn require_inside(event: &SelectionEvent, y: &DVector<f64>) -> Result<()> {
    let violation = event.max_violation(y)?;
    if violation > crate::events::MEMBERSHIP_SLACK {
        return Err(Error::OutsideEvent { violation });
    }
    Ok(())
}

fn pivot_inputs(
    event: &SelectionEvent,
    sigma_diag: &DVector<f64>,
    eta: &DVector<f64>,
    y: &DVector<f64>,
    mean: f64,
) -> Result<PivotInputs> {
    require_inside(event, y)?;
    let (interval, geom) = truncation_interval(event, sigma_diag, eta, y)?;
    PivotInputs::new(geom.observed, geom.eta_variance, mean, interval)
}

/// Two-sided selective p-value for `H₀: ηᵀμ = null_mean`.
pub fn selective_pvalue(
    event: &SelectionEvent,
    sigma_diag: &DVector<f64>,
    eta: &DVector<f64>,
    y: &DVector<f64>,
    null_mean: f64,
) -> Result<f64> {
    two_sided_pivot(&pivot_inputs(event, sigma_diag, eta, y, null_mean)?)
}

/// Initial half-width of the bisection bracket, in standard deviations.
const BRACKET_HALF_WIDTH: f64 = 10.0;
/// Maximum number of bracket doublings.
const MAX_DOUBLINGS: u32 = 64;
/// Bisection stops once the bracket is narrower than this many standard deviations.
const BISECTION_TOL: f64 = 1e-9;

/// Equal-tailed `1 − alpha` selective confidence interval for `ηᵀμ`.
///
/// `F(ηᵀy; ηᵀΣη, m, L, U)` decreases strictly in `m`; the limits solve
/// `F = 1 − α/2` (low) and `F = α/2` (high) by bisection.
pub fn invert_pivot_interval(
    event: &SelectionEvent,
    sigma_diag: &DVector<f64>,
    eta: &DVector<f64>,
    y: &DVector<f64>,
    alpha: f64,
) -> Result<(f64, f64)> {
    let inputs = pivot_inputs(event, sigma_diag, eta, y, 0.0)?;
    confidence_interval(&inputs, alpha)
}

/// Confidence interval from precomputed pivot inputs; `inputs.mean` is ignored.
pub fn confidence_interval(inputs: &PivotInputs, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let low = solve_mean(inputs, 1.0 - alpha / 2.0, "lower")?;
    let high = solve_mean(inputs, alpha / 2.0, "upper")?;
    Ok((low, high))
}

/// Finds `m` with `F(observed; variance, m, L, U) = target`.
fn solve_mean(inputs: &PivotInputs, target: f64, side: &'static str) -> Result<f64> {
    let sd = inputs.variance.sqrt();
    let x = inputs.observed;
    let (a, b) = (inputs.interval.lower, inputs.interval.upper);
    // g is decreasing in m
    let g = |m: f64| -> Result<f64> {
        Ok(truncated_gaussian_cdf(x, inputs.variance, m, a, b)? - target)
    };

    let mut half = BRACKET_HALF_WIDTH * sd;
    let mut lo = x - half;
    let mut hi = x + half;
    let mut doublings = 0;
    loop {
        let glo = g(lo)?;
        let ghi = g(hi)?;
        if glo >= 0.0 && ghi <= 0.0 {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            let (at, value) = if glo < 0.0 { (lo, glo) } else { (hi, ghi) };
            return Err(Error::Bracketing {
                side,
                at,
                value: value + target,
                doublings,
            });
        }
        half *= 2.0;
        if glo < 0.0 {
            lo = x - half;
        }
        if ghi > 0.0 {
            hi = x + half;
        }
        doublings += 1;
    }

    for _ in 0..2000 {
        if hi - lo <= BISECTION_TOL * sd {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold `δ` for the width and distance conditions on truncation intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCheckConfig {
    delta: f64,
}

impl DeltaCheckConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Distance of an interval from the origin, `min(|L|, |U|)`, using only the
/// finite endpoint when one is infinite and 0 when both are.
pub fn interval_distance(iv: &TruncationInterval) -> f64 {
    match (iv.lower.is_finite(), iv.upper.is_finite()) {
        (true, true) => iv.lower.abs().min(iv.upper.abs()),
        (true, false) => iv.lower.abs(),
        (false, true) => iv.upper.abs(),
        (false, false) => 0.0,
    }
}

/// Fractions of intervals with `U − L < δ` and with distance `> 1/δ`.
pub fn delta_assumption_check(
    intervals: &[TruncationInterval],
    config: &DeltaCheckConfig,
) -> Result<(f64, f64)> {
    if intervals.is_empty() {
        return Err(invalid("no truncation intervals to check"));
    }
    let d = config.delta;
    let total = intervals.len() as f64;
    let narrow = intervals.iter().filter(|iv| iv.width() < d).count() as f64;
    let far = intervals
        .iter()
        .filter(|iv| interval_distance(iv) > 1.0 / d)
        .count() as f64;
    Ok((narrow / total, far / total))
}

/// Serde helpers writing infinite endpoints as the strings `"inf"`/`"-inf"`.
pub(crate) mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// `log(1 − Φ(t))` for any real `t`, finite far into the upper tail.
pub fn log_normal_sf(t: f64) -> f64 {
    if t > 0.0 {
        (0.5 * erfcx(t * FRAC_1_SQRT_2)).ln() - 0.5 * t * t
    } else {
        crate::normal::sf(t).ln()
    }
}
