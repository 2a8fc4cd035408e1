use serde::{Deserialize, Serialize};

use super::family::ErrorFamily;
use crate::error::{invalid, Result};

/// Default `κ` in `δ = (log p)^{−(1+κ)/2}`.
pub const DEFAULT_KAPPA: f64 = 0.1;
/// Default level of the selective intervals.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Default cap on attempted replications, as a multiple of `replications`.
pub const DEFAULT_CAP_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSpec {
    /// iid standard-normal entries, then unit-norm columns.
    RowIidNormalColumnNormalized,
    /// First `p` columns of a random orthogonal basis of `Rⁿ`.
    Orthonormal,
    /// A user-supplied CSV, loaded by the caller.
    UserCsv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed(f64),
    /// `λ = 4σ√(log p)`.
    FourSigmaSqrtLogP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LassoPivot,
    CovtestPivot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    TrueMean,
    ZeroNull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub design: DesignSpec,
    pub beta0: Vec<f64>,
    /// Number of nonzero entries of `beta0`.
    pub sparsity: usize,
    pub lambda_rule: LambdaRule,
    pub family: ErrorFamily,
    /// Usable pivots requested.
    pub replications: usize,
    pub seed: u64,
    pub experiment: Experiment,
    pub target: Target,
    /// Cap on attempted replications; defaults to ten times `replications`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_replications: Option<usize>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl SimulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                invalid(format!("config: {}", e.inner()))
            } else {
                invalid(format!("{path}: {}", e.inner()))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field; messages start with the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n: must be at least 1"));
        }
        if self.p == 0 {
            return Err(invalid("p: must be at least 1"));
        }
        if self.design == DesignSpec::Orthonormal && self.p > self.n {
            return Err(invalid(format!(
                "design: orthonormal needs p <= n, got p = {} and n = {}",
                self.p, self.n
            )));
        }
        if self.beta0.len() != self.p {
            return Err(invalid(format!(
                "beta0: expected {} entries, found {}",
                self.p,
                self.beta0.len()
            )));
        }
        if let Some(j) = self.beta0.iter().position(|b| !b.is_finite()) {
            return Err(invalid(format!("beta0: entry {j} is not finite")));
        }
        let nonzeros = self.beta0.iter().filter(|&&b| b != 0.0).count();
        if nonzeros != self.sparsity {
            return Err(invalid(format!(
                "sparsity: beta0 has {nonzeros} nonzeros but sparsity is {}",
                self.sparsity
            )));
        }
        if let LambdaRule::Fixed(v) = self.lambda_rule {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("lambda_rule: fixed value must be positive, got {v}")));
            }
        }
        self.family.validate()?;
        if self.replications == 0 {
            return Err(invalid("replications: must be at least 1"));
        }
        if let Some(cap) = self.max_replications {
            if cap < self.replications {
                return Err(invalid(format!(
                    "max_replications: {cap} is below replications = {}",
                    self.replications
                )));
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid(format!("kappa: must be positive, got {}", self.kappa)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha: must lie in (0, 1), got {}", self.alpha)));
        }
        if self.experiment == Experiment::CovtestPivot && self.p < 2 {
            return Err(invalid("experiment: covtest_pivot needs p >= 2"));
        }
        Ok(())
    }

    pub fn replication_cap(&self) -> usize {
        self.max_replications
            .unwrap_or(self.replications.saturating_mul(DEFAULT_CAP_FACTOR))
    }

    pub fn lambda(&self) -> f64 {
        match self.lambda_rule {
            LambdaRule::Fixed(v) => v,
            LambdaRule::FourSigmaSqrtLogP => 4.0 * self.family.sigma() * (self.p as f64).ln().sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{
            "n": 10, "p": 3,
            "design": "row_iid_normal_column_normalized",
            "beta0": [1.0, 0.0, 0.0],
            "sparsity": 1,
            "lambda_rule": {"fixed": 1.5},
            "family": {"name": "gaussian", "variance": 1.0},
            "replications": 20,
            "seed": 7,
            "experiment": "lasso_pivot",
            "target": "true_mean"
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_defaults() {
        let cfg = SimulationConfig::from_json(&base()).unwrap();
        assert_eq!(cfg.kappa, DEFAULT_KAPPA);
        assert_eq!(cfg.replication_cap(), 200);
        assert_eq!(cfg.lambda(), 1.5);
        let back = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimulationConfig::from_json(&back).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("\"replications\": 20", "\"replications\": 0", "replications"),
            ("\"sparsity\": 1", "\"sparsity\": 2", "sparsity"),
            ("[1.0, 0.0, 0.0]", "[1.0, 0.0]", "beta0"),
            ("\"lasso_pivot\"", "\"ridge_pivot\"", "experiment"),
            ("\"seed\": 7", "\"seed\": 7, \"colour\": 1", "colour"),
        ];
        for (from, to, key) in cases {
            let text = base().replacen(from, to, 1);
            let err = SimulationConfig::from_json(&text).unwrap_err().to_string();
            assert!(err.contains(key), "{err} should mention {key}");
        }
    }

    #[test]
    fn orthonormal_needs_tall_design() {
        let text = base()
            .replace("\"row_iid_normal_column_normalized\"", "\"orthonormal\"")
            .replace("\"n\": 10", "\"n\": 2");
        let err = SimulationConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("design"), "{err}");
    }

    #[test]
    fn four_sigma_rule() {
        let text = base().replace("{\"fixed\": 1.5}", "\"four_sigma_sqrt_log_p\"");
        let cfg = SimulationConfig::from_json(&text).unwrap();
        assert!((cfg.lambda() - 4.0 * 3f64.ln().sqrt()).abs() < 1e-15);
    }
}
