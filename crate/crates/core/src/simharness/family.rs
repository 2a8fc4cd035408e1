use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest Student-t degrees of freedom accepted.
pub const MIN_STUDENT_DF: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFamilyName {
    Gaussian,
    Laplace,
    CenteredExponential,
    Rademacher,
    StudentT,
}

/// A centered error law scaled to a declared variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorFamily {
    pub name: ErrorFamilyName,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

impl ErrorFamily {
    pub fn new(name: ErrorFamilyName, variance: f64, df: Option<f64>) -> Result<Self> {
        let fam = Self { name, variance, df };
        fam.validate()?;
        Ok(fam)
    }

    pub fn gaussian(variance: f64) -> Self {
        Self {
            name: ErrorFamilyName::Gaussian,
            variance,
            df: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(invalid(format!(
                "family.variance must be positive, got {}",
                self.variance
            )));
        }
        match (self.name, self.df) {
            (ErrorFamilyName::StudentT, Some(df)) if df >= MIN_STUDENT_DF && df.is_finite() => Ok(()),
            (ErrorFamilyName::StudentT, Some(df)) => Err(invalid(format!(
                "family.df must be at least {MIN_STUDENT_DF} for student_t, got {df}"
            ))),
            (ErrorFamilyName::StudentT, None) => Err(invalid("family.df is required for student_t")),
            (_, Some(_)) => Err(invalid("family.df is only valid for student_t")),
            (_, None) => Ok(()),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `E|ε|³` of the scaled law.
    pub fn third_abs_moment(&self) -> f64 {
        let s3 = self.variance * self.sigma();
        match self.name {
            ErrorFamilyName::Gaussian => 2.0 * (2.0 / PI).sqrt() * s3,
            // scale b = σ/√2, E|X|³ = 6b³
            ErrorFamilyName::Laplace => 3.0 / 2f64.sqrt() * s3,
            ErrorFamilyName::CenteredExponential => (12.0 / E - 2.0) * s3,
            ErrorFamilyName::Rademacher => s3,
            ErrorFamilyName::StudentT => {
                let df = self.df.unwrap_or(f64::NAN);
                let scale = ((df - 2.0) / df).sqrt();
                let log_t3 = 1.5 * df.ln() + libm::lgamma((df - 3.0) / 2.0)
                    - 0.5 * PI.ln()
                    - libm::lgamma(df / 2.0);
                s3 * scale.powi(3) * log_t3.exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sigma = self.sigma();
        match self.name {
            ErrorFamilyName::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            ErrorFamilyName::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let b = sigma / 2f64.sqrt();
                if rng.random::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
            ErrorFamilyName::CenteredExponential => {
                let e: f64 = Exp1.sample(rng);
                sigma * (e - 1.0)
            }
            ErrorFamilyName::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            ErrorFamilyName::StudentT => {
                let df = self.df.unwrap_or(f64::NAN);
                let t: f64 = StudentT::new(df)
                    .expect("validated degrees of freedom")
                    .sample(rng);
                sigma * ((df - 2.0) / df).sqrt() * t
            }
        }
    }
}

/// `n` iid draws from `family`.
pub fn draw_errors<R: Rng + ?Sized>(family: &ErrorFamily, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    family.validate()?;
    Ok((0..n).map(|_| family.sample(rng)).collect())
}
