use std::f64::consts::{FRAC_PI_4, SQRT_2};

use serde::{Deserialize, Serialize};

/// A scalar spectral response on `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterKernel {
    /// `Σ c_k λ^k`, coefficients in ascending degree.
    Polynomial { coefficients: Vec<f64> },
    /// `√2 cos(πλ/4)`
    Cosine,
    /// `√2 sin(πλ/4)`
    Sine,
    /// `1` for `λ < cutoff`, else `0`.
    IdealLowPass { cutoff: f64 },
}

impl FilterKernel {
    pub fn polynomial(coefficients: impl Into<Vec<f64>>) -> Self {
        FilterKernel::Polynomial {
            coefficients: coefficients.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            FilterKernel::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
            }
            FilterKernel::Cosine => SQRT_2 * (FRAC_PI_4 * lambda).cos(),
            FilterKernel::Sine => SQRT_2 * (FRAC_PI_4 * lambda).sin(),
            FilterKernel::IdealLowPass { cutoff } => {
                if lambda < *cutoff {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            FilterKernel::Polynomial { coefficients } => Some(coefficients),
            _ => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.coefficients().is_some()
    }

    pub fn name(&self) -> String {
        match self {
            FilterKernel::Polynomial { coefficients } => format!("polynomial{coefficients:?}"),
            FilterKernel::Cosine => "cosine".into(),
            FilterKernel::Sine => "sine".into(),
            FilterKernel::IdealLowPass { cutoff } => format!("ideal-low-pass({cutoff})"),
        }
    }
}
