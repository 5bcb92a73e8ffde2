//! Seasonal autoregressive prediction-error detector.
//!
//! Only the pure seasonal AR family SARIMA(p,0,0)x(P,0,0)_s is supported.
//! A series is seasonally centered by subtracting per-phase means, the
//! coefficients are fitted by gradient descent on the squared one-step
//! errors, and test seconds whose absolute error exceeds a Gaussian
//! quantile of the innovation variance are flagged.

mod detect;
mod fit;
mod identify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{detect, gaussian_quantile, SarimaDetection, SarimaRow};
pub use fit::{
    apply_centering, fit_least_squares, loss_and_gradient, predict_one_step, residuals,
    rotate_means, seasonal_center, GdConfig,
};
pub use identify::{acf, default_lags, ljung_box, pacf, LjungBox};

#[derive(Debug, Error, PartialEq)]
pub enum SarimaError {
    #[error("series too short: need at least {needed} values, got {got}")]
    Size { needed: usize, got: usize },
    #[error("series has zero variance")]
    DegenerateSeries,
    #[error("singular Toeplitz system at lag {lag}")]
    Singular { lag: usize },
    #[error("unsupported orders: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("gradient descent diverged at iteration {iter} (learning rate fell to {lr:e}); try a smaller learning rate")]
    Divergence { iter: usize, lr: f64 },
    #[error("non-finite loss at iteration {iter}; try a smaller learning rate")]
    NonFinite { iter: usize },
    #[error("Ljung-Box needs more lags ({h}) than fitted parameters ({fitted})")]
    DegreesOfFreedom { h: usize, fitted: usize },
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, SarimaError>;

/// Orders of SARIMA(p,d,q)x(P,D,Q)_s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarimaOrders {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub big_p: usize,
    #[serde(rename = "D")]
    pub big_d: usize,
    #[serde(rename = "Q")]
    pub big_q: usize,
    pub s: usize,
}

impl SarimaOrders {
    pub fn seasonal_ar(p: usize, big_p: usize, s: usize) -> Self {
        SarimaOrders {
            p,
            d: 0,
            q: 0,
            big_p,
            big_d: 0,
            big_q: 0,
            s,
        }
    }

    /// Rejects anything outside the seasonal AR family.
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(SarimaError::Unsupported(
                "season length must be >= 1".into(),
            ));
        }
        if self.d != 0 || self.big_d != 0 {
            return Err(SarimaError::Unsupported(
                "differencing (d, D > 0) is not implemented".into(),
            ));
        }
        if self.q != 0 || self.big_q != 0 {
            return Err(SarimaError::Unsupported(
                "moving-average terms (q, Q > 0) are not implemented".into(),
            ));
        }
        Ok(())
    }

    /// Number of past values one prediction needs.
    pub fn lookback(&self) -> usize {
        self.big_p * self.s + self.p
    }

    pub fn n_params(&self) -> usize {
        self.p + self.big_p
    }
}

impl Default for SarimaOrders {
    fn default() -> Self {
        SarimaOrders::seasonal_ar(4, 1, 10)
    }
}

impl std::str::FromStr for SarimaOrders {
    type Err = SarimaError;

    /// Parses `p,d,q,P,D,Q,s`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SarimaError::Config(format!("orders '{s}': {e}")))?;
        let [p, d, q, big_p, big_d, big_q, season] = parts[..] else {
            return Err(SarimaError::Config(format!(
                "orders '{s}' must have 7 comma-separated values p,d,q,P,D,Q,s"
            )));
        };
        Ok(SarimaOrders {
            p,
            d,
            q,
            big_p,
            big_d,
            big_q,
            s: season,
        })
    }
}

impl std::fmt::Display for SarimaOrders {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{}",
            self.p, self.d, self.q, self.big_p, self.big_d, self.big_q, self.s
        )
    }
}

/// Why gradient descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The gradient norm reached the tolerance.
    Converged,
    /// Further steps could not lower the loss beyond rounding error.
    Stalled,
    MaxIters,
    /// No descent was run.
    NotFitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub iters: usize,
    pub final_loss: f64,
    pub grad_norm: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    pub orders: SarimaOrders,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma2: f64,
    /// Per-phase means; entry `j` applies to index `j` (mod s) of the series being centered.
    pub seasonal_means: Vec<f64>,
    pub fit: FitSummary,
}

impl SarimaModel {
    /// A model with the given coefficients and no fit history.
    pub fn from_coefficients(
        orders: SarimaOrders,
        alpha: Vec<f64>,
        phi: Vec<f64>,
        sigma2: f64,
        seasonal_means: Vec<f64>,
    ) -> Result<Self> {
        orders.validate()?;
        if alpha.len() != orders.p || phi.len() != orders.big_p {
            return Err(SarimaError::Config(format!(
                "coefficient lengths ({}, {}) do not match orders ({}, {})",
                alpha.len(),
                phi.len(),
                orders.p,
                orders.big_p
            )));
        }
        if seasonal_means.len() != orders.s {
            return Err(SarimaError::Config(format!(
                "expected {} seasonal means, got {}",
                orders.s,
                seasonal_means.len()
            )));
        }
        if !(sigma2 >= 0.0) {
            return Err(SarimaError::Config("sigma2 must be >= 0".into()));
        }
        Ok(SarimaModel {
            orders,
            alpha,
            phi,
            sigma2,
            seasonal_means,
            fit: FitSummary {
                iters: 0,
                final_loss: 0.0,
                grad_norm: 0.0,
                stop: StopReason::NotFitted,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::from_coefficients(
            self.orders,
            self.alpha.clone(),
            self.phi.clone(),
            self.sigma2,
            self.seasonal_means.clone(),
        )
        .map(|_| ())
    }
}
