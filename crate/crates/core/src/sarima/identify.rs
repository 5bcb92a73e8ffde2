//! Sample autocorrelations, partial autocorrelations and the Ljung-Box test.

use super::{Result, SarimaError};
use crate::special::chi_squared_quantile;

/// Autocovariances r_0..=r_max_lag with divisor N, mean-centered.
fn autocovariances(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    (0..=max_lag)
        .map(|tau| {
            c[..n - tau]
                .iter()
                .zip(&c[tau..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Sample autocorrelations rho_0..=rho_max_lag.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 || n <= max_lag {
        return Err(SarimaError::Size {
            needed: (max_lag + 1).max(2),
            got: n,
        });
    }
    let r = autocovariances(series, max_lag);
    if r[0] <= 0.0 {
        return Err(SarimaError::DegenerateSeries);
    }
    Ok(r.iter().map(|v| v / r[0]).collect())
}

/// Partial autocorrelations pi_1..=pi_max_lag (index 0 holds lag 1).
///
/// Each value is the last coefficient of the order-tau Yule-Walker
/// solution, obtained exactly by the Levinson-Durbin recursion. The
/// divisor-N estimates give a positive definite system for any
/// non-constant series, so `Singular` only reports loss of precision.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let rho = acf(series, max_lag)?;
    let mut out = Vec::with_capacity(max_lag);
    let mut coeffs: Vec<f64> = Vec::with_capacity(max_lag);
    let mut err = 1.0;
    for tau in 1..=max_lag {
        let num = rho[tau]
            - (0..tau - 1)
                .map(|j| coeffs[j] * rho[tau - 1 - j])
                .sum::<f64>();
        if err <= 1e-14 {
            return Err(SarimaError::Singular { lag: tau });
        }
        let k = num / err;
        let prev = coeffs.clone();
        for j in 0..tau - 1 {
            coeffs[j] = prev[j] - k * prev[tau - 2 - j];
        }
        coeffs.push(k);
        err *= 1.0 - k * k;
        out.push(k);
    }
    Ok(out)
}

/// Default number of Ljung-Box lags, floor(2 sqrt(N)).
pub fn default_lags(n: usize) -> usize {
    (2.0 * (n as f64).sqrt()).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjungBox {
    pub q: f64,
    pub critical: f64,
    pub dof: usize,
    pub reject: bool,
}

/// Ljung-Box portmanteau test at the 5% level with `h - fitted_params` degrees of freedom.
pub fn ljung_box(residuals: &[f64], h: usize, fitted_params: usize) -> Result<LjungBox> {
    let n = residuals.len();
    if h <= fitted_params {
        return Err(SarimaError::DegreesOfFreedom {
            h,
            fitted: fitted_params,
        });
    }
    if n <= h {
        return Err(SarimaError::Size {
            needed: h + 1,
            got: n,
        });
    }
    let dof = h - fitted_params;
    let critical = chi_squared_quantile(0.95, dof as f64);
    let q = match acf(residuals, h) {
        Ok(rho) => {
            let nf = n as f64;
            nf * (nf + 2.0)
                * (1..=h)
                    .map(|k| rho[k] * rho[k] / (nf - k as f64))
                    .sum::<f64>()
        }
        // constant residuals carry no autocorrelation
        Err(SarimaError::DegenerateSeries) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(LjungBox {
        q,
        critical,
        dof,
        reject: q > critical,
    })
}
