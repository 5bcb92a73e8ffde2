//! Threshold detection on one-step prediction errors.

use super::fit::{apply_centering, predict_at};
use super::{Result, SarimaError, SarimaModel};
use crate::special::normal_quantile;

/// `sqrt(sigma2) * Phi^-1(prob)`.
pub fn gaussian_quantile(prob: f64, sigma2: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(SarimaError::Domain(format!(
            "quantile probability {prob} is outside (0, 1)"
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(SarimaError::Domain(format!(
            "variance {sigma2} is negative"
        )));
    }
    Ok(sigma2.sqrt() * normal_quantile(prob))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarimaRow {
    pub second: usize,
    /// Observed value in feature units.
    pub value: f64,
    /// One-step prediction in feature units; `None` where not evaluable.
    pub prediction: Option<f64>,
    pub abs_error: Option<f64>,
    pub flagged: bool,
}

impl SarimaRow {
    pub fn evaluable(&self) -> bool {
        self.prediction.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarimaDetection {
    pub threshold: f64,
    pub rows: Vec<SarimaRow>,
}

impl SarimaDetection {
    pub fn flagged(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.second)
            .collect()
    }

    pub fn evaluable_mask(&self) -> Vec<bool> {
        self.rows.iter().map(SarimaRow::evaluable).collect()
    }
}

/// Walks `series` forward and flags seconds with
/// `|e_t| > multiplier * gaussian_quantile(quantile_prob, sigma2)`.
///
/// A flagged value is replaced by its prediction in the working history.
/// The first `P*s + p` seconds are not evaluable.
pub fn detect(
    series: &[f64],
    model: &SarimaModel,
    multiplier: f64,
    quantile_prob: f64,
) -> Result<SarimaDetection> {
    model.validate()?;
    let lookback = model.orders.lookback();
    if series.len() <= lookback {
        return Err(SarimaError::Size {
            needed: lookback + 1,
            got: series.len(),
        });
    }
    if !(multiplier >= 0.0) {
        return Err(SarimaError::Domain(format!(
            "multiplier {multiplier} is negative"
        )));
    }
    let s = model.orders.s;
    let threshold = multiplier * gaussian_quantile(quantile_prob, model.sigma2)?;
    let mut z = apply_centering(series, &model.seasonal_means, s)?;
    let mut rows = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let mean = model.seasonal_means[t % s];
        if t < lookback {
            rows.push(SarimaRow {
                second: t,
                value: series[t],
                prediction: None,
                abs_error: None,
                flagged: false,
            });
            continue;
        }
        let pred = predict_at(&model.alpha, &model.phi, s, &z, t);
        let err = (z[t] - pred).abs();
        let flagged = err > threshold;
        if flagged {
            z[t] = pred;
        }
        rows.push(SarimaRow {
            second: t,
            value: series[t],
            prediction: Some(pred + mean),
            abs_error: Some(err),
            flagged,
        });
    }
    Ok(SarimaDetection { threshold, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sarima::{predict_one_step, SarimaOrders};

    fn model(
        alpha: Vec<f64>,
        phi: Vec<f64>,
        s: usize,
        sigma2: f64,
        means: Vec<f64>,
    ) -> SarimaModel {
        SarimaModel::from_coefficients(
            SarimaOrders::seasonal_ar(alpha.len(), phi.len(), s),
            alpha,
            phi,
            sigma2,
            means,
        )
        .unwrap()
    }

    #[test]
    fn quantile_values() {
        assert_eq!(gaussian_quantile(0.5, 3.0).unwrap(), 0.0);
        let q = gaussian_quantile(0.9995, 1.0239e-1).unwrap();
        assert!((q - 1.05293).abs() < 1e-3, "{q}");
        assert!((3.0 * q - 3.15879).abs() < 3e-3);
        assert!(gaussian_quantile(1.0, 1.0).is_err());
        assert!(gaussian_quantile(0.0, 1.0).is_err());
        assert!(gaussian_quantile(0.9, -1.0).is_err());
    }

    #[test]
    fn forecast_series_has_no_flags() {
        let m = model(vec![0.5], vec![0.5], 3, 0.01, vec![1.0, 2.0, 3.0]);
        let mut z = vec![0.3, -0.2, 0.1, 0.4];
        for _ in 0..40 {
            z.push(predict_one_step(&m, &z).unwrap());
        }
        let series: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(t, v)| v + m.seasonal_means[t % 3])
            .collect();
        let d = detect(&series, &m, 1.0, 0.9995).unwrap();
        assert!(d.flagged().is_empty());
        assert_eq!(d.evaluable_mask().iter().filter(|e| !**e).count(), 4);
        for r in d.rows.iter().skip(4) {
            assert!(r.abs_error.unwrap() < 1e-12);
        }
    }

    #[test]
    fn outlier_is_replaced() {
        let period = [3.0, 1.0, 1.0, 2.0];
        let mut series: Vec<f64> = (0..60).map(|t| period[t % 4]).collect();
        series[30] += 20.0;
        let m = model(vec![0.3], vec![0.6], 4, 0.01, period.to_vec());
        let d = detect(&series, &m, 1.0, 0.9995).unwrap();
        assert_eq!(d.flagged(), vec![30]);
        // with replacement the error at later seconds is unaffected
        let clean = detect(
            &(0..60).map(|t| period[t % 4]).collect::<Vec<_>>(),
            &m,
            1.0,
            0.9995,
        )
        .unwrap();
        for t in 31..60 {
            assert_eq!(d.rows[t].abs_error, clean.rows[t].abs_error);
        }
    }

    #[test]
    fn larger_multiplier_flags_subset() {
        let series: Vec<f64> = (0..200).map(|t| ((t * 7919) % 13) as f64).collect();
        let m = model(vec![0.2], vec![0.1], 5, 4.0, vec![6.0; 5]);
        let a = detect(&series, &m, 1.0, 0.95).unwrap().flagged();
        let b = detect(&series, &m, 2.0, 0.95).unwrap().flagged();
        assert!(b.iter().all(|t| a.contains(t)));
        assert!(b.len() < a.len());
    }

    #[test]
    fn short_series_rejected() {
        let m = model(vec![0.2; 4], vec![0.1], 10, 1.0, vec![0.0; 10]);
        assert!(matches!(
            detect(&[0.0; 14], &m, 1.0, 0.9995),
            Err(SarimaError::Size { .. })
        ));
    }
}
