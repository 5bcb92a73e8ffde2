//! Online prediction errors and the MA / NM thresholds.

use super::{LstmError, LstmNetwork, Result};

/// Decides which seconds are replaced by their prediction while walking forward.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplacementRule {
    /// Keep every observed value.
    None,
    /// Replace when `e_t >= T`.
    Threshold(f64),
    /// Replace the seconds marked true (attacks known online).
    Labels(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub second: usize,
    pub actual: f64,
    pub predicted: Option<f64>,
    pub abs_error: Option<f64>,
    /// Whether the rule replaced this second.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrors {
    pub rows: Vec<ErrorRow>,
}

impl PredictionErrors {
    /// Errors per second; `None` for the first `seq_len` seconds.
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.abs_error).collect()
    }

    pub fn evaluable_mask(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.abs_error.is_some()).collect()
    }

    /// Seconds with `e_t >= threshold`.
    pub fn flag(&self, threshold: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.abs_error.is_some_and(|e| e >= threshold))
            .map(|r| r.second)
            .collect()
    }
}

/// Walks `series` forward predicting each second from the preceding window.
pub fn prediction_errors(
    net: &LstmNetwork,
    series: &[f64],
    rule: &ReplacementRule,
) -> Result<PredictionErrors> {
    net.validate()?;
    let l = net.seq_len;
    if series.len() <= l {
        return Err(LstmError::Size {
            needed: l + 1,
            got: series.len(),
        });
    }
    if let ReplacementRule::Labels(labels) = rule {
        if labels.len() != series.len() {
            return Err(LstmError::Shape(format!(
                "{} labels for {} seconds",
                labels.len(),
                series.len()
            )));
        }
    }
    let mut working: Vec<f64> = series.iter().map(|&v| net.norm.apply(v)).collect();
    let mut rows = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        if t < l {
            rows.push(ErrorRow {
                second: t,
                actual: series[t],
                predicted: None,
                abs_error: None,
                flagged: false,
            });
            continue;
        }
        let pred_norm = net.forward_normalized(&working[t - l..t]);
        let predicted = net.norm.invert(pred_norm);
        let err = (predicted - series[t]).abs();
        let flagged = match rule {
            ReplacementRule::None => false,
            ReplacementRule::Threshold(th) => err >= *th,
            ReplacementRule::Labels(labels) => labels[t],
        };
        if flagged {
            working[t] = pred_norm;
        }
        rows.push(ErrorRow {
            second: t,
            actual: series[t],
            predicted: Some(predicted),
            abs_error: Some(err),
            flagged,
        });
    }
    Ok(PredictionErrors { rows })
}

fn check_lengths(errors: &[f64], labels: &[bool]) -> Result<()> {
    if errors.len() != labels.len() {
        return Err(LstmError::Shape(format!(
            "{} errors for {} labels",
            errors.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Largest threshold that flags every malicious second: the minimum malicious error.
pub fn threshold_ma(errors: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(errors, labels)?;
    errors
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(e, _)| *e)
        .reduce(f64::min)
        .ok_or_else(|| LstmError::Threshold("no malicious seconds".into()))
}

/// Smallest threshold that flags no benign second: just above the maximum benign error.
pub fn threshold_nm(errors: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(errors, labels)?;
    errors
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(e, _)| *e)
        .reduce(f64::max)
        .map(f64::next_up)
        .ok_or_else(|| LstmError::Threshold("no non-malicious seconds".into()))
}
