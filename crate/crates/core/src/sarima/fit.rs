//! Seasonal centering, one-step prediction and least-squares fitting.

use super::{FitSummary, Result, SarimaError, SarimaModel, SarimaOrders, StopReason};

/// Subtracts the per-phase mean of each phase `j = t mod s`.
pub fn seasonal_center(series: &[f64], s: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if s == 0 || s > series.len() {
        return Err(SarimaError::Size {
            needed: s.max(1),
            got: series.len(),
        });
    }
    let mut sums = vec![0.0; s];
    let mut counts = vec![0usize; s];
    for (t, &x) in series.iter().enumerate() {
        sums[t % s] += x;
        counts[t % s] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(a, &c)| a / c as f64)
        .collect();
    let centered = apply_centering(series, &means, s)?;
    Ok((centered, means))
}

/// Subtracts stored phase means, phase 0 aligned with index 0 of `series`.
pub fn apply_centering(series: &[f64], seasonal_means: &[f64], s: usize) -> Result<Vec<f64>> {
    if s == 0 || seasonal_means.len() != s {
        return Err(SarimaError::Config(format!(
            "expected {s} seasonal means, got {}",
            seasonal_means.len()
        )));
    }
    Ok(series
        .iter()
        .enumerate()
        .map(|(t, x)| x - seasonal_means[t % s])
        .collect())
}

/// Re-aligns phase means so that entry 0 applies to what was phase `shift`.
pub fn rotate_means(seasonal_means: &[f64], shift: usize) -> Vec<f64> {
    let s = seasonal_means.len();
    (0..s).map(|j| seasonal_means[(j + shift) % s]).collect()
}

/// Prediction of `y[t]` from values strictly before `t`; needs `t >= P*s + p`.
pub(crate) fn predict_at(alpha: &[f64], phi: &[f64], s: usize, y: &[f64], t: usize) -> f64 {
    let mut pred = 0.0;
    for (j, a) in alpha.iter().enumerate() {
        pred += a * y[t - j - 1];
    }
    for (k, f) in phi.iter().enumerate() {
        let base = t - s * (k + 1);
        let mut seasonal = y[base];
        for (j, a) in alpha.iter().enumerate() {
            seasonal -= a * y[base - j - 1];
        }
        pred += f * seasonal;
    }
    pred
}

/// One-step prediction of the value following `history`.
pub fn predict_one_step(model: &SarimaModel, history: &[f64]) -> Result<f64> {
    let need = model.orders.lookback();
    if history.len() < need {
        return Err(SarimaError::Size {
            needed: need,
            got: history.len(),
        });
    }
    let mut y = history[history.len() - need..].to_vec();
    y.push(0.0);
    Ok(predict_at(
        &model.alpha,
        &model.phi,
        model.orders.s,
        &y,
        need,
    ))
}

/// One-step errors `y[t] - y*[t]` for every evaluable `t`.
pub fn residuals(model: &SarimaModel, centered: &[f64]) -> Result<Vec<f64>> {
    let need = model.orders.lookback();
    if centered.len() <= need {
        return Err(SarimaError::Size {
            needed: need + 1,
            got: centered.len(),
        });
    }
    Ok((need..centered.len())
        .map(|t| centered[t] - predict_at(&model.alpha, &model.phi, model.orders.s, centered, t))
        .collect())
}

/// Sum of squared one-step errors and its gradient in `(alpha, phi)` order.
pub fn loss_and_gradient(orders: &SarimaOrders, params: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let (p, big_p, s) = (orders.p, orders.big_p, orders.s);
    let (alpha, phi) = params.split_at(p);
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + big_p];
    let mut seasonal = vec![0.0; big_p];
    for t in orders.lookback()..y.len() {
        let mut pred = 0.0;
        for j in 0..p {
            pred += alpha[j] * y[t - j - 1];
        }
        for k in 0..big_p {
            let base = t - s * (k + 1);
            let mut v = y[base];
            for j in 0..p {
                v -= alpha[j] * y[base - j - 1];
            }
            seasonal[k] = v;
            pred += phi[k] * v;
        }
        let eps = y[t] - pred;
        loss += eps * eps;
        for j in 0..p {
            let mut d = y[t - j - 1];
            for k in 0..big_p {
                d -= phi[k] * y[t - s * (k + 1) - j - 1];
            }
            grad[j] -= 2.0 * eps * d;
        }
        for k in 0..big_p {
            grad[p + k] -= 2.0 * eps * seasonal[k];
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
    /// Starting coefficients in `(alpha, phi)` order; zeros when `None`.
    pub init: Option<Vec<f64>>,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            learning_rate: 1e-3,
            max_iters: 50_000,
            tol: 1e-8,
            init: None,
        }
    }
}

/// Consecutive rejected steps tolerated before giving up.
const MAX_REJECTIONS: usize = 10;

/// Least-squares fit of a seasonal AR model to an already centered series.
///
/// A step that would raise the loss is rejected and the learning rate
/// halved, so accepted iterates have non-increasing loss. The returned
/// model carries zero seasonal means; callers store the means they used.
pub fn fit_least_squares(
    centered: &[f64],
    orders: SarimaOrders,
    gd: &GdConfig,
) -> Result<SarimaModel> {
    orders.validate()?;
    if !(gd.learning_rate > 0.0) || gd.max_iters == 0 {
        return Err(SarimaError::Config(
            "learning_rate must be > 0 and max_iters >= 1".into(),
        ));
    }
    let lookback = orders.lookback();
    if centered.len() <= lookback + 1 {
        return Err(SarimaError::Size {
            needed: lookback + 2,
            got: centered.len(),
        });
    }
    let n_params = orders.n_params();
    let mut params = match &gd.init {
        Some(init) if init.len() == n_params => init.clone(),
        Some(init) => {
            return Err(SarimaError::Config(format!(
                "init has {} values, orders need {n_params}",
                init.len()
            )))
        }
        None => vec![0.0; n_params],
    };

    let (mut loss, mut grad) = loss_and_gradient(&orders, &params, centered);
    if !loss.is_finite() {
        return Err(SarimaError::NonFinite { iter: 0 });
    }
    let mut lr = gd.learning_rate;
    let mut rejections = 0;
    let mut iters = 0;
    let mut grad_norm = norm(&grad);
    let mut stalled = false;
    while iters < gd.max_iters && grad_norm > gd.tol {
        iters += 1;
        let candidate: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
        let (next_loss, next_grad) = loss_and_gradient(&orders, &candidate, centered);
        if next_loss.is_finite() && next_loss <= loss {
            params = candidate;
            loss = next_loss;
            grad = next_grad;
            grad_norm = norm(&grad);
            rejections = 0;
            continue;
        }
        lr *= 0.5;
        rejections += 1;
        if rejections >= MAX_REJECTIONS {
            // a predicted decrease below rounding means the fit has stalled, not diverged
            let predicted_decrease = lr * grad_norm * grad_norm;
            if next_loss.is_finite() && predicted_decrease <= 1e-12 * loss.max(1.0) {
                stalled = true;
                break;
            }
            return Err(SarimaError::Divergence { iter: iters, lr });
        }
    }

    let n_eff = (centered.len() - lookback) as f64;
    let (alpha, phi) = params.split_at(orders.p);
    Ok(SarimaModel {
        orders,
        alpha: alpha.to_vec(),
        phi: phi.to_vec(),
        sigma2: loss / n_eff,
        seasonal_means: vec![0.0; orders.s],
        fit: FitSummary {
            iters,
            final_loss: loss,
            grad_norm,
            stop: if grad_norm <= gd.tol {
                StopReason::Converged
            } else if stalled {
                StopReason::Stalled
            } else {
                StopReason::MaxIters
            },
        },
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
