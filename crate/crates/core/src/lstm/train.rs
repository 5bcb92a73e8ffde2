//! Backpropagation through time and Adam training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::{step_cached, CellState, StepCache};
use super::{LstmError, LstmNetwork, Norm, Result, TrainMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Global gradient-norm cap; `f64::INFINITY` disables clipping.
    pub gradient_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 20_000,
            learning_rate: 1e-3,
            batch_size: 50,
            rng_seed: 0,
            gradient_clip: 5.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.gradient_clip > 0.0)
        {
            return Err(LstmError::Config(
                "iterations, batch size, learning rate and gradient clip must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Mean squared batch error (normalized units) before each update.
    pub loss_trace: Vec<f64>,
}

/// Offsets of each layer's parameter block inside the flat vector.
fn layer_offsets(net: &LstmNetwork) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(net.layers.len() + 1);
    let mut pos = 0;
    for layer in &net.layers {
        offsets.push(pos);
        pos += 4 * layer.hidden * (layer.hidden + layer.input) + 4 * layer.hidden;
    }
    offsets.push(pos);
    offsets
}

/// Adds one window's contribution to `grad`; returns its squared error.
fn accumulate(
    net: &LstmNetwork,
    offsets: &[usize],
    window: &[f64],
    target: f64,
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let h_size = net.hidden_size;
    let steps = window.len();
    let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(net.layers.len());
    let mut inputs: Vec<Vec<f64>> = window.iter().map(|&v| vec![v]).collect();
    for layer in &net.layers {
        let mut state = CellState::zeros(h_size);
        let mut layer_cache = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps);
        for x in &inputs {
            let (next, cache) = step_cached(layer, x, &state);
            outputs.push(next.h.clone());
            layer_cache.push(cache);
            state = next;
        }
        caches.push(layer_cache);
        inputs = outputs;
    }
    let top = &inputs[steps - 1];
    let pred = net
        .output_head
        .w
        .iter()
        .zip(top)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        + net.output_head.b;
    let err = pred - target;
    let d_out = 2.0 * err * scale;

    let head = offsets[net.layers.len()];
    for k in 0..h_size {
        grad[head + k] += d_out * top[k];
    }
    grad[head + h_size] += d_out;

    let mut dh_above: Vec<Vec<f64>> = vec![vec![0.0; h_size]; steps];
    dh_above[steps - 1] = net.output_head.w.iter().map(|w| w * d_out).collect();

    for (l, layer) in net.layers.iter().enumerate().rev() {
        let cols = layer.hidden + layer.input;
        let n_w = h_size * cols;
        let base = offsets[l];
        let mut dh_next = vec![0.0; h_size];
        let mut dc_next = vec![0.0; h_size];
        let mut dx_below = vec![vec![0.0; layer.input]; steps];
        let mut dpre = [
            vec![0.0; h_size],
            vec![0.0; h_size],
            vec![0.0; h_size],
            vec![0.0; h_size],
        ];
        for t in (0..steps).rev() {
            let c = &caches[l][t];
            for k in 0..h_size {
                let dh = dh_above[t][k] + dh_next[k];
                let dc = dc_next[k] + dh * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
                dpre[0][k] = dc * c.c_prev[k] * c.f[k] * (1.0 - c.f[k]);
                dpre[1][k] = dc * c.g[k] * c.i[k] * (1.0 - c.i[k]);
                dpre[2][k] = dc * c.i[k] * (1.0 - c.g[k] * c.g[k]);
                dpre[3][k] = dh * c.tanh_c[k] * c.o[k] * (1.0 - c.o[k]);
                dc_next[k] = dc * c.f[k];
            }
            let mut dz = vec![0.0; cols];
            let weights = [&layer.w_f, &layer.w_i, &layer.w_c, &layer.w_o];
            for (gate, w) in weights.iter().enumerate() {
                let w_off = base + gate * n_w;
                let b_off = base + 4 * n_w + gate * h_size;
                for r in 0..h_size {
                    let d = dpre[gate][r];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b_off + r] += d;
                    let row = &w[r * cols..(r + 1) * cols];
                    let g_row = &mut grad[w_off + r * cols..w_off + (r + 1) * cols];
                    for col in 0..cols {
                        g_row[col] += d * c.z[col];
                        dz[col] += d * row[col];
                    }
                }
            }
            dh_next.copy_from_slice(&dz[..h_size]);
            dx_below[t].copy_from_slice(&dz[h_size..]);
        }
        dh_above = dx_below;
    }
    err * err
}

/// Mean squared error over the batch and its gradient in `flat_params` order.
///
/// Inputs and targets are in normalized units.
pub fn gradients(
    net: &LstmNetwork,
    windows: &[Vec<f64>],
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    net.validate()?;
    if windows.len() != targets.len() || windows.is_empty() {
        return Err(LstmError::Shape(format!(
            "{} windows and {} targets",
            windows.len(),
            targets.len()
        )));
    }
    if let Some(w) = windows.iter().find(|w| w.len() != net.seq_len) {
        return Err(LstmError::Size {
            needed: net.seq_len,
            got: w.len(),
        });
    }
    let offsets = layer_offsets(net);
    let mut grad = vec![0.0; net.n_params()];
    let scale = 1.0 / windows.len() as f64;
    let mut loss = 0.0;
    for (w, &y) in windows.iter().zip(targets) {
        loss += accumulate(net, &offsets, w, y, scale, &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Mean squared normalized one-step error over every window of `series`.
pub fn window_mse(net: &LstmNetwork, series: &[f64]) -> Result<f64> {
    net.validate()?;
    let l = net.seq_len;
    if series.len() <= l {
        return Err(LstmError::Size {
            needed: l + 1,
            got: series.len(),
        });
    }
    let z: Vec<f64> = series.iter().map(|&v| net.norm.apply(v)).collect();
    let n = series.len() - l;
    let total: f64 = (0..n)
        .map(|s| {
            let e = net.forward_normalized(&z[s..s + l]) - z[s + l];
            e * e
        })
        .sum();
    Ok(total / n as f64)
}

/// Trains on every window of a clean series.
pub fn train(net: &mut LstmNetwork, series: &[f64], config: &TrainConfig) -> Result<TrainOutcome> {
    if series.len() <= net.seq_len + 1 {
        return Err(LstmError::Size {
            needed: net.seq_len + 2,
            got: series.len(),
        });
    }
    let starts: Vec<usize> = (0..series.len() - net.seq_len).collect();
    train_on_windows(net, series, &starts, config)
}

/// Trains on the windows `series[s..s + seq_len] -> series[s + seq_len]` for each `s` in `starts`.
///
/// Normalization statistics are taken from the values those windows cover.
pub fn train_on_windows(
    net: &mut LstmNetwork,
    series: &[f64],
    starts: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    net.validate()?;
    let l = net.seq_len;
    if starts.is_empty() {
        return Err(LstmError::Size {
            needed: l + 2,
            got: 0,
        });
    }
    if let Some(&bad) = starts.iter().find(|&&s| s + l >= series.len()) {
        return Err(LstmError::Config(format!(
            "window start {bad} runs past the series end"
        )));
    }
    let mut covered = vec![false; series.len()];
    for &s in starts {
        covered[s..=s + l].iter_mut().for_each(|c| *c = true);
    }
    let values: Vec<f64> = series
        .iter()
        .zip(&covered)
        .filter(|(_, c)| **c)
        .map(|(v, _)| *v)
        .collect();
    net.norm = Norm::fit(&values);
    let z: Vec<f64> = series.iter().map(|&v| net.norm.apply(v)).collect();

    let offsets = layer_offsets(net);
    let n = net.n_params();
    let mut params = net.flat_params();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut loss_trace = Vec::with_capacity(config.iterations);
    let scale = 1.0 / config.batch_size as f64;
    let mut grad = vec![0.0; n];

    for iter in 0..config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..config.batch_size {
            let s = starts[rng.random_range(0..starts.len())];
            loss += accumulate(net, &offsets, &z[s..s + l], z[s + l], scale, &mut grad);
        }
        loss *= scale;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LstmError::NonFinite { iter });
        }
        loss_trace.push(loss);

        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > config.gradient_clip {
            let f = config.gradient_clip / norm;
            grad.iter_mut().for_each(|g| *g *= f);
        }
        let t = (iter + 1) as i32;
        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
        for k in 0..n {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            params[k] -= config.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
        net.set_flat_params(&params)?;
    }
    net.train = Some(TrainMeta {
        seed: config.rng_seed,
        iterations: config.iterations,
        lr: config.learning_rate,
        batch: config.batch_size,
    });
    Ok(TrainOutcome { loss_trace })
}
