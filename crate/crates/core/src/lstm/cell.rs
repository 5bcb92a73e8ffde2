//! Single LSTM cell step.

use super::{LstmCellParams, LstmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        CellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn affine(w: &[f64], b: &[f64], z: &[f64]) -> Vec<f64> {
    let cols = z.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| {
            bias + w[r * cols..(r + 1) * cols]
                .iter()
                .zip(z)
                .map(|(a, x)| a * x)
                .sum::<f64>()
        })
        .collect()
}

pub(crate) fn step_cached(
    p: &LstmCellParams,
    x: &[f64],
    prev: &CellState,
) -> (CellState, StepCache) {
    let mut z = prev.h.clone();
    z.extend_from_slice(x);
    let f: Vec<f64> = affine(&p.w_f, &p.b_f, &z)
        .into_iter()
        .map(sigmoid)
        .collect();
    let i: Vec<f64> = affine(&p.w_i, &p.b_i, &z)
        .into_iter()
        .map(sigmoid)
        .collect();
    let g: Vec<f64> = affine(&p.w_c, &p.b_c, &z)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let o: Vec<f64> = affine(&p.w_o, &p.b_o, &z)
        .into_iter()
        .map(sigmoid)
        .collect();
    let c: Vec<f64> = (0..p.hidden)
        .map(|k| f[k] * prev.c[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    let cache = StepCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: prev.c.clone(),
        tanh_c,
    };
    (CellState { h, c }, cache)
}

pub(crate) fn step(p: &LstmCellParams, x: &[f64], prev: &CellState) -> CellState {
    step_cached(p, x, prev).0
}

/// One cell update; returns `(h_t, C_t)`.
pub fn cell_forward(
    params: &LstmCellParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    if x_t.len() != params.input || h_prev.len() != params.hidden || c_prev.len() != params.hidden {
        return Err(LstmError::Shape(format!(
            "cell expects input {} and state {}, got input {}, h {}, C {}",
            params.input,
            params.hidden,
            x_t.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let state = step(
        params,
        x_t,
        &CellState {
            h: h_prev.to_vec(),
            c: c_prev.to_vec(),
        },
    );
    Ok((state.h, state.c))
}
