//! LSTM next-value predictor used as a prediction-error detector.
//!
//! Each gate maps the concatenation `[h_{t-1}, x_t]` through its own weight
//! matrix. The network unrolls one or more stacked cells over a window of
//! normalized values and a linear head turns the last hidden state into the
//! prediction of the following value.

mod cell;
mod detect;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cell::{cell_forward, CellState};
pub use detect::{
    prediction_errors, threshold_ma, threshold_nm, ErrorRow, PredictionErrors, ReplacementRule,
};
pub use train::{gradients, train, train_on_windows, window_mse, TrainConfig, TrainOutcome};

#[derive(Debug, Error, PartialEq)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("series too short: need at least {needed} values, got {got}")]
    Size { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite training loss at iteration {iter}")]
    NonFinite { iter: usize },
    #[error("threshold undefined: {0}")]
    Threshold(String),
}

pub type Result<T> = std::result::Result<T, LstmError>;

/// Weights of one cell; matrices are row-major `hidden x (hidden + input)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub hidden: usize,
    pub input: usize,
    #[serde(rename = "W_f")]
    pub w_f: Vec<f64>,
    #[serde(rename = "W_i")]
    pub w_i: Vec<f64>,
    #[serde(rename = "W_C")]
    pub w_c: Vec<f64>,
    #[serde(rename = "W_o")]
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    #[serde(rename = "b_C")]
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = vec![0.0; hidden * (hidden + input)];
        let b = vec![0.0; hidden];
        LstmCellParams {
            hidden,
            input,
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Weights uniform in `±1/sqrt(hidden + input)`, biases zero.
    pub fn random<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden, input);
        let bound = 1.0 / ((hidden + input) as f64).sqrt();
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let n_w = self.hidden * (self.hidden + self.input);
        let ok = [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
            .iter()
            .all(|w| w.len() == n_w)
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.len() == self.hidden);
        if ok {
            Ok(())
        } else {
            Err(LstmError::Shape(format!(
                "cell with hidden {} and input {} has inconsistent weight shapes",
                self.hidden, self.input
            )))
        }
    }

    fn slices(&self) -> [&Vec<f64>; 8] {
        [
            &self.w_f, &self.w_i, &self.w_c, &self.w_o, &self.b_f, &self.b_i, &self.b_c, &self.b_o,
        ]
    }

    fn slices_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Normalization applied to inputs and targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub mean: f64,
    pub std: f64,
}

impl Norm {
    pub const IDENTITY: Norm = Norm {
        mean: 0.0,
        std: 1.0,
    };

    /// Mean and population standard deviation; a zero deviation becomes 1.
    pub fn fit(values: &[f64]) -> Norm {
        if values.is_empty() {
            return Norm::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Norm { mean, std }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Training settings recorded in the network file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub iterations: usize,
    pub lr: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub hidden_size: usize,
    pub seq_len: usize,
    pub layers: Vec<LstmCellParams>,
    pub output_head: OutputHead,
    pub norm: Norm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainMeta>,
}

impl LstmNetwork {
    /// Randomly initialized network over a scalar input.
    pub fn new(n_layers: usize, hidden_size: usize, seq_len: usize, seed: u64) -> Result<Self> {
        if n_layers == 0 || hidden_size == 0 || seq_len == 0 {
            return Err(LstmError::Config(
                "layers, hidden size and sequence length must all be >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..n_layers)
            .map(|l| {
                LstmCellParams::random(hidden_size, if l == 0 { 1 } else { hidden_size }, &mut rng)
            })
            .collect();
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let w = (0..hidden_size)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Ok(LstmNetwork {
            hidden_size,
            seq_len,
            layers,
            output_head: OutputHead { w, b: 0.0 },
            norm: Norm::IDENTITY,
            train: None,
        })
    }

    /// All-zero network.
    pub fn zeros(n_layers: usize, hidden_size: usize, seq_len: usize) -> Self {
        LstmNetwork {
            hidden_size,
            seq_len,
            layers: (0..n_layers)
                .map(|l| LstmCellParams::zeros(hidden_size, if l == 0 { 1 } else { hidden_size }))
                .collect(),
            output_head: OutputHead {
                w: vec![0.0; hidden_size],
                b: 0.0,
            },
            norm: Norm::IDENTITY,
            train: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.seq_len == 0 {
            return Err(LstmError::Shape(
                "network needs at least one layer and seq_len >= 1".into(),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            let input = if l == 0 { 1 } else { self.hidden_size };
            if layer.hidden != self.hidden_size || layer.input != input {
                return Err(LstmError::Shape(format!(
                    "layer {l} maps {} -> {}, expected {input} -> {}",
                    layer.input, layer.hidden, self.hidden_size
                )));
            }
        }
        if self.output_head.w.len() != self.hidden_size {
            return Err(LstmError::Shape(
                "output head width differs from hidden size".into(),
            ));
        }
        if !(self.norm.std > 0.0) {
            return Err(LstmError::Shape(
                "normalization std must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.slices())
            .map(|v| v.len())
            .sum::<usize>()
            + self.hidden_size
            + 1
    }

    /// Parameters in a fixed order: layers (W_f, W_i, W_C, W_o, b_f, b_i, b_C, b_o), head w, head b.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            for s in layer.slices() {
                out.extend_from_slice(s);
            }
        }
        out.extend_from_slice(&self.output_head.w);
        out.push(self.output_head.b);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(LstmError::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            for s in layer.slices_mut() {
                let n = s.len();
                s.copy_from_slice(&flat[pos..pos + n]);
                pos += n;
            }
        }
        let h = self.hidden_size;
        self.output_head.w.copy_from_slice(&flat[pos..pos + h]);
        self.output_head.b = flat[pos + h];
        Ok(())
    }

    /// Prediction in normalized units for an already normalized window.
    pub fn forward_normalized(&self, window: &[f64]) -> f64 {
        let h_size = self.hidden_size;
        let mut inputs: Vec<Vec<f64>> = window.iter().map(|&v| vec![v]).collect();
        for layer in &self.layers {
            let mut state = CellState::zeros(h_size);
            let mut outputs = Vec::with_capacity(inputs.len());
            for x in &inputs {
                state = cell::step(layer, x, &state);
                outputs.push(state.h.clone());
            }
            inputs = outputs;
        }
        let last = inputs.last().expect("window is non-empty");
        self.output_head
            .w
            .iter()
            .zip(last)
            .map(|(w, h)| w * h)
            .sum::<f64>()
            + self.output_head.b
    }

    /// Predicts the value following `window` (feature units).
    pub fn forward_predict(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.seq_len {
            return Err(LstmError::Size {
                needed: self.seq_len,
                got: window.len(),
            });
        }
        let normalized: Vec<f64> = window.iter().map(|&v| self.norm.apply(v)).collect();
        Ok(self.norm.invert(self.forward_normalized(&normalized)))
    }
}
