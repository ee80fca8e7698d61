//! Fully connected MLP with MSE loss, backpropagation and ADAM.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given pre-activation `z` and activation `a`. ReLU'(0) = 0.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Weights (`out × in`) and bias of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Layer {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

/// Gradients and optimizer moments share the model's layer layout.
pub type Params = Vec<Layer>;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub seed: u64,
}

/// Hidden layers use He-uniform init, the linear output layer Glorot-uniform;
/// biases start at zero.
pub fn init_mlp(dims: &[usize], activation: Activation, seed: u64) -> Result<MlpModel> {
    if dims.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "an MLP needs input and output dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("MLP dims must be positive, got {dims:?}")));
    }
    let mut r = rng::stream(seed, "mlp-init", &[]);
    let n_layers = dims.len() - 1;
    let layers = (0..n_layers)
        .map(|i| {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let limit = if i + 1 < n_layers {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            Layer {
                weight: Array2::from_shape_simple_fn((fan_out, fan_in), || r.random_range(-limit..limit)),
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpModel {
        dims: dims.to_vec(),
        layers,
        activation,
        seed,
    })
}

/// Intermediate values kept for the backward pass.
struct Trace {
    /// Layer inputs: `inputs[0]` is the batch, `inputs[i]` the activation of hidden layer `i-1`.
    inputs: Vec<Array2<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims has >= 2 entries")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut cur = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = cur.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(cur);
            if i == last {
                return Trace { inputs, pre, output: z };
            }
            let act = self.activation;
            cur = z.mapv(|v| act.apply(v));
            pre.push(z);
        }
        unreachable!("model has at least one layer")
    }

    /// Batched forward pass, one sample per row.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.forward_trace(x).output)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Loss and exact gradients of [`loss_mse`] on one batch.
    pub fn backward(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<(f64, Params)> {
        self.check_input(&x)?;
        if y.nrows() != x.nrows() || y.ncols() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "labels are {}x{}, expected {}x{}",
                y.nrows(),
                y.ncols(),
                x.nrows(),
                self.output_dim()
            )));
        }
        let batch = x.nrows();
        if batch == 0 {
            return Err(Error::Dimension("empty batch".into()));
        }
        let trace = self.forward_trace(x);
        let loss = loss_mse(trace.output.view(), y)?;

        let mut delta = (&trace.output - &y) * (2.0 / batch as f64);
        let mut grads: Params = self.layers.iter().map(Layer::zeros_like).collect();
        for i in (0..self.layers.len()).rev() {
            grads[i].weight = delta.t().dot(&trace.inputs[i]);
            grads[i].bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weight);
                let act = self.activation;
                Zip::from(&mut back)
                    .and(&trace.pre[i - 1])
                    .and(&trace.inputs[i])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
                delta = back;
            }
        }
        Ok((loss, grads))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    /// Checkpoint text: header lines, then per layer one line per weight row
    /// followed by one bias line. Floats round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "chanpred-mlp 1");
        let _ = writeln!(s, "activation {}", self.activation.as_str());
        let _ = writeln!(s, "seed {}", self.seed);
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "dims {}", dims.join(" "));
        for (i, layer) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "layer {i}");
            for row in layer.weight.rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(s, "{}", cells.join(" "));
            }
            let cells: Vec<String> = layer.bias.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));

        let (no, l) = next("header")?;
        if l != "chanpred-mlp 1" {
            return Err(err(no, format!("not an MLP checkpoint: `{l}`")));
        }
        let (no, l) = next("activation")?;
        let activation = match l.strip_prefix("activation ") {
            Some("relu") => Activation::Relu,
            Some("tanh") => Activation::Tanh,
            _ => return Err(err(no, format!("bad activation line `{l}`"))),
        };
        let (no, l) = next("seed")?;
        let seed = l
            .strip_prefix("seed ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(no, format!("bad seed line `{l}`")))?;
        let (no, l) = next("dims")?;
        let dims: Vec<usize> = l
            .strip_prefix("dims ")
            .map(|v| v.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>())
            .and_then(|r| r.ok())
            .ok_or_else(|| err(no, format!("bad dims line `{l}`")))?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(err(no, format!("invalid dims {dims:?}")));
        }

        let parse_row = |no: usize, l: &str, want: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(no, "malformed number".into()))?;
            if v.len() != want {
                return Err(err(no, format!("expected {want} values, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err(no, "non-finite parameter".into()));
            }
            Ok(v)
        };

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let (no, l) = next("layer header")?;
            if l != format!("layer {i}") {
                return Err(err(no, format!("expected `layer {i}`, got `{l}`")));
            }
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let mut w = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_out {
                let (no, l) = next("weight row")?;
                w.extend(parse_row(no, l, fan_in)?);
            }
            let (no, l) = next("bias row")?;
            let b = parse_row(no, l, fan_out)?;
            layers.push(Layer {
                weight: Array2::from_shape_vec((fan_out, fan_in), w).expect("row count checked"),
                bias: Array1::from(b),
            });
        }
        Ok(MlpModel {
            dims,
            layers,
            activation,
            seed,
        })
    }
}

/// Mean over samples of the squared Euclidean error per sample.
pub fn loss_mse(pred: ArrayView2<'_, f64>, label: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != label.dim() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs label {:?}",
            pred.dim(),
            label.dim()
        )));
    }
    if pred.nrows() == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    let sse: f64 = Zip::from(&pred).and(&label).fold(0.0, |acc, &p, &y| acc + (p - y) * (p - y));
    Ok(sse / pred.nrows() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(model: &MlpModel, learning_rate: f64) -> Self {
        let zeros: Params = model.layers.iter().map(Layer::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }
}

#[derive(Clone, Copy)]
struct AdamCoefs {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    lr: f64,
    /// `1 - beta1^t`
    c1: f64,
    /// `1 - beta2^t`
    c2: f64,
}

#[inline]
fn adam_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, k: AdamCoefs) {
    *m = k.beta1 * *m + (1.0 - k.beta1) * g;
    *v = k.beta2 * *v + (1.0 - k.beta2) * g * g;
    let m_hat = *m / k.c1;
    let v_hat = *v / k.c2;
    *theta -= k.lr * m_hat / (v_hat.sqrt() + k.epsilon);
}

/// One bias-corrected ADAM update of every parameter.
pub fn adam_step(model: &mut MlpModel, grads: &Params, state: &mut AdamState) -> Result<()> {
    if grads.len() != model.layers.len()
        || grads
            .iter()
            .zip(&model.layers)
            .any(|(g, l)| g.weight.dim() != l.weight.dim() || g.bias.dim() != l.bias.dim())
    {
        return Err(Error::Dimension("gradient shapes do not match the model".into()));
    }
    state.t += 1;
    let k = AdamCoefs {
        beta1: state.beta1,
        beta2: state.beta2,
        epsilon: state.epsilon,
        lr: state.learning_rate,
        c1: 1.0 - state.beta1.powi(state.t as i32),
        c2: 1.0 - state.beta2.powi(state.t as i32),
    };
    for (((layer, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        Zip::from(&mut layer.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(|th, &gv, mv, vv| adam_update(th, gv, mv, vv, k));
        Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|th, &gv, mv, vv| adam_update(th, gv, mv, vv, k));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 1000,
            learning_rate: 1e-3,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(format!(
                "batch_size and epochs must be >= 1 (got {} and {})",
                self.batch_size, self.epochs
            )));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and >= 0 (got {})",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Row order for `epoch`: a Fisher-Yates shuffle seeded by (seed, epoch).
pub fn epoch_order(rows: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows).collect();
    let mut r = rng::stream(shuffle_seed, "shuffle", &[epoch as u64]);
    for i in (1..rows).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Mini-batch ADAM training. Returns the mean training loss of every epoch.
pub fn train(model: &mut MlpModel, features: ArrayView2<'_, f64>, labels: ArrayView2<'_, f64>, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let rows = features.nrows();
    if rows == 0 {
        return Err(Error::Contract("cannot train on an empty dataset".into()));
    }
    if labels.nrows() != rows {
        return Err(Error::Dimension(format!("{rows} feature rows vs {} label rows", labels.nrows())));
    }
    let mut state = AdamState::new(model, cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(rows, cfg.shuffle_seed, epoch);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let x = features.select(Axis(0), idx);
            let y = labels.select(Axis(0), idx);
            let (loss, grads) = model.backward(x.view(), y.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * idx.len() as f64;
            adam_step(model, &grads, &mut state)?;
        }
        let mean = total / rows as f64;
        history.push(mean);
    }
    Ok(history)
}
