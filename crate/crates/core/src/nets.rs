//! Fully connected networks described by an [`MlpSpec`] and a flat
//! [`ParamVector`], plus the forward-only convolution used by teacher nets.
//!
//! The parameter layout is `[W¹, b¹, W², b², …, Wᵏ, bᵏ]` with every `Wⁱ`
//! stored row-major as `hᵢ₊₁ × hᵢ` (output rows, input columns). Bias
//! segments are omitted when the spec has `use_biases = false`. Keeping the
//! weights in one flat vector is what lets another network produce them.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::autodiff::{self, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Elu,
}

/// Constants of an activation function that the complexity bounds use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationInfo {
    pub kind: Activation,
    pub lipschitz_constant: f64,
    pub value_at_zero: f64,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => autodiff::relu(x),
            Activation::Sigmoid => autodiff::sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Elu => autodiff::elu(x),
        }
    }

    pub fn lipschitz_constant(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            Activation::Relu | Activation::Tanh | Activation::Elu => 1.0,
        }
    }

    pub fn info(self) -> ActivationInfo {
        ActivationInfo {
            kind: self,
            lipschitz_constant: self.lipschitz_constant(),
            value_at_zero: self.apply(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Elu => "elu",
        }
    }

    fn record(self, g: &mut Graph, v: Var) -> Result<Var> {
        match self {
            Activation::Relu => g.relu(v),
            Activation::Sigmoid => g.sigmoid(v),
            Activation::Tanh => g.tanh(v),
            Activation::Elu => g.elu(v),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "elu" => Ok(Activation::Elu),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// Optional transform applied after the last affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Head {
    #[default]
    None,
    Softmax,
    LogSoftmax,
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activation: Activation,
    head: Head,
    use_biases: bool,
}

/// Where one layer's weights and bias live inside a [`ParamVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub rows: usize,
    pub cols: usize,
    pub weight_offset: usize,
    pub bias_offset: Option<usize>,
}

impl LayerSlot {
    pub fn weight_len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Parameter-counting convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountConvention {
    WeightsOnly,
    WeightsAndBiases,
}

impl MlpSpec {
    /// `widths` lists `h₁ … h_{k+1}`: input width first, output width last.
    pub fn new(widths: impl Into<Vec<usize>>, activation: Activation) -> Result<Self> {
        let widths = widths.into();
        if widths.len() < 2 {
            return Err(Error::invalid(format!(
                "an MLP needs at least one weight matrix, got widths {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::invalid(format!("layer widths must be positive: {widths:?}")));
        }
        Ok(Self {
            widths,
            activation,
            head: Head::None,
            use_biases: true,
        })
    }

    pub fn with_head(mut self, head: Head) -> Self {
        self.head = head;
        self
    }

    pub fn with_biases(mut self, use_biases: bool) -> Self {
        self.use_biases = use_biases;
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn use_biases(&self) -> bool {
        self.use_biases
    }

    /// Number of weight matrices `k`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let weight_offset = offset;
                offset += rows * cols;
                let bias_offset = self.use_biases.then(|| {
                    let b = offset;
                    offset += rows;
                    b
                });
                LayerSlot {
                    rows,
                    cols,
                    weight_offset,
                    bias_offset,
                }
            })
            .collect()
    }

    /// Length of a parameter vector for this spec.
    pub fn layout_len(&self) -> usize {
        let conv = if self.use_biases {
            CountConvention::WeightsAndBiases
        } else {
            CountConvention::WeightsOnly
        };
        param_count(self, conv)
    }
}

/// `Σ hᵢ·hᵢ₊₁`, plus `Σ hᵢ₊₁` under the weights-and-biases convention.
pub fn param_count(spec: &MlpSpec, convention: CountConvention) -> usize {
    spec.widths
        .windows(2)
        .map(|w| {
            w[0] * w[1]
                + match convention {
                    CountConvention::WeightsOnly => 0,
                    CountConvention::WeightsAndBiases => w[1],
                }
        })
        .sum()
}

/// Flat parameters of an MLP in the canonical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.layout_len() {
            return Err(Error::Dimension {
                what: "parameter vector length",
                expected: spec.layout_len(),
                actual: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            values: vec![0.0; spec.layout_len()],
        }
    }

    /// Builds the flat vector from per-layer `(W row-major, b)` pairs.
    pub fn from_layers(spec: &MlpSpec, layers: &[(Vec<f64>, Option<Vec<f64>>)]) -> Result<Self> {
        let slots = spec.layout();
        if layers.len() != slots.len() {
            return Err(Error::Dimension {
                what: "layer count",
                expected: slots.len(),
                actual: layers.len(),
            });
        }
        let mut values = Vec::with_capacity(spec.layout_len());
        for (slot, (w, b)) in slots.iter().zip(layers) {
            if w.len() != slot.weight_len() {
                return Err(Error::Dimension {
                    what: "weight matrix size",
                    expected: slot.weight_len(),
                    actual: w.len(),
                });
            }
            values.extend_from_slice(w);
            match (slot.bias_offset, b) {
                (Some(_), Some(b)) if b.len() == slot.rows => values.extend_from_slice(b),
                (None, None) => {}
                _ => return Err(Error::invalid("bias segments do not match the spec")),
            }
        }
        Ok(Self { values })
    }

    /// Inverse of [`ParamVector::from_layers`].
    pub fn to_layers(&self, spec: &MlpSpec) -> Vec<(Vec<f64>, Option<Vec<f64>>)> {
        spec.layout()
            .iter()
            .map(|slot| {
                (
                    self.weight(slot).to_vec(),
                    slot.bias_offset.map(|_| self.bias(slot).unwrap().to_vec()),
                )
            })
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, slot: &LayerSlot) -> &[f64] {
        &self.values[slot.weight_offset..slot.weight_offset + slot.weight_len()]
    }

    pub fn weight_mut(&mut self, slot: &LayerSlot) -> &mut [f64] {
        &mut self.values[slot.weight_offset..slot.weight_offset + slot.weight_len()]
    }

    pub fn bias(&self, slot: &LayerSlot) -> Option<&[f64]> {
        slot.bias_offset.map(|o| &self.values[o..o + slot.rows])
    }

    pub fn bias_mut(&mut self, slot: &LayerSlot) -> Option<&mut [f64]> {
        slot.bias_offset.map(move |o| &mut self.values[o..o + slot.rows])
    }

    /// Little-endian: `u64` element count followed by that many `f64`s.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.values.len());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses [`ParamVector::to_bytes`] output. The result is not tied to a
    /// spec; use [`ParamVector::new`] to validate against one.
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Vec<f64>, crate::error::FormatError> {
        use crate::error::FormatError;
        if bytes.len() < 8 {
            return Err(FormatError::Truncated {
                expected: 8,
                found: bytes.len(),
            });
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let expected = n
            .checked_mul(8)
            .and_then(|b| b.checked_add(8))
            .unwrap_or(usize::MAX);
        if bytes.len() != expected {
            return Err(FormatError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        Ok(bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(spec: &MlpSpec, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let values = Self::from_bytes(&bytes).map_err(|kind| Error::Format {
            path: path.to_path_buf(),
            kind,
        })?;
        Self::new(spec, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Weights `U(−√(6/fan_in), √(6/fan_in))`, biases zero.
    HeUniform,
    /// Weights and biases `U(−1/√fan_in, 1/√fan_in)`, the usual default of
    /// dense layers in deep-learning frameworks.
    FanInUniform,
    /// Every parameter, biases included, drawn from `U(low, high)`.
    Uniform { low: f64, high: f64 },
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "he-uniform" => Ok(InitScheme::HeUniform),
            "fan-in-uniform" => Ok(InitScheme::FanInUniform),
            _ => Err(Error::invalid(format!("unknown init scheme {s:?} (he-uniform, fan-in-uniform)"))),
        }
    }
}

pub fn mlp_init<R: Rng + ?Sized>(spec: &MlpSpec, scheme: InitScheme, rng: &mut R) -> ParamVector {
    let mut params = ParamVector::zeros(spec);
    for slot in spec.layout() {
        match scheme {
            InitScheme::HeUniform => {
                let bound = (6.0 / slot.cols as f64).sqrt();
                for w in params.weight_mut(&slot) {
                    *w = rng.random_range(-bound..=bound);
                }
            }
            InitScheme::FanInUniform => {
                let bound = 1.0 / (slot.cols as f64).sqrt();
                for w in params.weight_mut(&slot) {
                    *w = rng.random_range(-bound..=bound);
                }
                if let Some(b) = params.bias_mut(&slot) {
                    for v in b {
                        *v = rng.random_range(-bound..=bound);
                    }
                }
            }
            InitScheme::Uniform { low, high } => {
                for w in params.weight_mut(&slot) {
                    *w = rng.random_range(low..=high);
                }
                if let Some(b) = params.bias_mut(&slot) {
                    for v in b {
                        *v = rng.random_range(low..=high);
                    }
                }
            }
        }
    }
    params
}

/// Evaluates the network on a vector `[h₁]` or a batch `[B, h₁]`.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, x: &Tensor) -> Result<Tensor> {
    if params.len() != spec.layout_len() {
        return Err(Error::Dimension {
            what: "parameter vector length",
            expected: spec.layout_len(),
            actual: params.len(),
        });
    }
    let mut g = Graph::new();
    let theta = g.constant(Tensor::vector(params.values().to_vec()));
    let xv = g.constant(x.clone());
    let out = mlp_forward_graph(&mut g, spec, theta, xv)?;
    Ok(g.value(out).clone())
}

/// Records the network on `g`.
///
/// `theta` is either a shared parameter vector `[P]` or per-sample parameters
/// `[B, P]`; in the latter case `x` must be a batch `[B, h₁]` and sample `b`
/// runs through the network defined by row `b` of `theta`.
pub fn mlp_forward_graph(g: &mut Graph, spec: &MlpSpec, theta: Var, x: Var) -> Result<Var> {
    let p = spec.layout_len();
    let theta_shape = g.shape(theta).to_vec();
    let x_shape = g.shape(x).to_vec();
    let in_dim = *x_shape.last().unwrap_or(&0);
    if in_dim != spec.input_dim() || x_shape.len() > 2 || x_shape.is_empty() {
        return Err(Error::Dimension {
            what: "network input width",
            expected: spec.input_dim(),
            actual: in_dim,
        });
    }
    let per_sample = match theta_shape.as_slice() {
        [n] if *n == p => false,
        [b, n] if *n == p && x_shape.len() == 2 && x_shape[0] == *b => true,
        _ => {
            return Err(Error::Dimension {
                what: "parameter vector length",
                expected: p,
                actual: *theta_shape.last().unwrap_or(&0),
            })
        }
    };
    let batch = (x_shape.len() == 2).then(|| x_shape[0]);
    let slots = spec.layout();
    let mut h = x;
    for (i, slot) in slots.iter().enumerate() {
        let z = if per_sample {
            let b = batch.expect("per-sample parameters need a batch");
            let w = g.slice(theta, 1, slot.weight_offset, slot.weight_len())?;
            let w = g.reshape(w, vec![b, slot.rows, slot.cols])?;
            let h3 = g.reshape(h, vec![b, slot.cols, 1])?;
            let z = g.matmul(w, h3)?;
            let z = g.reshape(z, vec![b, slot.rows])?;
            match slot.bias_offset {
                Some(off) => {
                    let bias = g.slice(theta, 1, off, slot.rows)?;
                    g.add(z, bias)?
                }
                None => z,
            }
        } else {
            let w = g.slice(theta, 0, slot.weight_offset, slot.weight_len())?;
            let w = g.reshape(w, vec![slot.rows, slot.cols])?;
            let z = if batch.is_some() {
                g.matmul_nt(h, w)?
            } else {
                g.matmul(w, h)?
            };
            match slot.bias_offset {
                Some(off) => {
                    let bias = g.slice(theta, 0, off, slot.rows)?;
                    g.add(z, bias)?
                }
                None => z,
            }
        };
        h = if i + 1 < slots.len() {
            spec.activation.record(g, z)?
        } else {
            match spec.head {
                Head::None => z,
                Head::Softmax => g.softmax(z)?,
                Head::LogSoftmax => g.log_softmax(z)?,
            }
        };
    }
    Ok(h)
}

/// Plain loop evaluation of one input vector; does not touch the tape.
pub fn mlp_eval(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.input_dim() {
        return Err(Error::Dimension {
            what: "network input width",
            expected: spec.input_dim(),
            actual: x.len(),
        });
    }
    if params.len() != spec.layout_len() {
        return Err(Error::Dimension {
            what: "parameter vector length",
            expected: spec.layout_len(),
            actual: params.len(),
        });
    }
    let slots = spec.layout();
    let mut h = x.to_vec();
    for (i, slot) in slots.iter().enumerate() {
        let w = &params[slot.weight_offset..slot.weight_offset + slot.weight_len()];
        let mut z: Vec<f64> = w
            .chunks_exact(slot.cols)
            .map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(off) = slot.bias_offset {
            for (zj, bj) in z.iter_mut().zip(&params[off..off + slot.rows]) {
                *zj += bj;
            }
        }
        if i + 1 < slots.len() {
            for v in &mut z {
                *v = spec.activation.apply(*v);
            }
        } else {
            match spec.head {
                Head::None => {}
                Head::Softmax => autodiff::softmax_in_place(&mut z),
                Head::LogSoftmax => autodiff::log_softmax_in_place(&mut z),
            }
        }
        h = z;
    }
    Ok(h)
}

/// Induced L1 operator norm of a row-major `rows × cols` matrix: the largest
/// absolute column sum.
pub fn induced_l1_norm(w: &[f64], rows: usize, cols: usize) -> f64 {
    (0..cols)
        .map(|c| (0..rows).map(|r| w[r * cols + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `L^{k−1} · ∏ ‖Wⁱ‖₁`; biases are ignored.
pub fn spectral_complexity(spec: &MlpSpec, params: &ParamVector) -> f64 {
    let lip = spec.activation.lipschitz_constant();
    let norms: f64 = spec
        .layout()
        .iter()
        .map(|slot| induced_l1_norm(params.weight(slot), slot.rows, slot.cols))
        .product();
    lip.powi(spec.depth() as i32 - 1) * norms
}

/// Valid (unpadded) cross-correlation of a `[C,H,W]` input with
/// `[C_out,C,K,K]` kernels. Output is `[C_out, ⌊(H−K)/s⌋+1, ⌊(W−K)/s⌋+1]`.
pub fn conv2d_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: Option<&[f64]>,
    stride: usize,
) -> Result<Tensor> {
    let (&[c, h, w], &[c_out, c_k, kh, kw]) = (input.shape(), kernels.shape()) else {
        return Err(Error::shape("conv2d", input.shape(), kernels.shape()));
    };
    if c != c_k || kh != kw || kh > h || kw > w || stride == 0 {
        return Err(Error::shape("conv2d", input.shape(), kernels.shape()));
    }
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::Dimension {
                what: "conv bias length",
                expected: c_out,
                actual: b.len(),
            });
        }
    }
    let k = kh;
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let x = input.data();
    let kd = kernels.data();
    let mut out = vec![0.0; c_out * oh * ow];
    for o in 0..c_out {
        let b = bias.map_or(0.0, |b| b[o]);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b;
                for ci in 0..c {
                    for ky in 0..k {
                        let xrow = (ci * h + oy * stride + ky) * w + ox * stride;
                        let krow = ((o * c + ci) * k + ky) * k;
                        for kx in 0..k {
                            acc += x[xrow + kx] * kd[krow + kx];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::new(vec![c_out, oh, ow], out)
}
