//! Frozen, randomly initialized ground-truth functions `y(x, I)`.
//!
//! All weights are drawn once with He-uniform initialization and never
//! change; evaluation is a pure function of the inputs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nets::{
    conv2d_forward, mlp_eval, mlp_init, Activation, Head, InitScheme, MlpSpec, ParamVector,
};
use crate::tensor::Tensor;

/// Hidden widths of the Type I conditioning network `h: d_I → 300 → 300 → d_x`.
pub const TYPE1_HIDDEN: [usize; 2] = [300, 300];
pub const TYPE2_HIDDEN: [usize; 3] = [100, 50, 50];
pub const TYPE3_HIDDEN: [usize; 3] = [100, 100, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Type1,
    Type2,
    Type3,
    ConvTeacher,
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" => Ok(TargetKind::Type1),
            "type2" => Ok(TargetKind::Type2),
            "type3" => Ok(TargetKind::Type3),
            "conv-teacher" => Ok(TargetKind::ConvTeacher),
            other => Err(Error::invalid(format!("unknown target kind '{other}'"))),
        }
    }
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Type1 => "type1",
            TargetKind::Type2 => "type2",
            TargetKind::Type3 => "type3",
            TargetKind::ConvTeacher => "conv-teacher",
        }
    }
}

/// A frozen MLP: spec plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenMlp {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl FrozenMlp {
    fn he<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = mlp_init(&spec, InitScheme::HeUniform, rng);
        Self { spec, params }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        mlp_eval(&self.spec, self.params.values(), x)
    }
}

/// A synthetic conditional target `y(x, I) ∈ ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFn {
    /// `y = ⟨x, h(I)⟩`, `h` ending in softmax.
    Type1 { h: FrozenMlp },
    /// `y = MLP(x ‖ I)` with ELU.
    Type2 { net: FrozenMlp, d_x: usize },
    /// `y = MLP(x ⊙ I)` with ELU.
    Type3 { net: FrozenMlp },
}

pub fn make_type1<R: Rng + ?Sized>(d_x: usize, d_i: usize, rng: &mut R) -> Result<TargetFn> {
    let spec = MlpSpec::new(vec![d_i, TYPE1_HIDDEN[0], TYPE1_HIDDEN[1], d_x], Activation::Sigmoid)?
        .with_head(Head::Softmax);
    Ok(TargetFn::Type1 {
        h: FrozenMlp::he(spec, rng),
    })
}

pub fn make_type2<R: Rng + ?Sized>(d_x: usize, d_i: usize, rng: &mut R) -> Result<TargetFn> {
    let [a, b, c] = TYPE2_HIDDEN;
    let spec = MlpSpec::new(vec![d_x + d_i, a, b, c, 1], Activation::Elu)?;
    Ok(TargetFn::Type2 {
        net: FrozenMlp::he(spec, rng),
        d_x,
    })
}

pub fn make_type3<R: Rng + ?Sized>(d_x: usize, d_i: usize, rng: &mut R) -> Result<TargetFn> {
    if d_x != d_i {
        return Err(Error::Dimension {
            what: "type III needs d_x == d_I; d_x",
            expected: d_i,
            actual: d_x,
        });
    }
    let [a, b, c] = TYPE3_HIDDEN;
    let spec = MlpSpec::new(vec![d_i, a, b, c, 1], Activation::Elu)?;
    Ok(TargetFn::Type3 {
        net: FrozenMlp::he(spec, rng),
    })
}

pub fn make_target<R: Rng + ?Sized>(
    kind: TargetKind,
    d_x: usize,
    d_i: usize,
    rng: &mut R,
) -> Result<TargetFn> {
    match kind {
        TargetKind::Type1 => make_type1(d_x, d_i, rng),
        TargetKind::Type2 => make_type2(d_x, d_i, rng),
        TargetKind::Type3 => make_type3(d_x, d_i, rng),
        TargetKind::ConvTeacher => Err(Error::invalid(
            "the convolutional teacher is not a conditional target; use make_conv_teacher",
        )),
    }
}

impl TargetFn {
    pub fn kind(&self) -> TargetKind {
        match self {
            TargetFn::Type1 { .. } => TargetKind::Type1,
            TargetFn::Type2 { .. } => TargetKind::Type2,
            TargetFn::Type3 { .. } => TargetKind::Type3,
        }
    }

    pub fn d_x(&self) -> usize {
        match self {
            TargetFn::Type1 { h } => h.spec.output_dim(),
            TargetFn::Type2 { d_x, .. } => *d_x,
            TargetFn::Type3 { net } => net.spec.input_dim(),
        }
    }

    pub fn d_i(&self) -> usize {
        match self {
            TargetFn::Type1 { h } => h.spec.input_dim(),
            TargetFn::Type2 { net, d_x } => net.spec.input_dim() - d_x,
            TargetFn::Type3 { net } => net.spec.input_dim(),
        }
    }

    pub fn eval(&self, x: &[f64], cond: &[f64]) -> Result<f64> {
        if x.len() != self.d_x() {
            return Err(Error::Dimension {
                what: "target x width",
                expected: self.d_x(),
                actual: x.len(),
            });
        }
        if cond.len() != self.d_i() {
            return Err(Error::Dimension {
                what: "target I width",
                expected: self.d_i(),
                actual: cond.len(),
            });
        }
        match self {
            TargetFn::Type1 { h } => {
                let p = h.eval(cond)?;
                Ok(x.iter().zip(&p).map(|(a, b)| a * b).sum())
            }
            TargetFn::Type2 { net, .. } => {
                let mut joined = x.to_vec();
                joined.extend_from_slice(cond);
                Ok(net.eval(&joined)?[0])
            }
            TargetFn::Type3 { net } => {
                let prod: Vec<f64> = x.iter().zip(cond).map(|(a, b)| a * b).collect();
                Ok(net.eval(&prod)?[0])
            }
        }
    }
}

/// Samples with `x, I ~ N(0, 1)` entrywise, labelled by `target`.
#[derive(Debug, Clone)]
pub struct SyntheticSamples {
    pub x: Tensor,
    pub cond: Tensor,
    pub y: Tensor,
}

pub fn sample_synthetic<R: Rng + ?Sized>(
    target: &TargetFn,
    n: usize,
    rng: &mut R,
) -> Result<SyntheticSamples> {
    if n == 0 {
        return Err(Error::invalid("cannot draw zero samples"));
    }
    let (dx, di) = (target.d_x(), target.d_i());
    let mut xs = Vec::with_capacity(n * dx);
    let mut cs = Vec::with_capacity(n * di);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dx).map(|_| StandardNormal.sample(rng)).collect();
        let c: Vec<f64> = (0..di).map(|_| StandardNormal.sample(rng)).collect();
        ys.push(target.eval(&x, &c)?);
        xs.extend(x);
        cs.extend(c);
    }
    Ok(SyntheticSamples {
        x: Tensor::new(vec![n, dx], xs)?,
        cond: Tensor::new(vec![n, di], cs)?,
        y: Tensor::new(vec![n, 1], ys)?,
    })
}

pub const TEACHER_KERNEL: usize = 10;
pub const TEACHER_STRIDE: usize = 2;
pub const TEACHER_CHANNELS: [usize; 2] = [20, 50];
pub const TEACHER_OUTPUTS: usize = 10;

/// `y(x) = fc ∘ ReLU ∘ conv₂ ∘ ReLU ∘ conv₁(x)`, both convolutions with
/// kernel 10 and stride 2, valid padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTeacher {
    input_shape: [usize; 3],
    conv1: (Tensor, Vec<f64>),
    conv2: (Tensor, Vec<f64>),
    fc: FrozenMlp,
}

fn he_block<R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

fn conv_out(n: usize) -> usize {
    (n - TEACHER_KERNEL) / TEACHER_STRIDE + 1
}

/// `input_shape` is `[C, H, W]`, e.g. `[1, 28, 28]` or `[3, 32, 32]`.
///
/// Convolution biases are drawn with the same He-uniform law as the weights.
pub fn make_conv_teacher<R: Rng + ?Sized>(input_shape: [usize; 3], rng: &mut R) -> Result<ConvTeacher> {
    let [c, h, w] = input_shape;
    if !(c == 1 || c == 3) {
        return Err(Error::invalid(format!("teacher expects 1 or 3 channels, got {c}")));
    }
    let k = TEACHER_KERNEL;
    let min = k + TEACHER_STRIDE * (k - 1);
    if h < min || w < min {
        return Err(Error::invalid(format!(
            "teacher input {h}×{w} too small for two {k}×{k} stride-{TEACHER_STRIDE} convolutions"
        )));
    }
    let [c1, c2] = TEACHER_CHANNELS;
    let fan1 = c * k * k;
    let conv1 = (
        Tensor::new(vec![c1, c, k, k], he_block(c1 * fan1, fan1, rng))?,
        he_block(c1, fan1, rng),
    );
    let fan2 = c1 * k * k;
    let conv2 = (
        Tensor::new(vec![c2, c1, k, k], he_block(c2 * fan2, fan2, rng))?,
        he_block(c2, fan2, rng),
    );
    let flat = c2 * conv_out(conv_out(h)) * conv_out(conv_out(w));
    let fc_spec = MlpSpec::new(vec![flat, TEACHER_OUTPUTS], Activation::Relu)?;
    Ok(ConvTeacher {
        input_shape,
        conv1,
        conv2,
        fc: FrozenMlp::he(fc_spec, rng),
    })
}

impl ConvTeacher {
    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Shapes after `conv₁` and `conv₂`.
    pub fn intermediate_shapes(&self) -> ([usize; 3], [usize; 3]) {
        let [_, h, w] = self.input_shape;
        let [c1, c2] = TEACHER_CHANNELS;
        let (h1, w1) = (conv_out(h), conv_out(w));
        ([c1, h1, w1], [c2, conv_out(h1), conv_out(w1)])
    }

    /// Zeroes every bias; used to check the linear-at-zero behaviour.
    pub fn without_biases(mut self) -> Self {
        self.conv1.1.fill(0.0);
        self.conv2.1.fill(0.0);
        let slot = self.fc.spec.layout()[0];
        if let Some(b) = self.fc.params.bias_mut(&slot) {
            b.fill(0.0);
        }
        self
    }

    /// Evaluates the teacher on one flattened `C×H×W` input.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension {
                what: "teacher input length",
                expected: self.input_len(),
                actual: x.len(),
            });
        }
        let input = Tensor::new(self.input_shape.to_vec(), x.to_vec())?;
        let h1 = conv2d_forward(&input, &self.conv1.0, Some(&self.conv1.1), TEACHER_STRIDE)?
            .map(|v| v.max(0.0));
        let h2 = conv2d_forward(&h1, &self.conv2.0, Some(&self.conv2.1), TEACHER_STRIDE)?
            .map(|v| v.max(0.0));
        self.fc.eval(h2.data())
    }

    pub fn eval_tensor(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != self.input_shape {
            return Err(Error::shape("conv teacher", &self.input_shape, x.shape()));
        }
        Ok(Tensor::vector(self.eval(x.data())?))
    }
}
