//! Analytic gradients against central differences, per primitive and end to
//! end through whole models.

use rand::Rng;

use crate::autodiff::{finite_diff_grad, max_relative_error, Graph, Primitive};
use crate::composition::{EmbedModel, HyperModel};
use crate::error::{Error, Result};
use crate::nets::{Activation, Head, InitScheme, MlpSpec};
use crate::tensor::Tensor;
use crate::train::{record_loss, Dataset, LossKind, Model, Targets};

pub const DEFAULT_H: f64 = 1e-5;

fn uniform_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_parts(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect())
}

/// `mean(prim(inputs) ⊙ w)` for a fixed random `w`, differentiated with
/// respect to every input. Returns the largest relative error over inputs.
pub fn check_primitive<R: Rng + ?Sized>(prim: &Primitive, inputs: &[Tensor], h: f64, rng: &mut R) -> Result<f64> {
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let out = g.apply(prim.clone(), &vars)?;
        g.shape(out).to_vec()
    };
    let w = uniform_tensor(&out_shape, rng);
    let loss = |which: usize, probe: &Tensor| -> Result<(f64, Option<Tensor>)> {
        let mut g = Graph::new();
        let vars: Vec<_> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == which {
                    g.leaf(probe.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        let out = g.apply(prim.clone(), &vars)?;
        let wv = g.constant(w.clone());
        let weighted = g.mul(out, wv)?;
        let l = g.mean(weighted)?;
        let grads = g.backward(l)?;
        Ok((g.value(l).item()?, grads.get(vars[which]).cloned()))
    };
    let mut worst = 0.0f64;
    for (i, t) in inputs.iter().enumerate() {
        let analytic = loss(i, t)?.1.unwrap_or_else(|| Tensor::zeros(t.shape().to_vec()));
        let numeric = finite_diff_grad(|p| loss(i, p).map(|r| r.0), t, h)?;
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

/// Every differentiable primitive once, with small random shapes and
/// entries in `[−2, 2]`.
pub fn random_primitive_cases<R: Rng + ?Sized>(rng: &mut R) -> Vec<(Primitive, Vec<Tensor>)> {
    let mut dim = || rng.random_range(1..=4usize);
    let (m, k, n, b) = (dim(), dim(), dim(), dim());
    let mut r = |shape: &[usize]| uniform_tensor(shape, &mut *rng);
    let start = 0;
    vec![
        (Primitive::MatMul { transpose_rhs: false }, vec![r(&[m, k]), r(&[k, n])]),
        (Primitive::MatMul { transpose_rhs: false }, vec![r(&[m, k]), r(&[k])]),
        (Primitive::MatMul { transpose_rhs: false }, vec![r(&[b, m, k]), r(&[b, k, n])]),
        (Primitive::MatMul { transpose_rhs: true }, vec![r(&[m, k]), r(&[n, k])]),
        (Primitive::Add, vec![r(&[m, n]), r(&[m, n])]),
        (Primitive::Add, vec![r(&[m, n]), r(&[n])]),
        (Primitive::Concat { axis: 0 }, vec![r(&[m]), r(&[n])]),
        (Primitive::Concat { axis: 1 }, vec![r(&[m, k]), r(&[m, n])]),
        (Primitive::Mul, vec![r(&[m, n]), r(&[m, n])]),
        (Primitive::Reshape { shape: vec![n * m] }, vec![r(&[m, n])]),
        (Primitive::Slice { axis: 1, start, len: n }, vec![r(&[m, n + k])]),
        (Primitive::Slice { axis: 0, start: k, len: m }, vec![r(&[m + k])]),
        (Primitive::Relu, vec![r(&[m, n])]),
        (Primitive::Sigmoid, vec![r(&[m, n])]),
        (Primitive::Tanh, vec![r(&[m, n])]),
        (Primitive::Elu, vec![r(&[m, n])]),
        (Primitive::Softmax, vec![r(&[m, n])]),
        (Primitive::LogSoftmax, vec![r(&[m, n])]),
        (Primitive::Mean, vec![r(&[m, n])]),
        (Primitive::SumOfSquares, vec![r(&[m, n])]),
    ]
}

/// Loss of `model` on `data` and its gradient in the flat parameters.
pub fn loss_and_grad(model: &Model, theta: &Tensor, data: &Dataset, loss: LossKind) -> Result<(f64, Tensor)> {
    let mut g = Graph::new();
    let t = g.leaf(theta.clone());
    let x = g.constant(data.x.clone());
    let cond = data.cond.as_ref().map(|c| g.constant(c.clone()));
    let out = model.record(&mut g, t, x, cond)?;
    let l = record_loss(&mut g, loss, out, &data.target)?;
    let mut grads = g.backward(l)?;
    let grad = grads.take(t).unwrap_or_else(|| Tensor::zeros(theta.shape().to_vec()));
    Ok((g.value(l).item()?, grad))
}

/// Largest relative error between backprop and central differences over all
/// trainable parameters.
pub fn check_model(model: &Model, data: &Dataset, loss: LossKind, h: f64) -> Result<f64> {
    let theta = Tensor::vector(model.params().to_vec());
    let (_, analytic) = loss_and_grad(model, &theta, data, loss)?;
    let numeric = finite_diff_grad(|p| loss_and_grad(model, p, data, loss).map(|r| r.0), &theta, h)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// A tiny model with smooth activations plus a batch to check it on.
#[derive(Debug, Clone)]
pub struct TinyCase {
    pub model: Model,
    pub data: Dataset,
    pub loss: LossKind,
}

fn smooth_activation<R: Rng + ?Sized>(rng: &mut R) -> Activation {
    [Activation::Tanh, Activation::Sigmoid, Activation::Elu][rng.random_range(0..3)]
}

fn tiny_batch<R: Rng + ?Sized>(d_x: usize, d_i: usize, out: usize, loss: LossKind, rng: &mut R) -> Result<Dataset> {
    let n = rng.random_range(1..=3);
    let target = match loss {
        LossKind::Mse => Targets::Values(uniform_tensor(&[n, out], rng)),
        LossKind::Nll => Targets::Classes((0..n).map(|_| rng.random_range(0..out)).collect()),
    };
    Dataset::new(uniform_tensor(&[n, d_x], rng), Some(uniform_tensor(&[n, d_i], rng)), target)
}

fn primary_spec<R: Rng + ?Sized>(d_in: usize, out: usize, loss: LossKind, rng: &mut R) -> Result<MlpSpec> {
    let spec = MlpSpec::new(vec![d_in, rng.random_range(1..=3), out], smooth_activation(rng))?;
    Ok(match loss {
        LossKind::Nll => spec.with_head(Head::LogSoftmax),
        LossKind::Mse => spec,
    })
}

fn loss_for<R: Rng + ?Sized>(rng: &mut R) -> (LossKind, usize) {
    if rng.random_bool(0.5) {
        (LossKind::Mse, rng.random_range(1..=2))
    } else {
        (LossKind::Nll, rng.random_range(2..=3))
    }
}

const TINY_INIT: InitScheme = InitScheme::Uniform { low: -1.0, high: 1.0 };

pub fn random_tiny_hyper<R: Rng + ?Sized>(rng: &mut R) -> Result<TinyCase> {
    let (d_x, d_i) = (rng.random_range(1..=3), rng.random_range(1..=3));
    let (loss, out) = loss_for(rng);
    let g = primary_spec(d_x, out, loss, rng)?.with_biases(rng.random_bool(0.5));
    let f = MlpSpec::new(vec![d_i, rng.random_range(1..=3), g.layout_len()], smooth_activation(rng))?;
    let model = Model::Hyper(HyperModel::init(f, g, TINY_INIT, rng)?);
    Ok(TinyCase {
        data: tiny_batch(d_x, d_i, out, loss, rng)?,
        model,
        loss,
    })
}

pub fn random_tiny_embed<R: Rng + ?Sized>(rng: &mut R) -> Result<TinyCase> {
    let (d_x, d_i, e_dim) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
    let (loss, out) = loss_for(rng);
    let q = primary_spec(d_x + e_dim, out, loss, rng)?;
    let e = MlpSpec::new(vec![d_i, rng.random_range(1..=3), e_dim], smooth_activation(rng))?;
    let model = Model::Embed(EmbedModel::init(e, q, TINY_INIT, rng)?);
    Ok(TinyCase {
        data: tiny_batch(d_x, d_i, out, loss, rng)?,
        model,
        loss,
    })
}

/// One line of a gradient-check run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub kind: String,
    pub case: usize,
    pub max_rel_error: f64,
}

/// `cases` random instances of every primitive and of tiny hypernetwork and
/// embedding models.
pub fn run_suite<R: Rng + ?Sized>(cases: usize, h: f64, rng: &mut R) -> Result<Vec<CheckLine>> {
    if cases == 0 {
        return Err(Error::invalid("need at least one case"));
    }
    let mut lines = Vec::new();
    for case in 0..cases {
        for (prim, inputs) in random_primitive_cases(rng) {
            let err = check_primitive(&prim, &inputs, h, rng)?;
            lines.push(CheckLine {
                kind: prim.name().to_string(),
                case,
                max_rel_error: err,
            });
        }
        for (kind, tiny) in [("hyper", random_tiny_hyper(rng)?), ("embed", random_tiny_embed(rng)?)] {
            lines.push(CheckLine {
                kind: kind.to_string(),
                case,
                max_rel_error: check_model(&tiny.model, &tiny.data, tiny.loss, h)?,
            });
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn broken_gradient_is_detected() {
        // d/dx of mean(relu(x) ⊙ w) is zero where x < 0; forcing x across the
        // kink with a huge step makes the central difference disagree
        let x = Tensor::vector(vec![1e-7]);
        let err = check_primitive(&Primitive::Relu, &[x], 1e-3, &mut seeded(0)).unwrap();
        assert!(err > 1e-3, "{err}");
    }

    #[test]
    fn suite_passes_on_a_few_cases() {
        let lines = run_suite(2, DEFAULT_H, &mut seeded(11)).unwrap();
        assert!(lines.iter().any(|l| l.kind == "hyper"));
        for l in &lines {
            assert!(l.max_rel_error <= 1e-4, "{l:?}");
        }
    }

    #[test]
    fn every_primitive_is_covered() {
        let names: std::collections::BTreeSet<_> =
            random_primitive_cases(&mut seeded(1)).iter().map(|(p, _)| p.name()).collect();
        assert_eq!(names.len(), 14);
    }
}
