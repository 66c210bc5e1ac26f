//! Losses, optimizers and the minibatch training loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::autodiff::{Graph, Var};
use crate::composition::{EmbedModel, HyperModel};
use crate::error::{Error, Result};
use crate::nets::{MlpSpec, ParamVector};
use crate::rng::derived;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    /// Negative log-likelihood of log-probability predictions.
    Nll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    ClassificationError,
}

/// Regression values `[N, out]` or class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Values(Tensor),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(t) => t.shape()[0],
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(match self {
            Targets::Values(t) => Targets::Values(t.select_rows(idx)?),
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
        })
    }
}

/// Builds the batch-averaged loss on the tape. `pred` is `[B, K]`.
pub fn record_loss(g: &mut Graph, kind: LossKind, pred: Var, target: &Targets) -> Result<Var> {
    let shape = g.shape(pred).to_vec();
    match (kind, target) {
        (LossKind::Mse, Targets::Values(t)) => {
            if t.shape() != shape.as_slice() {
                return Err(Error::shape("mse", &shape, t.shape()));
            }
            let neg = g.constant(t.map(|v| -v));
            let diff = g.add(pred, neg)?;
            let sq = g.mul(diff, diff)?;
            g.mean(sq)
        }
        (LossKind::Nll, Targets::Classes(c)) => {
            let &[b, k] = shape.as_slice() else {
                return Err(Error::invalid(format!("nll needs [batch, classes] predictions, got {shape:?}")));
            };
            if c.len() != b {
                return Err(Error::shape("nll", &shape, &[c.len()]));
            }
            // mean over B·K entries of −K·onehot ⊙ logp = mean over B of −logp[target]
            let mut w = vec![0.0; b * k];
            for (i, &class) in c.iter().enumerate() {
                if class >= k {
                    return Err(Error::invalid(format!("class {class} out of range for {k} outputs")));
                }
                w[i * k + class] = -(k as f64);
            }
            let w = g.constant(Tensor::from_parts(vec![b, k], w));
            let picked = g.mul(pred, w)?;
            g.mean(picked)
        }
        (LossKind::Mse, Targets::Classes(_)) => Err(Error::invalid("mse loss needs value targets")),
        (LossKind::Nll, Targets::Values(_)) => Err(Error::invalid("nll loss needs class targets")),
    }
}

/// Loss of a fixed prediction, as a scalar tensor.
pub fn loss_eval(kind: LossKind, pred: &Tensor, target: &Targets) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = g.constant(pred.clone());
    let l = record_loss(&mut g, kind, p, target)?;
    Ok(g.value(l).clone())
}

fn check_lengths(params: &[f64], grads: &[f64], state: &[&[f64]]) -> Result<()> {
    if params.len() != grads.len() || state.iter().any(|s| s.len() != params.len()) {
        return Err(Error::shape("optimizer step", &[params.len()], &[grads.len()]));
    }
    Ok(())
}

/// `v ← γv + g; θ ← θ − μv`.
pub fn sgd_momentum_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) -> Result<()> {
    check_lengths(params, grads, &[velocity])?;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// One Adadelta step, scaled by `lr`.
pub fn adadelta_step(
    params: &mut [f64],
    grads: &[f64],
    sq_grad: &mut [f64],
    sq_update: &mut [f64],
    rho: f64,
    eps: f64,
    lr: f64,
) -> Result<()> {
    check_lengths(params, grads, &[sq_grad, sq_update])?;
    if !(rho > 0.0 && rho < 1.0) || eps <= 0.0 {
        return Err(Error::invalid(format!("adadelta needs rho in (0,1) and eps > 0, got {rho}, {eps}")));
    }
    for i in 0..params.len() {
        let g = grads[i];
        sq_grad[i] = rho * sq_grad[i] + (1.0 - rho) * g * g;
        let delta = -((sq_update[i] + eps).sqrt() / (sq_grad[i] + eps).sqrt()) * g;
        sq_update[i] = rho * sq_update[i] + (1.0 - rho) * delta * delta;
        params[i] += lr * delta;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerSpec {
    SgdMomentum { lr: f64, momentum: f64 },
    Adadelta { lr: f64, rho: f64, eps: f64 },
}

impl OptimizerSpec {
    pub fn sgd(lr: f64, momentum: f64) -> Self {
        OptimizerSpec::SgdMomentum { lr, momentum }
    }

    /// Adadelta with `rho = 0.9`, `eps = 1e-6`.
    pub fn adadelta(lr: f64) -> Self {
        OptimizerSpec::Adadelta { lr, rho: 0.9, eps: 1e-6 }
    }
}

/// Per-parameter optimizer state, one buffer per parameter for SGD and two
/// for Adadelta.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub spec: OptimizerSpec,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptState {
    pub fn new(spec: OptimizerSpec, n_params: usize) -> Self {
        let second = match spec {
            OptimizerSpec::SgdMomentum { .. } => Vec::new(),
            OptimizerSpec::Adadelta { .. } => vec![0.0; n_params],
        };
        Self {
            spec,
            first: vec![0.0; n_params],
            second,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self.spec {
            OptimizerSpec::SgdMomentum { lr, momentum } => sgd_momentum_step(params, grads, &mut self.first, lr, momentum),
            OptimizerSpec::Adadelta { lr, rho, eps } => {
                adadelta_step(params, grads, &mut self.first, &mut self.second, rho, eps, lr)
            }
        }
    }
}

/// Anything the loop can train.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp { spec: MlpSpec, params: Vec<f64> },
    Hyper(HyperModel),
    Embed(EmbedModel),
}

impl Model {
    pub fn mlp(spec: MlpSpec, params: ParamVector) -> Self {
        Model::Mlp {
            spec,
            params: params.into_values(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Mlp { params, .. } => params,
            Model::Hyper(m) => m.params(),
            Model::Embed(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Mlp { params, .. } => params,
            Model::Hyper(m) => m.params_mut(),
            Model::Embed(m) => m.params_mut(),
        }
    }

    pub fn trainable_params(&self) -> usize {
        self.params().len()
    }

    pub fn needs_cond(&self) -> bool {
        !matches!(self, Model::Mlp { .. })
    }

    pub fn record(&self, g: &mut Graph, theta: Var, x: Var, cond: Option<Var>) -> Result<Var> {
        match (self, cond) {
            (Model::Mlp { spec, .. }, _) => crate::nets::mlp_forward_graph(g, spec, theta, x),
            (Model::Hyper(m), Some(c)) => m.record(g, theta, x, c),
            (Model::Embed(m), Some(c)) => m.record(g, theta, x, c),
            _ => Err(Error::invalid("conditioned model evaluated without conditioning input")),
        }
    }

    pub fn forward(&self, x: &Tensor, cond: Option<&Tensor>) -> Result<Tensor> {
        let mut g = Graph::new();
        let theta = g.constant(Tensor::vector(self.params().to_vec()));
        let xv = g.constant(x.clone());
        let cv = cond.map(|c| g.constant(c.clone()));
        let out = self.record(&mut g, theta, xv, cv)?;
        Ok(g.value(out).clone())
    }
}

/// Inputs `[N, d_x]`, optional conditioning inputs `[N, d_I]` and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub cond: Option<Tensor>,
    pub target: Targets,
}

impl Dataset {
    pub fn new(x: Tensor, cond: Option<Tensor>, target: Targets) -> Result<Self> {
        let n = match x.shape() {
            [n, _] => *n,
            s => return Err(Error::invalid(format!("inputs must be [N, d], got {s:?}"))),
        };
        if let Some(c) = &cond {
            if c.rank() != 2 || c.shape()[0] != n {
                return Err(Error::shape("dataset", x.shape(), c.shape()));
            }
        }
        if target.len() != n {
            return Err(Error::shape("dataset", x.shape(), &[target.len()]));
        }
        Ok(Self { x, cond, target })
    }

    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            x: self.x.select_rows(idx)?,
            cond: self.cond.as_ref().map(|c| c.select_rows(idx)).transpose()?,
            target: self.target.select(idx)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub optimizer: OptimizerSpec,
    pub metric: Metric,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch_size and epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_metric: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,eval_metric\n");
        for r in &self.epochs {
            let _ = writeln!(s, "{},{},{}", r.epoch, r.train_loss, r.eval_metric);
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// One gradient step on a batch; returns the batch loss.
pub fn train_step(model: &mut Model, batch: &Dataset, loss: LossKind, opt: &mut OptState) -> Result<f64> {
    let mut g = Graph::new();
    let theta = g.leaf(Tensor::vector(model.params().to_vec()));
    let x = g.constant(batch.x.clone());
    let cond = batch.cond.as_ref().map(|c| g.constant(c.clone()));
    let out = model.record(&mut g, theta, x, cond)?;
    let l = record_loss(&mut g, loss, out, &batch.target)?;
    let value = g.value(l).item()?;
    if !value.is_finite() {
        return Ok(value);
    }
    let mut grads = g.backward(l)?;
    let grad = grads
        .take(theta)
        .unwrap_or_else(|| Tensor::zeros(vec![model.trainable_params()]));
    opt.step(model.params_mut(), grad.data())?;
    Ok(value)
}

/// Epoch-at-a-time training; the permutation of epoch `e` depends only on
/// `(seed, e)`.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    opt: OptState,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, model: &Model) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            opt: OptState::new(config.optimizer, model.trainable_params()),
            epoch: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Runs one epoch and returns its sample-weighted mean training loss.
    pub fn run_epoch(&mut self, model: &mut Model, train: &Dataset) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::invalid("no training data"));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derived(self.config.seed, &[self.epoch as u64]));
        let mut total = 0.0;
        for (b, idx) in order.chunks(self.config.batch_size).enumerate() {
            let batch = train.select(idx)?;
            let l = train_step(model, &batch, self.config.loss, &mut self.opt)?;
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("training loss {l} at epoch {}, batch {b}", self.epoch + 1)));
            }
            total += l * idx.len() as f64;
        }
        self.epoch += 1;
        Ok(total / train.len() as f64)
    }
}

/// Trains for `config.epochs` epochs, recording the eval metric on `eval`
/// (or on `train` when absent) after each one.
pub fn train_loop(model: &mut Model, train: &Dataset, eval: Option<&Dataset>, config: &TrainConfig) -> Result<History> {
    let mut trainer = Trainer::new(*config, model)?;
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        let train_loss = trainer.run_epoch(model, train)?;
        let eval_metric = evaluate(model, eval.unwrap_or(train), config.metric)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            eval_metric,
        });
    }
    Ok(history)
}

/// Trains for `config.epochs` epochs without per-epoch evaluation and
/// returns the last epoch's training loss.
pub fn fit(model: &mut Model, train: &Dataset, config: &TrainConfig) -> Result<f64> {
    let mut trainer = Trainer::new(*config, model)?;
    let mut last = f64::NAN;
    for _ in 0..config.epochs {
        last = trainer.run_epoch(model, train)?;
    }
    Ok(last)
}

const EVAL_CHUNK: usize = 256;

/// Model outputs for every row, evaluated in chunks.
pub fn predict(model: &Model, data: &Dataset) -> Result<Tensor> {
    let n = data.len();
    let mut out = Vec::new();
    let mut width = 0;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let x = data.x.select_rows(&idx)?;
        let cond = data.cond.as_ref().map(|c| c.select_rows(&idx)).transpose()?;
        let y = model.forward(&x, cond.as_ref())?;
        width = y.shape()[1];
        out.extend_from_slice(y.data());
    }
    Tensor::new(vec![n, width], out)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Metric of fixed predictions against targets. Classification error
/// compares argmaxes (the first maximum wins ties); value targets are
/// treated as one-hot or scores.
pub fn metric_of(pred: &Tensor, target: &Targets, metric: Metric) -> Result<f64> {
    let n = pred.shape()[0];
    if n == 0 || target.len() != n {
        return Err(Error::shape("metric", pred.shape(), &[target.len()]));
    }
    match (metric, target) {
        (Metric::Mse, Targets::Values(t)) => {
            if t.shape() != pred.shape() {
                return Err(Error::shape("mse", pred.shape(), t.shape()));
            }
            let s: f64 = pred.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(s / pred.len() as f64)
        }
        (Metric::Mse, Targets::Classes(_)) => Err(Error::invalid("mse metric needs value targets")),
        (Metric::ClassificationError, _) => {
            let wrong = (0..n)
                .filter(|&i| {
                    let truth = match target {
                        Targets::Classes(c) => c[i],
                        Targets::Values(t) => argmax(t.row(i)),
                    };
                    argmax(pred.row(i)) != truth
                })
                .count();
            Ok(wrong as f64 / n as f64)
        }
    }
}

pub fn evaluate(model: &Model, data: &Dataset, metric: Metric) -> Result<f64> {
    metric_of(&predict(model, data)?, &data.target, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{mlp_init, Activation, Head, InitScheme};
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sgd_hand_step() {
        let (mut p, mut v) = (vec![1.0], vec![0.0]);
        sgd_momentum_step(&mut p, &[2.0], &mut v, 0.1, 0.5).unwrap();
        assert_eq!(v, [2.0]);
        assert_abs_diff_eq!(p[0], 0.8, epsilon = 1e-15);
        let (mut p, mut v) = (vec![1.0], vec![0.0]);
        sgd_momentum_step(&mut p, &[0.0], &mut v, 0.1, 0.5).unwrap();
        assert_eq!((p[0], v[0]), (1.0, 0.0));
        assert!(sgd_momentum_step(&mut p, &[0.0, 1.0], &mut v, 0.1, 0.5).is_err());
    }

    #[test]
    fn sgd_three_step_trace() {
        // hand trace with μ=0.1, γ=0.5 and gradients 1, −2, 0.5:
        // v: 1, −1.5, −0.25; θ: 1−0.1, 0.9+0.15, 1.05+0.025
        let (mut p, mut v) = (vec![1.0], vec![0.0]);
        let expect = [(1.0, 0.9), (-1.5, 1.05), (-0.25, 1.075)];
        for (g, (ve, pe)) in [1.0, -2.0, 0.5].into_iter().zip(expect) {
            sgd_momentum_step(&mut p, &[g], &mut v, 0.1, 0.5).unwrap();
            assert_abs_diff_eq!(v[0], ve, epsilon = 1e-12);
            assert_abs_diff_eq!(p[0], pe, epsilon = 1e-12);
        }
    }

    #[test]
    fn adadelta_first_step() {
        let (mut p, mut sg, mut su) = (vec![0.0], vec![0.0], vec![0.0]);
        adadelta_step(&mut p, &[1.0], &mut sg, &mut su, 0.9, 1e-6, 1.0).unwrap();
        assert_abs_diff_eq!(p[0], -(1e-6f64 / (0.1 + 1e-6)).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], -3.1623e-3, epsilon = 1e-7);
    }

    #[test]
    fn adadelta_three_step_trace() {
        let (rho, eps) = (0.9, 1e-6);
        let (mut p, mut sg, mut su) = (vec![0.5], vec![0.0], vec![0.0]);
        let (mut eg, mut ed, mut theta) = (0.0f64, 0.0f64, 0.5f64);
        for g in [1.0, -0.5, 2.0] {
            adadelta_step(&mut p, &[g], &mut sg, &mut su, rho, eps, 0.5).unwrap();
            eg = 0.9 * eg + 0.1 * g * g;
            let d = -(ed + eps).sqrt() / (eg + eps).sqrt() * g;
            ed = 0.9 * ed + 0.1 * d * d;
            theta += 0.5 * d;
            assert_abs_diff_eq!(p[0], theta, epsilon = 1e-15);
        }
    }

    #[test]
    fn adadelta_noop_cases() {
        let (mut p, mut sg, mut su) = (vec![0.3, -0.2], vec![0.0; 2], vec![0.0; 2]);
        adadelta_step(&mut p, &[0.0, 0.0], &mut sg, &mut su, 0.9, 1e-6, 1.0).unwrap();
        assert_eq!(p, [0.3, -0.2]);
        adadelta_step(&mut p, &[1.0, 2.0], &mut sg, &mut su, 0.9, 1e-6, 0.0).unwrap();
        assert_eq!(p, [0.3, -0.2]);
    }

    #[test]
    fn loss_examples() {
        let x = Tensor::matrix(1, 2, vec![0.3, -0.7]).unwrap();
        assert_eq!(loss_eval(LossKind::Mse, &x, &Targets::Values(x.clone())).unwrap().item().unwrap(), 0.0);
        let z = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        let o = Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(loss_eval(LossKind::Mse, &z, &Targets::Values(o)).unwrap().item().unwrap(), 1.0);
        let logp = Tensor::filled(vec![3, 12], -(12f64).ln());
        let l = loss_eval(LossKind::Nll, &logp, &Targets::Classes(vec![0, 5, 11])).unwrap();
        assert_abs_diff_eq!(l.item().unwrap(), 12f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(l.item().unwrap(), 2.4849, epsilon = 1e-4);
        assert!(loss_eval(LossKind::Nll, &logp, &Targets::Classes(vec![0, 12, 1])).is_err());
    }

    fn linear_toy() -> (Model, Dataset) {
        let spec = MlpSpec::new(vec![1, 1], Activation::Relu).unwrap();
        let params = ParamVector::new(&spec, vec![0.0, 0.0]).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let data = Dataset::new(
            Tensor::matrix(20, 1, xs).unwrap(),
            None,
            Targets::Values(Tensor::matrix(20, 1, ys).unwrap()),
        )
        .unwrap();
        (Model::mlp(spec, params), data)
    }

    #[test]
    fn linear_regression_converges() {
        let (mut model, data) = linear_toy();
        let mut opt = OptState::new(OptimizerSpec::sgd(0.1, 0.5), 2);
        let mut losses = Vec::new();
        for _ in 0..200 {
            losses.push(train_step(&mut model, &data, LossKind::Mse, &mut opt).unwrap());
        }
        assert!(evaluate(&model, &data, Metric::Mse).unwrap() < 1e-3);
        for w in losses[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (model, data) = linear_toy();
        let cfg = TrainConfig {
            batch_size: 3,
            epochs: 5,
            loss: LossKind::Mse,
            seed: 9,
            optimizer: OptimizerSpec::sgd(0.05, 0.5),
            metric: Metric::Mse,
        };
        let (mut a, mut b) = (model.clone(), model);
        let ha = train_loop(&mut a, &data, None, &cfg).unwrap();
        let hb = train_loop(&mut b, &data, None, &cfg).unwrap();
        assert_eq!(ha.to_csv(), hb.to_csv());
        assert_eq!(a.params(), b.params());
        assert!(ha.to_csv().starts_with("epoch,train_loss,eval_metric\n1,"));
        assert_eq!(ha.epochs.len(), 5);
    }

    #[test]
    fn empty_data_and_bad_config_rejected() {
        let (mut model, data) = linear_toy();
        let empty = data.select(&[]);
        assert!(empty.is_err() || train_loop(&mut model, &empty.unwrap(), None, &base_cfg()).is_err());
        let mut cfg = base_cfg();
        cfg.batch_size = 0;
        assert!(train_loop(&mut model, &data, None, &cfg).is_err());
    }

    fn base_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 1,
            loss: LossKind::Mse,
            seed: 0,
            optimizer: OptimizerSpec::sgd(0.01, 0.5),
            metric: Metric::Mse,
        }
    }

    #[test]
    fn divergence_names_epoch_and_batch() {
        let (mut model, data) = linear_toy();
        let mut cfg = base_cfg();
        cfg.epochs = 50;
        cfg.optimizer = OptimizerSpec::sgd(1e6, 0.9);
        let err = train_loop(&mut model, &data, None, &cfg).unwrap_err().to_string();
        assert!(err.contains("epoch") && err.contains("batch"), "{err}");
    }

    #[test]
    fn classification_metric() {
        let classes: Vec<usize> = (0..120).map(|i| i % 12).collect();
        let constant = Tensor::from_rows(&vec![vec![1.0; 12]; 120]).unwrap();
        let err = metric_of(&constant, &Targets::Classes(classes.clone()), Metric::ClassificationError).unwrap();
        // a constant output always predicts class 0, right on 10 of 120
        assert_abs_diff_eq!(err, 11.0 / 12.0, epsilon = 1e-12);
        let mut perfect = vec![0.0; 120 * 12];
        for (i, &c) in classes.iter().enumerate() {
            perfect[i * 12 + c] = 1.0;
        }
        let perfect = Tensor::matrix(120, 12, perfect).unwrap();
        assert_eq!(metric_of(&perfect, &Targets::Classes(classes), Metric::ClassificationError).unwrap(), 0.0);
        assert_eq!(metric_of(&perfect, &Targets::Values(perfect.clone()), Metric::Mse).unwrap(), 0.0);
    }

    #[test]
    fn nll_training_reduces_loss() {
        let spec = MlpSpec::new(vec![2, 8, 3], Activation::Tanh).unwrap().with_head(Head::LogSoftmax);
        let params = mlp_init(&spec, InitScheme::HeUniform, &mut seeded(4));
        let mut model = Model::mlp(spec, params);
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 - 1.0, ((i * 7) % 5) as f64 / 5.0]).collect();
        let data = Dataset::new(
            Tensor::from_rows(&pts).unwrap(),
            None,
            Targets::Classes((0..30).map(|i| i % 3).collect()),
        )
        .unwrap();
        let cfg = TrainConfig {
            batch_size: 10,
            epochs: 60,
            loss: LossKind::Nll,
            seed: 1,
            optimizer: OptimizerSpec::sgd(0.1, 0.5),
            metric: Metric::ClassificationError,
        };
        let h = train_loop(&mut model, &data, None, &cfg).unwrap();
        assert!(h.epochs[59].train_loss < h.epochs[0].train_loss);
        assert_eq!(h.last().unwrap().eval_metric, 0.0);
    }
}
