//! The two ways of conditioning a network on a task input `I`.
//!
//! A [`HyperModel`] is `h(x, I) = g(x; f(I; θ_f))`: the network `f` emits the
//! whole parameter vector of the primary network `g`, which has no trainable
//! parameters of its own. An [`EmbedModel`] is `h(x, I) = q(x ‖ e(I; θ_e); θ_q)`:
//! `I` is encoded once and concatenated to `x`.
//!
//! Both models keep their trainable parameters in one flat vector so the
//! training loop can treat them uniformly.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nets::{mlp_eval, mlp_forward_graph, mlp_init, InitScheme, MlpSpec, ParamVector};
use crate::tensor::Tensor;

/// `h(x, I) = g(x; f(I; θ_f))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperModel {
    f_spec: MlpSpec,
    g_spec: MlpSpec,
    theta_f: Vec<f64>,
}

impl HyperModel {
    /// `f_spec` must output exactly `g_spec.layout_len()` values. When
    /// `g_spec` has biases, `f` generates them too; a bias-free `g_spec`
    /// means `f` emits weights only.
    pub fn new(f_spec: MlpSpec, g_spec: MlpSpec, theta_f: ParamVector) -> Result<Self> {
        if f_spec.output_dim() != g_spec.layout_len() {
            return Err(Error::Dimension {
                what: "hypernetwork output width vs primary parameter count",
                expected: g_spec.layout_len(),
                actual: f_spec.output_dim(),
            });
        }
        let theta_f = ParamVector::new(&f_spec, theta_f.into_values())?.into_values();
        Ok(Self {
            f_spec,
            g_spec,
            theta_f,
        })
    }

    pub fn init<R: rand::Rng + ?Sized>(
        f_spec: MlpSpec,
        g_spec: MlpSpec,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        let theta = mlp_init(&f_spec, scheme, rng);
        Self::new(f_spec, g_spec, theta)
    }

    /// He-uniform `f` whose output layer is rescaled so that, for standard
    /// normal conditioning inputs, each generated weight of `g` starts with
    /// variance `2 / fan_in` of its layer in `g` (the He variance) and every
    /// generated bias starts at zero.
    pub fn init_hyperfan<R: rand::Rng + ?Sized>(f_spec: MlpSpec, g_spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut theta = mlp_init(&f_spec, InitScheme::HeUniform, rng);
        let f_slots = f_spec.layout();
        let last = f_slots.last().expect("an MLP has at least one layer");
        if last.rows != g_spec.layout_len() {
            return Self::new(f_spec, g_spec, theta);
        }
        let hidden = last.cols as f64;
        let w = theta.weight_mut(last);
        for slot in g_spec.layout() {
            let bound = (6.0 / (hidden * slot.cols as f64)).sqrt();
            let rows = slot.weight_offset..slot.weight_offset + slot.weight_len();
            for r in rows {
                for v in &mut w[r * last.cols..(r + 1) * last.cols] {
                    *v = rng.random_range(-bound..=bound);
                }
            }
            if let Some(off) = slot.bias_offset {
                w[off * last.cols..(off + slot.rows) * last.cols].fill(0.0);
            }
        }
        Self::new(f_spec, g_spec, theta)
    }

    pub fn f_spec(&self) -> &MlpSpec {
        &self.f_spec
    }

    pub fn g_spec(&self) -> &MlpSpec {
        &self.g_spec
    }

    pub fn params(&self) -> &[f64] {
        &self.theta_f
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta_f
    }

    /// `N_f`: only `f` is trained.
    pub fn trainable_params(&self) -> usize {
        self.theta_f.len()
    }

    /// `θ_I = f(I; θ_f)`, the parameters `g` runs with for this `I`.
    pub fn generated_params(&self, cond: &[f64]) -> Result<ParamVector> {
        let theta = mlp_eval(&self.f_spec, &self.theta_f, cond)?;
        ParamVector::new(&self.g_spec, theta)
    }

    /// Records `g(x; f(I; θ))` with `θ` given as a graph node of shape `[N_f]`.
    /// `x` and `cond` are vectors or batches with matching leading dimension.
    pub fn record(&self, g: &mut Graph, theta: Var, x: Var, cond: Var) -> Result<Var> {
        check_pair(g, x, cond, self.g_spec.input_dim(), self.f_spec.input_dim())?;
        let theta_i = mlp_forward_graph(g, &self.f_spec, theta, cond)?;
        mlp_forward_graph(g, &self.g_spec, theta_i, x)
    }

    pub fn forward(&self, x: &Tensor, cond: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let theta = g.constant(Tensor::vector(self.theta_f.clone()));
        let (xv, cv) = (g.constant(x.clone()), g.constant(cond.clone()));
        let out = self.record(&mut g, theta, xv, cv)?;
        Ok(g.value(out).clone())
    }
}

/// `h(x, I) = q(x ‖ e(I; θ_e); θ_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedModel {
    e_spec: MlpSpec,
    q_spec: MlpSpec,
    /// `θ_e ‖ θ_q`.
    params: Vec<f64>,
}

impl EmbedModel {
    pub fn new(
        e_spec: MlpSpec,
        theta_e: ParamVector,
        q_spec: MlpSpec,
        theta_q: ParamVector,
    ) -> Result<Self> {
        let embed_dim = e_spec.output_dim();
        if embed_dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if q_spec.input_dim() <= embed_dim {
            return Err(Error::Dimension {
                what: "primary input width (x plus embedding)",
                expected: embed_dim + 1,
                actual: q_spec.input_dim(),
            });
        }
        let mut params = ParamVector::new(&e_spec, theta_e.into_values())?.into_values();
        params.extend(ParamVector::new(&q_spec, theta_q.into_values())?.into_values());
        Ok(Self {
            e_spec,
            q_spec,
            params,
        })
    }

    pub fn init<R: rand::Rng + ?Sized>(
        e_spec: MlpSpec,
        q_spec: MlpSpec,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        let theta_e = mlp_init(&e_spec, scheme, rng);
        let theta_q = mlp_init(&q_spec, scheme, rng);
        Self::new(e_spec, theta_e, q_spec, theta_q)
    }

    pub fn e_spec(&self) -> &MlpSpec {
        &self.e_spec
    }

    pub fn q_spec(&self) -> &MlpSpec {
        &self.q_spec
    }

    pub fn embed_dim(&self) -> usize {
        self.e_spec.output_dim()
    }

    /// Width of the task input `x`.
    pub fn x_dim(&self) -> usize {
        self.q_spec.input_dim() - self.embed_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn theta_e(&self) -> &[f64] {
        &self.params[..self.e_spec.layout_len()]
    }

    pub fn theta_q(&self) -> &[f64] {
        &self.params[self.e_spec.layout_len()..]
    }

    /// `N_e + N_q`.
    pub fn trainable_params(&self) -> usize {
        self.params.len()
    }

    pub fn embed(&self, cond: &[f64]) -> Result<Vec<f64>> {
        mlp_eval(&self.e_spec, self.theta_e(), cond)
    }

    /// Records `q(x ‖ e(I))` with `θ = θ_e ‖ θ_q` as a graph node.
    pub fn record(&self, g: &mut Graph, theta: Var, x: Var, cond: Var) -> Result<Var> {
        check_pair(g, x, cond, self.x_dim(), self.e_spec.input_dim())?;
        let ne = self.e_spec.layout_len();
        let nq = self.q_spec.layout_len();
        let theta_e = g.slice(theta, 0, 0, ne)?;
        let theta_q = g.slice(theta, 0, ne, nq)?;
        let emb = mlp_forward_graph(g, &self.e_spec, theta_e, cond)?;
        let axis = g.shape(x).len() - 1;
        let joined = g.concat(axis, x, emb)?;
        mlp_forward_graph(g, &self.q_spec, theta_q, joined)
    }

    pub fn forward(&self, x: &Tensor, cond: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let theta = g.constant(Tensor::vector(self.params.clone()));
        let (xv, cv) = (g.constant(x.clone()), g.constant(cond.clone()));
        let out = self.record(&mut g, theta, xv, cv)?;
        Ok(g.value(out).clone())
    }
}

fn check_pair(g: &Graph, x: Var, cond: Var, dx: usize, dc: usize) -> Result<()> {
    let (xs, cs) = (g.shape(x), g.shape(cond));
    if xs.len() != cs.len() || xs.is_empty() || xs.len() > 2 || (xs.len() == 2 && xs[0] != cs[0]) {
        return Err(Error::shape("conditioned forward", xs, cs));
    }
    let (wx, wc) = (xs[xs.len() - 1], cs[cs.len() - 1]);
    if wx != dx {
        return Err(Error::Dimension {
            what: "task input width",
            expected: dx,
            actual: wx,
        });
    }
    if wc != dc {
        return Err(Error::Dimension {
            what: "conditioning input width",
            expected: dc,
            actual: wc,
        });
    }
    Ok(())
}

/// Conditional-neural-process embedding: the mean of `e(Iᵢ)` over a set.
pub fn cnp_embed(e_spec: &MlpSpec, theta_e: &ParamVector, set: &[Tensor]) -> Result<Tensor> {
    let Some(first) = set.first() else {
        return Err(Error::invalid("cannot embed an empty set"));
    };
    let mut acc = vec![0.0; e_spec.output_dim()];
    for item in set {
        if item.shape() != first.shape() {
            return Err(Error::shape("cnp_embed", first.shape(), item.shape()));
        }
        let e = mlp_eval(e_spec, theta_e.values(), item.data())?;
        for (a, v) in acc.iter_mut().zip(e) {
            *a += v;
        }
    }
    let n = set.len() as f64;
    Ok(Tensor::vector(acc.into_iter().map(|v| v / n).collect()))
}

/// An embedding model rewritten as a hypernetwork that only generates the
/// first-layer bias of its primary network.
///
/// With `q`'s first weight matrix split column-wise as `[A | C]` (columns for
/// `x`, then for the embedding), `q(x ‖ e) = g(x; θ(I))` where `g` has first
/// layer `A` and bias `C·e(I) + b¹`, and all deeper layers are `q`'s own.
#[derive(Debug, Clone)]
pub struct EmulatedHypernet {
    e_spec: MlpSpec,
    theta_e: Vec<f64>,
    g_spec: MlpSpec,
    /// `g`'s parameters with the first-layer bias set to `b¹`.
    base: ParamVector,
    /// `C`, row-major `rows × embed_dim`.
    cond_block: Vec<f64>,
    bias_offset: usize,
    rows: usize,
}

pub fn embed_as_hypernet(model: &EmbedModel) -> Result<EmulatedHypernet> {
    let q = model.q_spec();
    if q.depth() < 2 {
        return Err(Error::invalid(
            "the primary network needs a hidden layer to absorb the embedding as a bias",
        ));
    }
    let (dx, k) = (model.x_dim(), model.embed_dim());
    let mut g_widths = q.widths().to_vec();
    g_widths[0] = dx;
    let g_spec = MlpSpec::new(g_widths, q.activation())?.with_head(q.head());

    let q_params = ParamVector::new(q, model.theta_q().to_vec())?;
    let q_layers = q_params.to_layers(q);
    let rows = q.widths()[1];
    let cols = dx + k;
    let (w1, b1) = &q_layers[0];
    let mut direct = Vec::with_capacity(rows * dx);
    let mut cond_block = Vec::with_capacity(rows * k);
    for r in 0..rows {
        direct.extend_from_slice(&w1[r * cols..r * cols + dx]);
        cond_block.extend_from_slice(&w1[r * cols + dx..(r + 1) * cols]);
    }
    let mut g_layers = Vec::with_capacity(q_layers.len());
    g_layers.push((direct, Some(b1.clone().unwrap_or_else(|| vec![0.0; rows]))));
    for (w, b) in &q_layers[1..] {
        let len = w.len() / q.widths()[g_layers.len()];
        g_layers.push((w.clone(), Some(b.clone().unwrap_or_else(|| vec![0.0; len]))));
    }
    let base = ParamVector::from_layers(&g_spec, &g_layers)?;
    let bias_offset = g_spec.layout()[0].bias_offset.expect("g carries biases");
    Ok(EmulatedHypernet {
        e_spec: model.e_spec().clone(),
        theta_e: model.theta_e().to_vec(),
        g_spec,
        base,
        cond_block,
        bias_offset,
        rows,
    })
}

impl EmulatedHypernet {
    pub fn g_spec(&self) -> &MlpSpec {
        &self.g_spec
    }

    /// `C·e(I) + b¹`.
    pub fn generated_bias(&self, cond: &[f64]) -> Result<Vec<f64>> {
        let emb = mlp_eval(&self.e_spec, &self.theta_e, cond)?;
        let k = emb.len();
        let b1 = &self.base.values()[self.bias_offset..self.bias_offset + self.rows];
        Ok((0..self.rows)
            .map(|r| {
                let dot: f64 = self.cond_block[r * k..(r + 1) * k]
                    .iter()
                    .zip(&emb)
                    .map(|(c, e)| c * e)
                    .sum();
                dot + b1[r]
            })
            .collect())
    }

    /// `g`'s full parameter vector for this `I`; only the first-layer bias
    /// segment depends on `I`.
    pub fn generated_params(&self, cond: &[f64]) -> Result<ParamVector> {
        let bias = self.generated_bias(cond)?;
        let mut p = self.base.clone();
        p.values_mut()[self.bias_offset..self.bias_offset + self.rows].copy_from_slice(&bias);
        Ok(p)
    }

    /// Offsets of the generated segment inside [`EmulatedHypernet::generated_params`].
    pub fn generated_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.rows
    }

    pub fn forward(&self, x: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        let p = self.generated_params(cond)?;
        mlp_eval(&self.g_spec, p.values(), x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_grad, max_relative_error};
    use crate::nets::{Activation, LayerSlot};
    use crate::rng::seeded;

    fn uniform() -> InitScheme {
        InitScheme::Uniform { low: -1.0, high: 1.0 }
    }

    fn tiny_hyper(seed: u64) -> HyperModel {
        let g = MlpSpec::new(vec![2, 2, 1], Activation::Tanh).unwrap();
        let f = MlpSpec::new(vec![2, 3, g.layout_len()], Activation::Tanh).unwrap();
        HyperModel::init(f, g, uniform(), &mut seeded(seed)).unwrap()
    }

    fn tiny_embed(seed: u64) -> EmbedModel {
        let e = MlpSpec::new(vec![2, 3, 2], Activation::Tanh).unwrap();
        let q = MlpSpec::new(vec![4, 3, 1], Activation::Tanh).unwrap();
        EmbedModel::init(e, q, uniform(), &mut seeded(seed)).unwrap()
    }

    #[test]
    fn hyperfan_generates_he_scaled_weights() {
        let g_spec = MlpSpec::new(vec![50, 10, 1], Activation::Relu).unwrap();
        let f_spec = MlpSpec::new(vec![20, 100, 100, g_spec.layout_len()], Activation::Relu).unwrap();
        let model = HyperModel::init_hyperfan(f_spec, g_spec.clone(), &mut seeded(2)).unwrap();
        let mut rng = seeded(3);
        let (mut sum_sq, mut n) = (0.0, 0);
        for _ in 0..20 {
            let cond: Vec<f64> = (0..20).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
            let theta = model.generated_params(&cond).unwrap();
            let slots = g_spec.layout();
            sum_sq += theta.weight(&slots[0]).iter().map(|v| v * v).sum::<f64>();
            n += slots[0].weight_len();
            assert!(theta.bias(&slots[0]).unwrap().iter().all(|&b| b == 0.0));
        }
        let var = sum_sq / n as f64;
        // He variance for fan-in 50 is 0.04; allow for the spread of a finite draw
        assert!(var > 0.02 && var < 0.08, "generated weight variance {var}");
    }

    #[test]
    fn hyper_width_checked_at_construction() {
        let g = MlpSpec::new(vec![2, 2, 1], Activation::Relu).unwrap();
        let f = MlpSpec::new(vec![2, 3, 8], Activation::Relu).unwrap();
        let theta = ParamVector::zeros(&f);
        assert!(HyperModel::new(f, g, theta).is_err());
    }

    #[test]
    fn constant_generator_ignores_condition() {
        let g_spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu).unwrap();
        let f_spec = MlpSpec::new(vec![2, 4, g_spec.layout_len()], Activation::Relu).unwrap();
        let mut theta = mlp_init(&f_spec, uniform(), &mut seeded(1));
        let slots = f_spec.layout();
        theta.weight_mut(&slots[1]).fill(0.0);
        let beta = theta.bias(&slots[1]).unwrap().to_vec();
        let model = HyperModel::new(f_spec, g_spec.clone(), theta).unwrap();
        let x = Tensor::vector(vec![0.4, -0.9]);
        let expected = mlp_eval(&g_spec, &beta, x.data()).unwrap();
        let first = model.forward(&x, &Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert!((first.data()[0] - expected[0]).abs() < 1e-12);
        for cond in [[5.0, -3.0], [-1.0, 2.0], [1e6, -1e6]] {
            let out = model.forward(&x, &Tensor::vector(cond.to_vec())).unwrap();
            assert_eq!(out, first);
        }
    }

    #[test]
    fn affine_primary() {
        // g = [1,1] with bias: f emits (w, b).
        let g_spec = MlpSpec::new(vec![1, 1], Activation::Relu).unwrap();
        let f_spec = MlpSpec::new(vec![1, 2], Activation::Relu).unwrap();
        let theta = ParamVector::new(&f_spec, vec![0., 0., 3., -1.]).unwrap();
        let model = HyperModel::new(f_spec, g_spec, theta).unwrap();
        let out = model
            .forward(&Tensor::vector(vec![2.0]), &Tensor::vector(vec![7.0]))
            .unwrap();
        assert_eq!(out.data(), &[5.0]);
    }

    #[test]
    fn batched_forward_matches_single() {
        let m = tiny_hyper(4);
        let xs = Tensor::matrix(3, 2, vec![0.1, 0.2, -0.5, 0.9, 1.3, -0.4]).unwrap();
        let cs = Tensor::matrix(3, 2, vec![1.0, -1.0, 0.3, 0.3, -0.7, 0.2]).unwrap();
        let batch = m.forward(&xs, &cs).unwrap();
        for r in 0..3 {
            let one = m
                .forward(&Tensor::vector(xs.row(r).to_vec()), &Tensor::vector(cs.row(r).to_vec()))
                .unwrap();
            assert!((batch.data()[r] - one.data()[0]).abs() < 1e-14);
        }
        let e = tiny_embed(4);
        let batch = e.forward(&xs, &cs).unwrap();
        for r in 0..3 {
            let one = e
                .forward(&Tensor::vector(xs.row(r).to_vec()), &Tensor::vector(cs.row(r).to_vec()))
                .unwrap();
            assert!((batch.data()[r] - one.data()[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn hyper_gradient_matches_finite_differences() {
        let m = tiny_hyper(8);
        let xs = Tensor::matrix(2, 2, vec![0.3, -0.6, 1.1, 0.2]).unwrap();
        let cs = Tensor::matrix(2, 2, vec![-0.4, 0.8, 0.5, 0.5]).unwrap();
        let loss = |model: &HyperModel, theta: &Tensor| -> Result<(f64, Option<Tensor>)> {
            let mut g = Graph::new();
            let t = g.leaf(theta.clone());
            let (x, c) = (g.constant(xs.clone()), g.constant(cs.clone()));
            let y = model.record(&mut g, t, x, c)?;
            let l = g.sum_of_squares(y)?;
            let grads = g.backward(l)?;
            Ok((g.value(l).item()?, grads.get(t).cloned()))
        };
        let theta = Tensor::vector(m.params().to_vec());
        let (_, analytic) = loss(&m, &theta).unwrap();
        let numeric = finite_diff_grad(|t| loss(&m, t).map(|r| r.0), &theta, 1e-5).unwrap();
        assert!(max_relative_error(&analytic.unwrap(), &numeric) <= 1e-4);
    }

    #[test]
    fn zero_embedding_ignores_condition() {
        let e_spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
        let q_spec = MlpSpec::new(vec![4, 3, 1], Activation::Relu).unwrap();
        let theta_q = mlp_init(&q_spec, uniform(), &mut seeded(2));
        let m = EmbedModel::new(e_spec.clone(), ParamVector::zeros(&e_spec), q_spec.clone(), theta_q.clone())
            .unwrap();
        let x = Tensor::vector(vec![0.5, -0.25]);
        let expected = mlp_eval(&q_spec, theta_q.values(), &[0.5, -0.25, 0.0, 0.0]).unwrap();
        for c in [[1.0, 2.0], [-3.0, 0.5]] {
            assert_eq!(m.forward(&x, &Tensor::vector(c.to_vec())).unwrap().data(), expected.as_slice());
        }
    }

    #[test]
    fn embed_width_checked_at_construction() {
        let e_spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
        let q_spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu).unwrap();
        let r = EmbedModel::new(
            e_spec.clone(),
            ParamVector::zeros(&e_spec),
            q_spec.clone(),
            ParamVector::zeros(&q_spec),
        );
        assert!(r.is_err());
        assert!(MlpSpec::new(vec![2, 3, 0], Activation::Relu).is_err());
    }

    #[test]
    fn cnp_mean_embedding() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let eye = ParamVector::new(&spec, vec![1., 0., 0., 1., 0., 0.]).unwrap();
        let set = [Tensor::vector(vec![1., 3.]), Tensor::vector(vec![3., 1.])];
        assert_eq!(cnp_embed(&spec, &eye, &set).unwrap().data(), &[2., 2.]);
        assert_eq!(cnp_embed(&spec, &eye, &set[..1]).unwrap().data(), &[1., 3.]);
        let same = vec![Tensor::vector(vec![0.5, -2.0]); 4];
        assert_eq!(cnp_embed(&spec, &eye, &same).unwrap().data(), &[0.5, -2.0]);
        assert!(cnp_embed(&spec, &eye, &[]).is_err());
    }

    #[test]
    fn emulation_bias_and_segment() {
        let m = tiny_embed(12);
        let emu = embed_as_hypernet(&m).unwrap();
        let a = emu.generated_params(&[0.3, 0.1]).unwrap();
        let b = emu.generated_params(&[-1.0, 2.0]).unwrap();
        let range = emu.generated_range();
        for (i, (u, v)) in a.values().iter().zip(b.values()).enumerate() {
            if !range.contains(&i) {
                assert_eq!(u, v);
            }
        }
        assert_ne!(&a.values()[range.clone()], &b.values()[range]);

        let e_spec = m.e_spec().clone();
        let zero_e = EmbedModel::new(
            e_spec.clone(),
            ParamVector::zeros(&e_spec),
            m.q_spec().clone(),
            ParamVector::new(m.q_spec(), m.theta_q().to_vec()).unwrap(),
        )
        .unwrap();
        let emu = embed_as_hypernet(&zero_e).unwrap();
        let q_params = ParamVector::new(m.q_spec(), m.theta_q().to_vec()).unwrap();
        let first: LayerSlot = m.q_spec().layout()[0];
        assert_eq!(emu.generated_bias(&[4.0, 4.0]).unwrap(), q_params.bias(&first).unwrap());
    }

    #[test]
    fn emulation_needs_hidden_layer() {
        let e = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let q = MlpSpec::new(vec![4, 1], Activation::Relu).unwrap();
        let m = EmbedModel::init(e, q, uniform(), &mut seeded(0)).unwrap();
        assert!(embed_as_hypernet(&m).is_err());
    }

    #[test]
    fn trainable_counts() {
        let h = tiny_hyper(0);
        assert_eq!(h.trainable_params(), h.f_spec().layout_len());
        let e = tiny_embed(0);
        assert_eq!(e.trainable_params(), e.e_spec().layout_len() + e.q_spec().layout_len());
    }
}
