//! Identifiability checks on MLP parameterizations: clone neurons,
//! minimality, normality, and permutation isomorphisms between two
//! parameter vectors of the same architecture.
//!
//! Layer indices below are 0-based indices of weight matrices: layer `i`
//! is `Wⁱ⁺¹` in 1-based notation and its rows are the neurons of hidden
//! layer `i + 1`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nets::{LayerSlot, MlpSpec, ParamVector};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 8;

/// One permutation per layer of neurons, input and output layers included.
///
/// `perms[i][j]` is the neuron of the source network that lands at position
/// `j` of layer `i`. The first and last permutations are always identities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isomorphism {
    perms: Vec<Vec<usize>>,
}

impl Isomorphism {
    pub fn new(spec: &MlpSpec, perms: Vec<Vec<usize>>) -> Result<Self> {
        let widths = spec.widths();
        if perms.len() != widths.len() {
            return Err(Error::Dimension {
                what: "permutation count",
                expected: widths.len(),
                actual: perms.len(),
            });
        }
        for (p, &w) in perms.iter().zip(widths) {
            if p.len() != w {
                return Err(Error::Dimension {
                    what: "permutation size",
                    expected: w,
                    actual: p.len(),
                });
            }
            let mut seen = vec![false; w];
            for &j in p {
                if j >= w || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::invalid(format!("{p:?} is not a permutation of 0..{w}")));
                }
            }
        }
        let is_identity = |p: &[usize]| p.iter().enumerate().all(|(i, &j)| i == j);
        if !is_identity(&perms[0]) || !is_identity(perms.last().expect("non-empty")) {
            return Err(Error::invalid("input and output permutations must be identities"));
        }
        Ok(Self { perms })
    }

    pub fn identity(spec: &MlpSpec) -> Self {
        Self {
            perms: spec.widths().iter().map(|&w| (0..w).collect()).collect(),
        }
    }

    /// Uniformly random permutations on every hidden layer.
    pub fn random<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut iso = Self::identity(spec);
        let last = iso.perms.len() - 1;
        for p in &mut iso.perms[1..last] {
            p.shuffle(rng);
        }
        iso
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn inverse(&self) -> Self {
        let perms = self
            .perms
            .iter()
            .map(|p| {
                let mut inv = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j] = i;
                }
                inv
            })
            .collect();
        Self { perms }
    }

    /// The isomorphism equivalent to applying `self` and then `then`.
    pub fn then(&self, then: &Isomorphism) -> Self {
        let perms = self
            .perms
            .iter()
            .zip(&then.perms)
            .map(|(a, b)| b.iter().map(|&j| a[j]).collect())
            .collect();
        Self { perms }
    }

    pub fn is_identity(&self) -> bool {
        self.perms
            .iter()
            .all(|p| p.iter().enumerate().all(|(i, &j)| i == j))
    }
}

/// Permutes rows, columns and biases: `Vᵢ[j,l] = Wᵢ[γᵢ₊₁(j), γᵢ(l)]` and
/// `dᵢ[j] = bᵢ[γᵢ₊₁(j)]`.
pub fn apply_isomorphism(
    spec: &MlpSpec,
    params: &ParamVector,
    iso: &Isomorphism,
) -> Result<ParamVector> {
    check_params(spec, params)?;
    if iso.perms.len() != spec.widths().len()
        || iso.perms.iter().zip(spec.widths()).any(|(p, &w)| p.len() != w)
    {
        return Err(Error::invalid(format!(
            "isomorphism sizes {:?} do not match widths {:?}",
            iso.perms.iter().map(Vec::len).collect::<Vec<_>>(),
            spec.widths()
        )));
    }
    let mut out = params.clone();
    for (i, slot) in spec.layout().iter().enumerate() {
        let (rows, cols) = (&iso.perms[i + 1], &iso.perms[i]);
        let w = params.weight(slot);
        let v = out.weight_mut(slot);
        for j in 0..slot.rows {
            for l in 0..slot.cols {
                v[j * slot.cols + l] = w[rows[j] * slot.cols + cols[l]];
            }
        }
        if let Some(b) = params.bias(slot) {
            let b = b.to_vec();
            let d = out.bias_mut(slot).expect("same spec");
            for j in 0..slot.rows {
                d[j] = b[rows[j]];
            }
        }
    }
    Ok(out)
}

/// Two neurons of the same hidden layer with identical incoming weights and
/// bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClonePair {
    pub layer: usize,
    pub first: usize,
    pub second: usize,
}

/// All clone pairs (`first < second`) within `tol` in sup-norm over
/// `(bias, incoming row)`. Only hidden layers are inspected.
pub fn detect_clones(spec: &MlpSpec, params: &ParamVector, tol: f64) -> Vec<ClonePair> {
    let slots = spec.layout();
    let mut pairs = Vec::new();
    for (layer, slot) in slots.iter().enumerate().take(slots.len() - 1) {
        for first in 0..slot.rows {
            for second in first + 1..slot.rows {
                if neuron_distance(params, slot, first, params, slot, second, None) <= tol {
                    pairs.push(ClonePair {
                        layer,
                        first,
                        second,
                    });
                }
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Line {
    Row,
    Column,
}

/// A weight matrix row or column whose entries are all within `tol` of 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroLine {
    pub layer: usize,
    pub line: Line,
    pub index: usize,
}

/// `Ok(())` when no weight matrix has an (approximately) zero row or column,
/// otherwise the first offending line.
pub fn is_minimal(spec: &MlpSpec, params: &ParamVector, tol: f64) -> std::result::Result<(), ZeroLine> {
    for (layer, slot) in spec.layout().iter().enumerate() {
        let w = params.weight(slot);
        for r in 0..slot.rows {
            if w[r * slot.cols..(r + 1) * slot.cols].iter().all(|v| v.abs() <= tol) {
                return Err(ZeroLine {
                    layer,
                    line: Line::Row,
                    index: r,
                });
            }
        }
        for c in 0..slot.cols {
            if (0..slot.rows).all(|r| w[r * slot.cols + c].abs() <= tol) {
                return Err(ZeroLine {
                    layer,
                    line: Line::Column,
                    index: c,
                });
            }
        }
    }
    Ok(())
}

/// Minimal and free of clones.
pub fn is_normal(spec: &MlpSpec, params: &ParamVector, tol: f64) -> bool {
    is_minimal(spec, params, tol).is_ok() && detect_clones(spec, params, tol).is_empty()
}

/// Removes `pair.second` and adds its outgoing weights onto `pair.first`.
///
/// For true clones this leaves the network function unchanged.
pub fn merge_clone_pair(
    spec: &MlpSpec,
    params: &ParamVector,
    pair: ClonePair,
) -> Result<(MlpSpec, ParamVector)> {
    check_params(spec, params)?;
    let slots = spec.layout();
    if pair.layer + 1 >= slots.len() || pair.first == pair.second || pair.second >= slots[pair.layer].rows
        || pair.first >= slots[pair.layer].rows
    {
        return Err(Error::invalid(format!("{pair:?} is not a hidden neuron pair")));
    }
    let mut layers = params.to_layers(spec);
    let (cols_in, keep) = (slots[pair.layer].cols, pair.second);
    {
        let (w, b) = &mut layers[pair.layer];
        w.drain(keep * cols_in..(keep + 1) * cols_in);
        if let Some(b) = b {
            b.remove(keep);
        }
    }
    {
        let next = &slots[pair.layer + 1];
        let (w, _) = &mut layers[pair.layer + 1];
        let mut merged = Vec::with_capacity(next.rows * (next.cols - 1));
        for r in 0..next.rows {
            let row = &w[r * next.cols..(r + 1) * next.cols];
            for (c, &v) in row.iter().enumerate() {
                if c == keep {
                    continue;
                }
                merged.push(if c == pair.first { v + row[keep] } else { v });
            }
        }
        *w = merged;
    }
    let mut widths = spec.widths().to_vec();
    widths[pair.layer + 1] -= 1;
    let new_spec = MlpSpec::new(widths, spec.activation())?
        .with_head(spec.head())
        .with_biases(spec.use_biases());
    let new_params = ParamVector::from_layers(&new_spec, &layers)?;
    Ok((new_spec, new_params))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoOptions {
    pub tol: f64,
    /// Widest hidden layer for which the exact search is used.
    pub exhaustive_cap: usize,
}

impl Default for IsoOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

/// How [`are_isomorphic`] searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exact,
    CanonicalSort,
}

pub fn search_mode(spec: &MlpSpec, opts: &IsoOptions) -> SearchMode {
    let widths = spec.widths();
    let hidden = &widths[1..widths.len() - 1];
    if hidden.iter().all(|&w| w <= opts.exhaustive_cap) {
        SearchMode::Exact
    } else {
        SearchMode::CanonicalSort
    }
}

/// Finds an isomorphism taking `a` to `b`, if one exists.
///
/// Exact backtracking search is used when every hidden layer is at most
/// `opts.exhaustive_cap` wide; otherwise both networks are brought to a
/// canonical neuron order and compared, which can miss isomorphisms between
/// networks that contain clones. Any returned witness has been verified.
pub fn are_isomorphic(
    spec: &MlpSpec,
    a: &ParamVector,
    b: &ParamVector,
    opts: &IsoOptions,
) -> Result<Option<Isomorphism>> {
    check_params(spec, a)?;
    check_params(spec, b)?;
    let candidate = match search_mode(spec, opts) {
        SearchMode::Exact => exact_search(spec, a, b, opts.tol),
        SearchMode::CanonicalSort => {
            let ca = canonical_order(spec, a);
            let cb = canonical_order(spec, b);
            Some(ca.then(&cb.inverse()))
        }
    };
    Ok(candidate.filter(|iso| witnesses(spec, a, b, iso, opts.tol)))
}

/// Whether `apply_isomorphism(a, iso)` reproduces `b` within `tol`.
pub fn witnesses(spec: &MlpSpec, a: &ParamVector, b: &ParamVector, iso: &Isomorphism, tol: f64) -> bool {
    apply_isomorphism(spec, a, iso).is_ok_and(|mapped| {
        mapped
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| (x - y).abs() <= tol)
    })
}

fn check_params(spec: &MlpSpec, params: &ParamVector) -> Result<()> {
    if params.len() != spec.layout_len() {
        return Err(Error::Dimension {
            what: "parameter vector length",
            expected: spec.layout_len(),
            actual: params.len(),
        });
    }
    Ok(())
}

/// Sup-norm distance between neuron `ja` of `a` and neuron `jb` of `b`,
/// comparing bias and incoming weights. `col_perm` maps a column of `b` to
/// the column of `a` it should be compared with.
fn neuron_distance(
    a: &ParamVector,
    slot: &LayerSlot,
    ja: usize,
    b: &ParamVector,
    slot_b: &LayerSlot,
    jb: usize,
    col_perm: Option<&[usize]>,
) -> f64 {
    let wa = &a.weight(slot)[ja * slot.cols..(ja + 1) * slot.cols];
    let wb = &b.weight(slot_b)[jb * slot.cols..(jb + 1) * slot.cols];
    let bias = |p: &ParamVector, s: &LayerSlot, j: usize| p.bias(s).map_or(0.0, |b| b[j]);
    let mut d = (bias(a, slot, ja) - bias(b, slot_b, jb)).abs();
    for (l, &vb) in wb.iter().enumerate() {
        let la = col_perm.map_or(l, |p| p[l]);
        d = d.max((wa[la] - vb).abs());
    }
    d
}

fn exact_search(spec: &MlpSpec, a: &ParamVector, b: &ParamVector, tol: f64) -> Option<Isomorphism> {
    let slots = spec.layout();
    let mut perms: Vec<Vec<usize>> = vec![(0..spec.input_dim()).collect()];
    if search_layer(&slots, a, b, tol, 0, &mut perms) {
        Some(Isomorphism { perms })
    } else {
        None
    }
}

fn search_layer(
    slots: &[LayerSlot],
    a: &ParamVector,
    b: &ParamVector,
    tol: f64,
    layer: usize,
    perms: &mut Vec<Vec<usize>>,
) -> bool {
    let Some(slot) = slots.get(layer) else {
        return true;
    };
    let col_perm = perms[layer].clone();
    let last = layer + 1 == slots.len();
    // candidates[j]: neurons of `a` that neuron j of `b` may come from.
    let candidates: Vec<Vec<usize>> = (0..slot.rows)
        .map(|jb| {
            let range: Vec<usize> = if last { vec![jb] } else { (0..slot.rows).collect() };
            range
                .into_iter()
                .filter(|&ja| neuron_distance(a, slot, ja, b, slot, jb, Some(&col_perm)) <= tol)
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return false;
    }
    let mut assignment = vec![usize::MAX; slot.rows];
    let mut used = vec![false; slot.rows];
    assign(slots, a, b, tol, layer, perms, &candidates, 0, &mut assignment, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    slots: &[LayerSlot],
    a: &ParamVector,
    b: &ParamVector,
    tol: f64,
    layer: usize,
    perms: &mut Vec<Vec<usize>>,
    candidates: &[Vec<usize>],
    j: usize,
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if j == candidates.len() {
        perms.push(assignment.clone());
        if search_layer(slots, a, b, tol, layer + 1, perms) {
            return true;
        }
        perms.truncate(layer + 1);
        return false;
    }
    for &c in &candidates[j] {
        if used[c] {
            continue;
        }
        used[c] = true;
        assignment[j] = c;
        if assign(slots, a, b, tol, layer, perms, candidates, j + 1, assignment, used) {
            return true;
        }
        used[c] = false;
    }
    false
}

/// The isomorphism sorting every hidden layer by its `(bias, incoming row)`
/// key after the previous layer has been sorted.
pub fn canonical_order(spec: &MlpSpec, params: &ParamVector) -> Isomorphism {
    let slots = spec.layout();
    let mut perms: Vec<Vec<usize>> = vec![(0..spec.input_dim()).collect()];
    for (layer, slot) in slots.iter().enumerate() {
        if layer + 1 == slots.len() {
            perms.push((0..slot.rows).collect());
            break;
        }
        let cols = &perms[layer];
        let w = params.weight(slot);
        let bias = params.bias(slot);
        let key = |j: usize| -> Vec<f64> {
            let mut k = Vec::with_capacity(slot.cols + 1);
            k.push(bias.map_or(0.0, |b| b[j]));
            k.extend(cols.iter().map(|&l| w[j * slot.cols + l]));
            k
        };
        let keys: Vec<Vec<f64>> = (0..slot.rows).map(key).collect();
        let mut order: Vec<usize> = (0..slot.rows).collect();
        order.sort_by(|&x, &y| {
            keys[x]
                .iter()
                .zip(&keys[y])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
        perms.push(order);
    }
    Isomorphism { perms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{mlp_eval, mlp_init, Activation, InitScheme};
    use crate::rng::seeded;

    fn net(widths: &[usize], seed: u64) -> (MlpSpec, ParamVector) {
        let spec = MlpSpec::new(widths.to_vec(), Activation::Tanh).unwrap();
        let params = mlp_init(&spec, InitScheme::Uniform { low: -1.0, high: 1.0 }, &mut seeded(seed));
        (spec, params)
    }

    #[test]
    fn identity_and_inverse() {
        let (spec, p) = net(&[3, 4, 5, 2], 1);
        let id = Isomorphism::identity(&spec);
        assert_eq!(apply_isomorphism(&spec, &p, &id).unwrap(), p);
        let iso = Isomorphism::random(&spec, &mut seeded(2));
        let q = apply_isomorphism(&spec, &p, &iso).unwrap();
        assert_eq!(apply_isomorphism(&spec, &q, &iso.inverse()).unwrap(), p);
        assert!(iso.then(&iso.inverse()).is_identity());
    }

    #[test]
    fn isomorphism_validation() {
        let (spec, p) = net(&[2, 3, 1], 1);
        assert!(Isomorphism::new(&spec, vec![vec![0, 1], vec![2, 0, 1], vec![0]]).is_ok());
        assert!(Isomorphism::new(&spec, vec![vec![1, 0], vec![2, 0, 1], vec![0]]).is_err());
        assert!(Isomorphism::new(&spec, vec![vec![0, 1], vec![0, 0, 1], vec![0]]).is_err());
        assert!(Isomorphism::new(&spec, vec![vec![0, 1], vec![0, 1], vec![0]]).is_err());
        let (other, _) = net(&[2, 4, 1], 1);
        let bad = Isomorphism::identity(&other);
        assert!(apply_isomorphism(&spec, &p, &bad).is_err());
    }

    #[test]
    fn composition_order() {
        let (spec, p) = net(&[2, 4, 3, 1], 5);
        let a = Isomorphism::random(&spec, &mut seeded(6));
        let b = Isomorphism::random(&spec, &mut seeded(7));
        let step = apply_isomorphism(&spec, &apply_isomorphism(&spec, &p, &a).unwrap(), &b).unwrap();
        assert_eq!(apply_isomorphism(&spec, &p, &a.then(&b)).unwrap(), step);
    }

    #[test]
    fn isomorphic_networks_compute_the_same_function() {
        let (spec, p) = net(&[3, 6, 5, 2], 9);
        let iso = Isomorphism::random(&spec, &mut seeded(10));
        let q = apply_isomorphism(&spec, &p, &iso).unwrap();
        let x = [0.3, -1.2, 0.8];
        let (ya, yb) = (mlp_eval(&spec, p.values(), &x).unwrap(), mlp_eval(&spec, q.values(), &x).unwrap());
        for (u, v) in ya.iter().zip(&yb) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn clones_detected() {
        let spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu).unwrap();
        let p = ParamVector::from_layers(
            &spec,
            &[
                (vec![1., 2., 0.5, 0.5, 1., 2.], Some(vec![0.1, 0.2, 0.1])),
                (vec![1., 1., 1.], Some(vec![0.])),
            ],
        )
        .unwrap();
        assert_eq!(
            detect_clones(&spec, &p, 0.0),
            vec![ClonePair { layer: 0, first: 0, second: 2 }]
        );
        assert_eq!(detect_clones(&spec, &p, f64::INFINITY).len(), 3);
        assert!(!is_normal(&spec, &p, DEFAULT_TOL));
    }

    #[test]
    fn output_layer_never_reports_clones() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
        let p = ParamVector::new(&spec, vec![1., 1., 1., 1., 0., 0.]).unwrap();
        assert!(detect_clones(&spec, &p, 0.0).is_empty());
    }

    #[test]
    fn minimality_witnesses() {
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Relu).unwrap();
        let eye = ParamVector::from_layers(
            &spec,
            &[(vec![1., 0., 0., 1.], Some(vec![0., 0.])), (vec![1., 1.], Some(vec![0.]))],
        )
        .unwrap();
        assert_eq!(is_minimal(&spec, &eye, DEFAULT_TOL), Ok(()));

        let zero_row = ParamVector::from_layers(
            &spec,
            &[(vec![1., 2., 0., 0.], Some(vec![0., 0.])), (vec![1., 1.], Some(vec![0.]))],
        )
        .unwrap();
        assert_eq!(
            is_minimal(&spec, &zero_row, DEFAULT_TOL),
            Err(ZeroLine { layer: 0, line: Line::Row, index: 1 })
        );

        let zero_col = ParamVector::from_layers(
            &spec,
            &[(vec![1., 0., 3., 0.], Some(vec![0., 1.])), (vec![1., 1.], Some(vec![0.]))],
        )
        .unwrap();
        assert_eq!(
            is_minimal(&spec, &zero_col, DEFAULT_TOL),
            Err(ZeroLine { layer: 0, line: Line::Column, index: 1 })
        );
        assert!(!is_normal(&spec, &zero_col, DEFAULT_TOL));
    }

    #[test]
    fn exact_and_canonical_find_constructed_witness() {
        let (spec, a) = net(&[3, 5, 4, 2], 21);
        let iso = Isomorphism::random(&spec, &mut seeded(22));
        let b = apply_isomorphism(&spec, &a, &iso).unwrap();
        let exact = are_isomorphic(&spec, &a, &b, &IsoOptions::default()).unwrap();
        assert!(exact.is_some_and(|w| witnesses(&spec, &a, &b, &w, DEFAULT_TOL)));
        let canonical = IsoOptions { exhaustive_cap: 0, ..IsoOptions::default() };
        assert_eq!(search_mode(&spec, &canonical), SearchMode::CanonicalSort);
        let found = are_isomorphic(&spec, &a, &b, &canonical).unwrap();
        assert!(found.is_some_and(|w| witnesses(&spec, &a, &b, &w, DEFAULT_TOL)));
    }

    #[test]
    fn equal_networks_give_identity() {
        let (spec, a) = net(&[3, 4, 2], 3);
        let w = are_isomorphic(&spec, &a, &a, &IsoOptions::default()).unwrap().unwrap();
        assert!(w.is_identity());
    }

    #[test]
    fn perturbed_network_is_not_isomorphic() {
        let (spec, a) = net(&[3, 4, 2], 3);
        let mut b = a.clone();
        b.values_mut()[5] += 1.0;
        assert!(are_isomorphic(&spec, &a, &b, &IsoOptions::default()).unwrap().is_none());
        let other = MlpSpec::new(vec![3, 5, 2], Activation::Tanh).unwrap();
        assert!(are_isomorphic(&other, &a, &b, &IsoOptions::default()).is_err());
    }

    #[test]
    fn merging_clones_preserves_function() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Elu).unwrap();
        let p = ParamVector::from_layers(
            &spec,
            &[
                (vec![0.7, -0.2, 1.1, 0.4, 0.7, -0.2], Some(vec![0.3, -0.5, 0.3])),
                (vec![1.5, -0.6, 0.25, 0.1, 0.9, -2.0], Some(vec![0.05, -0.05])),
            ],
        )
        .unwrap();
        let pair = detect_clones(&spec, &p, 0.0)[0];
        let (small, q) = merge_clone_pair(&spec, &p, pair).unwrap();
        assert_eq!(small.widths(), &[2, 2, 2]);
        for x in [[0.1, 0.2], [-1.0, 3.0], [2.5, -0.7]] {
            let (u, v) = (mlp_eval(&spec, p.values(), &x).unwrap(), mlp_eval(&small, q.values(), &x).unwrap());
            for (s, t) in u.iter().zip(&v) {
                assert!((s - t).abs() <= 1e-12);
            }
        }
    }
}
