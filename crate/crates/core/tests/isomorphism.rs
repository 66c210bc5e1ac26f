use hypernet::analysis::{
    apply_isomorphism, are_isomorphic, detect_clones, is_minimal, is_normal, merge_clone_pair, witnesses, ClonePair,
    IsoOptions, Isomorphism, Line,
};
use hypernet::nets::{mlp_eval, mlp_init, Activation, InitScheme, MlpSpec, ParamVector};
use hypernet::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

const INIT: InitScheme = InitScheme::Uniform { low: -1.0, high: 1.0 };

fn arb_spec(max_hidden: usize) -> impl Strategy<Value = MlpSpec> {
    (1usize..4, prop::collection::vec(1..=max_hidden, 1..3), 1usize..3, any::<bool>())
        .prop_map(|(d, hidden, o, b)| {
            let mut w = vec![d];
            w.extend(hidden);
            w.push(o);
            MlpSpec::new(w, Activation::Tanh).unwrap().with_biases(b)
        })
}

/// Brute force over every tuple of hidden permutations, reading weights
/// directly from the layer matrices.
fn brute_force(spec: &MlpSpec, a: &ParamVector, b: &ParamVector, tol: f64) -> bool {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        (0..n).fold(vec![vec![]], |acc, k| {
            acc.into_iter()
                .flat_map(|p| (0..=p.len()).map(move |i| {
                    let mut q = p.clone();
                    q.insert(i, k);
                    q
                }))
                .collect()
        })
    }
    let w = spec.widths();
    let options: Vec<Vec<Vec<usize>>> = w[1..w.len() - 1].iter().map(|&n| perms(n)).collect();
    let tuples = options.iter().fold(vec![vec![]], |acc: Vec<Vec<Vec<usize>>>, opts| {
        acc.into_iter()
            .flat_map(|t| opts.iter().map(move |p| {
                let mut t = t.clone();
                t.push(p.clone());
                t
            }))
            .collect()
    });
    let (la, lb) = (a.to_layers(spec), b.to_layers(spec));
    tuples.into_iter().any(|hidden| {
        let mut p: Vec<Vec<usize>> = vec![(0..w[0]).collect()];
        p.extend(hidden);
        p.push((0..w[w.len() - 1]).collect());
        (0..la.len()).all(|l| {
            let (rows, cols) = (w[l + 1], w[l]);
            (0..rows).all(|r| {
                (0..cols).all(|c| (lb[l].0[r * cols + c] - la[l].0[p[l + 1][r] * cols + p[l][c]]).abs() <= tol)
                    && match (&la[l].1, &lb[l].1) {
                        (Some(x), Some(y)) => (y[r] - x[p[l + 1][r]]).abs() <= tol,
                        _ => true,
                    }
            })
        })
    })
}

proptest! {
    #[test]
    fn permuted_networks_are_found_and_compute_the_same_function(spec in arb_spec(10), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = mlp_init(&spec, INIT, &mut rng);
        let iso = Isomorphism::random(&spec, &mut rng);
        let b = apply_isomorphism(&spec, &a, &iso).unwrap();
        prop_assert!(witnesses(&spec, &a, &b, &iso, 1e-12));
        let found = are_isomorphic(&spec, &a, &b, &IsoOptions::default()).unwrap();
        prop_assert!(found.is_some());
        prop_assert!(witnesses(&spec, &a, &b, &found.unwrap(), 1e-9));
        let back = apply_isomorphism(&spec, &b, &iso.inverse()).unwrap();
        prop_assert_eq!(back, a.clone());
        let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        for (u, v) in mlp_eval(&spec, a.values(), &x).unwrap().iter().zip(mlp_eval(&spec, b.values(), &x).unwrap()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn search_agrees_with_brute_force(spec in arb_spec(5), seed in any::<u64>(), perturb in any::<bool>()) {
        let mut rng = seeded(seed);
        let a = mlp_init(&spec, INIT, &mut rng);
        let mut b = apply_isomorphism(&spec, &a, &Isomorphism::random(&spec, &mut rng)).unwrap();
        if perturb {
            let i = rng.random_range(0..b.len());
            b.values_mut()[i] += rng.random_range(0.01..0.5);
        }
        let opts = IsoOptions::default();
        prop_assert_eq!(are_isomorphic(&spec, &a, &b, &opts).unwrap().is_some(), brute_force(&spec, &a, &b, opts.tol));
    }
}

#[test]
fn merged_clones_keep_the_function() {
    let mut rng = seeded(3);
    for _ in 0..30 {
        let width = rng.random_range(2..7);
        let spec = MlpSpec::new(vec![3, width, 4, 2], Activation::Elu).unwrap();
        let mut p = mlp_init(&spec, INIT, &mut rng);
        let slot = spec.layout()[0];
        let (s, d) = (0, width - 1);
        let row = p.weight(&slot)[s * 3..s * 3 + 3].to_vec();
        p.weight_mut(&slot)[d * 3..d * 3 + 3].copy_from_slice(&row);
        let bias = p.bias(&slot).unwrap()[s];
        p.bias_mut(&slot).unwrap()[d] = bias;
        let clones = detect_clones(&spec, &p, 1e-12);
        assert_eq!(clones, vec![ClonePair { layer: 0, first: s, second: d }]);
        assert!(!is_normal(&spec, &p, 1e-12));
        let (merged_spec, merged) = merge_clone_pair(&spec, &p, clones[0]).unwrap();
        assert_eq!(merged_spec.widths()[1], width - 1);
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y0 = mlp_eval(&spec, p.values(), &x).unwrap();
            let y1 = mlp_eval(&merged_spec, merged.values(), &x).unwrap();
            for (u, v) in y0.iter().zip(&y1) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn zero_lines_are_reported() {
    let spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu).unwrap();
    let mut p = mlp_init(&spec, INIT, &mut seeded(1));
    assert!(is_minimal(&spec, &p, 1e-9).is_ok());
    let out = spec.layout()[1];
    p.weight_mut(&out)[2] = 0.0;
    let z = is_minimal(&spec, &p, 1e-9).unwrap_err();
    assert_eq!((z.layer, z.line, z.index), (1, Line::Column, 2));
}
