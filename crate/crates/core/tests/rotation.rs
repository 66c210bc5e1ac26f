use hypernet::data::{make_rotation_pair, rotate_image, rotation_label, Interpolation};
use hypernet::rng::seeded;
use hypernet::Tensor;
use proptest::prelude::*;
use rand::Rng;

/// Nearest multiple of 30 by raw distance, ties to the lower angle.
fn label_oracle(a: f64) -> usize {
    let k = (a / 30.0).floor() as usize;
    let lower = a - 30.0 * k as f64;
    if k >= 11 || lower <= 15.0 { k.min(11) } else { k + 1 }
}

#[test]
fn ten_thousand_uniform_angles() {
    let mut rng = seeded(5);
    let mut counts = [0usize; 12];
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(0.0..360.0);
        let l = rotation_label(a).unwrap();
        assert_eq!(l, label_oracle(a), "angle {a}");
        counts[l] += 1;
    }
    // bin 0 covers [0, 15), bin 11 covers [315, 360)
    assert!((counts[0] as f64 / 1e4 - 15.0 / 360.0).abs() < 0.01, "{counts:?}");
    assert!((counts[11] as f64 / 1e4 - 45.0 / 360.0).abs() < 0.015, "{counts:?}");
    assert!(rotation_label(360.0).is_err());
    assert!(rotation_label(-1.0).is_err());
}

#[test]
fn boundaries() {
    assert_eq!(rotation_label(15.0).unwrap(), 0);
    assert_eq!(rotation_label(15.0001).unwrap(), 1);
    assert_eq!(rotation_label(345.0).unwrap(), 11);
    assert_eq!(rotation_label(359.9).unwrap(), 11);
}

fn image(c: usize, n: usize, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    Tensor::new(vec![c, n, n], (0..c * n * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

proptest! {
    #[test]
    fn quarter_turn_permutes_pixels(n in 1usize..9, c in 1usize..4, seed in any::<u64>()) {
        let img = image(c, n, seed);
        for mode in [Interpolation::Bilinear, Interpolation::Nearest] {
            let r = rotate_image(&img, 90.0, mode).unwrap();
            for ch in 0..c {
                for y in 0..n {
                    for x in 0..n {
                        let want = img.data()[(ch * n + x) * n + (n - 1 - y)];
                        prop_assert!((r.data()[(ch * n + y) * n + x] - want).abs() < 1e-9);
                    }
                }
            }
            let same = rotate_image(&img, 0.0, mode).unwrap();
            prop_assert_eq!(same.data(), img.data());
        }
    }

    #[test]
    fn rotation_pairs_are_labelled_and_signed(seed in any::<u64>()) {
        let img = image(1, 6, seed);
        let s = make_rotation_pair(&img, Interpolation::Bilinear, &mut seeded(seed)).unwrap();
        prop_assert_eq!(s.label, label_oracle(s.angle));
        prop_assert!(s.x.iter().chain(&s.cond).all(|v| (-1.0..=1.0).contains(v)));
        for (c, p) in s.cond.iter().zip(img.data()) {
            prop_assert!((c - (2.0 * p - 1.0)).abs() < 1e-15);
        }
    }
}
