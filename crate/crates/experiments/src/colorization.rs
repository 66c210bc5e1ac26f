//! Colorization: given a grayscale image `I` and polynomial features of a
//! pixel position, regress the pixel's RGB value in `[−1, 1]`.

use std::path::PathBuf;

use hypernet::data::{colorization_samples, CoordMode, ImageDataset, COORD_FEATURES};
use hypernet::nets::{Activation, MlpSpec};
use hypernet::par;
use hypernet::rng::{derive_seed, derived, tag};
use hypernet::train::{evaluate, fit, Dataset, LossKind, Metric, OptimizerSpec, Targets, TrainConfig};
use hypernet::Tensor;
use rand::Rng;

use crate::config::{Config, Scale};
use crate::datasets::ImageSource;
use crate::models::{depth_widths, Init, ModelPair};
use crate::report::ExperimentReport;
use crate::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ColorizationExperiment {
    pub data_dir: PathBuf,
    pub depths: Vec<usize>,
    pub hidden: usize,
    pub out_dim: usize,
    pub g_hidden: usize,
    pub train_images: usize,
    pub test_images: usize,
    /// Random pixels drawn per image.
    pub pixels_per_image: usize,
    pub coords: CoordMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub repetitions: usize,
    pub init: Init,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "depths",
    "hidden",
    "out_dim",
    "g_hidden",
    "train_images",
    "test_images",
    "pixels_per_image",
    "coords",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "repetitions",
    "init",
    "hyper_init",
];

impl ColorizationExperiment {
    pub fn from_config(cfg: &Config, scale: Scale, seed: u64, data_dir: PathBuf) -> Result<Self> {
        cfg.check_keys("colorization", KEYS)?;
        let coords = match cfg.raw("coords").unwrap_or("normalized") {
            "normalized" => CoordMode::Normalized,
            "raw" => CoordMode::Raw,
            other => return Err(ExperimentError::Invalid(format!("coords must be normalized or raw, got {other:?}"))),
        };
        let (train_default, test_default) = match scale {
            Scale::Desk => (1_000, 200),
            s => (s.data(50_000), s.data(10_000)),
        };
        let exp = Self {
            data_dir,
            depths: cfg.list_or("depths", (2..=7).collect())?,
            hidden: cfg.get_or("hidden", 100)?,
            out_dim: cfg.get_or("out_dim", 450)?,
            g_hidden: cfg.get_or("g_hidden", 10)?,
            train_images: cfg.get_or("train_images", train_default)?,
            test_images: cfg.get_or("test_images", test_default)?,
            pixels_per_image: cfg.get_or("pixels_per_image", 16)?,
            coords,
            epochs: cfg.get_or("epochs", 10)?,
            batch_size: cfg.get_or("batch_size", 200)?,
            lr: cfg.get_or("lr", 0.01)?,
            momentum: cfg.get_or("momentum", 0.0)?,
            repetitions: cfg.get_or("repetitions", scale.repetitions(100))?,
            init: Init::from_config(cfg)?,
            seed,
        };
        if exp.depths.is_empty() || exp.depths.iter().any(|&k| k < 2) {
            return Err(ExperimentError::Invalid("depths must be at least 2".into()));
        }
        if exp.repetitions == 0 || exp.epochs == 0 || exp.batch_size == 0 || exp.pixels_per_image == 0 {
            return Err(ExperimentError::Invalid("counts must be positive".into()));
        }
        Ok(exp)
    }

    /// `g: 42 → 10 → 3`, ELU, no biases: `f` emits only its 450 weights.
    pub fn g_spec(&self) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![COORD_FEATURES, self.g_hidden, 3], Activation::Elu)?.with_biases(false))
    }

    pub fn q_spec(&self) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![COORD_FEATURES + self.out_dim, self.g_hidden, 3], Activation::Elu)?)
    }

    pub fn pair(&self, d_i: usize, k: usize) -> Result<ModelPair> {
        let g_spec = self.g_spec()?;
        if g_spec.layout_len() != self.out_dim {
            return Err(ExperimentError::Invalid(format!(
                "f must emit all {} parameters of g, out_dim is {}",
                g_spec.layout_len(),
                self.out_dim
            )));
        }
        let widths = depth_widths(d_i, self.hidden, k, self.out_dim);
        Ok(ModelPair {
            f_spec: MlpSpec::new(widths.clone(), Activation::Relu)?,
            e_spec: MlpSpec::new(widths, Activation::Relu)?,
            q_spec: self.q_spec()?,
            g_spec,
        })
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let source = ImageSource::Cifar10;
        let train = source.load_n(&self.data_dir, true, self.train_images)?;
        let test = source.load_n(&self.data_dir, false, self.test_images)?;
        self.run_on(&train, &test)
    }

    pub fn run_on(&self, train: &ImageDataset, test: &ImageDataset) -> Result<ExperimentReport> {
        let d_i = train.shape()[1] * train.shape()[2];
        let pairs = self
            .depths
            .iter()
            .map(|&k| self.pair(d_i, k))
            .collect::<Result<Vec<_>>>()?;
        let results = par::map_indexed(self.repetitions, |rep| -> Result<Vec<(f64, f64)>> {
            let rep_seed = derive_seed(self.seed, &[tag("repetition"), rep as u64]);
            let train = colorization_dataset(train, self.pixels_per_image, self.coords, derive_seed(rep_seed, &[tag("train")]))?;
            let test = colorization_dataset(test, self.pixels_per_image, self.coords, derive_seed(rep_seed, &[tag("test")]))?;
            pairs
                .iter()
                .enumerate()
                .map(|(i, pair)| {
                    let point_seed = derive_seed(rep_seed, &[tag("point"), i as u64]);
                    let (mut hyper, mut embed) = pair.init(self.init, point_seed)?;
                    let mut out = [0.0; 2];
                    for (slot, (name, model)) in out.iter_mut().zip([("hyper", &mut hyper), ("embed", &mut embed)]) {
                        let cfg = TrainConfig {
                            batch_size: self.batch_size,
                            epochs: self.epochs,
                            loss: LossKind::Mse,
                            seed: derive_seed(point_seed, &[tag(name), tag("shuffle")]),
                            optimizer: OptimizerSpec::sgd(self.lr, self.momentum),
                            metric: Metric::Mse,
                        };
                        fit(model, &train, &cfg)?;
                        *slot = evaluate(model, &test, Metric::Mse)?;
                    }
                    Ok((out[0], out[1]))
                })
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport::new("colorization");
        for (i, (&k, pair)) in self.depths.iter().zip(&pairs).enumerate() {
            let point = format!("depth={k}");
            for (rep, r) in results.iter().enumerate() {
                report.push(&point, "hyper", rep, "test_mse", r[i].0)?;
                report.push(&point, "embed", rep, "test_mse", r[i].1)?;
            }
            pair.record_params(&mut report, &point)?;
        }
        Ok(report)
    }
}

/// `per_image` random pixels from every image.
pub fn colorization_dataset(images: &ImageDataset, per_image: usize, coords: CoordMode, seed: u64) -> Result<Dataset> {
    let [c, h, w] = images.shape();
    if c != 3 {
        return Err(ExperimentError::Invalid(format!("colorization needs RGB images, got {c} channels")));
    }
    let mut rng = derived(seed, &[tag("pixels")]);
    let n = images.len() * per_image;
    let (mut xs, mut cs, mut ys) = (Vec::with_capacity(n * COORD_FEATURES), Vec::with_capacity(n * h * w), Vec::with_capacity(n * 3));
    for i in 0..images.len() {
        let pixels: Vec<(usize, usize)> = (0..per_image)
            .map(|_| (rng.random_range(0..h), rng.random_range(0..w)))
            .collect();
        for s in colorization_samples(&images.image_tensor(i), &pixels, coords)? {
            xs.extend(s.x_prime);
            cs.extend(s.cond);
            ys.extend(s.target);
        }
    }
    Ok(Dataset::new(
        Tensor::new(vec![n, COORD_FEATURES], xs)?,
        Some(Tensor::new(vec![n, h * w], cs)?),
        Targets::Values(Tensor::new(vec![n, 3], ys)?),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hypernet::nets::{param_count, CountConvention};

    fn rgb_images(n: usize, seed: u64) -> ImageDataset {
        let mut rng = hypernet::rng::seeded(seed);
        let pixels = (0..n * 3 * 16).map(|_| rng.random_range(0.0..1.0)).collect();
        ImageDataset::new("rgb", [3, 4, 4], pixels, vec![0; n]).unwrap()
    }

    #[test]
    fn full_scale_counts() {
        let exp = ColorizationExperiment::from_config(&Config::default(), Scale::Paper, 0, PathBuf::new()).unwrap();
        let p = exp.pair(1024, 3).unwrap();
        assert_eq!(param_count(&p.g_spec, CountConvention::WeightsOnly), 450);
        assert_eq!(param_count(&p.q_spec, CountConvention::WeightsOnly), 4950);
        assert_eq!(p.f_spec.output_dim(), 450);
        assert_eq!(p.f_spec, p.e_spec);
        assert_eq!(exp.depths.len(), 6);
    }

    #[test]
    fn out_dim_must_cover_g() {
        let mut c = Config::default();
        c.set("out_dim", 400);
        let exp = ColorizationExperiment::from_config(&c, Scale::Desk, 0, PathBuf::new()).unwrap();
        assert!(exp.pair(16, 2).is_err());
    }

    #[test]
    fn dataset_targets_in_range() {
        let ds = colorization_dataset(&rgb_images(5, 1), 3, CoordMode::Normalized, 2).unwrap();
        assert_eq!(ds.len(), 15);
        let Targets::Values(y) = &ds.target else { panic!() };
        assert!(y.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(colorization_dataset(&rgb_images(1, 1).take(1), 1, CoordMode::Raw, 0).is_ok());
    }

    #[test]
    fn grayscale_inputs_rejected() {
        let gray = ImageDataset::new("g", [1, 2, 2], vec![0.5; 4], vec![0]).unwrap();
        assert!(colorization_dataset(&gray, 1, CoordMode::Normalized, 0).is_err());
    }

    #[test]
    fn tiny_run_is_deterministic() {
        let mut c = Config::default();
        for (k, v) in [("depths", "2,3"), ("repetitions", "2"), ("epochs", "1"), ("hidden", "5"), ("pixels_per_image", "4")] {
            c.set(k, v);
        }
        let exp = ColorizationExperiment::from_config(&c, Scale::Desk, 7, PathBuf::new()).unwrap();
        let (tr, te) = (rgb_images(6, 1), rgb_images(3, 2));
        let a = exp.run_on(&tr, &te).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        assert_eq!(a.to_csv().unwrap(), exp.run_on(&tr, &te).unwrap().to_csv().unwrap());
    }
}
