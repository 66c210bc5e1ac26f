//! Rotation prediction: `x` is `I` rotated by a random angle and the model
//! predicts which of twelve 30° bins the angle is closest to.

use std::path::PathBuf;

use hypernet::data::{make_rotation_pair, ImageDataset, Interpolation, ROTATION_CLASSES};
use hypernet::nets::{Activation, Head, MlpSpec};
use hypernet::par;
use hypernet::rng::{derive_seed, derived, tag};
use hypernet::train::{evaluate, fit, Dataset, LossKind, Metric, OptimizerSpec, Targets, TrainConfig};
use hypernet::Tensor;

use crate::config::{Config, Scale};
use crate::datasets::ImageSource;
use crate::models::{depth_widths, Init, ModelPair};
use crate::report::ExperimentReport;
use crate::{ExperimentError, Result};

/// What is swept.
#[derive(Debug, Clone, PartialEq)]
pub enum RotationSweep {
    /// Depth `k` of `f` and `e`; `e` has the same output width as `f`.
    Depth(Vec<usize>),
    /// Embedding dimension `E = unit·i` with `f: d_I → 100 → N_g` and
    /// `e: d_x → 100 → E`.
    EmbedDim { steps: Vec<usize>, unit: usize },
    /// Learning rate at a fixed depth.
    LearningRate { depth: usize, lrs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationExperiment {
    pub dataset: ImageSource,
    pub data_dir: PathBuf,
    pub train_images: usize,
    pub test_images: usize,
    pub hidden: usize,
    pub g_hidden: usize,
    pub g_biases: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub repetitions: usize,
    pub interpolation: Interpolation,
    pub init: Init,
    pub seed: u64,
    pub sweep: RotationSweep,
}

const KEYS: &[&str] = &[
    "dataset",
    "train_images",
    "test_images",
    "hidden",
    "g_hidden",
    "g_biases",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "repetitions",
    "interpolation",
    "init",
    "hyper_init",
    "variant",
    "depths",
    "steps",
    "e_unit",
    "depth",
    "lrs",
];

fn parse_interpolation(s: &str) -> Result<Interpolation> {
    match s {
        "bilinear" => Ok(Interpolation::Bilinear),
        "nearest" => Ok(Interpolation::Nearest),
        _ => Err(ExperimentError::Invalid(format!("interpolation must be bilinear or nearest, got {s:?}"))),
    }
}

impl RotationExperiment {
    /// `variant` selects the sweep: `depth` (default), `embed-dim`, or
    /// `learning-rate` (the sensitivity test).
    pub fn from_config(cfg: &Config, scale: Scale, seed: u64, data_dir: PathBuf) -> Result<Self> {
        cfg.check_keys("rotation", KEYS)?;
        let dataset: ImageSource = cfg.get_or("dataset", ImageSource::Mnist)?;
        let variant = cfg.raw("variant").unwrap_or("depth");
        let sweep = match variant {
            "depth" => RotationSweep::Depth(cfg.list_or("depths", (2..=9).collect())?),
            "embed-dim" => RotationSweep::EmbedDim {
                steps: cfg.list_or("steps", (1..=8).collect())?,
                unit: cfg.get_or("e_unit", scale.dims(10_000))?,
            },
            "learning-rate" => RotationSweep::LearningRate {
                depth: cfg.get_or("depth", 4)?,
                lrs: cfg.list_or("lrs", vec![0.001, 0.003, 0.01, 0.03, 0.1])?,
            },
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "variant must be depth, embed-dim or learning-rate, got {other:?}"
                )))
            }
        };
        match &sweep {
            RotationSweep::Depth(d) if d.is_empty() || d.iter().any(|&k| k < 2) => {
                return Err(ExperimentError::Invalid("depths must be at least 2".into()))
            }
            RotationSweep::EmbedDim { steps, .. } if steps.is_empty() || steps.contains(&0) => {
                return Err(ExperimentError::Invalid("embedding steps must be positive".into()))
            }
            RotationSweep::LearningRate { depth, lrs } if *depth < 2 || lrs.is_empty() || lrs.iter().any(|&l| l <= 0.0) => {
                return Err(ExperimentError::Invalid("need depth >= 2 and positive learning rates".into()))
            }
            _ => {}
        }
        let (train_default, test_default) = match scale {
            // the desk subset: 10000 train / 2000 test images
            Scale::Desk => (10_000, 2_000),
            s => (s.data(if dataset == ImageSource::Cifar10 { 50_000 } else { 60_000 }), s.data(10_000)),
        };
        let exp = Self {
            dataset,
            data_dir,
            train_images: cfg.get_or("train_images", train_default)?,
            test_images: cfg.get_or("test_images", test_default)?,
            hidden: cfg.get_or("hidden", dataset.rotation_hidden())?,
            g_hidden: cfg.get_or("g_hidden", 10)?,
            g_biases: cfg.get_or("g_biases", true)?,
            epochs: cfg.get_or("epochs", 10)?,
            batch_size: cfg.get_or("batch_size", 64)?,
            lr: cfg.get_or("lr", 0.01)?,
            momentum: cfg.get_or("momentum", 0.0)?,
            repetitions: cfg.get_or("repetitions", scale.repetitions(100))?,
            interpolation: parse_interpolation(cfg.raw("interpolation").unwrap_or("bilinear"))?,
            init: Init::from_config(cfg)?,
            seed,
            sweep,
        };
        if exp.repetitions == 0 || exp.epochs == 0 || exp.batch_size == 0 || exp.train_images == 0 || exp.test_images == 0 {
            return Err(ExperimentError::Invalid("counts must be positive".into()));
        }
        Ok(exp)
    }

    pub fn g_spec(&self, d_x: usize) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![d_x, self.g_hidden, ROTATION_CLASSES], Activation::Relu)?
            .with_head(Head::LogSoftmax)
            .with_biases(self.g_biases))
    }

    fn q_spec(&self, d_x: usize, e_dim: usize) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![d_x + e_dim, self.g_hidden, ROTATION_CLASSES], Activation::Relu)?.with_head(Head::LogSoftmax))
    }

    /// Model pair at depth `k`: `f` and `e` share one architecture.
    pub fn depth_pair(&self, d: usize, k: usize) -> Result<ModelPair> {
        let g_spec = self.g_spec(d)?;
        let out = g_spec.layout_len();
        let widths = depth_widths(d, self.hidden, k, out);
        Ok(ModelPair {
            f_spec: MlpSpec::new(widths.clone(), Activation::Relu)?,
            e_spec: MlpSpec::new(widths, Activation::Relu)?,
            q_spec: self.q_spec(d, out)?,
            g_spec,
        })
    }

    pub fn embed_dim_pair(&self, d: usize, e_dim: usize) -> Result<ModelPair> {
        let g_spec = self.g_spec(d)?;
        Ok(ModelPair {
            f_spec: MlpSpec::new(vec![d, 100, g_spec.layout_len()], Activation::Relu)?,
            e_spec: MlpSpec::new(vec![d, 100, e_dim], Activation::Relu)?,
            q_spec: self.q_spec(d, e_dim)?,
            g_spec,
        })
    }

    fn points(&self, d: usize) -> Result<Vec<(String, ModelPair, f64)>> {
        match &self.sweep {
            RotationSweep::Depth(depths) => depths
                .iter()
                .map(|&k| Ok((format!("depth={k}"), self.depth_pair(d, k)?, self.lr)))
                .collect(),
            RotationSweep::EmbedDim { steps, unit } => steps
                .iter()
                .map(|&i| Ok((format!("step={i}"), self.embed_dim_pair(d, unit * i)?, self.lr)))
                .collect(),
            RotationSweep::LearningRate { depth, lrs } => lrs
                .iter()
                .map(|&lr| Ok((format!("lr={lr}"), self.depth_pair(d, *depth)?, lr)))
                .collect(),
        }
    }

    fn experiment_name(&self) -> &'static str {
        match self.sweep {
            RotationSweep::Depth(_) => "rotation",
            RotationSweep::EmbedDim { .. } => "rotation-embed",
            RotationSweep::LearningRate { .. } => "sensitivity",
        }
    }

    pub fn load(&self) -> Result<(ImageDataset, ImageDataset)> {
        Ok((
            self.dataset.load_n(&self.data_dir, true, self.train_images)?,
            self.dataset.load_n(&self.data_dir, false, self.test_images)?,
        ))
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let (train, test) = self.load()?;
        self.run_on(&train, &test)
    }

    /// Runs the sweep on already loaded images.
    pub fn run_on(&self, train: &ImageDataset, test: &ImageDataset) -> Result<ExperimentReport> {
        let d = train.image_len();
        let points = self.points(d)?;
        let sensitivity = matches!(self.sweep, RotationSweep::LearningRate { .. });
        let results = par::map_indexed(self.repetitions, |rep| -> Result<Vec<(f64, f64)>> {
            let rep_seed = derive_seed(self.seed, &[tag("repetition"), rep as u64]);
            let train = rotation_dataset(train, self.interpolation, derive_seed(rep_seed, &[tag("train")]))?;
            let test = rotation_dataset(test, self.interpolation, derive_seed(rep_seed, &[tag("test")]))?;
            points
                .iter()
                .enumerate()
                .map(|(i, (_, pair, lr))| {
                    let point_seed = derive_seed(rep_seed, &[tag("point"), i as u64]);
                    let (mut hyper, mut embed) = pair.init(self.init, point_seed)?;
                    let mut out = [0.0; 2];
                    for (slot, (name, model)) in out.iter_mut().zip([("hyper", &mut hyper), ("embed", &mut embed)]) {
                        let cfg = TrainConfig {
                            batch_size: self.batch_size,
                            epochs: self.epochs,
                            loss: LossKind::Nll,
                            seed: derive_seed(point_seed, &[tag(name), tag("shuffle")]),
                            optimizer: OptimizerSpec::sgd(*lr, self.momentum),
                            metric: Metric::ClassificationError,
                        };
                        *slot = match fit(model, &train, &cfg) {
                            Ok(_) => evaluate(model, &test, Metric::ClassificationError)?,
                            // a diverged run at a large step size scores as
                            // chance-level instead of aborting the sweep
                            Err(hypernet::Error::NonFinite(_)) if sensitivity => {
                                1.0 - 1.0 / ROTATION_CLASSES as f64
                            }
                            Err(e) => return Err(e.into()),
                        };
                    }
                    Ok((out[0], out[1]))
                })
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport::new(self.experiment_name());
        let metric = if sensitivity { "test_accuracy" } else { "test_error" };
        for (i, (point, pair, _)) in points.iter().enumerate() {
            for (rep, r) in results.iter().enumerate() {
                let (h, e) = r[i];
                let (h, e) = if sensitivity { (1.0 - h, 1.0 - e) } else { (h, e) };
                report.push(point, "hyper", rep, metric, h)?;
                report.push(point, "embed", rep, metric, e)?;
            }
            pair.record_params(&mut report, point)?;
        }
        Ok(report)
    }
}

/// One rotated copy of every image, angles drawn from `seed`.
pub fn rotation_dataset(images: &ImageDataset, mode: Interpolation, seed: u64) -> Result<Dataset> {
    let mut rng = derived(seed, &[tag("angles")]);
    let n = images.len();
    let d = images.image_len();
    let mut xs = Vec::with_capacity(n * d);
    let mut cs = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let s = make_rotation_pair(&images.image_tensor(i), mode, &mut rng)?;
        xs.extend(s.x);
        cs.extend(s.cond);
        labels.push(s.label);
    }
    Ok(Dataset::new(
        Tensor::new(vec![n, d], xs)?,
        Some(Tensor::new(vec![n, d], cs)?),
        Targets::Classes(labels),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hypernet::nets::{param_count, CountConvention};

    fn tiny_images(n: usize, seed: u64) -> ImageDataset {
        use rand::Rng;
        let mut rng = hypernet::rng::seeded(seed);
        let pixels = (0..n * 64).map(|_| rng.random_range(0.0..1.0)).collect();
        ImageDataset::new("tiny", [1, 8, 8], pixels, (0..n as u8).map(|i| i % 10).collect()).unwrap()
    }

    fn cfg(pairs: &[(&str, &str)]) -> Config {
        let mut c = Config::default();
        for (k, v) in pairs {
            c.set(k, v);
        }
        c
    }

    #[test]
    fn cifar_primary_has_30840_weights() {
        let exp = RotationExperiment::from_config(
            &cfg(&[("dataset", "cifar10")]),
            Scale::Paper,
            0,
            PathBuf::from("/nonexistent"),
        )
        .unwrap();
        let g = exp.g_spec(3 * 32 * 32).unwrap();
        assert_eq!(param_count(&g, CountConvention::WeightsOnly), 30_840);
        assert_eq!(g.widths(), &[3072, 10, 12]);
        assert_eq!(exp.hidden, 100);
    }

    #[test]
    fn missing_data_mentions_download() {
        let exp = RotationExperiment::from_config(&Config::default(), Scale::Desk, 0, PathBuf::from("/nonexistent")).unwrap();
        let err = exp.run().unwrap_err().to_string();
        assert!(err.contains("download"), "{err}");
    }

    #[test]
    fn untrained_models_are_near_chance() {
        let images = tiny_images(240, 1);
        let exp = RotationExperiment::from_config(&Config::default(), Scale::Desk, 0, PathBuf::new()).unwrap();
        let data = rotation_dataset(&images, Interpolation::Bilinear, 4).unwrap();
        let (hyper, embed) = exp.depth_pair(64, 3).unwrap().init(exp.init, 9).unwrap();
        for m in [&hyper, &embed] {
            let err = evaluate(m, &data, Metric::ClassificationError).unwrap();
            assert!(err > 0.75, "untrained error {err}");
        }
    }

    #[test]
    fn sweep_report_shape_and_determinism() {
        let c = cfg(&[
            ("depths", "2,3"),
            ("repetitions", "2"),
            ("epochs", "1"),
            ("hidden", "6"),
            ("g_hidden", "3"),
        ]);
        let exp = RotationExperiment::from_config(&c, Scale::Desk, 3, PathBuf::new()).unwrap();
        let (train, test) = (tiny_images(30, 1), tiny_images(10, 2));
        let a = exp.run_on(&train, &test).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        assert_eq!(a.to_csv().unwrap(), exp.run_on(&train, &test).unwrap().to_csv().unwrap());
    }

    #[test]
    fn sensitivity_reports_accuracy_per_lr() {
        let c = cfg(&[
            ("variant", "learning-rate"),
            ("lrs", "0.01,0.1"),
            ("repetitions", "1"),
            ("epochs", "1"),
            ("hidden", "6"),
            ("g_hidden", "3"),
        ]);
        let exp = RotationExperiment::from_config(&c, Scale::Desk, 3, PathBuf::new()).unwrap();
        assert!(matches!(exp.sweep, RotationSweep::LearningRate { depth: 4, .. }));
        let r = exp.run_on(&tiny_images(30, 1), &tiny_images(10, 2)).unwrap();
        assert_eq!(r.points(), vec!["lr=0.01", "lr=0.1"]);
        assert_eq!(r.metrics(), vec!["test_accuracy"]);
        assert_eq!(r.rows.len(), 2 * 2);
    }
}
