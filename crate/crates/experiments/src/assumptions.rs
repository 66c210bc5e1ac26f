//! Empirical checks of the two modelling assumptions: independently trained
//! networks converge to the same function, and test error falls with width.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hypernet::data::{to_signed, ImageDataset, NUM_CLASSES};
use hypernet::nets::{mlp_init, Activation, InitScheme, MlpSpec};
use hypernet::par;
use hypernet::rng::{derive_seed, derived, tag};
use hypernet::targets::{make_conv_teacher, ConvTeacher};
use hypernet::train::{
    evaluate, fit, metric_of, predict, Dataset, LossKind, Metric, Model, OptimizerSpec, Targets, TrainConfig, Trainer,
};
use hypernet::Tensor;
use rand::Rng;

use crate::config::{Config, Scale};
use crate::datasets::ImageSource;
use crate::report::ExperimentReport;
use crate::{ExperimentError, Result};

/// Where the inputs of the teacher come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpace {
    Mnist,
    Cifar10,
    /// `[−1, 1]^{28×28}`, sampled uniformly.
    UniformCube,
}

impl InputSpace {
    pub fn name(self) -> &'static str {
        match self {
            InputSpace::Mnist => "mnist",
            InputSpace::Cifar10 => "cifar10",
            InputSpace::UniformCube => "uniform-cube",
        }
    }

    pub fn shape(self) -> [usize; 3] {
        match self {
            InputSpace::Cifar10 => [3, 32, 32],
            _ => [1, 28, 28],
        }
    }
}

impl FromStr for InputSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnist" => Ok(InputSpace::Mnist),
            "cifar10" => Ok(InputSpace::Cifar10),
            "uniform-cube" => Ok(InputSpace::UniformCube),
            _ => Err(format!("unknown input space {s:?} (mnist, cifar10, uniform-cube)")),
        }
    }
}

impl fmt::Display for InputSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Two students `f₁, f₂` of one architecture fit a frozen convolutional
/// teacher from different initializations.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1 {
    pub space: InputSpace,
    pub data_dir: PathBuf,
    pub train_samples: usize,
    pub probe_samples: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub repetitions: usize,
    pub init: InitScheme,
    pub seed: u64,
}

const A1_KEYS: &[&str] = &[
    "input_space",
    "train_samples",
    "probe_samples",
    "hidden",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "repetitions",
    "init",
];

/// Train/probe inputs for one repetition, flattened and in `[−1, 1]`.
struct Inputs {
    train: Tensor,
    probe: Tensor,
}

fn signed_rows(ds: &ImageDataset) -> Result<Tensor> {
    Ok(Tensor::new(vec![ds.len(), ds.image_len()], to_signed(&(0..ds.len()).flat_map(|i| ds.image(i).to_vec()).collect::<Vec<_>>()))?)
}

fn teacher_targets(teacher: &ConvTeacher, x: &Tensor) -> Result<Tensor> {
    let n = x.shape()[0];
    let mut out = Vec::with_capacity(n * 10);
    for i in 0..n {
        out.extend(teacher.eval(x.row(i))?);
    }
    Ok(Tensor::new(vec![n, out.len() / n.max(1)], out)?)
}

fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    Ok(metric_of(a, &Targets::Values(b.clone()), Metric::Mse)?)
}

impl Assumption1 {
    pub fn from_config(cfg: &Config, scale: Scale, seed: u64, data_dir: PathBuf) -> Result<Self> {
        cfg.check_keys("assumption1", A1_KEYS)?;
        let space: InputSpace = cfg.get_or("input_space", InputSpace::Mnist)?;
        let train_default = match scale {
            Scale::Desk => 5_000,
            s => s.data(if space == InputSpace::Cifar10 { 50_000 } else { 60_000 }),
        };
        let exp = Self {
            space,
            data_dir,
            train_samples: cfg.get_or("train_samples", train_default)?,
            probe_samples: cfg.get_or("probe_samples", 1_000)?,
            hidden: cfg.get_or("hidden", 100)?,
            epochs: cfg.get_or("epochs", 50)?,
            batch_size: cfg.get_or("batch_size", 64)?,
            lr: cfg.get_or("lr", 0.01)?,
            momentum: cfg.get_or("momentum", 0.5)?,
            repetitions: cfg.get_or("repetitions", scale.repetitions(10))?,
            init: cfg.get_or("init", InitScheme::HeUniform)?,
            seed,
        };
        if exp.repetitions == 0 || exp.epochs == 0 || exp.batch_size == 0 || exp.train_samples == 0 || exp.probe_samples == 0 {
            return Err(ExperimentError::Invalid("counts must be positive".into()));
        }
        Ok(exp)
    }

    pub fn student_spec(&self) -> Result<MlpSpec> {
        let d: usize = self.space.shape().iter().product();
        Ok(MlpSpec::new(vec![d, self.hidden, 10], Activation::Relu)?)
    }

    fn dataset_inputs(&self, source: ImageSource) -> Result<Inputs> {
        let train = source.load_n(&self.data_dir, true, self.train_samples)?;
        let probe = source.load_n(&self.data_dir, false, self.probe_samples)?;
        Ok(Inputs {
            train: signed_rows(&train)?,
            probe: signed_rows(&probe)?,
        })
    }

    fn cube_inputs(&self, n: usize, seed: u64) -> Result<Tensor> {
        let d: usize = self.space.shape().iter().product();
        let mut rng = derived(seed, &[tag("cube")]);
        Ok(Tensor::new(vec![n, d], (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect())?)
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let fixed = match self.space {
            InputSpace::Mnist => Some(self.dataset_inputs(ImageSource::Mnist)?),
            InputSpace::Cifar10 => Some(self.dataset_inputs(ImageSource::Cifar10)?),
            InputSpace::UniformCube => None,
        };
        self.run_with(fixed.as_ref().map(|i| (&i.train, &i.probe)))
    }

    /// Runs on given `(train, probe)` inputs in `[−1, 1]`, or on fresh cube
    /// samples per repetition when `None`.
    pub fn run_on(&self, train: &Tensor, probe: &Tensor) -> Result<ExperimentReport> {
        self.run_with(Some((train, probe)))
    }

    fn run_with(&self, fixed: Option<(&Tensor, &Tensor)>) -> Result<ExperimentReport> {
        let spec = self.student_spec()?;
        let results = par::map_indexed(self.repetitions, |rep| -> Result<Vec<[f64; 3]>> {
            let rep_seed = derive_seed(self.seed, &[tag("repetition"), rep as u64]);
            let cube;
            let (train_x, probe_x) = match fixed {
                Some(p) => p,
                None => {
                    cube = (
                        self.cube_inputs(self.train_samples, derive_seed(rep_seed, &[tag("train")]))?,
                        self.cube_inputs(self.probe_samples, derive_seed(rep_seed, &[tag("probe")]))?,
                    );
                    (&cube.0, &cube.1)
                }
            };
            let teacher = make_conv_teacher(self.space.shape(), &mut derived(rep_seed, &[tag("teacher")]))?;
            let train = Dataset::new(train_x.clone(), None, Targets::Values(teacher_targets(&teacher, train_x)?))?;
            let probe_y = teacher_targets(&teacher, probe_x)?;
            let probe = Dataset::new(probe_x.clone(), None, Targets::Values(probe_y.clone()))?;

            let mut students = Vec::with_capacity(2);
            for name in ["f1", "f2"] {
                let params = mlp_init(&spec, self.init, &mut derived(rep_seed, &[tag(name), tag("init")]));
                let model = Model::mlp(spec.clone(), params);
                let cfg = TrainConfig {
                    batch_size: self.batch_size,
                    epochs: self.epochs,
                    loss: LossKind::Mse,
                    seed: derive_seed(rep_seed, &[tag(name), tag("shuffle")]),
                    optimizer: OptimizerSpec::sgd(self.lr, self.momentum),
                    metric: Metric::Mse,
                };
                students.push((Trainer::new(cfg, &model)?, model));
            }
            let mut rows = Vec::with_capacity(self.epochs);
            for _ in 0..self.epochs {
                for (trainer, model) in students.iter_mut() {
                    trainer.run_epoch(model, &train)?;
                }
                let p1 = predict(&students[0].1, &probe)?;
                let p2 = predict(&students[1].1, &probe)?;
                rows.push([mse(&p1, &p2)?, mse(&p1, &probe_y)?, mse(&p2, &probe_y)?]);
            }
            Ok(rows)
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport::new(&format!("assumption1-{}", self.space));
        for epoch in 0..self.epochs {
            let point = format!("epoch={}", epoch + 1);
            for (rep, r) in results.iter().enumerate() {
                for (model, v) in ["f1_vs_f2", "f1_vs_y", "f2_vs_y"].iter().zip(r[epoch]) {
                    report.push(&point, model, rep, "mse", v)?;
                }
            }
        }
        Ok(report)
    }
}

/// One-hidden-layer classifiers of growing width trained with MSE on
/// one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2 {
    pub dataset: ImageSource,
    pub data_dir: PathBuf,
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    /// `None` uses every available image up to the scaled default.
    pub train_images: Option<usize>,
    pub test_images: Option<usize>,
    pub scale: Scale,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub repetitions: usize,
    pub init: InitScheme,
    pub seed: u64,
}

const A2_KEYS: &[&str] = &[
    "dataset",
    "widths",
    "activations",
    "train_images",
    "test_images",
    "epochs",
    "batch_size",
    "lr",
    "repetitions",
    "init",
];

/// Pixels in `[0, 1]` as rows, labels one-hot.
pub fn one_hot_dataset(ds: &ImageDataset) -> Result<Dataset> {
    let n = ds.len();
    let k = NUM_CLASSES as usize;
    let x: Vec<f64> = (0..n).flat_map(|i| ds.image(i).to_vec()).collect();
    let mut y = vec![0.0; n * k];
    for (i, &l) in ds.labels().iter().enumerate() {
        y[i * k + l as usize] = 1.0;
    }
    Ok(Dataset::new(
        Tensor::new(vec![n, ds.image_len()], x)?,
        None,
        Targets::Values(Tensor::new(vec![n, k], y)?),
    )?)
}

impl Assumption2 {
    pub fn from_config(cfg: &Config, scale: Scale, seed: u64, data_dir: PathBuf) -> Result<Self> {
        cfg.check_keys("assumption2", A2_KEYS)?;
        let dataset: ImageSource = cfg.get_or("dataset", ImageSource::Mnist)?;
        if dataset == ImageSource::Cifar10 {
            return Err(ExperimentError::Invalid("assumption2 runs on mnist or fashion-mnist".into()));
        }
        let activations = match cfg.get_list::<String>("activations")? {
            Some(names) => names
                .iter()
                .map(|s| s.parse::<Activation>())
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![Activation::Relu],
        };
        let exp = Self {
            dataset,
            data_dir,
            widths: cfg.list_or("widths", vec![4, 8, 16, 32, 64, 128])?,
            activations,
            train_images: cfg.get("train_images")?,
            test_images: cfg.get("test_images")?,
            scale,
            epochs: cfg.get_or("epochs", 2)?,
            batch_size: cfg.get_or("batch_size", 64)?,
            lr: cfg.get_or("lr", 1.0)?,
            repetitions: cfg.get_or("repetitions", scale.repetitions(10))?,
            init: cfg.get_or("init", InitScheme::HeUniform)?,
            seed,
        };
        if exp.widths.is_empty() || exp.widths.contains(&0) || exp.activations.is_empty() {
            return Err(ExperimentError::Invalid("need positive widths and at least one activation".into()));
        }
        if exp.repetitions == 0 || exp.epochs == 0 || exp.batch_size == 0 {
            return Err(ExperimentError::Invalid("counts must be positive".into()));
        }
        Ok(exp)
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let load = |train: bool, requested: Option<usize>, full: usize| -> Result<ImageDataset> {
            match requested {
                Some(n) => self.dataset.load_n(&self.data_dir, train, n),
                None => Ok(self.dataset.load(&self.data_dir, train)?.take(self.scale.data(full))),
            }
        };
        let train = load(true, self.train_images, 60_000)?;
        let test = load(false, self.test_images, 10_000)?;
        self.run_on(&one_hot_dataset(&train)?, &one_hot_dataset(&test)?)
    }

    pub fn run_on(&self, train: &Dataset, test: &Dataset) -> Result<ExperimentReport> {
        let d = train.x.shape()[1];
        let points: Vec<(usize, Activation)> = self
            .widths
            .iter()
            .flat_map(|&w| self.activations.iter().map(move |&a| (w, a)))
            .collect();
        let results = par::map_indexed(self.repetitions, |rep| -> Result<Vec<f64>> {
            let rep_seed = derive_seed(self.seed, &[tag("repetition"), rep as u64]);
            points
                .iter()
                .enumerate()
                .map(|(i, &(w, act))| {
                    let spec = MlpSpec::new(vec![d, w, NUM_CLASSES as usize], act)?;
                    let point_seed = derive_seed(rep_seed, &[tag("point"), i as u64]);
                    let mut model = Model::mlp(spec.clone(), mlp_init(&spec, self.init, &mut derived(point_seed, &[tag("init")])));
                    let cfg = TrainConfig {
                        batch_size: self.batch_size,
                        epochs: self.epochs,
                        loss: LossKind::Mse,
                        seed: derive_seed(point_seed, &[tag("shuffle")]),
                        optimizer: OptimizerSpec::adadelta(self.lr),
                        metric: Metric::Mse,
                    };
                    fit(&mut model, train, &cfg)?;
                    Ok(evaluate(&model, test, Metric::Mse)?)
                })
                .collect()
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport::new(&format!("assumption2-{}", self.dataset));
        for (i, (w, act)) in points.iter().enumerate() {
            let point = format!("width={w}");
            for (rep, r) in results.iter().enumerate() {
                report.push(&point, act.name(), rep, "test_mse", r[i])?;
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> Config {
        let mut c = Config::default();
        for (k, v) in pairs {
            c.set(k, v);
        }
        c
    }

    #[test]
    fn assumption1_defaults() {
        let a = Assumption1::from_config(&Config::default(), Scale::Desk, 0, PathBuf::new()).unwrap();
        assert_eq!((a.train_samples, a.epochs, a.lr, a.momentum), (5_000, 50, 0.01, 0.5));
        assert_eq!(a.student_spec().unwrap().widths(), &[784, 100, 10]);
        assert!(Assumption1::from_config(&cfg(&[("input_space", "svhn")]), Scale::Desk, 0, PathBuf::new()).is_err());
    }

    #[test]
    fn cube_run_has_one_row_per_epoch_and_pair() {
        let c = cfg(&[
            ("input_space", "uniform-cube"),
            ("train_samples", "40"),
            ("probe_samples", "10"),
            ("hidden", "4"),
            ("epochs", "3"),
            ("repetitions", "2"),
        ]);
        let a = Assumption1::from_config(&c, Scale::Desk, 5, PathBuf::new()).unwrap();
        let r = a.run().unwrap();
        assert_eq!(r.points().len(), 3);
        assert_eq!(r.rows.len(), 3 * 3 * 2);
        assert!(r.rows.iter().all(|row| row.value.is_finite() && row.value >= 0.0));
        assert_eq!(r.to_csv().unwrap(), a.run().unwrap().to_csv().unwrap());
    }

    #[test]
    fn students_start_apart() {
        let c = cfg(&[
            ("input_space", "uniform-cube"),
            ("train_samples", "8"),
            ("probe_samples", "8"),
            ("epochs", "1"),
            ("repetitions", "1"),
            ("lr", "1e-12"),
        ]);
        let a = Assumption1::from_config(&c, Scale::Desk, 1, PathBuf::new()).unwrap();
        let r = a.run().unwrap();
        assert!(r.values("epoch=1", "f1_vs_f2", "mse")[0] > 0.0);
    }

    #[test]
    fn one_hot_rows() {
        let ds = ImageDataset::new("t", [1, 1, 2], vec![0.0, 1.0, 0.5, 0.5], vec![3, 9]).unwrap();
        let d = one_hot_dataset(&ds).unwrap();
        let Targets::Values(y) = &d.target else { panic!() };
        assert_eq!(y.row(0).iter().sum::<f64>(), 1.0);
        assert_eq!(y.row(0)[3], 1.0);
        assert_eq!(y.row(1)[9], 1.0);
    }

    #[test]
    fn assumption2_sweeps_width_by_activation() {
        let c = cfg(&[("widths", "2,4"), ("activations", "relu,tanh"), ("repetitions", "1"), ("epochs", "1")]);
        let a = Assumption2::from_config(&c, Scale::Desk, 0, PathBuf::new()).unwrap();
        let mut rng = hypernet::rng::seeded(3);
        let px: Vec<f64> = (0..30 * 4).map(|_| rng.random_range(0.0..1.0)).collect();
        let ds = ImageDataset::new("t", [1, 2, 2], px, (0..30).map(|i| (i % 10) as u8).collect()).unwrap();
        let d = one_hot_dataset(&ds).unwrap();
        let r = a.run_on(&d, &d).unwrap();
        assert_eq!(r.points(), vec!["width=2", "width=4"]);
        assert_eq!(r.models(), vec!["relu", "tanh"]);
        assert!(Assumption2::from_config(&cfg(&[("dataset", "cifar10")]), Scale::Desk, 0, PathBuf::new()).is_err());
    }
}
