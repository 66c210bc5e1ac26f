//! Synthetic comparisons on random targets `y(x, I)` with Gaussian inputs:
//! a depth sweep over `f`/`e` and a sweep over the embedding dimension.

use hypernet::nets::{Activation, MlpSpec};
use hypernet::par;
use hypernet::rng::{derive_seed, derived, tag};
use hypernet::targets::{make_target, sample_synthetic, SyntheticSamples, TargetFn, TargetKind};
use hypernet::train::{evaluate, fit, Dataset, LossKind, Metric, OptimizerSpec, Targets, TrainConfig};

use crate::config::{Config, Scale};
use crate::models::{depth_widths, Init, ModelPair};
use crate::report::ExperimentReport;
use crate::{ExperimentError, Result};

/// Settings shared by both synthetic sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub target: TargetKind,
    pub d_x: usize,
    pub d_i: usize,
    pub hidden: usize,
    pub g_hidden: usize,
    pub g_biases: bool,
    pub train_samples: usize,
    pub test_samples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub target_seed: u64,
    pub init: Init,
}

const COMMON_KEYS: &[&str] = &[
    "target",
    "d_x",
    "d_i",
    "hidden",
    "g_hidden",
    "g_biases",
    "train_samples",
    "test_samples",
    "batch_size",
    "epochs",
    "lr",
    "momentum",
    "repetitions",
    "target_seed",
    "init",
    "hyper_init",
];

impl SynthSettings {
    fn from_config(cfg: &Config, scale: Scale, seed: u64, default_dx: usize) -> Result<Self> {
        let d_x = cfg.get_or("d_x", default_dx)?;
        let target: TargetKind = cfg.get_or("target", TargetKind::Type1)?;
        if target == TargetKind::ConvTeacher {
            return Err(ExperimentError::Invalid("synthetic sweeps need target type1, type2 or type3".into()));
        }
        let s = Self {
            target,
            d_x,
            d_i: cfg.get_or("d_i", d_x)?,
            hidden: cfg.get_or("hidden", 100)?,
            g_hidden: cfg.get_or("g_hidden", 10)?,
            g_biases: cfg.get_or("g_biases", true)?,
            train_samples: cfg.get_or("train_samples", scale.data(30_000))?,
            test_samples: cfg.get_or("test_samples", scale.data(5_000))?,
            batch_size: cfg.get_or("batch_size", 200)?,
            epochs: cfg.get_or("epochs", 10)?,
            lr: cfg.get_or("lr", 0.01)?,
            momentum: cfg.get_or("momentum", 0.0)?,
            repetitions: cfg.get_or("repetitions", scale.repetitions(100))?,
            seed,
            target_seed: cfg.get_or("target_seed", derive_seed(seed, &[tag("target")]))?,
            init: Init::from_config(cfg)?,
        };
        if s.repetitions == 0 || s.epochs == 0 || s.batch_size == 0 || s.train_samples == 0 || s.test_samples == 0 {
            return Err(ExperimentError::Invalid(
                "repetitions, epochs, batch_size and sample counts must be positive".into(),
            ));
        }
        Ok(s)
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            loss: LossKind::Mse,
            seed,
            optimizer: OptimizerSpec::sgd(self.lr, self.momentum),
            metric: Metric::Mse,
        }
    }

    pub fn g_spec(&self) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![self.d_x, self.g_hidden, 1], Activation::Relu)?.with_biases(self.g_biases))
    }

    pub fn q_spec(&self, e_dim: usize) -> Result<MlpSpec> {
        Ok(MlpSpec::new(vec![self.d_x + e_dim, self.g_hidden, 1], Activation::Relu)?)
    }

    fn target(&self) -> Result<TargetFn> {
        Ok(make_target(self.target, self.d_x, self.d_i, &mut hypernet::rng::seeded(self.target_seed))?)
    }
}

fn to_dataset(s: SyntheticSamples) -> Result<Dataset> {
    Ok(Dataset::new(s.x, Some(s.cond), Targets::Values(s.y))?)
}

fn zero_predictor_mse(test: &Dataset) -> Result<f64> {
    match &test.target {
        Targets::Values(y) => Ok(y.data().iter().map(|v| v * v).sum::<f64>() / y.len() as f64),
        Targets::Classes(_) => Err(ExperimentError::Invalid("synthetic targets are real-valued".into())),
    }
}

/// Trains every pair on one repetition's data and returns the test MSEs
/// `(hyper, embed)` per point.
fn run_repetition(settings: &SynthSettings, target: &TargetFn, pairs: &[ModelPair], rep: usize) -> Result<Vec<(f64, f64)>> {
    let rep_seed = derive_seed(settings.seed, &[tag("repetition"), rep as u64]);
    let train = to_dataset(sample_synthetic(
        target,
        settings.train_samples,
        &mut derived(rep_seed, &[tag("train")]),
    )?)?;
    let test = to_dataset(sample_synthetic(
        target,
        settings.test_samples,
        &mut derived(rep_seed, &[tag("test")]),
    )?)?;
    pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let point_seed = derive_seed(rep_seed, &[tag("point"), i as u64]);
            let (mut hyper, mut embed) = pair.init(settings.init, point_seed)?;
            let mut out = [0.0; 2];
            for (slot, (name, model)) in out.iter_mut().zip([("hyper", &mut hyper), ("embed", &mut embed)]) {
                let cfg = settings.train_config(derive_seed(point_seed, &[tag(name), tag("shuffle")]));
                *slot = match fit(model, &train, &cfg) {
                    Ok(_) => evaluate(model, &test, Metric::Mse)?,
                    // a diverged run scores as the all-zero predictor
                    // instead of aborting the sweep
                    Err(hypernet::Error::NonFinite(why)) => {
                        eprintln!("warning: {name} model diverged at point {i}, repetition {rep}: {why}");
                        zero_predictor_mse(&test)?
                    }
                    Err(e) => return Err(e.into()),
                };
            }
            Ok((out[0], out[1]))
        })
        .collect()
}

fn run_sweep(
    experiment: &str,
    settings: &SynthSettings,
    points: &[(String, ModelPair)],
) -> Result<ExperimentReport> {
    let target = settings.target()?;
    let pairs: Vec<ModelPair> = points.iter().map(|(_, p)| p.clone()).collect();
    let results = par::map_indexed(settings.repetitions, |rep| run_repetition(settings, &target, &pairs, rep));
    let mut report = ExperimentReport::new(experiment);
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    for (i, (point, pair)) in points.iter().enumerate() {
        for (rep, per_point) in results.iter().enumerate() {
            let (h, e) = per_point[i];
            report.push(point, "hyper", rep, "test_mse", h)?;
            report.push(point, "embed", rep, "test_mse", e)?;
        }
        pair.record_params(&mut report, point)?;
    }
    Ok(report)
}

/// Hidden-layer count of `f` and `e` varies; `g: d_x → 10 → 1`,
/// `q: d_x + E → 10 → 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSweep {
    pub settings: SynthSettings,
    pub depths: Vec<usize>,
    pub e_dim: usize,
}

impl DepthSweep {
    pub const KEYS: &'static [&'static str] = &["depths", "e_dim"];

    pub fn from_config(cfg: &Config, scale: Scale, seed: u64) -> Result<Self> {
        check_keys(cfg, "synth-depth", Self::KEYS)?;
        let settings = SynthSettings::from_config(cfg, scale, seed, scale.dims(1000))?;
        let depths = cfg.list_or("depths", (2..=9).collect())?;
        if depths.is_empty() || depths.contains(&0) || depths.contains(&1) {
            return Err(ExperimentError::Invalid("depths must be at least 2".into()));
        }
        Ok(Self {
            e_dim: cfg.get_or("e_dim", scale.dims(10_000))?,
            settings,
            depths,
        })
    }

    pub fn pair(&self, k: usize) -> Result<ModelPair> {
        let s = &self.settings;
        let g_spec = s.g_spec()?;
        Ok(ModelPair {
            f_spec: MlpSpec::new(depth_widths(s.d_i, s.hidden, k, g_spec.layout_len()), Activation::Relu)?,
            e_spec: MlpSpec::new(depth_widths(s.d_i, s.hidden, k, self.e_dim), Activation::Relu)?,
            q_spec: s.q_spec(self.e_dim)?,
            g_spec,
        })
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let points = self
            .depths
            .iter()
            .map(|&k| Ok((format!("depth={k}"), self.pair(k)?)))
            .collect::<Result<Vec<_>>>()?;
        run_sweep("synth-depth", &self.settings, &points)
    }
}

/// Sweep `i = 1..=8`: `f: d_I → 100 → a·i → N_g`, `e: d_I → 100 → 100 → b·i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedDimSweep {
    pub settings: SynthSettings,
    pub steps: Vec<usize>,
    /// `a`: per-step width of `f`'s last hidden layer.
    pub f_unit: usize,
    /// `b`: per-step embedding dimension.
    pub e_unit: usize,
}

impl EmbedDimSweep {
    pub const KEYS: &'static [&'static str] = &["steps", "f_unit", "e_unit"];

    pub fn from_config(cfg: &Config, scale: Scale, seed: u64) -> Result<Self> {
        check_keys(cfg, "synth-embed", Self::KEYS)?;
        // the input dims here are already small (100), so only the swept
        // widths shrink with scale
        let settings = SynthSettings::from_config(cfg, scale, seed, 100)?;
        let steps = cfg.list_or("steps", (1..=8).collect())?;
        if steps.is_empty() || steps.contains(&0) {
            return Err(ExperimentError::Invalid("sweep steps must be positive".into()));
        }
        Ok(Self {
            settings,
            steps,
            f_unit: cfg.get_or("f_unit", scale.dims(100))?,
            e_unit: cfg.get_or("e_unit", scale.dims(1000))?,
        })
    }

    pub fn pair(&self, i: usize) -> Result<ModelPair> {
        let s = &self.settings;
        let g_spec = s.g_spec()?;
        let e_dim = self.e_unit * i;
        Ok(ModelPair {
            f_spec: MlpSpec::new(vec![s.d_i, s.hidden, self.f_unit * i, g_spec.layout_len()], Activation::Relu)?,
            e_spec: MlpSpec::new(vec![s.d_i, s.hidden, s.hidden, e_dim], Activation::Relu)?,
            q_spec: s.q_spec(e_dim)?,
            g_spec,
        })
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let points = self
            .steps
            .iter()
            .map(|&i| Ok((format!("step={i}"), self.pair(i)?)))
            .collect::<Result<Vec<_>>>()?;
        run_sweep("synth-embed", &self.settings, &points)
    }
}

fn check_keys(cfg: &Config, experiment: &str, own: &[&str]) -> Result<()> {
    let allowed: Vec<&str> = COMMON_KEYS.iter().chain(own).copied().collect();
    Ok(cfg.check_keys(experiment, &allowed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hypernet::nets::{param_count, CountConvention};

    #[test]
    fn full_scale_counts() {
        let sweep = DepthSweep::from_config(&Config::default(), Scale::Paper, 0).unwrap();
        let pair = sweep.pair(2).unwrap();
        assert_eq!(param_count(&pair.g_spec, CountConvention::WeightsOnly), 10_010);
        let e = 10_000;
        assert_eq!(param_count(&pair.q_spec, CountConvention::WeightsOnly), 10_000 + 10 * e + 10);
        for k in 2..=9 {
            let p = sweep.pair(k).unwrap();
            // N_f = 10⁵ + 10⁴(k−2) + 10²·N_g with a weights-only g
            let n_g = 10_010;
            let f_weights = param_count(&p.f_spec, CountConvention::WeightsOnly);
            let g_full = p.g_spec.layout_len();
            assert_eq!(f_weights, 100_000 + 10_000 * (k - 2) + 100 * g_full);
            assert!(g_full >= n_g);
        }
    }

    #[test]
    fn embed_sweep_full_scale_counts() {
        let sweep = EmbedDimSweep::from_config(&Config::default(), Scale::Paper, 0).unwrap();
        for i in 1..=8 {
            let p = sweep.pair(i).unwrap();
            assert_eq!(param_count(&p.g_spec, CountConvention::WeightsOnly), 1010);
            // with d_x = 100 the primary q has 10·(100 + 1000i) + 10 weights
            assert_eq!(param_count(&p.q_spec, CountConvention::WeightsOnly), 10_000 * i + 1010);
            assert_eq!(param_count(&p.e_spec, CountConvention::WeightsOnly), 20_000 + 100_000 * i);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut cfg = Config::default();
        cfg.set("depthz", "2");
        assert!(DepthSweep::from_config(&cfg, Scale::Desk, 0).is_err());
    }

    fn tiny() -> Config {
        let mut cfg = Config::default();
        for (k, v) in [
            ("d_x", "4"),
            ("e_dim", "6"),
            ("hidden", "5"),
            ("g_hidden", "3"),
            ("train_samples", "40"),
            ("test_samples", "20"),
            ("batch_size", "10"),
            ("epochs", "2"),
            ("repetitions", "2"),
            ("depths", "2,3"),
        ] {
            cfg.set(k, v);
        }
        cfg
    }

    #[test]
    fn report_shape_and_determinism() {
        let sweep = DepthSweep::from_config(&tiny(), Scale::Desk, 5).unwrap();
        let a = sweep.run().unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        let b = sweep.run().unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.summary().len(), 4);
    }
}
