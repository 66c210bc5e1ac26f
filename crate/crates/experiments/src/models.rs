//! Matched hypernetwork / embedding model pairs.

use hypernet::composition::{EmbedModel, HyperModel};
use hypernet::nets::{param_count, CountConvention, InitScheme, MlpSpec};
use hypernet::rng::{derived, tag};
use hypernet::train::Model;

use crate::report::ExperimentReport;
use crate::Result;

/// `[d_in, width × (k−1), d_out]`: `k` weight layers.
pub fn depth_widths(d_in: usize, width: usize, k: usize, d_out: usize) -> Vec<usize> {
    let mut w = vec![d_in];
    w.extend(std::iter::repeat_n(width, k.saturating_sub(1)));
    w.push(d_out);
    w
}

/// Initialization of trained networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Init {
    pub scheme: InitScheme,
    /// Rescale `f`'s output layer so the generated weights of `g` start at
    /// He scale (see [`HyperModel::init_hyperfan`]); `scheme` then applies to
    /// the embedding model only.
    pub hyperfan: bool,
}

impl Init {
    pub const KEYS: [&'static str; 2] = ["init", "hyper_init"];

    pub fn from_config(cfg: &crate::config::Config) -> Result<Self> {
        let hyperfan = match cfg.raw("hyper_init").unwrap_or("hyperfan") {
            "hyperfan" => true,
            "plain" => false,
            other => {
                return Err(crate::ExperimentError::Invalid(format!(
                    "hyper_init must be hyperfan or plain, got {other:?}"
                )))
            }
        };
        Ok(Self {
            scheme: cfg.get_or("init", InitScheme::HeUniform)?,
            hyperfan,
        })
    }
}

/// A matched hypernetwork / embedding pair at one sweep point.
#[derive(Debug, Clone)]
pub struct ModelPair {
    pub f_spec: MlpSpec,
    pub g_spec: MlpSpec,
    pub e_spec: MlpSpec,
    pub q_spec: MlpSpec,
}

impl ModelPair {
    pub fn init(&self, init: Init, seed: u64) -> Result<(Model, Model)> {
        let (f, g) = (self.f_spec.clone(), self.g_spec.clone());
        let rng = &mut derived(seed, &[tag("hyper")]);
        let hyper = if init.hyperfan {
            HyperModel::init_hyperfan(f, g, rng)?
        } else {
            HyperModel::init(f, g, init.scheme, rng)?
        };
        let embed = EmbedModel::init(
            self.e_spec.clone(),
            self.q_spec.clone(),
            init.scheme,
            &mut derived(seed, &[tag("embed")]),
        )?;
        Ok((Model::Hyper(hyper), Model::Embed(embed)))
    }

    pub fn record_params(&self, report: &mut ExperimentReport, point: &str) -> Result<()> {
        for (model, spec) in [("g", &self.g_spec), ("q", &self.q_spec), ("f", &self.f_spec), ("e", &self.e_spec)] {
            report.push_params(point, model, "weights-only", param_count(spec, CountConvention::WeightsOnly))?;
        }
        report.push_params(point, "hyper", "trainable", self.f_spec.layout_len())?;
        report.push_params(point, "embed", "trainable", self.e_spec.layout_len() + self.q_spec.layout_len())?;
        Ok(())
    }
}

