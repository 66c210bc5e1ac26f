#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hypernet::analysis::IsoOptions;
use hypernet::gradcheck::{run_suite, DEFAULT_H};
use hypernet::nets::{Activation, MlpSpec};
use hypernet::rng::seeded;
use hypernet::theory::{budget_csv, budget_table, ComplexityScenario};
use hypernet_experiments::analyze::{analyze, load_params};
use hypernet_experiments::assumptions::{Assumption1, Assumption2};
use hypernet_experiments::colorization::ColorizationExperiment;
use hypernet_experiments::config::{Config, Scale};
use hypernet_experiments::report::ExperimentReport;
use hypernet_experiments::rotation::RotationExperiment;
use hypernet_experiments::synthetic::{DepthSweep, EmbedDimSweep};

/// Hypernetworks vs embedding methods: experiments and analysis tools.
#[derive(Parser)]
#[command(name = "hypernet", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// key = value file with experiment settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every repetition derives its own streams from it
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// desk, paper, or a fraction in (0, 1]
    #[arg(long, global = true, default_value = "desk")]
    scale: Scale,
    /// Directory for CSV and SVG reports
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Directory holding mnist/, fashion-mnist/ and cifar-10-batches-bin/
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,
    /// Override a config entry, e.g. --set repetitions=3 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthetic target, sweep over the depth of f and e
    SynthDepth,
    /// Synthetic target, sweep over the embedding dimension
    SynthEmbed,
    /// Rotation prediction on MNIST, Fashion-MNIST or CIFAR-10
    Rotation,
    /// Per-pixel colorization on CIFAR-10
    Colorization,
    /// Two students fitting one convolutional teacher
    Assumption1,
    /// Test MSE of shallow classifiers against hidden width
    Assumption2,
    /// Rotation task at fixed depth over a learning-rate grid
    Sensitivity,
    /// Normality and isomorphism report for two parameter files, as JSON
    Analyze(AnalyzeArgs),
    /// Backprop vs central differences on random primitives and tiny models
    Gradcheck(GradcheckArgs),
    /// Predicted minimal parameter counts as CSV
    Theory(TheoryArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    a: PathBuf,
    b: PathBuf,
    /// Layer widths, input to output
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Networks written without biases
    #[arg(long)]
    no_biases: bool,
    #[arg(long, default_value_t = IsoOptions::default().tol)]
    tol: f64,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random instances per primitive and per model kind
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = DEFAULT_H)]
    h: f64,
    /// Largest accepted relative error
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    m1: u32,
    #[arg(long)]
    m2: u32,
    #[arg(long, default_value_t = 1)]
    r: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01,0.005,0.001")]
    eps: Vec<f64>,
    /// Constant in front of every bound
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &common.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

fn emit(report: &ExperimentReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv = out.join(format!("{}.csv", report.experiment));
    let svg = out.join(format!("{}.svg", report.experiment));
    report.write_csv(&csv)?;
    report.write_svg(&svg)?;
    println!("point,model,metric,n,mean,sd,median");
    for s in report.summary() {
        println!("{},{},{},{},{:.6},{:.6},{:.6}", s.point, s.model, s.metric, s.n, s.mean, s.sd, s.median);
    }
    eprintln!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = &cli.common;
    let (scale, seed, data) = (c.scale, c.seed, c.data_dir.clone());
    let report = match cli.cmd {
        Cmd::SynthDepth => DepthSweep::from_config(&load_config(c)?, scale, seed)?.run()?,
        Cmd::SynthEmbed => EmbedDimSweep::from_config(&load_config(c)?, scale, seed)?.run()?,
        Cmd::Rotation => RotationExperiment::from_config(&load_config(c)?, scale, seed, data)?.run()?,
        Cmd::Sensitivity => {
            let mut cfg = load_config(c)?;
            match cfg.raw("variant") {
                None | Some("learning-rate") => cfg.set("variant", "learning-rate"),
                Some(other) => bail!("sensitivity always sweeps the learning rate, config asks for variant {other:?}"),
            }
            RotationExperiment::from_config(&cfg, scale, seed, data)?.run()?
        }
        Cmd::Colorization => ColorizationExperiment::from_config(&load_config(c)?, scale, seed, data)?.run()?,
        Cmd::Assumption1 => Assumption1::from_config(&load_config(c)?, scale, seed, data)?.run()?,
        Cmd::Assumption2 => Assumption2::from_config(&load_config(c)?, scale, seed, data)?.run()?,
        Cmd::Analyze(a) => {
            let spec = MlpSpec::new(a.widths, a.activation)?.with_biases(!a.no_biases);
            let (pa, pb) = (load_params(&a.a, &spec)?, load_params(&a.b, &spec)?);
            let opts = IsoOptions {
                tol: a.tol,
                ..IsoOptions::default()
            };
            println!("{}", serde_json::to_string_pretty(&analyze(&spec, &pa, &pb, &opts)?)?);
            return Ok(ExitCode::SUCCESS);
        }
        Cmd::Gradcheck(g) => {
            let lines = run_suite(g.cases, g.h, &mut seeded(seed))?;
            println!("kind,case,max_rel_error,pass");
            let mut failed = 0;
            for l in &lines {
                let pass = l.max_rel_error <= g.tol;
                failed += usize::from(!pass);
                println!("{},{},{:e},{}", l.kind, l.case, l.max_rel_error, pass);
            }
            eprintln!("{} checks, {failed} above {:e}", lines.len(), g.tol);
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Cmd::Theory(t) => {
            let first = *t.eps.first().context("--eps needs at least one value")?;
            let scenario = ComplexityScenario::new(t.m1, t.m2, t.r, first)?.with_constant(t.constant)?;
            print!("{}", budget_csv(&budget_table(&scenario, &t.eps)?));
            return Ok(ExitCode::SUCCESS);
        }
    };
    emit(&report, &c.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
