use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ganver_core::gmm::{sample_gmm, sample_prior, Dataset, GmmSpec};
use ganver_core::io::{points_to_csv, read_points, write_points};
use ganver_core::metrics::{compare, evaluate, MetricsReport};
use ganver_core::rng::RngStream;
use ganver_core::runner::checkpoint::{checkpoint_load, take_set};
use ganver_core::runner::sweep::thread_budget;
use ganver_core::runner::train::{forward, CONFIG_FILE, METRICS_HEADER};
use ganver_core::runner::{scatter_svg, sweep, train_with, ExperimentConfig};
use ganver_core::{Error, Result, Tensor};

#[derive(Parser)]
#[command(
    name = "ganver",
    version,
    about = "Entropy-regularized GANs on 2-D Gaussian mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a benchmark mixture to CSV.
    SynthData(SynthArgs),
    /// Train one run, writing checkpoints and a metrics CSV.
    Train(TrainArgs),
    /// Score sample CSVs or a checkpoint.
    Eval(EvalArgs),
    /// Train a lambda-by-seed grid and print per-run and median rows.
    Sweep(SweepArgs),
    /// Draw real and generated samples as an SVG scatter.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "ring")]
    dataset: Dataset,
    #[arg(long)]
    n: usize,
    /// Override the component standard deviation (0 puts points on the means).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the other flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("variant", &self.variant),
            ("lambda", &self.lambda),
            ("epochs", &self.epochs),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    seed: u64,
    /// Output directory; falls back to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-evaluation progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, requires = "gen", conflicts_with = "checkpoint")]
    real: Option<PathBuf>,
    #[arg(long, requires = "real")]
    gen: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Run config for the checkpoint; defaults to `config.txt` beside it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mixture that defines modes and bins; defaults to the config's.
    #[arg(long)]
    dataset: Option<Dataset>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points per side for checkpoint evaluation.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Parent directory for per-run outputs and `sweep.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Real samples; drawn from the dataset when omitted.
    #[arg(long)]
    real: Option<PathBuf>,
    #[arg(long, conflicts_with = "checkpoint")]
    gen: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<Dataset>,
    /// Points drawn for any side not read from a file.
    #[arg(long, default_value_t = 2500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 600)]
    size: u32,
    #[arg(long)]
    out: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.into(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_csv(r: &MetricsReport) -> String {
    format!("{}\n{}\n", MetricsReport::CSV_HEADER, r.csv_row())
}

/// Config for a checkpoint: explicit, else the one saved beside it.
fn checkpoint_config(explicit: Option<&Path>, ckpt: &Path) -> Result<ExperimentConfig> {
    if let Some(p) = explicit {
        return ExperimentConfig::load(p);
    }
    let beside = ckpt.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
    if beside.exists() {
        ExperimentConfig::load(&beside)
    } else {
        Ok(ExperimentConfig::default())
    }
}

struct Generator {
    cfg: ExperimentConfig,
    spec: ganver_core::nn::MlpSpec,
    params: ganver_core::nn::ParamSet,
}

impl Generator {
    fn load(ckpt: &Path, config: Option<&Path>) -> Result<Self> {
        let cfg = checkpoint_config(config, ckpt)?;
        let spec = cfg.generator_spec()?;
        let mut sets = checkpoint_load(ckpt)?;
        let params = take_set(&mut sets, "g", &spec)?;
        Ok(Self { cfg, spec, params })
    }

    fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Tensor> {
        let z = sample_prior(self.cfg.latent_prior, self.cfg.latent_dim, n, rng);
        forward(&self.spec, &self.params, &z)
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = a.dataset.spec();
    if let Some(s) = a.sigma {
        spec = spec.with_sigma(s)?;
    }
    let x = sample_gmm(&spec, a.n, &mut RngStream::new(a.seed, "data"));
    match &a.out {
        Some(p) => write_points(p, &x),
        None => emit(None, &points_to_csv(&x)?),
    }
}

fn run_train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.run.config()?;
    cfg.seed = a.seed;
    if let Some(o) = a.out {
        cfg.output_dir = Some(o);
    }
    if cfg.output_dir.is_none() {
        return Err(Error::Config(
            "train needs --out or output_dir in the config".into(),
        ));
    }
    let quiet = a.quiet;
    let result = train_with(cfg, |r| {
        if !quiet {
            eprintln!("epoch {}: {}", r.epoch, r.report);
        }
    })?;
    match &result.best {
        Some(b) => emit(
            None,
            &format!("{METRICS_HEADER}\n{},{}\n", b.epoch, b.report.csv_row()),
        ),
        None => emit(None, &format!("{METRICS_HEADER}\n")),
    }
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let report = if let (Some(real), Some(gen)) = (&a.real, &a.gen) {
        let spec: GmmSpec = a.dataset.unwrap_or(Dataset::Ring).spec();
        let (real, gen) = (read_points(real)?, read_points(gen)?);
        let cap = ExperimentConfig::default().eval.exact_cap;
        compare(
            &real,
            &gen,
            &spec,
            cap,
            &mut RngStream::new(a.seed, "eval/wd"),
        )?
    } else if let Some(ckpt) = &a.checkpoint {
        let g = Generator::load(ckpt, a.config.as_deref())?;
        let spec = a.dataset.unwrap_or(g.cfg.dataset).spec();
        let mut protocol = g.cfg.eval;
        if let Some(n) = a.samples {
            protocol.n_per_side = n;
        }
        if let Some(r) = a.repeats {
            protocol.repeats = r;
        }
        let mut latent = RngStream::new(a.seed, "eval-latent");
        let rng = RngStream::new(a.seed, "eval");
        evaluate(&spec, |n| g.sample(n, &mut latent), &protocol, &rng)?
    } else {
        return Err(Error::InvalidInput(
            "eval needs --real and --gen, or --checkpoint".into(),
        ));
    };
    emit(a.out.as_deref(), &report_csv(&report))
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = a.run.config()?;
    if let Some(o) = a.out {
        cfg.output_dir = Some(o);
    }
    let result = sweep(&cfg, &a.lambdas, &a.seeds, thread_budget()?)?;
    let csv = result.to_csv();
    if let Some(dir) = &cfg.output_dir {
        let p = dir.join("sweep.csv");
        std::fs::write(&p, &csv).map_err(|e| Error::Io { path: p, source: e })?;
    }
    emit(None, &csv)
}

fn run_plot(a: PlotArgs) -> Result<()> {
    let gen_model = match &a.checkpoint {
        Some(c) => Some(Generator::load(c, a.config.as_deref())?),
        None => None,
    };
    let dataset = a
        .dataset
        .or(gen_model.as_ref().map(|g| g.cfg.dataset))
        .unwrap_or(Dataset::Ring);
    let spec = dataset.spec();
    let real = match &a.real {
        Some(p) => read_points(p)?,
        None => sample_gmm(&spec, a.n, &mut RngStream::new(a.seed, "plot-real")),
    };
    let gen = match (&a.gen, &gen_model) {
        (Some(p), _) => read_points(p)?,
        (None, Some(g)) => g.sample(a.n, &mut RngStream::new(a.seed, "plot-latent"))?,
        (None, None) => {
            return Err(Error::InvalidInput(
                "plot needs --gen or --checkpoint".into(),
            ))
        }
    };
    emit(Some(&a.out), &scatter_svg(&real, &gen, &spec, a.size))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let head: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .collect();
            eprintln!(
                "error: usage: {}",
                one_line(head.join(" ").trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::SynthData(a) => synth(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Plot(a) => run_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
