//! The alternating D / M / G training loop.

use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::gmm::{sample_gmm, sample_prior, GmmSpec};
use crate::io::{write_points, write_text};
use crate::metrics::{evaluate, MetricsReport};
use crate::nn::{kaiming_init, mlp_forward, MlpSpec, ParamSet};
use crate::objectives::{
    mine_gradient, mine_input_gradient, penalty_norms, vanilla_d_loss, vanilla_g_loss,
    ver_generator_gradient, wgan_d_loss, wgan_g_loss, MineState,
};
use crate::rng::RngStream;
use crate::runner::adam::{adam_step, AdamState};
use crate::runner::checkpoint::checkpoint_save;
use crate::runner::config::ExperimentConfig;
use crate::tensor::Tensor;

pub const METRICS_HEADER: &str = "epoch,modes,hq,kl,wd,mmd,ta,ra,ga,pr,re";
pub const METRICS_FILE: &str = "metrics.csv";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const CONFIG_FILE: &str = "config.txt";
pub const SAMPLES_FILE: &str = "samples.csv";

/// Losses seen in one iteration (the last inner step of each network).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub d_loss: f64,
    pub g_loss: f64,
    /// Statistics-network batch bound, when the variant trains one.
    pub mi: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    pub report: MetricsReport,
}

impl EvalRecord {
    pub fn csv_row(&self) -> String {
        format!("{},{}", self.epoch, self.report.csv_row())
    }
}

/// The evaluation with the smallest Wasserstein distance.
#[derive(Clone, Debug, PartialEq)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub wd: f64,
    pub report: MetricsReport,
    pub generator: ParamSet,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub generator: ParamSet,
    pub discriminator: ParamSet,
    pub statistics: Option<ParamSet>,
    pub series: Vec<EvalRecord>,
    pub best: Option<BestCheckpoint>,
}

impl TrainResult {
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.series)
    }
}

pub fn metrics_csv(series: &[EvalRecord]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in series {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Networks, optimizer states and random streams of one run.
///
/// Every consumer of randomness has its own stream, so a variant that adds
/// statistics-network updates leaves the draws of the shared updates alone.
pub struct Trainer {
    cfg: ExperimentConfig,
    g_spec: MlpSpec,
    d_spec: MlpSpec,
    m_spec: MlpSpec,
    data_spec: GmmSpec,
    data: Tensor,
    g: ParamSet,
    d: ParamSet,
    m: ParamSet,
    g_opt: AdamState,
    d_opt: AdamState,
    m_opt: AdamState,
    mine: MineState,
    batch_rng: RngStream,
    latent_rng: RngStream,
    interp_rng: RngStream,
    mine_latent_rng: RngStream,
    shuffle_rng: RngStream,
    iteration: u64,
}

impl Trainer {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let g_spec = cfg.generator_spec()?;
        let d_spec = cfg.discriminator_spec()?;
        let m_spec = cfg.statistics_spec()?;
        let data_spec = cfg.dataset.spec();
        let data = sample_gmm(
            &data_spec,
            cfg.train_set_size,
            &mut RngStream::new(seed, "data"),
        );
        let g = kaiming_init(&g_spec, &mut RngStream::new(seed, "init-g"));
        let d = kaiming_init(&d_spec, &mut RngStream::new(seed, "init-d"));
        let m = kaiming_init(&m_spec, &mut RngStream::new(seed, "init-m"));
        Ok(Self {
            g_opt: AdamState::new(&g),
            d_opt: AdamState::new(&d),
            m_opt: AdamState::new(&m),
            mine: MineState::new(cfg.ema_decay)?,
            batch_rng: RngStream::new(seed, "batch"),
            latent_rng: RngStream::new(seed, "latent"),
            interp_rng: RngStream::new(seed, "interp"),
            mine_latent_rng: RngStream::new(seed, "mine-latent"),
            shuffle_rng: RngStream::new(seed, "shuffle"),
            cfg,
            g_spec,
            d_spec,
            m_spec,
            data_spec,
            data,
            g,
            d,
            m,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &ParamSet {
        &self.g
    }

    pub fn discriminator(&self) -> &ParamSet {
        &self.d
    }

    pub fn statistics(&self) -> &ParamSet {
        &self.m
    }

    pub fn generator_spec(&self) -> &MlpSpec {
        &self.g_spec
    }

    pub fn dataset(&self) -> &Tensor {
        &self.data
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    fn latent(&mut self) -> Tensor {
        sample_prior(
            self.cfg.latent_prior,
            self.cfg.latent_dim,
            self.cfg.batch_size,
            &mut self.latent_rng,
        )
    }

    fn real_batch(&mut self) -> Tensor {
        let n = self.data.rows();
        let idx: Vec<usize> = (0..self.cfg.batch_size)
            .map(|_| self.batch_rng.below(n))
            .collect();
        self.data.select_rows(&idx)
    }

    fn generate(&self, z: &Tensor) -> Result<Tensor> {
        forward(&self.g_spec, &self.g, z)
    }

    fn d_step(&mut self) -> Result<f64> {
        let real = self.real_batch();
        let z = self.latent();
        let fake = self.generate(&z)?;
        let mut tape = Tape::new();
        let dp = self.d.bind(&mut tape);
        let r = tape.constant(real.clone());
        let f = tape.constant(fake.clone());
        let dr = mlp_forward(&mut tape, &self.d_spec, &dp, r)?;
        let df = mlp_forward(&mut tape, &self.d_spec, &dp, f)?;
        let loss = if self.cfg.objective.variant.is_wasserstein() {
            let n = real.rows();
            let mut mix = Vec::with_capacity(2 * n);
            for i in 0..n {
                let e = self.interp_rng.uniform();
                for c in 0..2 {
                    mix.push(e * real.get(i, c) + (1.0 - e) * fake.get(i, c));
                }
            }
            let x = tape.constant(Tensor::new(n, 2, mix)?);
            let norms = penalty_norms(&mut tape, &self.d_spec, &dp, x)?;
            wgan_d_loss(&mut tape, dr, df, norms, self.cfg.objective.gp_weight)?
        } else {
            vanilla_d_loss(&mut tape, dr, df)?
        };
        let value = tape.value(loss).item();
        let grads = self
            .d
            .with_tensors(tape.backward(loss, &dp, false)?.into_values())?;
        adam_step(&mut self.d, &grads, &mut self.d_opt, &self.cfg.adam)?;
        Ok(value)
    }

    fn m_step(&mut self) -> Result<f64> {
        let z = sample_prior(
            self.cfg.latent_prior,
            self.cfg.latent_dim,
            self.cfg.batch_size,
            &mut self.mine_latent_rng,
        );
        let xhat = self.generate(&z)?;
        let perm = self.shuffle_rng.non_identity_permutation(z.rows());
        let step = mine_gradient(&self.m_spec, &self.m, &z, &xhat, &perm, &mut self.mine)?;
        if !step.estimate.is_finite() {
            return Err(Error::Diverged {
                value: step.estimate,
                context: "statistics network bound".into(),
            });
        }
        // ascend the bound
        let descent = self
            .m
            .with_tensors(step.grads.tensors().map(|g| g.map(|v| -v)).collect())?;
        adam_step(&mut self.m, &descent, &mut self.m_opt, &self.cfg.adam)?;
        Ok(step.estimate)
    }

    fn g_step(&mut self) -> Result<(f64, Option<f64>)> {
        let z = self.latent();
        let mut tape = Tape::new();
        let gp = self.g.bind(&mut tape);
        let zn = tape.constant(z.clone());
        let xhat = mlp_forward(&mut tape, &self.g_spec, &gp, zn)?;
        let dp: Vec<_> = self.d.tensors().map(|t| tape.constant(t.clone())).collect();
        let df = mlp_forward(&mut tape, &self.d_spec, &dp, xhat)?;
        let loss = if self.cfg.objective.variant.is_wasserstein() {
            wgan_g_loss(&mut tape, df)?
        } else {
            vanilla_g_loss(&mut tape, df, self.cfg.objective.generator_loss)?
        };
        let value = tape.value(loss).item();
        let adv = self
            .g
            .with_tensors(tape.backward(loss, &gp, false)?.into_values())?;
        let (grads, mi) = if self.cfg.objective.variant.has_ver() {
            let perm = self.shuffle_rng.non_identity_permutation(z.rows());
            let (mi, g) =
                mine_input_gradient(&mut tape, &self.m_spec, &self.m, &z, xhat, &perm, &gp)?;
            let mi_grads = self.g.with_tensors(g)?;
            let o = &self.cfg.objective;
            (
                ver_generator_gradient(&adv, &mi_grads, o.lambda, o.clip)?,
                Some(mi),
            )
        } else {
            (adv, None)
        };
        adam_step(&mut self.g, &grads, &mut self.g_opt, &self.cfg.adam)?;
        Ok((value, mi))
    }

    /// One iteration: discriminator steps, statistics-network steps for the
    /// regularized variants, then one generator step.
    pub fn step(&mut self) -> Result<StepStats> {
        let mut stats = StepStats::default();
        for _ in 0..self.cfg.d_steps() {
            stats.d_loss = self.d_step()?;
        }
        if self.cfg.objective.variant.has_ver() {
            for _ in 0..self.cfg.m_steps {
                stats.mi = Some(self.m_step()?);
            }
        }
        let (g_loss, _) = self.g_step()?;
        stats.g_loss = g_loss;
        if !(stats.d_loss.is_finite() && stats.g_loss.is_finite()) {
            return Err(Error::Diverged {
                value: if stats.d_loss.is_finite() {
                    stats.g_loss
                } else {
                    stats.d_loss
                },
                context: "adversarial loss".into(),
            });
        }
        self.iteration += 1;
        Ok(stats)
    }

    /// `n` generator samples from the latent stream `rng`.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Tensor> {
        let z = sample_prior(self.cfg.latent_prior, self.cfg.latent_dim, n, rng);
        self.generate(&z)
    }

    /// Metrics of the current generator under the configured protocol.
    /// Depends only on the seed, `epoch` and the generator parameters.
    pub fn evaluate(&self, epoch: usize) -> Result<MetricsReport> {
        let seed = self.cfg.seed;
        let mut latent = RngStream::new(seed, &format!("eval-latent/{epoch}"));
        let rng = RngStream::new(seed, &format!("eval/{epoch}"));
        evaluate(
            &self.data_spec,
            |n| self.sample(n, &mut latent),
            &self.cfg.eval,
            &rng,
        )
    }

    fn checkpoint_sets(&self) -> Vec<(&'static str, &ParamSet)> {
        let mut sets = vec![("g", &self.g), ("d", &self.d)];
        if self.cfg.objective.variant.has_ver() {
            sets.push(("m", &self.m));
        }
        sets
    }
}

/// Plain forward pass of `spec` with parameters `params`.
pub fn forward(spec: &MlpSpec, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let p: Vec<_> = params.tensors().map(|t| tape.constant(t.clone())).collect();
    let xin = tape.constant(x.clone());
    let y = mlp_forward(&mut tape, spec, &p, xin)?;
    Ok(tape.value(y).clone())
}

pub fn train(cfg: ExperimentConfig) -> Result<TrainResult> {
    train_with(cfg, |_| {})
}

/// Runs the configured number of epochs, calling `observe` after every
/// evaluation. When `output_dir` is set it receives `config.txt`,
/// `metrics.csv`, `last.ckpt` (the last evaluated state), `best.ckpt` and
/// `samples.csv` (drawn from the best generator).
pub fn train_with<F>(cfg: ExperimentConfig, mut observe: F) -> Result<TrainResult>
where
    F: FnMut(&EvalRecord),
{
    let mut trainer = Trainer::new(cfg)?;
    let cfg = trainer.cfg.clone();
    let out = cfg.output_dir.clone();
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join(CONFIG_FILE), &cfg.to_text())?;
        write_text(&dir.join(METRICS_FILE), &metrics_csv(&[]))?;
        checkpoint_save(&dir.join(LAST_CHECKPOINT), &trainer.checkpoint_sets())?;
    }

    let mut series = Vec::new();
    let mut best: Option<BestCheckpoint> = None;
    let per_epoch = cfg.iterations_per_epoch();
    for epoch in 1..=cfg.epochs {
        for _ in 0..per_epoch {
            if let Err(e) = trainer.step() {
                return Err(diverged(e, trainer.iteration, out.as_deref(), &series));
            }
        }
        if epoch % cfg.eval_interval != 0 && epoch != cfg.epochs {
            continue;
        }
        let report = trainer
            .evaluate(epoch)
            .map_err(|e| diverged(e, trainer.iteration, out.as_deref(), &series))?;
        let record = EvalRecord { epoch, report };
        series.push(record);
        let improved = best.as_ref().is_none_or(|b| report.wd < b.wd);
        if let Some(dir) = &out {
            checkpoint_save(&dir.join(LAST_CHECKPOINT), &trainer.checkpoint_sets())?;
            if improved {
                checkpoint_save(&dir.join(BEST_CHECKPOINT), &trainer.checkpoint_sets())?;
            }
            write_text(&dir.join(METRICS_FILE), &metrics_csv(&series))?;
        }
        if improved {
            best = Some(BestCheckpoint {
                epoch,
                wd: report.wd,
                report,
                generator: trainer.g.clone(),
                path: out.as_ref().map(|d| d.join(BEST_CHECKPOINT)),
            });
        }
        observe(&record);
    }

    if let (Some(dir), Some(b)) = (&out, &best) {
        let mut rng = RngStream::new(cfg.seed, "export");
        let z = sample_prior(
            cfg.latent_prior,
            cfg.latent_dim,
            cfg.eval.n_per_side,
            &mut rng,
        );
        write_points(
            &dir.join(SAMPLES_FILE),
            &forward(&trainer.g_spec, &b.generator, &z)?,
        )?;
    }

    let has_ver = cfg.objective.variant.has_ver();
    Ok(TrainResult {
        generator: trainer.g,
        discriminator: trainer.d,
        statistics: has_ver.then_some(trainer.m),
        series,
        best,
    })
}

fn diverged(e: Error, iteration: u64, out: Option<&Path>, series: &[EvalRecord]) -> Error {
    let (value, context) = match e {
        Error::Diverged { value, context } => (value, context),
        Error::NumericOverflow { op, node } => {
            (f64::NAN, format!("{op} overflowed at node {node}"))
        }
        other => return other,
    };
    let last = match (out, series.last()) {
        (Some(dir), Some(r)) => format!(
            "{} (epoch {})",
            dir.join(LAST_CHECKPOINT).display(),
            r.epoch
        ),
        (Some(dir), None) => format!("{} (initial)", dir.join(LAST_CHECKPOINT).display()),
        (None, _) => "none".into(),
    };
    Error::Diverged {
        value,
        context: format!("{context}; iteration {iteration}; last good checkpoint {last}"),
    }
}
