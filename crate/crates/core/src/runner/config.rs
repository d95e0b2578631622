//! Run configuration and its flat `key = value` text form.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gmm::{Dataset, LatentPrior};
use crate::metrics::EvalProtocol;
use crate::nn::{Activation, MlpSpec, DEFAULT_LEAK};
use crate::objectives::{ObjectiveKind, Variant};
use crate::runner::adam::AdamConfig;

/// Data lives in the plane.
pub const DATA_DIM: usize = 2;

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub objective: ObjectiveKind,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub m_hidden: Vec<usize>,
    pub leak: f64,
    pub latent_dim: usize,
    pub latent_prior: LatentPrior,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Discriminator updates per generator update; `None` picks 5 for the
    /// Wasserstein variants and 1 otherwise.
    pub d_steps: Option<usize>,
    pub m_steps: usize,
    pub ema_decay: f64,
    pub epochs: usize,
    pub train_set_size: usize,
    /// Epochs between evaluations. The final epoch is always evaluated.
    pub eval_interval: usize,
    pub eval: EvalProtocol,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::Ring,
            objective: ObjectiveKind::new(Variant::VganVer),
            g_hidden: vec![128, 128],
            d_hidden: vec![128, 128],
            m_hidden: vec![128],
            leak: DEFAULT_LEAK,
            latent_dim: 2,
            latent_prior: LatentPrior::StandardNormal,
            batch_size: 64,
            adam: AdamConfig::default(),
            d_steps: None,
            m_steps: 1,
            ema_decay: 0.99,
            epochs: 400,
            train_set_size: 100_000,
            eval_interval: 10,
            eval: EvalProtocol::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse(key, w.trim())).collect()
}

fn join(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 27] = [
        "dataset",
        "variant",
        "lambda",
        "gp_weight",
        "generator_loss",
        "clip",
        "g_hidden",
        "d_hidden",
        "m_hidden",
        "leak",
        "latent_dim",
        "latent_prior",
        "batch_size",
        "learning_rate",
        "beta1",
        "beta2",
        "adam_eps",
        "d_steps",
        "m_steps",
        "ema_decay",
        "epochs",
        "train_set_size",
        "eval_interval",
        "eval_samples",
        "eval_repeats",
        "eval_exact_cap",
        "seed",
    ];

    /// Sets one field from its textual form. `output_dir` is accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = v.parse()?,
            "variant" => self.objective.variant = v.parse()?,
            "lambda" => self.objective.lambda = parse(key, v)?,
            "gp_weight" => self.objective.gp_weight = parse(key, v)?,
            "generator_loss" => self.objective.generator_loss = v.parse()?,
            "clip" => self.objective.clip = v.parse()?,
            "g_hidden" => self.g_hidden = parse_widths(key, v)?,
            "d_hidden" => self.d_hidden = parse_widths(key, v)?,
            "m_hidden" => self.m_hidden = parse_widths(key, v)?,
            "leak" => self.leak = parse(key, v)?,
            "latent_dim" => self.latent_dim = parse(key, v)?,
            "latent_prior" => self.latent_prior = v.parse()?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "learning_rate" => self.adam.lr = parse(key, v)?,
            "beta1" => self.adam.beta1 = parse(key, v)?,
            "beta2" => self.adam.beta2 = parse(key, v)?,
            "adam_eps" => self.adam.eps = parse(key, v)?,
            "d_steps" => {
                self.d_steps = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "m_steps" => self.m_steps = parse(key, v)?,
            "ema_decay" => self.ema_decay = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "train_set_size" => self.train_set_size = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "eval_samples" => self.eval.n_per_side = parse(key, v)?,
            "eval_repeats" => self.eval.repeats = parse(key, v)?,
            "eval_exact_cap" => self.eval.exact_cap = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let o = &self.objective;
        Some(match key {
            "dataset" => self.dataset.to_string(),
            "variant" => o.variant.to_string(),
            "lambda" => o.lambda.to_string(),
            "gp_weight" => o.gp_weight.to_string(),
            "generator_loss" => o.generator_loss.to_string(),
            "clip" => o.clip.to_string(),
            "g_hidden" => join(&self.g_hidden),
            "d_hidden" => join(&self.d_hidden),
            "m_hidden" => join(&self.m_hidden),
            "leak" => self.leak.to_string(),
            "latent_dim" => self.latent_dim.to_string(),
            "latent_prior" => self.latent_prior.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => self.adam.lr.to_string(),
            "beta1" => self.adam.beta1.to_string(),
            "beta2" => self.adam.beta2.to_string(),
            "adam_eps" => self.adam.eps.to_string(),
            "d_steps" => self.d_steps.map_or("auto".into(), |d| d.to_string()),
            "m_steps" => self.m_steps.to_string(),
            "ema_decay" => self.ema_decay.to_string(),
            "epochs" => self.epochs.to_string(),
            "train_set_size" => self.train_set_size.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "eval_samples" => self.eval.n_per_side.to_string(),
            "eval_repeats" => self.eval.repeats.to_string(),
            "eval_exact_cap" => self.eval.exact_cap.to_string(),
            "seed" => self.seed.to_string(),
            "output_dir" => self.output_dir.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&crate::io::read_text(path)?)
    }

    /// Every key in a fixed order; `from_text` of the result reproduces
    /// `self` apart from `output_dir`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::KEYS {
            s.push_str(&format!("{k} = {}\n", self.get(k).expect("known key")));
        }
        s
    }

    pub fn d_steps(&self) -> usize {
        self.d_steps
            .unwrap_or(if self.objective.variant.is_wasserstein() {
                5
            } else {
                1
            })
    }

    pub fn iterations_per_epoch(&self) -> usize {
        self.train_set_size / self.batch_size.max(1)
    }

    fn spec(&self, input: usize, hidden: &[usize], output: usize) -> Result<MlpSpec> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        MlpSpec::new(
            widths,
            Activation::LeakyRelu(self.leak),
            Activation::Identity,
        )
    }

    pub fn generator_spec(&self) -> Result<MlpSpec> {
        self.spec(self.latent_dim, &self.g_hidden, DATA_DIM)
    }

    pub fn discriminator_spec(&self) -> Result<MlpSpec> {
        self.spec(DATA_DIM, &self.d_hidden, 1)
    }

    pub fn statistics_spec(&self) -> Result<MlpSpec> {
        self.spec(DATA_DIM + self.latent_dim, &self.m_hidden, 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.adam.validate()?;
        let positive = [
            ("batch_size", self.batch_size),
            ("latent_dim", self.latent_dim),
            ("m_steps", self.m_steps),
            ("d_steps", self.d_steps()),
            ("eval_interval", self.eval_interval),
            ("eval_samples", self.eval.n_per_side),
            ("eval_repeats", self.eval.repeats),
            ("eval_exact_cap", self.eval.exact_cap),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.eval.n_per_side < 2 {
            return Err(Error::Config("eval_samples must be at least 2".into()));
        }
        if self.train_set_size < self.batch_size {
            return Err(Error::Config(format!(
                "train_set_size {} is smaller than one batch of {}",
                self.train_set_size, self.batch_size
            )));
        }
        if !(self.leak.is_finite()) {
            return Err(Error::Config(format!(
                "leak must be finite, got {}",
                self.leak
            )));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must be in [0, 1), got {}",
                self.ema_decay
            )));
        }
        self.generator_spec()?;
        self.discriminator_spec()?;
        self.statistics_spec()?;
        Ok(())
    }
}
