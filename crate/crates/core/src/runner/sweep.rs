//! Lambda-by-seed grids of independent training runs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::runner::config::ExperimentConfig;
use crate::runner::train::train;

pub const THREADS_ENV: &str = "GANVER_THREADS";
pub const SWEEP_HEADER: &str = "lambda,seed,epoch,modes,hq,kl,wd,mmd,ta,ra,ga,pr,re";

/// Best-checkpoint metrics of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub epoch: usize,
    pub report: MetricsReport,
}

/// Per-lambda medians over seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepAggregate {
    pub lambda: f64,
    pub runs: usize,
    pub median: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub aggregate: Vec<SweepAggregate>,
}

impl SweepResult {
    /// Lambda whose median Wasserstein distance is smallest (first on ties).
    pub fn best_lambda(&self) -> Option<f64> {
        self.aggregate
            .iter()
            .fold(None::<&SweepAggregate>, |best, a| match best {
                Some(b) if b.median.wd <= a.median.wd => Some(b),
                _ => Some(a),
            })
            .map(|a| a.lambda)
    }

    /// Per-run rows followed by one `median` row per lambda.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.lambda,
                r.seed,
                r.epoch,
                r.report.csv_row()
            ));
        }
        for a in &self.aggregate {
            s.push_str(&format!("{},median,,{}\n", a.lambda, a.median.csv_row()));
        }
        s
    }
}

/// Median with the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Field-wise median of reports.
pub fn median_report(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let mut out = [0.0; 10];
    for (k, o) in out.iter_mut().enumerate() {
        let col: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        *o = median(&col).expect("non-empty");
    }
    Some(MetricsReport::from_values(out))
}

/// Worker count: `GANVER_THREADS` if set, else the available parallelism.
pub fn thread_budget() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Trains `base` once per `(lambda, seed)` pair. Runs write to
/// `<output_dir>/lambda-<l>-seed-<s>` when `base.output_dir` is set.
pub fn sweep(
    base: &ExperimentConfig,
    lambdas: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<SweepResult> {
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one lambda and one seed".into(),
        ));
    }
    let jobs: Vec<ExperimentConfig> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .map(|(l, s)| {
            let mut c = base.clone();
            c.objective.lambda = l;
            c.seed = s;
            c.output_dir = base
                .output_dir
                .as_ref()
                .map(|d| d.join(format!("lambda-{l}-seed-{s}")));
            c
        })
        .collect();
    for j in &jobs {
        j.validate()?;
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = threads.clamp(1, jobs.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = jobs.get(i) else { break };
                let row = train(cfg.clone()).and_then(|r| {
                    let b = r.best.ok_or_else(|| {
                        Error::Config("sweep runs need at least one epoch".into())
                    })?;
                    Ok(SweepRow {
                        lambda: cfg.objective.lambda,
                        seed: cfg.seed,
                        epoch: b.epoch,
                        report: b.report,
                    })
                });
                results.lock().expect("no poisoned workers")[i] = Some(row);
            });
        }
    });

    let rows = results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = lambdas
        .iter()
        .map(|&l| {
            let reports: Vec<_> = rows
                .iter()
                .filter(|r| r.lambda == l)
                .map(|r| r.report)
                .collect();
            SweepAggregate {
                lambda: l,
                runs: reports.len(),
                median: median_report(&reports).expect("one run per seed"),
            }
        })
        .collect();
    Ok(SweepResult { rows, aggregate })
}
