//! Sample-quality metrics for generated 2-D point clouds.
//!
//! Every metric consumes two `n x 2` tensors (reference draws first) and is
//! a pure function of its inputs except where a stream is passed explicitly.

mod assignment;

pub use assignment::{min_cost_assignment, wasserstein_empirical, wasserstein_exact};

use std::fmt;

use crate::error::{Error, Result};
use crate::gmm::{sample_gmm, GmmSpec};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Points further than this many standard deviations from every mean are
/// low quality and do not cover a mode.
pub const QUALITY_RADIUS_SIGMAS: f64 = 3.0;

fn check_points(x: &Tensor, what: &str) -> Result<()> {
    if x.cols() != 2 {
        return Err(Error::InvalidInput(format!(
            "{what} must have 2 columns, got {}",
            x.cols()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    Ok(())
}

fn in_quality_radius(spec: &GmmSpec, p: &[f64]) -> Option<usize> {
    let r = QUALITY_RADIUS_SIGMAS * spec.sigma();
    let mut best: Option<(usize, f64)> = None;
    for (k, m) in spec.means().iter().enumerate() {
        let d = (p[0] - m[0]).hypot(p[1] - m[1]);
        if d <= r && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.map(|(k, _)| k)
}

/// Number of mixture components with at least one point within 3 sigma.
pub fn count_modes(x: &Tensor, spec: &GmmSpec) -> Result<usize> {
    check_points(x, "samples")?;
    let mut hit = vec![false; spec.n_components()];
    for p in x.row_iter() {
        if let Some(k) = in_quality_radius(spec, p) {
            hit[k] = true;
        }
    }
    Ok(hit.iter().filter(|&&h| h).count())
}

/// Fraction of points within 3 sigma of some component mean.
pub fn high_quality_ratio(x: &Tensor, spec: &GmmSpec) -> Result<f64> {
    check_points(x, "samples")?;
    let good = x
        .row_iter()
        .filter(|p| in_quality_radius(spec, p).is_some())
        .count();
    Ok(good as f64 / x.rows() as f64)
}

/// A fixed rectangular lattice of square cells. Points outside it are
/// clamped into the border cells.
#[derive(Clone, Debug, PartialEq)]
pub struct BinGrid {
    pub origin: [f64; 2],
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
}

impl BinGrid {
    /// Cells of side sigma covering the bounding box of the means padded by
    /// 6 sigma on every side.
    pub fn for_spec(spec: &GmmSpec) -> Result<Self> {
        let s = spec.sigma();
        if s <= 0.0 {
            return Err(Error::InvalidInput("binning needs sigma > 0".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for m in spec.means() {
            for a in 0..2 {
                lo[a] = lo[a].min(m[a]);
                hi[a] = hi[a].max(m[a]);
            }
        }
        let pad = 6.0 * s;
        let count = |a: usize| (((hi[a] - lo[a] + 2.0 * pad) / s) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            origin: [lo[0] - pad, lo[1] - pad],
            cell: s,
            nx: count(0),
            ny: count(1),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, p: &[f64]) -> usize {
        let clamp = |v: f64, n: usize| {
            let i = ((v) / self.cell).floor();
            if i.is_nan() || i < 0.0 {
                0
            } else {
                (i as usize).min(n - 1)
            }
        };
        let ix = clamp(p[0] - self.origin[0], self.nx);
        let iy = clamp(p[1] - self.origin[1], self.ny);
        iy * self.nx + ix
    }

    pub fn histogram(&self, x: &Tensor) -> Vec<f64> {
        let mut h = vec![0.0; self.n_cells()];
        for p in x.row_iter() {
            h[self.index(p)] += 1.0;
        }
        h
    }
}

/// `KL(real || gen)` between additively smoothed histograms on `grid`.
/// Every cell receives pseudo-count `alpha` on both sides.
pub fn kl_histogram(real: &Tensor, gen: &Tensor, grid: &BinGrid, alpha: f64) -> Result<f64> {
    check_points(real, "real samples")?;
    check_points(gen, "generated samples")?;
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "smoothing must be positive, got {alpha}"
        )));
    }
    let hp = grid.histogram(real);
    let hq = grid.histogram(gen);
    let k = grid.n_cells() as f64;
    let zp = real.rows() as f64 + alpha * k;
    let zq = gen.rows() as f64 + alpha * k;
    Ok(hp
        .iter()
        .zip(&hq)
        .map(|(a, b)| {
            let p = (a + alpha) / zp;
            let q = (b + alpha) / zq;
            p * (p / q).ln()
        })
        .sum())
}

/// KL on the benchmark lattice for `spec` with add-one smoothing.
pub fn kl_binned(real: &Tensor, gen: &Tensor, spec: &GmmSpec) -> Result<f64> {
    kl_histogram(real, gen, &BinGrid::for_spec(spec)?, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmdEstimator {
    /// Diagonal terms excluded from the within-set sums.
    Unbiased,
    /// All pairs, including `k(x, x) = 1`.
    Biased,
}

/// Median of all pairwise Euclidean distances in `x` (mean of the two middle
/// values for an even count).
pub fn median_pairwise_distance(x: &Tensor) -> f64 {
    let n = x.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(dist2(x.row(i), x.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let len = d.len();
    let (lower, &mut m, _) = d.select_nth_unstable_by(len / 2, f64::total_cmp);
    if len % 2 == 1 {
        m
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + m)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared MMD with the Gaussian kernel `exp(-|a-b|^2 / (2 h^2))`.
///
/// With `bandwidth = None` the median pairwise distance of the pooled
/// sample is used. A zero bandwidth is an error.
pub fn mmd_gaussian(
    real: &Tensor,
    gen: &Tensor,
    bandwidth: Option<f64>,
    estimator: MmdEstimator,
) -> Result<f64> {
    check_points(real, "real samples")?;
    check_points(gen, "generated samples")?;
    let h = match bandwidth {
        Some(h) => h,
        None => median_pairwise_distance(&real.vstack(gen)?),
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "degenerate kernel bandwidth {h}"
        )));
    }
    let (n, m) = (real.rows(), gen.rows());
    if estimator == MmdEstimator::Unbiased && (n < 2 || m < 2) {
        return Err(Error::InvalidInput(
            "unbiased MMD needs at least 2 points per side".into(),
        ));
    }
    let g = 1.0 / (2.0 * h * h);
    let k = |a: &[f64], b: &[f64]| (-g * dist2(a, b)).exp();

    let within = |x: &Tensor| {
        let mut s = 0.0;
        for i in 0..x.rows() {
            for j in i + 1..x.rows() {
                s += k(x.row(i), x.row(j));
            }
        }
        2.0 * s
    };
    let mut cross = 0.0;
    for a in real.row_iter() {
        for b in gen.row_iter() {
            cross += k(a, b);
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    let (kxx, kyy) = (within(real), within(gen));
    Ok(match estimator {
        MmdEstimator::Unbiased => {
            kxx / (nf * (nf - 1.0)) + kyy / (mf * (mf - 1.0)) - 2.0 * cross / (nf * mf)
        }
        MmdEstimator::Biased => {
            (kxx + nf) / (nf * nf) + (kyy + mf) / (mf * mf) - 2.0 * cross / (nf * mf)
        }
    })
}

/// Leave-one-out 1-nearest-neighbour two-sample accuracies, in percent.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NnAccuracy {
    /// Overall accuracy.
    pub ta: f64,
    /// Accuracy on real points.
    pub ra: f64,
    /// Accuracy on generated points.
    pub ga: f64,
    /// Precision with "real" as the positive class.
    pub pr: f64,
    /// Recall with "real" as the positive class.
    pub re: f64,
}

/// Both sets must have the same size. Each point of `[real; gen]` takes the
/// label of its nearest other point. Distance ties go to the lowest pooled
/// index. Undefined ratios are 0.
pub fn one_nn_accuracy(real: &Tensor, gen: &Tensor) -> Result<NnAccuracy> {
    check_points(real, "real samples")?;
    check_points(gen, "generated samples")?;
    if real.rows() != gen.rows() {
        return Err(Error::ShapeMismatch {
            op: "one_nn_accuracy",
            lhs: real.shape(),
            rhs: gen.shape(),
        });
    }
    let pooled = real.vstack(gen)?;
    let n_real = real.rows();
    let total = pooled.rows();
    if total < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..total {
        let p = pooled.row(i);
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..total {
            if j == i {
                continue;
            }
            let d = dist2(p, pooled.row(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        let is_real = i < n_real;
        let says_real = best.0 < n_real;
        match (is_real, says_real) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let pct = |a: usize, b: usize| {
        if b == 0 {
            0.0
        } else {
            100.0 * a as f64 / b as f64
        }
    };
    Ok(NnAccuracy {
        ta: pct(tp + tn, total),
        ra: pct(tp, tp + fneg),
        ga: pct(tn, tn + fp),
        pr: pct(tp, tp + fp),
        re: pct(tp, tp + fneg),
    })
}

/// One row of the evaluation table.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub modes: f64,
    pub hq: f64,
    pub kl: f64,
    pub wd: f64,
    pub mmd: f64,
    pub nn: NnAccuracy,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "modes,hq,kl,wd,mmd,ta,ra,ga,pr,re";

    pub fn values(&self) -> [f64; 10] {
        let n = &self.nn;
        [
            self.modes, self.hq, self.kl, self.wd, self.mmd, n.ta, n.ra, n.ga, n.pr, n.re,
        ]
    }

    pub fn from_values(v: [f64; 10]) -> Self {
        Self {
            modes: v[0],
            hq: v[1],
            kl: v[2],
            wd: v[3],
            mmd: v[4],
            nn: NnAccuracy {
                ta: v[5],
                ra: v[6],
                ga: v[7],
                pr: v[8],
                re: v[9],
            },
        }
    }

    /// Comma-separated values in header order, shortest round-trip form.
    pub fn csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Field-wise arithmetic mean.
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let mut acc = [0.0; 10];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Some(Self::from_values(acc.map(|a| a / reports.len() as f64)))
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = &self.nn;
        write!(
            f,
            "modes={:.2} hq={:.4} kl={:.4} wd={:.4} mmd={:.5} ta={:.2} ra={:.2} ga={:.2} pr={:.2} re={:.2}",
            self.modes, self.hq, self.kl, self.wd, self.mmd, n.ta, n.ra, n.ga, n.pr, n.re
        )
    }
}

/// How many points and repeats an evaluation uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalProtocol {
    pub n_per_side: usize,
    pub repeats: usize,
    pub exact_cap: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            n_per_side: 2500,
            repeats: 5,
            exact_cap: 512,
        }
    }
}

/// Every metric for one pair of equal-size clouds.
pub fn compare(
    real: &Tensor,
    gen: &Tensor,
    spec: &GmmSpec,
    exact_cap: usize,
    rng: &mut RngStream,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        modes: count_modes(gen, spec)? as f64,
        hq: high_quality_ratio(gen, spec)?,
        kl: kl_binned(real, gen, spec)?,
        wd: wasserstein_empirical(real, gen, exact_cap, rng)?,
        mmd: mmd_gaussian(real, gen, None, MmdEstimator::Unbiased)?,
        nn: one_nn_accuracy(real, gen)?,
    })
}

/// Averages [`compare`] over `protocol.repeats` fresh draws from `spec` and
/// from `sampler`. Reference draws and sub-batching use children of `rng`.
pub fn evaluate<F>(
    spec: &GmmSpec,
    mut sampler: F,
    protocol: &EvalProtocol,
    rng: &RngStream,
) -> Result<MetricsReport>
where
    F: FnMut(usize) -> Result<Tensor>,
{
    if protocol.repeats == 0 {
        return Err(Error::InvalidInput(
            "evaluation needs at least one repeat".into(),
        ));
    }
    let mut reports = Vec::with_capacity(protocol.repeats);
    for r in 0..protocol.repeats {
        let real = sample_gmm(
            spec,
            protocol.n_per_side,
            &mut rng.child(&format!("real{r}")),
        );
        let gen = sampler(protocol.n_per_side)?;
        if !gen.is_finite() {
            return Err(Error::Diverged {
                value: f64::NAN,
                context: "generator produced non-finite samples".into(),
            });
        }
        let mut wd_rng = rng.child(&format!("wd{r}"));
        reports.push(compare(&real, &gen, spec, protocol.exact_cap, &mut wd_rng)?);
    }
    Ok(MetricsReport::mean(&reports).expect("non-empty"))
}
