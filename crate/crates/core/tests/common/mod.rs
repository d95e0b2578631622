//! Independent reference implementations shared by the integration tests
//! and the acceptance harness. They favour obviousness over speed.

#![allow(dead_code)]

pub mod gradcheck;

use ganver_core::metrics::NnAccuracy;
use ganver_core::Tensor;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Mean matched distance minimized over all `n!` pairings (Heap's algorithm).
pub fn wd_by_enumeration(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| (0..n).map(|i| dist(a.row(i), b.row(p[i]))).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

/// Squared MMD by explicit double sums.
pub fn mmd_double_sum(x: &Tensor, y: &Tensor, h: f64, unbiased: bool) -> f64 {
    let k = |a: &[f64], b: &[f64]| (-(dist(a, b).powi(2)) / (2.0 * h * h)).exp();
    let (n, m) = (x.rows(), y.rows());
    let within = |s: &Tensor, len: usize| {
        let mut acc = 0.0;
        let mut count = 0.0;
        for i in 0..len {
            for j in 0..len {
                if unbiased && i == j {
                    continue;
                }
                acc += k(s.row(i), s.row(j));
                count += 1.0;
            }
        }
        acc / count
    };
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..m {
            cross += k(x.row(i), y.row(j));
        }
    }
    within(x, n) + within(y, m) - 2.0 * cross / (n * m) as f64
}

/// Median pairwise distance by full sort.
pub fn median_distance(x: &Tensor) -> f64 {
    let mut d = Vec::new();
    for i in 0..x.rows() {
        for j in i + 1..x.rows() {
            d.push(dist(x.row(i), x.row(j)));
        }
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / 2.0
    }
}

/// 1-NN leave-one-out accuracies by sorting every point's candidate list on
/// `(distance, index)`.
pub fn nn_recount(real: &Tensor, gen: &Tensor) -> NnAccuracy {
    let mut pts: Vec<(&[f64], bool)> = real.row_iter().map(|r| (r, true)).collect();
    pts.extend(gen.row_iter().map(|r| (r, false)));
    let mut confusion = [[0usize; 2]; 2]; // [truth real?][predicted real?]
    for (i, &(p, truth)) in pts.iter().enumerate() {
        let mut cands: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, &(q, _))| (dist(p, q), j))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let predicted = pts[cands[0].1].1;
        confusion[truth as usize][predicted as usize] += 1;
    }
    let tp = confusion[1][1] as f64;
    let fneg = confusion[1][0] as f64;
    let fp = confusion[0][1] as f64;
    let tn = confusion[0][0] as f64;
    let pct = |a: f64, b: f64| if b == 0.0 { 0.0 } else { 100.0 * a / b };
    NnAccuracy {
        ta: pct(tp + tn, tp + tn + fp + fneg),
        ra: pct(tp, tp + fneg),
        ga: pct(tn, tn + fp),
        pr: pct(tp, tp + fp),
        re: pct(tp, tp + fneg),
    }
}

/// Smoothed-histogram KL with explicit per-cell counting in a map.
pub fn kl_by_hand(
    real: &Tensor,
    gen: &Tensor,
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    alpha: f64,
) -> f64 {
    use std::collections::HashMap;
    let key = |p: &[f64]| {
        let cx = ((p[0] - origin[0]) / cell)
            .floor()
            .clamp(0.0, (nx - 1) as f64) as usize;
        let cy = ((p[1] - origin[1]) / cell)
            .floor()
            .clamp(0.0, (ny - 1) as f64) as usize;
        (cx, cy)
    };
    let count = |x: &Tensor| {
        let mut m: HashMap<(usize, usize), f64> = HashMap::new();
        for p in x.row_iter() {
            *m.entry(key(p)).or_default() += 1.0;
        }
        m
    };
    let (cp, cq) = (count(real), count(gen));
    let cells = (nx * ny) as f64;
    let zp = real.rows() as f64 + alpha * cells;
    let zq = gen.rows() as f64 + alpha * cells;
    let mut kl = 0.0;
    for cx in 0..nx {
        for cy in 0..ny {
            let p = (cp.get(&(cx, cy)).copied().unwrap_or(0.0) + alpha) / zp;
            let q = (cq.get(&(cx, cy)).copied().unwrap_or(0.0) + alpha) / zq;
            kl += p * (p / q).ln();
        }
    }
    kl
}

/// Central-difference gradient of `f` at every coordinate of `params`.
pub fn finite_diff<F>(params: &[Tensor], step: f64, mut f: F) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let mut g = vec![0.0; params[t].len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work[t].as_slice()[i];
            work[t].as_mut_slice()[i] = orig + step;
            let up = f(&work);
            work[t].as_mut_slice()[i] = orig - step;
            let down = f(&work);
            work[t].as_mut_slice()[i] = orig;
            *gi = (up - down) / (2.0 * step);
        }
        out.push(Tensor::new(params[t].rows(), params[t].cols(), g).unwrap());
    }
    out
}

/// Scale below which a gradient tensor counts as zero. Central differences
/// at step 1e-5 carry ~1e-11 of rounding noise, so an exactly vanishing
/// gradient (such as the output bias under the shift-invariant bound) must
/// not be measured relative to its own norm.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `||a - b|| / max(||a||, ||b||, REL_ERR_FLOOR)` for one tensor.
pub fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / a
        .sq_norm()
        .sqrt()
        .max(b.sq_norm().sqrt())
        .max(REL_ERR_FLOOR)
}

/// Largest per-tensor relative error.
pub fn max_rel_err(a: &[Tensor], b: &[Tensor]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| rel_err(x, y))
        .fold(0.0, f64::max)
}
