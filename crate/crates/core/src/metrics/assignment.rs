//! Exact min-cost perfect matching and the empirical order-1 Wasserstein
//! distance built on it.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Solves the square assignment problem for a row-major `n x n` cost matrix
/// with the shortest-augmenting-path form of the Hungarian method, O(n^3).
///
/// Returns `col_of_row` and the total cost. Non-finite costs, or potentials
/// that overflow on the way, are reported as [`Error::NumericOverflow`].
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "cost matrix has {} entries, expected {n} x {n}",
            cost.len()
        )));
    }
    if let Some(bad) = cost.iter().position(|c| !c.is_finite()) {
        return Err(overflow(bad));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            if j1 == 0 {
                // every reduced cost is NaN: the potentials overflowed
                return Err(overflow((i - 1) * n));
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    let total = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum::<f64>();
    if !total.is_finite() {
        return Err(overflow(0));
    }
    Ok((col_of_row, total))
}

fn overflow(index: usize) -> Error {
    Error::NumericOverflow {
        op: "min_cost_assignment",
        node: index,
    }
}

fn euclidean_cost(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.rows() * b.rows());
    for ra in a.row_iter() {
        for rb in b.row_iter() {
            let d2: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
            c.push(d2.sqrt());
        }
    }
    c
}

/// Exact `W1` between two equal-size point clouds: the mean Euclidean
/// cost of the optimal matching.
pub fn wasserstein_exact(real: &Tensor, gen: &Tensor) -> Result<f64> {
    check_sizes(real, gen)?;
    let n = real.rows();
    let (_, total) = min_cost_assignment(&euclidean_cost(real, gen), n)?;
    Ok(total / n as f64)
}

/// `W1` between equal-size clouds. Up to `exact_cap` points the matching is
/// solved exactly; beyond it both clouds are shuffled with `rng` and split
/// into `ceil(n / exact_cap)` near-equal disjoint sub-batches whose exact
/// costs are pooled. Both clouds share one shuffle, so identical inputs give
/// exactly zero.
pub fn wasserstein_empirical(
    real: &Tensor,
    gen: &Tensor,
    exact_cap: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    check_sizes(real, gen)?;
    if exact_cap == 0 {
        return Err(Error::InvalidInput("exact_cap must be positive".into()));
    }
    let n = real.rows();
    if n <= exact_cap {
        return wasserstein_exact(real, gen);
    }
    let perm = rng.permutation(n);
    let chunks = n.div_ceil(exact_cap);
    let mut total = 0.0;
    let mut start = 0;
    for k in 0..chunks {
        let end = (k + 1) * n / chunks;
        let a = real.select_rows(&perm[start..end]);
        let b = gen.select_rows(&perm[start..end]);
        let (_, cost) = min_cost_assignment(&euclidean_cost(&a, &b), end - start)?;
        total += cost;
        start = end;
    }
    Ok(total / n as f64)
}

fn check_sizes(real: &Tensor, gen: &Tensor) -> Result<()> {
    if real.shape() != gen.shape() {
        return Err(Error::ShapeMismatch {
            op: "wasserstein",
            lhs: real.shape(),
            rhs: gen.shape(),
        });
    }
    if real.rows() == 0 {
        return Err(Error::InvalidInput("empty point cloud".into()));
    }
    Ok(())
}
