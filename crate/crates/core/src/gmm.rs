//! Synthetic 2-D Gaussian mixtures: the 8-mode ring and the 25-mode grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Standard deviation shared by every benchmark component.
pub const BENCHMARK_SIGMA: f64 = 0.05;

/// Equal-weight mixture of isotropic 2-D Gaussians.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmSpec {
    means: Vec<[f64; 2]>,
    sigma: f64,
}

impl GmmSpec {
    pub fn new(means: Vec<[f64; 2]>, sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidInput(
                "mixture needs at least one mean".into(),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        for (i, a) in means.iter().enumerate() {
            if means[..i].contains(a) {
                return Err(Error::InvalidInput(format!("duplicate mean {a:?}")));
            }
        }
        Ok(Self { means, sigma })
    }

    /// Same means with a different noise level. Zero is accepted here so the
    /// degenerate mixture (samples exactly at the means) can be synthesized;
    /// metrics that need a length scale reject it.
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn means(&self) -> &[[f64; 2]] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    /// Distance from `p` to the closest component mean.
    pub fn nearest_mean_distance(&self, p: &[f64]) -> f64 {
        self.means
            .iter()
            .map(|m| (p[0] - m[0]).hypot(p[1] - m[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eight components evenly spaced on the unit circle, starting at `(1, 0)`.
pub fn make_ring_spec() -> GmmSpec {
    let means = (0..8)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 8.0;
            [a.cos(), a.sin()]
        })
        .collect();
    GmmSpec::new(means, BENCHMARK_SIGMA).expect("ring spec is valid")
}

/// A 5x5 lattice with spacing 2 spanning `[-4, 4]^2`.
pub fn make_grid_spec() -> GmmSpec {
    let mut means = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            means.push([-4.0 + 2.0 * i as f64, -4.0 + 2.0 * j as f64]);
        }
    }
    GmmSpec::new(means, BENCHMARK_SIGMA).expect("grid spec is valid")
}

/// Draws `n` points: a uniformly chosen component plus isotropic noise.
pub fn sample_gmm(spec: &GmmSpec, n: usize, rng: &mut RngStream) -> Tensor {
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let m = spec.means[rng.below(spec.means.len())];
        data.push(m[0] + spec.sigma * rng.normal());
        data.push(m[1] + spec.sigma * rng.normal());
    }
    Tensor::new(n, 2, data).expect("n x 2 buffer")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dataset {
    Ring,
    Grid,
}

impl Dataset {
    pub fn spec(self) -> GmmSpec {
        match self {
            Dataset::Ring => make_ring_spec(),
            Dataset::Grid => make_grid_spec(),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Ring => "ring",
            Dataset::Grid => "grid",
        })
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Dataset::Ring),
            "grid" => Ok(Dataset::Grid),
            _ => Err(Error::Config(format!("unknown dataset `{s}` (ring|grid)"))),
        }
    }
}

/// Distribution of the generator's latent input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentPrior {
    StandardNormal,
    /// Uniform on `(-1, 1)` per coordinate.
    Uniform,
}

impl fmt::Display for LatentPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatentPrior::StandardNormal => "normal",
            LatentPrior::Uniform => "uniform",
        })
    }
}

impl FromStr for LatentPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(LatentPrior::StandardNormal),
            "uniform" => Ok(LatentPrior::Uniform),
            _ => Err(Error::Config(format!(
                "unknown latent prior `{s}` (normal|uniform)"
            ))),
        }
    }
}

/// `n x dim` standard normal latent codes.
pub fn sample_latent(dim: usize, n: usize, rng: &mut RngStream) -> Tensor {
    sample_prior(LatentPrior::StandardNormal, dim, n, rng)
}

pub fn sample_prior(prior: LatentPrior, dim: usize, n: usize, rng: &mut RngStream) -> Tensor {
    let data = (0..n * dim)
        .map(|_| match prior {
            LatentPrior::StandardNormal => rng.normal(),
            LatentPrior::Uniform => rng.uniform_in(-1.0, 1.0),
        })
        .collect();
    Tensor::new(n, dim, data).expect("n x dim buffer")
}
