//! Fully connected networks for the generator, discriminator and
//! statistics network.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Default leaky-ReLU slope for every hidden layer.
pub const DEFAULT_LEAK: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(a) => tape.leaky_relu(x, a),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }

    /// Negative-side slope entering the He variance; zero unless leaky.
    pub fn leak(self) -> f64 {
        match self {
            Activation::LeakyRelu(a) => a,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => f.write_str("identity"),
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Sigmoid => f.write_str("sigmoid"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "leaky_relu" => Ok(Activation::LeakyRelu(DEFAULT_LEAK)),
            _ => match s.strip_prefix("leaky_relu:") {
                Some(a) => a
                    .parse()
                    .map(Activation::LeakyRelu)
                    .map_err(|_| Error::Config(format!("bad leaky slope in `{s}`"))),
                None => Err(Error::Config(format!("unknown activation `{s}`"))),
            },
        }
    }
}

/// Layer widths plus activations. `widths[0]` is the input dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output widths, got {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Config(format!("zero width in {widths:?}")));
        }
        Ok(Self {
            widths,
            hidden,
            output,
        })
    }

    /// `input -> hidden... -> output` with leaky-ReLU hidden layers and a
    /// linear head.
    pub fn leaky(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self::new(
            widths,
            Activation::LeakyRelu(DEFAULT_LEAK),
            Activation::Identity,
        )
    }

    pub fn default_generator(latent_dim: usize, data_dim: usize) -> Self {
        Self::leaky(latent_dim, &[128, 128], data_dim).expect("valid widths")
    }

    /// Raw scores; any sigmoid belongs to the loss.
    pub fn default_discriminator(data_dim: usize) -> Self {
        Self::leaky(data_dim, &[128, 128], 1).expect("valid widths")
    }

    /// Takes `[xhat | z]` rows.
    pub fn default_statistics(data_dim: usize, latent_dim: usize) -> Self {
        Self::leaky(data_dim + latent_dim, &[128], 1).expect("valid widths")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> Activation {
        self.hidden
    }

    pub fn output(&self) -> Activation {
        self.output
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    /// He standard deviation for the weights of layer `layer`.
    pub fn init_std(&self, layer: usize) -> f64 {
        kaiming_std(self.widths[layer], self.hidden.leak())
    }
}

/// `sqrt(2 / ((1 + a^2) fan_in))`.
pub fn kaiming_std(fan_in: usize, leak: f64) -> f64 {
    (2.0 / ((1.0 + leak * leak) * fan_in as f64)).sqrt()
}

/// Named parameter tensors in a fixed order: `weight-0, bias-0, weight-1, ...`.
/// Gradients with respect to a set are carried in the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self> {
        for (i, (name, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::ParamMismatch(format!(
                    "duplicate parameter `{name}`"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn zeros_like(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.rows(), t.cols())))
            .collect();
        Self { entries }
    }

    /// Replaces the tensors, keeping names. Shapes must match.
    pub fn with_tensors(&self, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != self.entries.len() {
            return Err(Error::ParamMismatch(format!(
                "expected {} tensors, got {}",
                self.entries.len(),
                tensors.len()
            )));
        }
        let mut entries = Vec::with_capacity(tensors.len());
        for ((name, old), new) in self.entries.iter().zip(tensors) {
            if old.shape() != new.shape() {
                return Err(Error::ParamMismatch(format!(
                    "`{name}`: shape {:?} vs {:?}",
                    old.shape(),
                    new.shape()
                )));
            }
            entries.push((name.clone(), new));
        }
        Ok(Self { entries })
    }

    /// Errors unless `other` has the same names in the same order and the
    /// same shapes.
    pub fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::ParamMismatch(format!(
                "{} vs {} tensors",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for ((na, ta), (nb, tb)) in self.entries.iter().zip(&other.entries) {
            if na != nb {
                return Err(Error::ParamMismatch(format!("`{na}` vs `{nb}`")));
            }
            if ta.shape() != tb.shape() {
                return Err(Error::ParamMismatch(format!(
                    "`{na}`: shape {:?} vs {:?}",
                    ta.shape(),
                    tb.shape()
                )));
            }
        }
        Ok(())
    }

    /// Errors (naming the tensor) if the set does not fit `spec`.
    pub fn check_against(&self, spec: &MlpSpec) -> Result<()> {
        let expected = layout(spec);
        if self.entries.len() != expected.len() {
            return Err(Error::ParamMismatch(format!(
                "expected {} tensors for widths {:?}, got {}",
                expected.len(),
                spec.widths(),
                self.entries.len()
            )));
        }
        for ((name, t), (ename, shape)) in self.entries.iter().zip(expected) {
            if *name != ename {
                return Err(Error::ParamMismatch(format!(
                    "expected `{ename}`, found `{name}`"
                )));
            }
            if t.shape() != shape {
                return Err(Error::ParamMismatch(format!(
                    "`{name}` has shape {:?}, spec needs {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }

    /// Global L2 norm over every tensor.
    pub fn global_norm(&self) -> f64 {
        self.tensors().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }

    /// Puts every tensor on the tape as a leaf, in order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.tensors().map(|t| tape.leaf(t.clone())).collect()
    }
}

fn layout(spec: &MlpSpec) -> Vec<(String, (usize, usize))> {
    let w = spec.widths();
    (0..spec.n_layers())
        .flat_map(|i| {
            [
                (format!("weight-{i}"), (w[i + 1], w[i])),
                (format!("bias-{i}"), (1, w[i + 1])),
            ]
        })
        .collect()
}

/// He-normal weights and zero biases.
pub fn kaiming_init(spec: &MlpSpec, rng: &mut RngStream) -> ParamSet {
    let entries = layout(spec)
        .into_iter()
        .enumerate()
        .map(|(k, (name, (rows, cols)))| {
            let t = if k % 2 == 0 {
                let std = spec.init_std(k / 2);
                let data = (0..rows * cols).map(|_| std * rng.normal()).collect();
                Tensor::new(rows, cols, data).expect("layout shape")
            } else {
                Tensor::zeros(rows, cols)
            };
            (name, t)
        })
        .collect();
    ParamSet { entries }
}

/// Affine map plus activation per layer; `params` are the bound tensors of
/// a set laid out for `spec`.
pub fn mlp_forward(
    tape: &mut Tape,
    spec: &MlpSpec,
    params: &[NodeId],
    x: NodeId,
) -> Result<NodeId> {
    if params.len() != 2 * spec.n_layers() {
        return Err(Error::ParamMismatch(format!(
            "{} bound tensors for a {}-layer network",
            params.len(),
            spec.n_layers()
        )));
    }
    let (rows, cols) = tape.value(x).shape();
    if cols != spec.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "mlp_input",
            lhs: (rows, cols),
            rhs: (rows, spec.input_dim()),
        });
    }
    let mut h = x;
    for layer in 0..spec.n_layers() {
        let pre = tape.matmul_nt(h, params[2 * layer])?;
        let pre = tape.add(pre, params[2 * layer + 1])?;
        let act = if layer + 1 == spec.n_layers() {
            spec.output()
        } else {
            spec.hidden()
        };
        h = act.apply(tape, pre)?;
    }
    Ok(h)
}

/// Scores `T(xhat, z)` of the statistics network on row-aligned pairs.
pub fn statistics_forward(
    tape: &mut Tape,
    spec: &MlpSpec,
    params: &[NodeId],
    z: NodeId,
    xhat: NodeId,
) -> Result<NodeId> {
    let (zr, xr) = (tape.value(z).rows(), tape.value(xhat).rows());
    if zr != xr {
        return Err(Error::ShapeMismatch {
            op: "statistics_pairs",
            lhs: tape.value(xhat).shape(),
            rhs: tape.value(z).shape(),
        });
    }
    let joint = tape.concat_cols(xhat, z)?;
    mlp_forward(tape, spec, params, joint)
}

/// An architecture with its current parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Network {
    pub fn init(spec: MlpSpec, rng: &mut RngStream) -> Self {
        let params = kaiming_init(&spec, rng);
        Self { spec, params }
    }

    /// Forward values only.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let xin = tape.constant(x.clone());
        let y = mlp_forward(&mut tape, &self.spec, &p, xin)?;
        Ok(tape.value(y).clone())
    }
}
