//! Adversarial losses, the neural mutual-information bound, and the
//! entropy-regularized generator gradient.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{grad_wrt_input, NodeId, Tape};
use crate::error::{Error, Result};
use crate::nn::{mlp_forward, statistics_forward, MlpSpec, ParamSet};
use crate::tensor::Tensor;

/// Added under the square root of the penalty norm so a zero input
/// gradient stays differentiable.
pub const GP_NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Vgan,
    Wgan,
    VganVer,
    WganVer,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Vgan,
        Variant::Wgan,
        Variant::VganVer,
        Variant::WganVer,
    ];

    pub fn is_wasserstein(self) -> bool {
        matches!(self, Variant::Wgan | Variant::WganVer)
    }

    pub fn has_ver(self) -> bool {
        matches!(self, Variant::VganVer | Variant::WganVer)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Vgan => "vgan",
            Variant::Wgan => "wgan",
            Variant::VganVer => "vgan+ver",
            Variant::WganVer => "wgan+ver",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorLoss {
    /// `mean log(1 - sigmoid(D(G(z))))`
    Minimax,
    /// `-mean log sigmoid(D(G(z)))`
    NonSaturating,
}

impl fmt::Display for GeneratorLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorLoss::Minimax => "minimax",
            GeneratorLoss::NonSaturating => "non-saturating",
        })
    }
}

impl FromStr for GeneratorLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimax" => Ok(GeneratorLoss::Minimax),
            "non-saturating" => Ok(GeneratorLoss::NonSaturating),
            _ => Err(Error::Config(format!("unknown generator loss `{s}`"))),
        }
    }
}

/// How the mutual-information gradient is bounded before it reaches G.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipMode {
    /// Rescale so its global norm is at most that of the adversarial gradient.
    Adaptive,
    None,
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClipMode::Adaptive => "adaptive",
            ClipMode::None => "none",
        })
    }
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(ClipMode::Adaptive),
            "none" => Ok(ClipMode::None),
            _ => Err(Error::Config(format!("unknown clip mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveKind {
    pub variant: Variant,
    pub lambda: f64,
    pub gp_weight: f64,
    pub generator_loss: GeneratorLoss,
    pub clip: ClipMode,
}

impl ObjectiveKind {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            lambda: 0.1,
            gp_weight: 10.0,
            generator_loss: GeneratorLoss::NonSaturating,
            clip: ClipMode::Adaptive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gp_weight >= 0.0 && self.gp_weight.is_finite()) {
            return Err(Error::Config(format!(
                "gp_weight must be >= 0, got {}",
                self.gp_weight
            )));
        }
        Ok(())
    }
}

fn batch_stats(t: &Tensor) -> String {
    let v = t.as_slice();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    format!("n={} min={lo:.6e} max={hi:.6e} mean={mean:.6e}", v.len())
}

fn expect_column(tape: &Tape, id: NodeId, what: &str) -> Result<()> {
    let t = tape.value(id);
    if t.cols() != 1 || t.rows() == 0 {
        return Err(Error::InvalidInput(format!(
            "{what} must be n x 1 with n >= 1, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Runs `body`, turning overflow into a divergence error that carries the
/// statistics of the offending batches.
fn guarded<F>(tape: &mut Tape, what: &str, inputs: &[NodeId], body: F) -> Result<NodeId>
where
    F: FnOnce(&mut Tape) -> Result<NodeId>,
{
    let describe = |tape: &Tape| {
        inputs
            .iter()
            .map(|&i| batch_stats(tape.value(i)))
            .collect::<Vec<_>>()
            .join("; ")
    };
    for &i in inputs {
        if !tape.value(i).is_finite() {
            return Err(Error::Diverged {
                value: f64::NAN,
                context: format!("{what}: {}", describe(tape)),
            });
        }
    }
    match body(tape) {
        Ok(id) => Ok(id),
        Err(Error::NumericOverflow { .. }) => Err(Error::Diverged {
            value: f64::INFINITY,
            context: format!("{what}: {}", describe(tape)),
        }),
        Err(e) => Err(e),
    }
}

/// `-mean log sigmoid(real) - mean log(1 - sigmoid(fake))` in softplus form.
pub fn vanilla_d_loss(tape: &mut Tape, real_logits: NodeId, fake_logits: NodeId) -> Result<NodeId> {
    expect_column(tape, real_logits, "real logits")?;
    expect_column(tape, fake_logits, "fake logits")?;
    guarded(tape, "vanilla_d_loss", &[real_logits, fake_logits], |t| {
        let neg_real = t.neg(real_logits)?;
        let a = t.softplus(neg_real)?;
        let a = t.mean(a)?;
        let b = t.softplus(fake_logits)?;
        let b = t.mean(b)?;
        t.add(a, b)
    })
}

pub fn vanilla_g_loss(
    tape: &mut Tape,
    fake_logits: NodeId,
    style: GeneratorLoss,
) -> Result<NodeId> {
    expect_column(tape, fake_logits, "fake logits")?;
    guarded(tape, "vanilla_g_loss", &[fake_logits], |t| match style {
        // log(1 - sigmoid(x)) = -softplus(x)
        GeneratorLoss::Minimax => {
            let s = t.softplus(fake_logits)?;
            let m = t.mean(s)?;
            t.neg(m)
        }
        // -log sigmoid(x) = softplus(-x)
        GeneratorLoss::NonSaturating => {
            let n = t.neg(fake_logits)?;
            let s = t.softplus(n)?;
            t.mean(s)
        }
    })
}

/// Critic loss `-mean(real) + mean(fake) + w * mean((norm - 1)^2)`.
pub fn wgan_d_loss(
    tape: &mut Tape,
    d_real: NodeId,
    d_fake: NodeId,
    interp_grad_norms: NodeId,
    gp_weight: f64,
) -> Result<NodeId> {
    expect_column(tape, d_real, "critic real scores")?;
    expect_column(tape, d_fake, "critic fake scores")?;
    expect_column(tape, interp_grad_norms, "penalty norms")?;
    guarded(
        tape,
        "wgan_d_loss",
        &[d_real, d_fake, interp_grad_norms],
        |t| {
            let r = t.mean(d_real)?;
            let f = t.mean(d_fake)?;
            let critic = t.sub(f, r)?;
            let dev = t.add_scalar(interp_grad_norms, -1.0)?;
            let dev = t.square(dev)?;
            let pen = t.mean(dev)?;
            let pen = t.scale(pen, gp_weight)?;
            t.add(critic, pen)
        },
    )
}

pub fn wgan_g_loss(tape: &mut Tape, d_fake: NodeId) -> Result<NodeId> {
    expect_column(tape, d_fake, "critic fake scores")?;
    guarded(tape, "wgan_g_loss", &[d_fake], |t| {
        let m = t.mean(d_fake)?;
        t.neg(m)
    })
}

/// `||grad_x D(x)||` per row at the points `x`, kept differentiable in the
/// critic parameters `d_params`.
pub fn penalty_norms(
    tape: &mut Tape,
    d_spec: &MlpSpec,
    d_params: &[NodeId],
    x: NodeId,
) -> Result<NodeId> {
    let g = grad_wrt_input(tape, x, |t, x| mlp_forward(t, d_spec, d_params, x))?;
    let sq = tape.row_sq_norm(g)?;
    let sq = tape.add_scalar(sq, GP_NORM_EPS)?;
    tape.sqrt(sq)
}

/// `mean(log_terms) - log mean exp(t_marginal)`, shifted by the batch max.
pub fn mine_estimate(tape: &mut Tape, t_joint: NodeId, t_marginal: NodeId) -> Result<NodeId> {
    expect_column(tape, t_joint, "joint scores")?;
    expect_column(tape, t_marginal, "marginal scores")?;
    if tape.value(t_marginal).rows() < 2 {
        return Err(Error::InvalidInput(
            "marginal shuffle needs at least 2 pairs".into(),
        ));
    }
    guarded(tape, "mine_estimate", &[t_joint, t_marginal], |t| {
        let joint = t.mean(t_joint)?;
        let lme = log_mean_exp(t, t_marginal)?;
        t.sub(joint, lme)
    })
}

fn max_of(t: &Tensor) -> f64 {
    t.as_slice()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn log_mean_exp(tape: &mut Tape, x: NodeId) -> Result<NodeId> {
    let m = max_of(tape.value(x));
    let shift = tape.constant(Tensor::scalar(m));
    let centered = tape.sub(x, shift)?;
    let e = tape.exp(centered)?;
    let me = tape.mean(e)?;
    let l = tape.log(me)?;
    tape.add_scalar(l, m)
}

/// Moving average of `mean(exp(T))` on marginal pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MineState {
    ema: Option<f64>,
    decay: f64,
}

impl MineState {
    pub fn new(decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::Config(format!(
                "ema decay must be in [0, 1), got {decay}"
            )));
        }
        Ok(Self { ema: None, decay })
    }

    /// `None` until the first update.
    pub fn ema(&self) -> Option<f64> {
        self.ema
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    fn update(&mut self, batch_mean: f64) -> f64 {
        let next = match self.ema {
            None => batch_mean,
            Some(prev) => self.decay * prev + (1.0 - self.decay) * batch_mean,
        };
        assert!(
            next > 0.0,
            "moving average of exp scores must stay positive"
        );
        self.ema = Some(next);
        next
    }
}

/// Result of one statistics-network gradient evaluation.
#[derive(Clone, Debug)]
pub struct MineStep {
    /// Batch value of the bound.
    pub estimate: f64,
    /// Ascent direction for the statistics-network parameters.
    pub grads: ParamSet,
}

/// Gradient of the bound with respect to the statistics network, where the
/// `1 / mean(exp(T))` factor of the log term's gradient uses the moving
/// average in `state` instead of the batch mean. `perm` pairs row `i` of
/// `xhat` with row `perm[i]` of `z` for the product-of-marginals term.
pub fn mine_gradient(
    spec: &MlpSpec,
    params: &ParamSet,
    z: &Tensor,
    xhat: &Tensor,
    perm: &[usize],
    state: &mut MineState,
) -> Result<MineStep> {
    if perm.len() != z.rows() || z.rows() != xhat.rows() {
        return Err(Error::InvalidInput(format!(
            "batch sizes disagree: z {} xhat {} perm {}",
            z.rows(),
            xhat.rows(),
            perm.len()
        )));
    }
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let zj = tape.constant(z.clone());
    let zm = tape.constant(z.select_rows(perm));
    let x = tape.constant(xhat.clone());
    let tj = statistics_forward(&mut tape, spec, &p, zj, x)?;
    let tm = statistics_forward(&mut tape, spec, &p, zm, x)?;
    let est = mine_estimate(&mut tape, tj, tm)?;
    let estimate = tape.value(est).item();

    // surrogate: mean(tj) - mean(exp(tm - m)) * exp(m) / ema
    let m = max_of(tape.value(tm));
    let shift = tape.constant(Tensor::scalar(m));
    let centered = tape.sub(tm, shift)?;
    let e = tape.exp(centered)?;
    let me = tape.mean(e)?;
    let batch_mean = tape.value(me).item() * m.exp();
    let ema = state.update(batch_mean);
    let factor = (m - ema.ln()).exp();
    let scaled = tape.scale(me, factor)?;
    let joint = tape.mean(tj)?;
    let surrogate = tape.sub(joint, scaled)?;

    let grads = tape.backward(surrogate, &p, false)?.into_values();
    Ok(MineStep {
        estimate,
        grads: params.with_tensors(grads)?,
    })
}

/// Batch bound on pairs `(xhat, z)` and its gradient with respect to
/// `leaves`. The statistics network enters as constants, so the gradient
/// reaches the generator through `xhat` only.
pub fn mine_input_gradient(
    tape: &mut Tape,
    m_spec: &MlpSpec,
    m_params: &ParamSet,
    z: &Tensor,
    xhat: NodeId,
    perm: &[usize],
    leaves: &[NodeId],
) -> Result<(f64, Vec<Tensor>)> {
    if perm.len() != z.rows() || z.rows() != tape.value(xhat).rows() {
        return Err(Error::InvalidInput(format!(
            "batch sizes disagree: z {} xhat {} perm {}",
            z.rows(),
            tape.value(xhat).rows(),
            perm.len()
        )));
    }
    let p: Vec<NodeId> = m_params
        .tensors()
        .map(|t| tape.constant(t.clone()))
        .collect();
    let zj = tape.constant(z.clone());
    let zm = tape.constant(z.select_rows(perm));
    let tj = statistics_forward(tape, m_spec, &p, zj, xhat)?;
    let tm = statistics_forward(tape, m_spec, &p, zm, xhat)?;
    let est = mine_estimate(tape, tj, tm)?;
    let value = tape.value(est).item();
    Ok((value, tape.backward(est, leaves, false)?.into_values()))
}

/// `adv - lambda * clip(mi)` over the generator parameters.
pub fn ver_generator_gradient(
    adv: &ParamSet,
    mi: &ParamSet,
    lambda: f64,
    clip: ClipMode,
) -> Result<ParamSet> {
    adv.check_same_layout(mi)?;
    if lambda == 0.0 {
        return Ok(adv.clone());
    }
    let scale = match clip {
        ClipMode::None => 1.0,
        ClipMode::Adaptive => {
            let (na, nm) = (adv.global_norm(), mi.global_norm());
            if nm > na && nm > 0.0 {
                na / nm
            } else {
                1.0
            }
        }
    };
    let k = lambda * scale;
    let combined = adv
        .tensors()
        .zip(mi.tensors())
        .map(|(a, m)| a.zip_map(m, |x, y| x - k * y))
        .collect();
    adv.with_tensors(combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::kaiming_init;
    use crate::rng::RngStream;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn eval2(f: impl Fn(&mut Tape, NodeId, NodeId) -> Result<NodeId>, a: &[f64], b: &[f64]) -> f64 {
        let mut t = Tape::new();
        let x = t.leaf(col(a));
        let y = t.leaf(col(b));
        let out = f(&mut t, x, y).unwrap();
        t.value(out).item()
    }

    #[test]
    fn vanilla_d_examples() {
        let ln2 = 2f64.ln();
        assert!((eval2(vanilla_d_loss, &[0.0, 0.0], &[0.0]) - 2.0 * ln2).abs() < 1e-15);
        assert!(eval2(vanilla_d_loss, &[40.0], &[-40.0]) < 1e-16);
        let want = 2.0 * (1.0 + (-1.0f64).exp()).ln();
        let got = eval2(vanilla_d_loss, &[1.0], &[-1.0]);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.62652).abs() < 1e-5);
    }

    #[test]
    fn vanilla_g_examples() {
        let g = |v: f64, s| {
            let mut t = Tape::new();
            let x = t.leaf(col(&[v]));
            let o = vanilla_g_loss(&mut t, x, s).unwrap();
            t.value(o).item()
        };
        let ln2 = 2f64.ln();
        assert!((g(0.0, GeneratorLoss::Minimax) + ln2).abs() < 1e-15);
        assert!((g(0.0, GeneratorLoss::NonSaturating) - ln2).abs() < 1e-15);
        assert!((g(2.0, GeneratorLoss::NonSaturating) - 0.12692).abs() < 1e-5);
    }

    #[test]
    fn stable_forms_agree_with_naive() {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        for &(r, f) in &[(0.3, -1.2), (5.0, 4.0), (-7.0, 9.0), (12.0, -15.0)] {
            let naive_d = -sig(r).ln() - (1.0 - sig(f)).ln();
            let stable = eval2(vanilla_d_loss, &[r], &[f]);
            assert!((naive_d - stable).abs() < 1e-9, "{r} {f}");
            let mut t = Tape::new();
            let x = t.leaf(col(&[f]));
            let mm = vanilla_g_loss(&mut t, x, GeneratorLoss::Minimax).unwrap();
            let ns = vanilla_g_loss(&mut t, x, GeneratorLoss::NonSaturating).unwrap();
            assert!((t.value(mm).item() - (1.0 - sig(f)).ln()).abs() < 1e-9);
            assert!((t.value(ns).item() + sig(f).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn wgan_examples() {
        let d = |r: &[f64], f: &[f64], n: &[f64], w| {
            let mut t = Tape::new();
            let (r, f, n) = (t.leaf(col(r)), t.leaf(col(f)), t.leaf(col(n)));
            let o = wgan_d_loss(&mut t, r, f, n, w).unwrap();
            t.value(o).item()
        };
        assert_eq!(d(&[0.4, -1.0], &[0.4, -1.0], &[1.0, 1.0], 10.0), 0.0);
        assert_eq!(d(&[0.0], &[0.0], &[0.0], 10.0), 10.0);
        assert!((d(&[2.0], &[1.0], &[1.5], 10.0) - 1.5).abs() < 1e-15);

        let g = |f: &[f64]| {
            let mut t = Tape::new();
            let x = t.leaf(col(f));
            let o = wgan_g_loss(&mut t, x).unwrap();
            t.value(o).item()
        };
        assert_eq!(g(&[0.0, 0.0]), 0.0);
        assert_eq!(g(&[1.0, 3.0]), -2.0);
        assert!((g(&[1.5, 3.5]) - (g(&[1.0, 3.0]) - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_logits_report_batch() {
        let mut t = Tape::new();
        let r = t.leaf(col(&[f64::INFINITY]));
        let f = t.leaf(col(&[0.0]));
        match vanilla_d_loss(&mut t, r, f).unwrap_err() {
            Error::Diverged { context, .. } => assert!(context.contains("max=inf"), "{context}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn mine_estimate_examples() {
        assert!(eval2(mine_estimate, &[3.0, 3.0], &[3.0, 3.0]).abs() < 1e-15);
        let want = 1.0 - ((1.0 + 2f64.exp()) / 2.0).ln();
        let got = eval2(mine_estimate, &[1.0, 1.0], &[0.0, 2.0]);
        assert!((got - want).abs() < 1e-15);
        assert!((got + 0.43379).abs() < 1e-5);

        let mut t = Tape::new();
        let a = t.leaf(col(&[1.0]));
        assert!(mine_estimate(&mut t, a, a).is_err());
    }

    #[test]
    fn mine_estimate_is_stable_for_large_scores() {
        let got = eval2(mine_estimate, &[800.0, 800.0], &[799.0, 801.0]);
        let want = 800.0 - (800.0 + ((-1f64).exp() + 1f64.exp()).ln() - 2f64.ln());
        assert!((got - want).abs() < 1e-9);
    }

    fn toy_batch() -> (MlpSpec, ParamSet, Tensor, Tensor, Vec<usize>) {
        let spec = MlpSpec::leaky(3, &[5], 1).unwrap();
        let params = kaiming_init(&spec, &mut RngStream::new(2, "init"));
        let mut r = RngStream::new(2, "batch");
        let z = crate::gmm::sample_latent(1, 6, &mut r);
        let x = crate::gmm::sample_latent(2, 6, &mut r);
        let perm = r.non_identity_permutation(6);
        (spec, params, z, x, perm)
    }

    #[test]
    fn mine_gradient_without_memory_matches_plain_gradient() {
        let (spec, params, z, x, perm) = toy_batch();
        let mut state = MineState::new(0.0).unwrap();
        let step = mine_gradient(&spec, &params, &z, &x, &perm, &mut state).unwrap();

        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let zj = tape.constant(z.clone());
        let zm = tape.constant(z.select_rows(&perm));
        let xc = tape.constant(x.clone());
        let tj = statistics_forward(&mut tape, &spec, &p, zj, xc).unwrap();
        let tm = statistics_forward(&mut tape, &spec, &p, zm, xc).unwrap();
        let est = mine_estimate(&mut tape, tj, tm).unwrap();
        assert_eq!(tape.value(est).item(), step.estimate);
        let plain = tape.backward(est, &p, false).unwrap().into_values();
        for (a, b) in step.grads.tensors().zip(&plain) {
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn mine_gradient_vanishes_for_constant_scores() {
        let (spec, params, z, x, perm) = toy_batch();
        // zero weights: T is the constant output bias everywhere
        let mut flat = params.zeros_like();
        let tensors: Vec<Tensor> = flat
            .tensors()
            .enumerate()
            .map(|(i, t)| {
                if i == 3 {
                    Tensor::scalar(0.7)
                } else {
                    t.clone()
                }
            })
            .collect();
        flat = flat.with_tensors(tensors).unwrap();
        let mut state = MineState::new(0.9).unwrap();
        let step = mine_gradient(&spec, &flat, &z, &x, &perm, &mut state).unwrap();
        assert!(step.estimate.abs() < 1e-15);
        assert!(step.grads.global_norm() < 1e-15);
    }

    #[test]
    fn ema_tracks_batches() {
        let mut s = MineState::new(0.5).unwrap();
        assert_eq!(s.ema(), None);
        assert_eq!(s.update(4.0), 4.0);
        assert_eq!(s.update(2.0), 3.0);
        assert!(MineState::new(1.0).is_err());
    }

    fn params_from(vals: &[&[f64]]) -> ParamSet {
        ParamSet::new(
            vals.iter()
                .enumerate()
                .map(|(i, v)| {
                    (
                        format!("p{i}"),
                        Tensor::new(1, v.len(), v.to_vec()).unwrap(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ver_gradient_examples() {
        let adv = params_from(&[&[0.6], &[0.8]]);
        let mi = params_from(&[&[4.0], &[0.0]]);
        assert_eq!(
            ver_generator_gradient(&adv, &mi, 0.0, ClipMode::Adaptive).unwrap(),
            adv
        );

        // norm 1 vs norm 4 -> mi scaled by 0.25
        let out = ver_generator_gradient(&adv, &mi, 1.0, ClipMode::Adaptive).unwrap();
        assert!((out.get("p0").unwrap().item() - (0.6 - 1.0)).abs() < 1e-15);
        assert_eq!(out.get("p1").unwrap().item(), 0.8);

        let small = params_from(&[&[0.3], &[0.0]]);
        let out = ver_generator_gradient(&adv, &small, 2.0, ClipMode::Adaptive).unwrap();
        assert!((out.get("p0").unwrap().item() - 0.0).abs() < 1e-15);

        let out = ver_generator_gradient(&adv, &mi, 1.0, ClipMode::None).unwrap();
        assert!((out.get("p0").unwrap().item() + 3.4).abs() < 1e-15);

        let other = params_from(&[&[1.0]]);
        assert!(ver_generator_gradient(&adv, &other, 1.0, ClipMode::None).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("gan".parse::<Variant>().is_err());
    }
}
