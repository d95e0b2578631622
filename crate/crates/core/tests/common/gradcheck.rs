//! Finite-difference checks of every objective's parameter gradient on
//! small random networks.

use ganver_core::autodiff::{NodeId, Tape};
use ganver_core::gmm::sample_latent;
use ganver_core::nn::{kaiming_init, mlp_forward, statistics_forward, MlpSpec, ParamSet};
use ganver_core::objectives::{
    mine_estimate, mine_gradient, mine_input_gradient, penalty_norms, vanilla_d_loss,
    vanilla_g_loss, wgan_d_loss, wgan_g_loss, GeneratorLoss, MineState,
};
use ganver_core::rng::RngStream;
use ganver_core::{Result, Tensor};

use super::{finite_diff, max_rel_err};

pub const FD_STEP: f64 = 1e-5;
pub const TOL_FIRST_ORDER: f64 = 1e-4;
pub const TOL_SECOND_ORDER: f64 = 1e-3;

pub struct Check {
    pub name: &'static str,
    pub err: f64,
    pub limit: f64,
}

struct Fixture {
    g_spec: MlpSpec,
    d_spec: MlpSpec,
    m_spec: MlpSpec,
    g: ParamSet,
    d: ParamSet,
    m: ParamSet,
    real: Tensor,
    z: Tensor,
    interp: Tensor,
    perm: Vec<usize>,
}

fn fixture(seed: u64) -> Fixture {
    let rng = RngStream::new(seed, "gradcheck");
    let g_spec = MlpSpec::leaky(2, &[6, 6], 2).unwrap();
    let d_spec = MlpSpec::leaky(2, &[6, 6], 1).unwrap();
    let m_spec = MlpSpec::leaky(4, &[6], 1).unwrap();
    let n = 5;
    let mut r = rng.child("inputs");
    let real = Tensor::new(n, 2, (0..2 * n).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
    let interp = Tensor::new(n, 2, (0..2 * n).map(|_| r.uniform_in(-2.0, 2.0)).collect()).unwrap();
    Fixture {
        g: kaiming_init(&g_spec, &mut rng.child("g")),
        d: kaiming_init(&d_spec, &mut rng.child("d")),
        m: kaiming_init(&m_spec, &mut rng.child("m")),
        z: sample_latent(2, n, &mut rng.child("z")),
        perm: rng.child("perm").non_identity_permutation(n),
        g_spec,
        d_spec,
        m_spec,
        real,
        interp,
    }
}

fn leaves(tape: &mut Tape, ts: &[Tensor]) -> Vec<NodeId> {
    ts.iter().map(|t| tape.leaf(t.clone())).collect()
}

fn consts(tape: &mut Tape, p: &ParamSet) -> Vec<NodeId> {
    p.tensors().map(|t| tape.constant(t.clone())).collect()
}

/// Analytic gradient and FD estimate of `loss` with respect to `params`.
fn compare<F>(params: &ParamSet, loss: F) -> f64
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let base: Vec<Tensor> = params.tensors().cloned().collect();
    let mut tape = Tape::new();
    let p = leaves(&mut tape, &base);
    let out = loss(&mut tape, &p).unwrap();
    let analytic = tape.backward(out, &p, false).unwrap().into_values();
    let numeric = finite_diff(&base, FD_STEP, |ts| {
        let mut t = Tape::new();
        let p = leaves(&mut t, ts);
        let out = loss(&mut t, &p).unwrap();
        t.value(out).item()
    });
    max_rel_err(&analytic, &numeric)
}

/// Every objective gradient at one seed.
pub fn check_seed(seed: u64) -> Vec<Check> {
    let fx = fixture(seed);
    let fake = {
        let mut t = Tape::new();
        let p = consts(&mut t, &fx.g);
        let z = t.constant(fx.z.clone());
        let y = mlp_forward(&mut t, &fx.g_spec, &p, z).unwrap();
        t.value(y).clone()
    };
    let mut out = Vec::new();

    let err = compare(&fx.d, |t, p| {
        let r = t.constant(fx.real.clone());
        let f = t.constant(fake.clone());
        let dr = mlp_forward(t, &fx.d_spec, p, r)?;
        let df = mlp_forward(t, &fx.d_spec, p, f)?;
        vanilla_d_loss(t, dr, df)
    });
    out.push(Check {
        name: "vanilla D",
        err,
        limit: TOL_FIRST_ORDER,
    });

    for (name, style) in [
        ("vanilla G (non-saturating)", GeneratorLoss::NonSaturating),
        ("vanilla G (minimax)", GeneratorLoss::Minimax),
    ] {
        let err = compare(&fx.g, |t, p| {
            let z = t.constant(fx.z.clone());
            let x = mlp_forward(t, &fx.g_spec, p, z)?;
            let dp = consts(t, &fx.d);
            let df = mlp_forward(t, &fx.d_spec, &dp, x)?;
            vanilla_g_loss(t, df, style)
        });
        out.push(Check {
            name,
            err,
            limit: TOL_FIRST_ORDER,
        });
    }

    let err = compare(&fx.d, |t, p| {
        let r = t.constant(fx.real.clone());
        let f = t.constant(fake.clone());
        let x = t.constant(fx.interp.clone());
        let dr = mlp_forward(t, &fx.d_spec, p, r)?;
        let df = mlp_forward(t, &fx.d_spec, p, f)?;
        let norms = penalty_norms(t, &fx.d_spec, p, x)?;
        wgan_d_loss(t, dr, df, norms, 10.0)
    });
    out.push(Check {
        name: "WGAN-GP D (double backprop)",
        err,
        limit: TOL_SECOND_ORDER,
    });

    let err = compare(&fx.g, |t, p| {
        let z = t.constant(fx.z.clone());
        let x = mlp_forward(t, &fx.g_spec, p, z)?;
        let dp = consts(t, &fx.d);
        let df = mlp_forward(t, &fx.d_spec, &dp, x)?;
        wgan_g_loss(t, df)
    });
    out.push(Check {
        name: "WGAN G",
        err,
        limit: TOL_FIRST_ORDER,
    });

    // statistics network: with decay 0 the moving average is the batch mean
    let mut state = MineState::new(0.0).unwrap();
    let step = mine_gradient(&fx.m_spec, &fx.m, &fx.z, &fake, &fx.perm, &mut state).unwrap();
    let analytic: Vec<Tensor> = step.grads.tensors().cloned().collect();
    let base: Vec<Tensor> = fx.m.tensors().cloned().collect();
    let zm = fx.z.select_rows(&fx.perm);
    let numeric = finite_diff(&base, FD_STEP, |ts| {
        let mut t = Tape::new();
        let p = leaves(&mut t, ts);
        let x = t.constant(fake.clone());
        let (zj, zmn) = (t.constant(fx.z.clone()), t.constant(zm.clone()));
        let tj = statistics_forward(&mut t, &fx.m_spec, &p, zj, x).unwrap();
        let tm = statistics_forward(&mut t, &fx.m_spec, &p, zmn, x).unwrap();
        let e = mine_estimate(&mut t, tj, tm).unwrap();
        t.value(e).item()
    });
    out.push(Check {
        name: "MINE statistics network",
        err: max_rel_err(&analytic, &numeric),
        limit: TOL_FIRST_ORDER,
    });

    // generator side of the bound, through xhat only
    let base: Vec<Tensor> = fx.g.tensors().cloned().collect();
    let analytic = {
        let mut t = Tape::new();
        let p = leaves(&mut t, &base);
        let z = t.constant(fx.z.clone());
        let x = mlp_forward(&mut t, &fx.g_spec, &p, z).unwrap();
        mine_input_gradient(&mut t, &fx.m_spec, &fx.m, &fx.z, x, &fx.perm, &p)
            .unwrap()
            .1
    };
    let numeric = finite_diff(&base, FD_STEP, |ts| {
        let mut t = Tape::new();
        let p = leaves(&mut t, ts);
        let z = t.constant(fx.z.clone());
        let x = mlp_forward(&mut t, &fx.g_spec, &p, z).unwrap();
        let mp = consts(&mut t, &fx.m);
        let zmn = t.constant(zm.clone());
        let tj = statistics_forward(&mut t, &fx.m_spec, &mp, z, x).unwrap();
        let tm = statistics_forward(&mut t, &fx.m_spec, &mp, zmn, x).unwrap();
        let e = mine_estimate(&mut t, tj, tm).unwrap();
        t.value(e).item()
    });
    out.push(Check {
        name: "MINE through generator",
        err: max_rel_err(&analytic, &numeric),
        limit: TOL_FIRST_ORDER,
    });
    out
}
