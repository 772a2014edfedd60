//! Effective gains, sum spectral efficiency and its gradient.
//!
//! User `n` sees the cascade `h_n^H Φ f`, where `f` is the feed illumination
//! and `Φ` the assembled matrix on the user's side of the surface, so the
//! effective gain is `a_n = |h_n^H Φ f|²`. Users occupy orthogonal resource
//! blocks, hence `SE = Σ_n log2(1 + p_n a_n / σ²)`.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::ris::{Blocks, PhaseConfig, Side};

/// Per-user transmit powers in mW under a total budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAlloc {
    p: Vec<f64>,
    budget: f64,
}

impl PowerAlloc {
    pub fn new(p: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::Domain("power budget must be finite and nonnegative"));
        }
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain("powers must be finite and nonnegative"));
        }
        let total: f64 = p.iter().sum();
        if total > budget * (1.0 + 1e-12) {
            return Err(Error::Domain("powers exceed the budget"));
        }
        Ok(Self { p, budget })
    }

    /// Equal split of the budget over `n` users.
    pub fn uniform(n: usize, budget: f64) -> Result<Self> {
        Self::new(alloc::vec![budget / n.max(1) as f64; n], budget)
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Injective user → resource-block map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    rb_of_ue: Vec<usize>,
    num_rbs: usize,
}

impl Assignment {
    pub fn new(rb_of_ue: Vec<usize>, num_rbs: usize) -> Result<Self> {
        if rb_of_ue.iter().any(|&rb| rb >= num_rbs) {
            return Err(Error::Config("resource block index out of range"));
        }
        let mut seen = alloc::vec![false; num_rbs];
        for &rb in &rb_of_ue {
            if core::mem::replace(&mut seen[rb], true) {
                return Err(Error::Config("two users share a resource block"));
            }
        }
        Ok(Self { rb_of_ue, num_rbs })
    }

    /// User `n` on block `n`.
    pub fn identity(n: usize) -> Self {
        Self { rb_of_ue: (0..n).collect(), num_rbs: n }
    }

    pub fn rb_of(&self, ue: usize) -> usize {
        self.rb_of_ue[ue]
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    fn covers(&self, users: usize) -> Result<()> {
        if self.rb_of_ue.len() != users {
            return Err(Error::Shape("assignment does not cover every user"));
        }
        Ok(())
    }
}

/// `h^H x` with a fixed left-to-right summation order.
fn dotc(h: &CVec, x: &CVec) -> C64 {
    h.iter().zip(x.iter()).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// Cascaded amplitudes `g_n = h_n^H Φ_{side(n)} f` for every user.
pub fn cascade_amplitudes(ch: &ChannelSet, cfg: &PhaseConfig) -> Result<Vec<C64>> {
    if cfg.elements() != ch.elements() {
        return Err(Error::Shape("configuration and channel element counts differ"));
    }
    let vr = cfg.mode().has_reflective().then(|| cfg.apply(Side::Reflect, ch.f())).transpose()?;
    let vt = cfg.mode().has_transmissive().then(|| cfg.apply(Side::Transmit, ch.f())).transpose()?;
    ch.h()
        .iter()
        .zip(ch.sides())
        .map(|(h, side)| {
            let v = match side {
                Side::Reflect => vr.as_ref(),
                Side::Transmit => vt.as_ref(),
            };
            v.map(|v| dotc(h, v)).ok_or(Error::Mode("user side has no phase matrix in this mode"))
        })
        .collect()
}

/// `a_n = |h_n^H Φ_side f|²` for a single user.
pub fn effective_gain(h: &CVec, cfg: &PhaseConfig, f: &CVec, side: Side) -> Result<f64> {
    if h.len() != f.len() {
        return Err(Error::Shape("user channel and feed lengths differ"));
    }
    let v = cfg.apply(side, f).map_err(|e| match e {
        Error::Mode(_) => Error::Mode("configuration has no matrix on the requested side"),
        other => other,
    })?;
    Ok(dotc(h, &v).norm_sqr())
}

pub fn effective_gains(ch: &ChannelSet, cfg: &PhaseConfig) -> Result<Vec<f64>> {
    Ok(cascade_amplitudes(ch, cfg)?.iter().map(|g| g.norm_sqr()).collect())
}

fn check_inputs(ch: &ChannelSet, pa: &PowerAlloc, asg: &Assignment) -> Result<()> {
    if !(ch.sigma2() > 0.0) {
        return Err(Error::Domain("noise power must be positive"));
    }
    if pa.powers().len() != ch.users() {
        return Err(Error::Shape("one power per user is required"));
    }
    asg.covers(ch.users())
}

/// `Σ_n log2(1 + p_n a_n / σ²)` for already computed gains.
pub fn se_from_gains(gains: &[f64], powers: &[f64], sigma2: f64) -> f64 {
    gains.iter().zip(powers).map(|(&a, &p)| libm::log1p(p * a / sigma2) / LN_2).sum()
}

/// Sum spectral efficiency in b/s/Hz.
pub fn spectral_efficiency(ch: &ChannelSet, cfg: &PhaseConfig, pa: &PowerAlloc, asg: &Assignment) -> Result<f64> {
    check_inputs(ch, pa, asg)?;
    let gains = effective_gains(ch, cfg)?;
    Ok(se_from_gains(&gains, pa.powers(), ch.sigma2()))
}

/// Conjugate (Wirtinger) gradient `∂SE/∂Φ*` on the block support:
/// `G = Σ_n w_n g_n h_n f^H` with `w_n = (p_n/σ²) / (ln2 (1 + p_n a_n/σ²))`.
///
/// The real directional derivative is `dSE = 2 Re tr(G^H dΦ)`.
pub fn grad_phase(ch: &ChannelSet, cfg: &PhaseConfig, pa: &PowerAlloc, asg: &Assignment) -> Result<Blocks> {
    check_inputs(ch, pa, asg)?;
    let amps = cascade_amplitudes(ch, cfg)?;
    let sigma2 = ch.sigma2();
    let k = ch.elements();
    let mut acc_r = CVec::zeros(k);
    let mut acc_t = CVec::zeros(k);
    for ((g, &p), (h, side)) in amps.iter().zip(pa.powers()).zip(ch.h().iter().zip(ch.sides())) {
        let snr = p / sigma2;
        let w = snr / (LN_2 * (1.0 + snr * g.norm_sqr()));
        let acc = match side {
            Side::Reflect => &mut acc_r,
            Side::Transmit => &mut acc_t,
        };
        acc.axpy(*g * w, h, C64::new(1.0, 0.0));
    }
    let d = cfg.layout().group_dim();
    let f = ch.f();
    let outer = |u: &CVec| -> Vec<CMat> {
        (0..cfg.layout().num_groups()).map(|l| u.rows(l * d, d) * f.rows(l * d, d).adjoint()).collect()
    };
    let mut out = cfg.layout().zeros();
    if let Some(r) = out.r.as_mut() {
        *r = outer(&acc_r);
    }
    if let Some(t) = out.t.as_mut() {
        *t = outer(&acc_t);
    }
    Ok(out)
}

/// Worst component-wise relative error between the conjugate gradient `grad`
/// of `objective` at `at` and central differences with step `h`.
///
/// Real and imaginary parts of every block entry are perturbed separately and
/// compared against `2 Re G` and `2 Im G`. The relative error of a component
/// is `|fd − analytic| / max(|analytic|, 1e-3 · max_i |analytic_i|)`, so
/// components that are tiny next to the largest one are judged on the
/// largest scale.
pub fn fd_check_with<F>(objective: F, grad: &Blocks, at: &Blocks, h: f64) -> f64
where
    F: Fn(&Blocks) -> f64,
{
    let analytic: Vec<f64> = grad.iter().flat_map(|m| m.iter().flat_map(|z| [2.0 * z.re, 2.0 * z.im])).collect();
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = if scale > 0.0 { 1e-3 * scale } else { f64::MIN_POSITIVE };
    let mut probe = at.clone();
    let mut worst = 0.0f64;
    let mut idx = 0;
    let n_blocks = at.iter().count();
    for b in 0..n_blocks {
        let len = entry_count(at, b);
        for e in 0..len {
            for part in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let base = *entry_mut(&mut probe, b, e);
                *entry_mut(&mut probe, b, e) = base + part * h;
                let plus = objective(&probe);
                *entry_mut(&mut probe, b, e) = base - part * h;
                let minus = objective(&probe);
                *entry_mut(&mut probe, b, e) = base;
                let fd = (plus - minus) / (2.0 * h);
                let an = analytic[idx];
                worst = worst.max((fd - an).abs() / an.abs().max(floor));
                idx += 1;
            }
        }
    }
    worst
}

fn entry_count(blocks: &Blocks, b: usize) -> usize {
    blocks.iter().nth(b).map_or(0, |m| m.len())
}

fn entry_mut(blocks: &mut Blocks, b: usize, e: usize) -> &mut C64 {
    let m = blocks.iter_mut().nth(b).expect("block index in range");
    &mut m[e]
}

/// Finite-difference check of [`grad_phase`] against [`spectral_efficiency`].
pub fn fd_check(ch: &ChannelSet, cfg: &PhaseConfig, pa: &PowerAlloc, asg: &Assignment, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain("finite-difference step must be positive"));
    }
    let grad = grad_phase(ch, cfg, pa, asg)?;
    let layout = *cfg.layout();
    let objective = |blocks: &Blocks| {
        PhaseConfig::from_blocks(layout, blocks.clone())
            .and_then(|c| spectral_efficiency(ch, &c, pa, asg))
            .unwrap_or(f64::NAN)
    };
    Ok(fd_check_with(objective, &grad, cfg.blocks(), h))
}
