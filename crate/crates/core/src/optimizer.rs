//! Alternating maximization of the sum spectral efficiency.
//!
//! Power allocation for fixed phases is solved exactly by waterfilling. Phases
//! for fixed powers are improved by Riemannian gradient ascent (Cayley /
//! polar retractions) or, for the diagonal baseline, by projected gradient
//! ascent. Both phase solvers use Armijo backtracking and only accept strict
//! improvements, so the outer trace never decreases.

use alloc::vec::Vec;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::objective::{effective_gains, grad_phase, spectral_efficiency, Assignment, PowerAlloc};
use crate::ris::{
    self, make_feasible_random, project_feasible, retract, tangent_project, ArchKind, Architecture, Blocks, Mode,
    PhaseConfig,
};

/// Backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub init_step: f64,
    pub shrink: f64,
    pub slope: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self { init_step: 1.0, shrink: 0.5, slope: 1e-4, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    pub inner_rel_tol: f64,
    pub outer_rel_tol: f64,
    pub armijo: Armijo,
    /// Relative tolerance on `|Σ p_n − P_t| / P_t`.
    pub waterfill_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            inner_max_iters: 200,
            outer_max_iters: 50,
            inner_rel_tol: 1e-6,
            outer_rel_tol: 1e-5,
            armijo: Armijo::default(),
            waterfill_tol: 1e-9,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let positive =
            [self.inner_rel_tol, self.outer_rel_tol, self.waterfill_tol, self.armijo.init_step, self.armijo.slope];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("tolerances, initial step and Armijo slope must be positive"));
        }
        if !(self.armijo.shrink > 0.0 && self.armijo.shrink < 1.0) {
            return Err(Error::Config("Armijo shrink factor must lie in (0, 1)"));
        }
        if self.armijo.slope >= 1.0 {
            return Err(Error::Config("Armijo slope must be below 1"));
        }
        Ok(())
    }
}

/// Sum-rate optimal powers `p_n = max(0, μ − σ²/a_n)` with `Σ p_n = P_t`.
///
/// The water level `μ` is bracketed by bisection; the powers of the resulting
/// active set are then solved in closed form so that small budgets keep full
/// relative accuracy.
pub fn waterfill(gains: &[f64], budget: f64, sigma2: f64, tol: f64) -> Result<PowerAlloc> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::Domain("power budget must be positive"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain("noise power must be positive"));
    }
    if gains.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::Domain("gains must be finite and nonnegative"));
    }
    let floors: Vec<Option<f64>> = gains.iter().map(|&a| (a > 0.0).then(|| sigma2 / a)).collect();
    let lowest = floors.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !lowest.is_finite() {
        return Err(Error::Degenerate);
    }
    let filled = |mu: f64| floors.iter().flatten().map(|&t| (mu - t).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (lowest, lowest + budget);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if filled(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if budget - filled(lo) <= tol * budget {
            break;
        }
    }
    // Closed-form polish on the active set; drop users that turn negative.
    let mut active: Vec<bool> = floors.iter().map(|t| t.is_some_and(|t| t < lo) || t == &Some(lowest)).collect();
    let powers = loop {
        let count = active.iter().filter(|&&a| a).count();
        let sum_floor: f64 = floors.iter().zip(&active).filter(|(_, &a)| a).map(|(t, _)| t.unwrap_or(0.0)).sum();
        let mean_floor = sum_floor / count as f64;
        let share = budget / count as f64;
        let p: Vec<f64> = floors
            .iter()
            .zip(&active)
            .map(|(t, &a)| if a { share + (mean_floor - t.unwrap_or(0.0)) } else { 0.0 })
            .collect();
        match p.iter().position(|&x| x < 0.0) {
            Some(_) if count > 1 => {
                for (a, x) in active.iter_mut().zip(&p) {
                    if *x < 0.0 {
                        *a = false;
                    }
                }
            }
            _ => break p,
        }
    };
    let mut powers: Vec<f64> = powers.into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = powers.iter().sum();
    if total > budget {
        let scale = budget / total;
        for x in &mut powers {
            *x *= scale;
        }
        // Rounding in the rescale can still leave the sum one ulp high.
        while powers.iter().sum::<f64>() > budget {
            for x in &mut powers {
                *x = libm::nextafter(*x, 0.0);
            }
        }
    }
    PowerAlloc::new(powers, budget)
}

/// Result of one phase-ascent call.
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub cfg: PhaseConfig,
    pub se: f64,
    pub iterations: usize,
    /// The line search exhausted its backtracks before the tolerance was met.
    pub stalled: bool,
}

fn is_stationary(slope: f64, se: f64) -> bool {
    !(slope > 1e-13 * se.abs())
}

enum Stepper {
    Riemannian,
    Projected,
}

fn ascend(
    ch: &ChannelSet,
    pa: &PowerAlloc,
    init: &PhaseConfig,
    opts: &OptimOptions,
    stepper: Stepper,
) -> Result<Ascent> {
    opts.validate()?;
    let asg = Assignment::identity(ch.users());
    let layout = *init.layout();
    let mut cfg = init.clone();
    let mut se = spectral_efficiency(ch, &cfg, pa, &asg)?;
    let mut step = opts.armijo.init_step;
    let max_step = opts.armijo.init_step * 1e6;
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < opts.inner_max_iters {
        let grad = grad_phase(ch, &cfg, pa, &asg)?;
        let dir = tangent_project(&cfg, &grad)?;
        // d/dτ SE along the retraction curve at τ = 0.
        let slope = 2.0 * grad.inner(dir.blocks());
        if is_stationary(slope, se) {
            break;
        }
        let euclid: Blocks = grad.scaled(2.0);
        let mut trial = step;
        let mut accepted = None;
        for _ in 0..=opts.armijo.max_backtracks {
            let cand = match stepper {
                Stepper::Riemannian => retract(&cfg, &dir, trial)?,
                Stepper::Projected => match project_feasible(layout, &cfg.blocks().add_scaled(trial, &euclid)) {
                    Ok(c) => c,
                    Err(Error::RankDeficient { .. }) => {
                        trial *= opts.armijo.shrink;
                        continue;
                    }
                    Err(e) => return Err(e),
                },
            };
            let se_c = spectral_efficiency(ch, &cand, pa, &asg)?;
            let predicted = match stepper {
                Stepper::Riemannian => trial * slope,
                Stepper::Projected => euclid.inner(&cand.blocks().add_scaled(-1.0, cfg.blocks())),
            };
            if se_c > se && se_c - se >= opts.armijo.slope * predicted {
                accepted = Some((cand, se_c));
                break;
            }
            trial *= opts.armijo.shrink;
        }
        iterations += 1;
        let Some((cand, se_c)) = accepted else {
            stalled = true;
            break;
        };
        let rel = (se_c - se) / se.abs().max(f64::MIN_POSITIVE);
        step = if trial == step { (2.0 * trial).min(max_step) } else { trial };
        cfg = cand;
        se = se_c;
        if rel < opts.inner_rel_tol {
            break;
        }
    }
    Ok(Ascent { cfg, se, iterations, stalled })
}

/// Riemannian gradient ascent of the phase configuration for fixed powers.
pub fn ascend_phase(ch: &ChannelSet, pa: &PowerAlloc, init: &PhaseConfig, opts: &OptimOptions) -> Result<Ascent> {
    ascend(ch, pa, init, opts, Stepper::Riemannian)
}

/// Projected gradient ascent for the diagonal (single-connected) surface:
/// Euclidean step followed by per-element renormalization.
pub fn ascend_phase_diagonal(
    ch: &ChannelSet,
    pa: &PowerAlloc,
    init: &PhaseConfig,
    opts: &OptimOptions,
) -> Result<Ascent> {
    if init.arch().kind() != ArchKind::SingleConnected {
        return Err(Error::Config("diagonal ascent needs a single-connected configuration"));
    }
    ascend(ch, pa, init, opts, Stepper::Projected)
}

/// How the phase subproblem is solved inside [`alternate_from`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMethod {
    Riemannian,
    ProjectedDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub cfg: PhaseConfig,
    pub pa: PowerAlloc,
    pub se: f64,
    /// `(outer iteration, SE)`; entry 0 is the initial phases with waterfilled powers.
    pub trace: Vec<(usize, f64)>,
    pub outer_iters: usize,
    pub converged: bool,
    pub stalled: bool,
}

/// Alternating optimization from a random feasible start drawn with `seed`.
pub fn alternate(
    ch: &ChannelSet,
    budget: f64,
    arch: Architecture,
    mode: Mode,
    opts: &OptimOptions,
    seed: u64,
) -> Result<Solution> {
    let init = make_feasible_random(arch, mode, ch.elements(), seed)?;
    alternate_from(ch, budget, init, None, PhaseMethod::Riemannian, opts)
}

/// The diagonal benchmark: single-connected surface, projected gradient phases.
pub fn alternate_diagonal(
    ch: &ChannelSet,
    budget: f64,
    mode: Mode,
    opts: &OptimOptions,
    seed: u64,
) -> Result<Solution> {
    let k = ch.elements();
    let init = make_feasible_random(Architecture::single_connected(k), mode, k, seed)?;
    alternate_from(ch, budget, init, None, PhaseMethod::ProjectedDiagonal, opts)
}

/// Alternating optimization from a given feasible start.
///
/// When `warm_powers` is given and beats fresh waterfilling on `init`, it is
/// kept, so a warm start never begins below the solution it came from.
pub fn alternate_from(
    ch: &ChannelSet,
    budget: f64,
    init: PhaseConfig,
    warm_powers: Option<&PowerAlloc>,
    method: PhaseMethod,
    opts: &OptimOptions,
) -> Result<Solution> {
    opts.validate()?;
    if !ris::validate(&init, 1e-8).pass {
        return Err(Error::Config("initial configuration is infeasible"));
    }
    let asg = Assignment::identity(ch.users());
    let fill = |cfg: &PhaseConfig| -> Result<PowerAlloc> {
        waterfill(&effective_gains(ch, cfg)?, budget, ch.sigma2(), opts.waterfill_tol)
    };
    let mut cfg = init;
    let mut pa = fill(&cfg)?;
    let mut se = spectral_efficiency(ch, &cfg, &pa, &asg)?;
    if let Some(warm) = warm_powers {
        if warm.budget() <= budget {
            let se_warm = spectral_efficiency(ch, &cfg, warm, &asg)?;
            if se_warm > se {
                pa = warm.clone();
                se = se_warm;
            }
        }
    }
    let mut trace = alloc::vec![(0, se)];
    let mut converged = false;
    let mut stalled = false;
    let mut outer_iters = 0;
    for it in 1..=opts.outer_max_iters {
        let asc = match method {
            PhaseMethod::Riemannian => ascend_phase(ch, &pa, &cfg, opts)?,
            PhaseMethod::ProjectedDiagonal => ascend_phase_diagonal(ch, &pa, &cfg, opts)?,
        };
        stalled |= asc.stalled;
        let prev = se;
        cfg = asc.cfg;
        se = asc.se;
        let cand = fill(&cfg)?;
        let se_c = spectral_efficiency(ch, &cfg, &cand, &asg)?;
        if se_c >= se {
            pa = cand;
            se = se_c;
        }
        trace.push((it, se));
        outer_iters = it;
        if (se - prev) / prev.abs().max(f64::MIN_POSITIVE) < opts.outer_rel_tol {
            converged = true;
            break;
        }
    }
    Ok(Solution { cfg, pa, se, trace, outer_iters, converged, stalled })
}
