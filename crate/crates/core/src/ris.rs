//! Feasible sets of the BD-RIS phase response.
//!
//! A surface of `K` elements is split into `L` equal groups of `K̄ = K / L`
//! elements. Each group carries one `K̄×K̄` matrix per active side:
//!
//! | mode         | per-group constraint                          |
//! |--------------|-----------------------------------------------|
//! | reflective   | `Φ_r^H Φ_r = I`                               |
//! | transmissive | `Φ_t^H Φ_t = I`                               |
//! | hybrid       | `Φ_r^H Φ_r + Φ_t^H Φ_t = I`                   |
//!
//! Single-connected surfaces are the `K̄ = 1` case (unit-modulus diagonal, or
//! `|φ_r|² + |φ_t|² = 1` per element in hybrid mode) and fully-connected
//! surfaces the `L = 1` case. The assembled `K×K` matrix is block diagonal.
//!
//! Unitary groups are moved with the Cayley retraction, hybrid groups (a
//! Stiefel manifold of `2K̄×K̄` stacked blocks) with the polar retraction and
//! single-connected elements with plain renormalization.

use alloc::vec::Vec;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, cayley_apply, frob_norm, polar_factor, real_inner, CMat, CVec, C64};

/// Feasibility tolerance used for freshly constructed configurations.
pub const EPS_FEAS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchKind {
    SingleConnected,
    GroupConnected,
    FullyConnected,
}

/// Circuit topology of the surface: how many groups of interconnected elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Architecture {
    kind: ArchKind,
    groups: usize,
}

impl Architecture {
    pub fn single_connected(k: usize) -> Self {
        Self { kind: ArchKind::SingleConnected, groups: k }
    }

    pub fn fully_connected() -> Self {
        Self { kind: ArchKind::FullyConnected, groups: 1 }
    }

    pub fn group_connected(groups: usize) -> Self {
        Self { kind: ArchKind::GroupConnected, groups }
    }

    /// Builds the architecture of `kind` for `k` elements; `groups` is only
    /// read for [`ArchKind::GroupConnected`].
    pub fn for_elements(kind: ArchKind, groups: usize, k: usize) -> Result<Self> {
        let arch = match kind {
            ArchKind::SingleConnected => Self::single_connected(k),
            ArchKind::FullyConnected => Self::fully_connected(),
            ArchKind::GroupConnected => Self::group_connected(groups),
        };
        arch.group_dim(k)?;
        Ok(arch)
    }

    pub fn kind(&self) -> ArchKind {
        self.kind
    }

    pub fn num_groups(&self) -> usize {
        self.groups
    }

    /// Group dimension `K̄ = K / L`, or an error when the pairing is invalid.
    pub fn group_dim(&self, k: usize) -> Result<usize> {
        if k == 0 {
            return Err(Error::Config("element count must be positive"));
        }
        let l = self.groups;
        match self.kind {
            ArchKind::SingleConnected if l != k => {
                Err(Error::Config("single-connected surfaces have one group per element"))
            }
            ArchKind::FullyConnected if l != 1 => Err(Error::Config("fully-connected surfaces have exactly one group")),
            ArchKind::GroupConnected if l <= 1 || l >= k => {
                Err(Error::Config("group-connected surfaces need 1 < L < K"))
            }
            _ if l == 0 || !k.is_multiple_of(l) => Err(Error::GroupSize { k, groups: l }),
            _ => Ok(k / l),
        }
    }

    /// Number of independently controllable non-zero entries, `L·K̄²`.
    pub fn nonzero_entries(&self, k: usize) -> Result<usize> {
        let d = self.group_dim(k)?;
        Ok(self.groups * d * d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Reflective,
    Transmissive,
    Hybrid,
}

impl Mode {
    pub fn has_reflective(self) -> bool {
        matches!(self, Mode::Reflective | Mode::Hybrid)
    }

    pub fn has_transmissive(self) -> bool {
        matches!(self, Mode::Transmissive | Mode::Hybrid)
    }
}

/// Which side of the surface a matrix (or a user) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Reflect,
    Transmit,
}

/// Architecture, mode and element count; fixes the shape of every block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Layout {
    arch: Architecture,
    mode: Mode,
    k: usize,
    group_dim: usize,
}

impl Layout {
    pub fn new(arch: Architecture, mode: Mode, k: usize) -> Result<Self> {
        let group_dim = arch.group_dim(k)?;
        Ok(Self { arch, mode, k, group_dim })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn elements(&self) -> usize {
        self.k
    }

    pub fn num_groups(&self) -> usize {
        self.arch.groups
    }

    pub fn group_dim(&self) -> usize {
        self.group_dim
    }

    fn has(&self, side: Side) -> bool {
        match side {
            Side::Reflect => self.mode.has_reflective(),
            Side::Transmit => self.mode.has_transmissive(),
        }
    }

    /// All-zero blocks in this layout.
    pub fn zeros(&self) -> Blocks {
        let d = self.group_dim;
        let make = || (0..self.num_groups()).map(|_| CMat::zeros(d, d)).collect::<Vec<_>>();
        Blocks { r: self.mode.has_reflective().then(make), t: self.mode.has_transmissive().then(make) }
    }

    fn check_blocks(&self, blocks: &Blocks) -> Result<()> {
        let d = self.group_dim;
        for (present, side) in [(blocks.r.as_ref(), Side::Reflect), (blocks.t.as_ref(), Side::Transmit)] {
            match (present, self.has(side)) {
                (Some(list), true) => {
                    if list.len() != self.num_groups() {
                        return Err(Error::Shape("wrong number of group blocks"));
                    }
                    if list.iter().any(|m| m.nrows() != d || m.ncols() != d) {
                        return Err(Error::Shape("group block has the wrong dimension"));
                    }
                }
                (None, false) => {}
                (Some(_), false) => return Err(Error::Shape("matrix given for an inactive side")),
                (None, true) => return Err(Error::Shape("matrix missing for an active side")),
            }
        }
        Ok(())
    }
}

/// Per-group matrices for the reflective and transmissive sides.
///
/// Used both for feasible points and for raw (unconstrained) matrices such as
/// gradients and tangent directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub r: Option<Vec<CMat>>,
    pub t: Option<Vec<CMat>>,
}

impl Blocks {
    pub fn side(&self, side: Side) -> Option<&[CMat]> {
        match side {
            Side::Reflect => self.r.as_deref(),
            Side::Transmit => self.t.as_deref(),
        }
    }

    pub fn side_mut(&mut self, side: Side) -> Option<&mut Vec<CMat>> {
        match side {
            Side::Reflect => self.r.as_mut(),
            Side::Transmit => self.t.as_mut(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMat> {
        self.r.iter().flatten().chain(self.t.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut CMat> {
        self.r.iter_mut().flatten().chain(self.t.iter_mut().flatten())
    }

    /// `self + alpha · other`; shapes must agree.
    pub fn add_scaled(&self, alpha: f64, other: &Blocks) -> Blocks {
        let mut out = self.clone();
        for (a, b) in out.iter_mut().zip(other.iter()) {
            *a += b * C64::new(alpha, 0.0);
        }
        out
    }

    pub fn scaled(&self, alpha: f64) -> Blocks {
        let mut out = self.clone();
        for a in out.iter_mut() {
            *a *= C64::new(alpha, 0.0);
        }
        out
    }

    /// `Σ Re tr(A^H B)` over all blocks.
    pub fn inner(&self, other: &Blocks) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| real_inner(a, b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
    }
}

/// A phase response state: layout plus its group blocks.
///
/// Construction only checks shapes; use [`validate`] for the mode constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    layout: Layout,
    blocks: Blocks,
}

impl PhaseConfig {
    pub fn from_blocks(layout: Layout, blocks: Blocks) -> Result<Self> {
        layout.check_blocks(&blocks)?;
        Ok(Self { layout, blocks })
    }

    /// Unit-modulus diagonal configuration of a single-connected surface.
    pub fn diagonal(mode: Mode, phases: &[C64]) -> Result<Self> {
        if mode == Mode::Hybrid {
            return Err(Error::Mode("a single diagonal cannot describe a hybrid surface"));
        }
        let k = phases.len();
        let layout = Layout::new(Architecture::single_connected(k), mode, k)?;
        let list: Vec<CMat> = phases.iter().map(|&p| CMat::from_element(1, 1, p)).collect();
        let blocks = match mode {
            Mode::Reflective => Blocks { r: Some(list), t: None },
            _ => Blocks { r: None, t: Some(list) },
        };
        Self::from_blocks(layout, blocks)
    }

    /// The same matrix on every group: `Φ_r` and/or `Φ_t` as given.
    pub fn uniform(layout: Layout, r: Option<&CMat>, t: Option<&CMat>) -> Result<Self> {
        let rep = |m: &CMat| (0..layout.num_groups()).map(|_| m.clone()).collect::<Vec<_>>();
        Self::from_blocks(layout, Blocks { r: r.map(rep), t: t.map(rep) })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn into_blocks(self) -> Blocks {
        self.blocks
    }

    pub fn arch(&self) -> Architecture {
        self.layout.arch
    }

    pub fn mode(&self) -> Mode {
        self.layout.mode
    }

    pub fn elements(&self) -> usize {
        self.layout.k
    }

    /// Full block-diagonal `K×K` matrix of one side.
    pub fn assemble(&self, side: Side) -> Option<CMat> {
        let list = self.blocks.side(side)?;
        let d = self.layout.group_dim;
        let mut full = CMat::zeros(self.layout.k, self.layout.k);
        for (l, b) in list.iter().enumerate() {
            full.view_mut((l * d, l * d), (d, d)).copy_from(b);
        }
        Some(full)
    }

    /// `Φ_side · x`, computed block by block.
    pub fn apply(&self, side: Side, x: &CVec) -> Result<CVec> {
        let list = self.blocks.side(side).ok_or(Error::Mode("configuration has no matrix on the requested side"))?;
        if x.len() != self.layout.k {
            return Err(Error::Shape("vector length differs from element count"));
        }
        let d = self.layout.group_dim;
        let mut out = CVec::zeros(self.layout.k);
        for (l, b) in list.iter().enumerate() {
            let seg = b * x.rows(l * d, d);
            out.rows_mut(l * d, d).copy_from(&seg);
        }
        Ok(out)
    }

    /// Re-expresses this configuration under a coarser architecture
    /// (single ⊂ group ⊂ fully). The assembled matrices are unchanged.
    pub fn embed(&self, target: Architecture) -> Result<PhaseConfig> {
        let layout = Layout::new(target, self.layout.mode, self.layout.k)?;
        let (src, dst) = (self.layout.group_dim, layout.group_dim);
        if dst % src != 0 {
            return Err(Error::Config("target groups do not contain the source groups"));
        }
        let pick = |side: Side| {
            self.assemble(side).map(|full| {
                (0..layout.num_groups())
                    .map(|l| full.view((l * dst, l * dst), (dst, dst)).clone_owned())
                    .collect::<Vec<_>>()
            })
        };
        Self::from_blocks(layout, Blocks { r: pick(Side::Reflect), t: pick(Side::Transmit) })
    }
}

/// A direction in the tangent space of the feasible set at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDir {
    layout: Layout,
    blocks: Blocks,
}

impl TangentDir {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn norm(&self) -> f64 {
        self.blocks.norm()
    }
}

/// Outcome of [`validate`]: one Frobenius residual per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub residuals: Vec<f64>,
    pub worst: f64,
    pub worst_group: Option<usize>,
    pub pass: bool,
}

fn stacked(r: &CMat, t: &CMat) -> CMat {
    let d = r.ncols();
    let mut x = CMat::zeros(2 * d, d);
    x.view_mut((0, 0), (d, d)).copy_from(r);
    x.view_mut((d, 0), (d, d)).copy_from(t);
    x
}

fn unstack(x: &CMat) -> (CMat, CMat) {
    let d = x.ncols();
    (x.rows(0, d).clone_owned(), x.rows(d, d).clone_owned())
}

/// Per-group work unit: either a square unitary block or a stacked hybrid block.
fn group_units(layout: &Layout, blocks: &Blocks) -> Vec<(Side, CMat)> {
    let mut units = Vec::new();
    match (&blocks.r, &blocks.t) {
        (Some(r), Some(t)) => {
            for (a, b) in r.iter().zip(t) {
                units.push((Side::Transmit, stacked(a, b)));
            }
        }
        (Some(r), None) => units.extend(r.iter().map(|m| (Side::Reflect, m.clone()))),
        (None, Some(t)) => units.extend(t.iter().map(|m| (Side::Transmit, m.clone()))),
        (None, None) => {}
    }
    debug_assert_eq!(units.len(), layout.num_groups());
    units
}

fn from_units(layout: Layout, units: Vec<CMat>) -> Blocks {
    match layout.mode {
        Mode::Hybrid => {
            let (r, t): (Vec<_>, Vec<_>) = units.iter().map(unstack).unzip();
            Blocks { r: Some(r), t: Some(t) }
        }
        Mode::Reflective => Blocks { r: Some(units), t: None },
        Mode::Transmissive => Blocks { r: None, t: Some(units) },
    }
}

/// Checks the mode constraint group by group.
pub fn validate(cfg: &PhaseConfig, tol: f64) -> ValidationReport {
    let residuals: Vec<f64> =
        group_units(&cfg.layout, &cfg.blocks).iter().map(|(_, x)| linalg::gram_residual(x)).collect();
    let mut worst = 0.0;
    let mut worst_group = None;
    for (l, &r) in residuals.iter().enumerate() {
        if !(r <= worst) {
            worst = r;
            worst_group = Some(l);
        }
    }
    let pass = residuals.iter().all(|&r| r < tol);
    ValidationReport { residuals, worst, worst_group, pass }
}

fn complex_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re, im)
    })
}

/// Random feasible configuration: orthonormalized complex Gaussian blocks.
pub fn make_feasible_random(arch: Architecture, mode: Mode, k: usize, seed: u64) -> Result<PhaseConfig> {
    let layout = Layout::new(arch, mode, k)?;
    let d = layout.group_dim;
    let rows = if mode == Mode::Hybrid { 2 * d } else { d };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units = Vec::with_capacity(layout.num_groups());
    for block in 0..layout.num_groups() {
        let raw = complex_gaussian(&mut rng, rows, d);
        let q = linalg::orthonormalize_columns(&raw).map_err(|_| Error::RankDeficient { block })?;
        units.push(q);
    }
    PhaseConfig::from_blocks(layout, from_units(layout, units))
}

/// Nearest feasible point in Frobenius norm: the polar factor of each group
/// (stacked for hybrid; per-entry normalization when `K̄ = 1`).
pub fn project_feasible(layout: Layout, raw: &Blocks) -> Result<PhaseConfig> {
    layout.check_blocks(raw)?;
    let units = group_units(&layout, raw)
        .iter()
        .enumerate()
        .map(|(l, (_, x))| polar_factor(x, l))
        .collect::<Result<Vec<_>>>()?;
    PhaseConfig::from_blocks(layout, from_units(layout, units))
}

/// Riemannian gradient at `base` of a real objective whose conjugate
/// (Wirtinger) gradient with respect to the blocks is `grad`.
///
/// Unitary groups: `Ξ = A Φ` with skew-Hermitian `A = G Φ^H − Φ G^H`.
/// Hybrid groups: Stiefel projection of `E = 2G`, `Ξ = E − X herm(X^H E)`.
/// For `K̄ = 1` the unitary formula is the component of `2g` tangent to the
/// unit circle at `φ`.
pub fn tangent_project(base: &PhaseConfig, grad: &Blocks) -> Result<TangentDir> {
    base.layout.check_blocks(grad)?;
    let xs = group_units(&base.layout, &base.blocks);
    let gs = group_units(&base.layout, grad);
    let units = xs
        .iter()
        .zip(&gs)
        .map(|((_, x), (_, g))| {
            if base.layout.mode == Mode::Hybrid {
                let e = g * C64::new(2.0, 0.0);
                let m = x.adjoint() * &e;
                let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
                e - x * herm
            } else {
                skew_generator(x, g) * x
            }
        })
        .collect();
    Ok(TangentDir { layout: base.layout, blocks: from_units(base.layout, units) })
}

fn skew_generator(phi: &CMat, g: &CMat) -> CMat {
    let gp = g * phi.adjoint();
    &gp - gp.adjoint()
}

/// Moves `base` along `dir` by `step` and lands back on the feasible set.
pub fn retract(base: &PhaseConfig, dir: &TangentDir, step: f64) -> Result<PhaseConfig> {
    if base.layout != dir.layout {
        return Err(Error::Shape("direction layout differs from base layout"));
    }
    if !step.is_finite() {
        return Err(Error::Domain("step must be finite"));
    }
    if step == 0.0 {
        return Ok(base.clone());
    }
    let xs = group_units(&base.layout, &base.blocks);
    let ds = group_units(&base.layout, &dir.blocks);
    let hybrid = base.layout.mode == Mode::Hybrid;
    let units = xs
        .iter()
        .zip(&ds)
        .enumerate()
        .map(|(l, ((_, x), (_, xi)))| {
            if hybrid || x.ncols() == 1 {
                polar_factor(&(x + xi * C64::new(step, 0.0)), l)
            } else {
                // Ξ = A Φ with A skew-Hermitian, so A = Ξ Φ^H.
                let a = xi * x.adjoint();
                let a = (&a - a.adjoint()) * C64::new(0.5, 0.0);
                cayley_apply(&a, step / 2.0, x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseConfig::from_blocks(base.layout, from_units(base.layout, units))
}

/// `max_l ‖X_l^H Ξ_l + Ξ_l^H X_l‖_F`, zero for an exact tangent vector.
pub fn tangency_residual(base: &PhaseConfig, dir: &TangentDir) -> f64 {
    let xs = group_units(&base.layout, &base.blocks);
    let ds = group_units(&base.layout, &dir.blocks);
    xs.iter()
        .zip(&ds)
        .map(|((_, x), (_, d))| {
            let m = x.adjoint() * d;
            frob_norm(&(&m + m.adjoint()))
        })
        .fold(0.0, f64::max)
}
