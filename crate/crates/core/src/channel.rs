//! Scenario geometry and Rician channel synthesis between a UAV-mounted
//! transmissive surface and ground users.
//!
//! The surface lies in the horizontal plane at the UAV position and faces the
//! ground (boresight `-z`). The feed antenna sits `feed_offset_m` above the
//! surface center, on the opposite side from the users.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};
use crate::ris::Side;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Whether user channels carry free-space path gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkBudget {
    /// Unit link gain for every user.
    Normalized,
    /// Free-space gain `(c / (4π d f_c))²`.
    Physical,
}

/// Rectangular element grid, row-major, spacing given in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGrid {
    pub rows: usize,
    pub cols: usize,
    pub spacing_wl: f64,
}

impl ElementGrid {
    /// The `rows × cols = k` factorization closest to square (`rows ≤ cols`).
    pub fn near_square(k: usize, spacing_wl: f64) -> Self {
        let mut rows = 1;
        let mut r = 1;
        while r * r <= k {
            if k.is_multiple_of(r) {
                rows = r;
            }
            r += 1;
        }
        Self { rows, cols: k.max(1) / rows, spacing_wl }
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Element positions in wavelengths, centered on the surface center.
    pub fn positions_wl(&self) -> Vec<[f64; 3]> {
        let cx = (self.cols as f64 - 1.0) / 2.0;
        let cy = (self.rows as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.elements());
        for row in 0..self.rows {
            for col in 0..self.cols {
                out.push([(col as f64 - cx) * self.spacing_wl, (row as f64 - cy) * self.spacing_wl, 0.0]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// UAV (surface center) position in meters.
    pub uav_position: [f64; 3],
    /// Center of the ground disk holding the users, meters.
    pub ue_center: [f64; 2],
    pub ue_radius: f64,
    pub num_ues: usize,
    pub fc_hz: f64,
    pub rician_factor_db: f64,
    pub link_budget: LinkBudget,
    pub grid: ElementGrid,
    pub feed_offset_m: f64,
    pub n0_mw_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            uav_position: [0.0, 0.0, 100.0],
            ue_center: [0.0, 0.0],
            ue_radius: 200.0,
            num_ues: 10,
            fc_hz: 28e9,
            rician_factor_db: 5.0,
            link_budget: LinkBudget::Normalized,
            grid: ElementGrid::near_square(32, 0.5),
            feed_offset_m: 0.25,
            n0_mw_per_hz: 1e-3,
            bandwidth_hz: 20e6,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.uav_position.iter().chain(&self.ue_center).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("positions must be finite"));
        }
        if self.num_ues == 0 {
            return Err(Error::Config("at least one user is required"));
        }
        if !(self.ue_radius > 0.0 && self.ue_radius.is_finite()) {
            return Err(Error::Config("user disk radius must be positive"));
        }
        if !(self.fc_hz > 0.0 && self.fc_hz.is_finite()) {
            return Err(Error::Config("carrier frequency must be positive"));
        }
        if self.rician_factor_db.is_nan() {
            return Err(Error::Config("rician factor must be a number"));
        }
        if self.grid.elements() == 0 || !(self.grid.spacing_wl > 0.0) {
            return Err(Error::Config("element grid must be non-empty with positive spacing"));
        }
        if !(self.feed_offset_m > 0.0 && self.feed_offset_m.is_finite()) {
            return Err(Error::Config("feed offset must be positive"));
        }
        if !(self.n0_mw_per_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::Config("noise density and bandwidth must be positive"));
        }
        if self.uav_position[2] <= 0.0 {
            return Err(Error::Config("UAV must fly above the ground plane"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc_hz
    }

    /// `σ² = N_0 · B` in mW.
    pub fn noise_power_mw(&self) -> f64 {
        self.n0_mw_per_hz * self.bandwidth_hz
    }

    /// Linear Rician factor `η`.
    pub fn rician_factor(&self) -> f64 {
        db_to_linear(self.rician_factor_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// UAV and ground-user positions for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub uav: [f64; 3],
    pub ues: Vec<[f64; 3]>,
}

/// Draws user positions uniformly in the configured ground disk.
pub fn sample_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = (0..cfg.num_ues)
        .map(|_| {
            let r = cfg.ue_radius * libm::sqrt(rng.gen::<f64>());
            let theta = 2.0 * PI * rng.gen::<f64>();
            [cfg.ue_center[0] + r * libm::cos(theta), cfg.ue_center[1] + r * libm::sin(theta), 0.0]
        })
        .collect();
    Ok(Scenario { uav: cfg.uav_position, ues })
}

/// Free-space power gain `(c / (4π d f_c))²`.
pub fn path_gain(distance_m: f64, fc_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain("distance must be positive"));
    }
    if !(fc_hz > 0.0) {
        return Err(Error::Domain("carrier frequency must be positive"));
    }
    let amp = SPEED_OF_LIGHT / (4.0 * PI * distance_m * fc_hz);
    Ok(amp * amp)
}

/// Planar array response: entry `k` is `exp(j 2π ⟨r_k, u⟩)` with `r_k` in
/// wavelengths and `u` a unit direction.
pub fn steering_vector(grid: &ElementGrid, direction: [f64; 3]) -> CVec {
    let pos = grid.positions_wl();
    CVec::from_iterator(
        pos.len(),
        pos.iter().map(|r| {
            let phase = 2.0 * PI * (r[0] * direction[0] + r[1] * direction[1] + r[2] * direction[2]);
            Complex::new(libm::cos(phase), libm::sin(phase))
        }),
    )
}

/// Unit-norm feed illumination: spherical-wave phase from the feed point,
/// equal amplitude `1/√K` on every element.
pub fn feed_vector(grid: &ElementGrid, feed_offset_wl: f64) -> CVec {
    let pos = grid.positions_wl();
    let amp = 1.0 / libm::sqrt(pos.len() as f64);
    CVec::from_iterator(
        pos.len(),
        pos.iter().map(|r| {
            let d = libm::sqrt(r[0] * r[0] + r[1] * r[1] + feed_offset_wl * feed_offset_wl);
            let phase = -2.0 * PI * d;
            Complex::new(amp * libm::cos(phase), amp * libm::sin(phase))
        }),
    )
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h: Vec<CVec>,
    f: CVec,
    sigma2: f64,
    distances: Vec<f64>,
    sides: Vec<Side>,
}

impl ChannelSet {
    /// Builds a channel set with every user on the transmissive side.
    pub fn new(h: Vec<CVec>, f: CVec, sigma2: f64) -> Result<Self> {
        let k = f.len();
        if h.is_empty() || k == 0 {
            return Err(Error::Shape("channel set needs at least one user and one element"));
        }
        if h.iter().any(|v| v.len() != k) {
            return Err(Error::Shape("user channel length differs from feed length"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain("noise power must be positive"));
        }
        let finite = |v: &CVec| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&f) || !h.iter().all(finite) {
            return Err(Error::Domain("channel entries must be finite"));
        }
        if (f.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("feed vector must have unit norm"));
        }
        let n = h.len();
        Ok(Self { h, f, sigma2, distances: Vec::new(), sides: alloc::vec![Side::Transmit; n] })
    }

    /// Assigns each user to a side of the surface.
    pub fn with_sides(mut self, sides: Vec<Side>) -> Result<Self> {
        if sides.len() != self.h.len() {
            return Err(Error::Shape("one side per user is required"));
        }
        self.sides = sides;
        Ok(self)
    }

    pub fn with_sides_all(self, side: Side) -> Self {
        let n = self.h.len();
        Self { sides: alloc::vec![side; n], ..self }
    }

    pub fn elements(&self) -> usize {
        self.f.len()
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[CVec] {
        &self.h
    }

    pub fn f(&self) -> &CVec {
        &self.f
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// UAV-to-user distances in meters (empty for hand-built sets).
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Rician channels `h_n = √g_n (√(η/(1+η)) a_n + √(1/(1+η)) w_n)` for every
/// user of `scn`, the feed vector and the noise power.
pub fn synth_channels(scn: &Scenario, cfg: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let k = cfg.grid.elements();
    let eta = cfg.rician_factor();
    let (los, nlos) =
        if eta.is_infinite() { (1.0, 0.0) } else { (libm::sqrt(eta / (1.0 + eta)), libm::sqrt(1.0 / (1.0 + eta))) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Vec::with_capacity(scn.ues.len());
    let mut distances = Vec::with_capacity(scn.ues.len());
    for ue in &scn.ues {
        let d = [ue[0] - scn.uav[0], ue[1] - scn.uav[1], ue[2] - scn.uav[2]];
        let dist = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if !(dist > 0.0) {
            return Err(Error::Domain("user coincides with the UAV"));
        }
        let u = [d[0] / dist, d[1] / dist, d[2] / dist];
        let gain = match cfg.link_budget {
            LinkBudget::Normalized => 1.0,
            LinkBudget::Physical => path_gain(dist, cfg.fc_hz)?,
        };
        let amp = libm::sqrt(gain);
        let a = steering_vector(&cfg.grid, u);
        let hn = CVec::from_iterator(k, a.iter().map(|&ak| (ak * los + complex_normal(&mut rng) * nlos) * amp));
        h.push(hn);
        distances.push(dist);
    }
    let f = feed_vector(&cfg.grid, cfg.feed_offset_m / cfg.wavelength());
    let mut set = ChannelSet::new(h, f, cfg.noise_power_mw())?;
    set.distances = distances;
    Ok(set)
}
