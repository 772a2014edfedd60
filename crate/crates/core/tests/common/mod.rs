#![allow(dead_code)]

use bdris_core::channel::ChannelSet;
use bdris_core::linalg::{CMat, CVec, C64};
use bdris_core::ris::{Architecture, Layout, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cgauss(rng))
}

pub fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| cgauss(rng))
}

/// Haar unitary from nalgebra's QR with the R diagonal made positive.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let qr = cmat(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}

/// Unitary whose first column is the unit vector `u`.
pub fn unitary_with_first_column(rng: &mut ChaCha8Rng, u: &CVec) -> CMat {
    let n = u.len();
    let mut m = cmat(rng, n, n);
    m.set_column(0, u);
    let qr = m.qr();
    let mut q = qr.q();
    let c = q.column(0).dotc(u);
    let ph = c / c.norm();
    let mut col = q.column_mut(0);
    col *= ph;
    q
}

pub fn random_channels(seed: u64, k: usize, n: usize, sigma2: f64) -> ChannelSet {
    let mut r = rng(seed);
    let h = (0..n).map(|_| cvec(&mut r, k)).collect();
    let f = cvec(&mut r, k);
    let f = f.unscale(f.norm());
    ChannelSet::new(h, f, sigma2).unwrap()
}

/// All valid (architecture, group count) choices for `k` elements.
pub fn architectures(k: usize) -> Vec<Architecture> {
    let mut out = vec![Architecture::single_connected(k)];
    if k > 1 {
        out.push(Architecture::fully_connected());
    }
    for l in 2..k {
        if k.is_multiple_of(l) {
            out.push(Architecture::group_connected(l));
        }
    }
    out
}

pub const MODES: [Mode; 3] = [Mode::Reflective, Mode::Transmissive, Mode::Hybrid];

pub fn random_blocks(rng: &mut ChaCha8Rng, layout: &Layout) -> bdris_core::ris::Blocks {
    let mut b = layout.zeros();
    for m in b.iter_mut() {
        *m = cmat(rng, m.nrows(), m.ncols());
    }
    b
}

pub fn pick_arch(rng: &mut ChaCha8Rng, k: usize) -> Architecture {
    let all = architectures(k);
    all[rng.gen_range(0..all.len())]
}
