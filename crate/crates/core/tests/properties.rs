mod common;

use bdris_core::channel::{sample_scenario, synth_channels, ElementGrid, ScenarioConfig};
use bdris_core::linalg::{CMat, C64};
use bdris_core::objective::{effective_gains, se_from_gains, spectral_efficiency, Assignment, PowerAlloc};
use bdris_core::optimizer::waterfill;
use bdris_core::ris::{
    make_feasible_random, project_feasible, retract, tangent_project, validate, ArchKind, Architecture, Blocks, Layout,
    Mode, PhaseConfig, Side,
};
use common::*;
use proptest::prelude::*;

fn k_strategy() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 3, 4, 6, 8, 12, 16])
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop::sample::select(MODES.to_vec())
}

/// (architecture, mode, K) over every valid pairing.
fn layout_strategy() -> impl Strategy<Value = (Architecture, Mode, usize)> {
    (k_strategy(), mode_strategy(), any::<prop::sample::Index>()).prop_map(|(k, mode, idx)| {
        let archs = architectures(k);
        (archs[idx.index(archs.len())], mode, k)
    })
}

fn stacked_residual(cfg: &PhaseConfig) -> f64 {
    let b = cfg.blocks();
    let (r, t) = (b.r.as_ref().unwrap(), b.t.as_ref().unwrap());
    r.iter()
        .zip(t)
        .map(|(a, c)| {
            let d = a.ncols();
            (a.adjoint() * a + c.adjoint() * c - CMat::identity(d, d)).norm()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_projected_and_retracted_points_are_feasible(
        (arch, mode, k) in layout_strategy(),
        seed in any::<u64>(),
        step in -3.0f64..3.0,
    ) {
        let x = make_feasible_random(arch, mode, k, seed).unwrap();
        prop_assert!(validate(&x, 1e-8).pass);
        let mut r = rng(seed ^ 0xabc);
        let layout = *x.layout();
        let raw = random_blocks(&mut r, &layout);
        let p = project_feasible(layout, &raw).unwrap();
        prop_assert!(validate(&p, 1e-8).pass);
        let xi = tangent_project(&x, &random_blocks(&mut r, &layout)).unwrap();
        let y = retract(&x, &xi, step).unwrap();
        prop_assert!(validate(&y, 1e-8).pass);
    }

    #[test]
    fn projection_is_idempotent((arch, mode, k) in layout_strategy(), seed in any::<u64>()) {
        let layout = Layout::new(arch, mode, k).unwrap();
        let raw = random_blocks(&mut rng(seed), &layout);
        let p = project_feasible(layout, &raw).unwrap();
        let pp = project_feasible(layout, p.blocks()).unwrap();
        prop_assert!(pp.blocks().add_scaled(-1.0, p.blocks()).norm() < 1e-12);
    }

    #[test]
    fn smaller_architectures_embed_in_larger_ones(
        k in prop::sample::select(vec![4usize, 6, 8, 12, 16]),
        mode in mode_strategy(),
        seed in any::<u64>(),
    ) {
        let ch = random_channels(seed, k, 3, 0.5);
        let ch = if mode == Mode::Reflective { ch.with_sides_all(Side::Reflect) } else { ch };
        let pa = PowerAlloc::uniform(3, 1.0).unwrap();
        let asg = Assignment::identity(3);
        let single = make_feasible_random(Architecture::single_connected(k), mode, k, seed).unwrap();
        let base_se = spectral_efficiency(&ch, &single, &pa, &asg).unwrap();
        for target in architectures(k) {
            let e = single.embed(target).unwrap();
            prop_assert!(validate(&e, 1e-8).pass);
            prop_assert_eq!(spectral_efficiency(&ch, &e, &pa, &asg).unwrap(), base_se);
            if target.kind() == ArchKind::GroupConnected {
                let full = e.embed(Architecture::fully_connected()).unwrap();
                prop_assert!(validate(&full, 1e-8).pass);
                prop_assert_eq!(spectral_efficiency(&ch, &full, &pa, &asg).unwrap(), base_se);
            }
        }
    }

    #[test]
    fn hybrid_validation_agrees_with_stacked_orthonormality(
        k in prop::sample::select(vec![1usize, 2, 4, 8]),
        seed in any::<u64>(),
        perturb in prop::sample::select(vec![0.0, 1e-14, 1e-4, 1e-2, 0.5]),
    ) {
        let arch = if k == 1 { Architecture::single_connected(1) } else { Architecture::fully_connected() };
        let x = make_feasible_random(arch, Mode::Hybrid, k, seed).unwrap();
        let mut b = x.blocks().clone();
        let mut r = rng(seed);
        for m in b.iter_mut() {
            *m += cmat(&mut r, m.nrows(), m.ncols()) * C64::new(perturb, 0.0);
        }
        let y = PhaseConfig::from_blocks(*x.layout(), b).unwrap();
        prop_assert_eq!(validate(&y, 1e-8).pass, stacked_residual(&y) < 1e-8);
    }

    #[test]
    fn nonzero_entry_counts((arch, _mode, k) in layout_strategy()) {
        let expect = match arch.kind() {
            ArchKind::SingleConnected => k,
            ArchKind::FullyConnected => k * k,
            ArchKind::GroupConnected => {
                let l = arch.num_groups();
                l * (k / l) * (k / l)
            }
        };
        prop_assert_eq!(arch.nonzero_entries(k).unwrap(), expect);
    }

    #[test]
    fn rate_ignores_global_phase(seed in any::<u64>(), theta in -3.2f64..3.2, mode in mode_strategy()) {
        let ch = random_channels(seed, 4, 2, 0.3);
        let ch = if mode == Mode::Reflective { ch.with_sides_all(Side::Reflect) } else { ch };
        let cfg = make_feasible_random(Architecture::fully_connected(), mode, 4, seed).unwrap();
        let pa = PowerAlloc::uniform(2, 1.0).unwrap();
        let asg = Assignment::identity(2);
        let mut b: Blocks = cfg.blocks().clone();
        b.iter_mut().for_each(|m| *m *= C64::from_polar(1.0, theta));
        let turned = PhaseConfig::from_blocks(*cfg.layout(), b).unwrap();
        let (a, c) = (spectral_efficiency(&ch, &cfg, &pa, &asg).unwrap(), spectral_efficiency(&ch, &turned, &pa, &asg).unwrap());
        prop_assert!((a - c).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn rate_grows_with_each_power(seed in any::<u64>(), user in 0usize..3, extra in 0.0f64..5.0) {
        let ch = random_channels(seed, 4, 3, 0.3);
        let cfg = make_feasible_random(Architecture::fully_connected(), Mode::Transmissive, 4, seed).unwrap();
        let gains = effective_gains(&ch, &cfg).unwrap();
        let p = vec![0.2, 0.3, 0.5];
        let mut q = p.clone();
        q[user] += extra;
        prop_assert!(se_from_gains(&gains, &q, 0.3) >= se_from_gains(&gains, &p, 0.3));
    }

    #[test]
    fn waterfill_kkt_and_budget_monotonicity(
        gains in prop::collection::vec(0.01f64..10.0, 1..6),
        budget in 0.01f64..20.0,
        sigma2 in 0.1f64..3.0,
    ) {
        let pa = waterfill(&gains, budget, sigma2, 1e-12).unwrap();
        let p = pa.powers();
        prop_assert!((pa.total() - budget).abs() <= 1e-9 * budget);
        let mu = p.iter().zip(&gains).filter(|(p, _)| **p > 0.0).map(|(p, a)| p + sigma2 / a).fold(0.0, f64::max);
        for (pn, a) in p.iter().zip(&gains) {
            if *pn > 0.0 {
                prop_assert!((pn + sigma2 / a - mu).abs() <= 1e-6 * mu);
            } else {
                prop_assert!(sigma2 / a >= mu - 1e-6 * mu);
            }
        }
        let more = waterfill(&gains, budget * 1.5, sigma2, 1e-12).unwrap();
        prop_assert!(se_from_gains(&gains, more.powers(), sigma2) >= se_from_gains(&gains, p, sigma2));
    }

    #[test]
    fn channels_are_deterministic_and_well_formed(seed in any::<u64>(), k in 1usize..20, n in 1usize..6) {
        let cfg = ScenarioConfig { num_ues: n, grid: ElementGrid::near_square(k, 0.5), ..Default::default() };
        let scn = sample_scenario(&cfg, seed).unwrap();
        let a = synth_channels(&scn, &cfg, seed).unwrap();
        let b = synth_channels(&sample_scenario(&cfg, seed).unwrap(), &cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!((a.f().norm() - 1.0).abs() < 1e-12);
        prop_assert_eq!(a.sigma2(), cfg.n0_mw_per_hz * cfg.bandwidth_hz);
        prop_assert_eq!((a.elements(), a.users()), (k, n));
    }
}
