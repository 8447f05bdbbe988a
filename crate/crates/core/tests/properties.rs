//! Structural properties of the density algebra and the DE engine.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use scldpc::de::run_forward_de;
use scldpc::density::{bec_density, Density};
use scldpc::{ChannelParam, CoupledSpec, GridSpec, ScheduleSpec, StopRule};

fn grid() -> GridSpec {
    GridSpec::new(25.0, 128).unwrap()
}

/// A random symmetric density: a mixture of on-grid BSC-like atom pairs plus
/// an optional Δ_∞ component.
fn symmetric_density(g: GridSpec, picks: &[(usize, f64)], inf_w: f64) -> Density {
    let total: f64 = picks.iter().map(|p| p.1).sum::<f64>() + inf_w;
    let mut atoms = Vec::new();
    for &(k, wt) in picks {
        let m = (k % (g.bins() / 2 - 1) + 1) as f64 * g.spacing();
        let p = 1.0 / (1.0 + m.exp());
        let w = wt / total;
        atoms.push((m, w * (1.0 - p)));
        atoms.push((-m, w * p));
    }
    Density::from_atoms(g, &atoms, inf_w / total)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_ops_conserve_mass(
        picks_a in prop::collection::vec((1usize..400, 0.05f64..1.0), 1..5),
        picks_b in prop::collection::vec((1usize..400, 0.05f64..1.0), 1..5),
        inf_a in 0.0f64..0.5,
        inf_b in 0.0f64..0.5,
    ) {
        let g = grid();
        let a = symmetric_density(g, &picks_a, inf_a);
        let b = symmetric_density(g, &picks_b, inf_b);
        let v = a.var_conv(&b).unwrap();
        let c = a.chk_conv(&b).unwrap();
        prop_assert!((v.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!((c.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn functional_ordering_under_conv(
        picks_a in prop::collection::vec((1usize..400, 0.05f64..1.0), 1..4),
        picks_b in prop::collection::vec((1usize..400, 0.05f64..1.0), 1..4),
    ) {
        let g = grid();
        let a = symmetric_density(g, &picks_a, 0.0);
        let b = symmetric_density(g, &picks_b, 0.0);
        // ⊠ degrades relative to either input, ⊛ upgrades
        let c = a.chk_conv(&b).unwrap();
        prop_assert!(c.entropy() >= a.entropy().max(b.entropy()) - 1e-9);
        let v = a.var_conv(&b).unwrap();
        prop_assert!(v.entropy() <= a.entropy().min(b.entropy()) + 1e-9);
        // Pe ≤ B/2 for symmetric densities
        for d in [&a, &b, &c, &v] {
            prop_assert!(d.error_prob() <= d.bhattacharyya() / 2.0 + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-9).contains(&d.entropy()));
        }
    }

    #[test]
    fn atom_laws_exact(k in 1usize..900, inf_w in 0.0f64..0.9) {
        let g = grid();
        let a = symmetric_density(g, &[(k, 1.0)], inf_w);
        let d0 = Density::delta_zero(g);
        let di = Density::delta_inf(g);
        // identities are exact bin-for-bin
        prop_assert_eq!(a.var_conv(&d0).unwrap(), a.clone());
        prop_assert_eq!(a.chk_conv(&di).unwrap(), a.clone());
        // absorbing elements reproduce the input's total mass exactly
        let vi = a.var_conv(&di).unwrap();
        prop_assert!(vi.mass().iter().all(|&m| m == 0.0));
        prop_assert!((vi.inf_mass() - a.total_mass()).abs() < 1e-15);
        let c0 = a.chk_conv(&d0).unwrap();
        prop_assert_eq!(c0.inf_mass(), 0.0);
        prop_assert_eq!(c0.mass()[g.zero_bin()], c0.total_mass());
        prop_assert!((c0.total_mass() - a.total_mass()).abs() < 1e-15);
    }
}

/// Forward DE from the all-Δ_0 start is monotone: every functional trace is
/// non-increasing in the iteration count, at every section.
#[test]
fn forward_de_is_monotone() {
    let g = grid();
    let spec = CoupledSpec::line(3, 6, 4, 3).unwrap();
    for ch in [ChannelParam::bec(0.55).unwrap(), ChannelParam::bawgn(1.0).unwrap()] {
        let stop = StopRule { tol_b: 1e-8, max_iters: 300 };
        let (_, report) = run_forward_de(&ch.density(g), &spec, ScheduleSpec::Parallel, stop).unwrap();
        for trace in [&report.entropy_trace, &report.bhatt_trace, &report.pe_trace] {
            for pair in trace.windows(2) {
                for (prev, next) in pair[0].iter().zip(&pair[1]) {
                    assert!(next <= &(prev + 1e-12));
                }
            }
        }
    }
}

/// All schedules reach the same stable fixed point.
#[test]
fn schedules_agree_on_the_fixed_point() {
    let g = grid();
    let spec = CoupledSpec::line(3, 6, 4, 3).unwrap();
    let c = bec_density(g, 0.65);
    let stop = StopRule { tol_b: 1e-11, max_iters: 4000 };
    let reference = run_forward_de(&c, &spec, ScheduleSpec::Parallel, stop).unwrap().0;
    for sched in [ScheduleSpec::RoundRobin, ScheduleSpec::Random { seed: 3 }] {
        let x = run_forward_de(&c, &spec, sched, stop).unwrap().0;
        for (a, b) in x.entropies().iter().zip(reference.entropies()) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-6);
        }
    }
}

/// Random schedules are reproducible from the seed.
#[test]
fn random_schedule_deterministic() {
    let g = grid();
    let spec = CoupledSpec::line(3, 6, 2, 3).unwrap();
    let c = bec_density(g, 0.6);
    let stop = StopRule { tol_b: 1e-9, max_iters: 50 };
    let s = ScheduleSpec::Random { seed: 42 };
    let (x1, r1) = run_forward_de(&c, &spec, s, stop).unwrap();
    let (x2, r2) = run_forward_de(&c, &spec, s, stop).unwrap();
    assert_eq!(r1.iterations, r2.iterations);
    for (a, b) in x1.densities().iter().zip(x2.densities()) {
        assert_eq!(a, b);
    }
}
