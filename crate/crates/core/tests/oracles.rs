//! Independent oracles for the fast paths: the density engine checked
//! against the scalar BEC recursion, Monte Carlo checks of the check-node
//! rule, and quadrature refinement of the GEXIT kernel.

use approx::assert_abs_diff_eq;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use scldpc::bec::bec_de_step;
use scldpc::channel::bawgn_gexit_kernel_n;
use scldpc::de::de_step_coupled;
use scldpc::density::{bec_density, Density};
use scldpc::{ChannelParam, Constellation, CoupledSpec, GridSpec};

fn grid() -> GridSpec {
    GridSpec::new(25.0, 128).unwrap()
}

/// BEC densities form an exact subalgebra of the quantized algebra, so the
/// density engine must reproduce the scalar recursion to rounding error.
#[test]
fn density_engine_matches_scalar_bec_recursion() {
    let g = grid();
    for (spec, eps) in [
        (CoupledSpec::uncoupled(3, 6).unwrap(), 0.45),
        (CoupledSpec::line(3, 6, 4, 3).unwrap(), 0.52),
        (CoupledSpec::circular(3, 6, 9, 3, None).unwrap(), 0.42),
        (
            CoupledSpec::circular(3, 6, 9, 3, Some({
                let mut k = vec![0.0; 9];
                k[0] = 1.0;
                k[1] = 0.5;
                k
            }))
            .unwrap(),
            0.47,
        ),
    ] {
        let n = spec.positions();
        let c = bec_density(g, eps);
        let mut dens = Constellation::all_delta_zero(g, n);
        // seed the density side with one step, then track the same state
        dens = de_step_coupled(&c, &dens, &spec).unwrap();
        let mut scalar = dens.entropies();
        for _ in 0..60 {
            dens = de_step_coupled(&c, &dens, &spec).unwrap();
            scalar = bec_de_step(eps, &scalar, &spec, None).unwrap();
            for (d, s) in dens.entropies().iter().zip(&scalar) {
                assert_abs_diff_eq!(d, s, epsilon = 1e-9);
            }
        }
    }
}

fn sample_llr(d: &Density, rng: &mut ChaCha8Rng) -> f64 {
    let mut u = rng.random::<f64>() * d.total_mass();
    for (i, &m) in d.mass().iter().enumerate() {
        if u < m {
            return d.grid().center(i);
        }
        u -= m;
    }
    f64::INFINITY
}

/// Monte Carlo check of ⊠ against the tanh rule: combine samples with
/// y = 2 atanh(tanh(y1/2) tanh(y2/2)) and compare the Bhattacharyya and
/// error-probability functionals.
#[test]
fn chk_conv_matches_tanh_rule_monte_carlo() {
    let g = grid();
    let a = ChannelParam::bawgn(0.8).unwrap().density(g);
    let b = bec_density(g, 0.4);
    let exact = a.chk_conv(&b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400_000;
    let (mut bsum, mut perr) = (0.0, 0.0);
    for _ in 0..n {
        let (y1, y2) = (sample_llr(&a, &mut rng), sample_llr(&b, &mut rng));
        let y = if y1.is_infinite() {
            y2
        } else if y2.is_infinite() {
            y1
        } else {
            2.0 * ((y1 / 2.0).tanh() * (y2 / 2.0).tanh()).atanh()
        };
        bsum += (-y / 2.0).exp().min(1e9);
        if y < 0.0 {
            perr += 1.0;
        } else if y == 0.0 {
            perr += 0.5;
        }
    }
    // 3-sigma Monte Carlo tolerances
    assert_abs_diff_eq!(bsum / n as f64, exact.bhattacharyya(), epsilon = 5e-3);
    assert_abs_diff_eq!(perr / n as f64, exact.error_prob(), epsilon = 5e-3);
}

/// Same Monte Carlo check for ⊛ (LLRs add).
#[test]
fn var_conv_matches_llr_addition_monte_carlo() {
    let g = grid();
    let a = ChannelParam::bawgn(1.0).unwrap().density(g);
    let b = ChannelParam::bawgn(1.3).unwrap().density(g);
    let exact = a.var_conv(&b).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 400_000;
    let mut perr = 0.0;
    for _ in 0..n {
        let y = sample_llr(&a, &mut rng) + sample_llr(&b, &mut rng);
        if y < 0.0 {
            perr += 1.0;
        } else if y == 0.0 {
            perr += 0.5;
        }
    }
    assert_abs_diff_eq!(perr / n as f64, exact.error_prob(), epsilon = 5e-3);
}

/// The GEXIT kernel quadrature must be converged: refining the rule by 4x
/// does not move the value.
#[test]
fn gexit_kernel_quadrature_converged() {
    for sigma in [0.6, 0.9480, 1.4] {
        for y in [-8.0, -1.0, 0.0, 0.5, 3.0, 12.0] {
            let coarse = bawgn_gexit_kernel_n(sigma, y, 1200);
            let fine = bawgn_gexit_kernel_n(sigma, y, 4800);
            assert_abs_diff_eq!(coarse, fine, epsilon = 1e-9);
            assert!(coarse > 0.0);
            if y >= 0.0 {
                assert!(coarse <= 1.0 + 1e-12);
            }
        }
    }
}
