//! Closed-form design rates for the coupled ensemble variants.

use crate::de::{CoupledSpec, Topology};
use crate::{Error, Result};

/// Design rate of the line ensemble (l, r, L, w):
/// `(1 - l/r) - (l/r) (w + 1 - 2 Σ_{i=0}^{w} (i/w)^r) / (2L + 1)`.
pub fn design_rate_coupled(l: u32, r: u32, big_l: usize, w: usize) -> Result<f64> {
    if w == 0 || (w > 1 && w > 2 * big_l) {
        return Err(Error::InvalidSpec(format!("need 1 <= w <= 2L, got w={w}, L={big_l}")));
    }
    let lr = l as f64 / r as f64;
    Ok((1.0 - lr) - lr * line_loss_numerator(r, w) / (2.0 * big_l as f64 + 1.0))
}

fn line_loss_numerator(r: u32, w: usize) -> f64 {
    let s: f64 = (0..=w).map(|i| (i as f64 / w as f64).powi(r as i32)).sum();
    w as f64 + 1.0 - 2.0 * s
}

/// Design rate of the circular ensemble (l, r, K, w, κ̲):
/// `1 - l/r - (l/r) Σ_k [κ_k - ((1/w) Σ_j κ_{k-j})^r] / Σ_k (1 - κ_k)`,
/// indices modulo K.
pub fn design_rate_circular(l: u32, r: u32, k: usize, w: usize, kappa: &[f64]) -> Result<f64> {
    if kappa.len() != k || k < w || w == 0 {
        return Err(Error::InvalidSpec(format!(
            "need kappa length K={k} and 1 <= w <= K, got {} and w={w}",
            kappa.len()
        )));
    }
    let free: f64 = kappa.iter().map(|x| 1.0 - x).sum();
    if free <= 0.0 {
        return Err(Error::InvalidSpec("kappa is all-1: no free variables".into()));
    }
    let lr = l as f64 / r as f64;
    let mut num = 0.0;
    for p in 0..k {
        let avg: f64 =
            (0..w).map(|j| kappa[(p + k - j) % k]).sum::<f64>() / w as f64;
        num += kappa[p] - avg.powi(r as i32);
    }
    Ok(1.0 - lr - lr * num / free)
}

/// Design rate of the one-sided ensemble with merge fraction α:
/// right boundary terminated without loss, so the truncation loss is half the
/// line value at matched length, and merging removes α of the position-0
/// checks: `(1 - l/r) - (l/r) (w + 1 - 2 Σ (i/w)^r) / (2K) + α (l/r) / K`.
pub fn design_rate_one_sided(l: u32, r: u32, k: usize, w: usize, alpha: f64) -> Result<f64> {
    if w == 0 || k < w {
        return Err(Error::InvalidSpec(format!("need 1 <= w <= K, got w={w}, K={k}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidSpec(format!("merge fraction {alpha} outside [0,1]")));
    }
    let lr = l as f64 / r as f64;
    Ok((1.0 - lr) - lr * line_loss_numerator(r, w) / (2.0 * k as f64) + alpha * lr / k as f64)
}

/// Dispatch on the ensemble topology.
pub fn design_rate(spec: &CoupledSpec) -> Result<f64> {
    match spec.topology {
        Topology::Line => design_rate_coupled(spec.l, spec.r, spec.big_l, spec.w),
        Topology::Circular { k } => {
            let zeros;
            let kappa = match spec.kappa {
                Some(ref kv) => kv.as_slice(),
                None => {
                    zeros = vec![0.0; k];
                    &zeros
                }
            };
            design_rate_circular(spec.l, spec.r, k, spec.w, kappa)
        }
        Topology::OneSided { k, alpha } => design_rate_one_sided(spec.l, spec.r, k, spec.w, alpha),
    }
}
