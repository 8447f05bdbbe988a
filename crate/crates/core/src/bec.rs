//! Scalar density evolution on the BEC.
//!
//! On the erasure channel every message density is `x Δ_0 + (1-x) Δ_∞`, so DE
//! reduces to a recursion on the per-position erasure probabilities:
//! `x_i ← (1-κ_i) ε ((1/w) Σ_j [1 - Σ_d ρ_{p,d} (1-x̄_{i+j})^{d-1}])^{l-1}`
//! with `x̄_p = (1/w) Σ_k x_{p-k}`. This path runs in milliseconds and backs
//! the rate-loss mitigation experiments.

use crate::de::{CoupledSpec, StopReason, StopRule, Topology};
use crate::rates::design_rate_circular;
use crate::{Error, Result};

/// Erasure probability below which a section counts as decoded
/// (`Pe = x/2 < 1e-10`).
const DECODED_X: f64 = 2e-10;

/// Per-check-position edge-degree distributions `ρ_{p,d}`; the default is a
/// point mass at `d = r` everywhere.
#[derive(Clone, Debug)]
pub struct CheckProfile {
    /// `rho[p]` lists `(degree, fraction)` pairs for check position p.
    pub rho: Vec<Vec<(f64, f64)>>,
}

impl CheckProfile {
    pub fn validate(&self) -> Result<()> {
        for (p, dist) in self.rho.iter().enumerate() {
            if dist.is_empty() {
                return Err(Error::BadProfile(format!("position {p} has no entries")));
            }
            let sum: f64 = dist.iter().map(|(_, f)| f).sum();
            if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&(d, f)| d < 1.0 || f < 0.0) {
                return Err(Error::BadProfile(format!("position {p}: bad degrees or fractions")));
            }
        }
        Ok(())
    }
}

/// One parallel round of the scalar recursion.
pub fn bec_de_step(
    eps: f64,
    x: &[f64],
    spec: &CoupledSpec,
    profile: Option<&CheckProfile>,
) -> Result<Vec<f64>> {
    let n = spec.positions();
    if x.len() != n {
        return Err(Error::InvalidSpec(format!("state length {} != positions {n}", x.len())));
    }
    if let Some(p) = profile {
        p.validate()?;
    }
    match spec.topology {
        Topology::Line => Ok(step_window(eps, x, spec, profile, false)),
        Topology::Circular { .. } => Ok(step_window(eps, x, spec, profile, true)),
        Topology::OneSided { k, alpha } => {
            if profile.is_some() {
                return Err(Error::BadProfile(
                    "one-sided topology carries its own boundary profile".into(),
                ));
            }
            if alpha > 0.0 && spec.w != 3 {
                return Err(Error::InvalidSpec(
                    "check merging is defined for w = 3 only".into(),
                ));
            }
            Ok(step_one_sided(eps, x, spec.l, spec.r, k, spec.w, alpha))
        }
    }
}

fn step_window(
    eps: f64,
    x: &[f64],
    spec: &CoupledSpec,
    profile: Option<&CheckProfile>,
    circular: bool,
) -> Vec<f64> {
    let n = x.len();
    let w = spec.w;
    let r = spec.r;
    let read = |p: isize| -> f64 {
        if circular {
            x[p.rem_euclid(n as isize) as usize]
        } else if (0..n as isize).contains(&p) {
            x[p as usize]
        } else {
            0.0
        }
    };
    // check-output erasure per check position
    let n_checks = if circular { n } else { n + w - 1 };
    let mut msg = vec![0.0; n_checks];
    for (p, m) in msg.iter_mut().enumerate() {
        let xbar = (0..w as isize).map(|k| read(p as isize - k)).sum::<f64>() / w as f64;
        *m = match profile.and_then(|pr| pr.rho.get(p)) {
            Some(dist) => {
                dist.iter().map(|&(d, f)| f * (1.0 - (1.0 - xbar).powf(d - 1.0))).sum()
            }
            None => 1.0 - (1.0 - xbar).powi(r as i32 - 1),
        };
    }
    let msg_at = |p: usize| -> f64 {
        if circular {
            msg[p % n]
        } else {
            msg[p]
        }
    };
    (0..n)
        .map(|i| {
            let avg = (0..w).map(|j| msg_at(i + j)).sum::<f64>() / w as f64;
            (1.0 - spec.kappa_at(i)) * eps * avg.powi(spec.l as i32 - 1)
        })
        .collect()
}

/// One-sided chain: variables at 0..K-1, terminal check position K absorbing
/// all overflow sockets at full degree r, truncated checks on the left, and a
/// fraction α of the position-0 checks merged into position 1 (w = 3).
fn step_one_sided(eps: f64, x: &[f64], l: u32, r: u32, k: usize, w: usize, alpha: f64) -> Vec<f64> {
    let rw = r as f64 / w as f64; // sockets per visible position
    let re = r as i32 - 1;
    // terminal check: position K-t supplies w-t socket shares
    let (mut num, mut den) = (0.0, 0.0);
    for t in 1..w.min(k + 1) {
        num += (w - t) as f64 * x[k - t];
        den += (w - t) as f64;
    }
    let xbar_terminal = if den > 0.0 { num / den } else { 0.0 };
    let msg_terminal = 1.0 - (1.0 - xbar_terminal).powi(re);

    // message from check position p to a socket at variable position s
    let msg = |s: usize, p: usize| -> f64 {
        if p >= k {
            return msg_terminal;
        }
        if p >= w - 1 {
            let xbar = (0..w).map(|j| x[p - j]).sum::<f64>() / w as f64;
            return 1.0 - (1.0 - xbar).powi(re);
        }
        // truncated check: visible positions 0..=p, product form
        let unmerged = |extra0: f64| -> f64 {
            let mut prod = 1.0;
            for (q, &xq) in x.iter().enumerate().take(p + 1) {
                let mut e = rw + if q == 0 { extra0 } else { 0.0 };
                if q == s {
                    e -= 1.0;
                }
                prod *= (1.0 - xq).powf(e);
            }
            1.0 - prod
        };
        if alpha == 0.0 || p > 1 {
            return unmerged(0.0);
        }
        // w = 3 merging: a merged check sits at position 1 with 2·(r/w)
        // sockets at position 0 and r/w at position 1
        let merged = {
            let e0 = 2.0 * rw - if s == 0 { 1.0 } else { 0.0 };
            let e1 = rw - if s == 1 { 1.0 } else { 0.0 };
            1.0 - (1.0 - x[0]).powf(e0) * (1.0 - x[1]).powf(e1)
        };
        (1.0 - alpha) * unmerged(0.0) + alpha * merged
    };

    (0..k)
        .map(|i| {
            let avg = (0..w).map(|j| msg(i, (i + j).min(k))).sum::<f64>() / w as f64;
            eps * avg.powi(l as i32 - 1)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BecReport {
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl StopRule {
    /// Default stopping rule for the scalar path. The iteration budget must
    /// cover a decoding wave crossing a few hundred sections near threshold.
    pub fn scalar() -> StopRule {
        StopRule { tol_b: 1e-9, max_iters: 200_000 }
    }
}

/// Forward scalar DE from the all-erased start.
pub fn bec_run_forward(
    eps: f64,
    spec: &CoupledSpec,
    profile: Option<&CheckProfile>,
    stop: StopRule,
) -> Result<(Vec<f64>, BecReport)> {
    let n = spec.positions();
    let mut x = vec![eps; n];
    let mut iterations = 0;
    let stop_reason = loop {
        if x.iter().all(|&v| v < DECODED_X) {
            break StopReason::ToZero;
        }
        if iterations >= stop.max_iters {
            break StopReason::MaxIters;
        }
        let next = bec_de_step(eps, &x, spec, profile)?;
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
        x = next;
        iterations += 1;
        if delta < stop.tol_b {
            if x.iter().all(|&v| v < DECODED_X) {
                break StopReason::ToZero;
            }
            break StopReason::StalledNonzero;
        }
    };
    Ok((x, BecReport { iterations, stop_reason }))
}

/// BP threshold on the scalar path, bisection in ε to width `tol`.
pub fn bec_bp_threshold(
    spec: &CoupledSpec,
    profile: Option<&CheckProfile>,
    tol: f64,
) -> Result<f64> {
    let decodes = |eps: f64| -> Result<bool> {
        let (_, report) = bec_run_forward(eps, spec, profile, StopRule::scalar())?;
        Ok(report.stop_reason == StopReason::ToZero)
    };
    let mut lo = 0.05;
    let mut hi = 0.95;
    if !decodes(lo)? {
        return Err(Error::NoBracket(format!("DE does not decode at eps = {lo}")));
    }
    if decodes(hi)? {
        return Err(Error::NoBracket(format!("DE still decodes at eps = {hi}")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if decodes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the κ/ε self-consistency for a boundary pattern of effective
/// erasure probabilities: each `(position, δ)` pins `κ_pos = 1 - δ/ε^BP`,
/// and ε^BP in turn depends on κ̲. Fixed-point iteration to |Δε| ≤ 1e-5.
pub fn solve_delta_pattern(
    l: u32,
    r: u32,
    k: usize,
    w: usize,
    pattern: &[(usize, f64)],
) -> Result<(f64, Vec<f64>)> {
    let mut eps = 0.488;
    for _ in 0..100 {
        let mut kappa = vec![0.0; k];
        for &(pos, delta) in pattern {
            if pos >= k {
                return Err(Error::InvalidSpec(format!("pattern position {pos} >= K={k}")));
            }
            kappa[pos] = (1.0 - delta / eps).clamp(0.0, 1.0);
        }
        let spec = CoupledSpec::circular(l, r, k, w, Some(kappa.clone()))?;
        let next = bec_bp_threshold(&spec, None, 1e-6)?;
        if (next - eps).abs() <= 1e-5 {
            return Ok((next, kappa));
        }
        eps = next;
    }
    Err(Error::NoBracket(format!("delta self-consistency did not settle (last eps = {eps})")))
}

#[derive(Clone, Copy, Debug)]
pub struct SweepPoint {
    pub delta: f64,
    pub eps_bp: f64,
    pub kappa: f64,
    pub rate: f64,
    pub converged: bool,
}

/// Threshold-versus-δ sweep with the uniform contiguous boundary (κ on the
/// w-1 positions 0..w-2).
pub fn rateloss_sweep(l: u32, r: u32, k: usize, w: usize, deltas: &[f64]) -> Vec<SweepPoint> {
    deltas
        .iter()
        .map(|&delta| {
            let pattern: Vec<(usize, f64)> = (0..w - 1).map(|p| (p, delta)).collect();
            match solve_delta_pattern(l, r, k, w, &pattern) {
                Ok((eps, kappa)) => {
                    let rate = design_rate_circular(l, r, k, w, &kappa).unwrap_or(f64::NAN);
                    SweepPoint { delta, eps_bp: eps, kappa: kappa[0], rate, converged: true }
                }
                Err(_) => SweepPoint {
                    delta,
                    eps_bp: f64::NAN,
                    kappa: f64::NAN,
                    rate: f64::NAN,
                    converged: false,
                },
            }
        })
        .collect()
}

/// CSV export for sweep results.
pub fn sweep_csv(points: &[SweepPoint], w: usize, k: usize) -> String {
    let mut s = String::from("delta,epsilon_bp,kappa,design_rate,w,K\n");
    for p in points {
        s.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{w},{k}\n",
            p.delta, p.eps_bp, p.kappa, p.rate
        ));
    }
    s
}

/// Largest δ for which the threshold stays within 5e-5 of its δ = 0 value,
/// located by bisection to width `delta_tol`. The flatness tolerance sits
/// between the plateau noise (~1e-5, from the self-consistency and bisection
/// tolerances) and the first measurable departure of the curve.
pub fn find_breakpoint(l: u32, r: u32, k: usize, w: usize, delta_tol: f64) -> Result<f64> {
    let mut kappa = vec![0.0; k];
    for ki in kappa.iter_mut().take(w - 1) {
        *ki = 1.0;
    }
    let full = CoupledSpec::circular(l, r, k, w, Some(kappa))?;
    let eps_max = bec_bp_threshold(&full, None, 1e-6)?;
    let holds = |delta: f64| -> Result<bool> {
        let pattern: Vec<(usize, f64)> = (0..w - 1).map(|p| (p, delta)).collect();
        let (eps, _) = solve_delta_pattern(l, r, k, w, &pattern)?;
        Ok(eps >= eps_max - 5e-5)
    };
    let mut lo = 0.05;
    let mut hi = 0.45;
    if !holds(lo)? {
        return Err(Error::NoBracket(format!("threshold already degraded at delta = {lo}")));
    }
    if holds(hi)? {
        return Err(Error::NoBracket(format!("threshold still flat at delta = {hi}")));
    }
    while hi - lo > delta_tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
