//! EBP GEXIT curve tracing and the Maxwell construction.
//!
//! A point of the curve is a DE fixed point obtained by modified DE in which
//! the (average) entropy of the constellation is held at a target value while
//! the channel parameter is re-solved every iteration. Plotting
//! `(H(c), G(c, x))` over all such fixed points yields the EBP GEXIT curve;
//! integrating `G dH` from the trivial point (1,1) until the swept area
//! equals the design rate bounds the MAP threshold from above.

use rayon::prelude::*;

use crate::channel::{ChannelFamily, ChannelParam, GexitTable};
use crate::de::{run_forward_de, Constellation, CoupledSpec, ScheduleSpec, StopRule, Topology};
use crate::density::{bec_density, entropy_kernel, Density};
use crate::grid::GridSpec;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct EbpPoint {
    /// Target average constellation entropy.
    pub anchor: f64,
    pub param: ChannelParam,
    pub h_channel: f64,
    /// GEXIT value of the FP, averaged over sections.
    pub g_value: f64,
    /// max(final Bhattacharyya change, anchor error).
    pub residual: f64,
    /// Per-section entropies of the FP.
    pub fp_summary: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EbpCurve {
    /// Points ordered by strictly increasing anchor; includes (1,1).
    pub points: Vec<EbpPoint>,
    pub spec: CoupledSpec,
}

impl EbpCurve {
    /// CSV columns (anchor, param_value, h_channel, g_value, residual).
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("anchor,param_value,h_channel,g_value,residual\n");
        for p in &self.points {
            s.push_str(&format!(
                "{:.8},{:.8},{:.8},{:.8},{:.3e}\n",
                p.anchor, p.param.value, p.h_channel, p.g_value, p.residual
            ));
        }
        s
    }
}

const ANCHOR_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-7;

/// Solves a DE fixed point with average constellation entropy pinned to
/// `anchor`. Returns the point together with the FP constellation (for warm
/// starts and profile reports).
pub fn anchored_fp(
    family: ChannelFamily,
    spec: &CoupledSpec,
    grid: GridSpec,
    anchor: f64,
    init: Option<&Constellation>,
) -> Result<(EbpPoint, Constellation)> {
    if !(0.0..=1.0).contains(&anchor) || anchor == 0.0 {
        return Err(Error::InvalidParam(format!("anchor {anchor} outside (0, 1]")));
    }
    if anchor >= 1.0 - 1e-12 {
        return Ok(trivial_point(family, spec, grid));
    }
    // Cold starts at low anchors can land outside the basin of the intended
    // branch; walk down from a high anchor instead.
    if init.is_none() && anchor < 0.9 {
        let steps = 12;
        let hi = 0.95;
        let mut warm: Option<Constellation> = None;
        for k in 0..steps {
            let a = hi + (anchor - hi) * k as f64 / steps as f64;
            if let Ok((_, x)) = solve_anchor(family, spec, grid, a, warm.as_ref()) {
                warm = Some(x);
            }
        }
        return solve_anchor(family, spec, grid, anchor, warm.as_ref());
    }
    solve_anchor(family, spec, grid, anchor, init)
}

fn solve_anchor(
    family: ChannelFamily,
    spec: &CoupledSpec,
    grid: GridSpec,
    anchor: f64,
    init: Option<&Constellation>,
) -> Result<(EbpPoint, Constellation)> {
    match family {
        ChannelFamily::Bec => {
            let x0: Option<Vec<f64>> = init.map(|c| c.entropies());
            let (eps, x, g, residual) = anchored_scalar_bec(spec, anchor, x0.as_deref())?;
            let densities = x.iter().map(|&e| bec_density(grid, e.min(1.0))).collect();
            // near the low-anchor end the branch continues analytically past
            // ε = 1 (needed for the area theorem); h_channel carries the
            // unclamped value, param the physical one
            let point = EbpPoint {
                anchor,
                param: ChannelParam::bec(eps.min(1.0))?,
                h_channel: eps,
                g_value: g,
                residual,
                fp_summary: x,
            };
            Ok((point, Constellation::new(densities)))
        }
        ChannelFamily::Bawgn => anchored_density(spec, grid, anchor, init),
        ChannelFamily::Bsc => {
            Err(Error::InvalidParam("GEXIT tracing is not available for BSC".into()))
        }
    }
}

/// The trivial curve endpoint (1,1): perfect-noise channel, all-Δ_0 FP.
fn trivial_point(
    family: ChannelFamily,
    spec: &CoupledSpec,
    grid: GridSpec,
) -> (EbpPoint, Constellation) {
    let n = spec.positions();
    let param = match family {
        ChannelFamily::Bec => ChannelParam::bec(1.0).unwrap(),
        // entropy 1 is a limit point of the family; declare it
        ChannelFamily::Bawgn => ChannelParam::bawgn(1e9).unwrap(),
        ChannelFamily::Bsc => ChannelParam::bsc(0.5).unwrap(),
    };
    let point = EbpPoint {
        anchor: 1.0,
        param,
        h_channel: 1.0,
        g_value: 1.0,
        residual: 0.0,
        fp_summary: vec![1.0; n],
    };
    (point, Constellation::all_delta_zero(grid, n))
}

/// Per-check-position output erasures on the scalar BEC path.
fn scalar_check_msgs(x: &[f64], spec: &CoupledSpec) -> Vec<f64> {
    let n = x.len();
    let w = spec.w;
    let circular = matches!(spec.topology, Topology::Circular { .. });
    let read = |p: isize| -> f64 {
        if circular {
            x[p.rem_euclid(n as isize) as usize]
        } else if (0..n as isize).contains(&p) {
            x[p as usize]
        } else {
            0.0
        }
    };
    let n_checks = if circular { n } else { n + w - 1 };
    (0..n_checks)
        .map(|p| {
            let xbar = (0..w as isize).map(|k| read(p as isize - k)).sum::<f64>() / w as f64;
            1.0 - (1.0 - xbar).powi(spec.r as i32 - 1)
        })
        .collect()
}

/// Per-section `t_i = ((1/w) Σ_j msg_{i+j})^{l-1}` and extrinsic
/// `g_i = (...)^l`.
fn scalar_responses(x: &[f64], spec: &CoupledSpec) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let w = spec.w;
    let msgs = scalar_check_msgs(x, spec);
    let msg_at = |p: usize| -> f64 {
        if matches!(spec.topology, Topology::Circular { .. }) {
            msgs[p % n]
        } else {
            msgs[p]
        }
    };
    let mut t = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let avg = (0..w).map(|j| msg_at(i + j)).sum::<f64>() / w as f64;
        t.push(avg.powi(spec.l as i32 - 1));
        g.push(avg.powi(spec.l as i32));
    }
    (t, g)
}

fn anchored_scalar_bec(
    spec: &CoupledSpec,
    anchor: f64,
    init: Option<&[f64]>,
) -> Result<(f64, Vec<f64>, f64, f64)> {
    if matches!(spec.topology, Topology::OneSided { .. }) {
        return Err(Error::InvalidSpec(
            "EBP tracing supports line and circular topologies".into(),
        ));
    }
    let n = spec.positions();
    let free: Vec<f64> = (0..n).map(|i| 1.0 - spec.kappa_at(i)).collect();
    let free_total: f64 = free.iter().sum();
    let mut x: Vec<f64> = match init {
        Some(v) if v.len() == n => v.to_vec(),
        _ => vec![anchor; n],
    };
    let mut eps = anchor;
    let mut residual = f64::INFINITY;
    for _ in 0..20000 {
        let (t, _) = scalar_responses(&x, spec);
        let denom: f64 =
            t.iter().zip(&free).map(|(ti, fi)| fi * ti).sum::<f64>() / n as f64;
        if denom <= 0.0 {
            return Err(Error::AnchorUnattainable(anchor));
        }
        eps = anchor / denom;
        let next: Vec<f64> =
            t.iter().zip(&free).map(|(ti, fi)| fi * eps * ti).collect();
        if next.iter().any(|&v| v > 1.0 + 1e-12) {
            return Err(Error::AnchorUnattainable(anchor));
        }
        residual = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
        x = next;
        if residual < 1e-12 {
            break;
        }
    }
    let avg = x.iter().sum::<f64>() / n as f64;
    let anchor_err = (avg - anchor).abs();
    if anchor_err > ANCHOR_TOL {
        return Err(Error::AnchorUnattainable(anchor));
    }
    let (_, gb) = scalar_responses(&x, spec);
    let g = gb.iter().zip(&free).map(|(gi, fi)| fi * gi).sum::<f64>() / free_total;
    Ok((eps, x, g, residual.max(anchor_err)))
}

/// Per-section averaged check outputs `m_i = (1/w) Σ_j z_{i+j}` with
/// `z_p = ((1/w) Σ_k x_{p-k})^{⊠(r-1)}`.
fn check_terms(x: &Constellation, spec: &CoupledSpec, grid: GridSpec) -> Result<Vec<Density>> {
    let n = spec.positions();
    let w = spec.w;
    let circular = matches!(spec.topology, Topology::Circular { .. });
    let read = |p: isize| -> Density {
        if circular {
            x.get(p.rem_euclid(n as isize) as usize).clone()
        } else if (0..n as isize).contains(&p) {
            x.get(p as usize).clone()
        } else {
            Density::delta_inf(grid)
        }
    };
    let n_checks = if circular { n } else { n + w - 1 };
    let z: Vec<Density> = (0..n_checks as isize)
        .into_par_iter()
        .map(|p| {
            let win: Vec<Density> = (0..w as isize).map(|k| read(p - k)).collect();
            Density::mean(&win)?.chk_power(spec.r - 1)
        })
        .collect::<Result<_>>()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let zs: Vec<Density> = (0..w)
                .map(|j| {
                    if circular {
                        z[(i + j) % n].clone()
                    } else {
                        z[i + j].clone()
                    }
                })
                .collect();
            Density::mean(&zs)
        })
        .collect()
}

/// Entropy response of `v` to a channel density: `t[a]` is the entropy of
/// `δ_{y_a} ⊛ v`, with the same index clamping as `var_conv`, so that
/// `H(c ⊛ v) = Σ_a c[a] t[a]` exactly.
fn entropy_response(v: &Density) -> Vec<f64> {
    let grid = v.grid();
    let bins = grid.bins();
    let half = grid.zero_bin();
    let kvals: Vec<f64> = (0..bins).map(|i| entropy_kernel(grid.center(i))).collect();
    let mass = v.mass();
    let mut t = vec![0.0; bins];
    for (a, out) in t.iter_mut().enumerate() {
        let mut acc = 0.0;
        if a >= half {
            let off = a - half;
            let nn = bins - off;
            for (m, kv) in mass[..nn].iter().zip(&kvals[off..]) {
                acc += m * kv;
            }
            let spill: f64 = mass[nn..].iter().sum();
            acc += spill * kvals[bins - 1];
        } else {
            let off = half - a;
            let spill: f64 = mass[..off].iter().sum();
            acc += spill * kvals[0];
            for (m, kv) in mass[off..].iter().zip(&kvals) {
                acc += m * kv;
            }
        }
        *out = acc;
    }
    t
}

fn anchored_density(
    spec: &CoupledSpec,
    grid: GridSpec,
    anchor: f64,
    init: Option<&Constellation>,
) -> Result<(EbpPoint, Constellation)> {
    if matches!(spec.topology, Topology::OneSided { .. }) {
        return Err(Error::InvalidSpec(
            "EBP tracing supports line and circular topologies".into(),
        ));
    }
    let n = spec.positions();
    let free: Vec<f64> = (0..n).map(|i| 1.0 - spec.kappa_at(i)).collect();
    let mut x = match init {
        Some(c) if c.len() == n => c.clone(),
        _ => Constellation::all_delta_zero(grid, n),
    };
    // bisection bracket on σ, widened on demand
    let (mut sig_lo, mut sig_hi) = (1e-2, 1e4);
    let mut sigma = 1.0;
    let mut residual = f64::INFINITY;
    let mut anchor_err = f64::INFINITY;
    let mut prev_b = x.bhattacharyyas();
    for _ in 0..2000 {
        let m = check_terms(&x, spec, grid)?;
        let v: Vec<Density> =
            m.par_iter().map(|mi| mi.var_power(spec.l - 1)).collect::<Result<_>>()?;
        let t: Vec<Vec<f64>> = v.par_iter().map(entropy_response).collect();
        // average FP entropy as a function of σ
        let avg_for = |s: f64| -> f64 {
            let c = ChannelParam::bawgn(s).unwrap().density(grid);
            let cm = c.mass();
            t.iter()
                .zip(&free)
                .map(|(ti, fi)| fi * ti.iter().zip(cm).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
                / n as f64
        };
        let (mut lo, mut hi) = (sig_lo, sig_hi);
        if avg_for(hi) < anchor {
            hi = 1e9;
            if avg_for(hi) < anchor {
                return Err(Error::AnchorUnattainable(anchor));
            }
        }
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if avg_for(mid) < anchor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sigma = (lo * hi).sqrt();
        anchor_err = (avg_for(sigma) - anchor).abs();
        // keep a warm bracket around the solution
        sig_lo = sigma / 4.0;
        sig_hi = sigma * 4.0;

        let c = ChannelParam::bawgn(sigma)?.density(grid);
        let next: Vec<Density> = v
            .par_iter()
            .zip(&free)
            .map(|(vi, &fi)| {
                let d = c.var_conv(vi)?.normalized();
                if fi == 1.0 {
                    Ok(d)
                } else {
                    let m = Density::mix(&[1.0 - fi, fi], &[Density::delta_inf(grid), d])?;
                    Ok(m.normalized())
                }
            })
            .collect::<Result<_>>()?;
        x = Constellation::new(next);
        let b = x.bhattacharyyas();
        residual =
            b.iter().zip(&prev_b).map(|(a, p)| (a - p).abs()).fold(0.0_f64, f64::max);
        prev_b = b;
        if residual < RESIDUAL_TOL && anchor_err < ANCHOR_TOL {
            break;
        }
    }
    if anchor_err > 1e-6 {
        return Err(Error::AnchorUnattainable(anchor));
    }
    let param = ChannelParam::bawgn(sigma)?;
    // GEXIT of the extrinsic MAP density Φ_i = m_i^{⊛l}
    let m = check_terms(&x, spec, grid)?;
    let table = GexitTable::new(grid, sigma);
    let free_total: f64 = free.iter().sum();
    let g_num: f64 = m
        .par_iter()
        .zip(&free)
        .map(|(mi, &fi)| {
            let phi = mi.var_power(spec.l)?;
            Ok(fi * table.apply(&phi)?)
        })
        .sum::<Result<f64>>()?;
    let point = EbpPoint {
        anchor,
        param,
        h_channel: param.entropy(),
        g_value: g_num / free_total,
        residual: residual.max(anchor_err),
        fp_summary: x.entropies(),
    };
    Ok((point, x))
}

/// `n` uniformly spaced anchors in (0, 1].
pub fn default_anchors(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// Traces the curve over the given anchors (sorted ascending), warm-starting
/// each solve from its higher-anchor neighbor. Unattainable anchors become
/// gaps; the trivial point (1,1) is always included.
pub fn trace_ebp(
    family: ChannelFamily,
    spec: &CoupledSpec,
    grid: GridSpec,
    anchors: &[f64],
) -> Result<EbpCurve> {
    if anchors.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParam("anchors must be strictly increasing".into()));
    }
    if anchors.iter().any(|&a| !(0.0..=1.0).contains(&a) || a == 0.0) {
        return Err(Error::InvalidParam("anchors must lie in (0, 1]".into()));
    }
    let mut points: Vec<EbpPoint> = Vec::new();
    let mut warm: Option<Constellation> = None;
    for &a in anchors.iter().rev() {
        match anchored_fp(family, spec, grid, a, warm.as_ref()) {
            Ok((p, x)) => {
                points.push(p);
                warm = Some(x);
            }
            Err(Error::AnchorUnattainable(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    points.reverse();
    if points.last().map_or(true, |p| p.anchor < 1.0 - 1e-12) {
        points.push(trivial_point(family, spec, grid).0);
    }
    Ok(EbpCurve { points, spec: spec.clone() })
}

/// Maxwell construction: integrates `G dH` from the (1,1) end until the
/// signed swept area equals `rate`; returns the crossing channel entropy.
pub fn maxwell_bound(curve: &EbpCurve, rate: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rate) || rate == 0.0 {
        return Err(Error::InvalidParam(format!("rate {rate} outside (0, 1)")));
    }
    let pts = &curve.points;
    if pts.len() < 2 || pts.last().unwrap().h_channel < 1.0 - 1e-9 {
        return Err(Error::InvalidParam("curve does not start at the (1,1) point".into()));
    }
    let mut area = 0.0;
    for pair in pts.windows(2).rev() {
        let (next, prev) = (&pair[0], &pair[1]); // prev: higher anchor
        let dh = prev.h_channel - next.h_channel; // > 0 when sweeping left
        let inc = 0.5 * (prev.g_value + next.g_value) * dh;
        if inc > 0.0 && area + inc >= rate {
            let tau = (rate - area) / inc;
            return Ok(prev.h_channel + tau * (next.h_channel - prev.h_channel));
        }
        area += inc;
    }
    Err(Error::AreaShortfall { rate, reached: area })
}

/// Total signed `∫ G dH` over the whole curve, from (1,1) to the low end.
pub fn curve_area(curve: &EbpCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|pair| 0.5 * (pair[0].g_value + pair[1].g_value) * (pair[1].h_channel - pair[0].h_channel))
        .sum()
}

#[derive(Clone, Debug)]
pub struct FpProfile {
    pub entropies: Vec<f64>,
    /// Entropy non-decreasing from each boundary toward the peak.
    pub unimodal: bool,
    pub middle_entropy: f64,
    /// |middle entropy - entropy of the uncoupled stable FP at the same
    /// channel parameter|.
    pub uncoupled_gap: f64,
}

impl FpProfile {
    /// CSV columns (position, entropy).
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("position,entropy\n");
        for (i, e) in self.entropies.iter().enumerate() {
            s.push_str(&format!("{i},{e:.10}\n"));
        }
        s
    }
}

/// Shape report for an anchored FP: unimodality of the section-entropy
/// profile and comparison of the middle section against the uncoupled stable
/// FP at the same channel parameter.
pub fn fp_profile_report(
    point: &EbpPoint,
    spec: &CoupledSpec,
    grid: GridSpec,
) -> Result<FpProfile> {
    let e = &point.fp_summary;
    let n = e.len();
    let peak = e
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let tol = 1e-9;
    let rising = e[..=peak].windows(2).all(|p| p[1] >= p[0] - tol);
    let falling = e[peak..].windows(2).all(|p| p[1] <= p[0] + tol);
    let middle_entropy = e[n / 2];

    let unc = CoupledSpec::uncoupled(spec.l, spec.r)?;
    let c = point.param.density(grid);
    let (xu, _) = run_forward_de(&c, &unc, ScheduleSpec::Parallel, StopRule::default())?;
    let uncoupled_gap = (middle_entropy - xu.get(0).entropy()).abs();
    Ok(FpProfile { entropies: e.clone(), unimodal: rising && falling, middle_entropy, uncoupled_gap })
}
