//! Density evolution for uncoupled and spatially coupled ensembles.
//!
//! The coupled update at position `i` is
//! `x_i = c ⊛ ((1/w) Σ_j ((1/w) Σ_k x_{i+j-k})^{⊠(r-1)})^{⊛(l-1)}`,
//! with positions outside the chain read as Δ_+∞ on the line topology and
//! index arithmetic modulo K on the circle. A known fraction κ_i replaces
//! the update by `κ_i Δ_∞ + (1-κ_i) (c ⊛ g(...))`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{ChannelFamily, ChannelParam};
use crate::density::Density;
use crate::grid::GridSpec;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    /// Positions `[-L, L]`, boundary reads are Δ_+∞.
    Line,
    /// Positions `[0, K-1]`, indices modulo K, optional known fractions κ.
    Circular { k: usize },
    /// Positions `[0, K-1]`; right boundary terminated without rate loss,
    /// left boundary truncated, with a fraction α of position-0 checks
    /// merged into position 1. Scalar BEC path only.
    OneSided { k: usize, alpha: f64 },
}

/// Structural parameters of a (coupled) regular ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSpec {
    pub l: u32,
    pub r: u32,
    /// Half-length L of the line topology; ignored for circular/one-sided.
    pub big_l: usize,
    pub w: usize,
    pub topology: Topology,
    /// Known fraction per position (circular topology).
    pub kappa: Option<Vec<f64>>,
}

impl CoupledSpec {
    /// The plain (l, r)-regular ensemble as a single-position chain.
    pub fn uncoupled(l: u32, r: u32) -> Result<Self> {
        Self::line(l, r, 0, 1)
    }

    pub fn line(l: u32, r: u32, big_l: usize, w: usize) -> Result<Self> {
        check_degrees(l, r)?;
        if w == 0 || (w > 1 && big_l == 0) {
            return Err(Error::InvalidSpec(format!("need w = 1 when L = 0, got w={w}, L={big_l}")));
        }
        Ok(CoupledSpec { l, r, big_l, w, topology: Topology::Line, kappa: None })
    }

    pub fn circular(l: u32, r: u32, k: usize, w: usize, kappa: Option<Vec<f64>>) -> Result<Self> {
        check_degrees(l, r)?;
        if w == 0 || k < w {
            return Err(Error::InvalidSpec(format!("need 1 <= w <= K, got w={w}, K={k}")));
        }
        if let Some(ref kv) = kappa {
            if kv.len() != k {
                return Err(Error::InvalidSpec(format!("kappa length {} != K={k}", kv.len())));
            }
            if kv.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidSpec("kappa entries must lie in [0,1]".into()));
            }
        }
        Ok(CoupledSpec { l, r, big_l: 0, w, topology: Topology::Circular { k }, kappa })
    }

    pub fn one_sided(l: u32, r: u32, k: usize, w: usize, alpha: f64) -> Result<Self> {
        check_degrees(l, r)?;
        if w == 0 || k < w {
            return Err(Error::InvalidSpec(format!("need 1 <= w <= K, got w={w}, K={k}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidSpec(format!("merge fraction {alpha} outside [0,1]")));
        }
        Ok(CoupledSpec { l, r, big_l: 0, w, topology: Topology::OneSided { k, alpha }, kappa: None })
    }

    /// Number of chain positions.
    pub fn positions(&self) -> usize {
        match self.topology {
            Topology::Line => 2 * self.big_l + 1,
            Topology::Circular { k } | Topology::OneSided { k, .. } => k,
        }
    }

    pub fn kappa_at(&self, i: usize) -> f64 {
        self.kappa.as_ref().map_or(0.0, |kv| kv[i])
    }
}

fn check_degrees(l: u32, r: u32) -> Result<()> {
    if l < 2 || r <= l {
        return Err(Error::InvalidSpec(format!("need 2 <= l < r, got l={l}, r={r}")));
    }
    Ok(())
}

/// Position-indexed vector of message densities.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    densities: Vec<Density>,
}

impl Constellation {
    pub fn new(densities: Vec<Density>) -> Self {
        Constellation { densities }
    }

    pub fn all_delta_zero(grid: GridSpec, n: usize) -> Self {
        Constellation { densities: vec![Density::delta_zero(grid); n] }
    }

    pub fn all_delta_inf(grid: GridSpec, n: usize) -> Self {
        Constellation { densities: vec![Density::delta_inf(grid); n] }
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }

    pub fn get(&self, i: usize) -> &Density {
        &self.densities[i]
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.densities.iter().map(Density::entropy).collect()
    }

    pub fn bhattacharyyas(&self) -> Vec<f64> {
        self.densities.iter().map(Density::bhattacharyya).collect()
    }

    pub fn error_probs(&self) -> Vec<f64> {
        self.densities.iter().map(Density::error_prob).collect()
    }

    pub fn avg_entropy(&self) -> f64 {
        self.entropies().iter().sum::<f64>() / self.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleSpec {
    /// All sections updated simultaneously each iteration.
    Parallel,
    /// Sections updated one at a time in index order.
    RoundRobin,
    /// Sections updated one at a time, a fresh seeded permutation per sweep,
    /// so every section is touched once per `positions()` steps.
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ToZero,
    StalledNonzero,
    MaxIters,
}

#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    /// Stop when the max per-section Bhattacharyya change drops below this.
    pub tol_b: f64,
    pub max_iters: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { tol_b: 1e-9, max_iters: 2000 }
    }
}

/// Error probability below which a section counts as decoded.
pub const DECODED_PE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DeReport {
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Per-sweep, per-section traces.
    pub entropy_trace: Vec<Vec<f64>>,
    pub bhatt_trace: Vec<Vec<f64>>,
    pub pe_trace: Vec<Vec<f64>>,
}

impl DeReport {
    /// CSV with columns (iteration, position, entropy, bhattacharyya,
    /// error_prob), fixed precision.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("iteration,position,entropy,bhattacharyya,error_prob\n");
        for (it, ((he, hb), hp)) in
            self.entropy_trace.iter().zip(&self.bhatt_trace).zip(&self.pe_trace).enumerate()
        {
            for (pos, ((e, b), p)) in he.iter().zip(hb).zip(hp).enumerate() {
                s.push_str(&format!("{it},{pos},{e:.12},{b:.12},{p:.12}\n"));
            }
        }
        s
    }
}

/// One round of uncoupled DE: `c ⊛ (x^{⊠(r-1)})^{⊛(l-1)}`.
pub fn de_step_uncoupled(c: &Density, x: &Density, l: u32, r: u32) -> Result<Density> {
    Ok(c.var_conv(&x.chk_power(r - 1)?.var_power(l - 1)?)?.normalized())
}

/// The map `g` of one coupled position, without the channel convolution.
/// `window` holds `x_{i-w+1}, ..., x_{i+w-1}` (length `2w - 1`).
pub fn g_map(window: &[Density], l: u32, r: u32, w: usize) -> Result<Density> {
    if window.len() != 2 * w - 1 {
        return Err(Error::InvalidSpec(format!(
            "window length {} != 2w-1 = {}",
            window.len(),
            2 * w - 1
        )));
    }
    let mut z = Vec::with_capacity(w);
    for j in 0..w {
        let avg = Density::mean(&window[j..j + w])?;
        z.push(avg.chk_power(r - 1)?);
    }
    Density::mean(&z)?.var_power(l - 1)
}

/// One parallel round of coupled DE, Δ_+∞ boundary on the line and modular
/// indices on the circle. The per-check-position inner term is shared across
/// sections.
pub fn de_step_coupled(c: &Density, x: &Constellation, spec: &CoupledSpec) -> Result<Constellation> {
    let n = spec.positions();
    if x.len() != n {
        return Err(Error::InvalidSpec(format!(
            "constellation length {} does not match spec positions {n}",
            x.len()
        )));
    }
    let grid = c.grid();
    let w = spec.w;
    let circular = match spec.topology {
        Topology::Line => false,
        Topology::Circular { .. } => true,
        Topology::OneSided { .. } => {
            return Err(Error::InvalidSpec(
                "one-sided topology is supported on the scalar BEC path only".into(),
            ))
        }
    };

    let read = |p: isize| -> Density {
        if circular {
            let k = n as isize;
            x.get(p.rem_euclid(k) as usize).clone()
        } else if (0..n as isize).contains(&p) {
            x.get(p as usize).clone()
        } else {
            Density::delta_inf(grid)
        }
    };

    // z_p = ((1/w) Σ_k x_{p-k})^{⊠(r-1)} at check position p
    let p_range: Vec<isize> = if circular {
        (0..n as isize).collect()
    } else {
        (0..(n + w - 1) as isize).collect()
    };
    let z: Vec<Density> = p_range
        .par_iter()
        .map(|&p| {
            let win: Vec<Density> = (0..w as isize).map(|k| read(p - k)).collect();
            Density::mean(&win)?.chk_power(spec.r - 1)
        })
        .collect::<Result<_>>()?;
    let z_at = |p: isize| -> Density {
        if circular {
            z[p.rem_euclid(n as isize) as usize].clone()
        } else if (0..z.len() as isize).contains(&p) {
            z[p as usize].clone()
        } else {
            Density::delta_inf(grid)
        }
    };

    let out: Vec<Density> = (0..n as isize)
        .into_par_iter()
        .map(|i| {
            let zs: Vec<Density> = (0..w as isize).map(|j| z_at(i + j)).collect();
            let v = Density::mean(&zs)?.var_power(spec.l - 1)?;
            let free = c.var_conv(&v)?.normalized();
            let kappa = spec.kappa_at(i as usize);
            if kappa == 0.0 {
                Ok(free)
            } else {
                let m = Density::mix(&[kappa, 1.0 - kappa], &[Density::delta_inf(grid), free])?;
                Ok(m.normalized())
            }
        })
        .collect::<Result<_>>()?;
    Ok(Constellation::new(out))
}

/// Recomputes a single section from the current constellation.
fn update_section(c: &Density, x: &Constellation, spec: &CoupledSpec, i: usize) -> Result<Density> {
    let n = spec.positions();
    let grid = c.grid();
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
    let w = spec.w as isize;
    let window: Vec<Density> = ((i as isize - w + 1)..=(i as isize + w - 1)).map(read).collect();
    let free = c.var_conv(&g_map(&window, spec.l, spec.r, spec.w)?)?.normalized();
    let kappa = spec.kappa_at(i);
    if kappa == 0.0 {
        Ok(free)
    } else {
        let m = Density::mix(&[kappa, 1.0 - kappa], &[Density::delta_inf(grid), free])?;
        Ok(m.normalized())
    }
}

/// Forward DE from the all-Δ_0 start under the given schedule.
pub fn run_forward_de(
    c: &Density,
    spec: &CoupledSpec,
    schedule: ScheduleSpec,
    stop: StopRule,
) -> Result<(Constellation, DeReport)> {
    let n = spec.positions();
    let mut x = Constellation::all_delta_zero(c.grid(), n);
    let mut rng = match schedule {
        ScheduleSpec::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut entropy_trace = vec![x.entropies()];
    let mut bhatt_trace = vec![x.bhattacharyyas()];
    let mut pe_trace = vec![x.error_probs()];

    let mut iterations = 0;
    let stop_reason = loop {
        if pe_trace.last().unwrap().iter().all(|&p| p < DECODED_PE) {
            break StopReason::ToZero;
        }
        if iterations >= stop.max_iters {
            break StopReason::MaxIters;
        }
        match schedule {
            ScheduleSpec::Parallel => {
                x = de_step_coupled(c, &x, spec)?;
            }
            ScheduleSpec::RoundRobin => {
                for i in 0..n {
                    let d = update_section(c, &x, spec, i)?;
                    x.densities[i] = d;
                }
            }
            ScheduleSpec::Random { .. } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(rng.as_mut().unwrap());
                for i in order {
                    let d = update_section(c, &x, spec, i)?;
                    x.densities[i] = d;
                }
            }
        }
        iterations += 1;
        let b = x.bhattacharyyas();
        let delta = b
            .iter()
            .zip(bhatt_trace.last().unwrap())
            .map(|(new, old)| (new - old).abs())
            .fold(0.0_f64, f64::max);
        entropy_trace.push(x.entropies());
        pe_trace.push(x.error_probs());
        bhatt_trace.push(b);
        if delta < stop.tol_b {
            if pe_trace.last().unwrap().iter().all(|&p| p < DECODED_PE) {
                break StopReason::ToZero;
            }
            break StopReason::StalledNonzero;
        }
    };

    let report = DeReport {
        iterations,
        converged: stop_reason != StopReason::MaxIters,
        stop_reason,
        entropy_trace,
        bhatt_trace,
        pe_trace,
    };
    Ok((x, report))
}

/// BP threshold of a monotone channel family by bisection on channel entropy.
///
/// Returns the parameter at the midpoint of the final bracket; width below
/// `tol_entropy` in entropy.
pub fn bp_threshold(
    family: ChannelFamily,
    spec: &CoupledSpec,
    grid: GridSpec,
    tol_entropy: f64,
    stop: StopRule,
) -> Result<ChannelParam> {
    let decodes = |h: f64| -> Result<bool> {
        let ch = ChannelParam::from_entropy(family, h)?;
        let (_, report) = run_forward_de(&ch.density(grid), spec, ScheduleSpec::Parallel, stop)?;
        Ok(report.stop_reason == StopReason::ToZero)
    };
    let mut lo = 0.02;
    let mut hi = 0.98;
    if !decodes(lo)? {
        return Err(Error::NoBracket(format!("DE does not decode at entropy {lo}")));
    }
    if decodes(hi)? {
        return Err(Error::NoBracket(format!("DE still decodes at entropy {hi}")));
    }
    while hi - lo > tol_entropy {
        let mid = 0.5 * (lo + hi);
        if decodes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ChannelParam::from_entropy(family, 0.5 * (lo + hi))
}
