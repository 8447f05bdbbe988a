//! Quantized symmetric L-densities and the two convolution algebras.
//!
//! A [`Density`] stores probability mass at the centers of a uniform LLR grid
//! plus an explicit atom at +infinity. The variable-side operator `⊛` is plain
//! convolution of LLRs (addition of independent messages); the check-side
//! operator `⊠` lifts the two-input rule `y = 2 atanh(tanh(y1/2) tanh(y2/2))`
//! to mass distributions, re-quantizing every output onto the grid with a
//! two-bin split that preserves mass and mean.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::GridSpec;
use crate::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Routing of variable-side convolution mass that lands beyond `+llr_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverflowPolicy {
    /// Keep overflow in the top finite bin (default); `inf_mass` stays an
    /// exact bookkeeping of true atoms at infinity.
    SaturateTop,
    /// Route positive overflow into the atom at +infinity.
    RouteToInf,
}

/// A quantized symmetric L-density: finite mass per bin plus an atom at +∞.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: GridSpec,
    mass: Vec<f64>,
    inf_mass: f64,
}

impl Density {
    /// Builds a density from raw parts, checking non-negativity and unit mass.
    pub fn from_parts(grid: GridSpec, mass: Vec<f64>, inf_mass: f64) -> Result<Self> {
        if mass.len() != grid.bins() {
            return Err(Error::InvalidGrid(format!(
                "mass vector length {} does not match bins {}",
                mass.len(),
                grid.bins()
            )));
        }
        let d = Density { grid, mass, inf_mass };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inf_mass < 0.0 || self.mass.iter().any(|&m| m < 0.0) {
            return Err(Error::InvalidGrid("negative mass entry".into()));
        }
        let t = self.total_mass();
        if (t - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!("total mass {t} deviates from 1")));
        }
        Ok(())
    }

    /// The delta function at LLR 0 (pure erasure).
    pub fn delta_zero(grid: GridSpec) -> Self {
        let mut mass = vec![0.0; grid.bins()];
        mass[grid.zero_bin()] = 1.0;
        Density { grid, mass, inf_mass: 0.0 }
    }

    /// The delta function at +infinity (perfect knowledge).
    pub fn delta_inf(grid: GridSpec) -> Self {
        Density { grid, mass: vec![0.0; grid.bins()], inf_mass: 1.0 }
    }

    /// Places finite atoms on the grid, splitting each across the two nearest
    /// bin centers so that mass and mean are preserved.
    pub fn from_atoms(grid: GridSpec, atoms: &[(f64, f64)], inf_mass: f64) -> Self {
        let mut mass = vec![0.0; grid.bins()];
        let spacing = grid.spacing();
        let half = grid.zero_bin() as f64;
        let top = grid.bins() - 1;
        for &(llr, m) in atoms {
            let pos = llr / spacing + half;
            if pos <= 0.0 {
                mass[0] += m;
            } else if pos >= top as f64 {
                mass[top] += m;
            } else {
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                mass[lo] += m * (1.0 - frac);
                mass[lo + 1] += m * frac;
            }
        }
        Density { grid, mass, inf_mass }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn inf_mass(&self) -> f64 {
        self.inf_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.inf_mass
    }

    fn check_compatible(&self, other: &Density) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.describe(), other.grid.describe()));
        }
        Ok(())
    }

    /// Entropy functional `H(a) = ∫ a(y) log2(1 + e^{-y}) dy`; the atom at
    /// +infinity contributes 0 and `H(Δ_0) = 1`.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                h += m * entropy_kernel(self.grid.center(i));
            }
        }
        h
    }

    /// Bhattacharyya functional `B(a) = ∫ a(y) e^{-y/2} dy`.
    pub fn bhattacharyya(&self) -> f64 {
        let mut b = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                b += m * (-self.grid.center(i) / 2.0).exp();
            }
        }
        b
    }

    /// Error probability: mass on negative LLRs plus half the zero bin.
    pub fn error_prob(&self) -> f64 {
        let zb = self.grid.zero_bin();
        self.mass[..zb].iter().sum::<f64>() + 0.5 * self.mass[zb]
    }

    /// Symmetry diagnostic `Σ_y max(0, a(-y) - e^{-y} a(y)) · spacing`.
    ///
    /// Channel constructors produce symmetric densities; arithmetic does not
    /// re-project, so quantization drift shows up here.
    pub fn symmetry_deficit(&self) -> f64 {
        let zb = self.grid.zero_bin();
        let mut s = 0.0;
        for m in 1..zb {
            let y = self.grid.center(zb + m);
            let a_pos = self.mass.get(zb + m).copied().unwrap_or(0.0);
            let a_neg = self.mass[zb - m];
            s += (a_neg - (-y).exp() * a_pos).max(0.0);
        }
        s
    }

    /// Variable-side convolution `a ⊛ b` with positive overflow kept in the
    /// top bin.
    pub fn var_conv(&self, other: &Density) -> Result<Density> {
        self.var_conv_policy(other, OverflowPolicy::SaturateTop)
    }

    /// Variable-side convolution with an explicit overflow policy.
    pub fn var_conv_policy(&self, other: &Density, policy: OverflowPolicy) -> Result<Density> {
        self.check_compatible(other)?;
        let bins = self.grid.bins();
        let half = self.grid.zero_bin();
        let mut out = vec![0.0; bins];
        let mut overflow_top = 0.0;
        for (i, &ai) in self.mass.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            // output index k = i + j - half
            if i >= half {
                let off = i - half;
                let n = bins - off;
                for (o, bj) in out[off..].iter_mut().zip(&other.mass[..n]) {
                    *o += ai * bj;
                }
                // j >= n lands beyond the top bin
                let spill: f64 = other.mass[n..].iter().sum();
                overflow_top += ai * spill;
            } else {
                let off = half - i;
                // j < off lands below the bottom bin
                let spill: f64 = other.mass[..off].iter().sum();
                out[0] += ai * spill;
                for (o, bj) in out.iter_mut().zip(&other.mass[off..]) {
                    *o += ai * bj;
                }
            }
        }
        let mut inf_mass = self.inf_mass + other.inf_mass - self.inf_mass * other.inf_mass;
        match policy {
            OverflowPolicy::SaturateTop => out[bins - 1] += overflow_top,
            OverflowPolicy::RouteToInf => inf_mass += overflow_top,
        }
        Ok(Density { grid: self.grid, mass: out, inf_mass })
    }

    /// Check-side convolution `a ⊠ b` via the two-input tanh rule.
    pub fn chk_conv(&self, other: &Density) -> Result<Density> {
        self.check_compatible(other)?;
        let table = check_table(&self.grid);
        let h = self.grid.zero_bin();
        let (apos, aneg) = split_magnitudes(self);
        let (bpos, bneg) = split_magnitudes(other);
        let mut out_pos = vec![0.0; h + 1];
        let mut out_neg = vec![0.0; h + 1];
        for m1 in 0..=h {
            let (ap, an) = (apos[m1], aneg[m1]);
            if ap == 0.0 && an == 0.0 {
                continue;
            }
            let row = &table.entries[m1 * (h + 1)..(m1 + 1) * (h + 1)];
            for m2 in 0..=h {
                let (bp, bn) = (bpos[m2], bneg[m2]);
                if bp == 0.0 && bn == 0.0 {
                    continue;
                }
                let w_same = ap * bp + an * bn;
                let w_diff = ap * bn + an * bp;
                let e = &row[m2];
                let lo = e.lo as usize;
                let w_hi = e.frac;
                let w_lo = 1.0 - w_hi;
                out_pos[lo] += w_same * w_lo;
                out_neg[lo] += w_diff * w_lo;
                if w_hi != 0.0 {
                    out_pos[lo + 1] += w_same * w_hi;
                    out_neg[lo + 1] += w_diff * w_hi;
                }
            }
        }
        // assemble; Δ_∞ acts as the identity on the other operand
        let bins = self.grid.bins();
        let mut mass = vec![0.0; bins];
        mass[h] = out_pos[0] + out_neg[0];
        for m in 1..=h {
            // positive magnitudes above h-1 have no bin; fold into the top bin
            let pi = (h + m).min(bins - 1);
            mass[pi] += out_pos[m];
            mass[h - m] += out_neg[m];
        }
        if other.inf_mass > 0.0 {
            for (o, &ai) in mass.iter_mut().zip(&self.mass) {
                *o += ai * other.inf_mass;
            }
        }
        if self.inf_mass > 0.0 {
            for (o, &bj) in mass.iter_mut().zip(&other.mass) {
                *o += bj * self.inf_mass;
            }
        }
        Ok(Density { grid: self.grid, mass, inf_mass: self.inf_mass * other.inf_mass })
    }

    /// `a^{⊛n}`; `n = 0` yields `Δ_0`.
    pub fn var_power(&self, n: u32) -> Result<Density> {
        self.power(n, Density::delta_zero(self.grid), Density::var_conv)
    }

    /// `a^{⊠n}`; `n = 0` yields `Δ_∞`.
    pub fn chk_power(&self, n: u32) -> Result<Density> {
        self.power(n, Density::delta_inf(self.grid), Density::chk_conv)
    }

    fn power(
        &self,
        n: u32,
        identity: Density,
        op: fn(&Density, &Density) -> Result<Density>,
    ) -> Result<Density> {
        // square-and-multiply; both operators are associative-commutative
        let mut acc = identity;
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = op(&acc, &base)?;
            }
            k >>= 1;
            if k > 0 {
                base = op(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// Uniform average of densities; exact (`mean` of n copies of `a` is `a`).
    pub fn mean(densities: &[Density]) -> Result<Density> {
        if densities.is_empty() {
            return Err(Error::BadWeights(f64::NAN));
        }
        let grid = densities[0].grid;
        let n = densities.len() as f64;
        let mut mass = vec![0.0; grid.bins()];
        let mut inf_mass = 0.0;
        for d in densities {
            densities[0].check_compatible(d)?;
            for (o, &m) in mass.iter_mut().zip(&d.mass) {
                *o += m;
            }
            inf_mass += d.inf_mass;
        }
        for m in &mut mass {
            *m /= n;
        }
        Ok(Density { grid, mass, inf_mass: inf_mass / n })
    }

    /// Rescales so the total mass is exactly 1. DE steps renormalize their
    /// outputs: the update map amplifies any total-mass drift, so per-op
    /// rounding would otherwise compound over iterations.
    pub fn normalized(&self) -> Density {
        let t = self.total_mass();
        if t == 1.0 || t == 0.0 {
            return self.clone();
        }
        let mass = self.mass.iter().map(|m| m / t).collect();
        Density { grid: self.grid, mass, inf_mass: self.inf_mass / t }
    }

    /// Pointwise convex combination of densities.
    pub fn mix(weights: &[f64], densities: &[Density]) -> Result<Density> {
        if weights.len() != densities.len() || densities.is_empty() {
            return Err(Error::BadWeights(f64::NAN));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadWeights(sum));
        }
        let grid = densities[0].grid;
        let mut mass = vec![0.0; grid.bins()];
        let mut inf_mass = 0.0;
        for (wi, d) in weights.iter().zip(densities) {
            densities[0].check_compatible(d)?;
            for (o, &m) in mass.iter_mut().zip(&d.mass) {
                *o += wi * m;
            }
            inf_mass += wi * d.inf_mass;
        }
        Ok(Density { grid, mass, inf_mass })
    }

    /// Plain-text dump `(bin_center, mass)` with a header carrying the grid
    /// and the atom at +infinity; round-trips bit-exactly.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("llr_max,{}\n", self.grid.llr_max()));
        s.push_str(&format!("bins,{}\n", self.grid.bins()));
        s.push_str(&format!("inf_mass,{}\n", self.inf_mass));
        s.push_str("bin_center,mass\n");
        for (i, &m) in self.mass.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.grid.center(i), m));
        }
        s
    }

    pub fn from_csv_str(s: &str) -> Result<Density> {
        let mut lines = s.lines();
        let mut header = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing header line {name}")))?;
            let (k, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
            if k != name {
                return Err(Error::Parse(format!("expected header {name}, got {k}")));
            }
            Ok(v.to_string())
        };
        let llr_max: f64 = header("llr_max")?
            .parse()
            .map_err(|e| Error::Parse(format!("llr_max: {e}")))?;
        let bins: usize =
            header("bins")?.parse().map_err(|e| Error::Parse(format!("bins: {e}")))?;
        let inf_mass: f64 = header("inf_mass")?
            .parse()
            .map_err(|e| Error::Parse(format!("inf_mass: {e}")))?;
        let grid = GridSpec::new(llr_max, bins)?;
        match lines.next() {
            Some("bin_center,mass") => {}
            other => return Err(Error::Parse(format!("expected column header, got {other:?}"))),
        }
        let mut mass = Vec::with_capacity(bins);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad data line {line:?}")))?;
            mass.push(v.parse::<f64>().map_err(|e| Error::Parse(format!("mass: {e}")))?);
        }
        if mass.len() != bins {
            return Err(Error::Parse(format!("expected {bins} rows, got {}", mass.len())));
        }
        Ok(Density { grid, mass, inf_mass })
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Density> {
        let s = std::fs::read_to_string(path)?;
        Density::from_csv_str(&s)
    }
}

/// `log2(1 + e^{-y})`, numerically stable on both tails.
pub fn entropy_kernel(y: f64) -> f64 {
    if y >= 0.0 {
        (-y).exp().ln_1p() / LN2
    } else {
        -y / LN2 + y.exp().ln_1p() / LN2
    }
}

fn split_magnitudes(d: &Density) -> (Vec<f64>, Vec<f64>) {
    let h = d.grid.zero_bin();
    let mut pos = vec![0.0; h + 1];
    let mut neg = vec![0.0; h + 1];
    pos[0] = d.mass[h];
    for m in 1..=h {
        if h + m < d.grid.bins() {
            pos[m] = d.mass[h + m];
        }
        neg[m] = d.mass[h - m];
    }
    (pos, neg)
}

struct CheckEntry {
    lo: u32,
    frac: f64,
}

/// Precomputed quantization of the two-input check rule on magnitudes.
struct CheckTable {
    entries: Vec<CheckEntry>,
}

impl CheckTable {
    fn build(grid: &GridSpec) -> CheckTable {
        let h = grid.zero_bin();
        let spacing = grid.spacing();
        let mut entries = Vec::with_capacity((h + 1) * (h + 1));
        let tanhs: Vec<f64> = (0..=h).map(|m| (m as f64 * spacing / 2.0).tanh()).collect();
        for m1 in 0..=h {
            for m2 in 0..=h {
                let t = tanhs[m1] * tanhs[m2];
                // y = 2 atanh(t) = ln((1+t)/(1-t)); t < 1 strictly on the grid
                let y = ((1.0 + t) / (1.0 - t)).ln();
                let q = y / spacing;
                let mut lo = q.floor() as usize;
                let mut frac = q - lo as f64;
                if lo >= h {
                    lo = h;
                    frac = 0.0;
                }
                entries.push(CheckEntry { lo: lo as u32, frac });
            }
        }
        CheckTable { entries }
    }
}

fn check_table(grid: &GridSpec) -> Arc<CheckTable> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<CheckTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(grid.key()).or_insert_with(|| Arc::new(CheckTable::build(grid))).clone()
}

/// BEC-style density `ε Δ_0 + (1-ε) Δ_∞`.
pub fn bec_density(grid: GridSpec, eps: f64) -> Density {
    let mut mass = vec![0.0; grid.bins()];
    mass[grid.zero_bin()] = eps;
    Density { grid, mass, inf_mass: 1.0 - eps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> GridSpec {
        GridSpec::new(25.0, 512).unwrap()
    }

    fn bsc_density(g: GridSpec, p: f64) -> Density {
        let m = ((1.0 - p) / p).ln();
        Density::from_atoms(g, &[(m, 1.0 - p), (-m, p)], 0.0)
    }

    // BSC-style pair with the atom magnitude on a bin center, so the
    // quantization is exact and atom laws hold to float precision
    fn on_grid_bsc(g: GridSpec, k: usize) -> (Density, f64, f64) {
        let m = k as f64 * g.spacing();
        let p = 1.0 / (1.0 + m.exp());
        (Density::from_atoms(g, &[(m, 1.0 - p), (-m, p)], 0.0), m, p)
    }

    #[test]
    fn delta_atoms() {
        let g = grid();
        let d0 = Density::delta_zero(g);
        let di = Density::delta_inf(g);
        assert_eq!(d0.entropy(), 1.0);
        assert_eq!(di.entropy(), 0.0);
        assert_eq!(d0.bhattacharyya(), 1.0);
        assert_eq!(di.bhattacharyya(), 0.0);
        assert_eq!(d0.error_prob(), 0.5);
        assert_eq!(di.error_prob(), 0.0);
    }

    #[test]
    fn absorption_and_identity_laws() {
        let g = grid();
        let d0 = Density::delta_zero(g);
        let di = Density::delta_inf(g);
        let a = bsc_density(g, 0.1);
        // ⊛: Δ_0 identity, Δ_∞ absorbing
        assert_eq!(d0.var_conv(&a).unwrap(), a);
        assert_eq!(di.var_conv(&a).unwrap(), di);
        // ⊠: Δ_∞ identity, Δ_0 absorbing
        assert_eq!(di.chk_conv(&a).unwrap(), a);
        assert_eq!(d0.chk_conv(&a).unwrap(), d0);
    }

    #[test]
    fn bsc_pair_var_conv() {
        let g = grid();
        let (a, m, p) = on_grid_bsc(g, 23);
        let c = a.var_conv(&a).unwrap();
        // masses (1-p)^2 at +2m, 2p(1-p) at 0, p^2 at -2m
        let expect = Density::from_atoms(
            g,
            &[(2.0 * m, (1.0 - p) * (1.0 - p)), (0.0, 2.0 * p * (1.0 - p)), (-2.0 * m, p * p)],
            0.0,
        );
        assert_abs_diff_eq!(c.entropy(), expect.entropy(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.error_prob(), expect.error_prob(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bec_subalgebra_closure() {
        let g = grid();
        let (e1, e2) = (0.37, 0.62);
        let a = bec_density(g, e1);
        let b = bec_density(g, e2);
        let v = a.var_conv(&b).unwrap();
        assert_abs_diff_eq!(v.entropy(), e1 * e2, epsilon = 1e-14);
        assert_abs_diff_eq!(v.inf_mass(), 1.0 - e1 * e2, epsilon = 1e-14);
        let c = a.chk_conv(&b).unwrap();
        let ec = 1.0 - (1.0 - e1) * (1.0 - e2);
        assert_abs_diff_eq!(c.entropy(), ec, epsilon = 1e-14);
        assert_abs_diff_eq!(bec_density(g, e1).bhattacharyya(), e1, epsilon = 1e-14);
        assert_abs_diff_eq!(bec_density(g, e1).error_prob(), e1 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn bec_powers() {
        let g = grid();
        let e = 0.3;
        let a = bec_density(g, e);
        let c5 = a.chk_power(5).unwrap();
        assert_abs_diff_eq!(c5.entropy(), 1.0 - (1.0 - e).powi(5), epsilon = 1e-13);
        let v2 = a.var_power(2).unwrap();
        assert_abs_diff_eq!(v2.entropy(), e * e, epsilon = 1e-13);
        assert_eq!(a.var_power(1).unwrap(), a);
        assert_eq!(a.var_power(0).unwrap(), Density::delta_zero(g));
        assert_eq!(a.chk_power(0).unwrap(), Density::delta_inf(g));
    }

    #[test]
    fn bsc_chk_conv_atoms() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let (a, m1, p1) = on_grid_bsc(g, 90);
        let (b, m2, p2) = on_grid_bsc(g, 57);
        let c = a.chk_conv(&b).unwrap();
        let pc = p1 * (1.0 - p2) + p2 * (1.0 - p1);
        assert_abs_diff_eq!(c.error_prob(), pc, epsilon = 1e-12);
        let mc = 2.0 * ((m1 / 2.0).tanh() * (m2 / 2.0).tanh()).atanh();
        // mean magnitude preserved by the two-bin split
        let mean: f64 = (0..g.bins()).map(|i| g.center(i) * c.mass()[i]).sum();
        let expect_mean = (1.0 - pc) * mc - pc * mc;
        assert_abs_diff_eq!(mean, expect_mean, epsilon = 1e-9);
        assert_abs_diff_eq!(c.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mix_linearity() {
        let g = grid();
        let d0 = Density::delta_zero(g);
        let di = Density::delta_inf(g);
        let m = Density::mix(&[0.5, 0.5], &[d0.clone(), di.clone()]).unwrap();
        assert_eq!(m, bec_density(g, 0.5));
        let a = bsc_density(g, 0.2);
        let b = bec_density(g, 0.7);
        let w = [0.3, 0.7];
        let mixed = Density::mix(&w, &[a.clone(), b.clone()]).unwrap();
        assert_abs_diff_eq!(
            mixed.entropy(),
            0.3 * a.entropy() + 0.7 * b.entropy(),
            epsilon = 1e-13
        );
        assert!(Density::mix(&[0.6, 0.6], &[a, b]).is_err());
    }

    #[test]
    fn bhattacharyya_multiplicative_on_atoms() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let a = bsc_density(g, 0.1);
        let b = bsc_density(g, 0.23);
        let v = a.var_conv(&b).unwrap();
        assert_abs_diff_eq!(
            v.bhattacharyya(),
            a.bhattacharyya() * b.bhattacharyya(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn bsc_entropy_matches_binary_entropy() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let (a, _m, p) = on_grid_bsc(g, 86);
        let h2 = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        assert_abs_diff_eq!(a.entropy(), h2, epsilon = 1e-12);
    }

    #[test]
    fn degradation_ordering_at_check_and_variable() {
        let g = grid();
        let di = Density::delta_inf(g);
        let d0 = Density::delta_zero(g);
        let a = bec_density(g, 0.4);
        let b = bsc_density(g, 0.15);
        // replacing a check input by Δ_∞ upgrades the output
        let worse = a.chk_conv(&b).unwrap();
        let better = a.chk_conv(&di).unwrap();
        assert!(worse.entropy() >= better.entropy());
        assert!(worse.bhattacharyya() >= better.bhattacharyya());
        assert!(worse.error_prob() >= better.error_prob());
        // replacing a variable input by Δ_0 degrades the output
        let up = a.var_conv(&b).unwrap();
        let down = a.var_conv(&d0).unwrap();
        assert!(up.entropy() <= down.entropy());
        assert!(up.bhattacharyya() <= down.bhattacharyya());
        assert!(up.error_prob() <= down.error_prob());
    }

    #[test]
    fn overflow_policy_routing() {
        let g = GridSpec::new(10.0, 64).unwrap();
        let a = Density::from_atoms(g, &[(8.0, 1.0)], 0.0);
        let sat = a.var_conv_policy(&a, OverflowPolicy::SaturateTop).unwrap();
        assert_eq!(sat.inf_mass(), 0.0);
        assert_abs_diff_eq!(sat.total_mass(), 1.0, epsilon = 1e-12);
        let inf = a.var_conv_policy(&a, OverflowPolicy::RouteToInf).unwrap();
        assert!(inf.inf_mass() > 0.99);
        assert_abs_diff_eq!(inf.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = Density::delta_zero(GridSpec::new(25.0, 512).unwrap());
        let b = Density::delta_zero(GridSpec::new(20.0, 512).unwrap());
        assert!(a.var_conv(&b).is_err());
        assert!(a.chk_conv(&b).is_err());
    }

    #[test]
    fn csv_round_trip_bit_exact() {
        let g = grid();
        let d = bsc_density(g, 0.123456789);
        let s = d.to_csv_string();
        let back = Density::from_csv_str(&s).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn symmetry_deficit_small_for_symmetric_inputs() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let (a, _m, _p) = on_grid_bsc(g, 90);
        assert!(a.symmetry_deficit() < 1e-9);
        let c = a.chk_conv(&a).unwrap();
        assert!(c.symmetry_deficit().is_finite());
    }
}
