//! BMS channel families: BEC, BSC and BAWGN.
//!
//! Each family is parametrized by a single scalar. The L-density of the
//! BAWGN channel with noise variance `σ²` is Gaussian with mean `2/σ²` and
//! variance `4/σ²`; the other two are atomic.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::density::{bec_density, entropy_kernel, Density};
use crate::grid::GridSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelFamily {
    Bec,
    Bsc,
    Bawgn,
}

impl ChannelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelFamily::Bec => "BEC",
            ChannelFamily::Bsc => "BSC",
            ChannelFamily::Bawgn => "BAWGN",
        }
    }
}

impl std::str::FromStr for ChannelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bec" => Ok(ChannelFamily::Bec),
            "bsc" => Ok(ChannelFamily::Bsc),
            "bawgn" | "biawgn" | "awgn" => Ok(ChannelFamily::Bawgn),
            other => Err(Error::Parse(format!("unknown channel family {other:?}"))),
        }
    }
}

/// One member of a BMS channel family: erasure probability ε, crossover
/// probability p, or noise standard deviation σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParam {
    pub family: ChannelFamily,
    pub value: f64,
}

impl ChannelParam {
    pub fn new(family: ChannelFamily, value: f64) -> Result<Self> {
        let ok = match family {
            ChannelFamily::Bec => (0.0..=1.0).contains(&value),
            ChannelFamily::Bsc => (0.0..=0.5).contains(&value),
            ChannelFamily::Bawgn => value > 0.0 && value.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParam(format!("{} value {value}", family.name())));
        }
        Ok(ChannelParam { family, value })
    }

    pub fn bec(eps: f64) -> Result<Self> {
        Self::new(ChannelFamily::Bec, eps)
    }

    pub fn bsc(p: f64) -> Result<Self> {
        Self::new(ChannelFamily::Bsc, p)
    }

    pub fn bawgn(sigma: f64) -> Result<Self> {
        Self::new(ChannelFamily::Bawgn, sigma)
    }

    /// Quantizes the channel L-density onto `grid`.
    pub fn density(&self, grid: GridSpec) -> Density {
        match self.family {
            ChannelFamily::Bec => bec_density(grid, self.value),
            ChannelFamily::Bsc => {
                let p = self.value;
                if p == 0.0 {
                    return Density::delta_inf(grid);
                }
                let m = ((1.0 - p) / p).ln();
                Density::from_atoms(grid, &[(m, 1.0 - p), (-m, p)], 0.0)
            }
            ChannelFamily::Bawgn => {
                let mean = 2.0 / (self.value * self.value);
                let sd = 2.0 / self.value;
                let normal = Normal::new(mean, sd).unwrap();
                let bins = grid.bins();
                let half = grid.spacing() / 2.0;
                let mut mass = vec![0.0; bins];
                for (i, m) in mass.iter_mut().enumerate() {
                    let c = grid.center(i);
                    *m = normal.cdf(c + half) - normal.cdf(c - half);
                }
                // tails fold into the extreme bins
                mass[0] += normal.cdf(grid.center(0) - half);
                mass[bins - 1] += 1.0 - normal.cdf(grid.center(bins - 1) + half);
                Density::from_parts(grid, mass, 0.0).expect("gaussian quantization")
            }
        }
    }

    /// Channel entropy in bits, grid-independent.
    pub fn entropy(&self) -> f64 {
        match self.family {
            ChannelFamily::Bec => self.value,
            ChannelFamily::Bsc => binary_entropy(self.value),
            ChannelFamily::Bawgn => bawgn_entropy(self.value),
        }
    }

    /// Inverts `entropy` within the family by monotone bisection.
    pub fn from_entropy(family: ChannelFamily, h: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::InvalidParam(format!("entropy {h}")));
        }
        match family {
            ChannelFamily::Bec => ChannelParam::bec(h),
            ChannelFamily::Bsc => {
                let p = invert_increasing(|p| binary_entropy(p), h, 0.0, 0.5);
                ChannelParam::bsc(p)
            }
            ChannelFamily::Bawgn => {
                if h >= 1.0 {
                    return Err(Error::AnchorUnattainable(h));
                }
                if h <= 0.0 {
                    return Err(Error::AnchorUnattainable(h));
                }
                let s = invert_increasing(bawgn_entropy, h, 1e-3, 1e6);
                ChannelParam::bawgn(s)
            }
        }
    }
}

impl std::fmt::Display for ChannelParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.family.name(), self.value)
    }
}

fn invert_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `H(c_σ) = ∫ N(y; 2/σ², 4/σ²) log2(1+e^{-y}) dy` by composite Simpson
/// quadrature over ±12 standard deviations.
pub fn bawgn_entropy(sigma: f64) -> f64 {
    let mean = 2.0 / (sigma * sigma);
    let sd = 2.0 / sigma;
    gauss_expect(mean, sd, entropy_kernel, 4000)
}

/// Expectation of `f` under `N(mean, sd²)`, composite Simpson with `n`
/// (even) intervals over ±12 sd.
fn gauss_expect(mean: f64, sd: f64, f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let a = mean - 12.0 * sd;
    let b = mean + 12.0 * sd;
    let h = (b - a) / n as f64;
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let g = |y: f64| {
        let u = (y - mean) / sd;
        norm * (-0.5 * u * u).exp() * f(y)
    };
    let mut s = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + i as f64 * h);
    }
    s * h / 3.0
}

/// GEXIT kernel of the BAWGN(σ) family at LLR `y`:
/// a ratio of two Gaussian-weighted logistic integrals. `l(σ, 0) = 1` and
/// `l(σ, y) → 0` as `y → ∞`.
pub fn bawgn_gexit_kernel(sigma: f64, y: f64) -> f64 {
    bawgn_gexit_kernel_n(sigma, y, 1200)
}

/// Same kernel with an explicit Simpson interval count, for refinement tests.
pub fn bawgn_gexit_kernel_n(sigma: f64, y: f64, n: usize) -> f64 {
    let mean = 2.0 / (sigma * sigma);
    let sd = 2.0 / sigma;
    let num = gauss_expect(mean, sd, |z| logistic_neg(z + y), n);
    let den = gauss_expect(mean, sd, logistic_neg, n);
    num / den
}

/// `1/(1+e^z)` without overflow.
fn logistic_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Precomputed GEXIT kernel values at the grid centers for one σ.
pub struct GexitTable {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GexitTable {
    pub fn new(grid: GridSpec, sigma: f64) -> GexitTable {
        let mean = 2.0 / (sigma * sigma);
        let sd = 2.0 / sigma;
        let den = gauss_expect(mean, sd, logistic_neg, 1200);
        let values = (0..grid.bins())
            .map(|i| {
                let y = grid.center(i);
                gauss_expect(mean, sd, |z| logistic_neg(z + y), 1200) / den
            })
            .collect();
        GexitTable { grid, values }
    }

    /// `G(c_σ, a) = ∫ a(y) l(σ, y) dy`; the atom at +∞ contributes 0.
    pub fn apply(&self, a: &Density) -> Result<f64> {
        if a.grid() != self.grid {
            return Err(Error::GridMismatch(a.grid().describe(), self.grid.describe()));
        }
        Ok(self.values.iter().zip(a.mass()).map(|(l, m)| l * m).sum())
    }
}

/// GEXIT value of a density at the given channel operating point.
///
/// For the BEC the GEXIT functional reduces to the entropy functional. The
/// BSC family is not supported.
pub fn gexit(ch: ChannelParam, a: &Density) -> Result<f64> {
    match ch.family {
        ChannelFamily::Bec => Ok(a.entropy()),
        ChannelFamily::Bawgn => GexitTable::new(a.grid(), ch.value).apply(a),
        ChannelFamily::Bsc => {
            Err(Error::InvalidParam("GEXIT kernel not available for BSC".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn param_validation() {
        assert!(ChannelParam::bec(1.2).is_err());
        assert!(ChannelParam::bsc(0.6).is_err());
        assert!(ChannelParam::bawgn(0.0).is_err());
        assert!(ChannelParam::bawgn(0.948).is_ok());
    }

    #[test]
    fn bsc_atoms_placed() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let d = ChannelParam::bsc(0.1).unwrap().density(g);
        assert_abs_diff_eq!(d.error_prob(), 0.1, epsilon = 1e-12);
        let mean: f64 = (0..g.bins()).map(|i| g.center(i) * d.mass()[i]).sum();
        let m = 9.0_f64.ln();
        assert_abs_diff_eq!(mean, 0.9 * m - 0.1 * m, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_entropies() {
        assert_eq!(ChannelParam::bec(0.37).unwrap().entropy(), 0.37);
        let h = ChannelParam::bsc(0.11).unwrap().entropy();
        assert_abs_diff_eq!(h, binary_entropy(0.11), epsilon = 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bawgn_entropy_reference_points() {
        // capacity of BAWGN with σ = 0.9480 is about 1 - 0.4789
        let h = bawgn_entropy(0.9480);
        assert_abs_diff_eq!(h, 0.4789, epsilon = 5e-4);
        // degrades monotonically with σ
        assert!(bawgn_entropy(0.5) < bawgn_entropy(1.0));
        assert!(bawgn_entropy(1.0) < bawgn_entropy(2.0));
        assert!(bawgn_entropy(0.1) < 1e-6);
        assert!(bawgn_entropy(100.0) > 0.999);
    }

    #[test]
    fn bawgn_grid_entropy_matches_quadrature() {
        let g = GridSpec::new(25.0, 2048).unwrap();
        let p = ChannelParam::bawgn(0.9480).unwrap();
        assert_abs_diff_eq!(p.density(g).entropy(), p.entropy(), epsilon = 1e-5);
    }

    #[test]
    fn entropy_inversion_round_trips() {
        for (fam, h) in [
            (ChannelFamily::Bec, 0.42),
            (ChannelFamily::Bsc, 0.42),
            (ChannelFamily::Bawgn, 0.42),
            (ChannelFamily::Bawgn, 0.4792),
        ] {
            let p = ChannelParam::from_entropy(fam, h).unwrap();
            assert_abs_diff_eq!(p.entropy(), h, epsilon = 1e-10);
        }
        assert!(ChannelParam::from_entropy(ChannelFamily::Bawgn, 1.0).is_err());
    }

    #[test]
    fn gexit_kernel_shape() {
        let s = 0.9480;
        assert_abs_diff_eq!(bawgn_gexit_kernel(s, 0.0), 1.0, epsilon = 1e-12);
        assert!(bawgn_gexit_kernel(s, 30.0) < 1e-3);
        assert!(bawgn_gexit_kernel(s, -5.0) > 1.0);
        // refinement oracle: 10x finer quadrature agrees
        for y in [-3.0, 0.7, 4.0, 12.0] {
            let coarse = bawgn_gexit_kernel_n(s, y, 1200);
            let fine = bawgn_gexit_kernel_n(s, y, 12000);
            assert_abs_diff_eq!(coarse, fine, epsilon = 1e-10);
        }
    }

    #[test]
    fn gexit_of_channel_density_near_entropy() {
        // to first order the GEXIT value equals the entropy; for the channel
        // density itself they are close but not equal
        let g = GridSpec::new(25.0, 2048).unwrap();
        let p = ChannelParam::bawgn(0.9480).unwrap();
        let d = p.density(g);
        let gv = gexit(p, &d).unwrap();
        assert!((gv - d.entropy()).abs() < 0.05);
        // BEC specialization
        let pe = ChannelParam::bec(0.43).unwrap();
        assert_abs_diff_eq!(gexit(pe, &pe.density(g)).unwrap(), 0.43, epsilon = 1e-12);
        assert!(gexit(ChannelParam::bsc(0.1).unwrap(), &d).is_err());
    }
}
