//! Uniform LLR quantization grid shared by all densities.

use crate::{Error, Result};

/// Uniform quantization grid on `[-llr_max, +llr_max]`.
///
/// Bin centers sit at integer multiples of the spacing, so the grid always
/// contains an exact bin at LLR 0 (index `bins/2`). Two densities can be
/// combined only if their grids are identical.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    llr_max: f64,
    bins: usize,
}

impl GridSpec {
    pub const DEFAULT_LLR_MAX: f64 = 25.0;
    pub const DEFAULT_BINS: usize = 2048;

    pub fn new(llr_max: f64, bins: usize) -> Result<Self> {
        if !(llr_max > 0.0) || !llr_max.is_finite() {
            return Err(Error::InvalidGrid(format!("llr_max must be positive, got {llr_max}")));
        }
        if bins < 16 || bins % 2 != 0 {
            return Err(Error::InvalidGrid(format!("bins must be even and >= 16, got {bins}")));
        }
        Ok(GridSpec { llr_max, bins })
    }

    /// The default analysis grid: `llr_max = 25`, 2048 bins.
    pub fn default_grid() -> Self {
        GridSpec { llr_max: Self::DEFAULT_LLR_MAX, bins: Self::DEFAULT_BINS }
    }

    pub fn llr_max(&self) -> f64 {
        self.llr_max
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.llr_max / self.bins as f64
    }

    /// Index of the bin centered at LLR 0.
    pub fn zero_bin(&self) -> usize {
        self.bins / 2
    }

    /// LLR at the center of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as isize - (self.bins / 2) as isize) as f64 * self.spacing()
    }

    /// Cache key; grids compare equal iff their keys match.
    pub(crate) fn key(&self) -> (u64, usize) {
        (self.llr_max.to_bits(), self.bins)
    }

    pub(crate) fn describe(&self) -> String {
        format!("(llr_max={}, bins={})", self.llr_max, self.bins)
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for GridSpec {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, 64).is_err());
        assert!(GridSpec::new(10.0, 15).is_err());
        assert!(GridSpec::new(10.0, 33).is_err());
        assert!(GridSpec::new(-3.0, 64).is_err());
    }

    #[test]
    fn centers_are_symmetric_about_zero() {
        let g = GridSpec::new(20.0, 64).unwrap();
        assert_eq!(g.center(g.zero_bin()), 0.0);
        assert_eq!(g.center(0), -20.0);
        let d = g.spacing();
        assert!((g.center(g.zero_bin() + 3) - 3.0 * d).abs() < 1e-15);
        assert!((g.center(g.zero_bin() - 3) + 3.0 * d).abs() < 1e-15);
    }
}
