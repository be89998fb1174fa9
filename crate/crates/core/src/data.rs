use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MomentSummary;

/// An ordered sample of bivariate counts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dataset {
    pairs: Vec<(u32, u32)>,
}

impl Dataset {
    pub fn new(pairs: Vec<(u32, u32)>) -> Self {
        Self { pairs }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(u32, u32)> {
        self.pairs
    }

    /// The same sample with the two coordinates exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.pairs.iter().map(|&(x, y)| (y, x)).collect())
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptySample("dataset has no observations".into()))
        } else {
            Ok(())
        }
    }

    /// `(sum x, sum y)`.
    pub fn sums(&self) -> (u64, u64) {
        self.pairs
            .iter()
            .fold((0, 0), |(sx, sy), &(x, y)| (sx + x as u64, sy + y as u64))
    }

    pub fn means(&self) -> Result<[f64; 2]> {
        self.require_nonempty()?;
        let (sx, sy) = self.sums();
        let n = self.n() as f64;
        Ok([sx as f64 / n, sy as f64 / n])
    }

    /// Sample mean and covariance with the `n - 1` denominator.
    pub fn sample_moments(&self) -> Result<MomentSummary> {
        if self.n() < 2 {
            return Err(Error::EmptySample(format!(
                "sample moments need at least two observations, got {}",
                self.n()
            )));
        }
        let mean = self.means()?;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for &(x, y) in &self.pairs {
            let dx = x as f64 - mean[0];
            let dy = y as f64 - mean[1];
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let d = (self.n() - 1) as f64;
        Ok(MomentSummary {
            mean,
            covariance: [[sxx / d, sxy / d], [sxy / d, syy / d]],
        })
    }

    pub fn counts(&self) -> CountTable {
        CountTable::from_pairs(&self.pairs)
    }
}

impl From<Vec<(u32, u32)>> for Dataset {
    fn from(pairs: Vec<(u32, u32)>) -> Self {
        Self::new(pairs)
    }
}

/// Frequency table of a dataset: `count(x, y)` for `x <= max_x`, `y <= max_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    rows: usize,
    cols: usize,
    counts: Vec<u32>,
    n: usize,
}

impl CountTable {
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        let rows = pairs.iter().map(|p| p.0 as usize + 1).max().unwrap_or(0);
        let cols = pairs.iter().map(|p| p.1 as usize + 1).max().unwrap_or(0);
        let mut counts = vec![0u32; rows * cols];
        for &(x, y) in pairs {
            counts[x as usize * cols + y as usize] += 1;
        }
        Self {
            rows,
            cols,
            counts,
            n: pairs.len(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct `x` values covered (`max_x + 1`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of distinct `y` values covered (`max_y + 1`).
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        if x < self.rows && y < self.cols {
            self.counts[x * self.cols + y]
        } else {
            0
        }
    }

    /// Non-zero cells as `(x, y, count)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(move |(i, c)| (i / self.cols, i % self.cols, *c))
    }

    /// Per-`x` totals `(count, sum of y)`.
    pub fn row_summaries(&self) -> Vec<(u64, u64)> {
        (0..self.rows)
            .map(|x| {
                (0..self.cols).fold((0u64, 0u64), |(c, s), y| {
                    let k = self.get(x, y) as u64;
                    (c + k, s + k * y as u64)
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_table_roundtrip() {
        let d = Dataset::new(vec![(0, 0), (1, 2), (1, 2), (3, 0)]);
        let t = d.counts();
        assert_eq!((t.rows(), t.cols()), (4, 3));
        assert_eq!(t.get(1, 2), 2);
        assert_eq!(t.get(9, 9), 0);
        let total: u32 = t.cells().map(|c| c.2).sum();
        assert_eq!(total, 4);
        assert_eq!(t.row_summaries()[1], (2, 4));
    }

    #[test]
    fn sample_moments_use_unbiased_covariance() {
        let d = Dataset::new(vec![(1, 0), (0, 1)]);
        let m = d.sample_moments().unwrap();
        assert_eq!(m.mean, [0.5, 0.5]);
        assert_eq!(m.covariance, [[0.5, -0.5], [-0.5, 0.5]]);
        assert!(Dataset::new(vec![(1, 1)]).sample_moments().is_err());
    }

    #[test]
    fn swapping_twice_is_identity() {
        let d = Dataset::new(vec![(2, 1), (0, 5)]);
        assert_eq!(d.swapped().pairs(), &[(1, 2), (5, 0)]);
        assert_eq!(d.swapped().swapped(), d);
    }
}
