use crate::data::CountTable;

/// `t^0, t^1, ..., t^(len-1)`.
pub(crate) fn powers(t: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 1.0;
    for _ in 0..len {
        out.push(acc);
        acc *= t;
    }
    out
}

/// Empirical generating function `G_n(t1, t2) = (1/n) sum_i t1^x_i t2^y_i`.
pub fn empirical_pgf(counts: &CountTable, t1: f64, t2: f64) -> f64 {
    let p1 = powers(t1, counts.rows());
    let p2 = powers(t2, counts.cols());
    let s: f64 = counts
        .cells()
        .map(|(x, y, c)| c as f64 * p1[x] * p2[y])
        .sum();
    s / counts.n() as f64
}

/// `G_n` on the product grid `t1s x t2s`, row-major in `t1`.
///
/// Evaluated as the matrix product `P1 C P2'` of power matrices and the count
/// table, which is much cheaper than summing over observations per point.
pub fn empirical_pgf_grid(counts: &CountTable, t1s: &[f64], t2s: &[f64]) -> Vec<f64> {
    let (rows, cols) = (counts.rows(), counts.cols());
    let n = counts.n() as f64;
    // m[i][y] = sum_x t1_i^x count(x, y)
    let mut m = vec![0.0; t1s.len() * cols];
    for (i, &t1) in t1s.iter().enumerate() {
        let p1 = powers(t1, rows);
        let row = &mut m[i * cols..(i + 1) * cols];
        for (x, px) in p1.iter().enumerate() {
            for (y, slot) in row.iter_mut().enumerate() {
                let c = counts.get(x, y);
                if c > 0 {
                    *slot += px * c as f64;
                }
            }
        }
    }
    let p2: Vec<Vec<f64>> = t2s.iter().map(|&t| powers(t, cols)).collect();
    let mut out = Vec::with_capacity(t1s.len() * t2s.len());
    for i in 0..t1s.len() {
        let row = &m[i * cols..(i + 1) * cols];
        for p in &p2 {
            let s: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
            out.push(s / n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn grid_matches_pointwise() {
        let d = Dataset::new(vec![(0, 0), (1, 2), (3, 1), (1, 2), (0, 4)]);
        let c = d.counts();
        let t1s = [-0.9, -0.2, 0.0, 0.5, 0.99];
        let t2s = [-0.7, 0.0, 0.3];
        let g = empirical_pgf_grid(&c, &t1s, &t2s);
        for (i, &a) in t1s.iter().enumerate() {
            for (j, &b) in t2s.iter().enumerate() {
                let direct: f64 = d
                    .pairs()
                    .iter()
                    .map(|&(x, y)| a.powi(x as i32) * b.powi(y as i32))
                    .sum::<f64>()
                    / 5.0;
                assert!((g[i * t2s.len() + j] - direct).abs() < 1e-15);
                assert!((empirical_pgf(&c, a, b) - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn value_at_one_is_one() {
        let d = Dataset::new(vec![(2, 5), (7, 1)]);
        assert_eq!(empirical_pgf(&d.counts(), 1.0, 1.0), 1.0);
    }
}
