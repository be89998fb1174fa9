use super::{Method, Settings, TestOutcome};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Expected cell probabilities below this are rejected as too sparse.
pub const MIN_CELL_PROBABILITY: f64 = 1e-12;

/// Truncated `(k+1) x (k+1)` contingency table: cells `x = 0..k-1` and
/// `x >= k` on one axis, likewise for `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareTable {
    pub k: u32,
    pub observed: Vec<Vec<u64>>,
    pub probabilities: Vec<Vec<f64>>,
    /// Cells that the model gives probability zero by construction.
    pub structural_zero: Vec<Vec<bool>>,
}

fn label(axis: &str, i: usize, k: usize) -> String {
    if i == k {
        format!("{axis}>={k}")
    } else {
        format!("{axis}={i}")
    }
}

impl ChiSquareTable {
    #[allow(clippy::needless_range_loop)]
    pub fn new(data: &Dataset, model: &ModelSpec, k: u32) -> Result<Self> {
        data.require_nonempty()?;
        if k == 0 {
            return Err(Error::InvalidSetting(
                "chi-square truncation k must be >= 1".into(),
            ));
        }
        let ku = k as usize;
        let mut observed = vec![vec![0u64; ku + 1]; ku + 1];
        for &(x, y) in data.pairs() {
            observed[(x as usize).min(ku)][(y as usize).min(ku)] += 1;
        }

        let mut probs = vec![vec![0.0; ku + 1]; ku + 1];
        for x in 0..ku {
            for y in 0..ku {
                probs[x][y] = model.pmf(x as u32, y as u32);
            }
        }
        // edge cells absorb the remaining marginal mass
        for x in 0..ku {
            let inner: f64 = probs[x][..ku].iter().sum();
            probs[x][ku] = model.marginal_x_prob(x as u32) - inner;
        }
        for y in 0..ku {
            let inner: f64 = (0..ku).map(|x| probs[x][y]).sum();
            probs[ku][y] = model.marginal_y_prob(y as u32) - inner;
        }
        let others: f64 = probs.iter().flatten().sum();
        probs[ku][ku] = 1.0 - others;

        // support depends only on whether a coordinate is zero, so the edge
        // cells share the support of their representative value k >= 1
        let structural_zero = (0..=ku)
            .map(|x| {
                (0..=ku)
                    .map(|y| !model.in_support(x as u32, y as u32))
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            observed,
            probabilities: probs,
            structural_zero,
        })
    }

    pub fn row_label(&self, i: usize) -> String {
        label("x", i, self.k as usize)
    }

    pub fn col_label(&self, j: usize) -> String {
        label("y", j, self.k as usize)
    }
}

/// Pearson statistic `sum (O - E)^2 / E` over the truncated table. Cells that
/// are impossible under the model are left out of both the sum and the
/// degrees of freedom `cells - 1 - (number of free parameters)`.
pub fn chi_square_statistic(data: &Dataset, model: &ModelSpec, k: u32) -> Result<TestOutcome> {
    let table = ChiSquareTable::new(data, model, k)?;
    let n = data.n() as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut structural_zeros = 0usize;
    for (i, row) in table.probabilities.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let o = table.observed[i][j];
            if table.structural_zero[i][j] {
                if o > 0 {
                    return Err(Error::InconsistentSupport(format!(
                        "{} observations in cell ({}, {}) which has probability zero under {}",
                        o,
                        table.row_label(i),
                        table.col_label(j),
                        model
                    )));
                }
                structural_zeros += 1;
                continue;
            }
            if p.is_nan() || p < MIN_CELL_PROBABILITY {
                return Err(Error::SparseCell {
                    row: table.row_label(i),
                    col: table.col_label(j),
                    probability: p,
                });
            }
            let e = n * p;
            let d = o as f64 - e;
            stat += d * d / e;
            cells += 1;
        }
    }
    let p = model.variant().free_parameters();
    let df = cells.checked_sub(1 + p).filter(|d| *d > 0).ok_or_else(|| {
        Error::InvalidSetting(format!(
            "k = {k} leaves {cells} usable cells, too few for {p} estimated parameters"
        ))
    })?;
    Ok(TestOutcome::new(
        Method::ChiSquare,
        stat,
        Settings::ChiSquare {
            k,
            df,
            cells,
            structural_zeros,
        },
    ))
}
