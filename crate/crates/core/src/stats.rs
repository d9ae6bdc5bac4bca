//! Goodness-of-fit helpers for checking samplers against exact densities.

use ndarray::Array2;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::trace_of_product;
use crate::model::TrdeModel;

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

/// Pearson chi-square test of observed counts against expected counts.
/// Cells are visited in order and merged until each pooled cell expects at
/// least `min_expected`; a short remainder joins the last pooled cell.
pub fn chi_square_test(observed: &[f64], expected: &[f64], min_expected: f64) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidArgument("observed and expected counts must match and be nonempty".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &ex) in observed.iter().zip(expected) {
        o += ob;
        e += ex;
        if e >= min_expected {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two cells after pooling".into()));
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        cells: pooled.len(),
    })
}

/// Exact probabilities of the `bins x bins` regular grid cells of the unit
/// square under the normalized mixture of `components` (equal to a single
/// model when one is given). Entry `(i, j)` covers data dimension 0 in bin
/// `i` and dimension 1 in bin `j`.
pub fn grid_cell_probabilities(components: &[TrdeModel], bins: usize) -> Result<Array2<f64>> {
    if components.iter().any(|m| m.dims() != 2) {
        return Err(Error::InvalidArgument("grid cell probabilities need D = 2".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    // cumulative mass F(x, y) over the grid corners
    let mut cum = Array2::<f64>::zeros((bins + 1, bins + 1));
    let mut total = 0.0;
    for m in components {
        let inv = m.inverse_permutation();
        let e0: Vec<_> = edges.iter().map(|&c| m.cumulative_transfer(0, c)).collect::<Result<_>>()?;
        let e1: Vec<_> = edges.iter().map(|&c| m.cumulative_transfer(1, c)).collect::<Result<_>>()?;
        for i in 0..=bins {
            for j in 0..=bins {
                // model axis 0 reads data dimension permutation[0]
                let (a, b) = if inv[0] == 0 { (i, j) } else { (j, i) };
                cum[[i, j]] += trace_of_product(&e0[a].view(), &e1[b].view());
            }
        }
        total += m.partition_function();
    }
    let mut cells = Array2::zeros((bins, bins));
    for i in 0..bins {
        for j in 0..bins {
            let p = cum[[i + 1, j + 1]] - cum[[i, j + 1]] - cum[[i + 1, j]] + cum[[i, j]];
            cells[[i, j]] = (p / total).max(0.0);
        }
    }
    Ok(cells)
}
