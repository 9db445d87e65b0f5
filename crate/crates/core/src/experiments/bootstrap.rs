//! Percentile bootstrap intervals.

use crate::error::{check_fraction, Error, Result};
use crate::randomness::Stream;

/// Type-7 (linear interpolation) quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval of the bootstrap distribution of the mean.
/// `level = 0` collapses to the median of that distribution.
pub fn bootstrap_ci(samples: &[f64], level: f64, n_resamples: usize, stream: &mut Stream) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("bootstrap samples"));
    }
    let bands = bootstrap_bands(&[samples.to_vec()], level, n_resamples, stream)?;
    Ok(bands[0])
}

/// Pointwise bootstrap bands for the mean of curves. `columns[k]` holds one
/// value per unit at grid point `k`; units are resampled jointly so every
/// grid point sees the same resample.
pub(crate) fn bootstrap_bands(
    columns: &[Vec<f64>],
    level: f64,
    n_resamples: usize,
    stream: &mut Stream,
) -> Result<Vec<(f64, f64)>> {
    check_fraction("level", level)?;
    if n_resamples == 0 {
        return Err(crate::error::invalid("n_resamples", "must be >= 1"));
    }
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyInput("bootstrap samples"));
    }
    let mut means = vec![Vec::with_capacity(n_resamples); columns.len()];
    let mut pick = vec![0usize; n];
    for _ in 0..n_resamples {
        for p in pick.iter_mut() {
            *p = stream.index(n);
        }
        for (m, col) in means.iter_mut().zip(columns) {
            m.push(pick.iter().map(|&i| col[i]).sum::<f64>() / n as f64);
        }
    }
    let tail = (1.0 - level) / 2.0;
    Ok(means
        .into_iter()
        .map(|mut m| {
            m.sort_by(f64::total_cmp);
            (quantile_sorted(&m, tail), quantile_sorted(&m, 1.0 - tail))
        })
        .collect())
}
