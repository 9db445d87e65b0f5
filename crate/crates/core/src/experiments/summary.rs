//! Grouping of factual realizations and aggregation of counterfactual curves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::randomness::{Label, StreamKey};

use super::bootstrap::bootstrap_bands;
use super::config::Grouping;

/// Per-realization aggregates; counterfactual values are means over replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationSummary {
    /// Events (or infections) in the window of interest.
    pub observed_count: usize,
    pub cf_mean_count: f64,
    /// Cumulative counts on the time grid.
    pub factual_curve: Vec<f64>,
    pub cf_curve: Vec<f64>,
    /// Replicates cut short by an event cap.
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub mean_factual: f64,
    pub mean_cf: f64,
    pub lo: f64,
    pub hi: f64,
    pub rel_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    /// Bin `(lower, upper]` on observed counts; `None` is unbounded.
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    /// Indices of the factual realizations in the group.
    pub members: Vec<usize>,
    /// Smallest and largest observed count actually present.
    pub count_range: Option<(usize, usize)>,
    pub observed_mean: f64,
    pub cf_mean: f64,
    pub cf_lo: f64,
    pub cf_hi: f64,
    /// `(cf_mean - observed_mean) / observed_mean`.
    pub rel_change: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupedSummary {
    pub grid: Vec<f64>,
    pub groups: Vec<GroupSummary>,
}

impl GroupedSummary {
    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }
}

/// `points` uniform times on `[0, horizon]`.
pub fn time_grid(horizon: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|k| horizon * k as f64 / last).collect()
}

/// Right-continuous cumulative counts of sorted `times` on `grid`.
pub fn counts_on_grid(times: &[f64], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| times.partition_point(|&s| s <= t) as f64)
        .collect()
}

/// Smallest observed value `x` with empirical CDF at least `q`.
pub fn empirical_quantile(sorted: &[usize], q: f64) -> usize {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Relative difference, 0 when both are 0.
pub fn relative_change(base: f64, value: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (value - base) / base
    }
}

/// Bins `(lower, upper]` with labels, in increasing order.
fn bins(grouping: &Grouping, counts: &[usize]) -> Vec<(String, Option<usize>, Option<usize>)> {
    match grouping {
        Grouping::Tercile => {
            let mut sorted = counts.to_vec();
            sorted.sort_unstable();
            let q1 = empirical_quantile(&sorted, 1.0 / 3.0);
            let q2 = empirical_quantile(&sorted, 2.0 / 3.0);
            vec![
                ("low".into(), None, Some(q1)),
                ("medium".into(), Some(q1), Some(q2)),
                ("high".into(), Some(q2), None),
            ]
        }
        Grouping::Bins { upper } => {
            let mut out = Vec::with_capacity(upper.len() + 1);
            let mut lower = None;
            for (k, &u) in upper.iter().enumerate() {
                out.push((format!("bin{k}"), lower, Some(u)));
                lower = Some(u);
            }
            out.push((format!("bin{}", upper.len()), lower, None));
            out
        }
    }
}

/// Groups realizations by observed count and aggregates each group, with
/// bootstrap bands over realizations.
pub fn summarize(
    realizations: &[RealizationSummary],
    grouping: &Grouping,
    grid: &[f64],
    level: f64,
    n_resamples: usize,
    key: &StreamKey,
) -> Result<GroupedSummary> {
    let counts: Vec<usize> = realizations.iter().map(|r| r.observed_count).collect();
    let mut groups = Vec::new();
    for (k, (label, lower, upper)) in bins(grouping, &counts).into_iter().enumerate() {
        let members: Vec<usize> = (0..realizations.len())
            .filter(|&i| lower.is_none_or(|l| counts[i] > l) && upper.is_none_or(|u| counts[i] <= u))
            .collect();
        let rows: Vec<&RealizationSummary> = members.iter().map(|&i| &realizations[i]).collect();
        let n = rows.len() as f64;
        let count_range = members
            .iter()
            .map(|&i| counts[i])
            .fold(None, |acc: Option<(usize, usize)>, c| {
                Some(acc.map_or((c, c), |(a, b)| (a.min(c), b.max(c))))
            });
        let (mut observed_mean, mut cf_mean) = (f64::NAN, f64::NAN);
        let (mut cf_lo, mut cf_hi) = (f64::NAN, f64::NAN);
        let mut curve = Vec::new();
        if !rows.is_empty() {
            observed_mean = rows.iter().map(|r| r.observed_count as f64).sum::<f64>() / n;
            cf_mean = rows.iter().map(|r| r.cf_mean_count).sum::<f64>() / n;
            let mut columns: Vec<Vec<f64>> = (0..grid.len())
                .map(|g| rows.iter().map(|r| r.cf_curve[g]).collect())
                .collect();
            columns.push(rows.iter().map(|r| r.cf_mean_count).collect());
            let mut s = key.child(Label::Block, k as u64).stream();
            let bands = bootstrap_bands(&columns, level, n_resamples, &mut s)?;
            (cf_lo, cf_hi) = bands[grid.len()];
            for (g, &t) in grid.iter().enumerate() {
                let mean_factual = rows.iter().map(|r| r.factual_curve[g]).sum::<f64>() / n;
                let mean_cf = columns[g].iter().sum::<f64>() / n;
                curve.push(CurvePoint {
                    t,
                    mean_factual,
                    mean_cf,
                    lo: bands[g].0.min(mean_cf),
                    hi: bands[g].1.max(mean_cf),
                    rel_diff: relative_change(mean_factual, mean_cf),
                });
            }
        }
        groups.push(GroupSummary {
            label,
            lower,
            upper,
            members,
            count_range,
            observed_mean,
            cf_mean,
            cf_lo,
            cf_hi,
            rel_change: relative_change(observed_mean, cf_mean),
            curve,
        });
    }
    Ok(GroupedSummary {
        grid: grid.to_vec(),
        groups,
    })
}

/// `summary.csv`: one row per group and grid point.
pub fn write_summary_csv<W: Write>(writer: W, summary: &GroupedSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "t", "mean_factual", "mean_cf", "lo", "hi", "rel_diff"])?;
    for g in &summary.groups {
        for p in &g.curve {
            w.write_record([
                g.label.clone(),
                p.t.to_string(),
                p.mean_factual.to_string(),
                p.mean_cf.to_string(),
                p.lo.to_string(),
                p.hi.to_string(),
                p.rel_diff.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `groups.csv`: one row per group with its count range and means.
pub fn write_groups_csv<W: Write>(writer: W, summary: &GroupedSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "group",
        "lower_exclusive",
        "upper_inclusive",
        "realizations",
        "min_count",
        "max_count",
        "observed_mean",
        "cf_mean",
        "cf_lo",
        "cf_hi",
        "rel_change",
    ])?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for g in &summary.groups {
        w.write_record([
            g.label.clone(),
            opt(g.lower),
            opt(g.upper),
            g.members.len().to_string(),
            opt(g.count_range.map(|r| r.0)),
            opt(g.count_range.map(|r| r.1)),
            g.observed_mean.to_string(),
            g.cf_mean.to_string(),
            g.cf_lo.to_string(),
            g.cf_hi.to_string(),
            g.rel_change.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(count: usize, cf: f64) -> RealizationSummary {
        RealizationSummary {
            observed_count: count,
            cf_mean_count: cf,
            factual_curve: vec![0.0, count as f64],
            cf_curve: vec![0.0, cf],
            truncated: 0,
        }
    }

    #[test]
    fn quantile_rule() {
        let sorted: Vec<usize> = (1..=9).collect();
        assert_eq!(empirical_quantile(&sorted, 1.0 / 3.0), 3);
        assert_eq!(empirical_quantile(&sorted, 2.0 / 3.0), 6);
        assert_eq!(empirical_quantile(&[4], 0.5), 4);
    }

    #[test]
    fn terciles_partition_realizations() {
        let rs: Vec<_> = [5, 1, 9, 3, 3, 7, 2, 8, 6].iter().map(|&c| real(c, c as f64)).collect();
        let s = summarize(&rs, &Grouping::Tercile, &[0.0, 1.0], 0.95, 50, &StreamKey::new(1)).unwrap();
        let mut all: Vec<usize> = s.groups.iter().flat_map(|g| g.members.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        let low = s.group("low").unwrap();
        assert_eq!((low.lower, low.upper), (None, Some(3)));
        assert_eq!(low.count_range, Some((1, 3)));
        assert_eq!(low.rel_change, 0.0);
    }

    #[test]
    fn explicit_bins_and_bands_contain_mean() {
        let rs: Vec<_> = (0..30).map(|c| real(c, c as f64 * 1.5 + 1.0)).collect();
        let g = Grouping::Bins { upper: vec![9, 22] };
        let s = summarize(&rs, &g, &[0.0, 1.0], 0.95, 200, &StreamKey::new(2)).unwrap();
        assert_eq!(s.groups.len(), 3);
        assert_eq!(s.groups[0].members.len(), 10);
        assert_eq!(s.groups[2].count_range, Some((23, 29)));
        for grp in &s.groups {
            assert!(grp.cf_lo <= grp.cf_mean && grp.cf_mean <= grp.cf_hi);
            for p in &grp.curve {
                assert!(p.lo <= p.mean_cf && p.mean_cf <= p.hi);
            }
        }
    }

    #[test]
    fn grid_and_counts() {
        let grid = time_grid(4.0, 5);
        assert_eq!(grid, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(counts_on_grid(&[0.0, 1.0, 2.5], &grid), vec![1.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(relative_change(0.0, 0.0), 0.0);
        assert_eq!(relative_change(2.0, 3.0), 0.5);
    }
}
