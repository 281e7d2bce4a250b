//! Covariate binning: an optional exact-zero sentinel bin plus equal-count
//! quantile bins.
//!
//! Bin indices are 1-based. When a sentinel is configured, records whose
//! covariate equals it exactly form bin 1 and the remaining records are split
//! into B − 1 contiguous equal-count groups by covariate. Tied covariates are
//! never split across a boundary: all ties stay in the lower bin, so counts
//! can deviate from equality when duplicates straddle a cut.

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Default minimum records per non-sentinel bin.
pub const DEFAULT_MIN_BIN_SIZE: usize = 50;

/// Frozen covariate partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BinLayout {
    /// Number of bins, ≥ 1.
    pub bins: usize,
    /// Ascending cut points between adjacent quantile bins (midpoints of the
    /// straddling covariate values). Length: number of quantile bins − 1.
    pub edges: Vec<f64>,
    /// Covariate value owning bin 1, when configured.
    pub zero_sentinel: Option<f64>,
    /// 1-based bin index per record, in dataset order.
    pub assignment: Vec<usize>,
    /// Records per bin.
    pub counts: Vec<usize>,
    /// Covariate range [min, max] per bin.
    pub x_range: Vec<(f64, f64)>,
    /// Minimum bin size the layout was validated against.
    pub min_bin_size: usize,
}

impl BinLayout {
    /// Trivial one-bin layout holding every record (the no-covariate model).
    pub fn single_bin(dataset: &Dataset) -> BinLayout {
        let xs = dataset.covariates();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        BinLayout {
            bins: 1,
            edges: Vec::new(),
            zero_sentinel: None,
            assignment: vec![1; dataset.len()],
            counts: vec![dataset.len()],
            x_range: vec![(lo, hi)],
            min_bin_size: 1,
        }
    }

    /// Index of the first quantile bin (2 when a sentinel bin exists).
    fn first_quantile_bin(&self) -> usize {
        if self.zero_sentinel.is_some() {
            2
        } else {
            1
        }
    }

    /// Split per-record values into per-bin vectors following the assignment.
    pub fn split<T: Copy>(&self, values: &[T]) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = self.counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (v, &b) in values.iter().zip(&self.assignment) {
            out[b - 1].push(*v);
        }
        out
    }
}

/// Build an equal-count quantile layout over the dataset's covariates.
///
/// Records equal to `zero_sentinel` (exact float equality) go to bin 1; the
/// rest are sorted by covariate (stable in input order on ties) and cut into
/// contiguous groups of near-equal size. Boundaries are pushed past runs of
/// tied covariates so assignment by value is well defined.
pub fn quantile_bins(
    dataset: &Dataset,
    bins: usize,
    zero_sentinel: Option<f64>,
    min_bin_size: usize,
) -> Result<BinLayout> {
    if bins == 0 {
        return Err(Error::config("bin count must be at least 1"));
    }
    let m = dataset.len();
    let xs = dataset.covariates();

    let (sentinel_rows, quant_rows): (Vec<usize>, Vec<usize>) = match zero_sentinel {
        Some(s) => {
            if bins < 2 {
                return Err(Error::config(
                    "a zero-sentinel bin requires at least 2 bins",
                ));
            }
            let sent: Vec<usize> = (0..m).filter(|&i| xs[i] == s).collect();
            if sent.is_empty() {
                return Err(Error::config(format!(
                    "zero-sentinel {s} matches no record"
                )));
            }
            let quant = (0..m).filter(|&i| xs[i] != s).collect();
            (sent, quant)
        }
        None => (Vec::new(), (0..m).collect()),
    };

    let n_quantile_bins = bins - usize::from(zero_sentinel.is_some());
    if n_quantile_bins > 0 && quant_rows.is_empty() {
        return Err(Error::config("no records left for the quantile bins"));
    }

    // Stable sort by covariate keeps input order within ties.
    let mut order = quant_rows;
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());

    let n = order.len();
    if n_quantile_bins * min_bin_size.max(1) > n {
        return Err(Error::config(format!(
            "cannot split {n} records into {n_quantile_bins} bins of at least {min_bin_size}"
        )));
    }

    // Equal-count targets (remainder spread over the leading bins), then push
    // each boundary past any run of ties.
    let mut boundaries = Vec::with_capacity(n_quantile_bins.saturating_sub(1));
    for k in 1..n_quantile_bins {
        let mut cut = (k * n).div_ceil(n_quantile_bins);
        while cut < n && cut > 0 && xs[order[cut]] == xs[order[cut - 1]] {
            cut += 1;
        }
        boundaries.push(cut);
    }
    // Tie runs can push a boundary onto (or past) the next one, emptying a bin.
    for w in boundaries.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::config(
                "tied covariates leave an empty quantile bin; reduce the bin count",
            ));
        }
    }
    if boundaries.last().is_some_and(|&b| b >= n) {
        return Err(Error::config(
            "tied covariates leave an empty quantile bin; reduce the bin count",
        ));
    }

    let mut assignment = vec![0usize; m];
    let first_q = 1 + usize::from(zero_sentinel.is_some());
    for &i in &sentinel_rows {
        assignment[i] = 1;
    }
    let mut edges = Vec::with_capacity(boundaries.len());
    for (g, chunk) in split_at_boundaries(&order, &boundaries)
        .into_iter()
        .enumerate()
    {
        for &i in chunk {
            assignment[i] = first_q + g;
        }
    }
    for &b in &boundaries {
        let lo = xs[order[b - 1]];
        let hi = xs[order[b]];
        let mid = lo + 0.5 * (hi - lo);
        // Adjacent floats can round the midpoint onto `hi`; fall back to `lo`
        // (an edge equal to a value keeps that value in the lower bin).
        edges.push(if mid > lo && mid < hi { mid } else { lo });
    }

    let mut counts = vec![0usize; bins];
    for &b in &assignment {
        counts[b - 1] += 1;
    }
    // Enforce the minimum on non-sentinel bins (counts can shrink below the
    // equal-count target when ties get pushed).
    for (j, &c) in counts.iter().enumerate() {
        let is_sentinel_bin = zero_sentinel.is_some() && j == 0;
        if !is_sentinel_bin && c < min_bin_size.max(1) {
            return Err(Error::config(format!(
                "bin {} holds {} records, below the minimum of {}",
                j + 1,
                c,
                min_bin_size
            )));
        }
    }

    let mut x_range = vec![(f64::INFINITY, f64::NEG_INFINITY); bins];
    for (i, &b) in assignment.iter().enumerate() {
        let r = &mut x_range[b - 1];
        r.0 = r.0.min(xs[i]);
        r.1 = r.1.max(xs[i]);
    }

    Ok(BinLayout {
        bins,
        edges,
        zero_sentinel,
        assignment,
        counts,
        x_range,
        min_bin_size,
    })
}

fn split_at_boundaries<'a>(order: &'a [usize], boundaries: &[usize]) -> Vec<&'a [usize]> {
    let mut chunks = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0;
    for &b in boundaries {
        chunks.push(&order[start..b]);
        start = b;
    }
    chunks.push(&order[start..]);
    chunks
}

/// Bin index for a covariate value against a frozen layout.
///
/// Sentinel matches map to bin 1; anything else lands in the quantile bin
/// whose edge interval contains it, with ties at an edge staying in the lower
/// bin and out-of-range values clamped to the extreme bins.
pub fn assign_bin(x: f64, layout: &BinLayout) -> Result<usize> {
    if !x.is_finite() {
        return Err(Error::input(format!("non-finite covariate: {x}")));
    }
    if let Some(s) = layout.zero_sentinel {
        if x == s {
            return Ok(1);
        }
    }
    let first_q = layout.first_quantile_bin();
    // Bin k (0-based among quantile bins) covers (edges[k−1], edges[k]].
    let offset = layout.edges.partition_point(|&e| e < x);
    Ok(first_q + offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, TestRecord};

    fn dataset_with_xs(xs: &[f64]) -> Dataset {
        let records = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| TestRecord {
                id: format!("t{i}"),
                p: 0.5,
                x,
                z: None,
            })
            .collect();
        Dataset::new(records).unwrap()
    }

    #[test]
    fn exact_division_into_deciles() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let ds = dataset_with_xs(&xs);
        let layout = quantile_bins(&ds, 10, None, 1).unwrap();
        assert_eq!(layout.counts, vec![10; 10]);
        assert_eq!(layout.edges.len(), 9);
        // x = 55 sits between the 50th (x=50..) boundary: edge 5 is (50+51)/2,
        // edge 6 is (60+61)/2, so 55 lands in bin 6.
        assert_eq!(assign_bin(55.0, &layout).unwrap(), 6);
        // Extremes clamp.
        assert_eq!(assign_bin(-100.0, &layout).unwrap(), 1);
        assert_eq!(assign_bin(1e6, &layout).unwrap(), 10);
    }

    #[test]
    fn single_bin_layout_is_degenerate() {
        let ds = dataset_with_xs(&[3.0, 1.0, 2.0]);
        let layout = quantile_bins(&ds, 1, None, 1).unwrap();
        assert_eq!(layout.assignment, vec![1, 1, 1]);
        assert_eq!(layout.counts, vec![3]);
        assert!(layout.edges.is_empty());
        let single = BinLayout::single_bin(&ds);
        assert_eq!(single.assignment, layout.assignment);
    }

    #[test]
    fn sentinel_bin_and_equal_split_of_remainder() {
        // 3 zeros plus 97 distinct nonzero values, B = 5, sentinel 0:
        // bin 1 has 3 records, the rest split 97 into {25, 24, 24, 24}.
        let mut xs = vec![0.0, 0.0, 0.0];
        xs.extend((1..=97).map(|i| i as f64 / 10.0));
        let ds = dataset_with_xs(&xs);
        let layout = quantile_bins(&ds, 5, Some(0.0), 1).unwrap();
        assert_eq!(layout.counts, vec![3, 25, 24, 24, 24]);
        assert_eq!(assign_bin(0.0, &layout).unwrap(), 1);
        assert_eq!(layout.x_range[0], (0.0, 0.0));
        // A non-sentinel value below every edge goes to the first quantile bin.
        assert_eq!(assign_bin(-5.0, &layout).unwrap(), 2);
    }

    #[test]
    fn sentinel_errors() {
        let ds = dataset_with_xs(&[1.0, 2.0, 3.0]);
        assert!(quantile_bins(&ds, 2, Some(0.0), 1).is_err());
        assert!(quantile_bins(&ds, 1, Some(1.0), 1).is_err());
    }

    #[test]
    fn min_bin_size_feasibility() {
        let xs: Vec<f64> = (0..120).map(|i| i as f64).collect();
        let ds = dataset_with_xs(&xs);
        assert!(quantile_bins(&ds, 3, None, 50).is_err());
        assert!(quantile_bins(&ds, 2, None, 50).is_ok());
    }

    #[test]
    fn ties_stay_in_lower_bin_and_assignment_matches() {
        // A run of equal covariates straddling the natural cut.
        let xs = vec![1.0, 2.0, 2.0, 2.0, 2.0, 3.0, 4.0, 5.0];
        let ds = dataset_with_xs(&xs);
        let layout = quantile_bins(&ds, 2, None, 1).unwrap();
        // Cut would fall inside the run of 2s; all 2s stay in bin 1.
        assert_eq!(layout.counts, vec![5, 3]);
        for (i, r) in ds.records().iter().enumerate() {
            assert_eq!(
                assign_bin(r.x, &layout).unwrap(),
                layout.assignment[i],
                "record {i}"
            );
        }
    }

    #[test]
    fn assignment_consistent_and_monotone_random() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, 0);
        let xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 10.0).collect();
        let ds = dataset_with_xs(&xs);
        let layout = quantile_bins(&ds, 7, None, 10).unwrap();
        assert_eq!(layout.counts.iter().sum::<usize>(), 500);
        for (i, r) in ds.records().iter().enumerate() {
            assert_eq!(assign_bin(r.x, &layout).unwrap(), layout.assignment[i]);
        }
        // Monotone in x.
        let mut sorted = xs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = 0;
        for x in sorted {
            let b = assign_bin(x, &layout).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn permuting_rows_preserves_counts() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stream_rng(5, 1);
        let xs: Vec<f64> = (0..300).map(|i| ((i * 37) % 100) as f64).collect();
        let ds = dataset_with_xs(&xs);
        let layout = quantile_bins(&ds, 5, None, 10).unwrap();

        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut rng);
        let ds2 = dataset_with_xs(&shuffled);
        let layout2 = quantile_bins(&ds2, 5, None, 10).unwrap();
        assert_eq!(layout.counts, layout2.counts);
    }

    #[test]
    fn non_finite_assign_is_input_error() {
        let ds = dataset_with_xs(&[1.0, 2.0, 3.0]);
        let layout = quantile_bins(&ds, 1, None, 1).unwrap();
        assert!(assign_bin(f64::NAN, &layout).is_err());
    }
}
