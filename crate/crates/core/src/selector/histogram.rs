//! H-bin histograms over [-1, 1] and the sliding window that feeds them.
//!
//! Bin `x` (1-based) covers the half-open range `(2(x-1)/H - 1, 2x/H - 1]`;
//! the single point `-1` is folded into bin 1.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{argument, state, Result};

/// Lower edge `2(x-1)/H - 1` of bin `x`.
pub fn bin_lower_edge(x: usize, bins: usize) -> Result<f64> {
    if bins == 0 || x == 0 || x > bins {
        return Err(argument(format!("bin {x} outside [1, {bins}]")));
    }
    Ok(lower_edge(x, bins))
}

pub(crate) fn lower_edge(x: usize, bins: usize) -> f64 {
    2.0 * (x - 1) as f64 / bins as f64 - 1.0
}

pub(crate) fn upper_edge(x: usize, bins: usize) -> f64 {
    2.0 * x as f64 / bins as f64 - 1.0
}

/// Bin index `ceil(H (delta + 1) / 2)`, clamped to 1 at `delta = -1`.
///
/// The result is reconciled against the floating-point edges returned by
/// [`bin_lower_edge`], so that `bin_of(d) >= x` holds exactly when
/// `d > bin_lower_edge(x)`. Decimal inputs such as `0.1` therefore land in the
/// bin their decimal value belongs to.
pub fn bin_of(delta: f64, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(argument("histogram needs at least one bin"));
    }
    if !(-1.0..=1.0).contains(&delta) {
        return Err(argument(format!("value {delta} outside [-1, 1]")));
    }
    Ok(bin_unchecked(delta, bins))
}

pub(crate) fn bin_unchecked(delta: f64, bins: usize) -> usize {
    let raw = (bins as f64 * (delta + 1.0) / 2.0).ceil();
    let mut x = (raw as usize).clamp(1, bins);
    while x > 1 && delta <= lower_edge(x, bins) {
        x -= 1;
    }
    while x < bins && delta > lower_edge(x + 1, bins) {
        x += 1;
    }
    x
}

fn check_values(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        Some(bad) => Err(argument(format!("value {bad} outside [-1, 1]"))),
        None => Ok(()),
    }
}

/// Per-bin mass `count[x] / total`.
fn pdf_of(counts: &[u64], total: u64) -> Result<Vec<f64>> {
    if total == 0 {
        return Err(state("histogram is empty"));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Cumulative mass, computed from integer running counts so the last entry
/// is exactly 1.
fn pcf_of(counts: &[u64], total: u64) -> Result<Vec<f64>> {
    if total == 0 {
        return Err(state("histogram is empty"));
    }
    let mut running = 0u64;
    Ok(counts
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / total as f64
        })
        .collect())
}

/// Ring buffer of the most recent per-sample values, with an incrementally
/// maintained histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffWindow {
    capacity: usize,
    values: VecDeque<f64>,
    counts: Vec<u64>,
}

impl DiffWindow {
    pub fn new(capacity: usize, bins: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(argument("window capacity must be positive"));
        }
        if bins < 2 {
            return Err(argument(format!("need at least 2 bins, got {bins}")));
        }
        Ok(DiffWindow {
            capacity,
            values: VecDeque::with_capacity(capacity),
            counts: vec![0; bins],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    /// Counts per bin; index 0 holds bin 1.
    pub fn bin_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Buffered values, oldest first.
    pub fn values(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    /// Appends values, evicting the oldest entries beyond capacity. Either
    /// every value is accepted or none is.
    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        check_values(values)?;
        let bins = self.bins();
        for &v in values {
            if self.values.len() == self.capacity {
                let old = self.values.pop_front().expect("full window is non-empty");
                self.counts[bin_unchecked(old, bins) - 1] -= 1;
            }
            self.values.push_back(v);
            self.counts[bin_unchecked(v, bins) - 1] += 1;
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.counts.fill(0);
    }

    pub fn pdf(&self) -> Result<Vec<f64>> {
        pdf_of(&self.counts, self.total() as u64)
    }

    pub fn pcf(&self) -> Result<Vec<f64>> {
        pcf_of(&self.counts, self.total() as u64)
    }

    /// Fraction of buffered values strictly below zero.
    pub fn negative_fraction(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(state("window is empty"));
        }
        let negative = self.values.iter().filter(|&&v| v < 0.0).count();
        Ok(negative as f64 / self.total() as f64)
    }
}

/// Histogram of a full pass over a dataset, split by ground truth so that
/// `all = clean + noise` bin by bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledHistogram {
    pub bins: usize,
    pub all: Vec<u64>,
    pub clean: Vec<u64>,
    pub noise: Vec<u64>,
}

impl LabeledHistogram {
    pub fn build(values: &[f64], noisy: &[bool], bins: usize) -> Result<Self> {
        if values.len() != noisy.len() {
            return Err(argument("values and noise flags differ in length"));
        }
        if bins < 2 {
            return Err(argument(format!("need at least 2 bins, got {bins}")));
        }
        check_values(values)?;
        let mut hist = LabeledHistogram {
            bins,
            all: vec![0; bins],
            clean: vec![0; bins],
            noise: vec![0; bins],
        };
        for (&v, &is_noisy) in values.iter().zip(noisy) {
            let x = bin_unchecked(v, bins) - 1;
            hist.all[x] += 1;
            if is_noisy {
                hist.noise[x] += 1;
            } else {
                hist.clean[x] += 1;
            }
        }
        Ok(hist)
    }

    pub fn total(&self) -> u64 {
        self.all.iter().sum()
    }

    pub fn pdf(&self) -> Result<Vec<f64>> {
        pdf_of(&self.all, self.total())
    }

    pub fn pcf(&self) -> Result<Vec<f64>> {
        pcf_of(&self.all, self.total())
    }

    /// Clean and noisy mass per bin, both normalized by the total count.
    pub fn split_pdf(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let total = self.total();
        Ok((pdf_of(&self.clean, total)?, pdf_of(&self.noise, total)?))
    }

    /// CSV with columns `bin,lower_edge,upper_edge,pdf_all,pdf_clean,pdf_noise`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let fmt_err = |e: ::csv::Error| crate::Error::Format(format!("writing histogram: {e}"));
        let pdf = self.pdf()?;
        let (clean, noise) = self.split_pdf()?;
        let mut writer = ::csv::Writer::from_writer(out);
        writer
            .write_record(["bin", "lower_edge", "upper_edge", "pdf_all", "pdf_clean", "pdf_noise"])
            .map_err(fmt_err)?;
        for x in 1..=self.bins {
            writer
                .write_record([
                    x.to_string(),
                    lower_edge(x, self.bins).to_string(),
                    upper_edge(x, self.bins).to_string(),
                    pdf[x - 1].to_string(),
                    clean[x - 1].to_string(),
                    noise[x - 1].to_string(),
                ])
                .map_err(fmt_err)?;
        }
        writer
            .flush()
            .map_err(|e| crate::Error::Format(format!("writing histogram: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rebuild(window: &DiffWindow) -> Vec<u64> {
        let mut counts = vec![0; window.bins()];
        for v in window.values() {
            // Linear scan over the upper edges, independent of bin_of.
            let x = (1..=window.bins())
                .find(|&x| v <= upper_edge(x, window.bins()))
                .unwrap();
            counts[x - 1] += 1;
        }
        counts
    }

    #[test]
    fn bin_examples() {
        assert_eq!(bin_of(1.0, 200).unwrap(), 200);
        assert_eq!(bin_of(-1.0, 200).unwrap(), 1);
        assert_eq!(bin_of(-0.6, 200).unwrap(), 40);
        assert_eq!(bin_of(0.1, 200).unwrap(), 110);
        assert_eq!(bin_of(0.0, 200).unwrap(), 100);
        assert!(bin_of(1.5, 200).is_err());
        assert!(bin_of(f64::NAN, 200).is_err());
    }

    #[test]
    fn edge_examples() {
        assert_eq!(bin_lower_edge(1, 200).unwrap(), -1.0);
        assert!((bin_lower_edge(200, 200).unwrap() - (1.0 - 2.0 / 200.0)).abs() < 1e-12);
        assert!((bin_lower_edge(100, 200).unwrap() + 0.01).abs() < 1e-12);
        assert!(bin_lower_edge(0, 200).is_err());
        assert!(bin_lower_edge(201, 200).is_err());
    }

    #[test]
    fn fifo_eviction() {
        let mut w = DiffWindow::new(4, 8).unwrap();
        w.push(&[-0.9, -0.5, 0.1]).unwrap();
        assert_eq!(w.total(), 3);
        assert_eq!(w.bin_counts().iter().sum::<u64>(), 3);
        w.push(&[0.3, 0.6, 0.95]).unwrap();
        assert_eq!(w.values().collect::<Vec<_>>(), vec![0.1, 0.3, 0.6, 0.95]);
        assert_eq!(w.bin_counts(), rebuild(&w).as_slice());
    }

    #[test]
    fn invalid_push_changes_nothing() {
        let mut w = DiffWindow::new(4, 8).unwrap();
        w.push(&[0.2]).unwrap();
        assert!(w.push(&[0.1, 1.2]).is_err());
        assert_eq!(w.total(), 1);
    }

    #[test]
    fn pdf_and_pcf_shapes() {
        let mut w = DiffWindow::new(10, 8).unwrap();
        assert!(w.pdf().is_err());
        w.push(&[0.3, 0.3, 0.3]).unwrap();
        let b = bin_of(0.3, 8).unwrap();
        let pdf = w.pdf().unwrap();
        let pcf = w.pcf().unwrap();
        for x in 1..=8 {
            assert_eq!(pdf[x - 1], if x == b { 1.0 } else { 0.0 });
            assert_eq!(pcf[x - 1], if x >= b { 1.0 } else { 0.0 });
        }
        w.clear();
        w.push(&[-0.9, -0.4, 0.1, 0.9]).unwrap();
        let pdf = w.pdf().unwrap();
        assert_eq!(pdf.iter().filter(|&&p| p == 0.25).count(), 4);
    }

    proptest! {
        #[test]
        fn incremental_counts_match_rebuild(
            pushes in prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, 0..20), 1..30),
            capacity in 1usize..60,
            bins in prop::sample::select(vec![2usize, 4, 8, 200]),
        ) {
            let mut w = DiffWindow::new(capacity, bins).unwrap();
            for batch in &pushes {
                w.push(batch).unwrap();
                let expected = rebuild(&w);
                prop_assert_eq!(w.bin_counts(), expected.as_slice());
                prop_assert_eq!(w.bin_counts().iter().sum::<u64>() as usize, w.total());
                prop_assert!(w.total() <= capacity);
                if !w.is_empty() {
                    let pcf = w.pcf().unwrap();
                    prop_assert!((pcf[bins - 1] - 1.0).abs() <= 1e-9);
                    prop_assert!(pcf.windows(2).all(|p| p[0] <= p[1]));
                }
            }
            let all: Vec<f64> = pushes.concat();
            let tail = &all[all.len().saturating_sub(capacity)..];
            prop_assert_eq!(w.values().collect::<Vec<_>>(), tail.to_vec());
        }

        #[test]
        fn bin_of_agrees_with_edges(delta in -1.0f64..=1.0, bins in 2usize..300) {
            let x = bin_of(delta, bins).unwrap();
            prop_assert!(x >= 1 && x <= bins);
            if x > 1 {
                prop_assert!(delta > lower_edge(x, bins));
            }
            if x < bins {
                prop_assert!(delta <= lower_edge(x + 1, bins));
            }
        }

        #[test]
        fn labeled_histogram_is_additive(
            values in prop::collection::vec((-1.0f64..=1.0, any::<bool>()), 1..200),
        ) {
            let (v, flags): (Vec<f64>, Vec<bool>) = values.into_iter().unzip();
            let h = LabeledHistogram::build(&v, &flags, 200).unwrap();
            for x in 0..200 {
                prop_assert_eq!(h.all[x], h.clean[x] + h.noise[x]);
            }
            let mut w = DiffWindow::new(v.len(), 200).unwrap();
            w.push(&v).unwrap();
            prop_assert_eq!(w.bin_counts(), h.all.as_slice());
        }
    }
}
