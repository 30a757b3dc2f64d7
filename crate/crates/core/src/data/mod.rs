//! Datasets, deterministic splitting and seeded mini-batch iteration.

mod blobs;
mod csv;
mod idx;

pub use self::blobs::{gen_blobs, BlobSpec};
pub use self::csv::load_csv;
pub use self::idx::{load_idx, parse_idx};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{argument, Error, Result};
use crate::rng;

/// Features with their observed (possibly corrupted) labels and the hidden
/// ground truth kept for evaluation.
///
/// Root datasets carry ids `0..N`. Subsets produced by [`split`] keep the ids
/// of their parent in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    true_labels: Vec<usize>,
    observed_labels: Vec<usize>,
    sample_ids: Vec<usize>,
    num_classes: usize,
    corrupted: bool,
}

impl LabeledDataset {
    /// Builds an uncorrupted dataset with ids `0..N`.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = features.nrows();
        let ids = (0..n).collect();
        Self::from_parts(features, labels.clone(), labels, ids, num_classes, false)
    }

    pub(crate) fn from_parts(
        features: Array2<f64>,
        true_labels: Vec<usize>,
        observed_labels: Vec<usize>,
        sample_ids: Vec<usize>,
        num_classes: usize,
        corrupted: bool,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(argument("dataset must contain at least one sample"));
        }
        if num_classes < 2 {
            return Err(argument(format!("need at least 2 classes, got {num_classes}")));
        }
        if true_labels.len() != n || observed_labels.len() != n || sample_ids.len() != n {
            return Err(Error::Consistency(format!(
                "per-sample arrays disagree: {} feature rows, {} true labels, {} observed labels, {} ids",
                n,
                true_labels.len(),
                observed_labels.len(),
                sample_ids.len()
            )));
        }
        if let Some(&bad) = true_labels
            .iter()
            .chain(observed_labels.iter())
            .find(|&&y| y >= num_classes)
        {
            return Err(argument(format!("label {bad} outside [0, {num_classes})")));
        }
        if sample_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(argument("sample ids must be strictly increasing"));
        }
        if features.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(argument("feature values must lie in [0, 1]"));
        }
        Ok(Self {
            features,
            true_labels,
            observed_labels,
            sample_ids,
            num_classes,
            corrupted,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn observed_labels(&self) -> &[usize] {
        &self.observed_labels
    }

    pub fn sample_ids(&self) -> &[usize] {
        &self.sample_ids
    }

    /// True once label noise has been injected.
    pub fn is_corrupted(&self) -> bool {
        self.corrupted
    }

    /// Whether the sample at row `index` carries a wrong observed label.
    pub fn is_noisy(&self, index: usize) -> bool {
        self.observed_labels[index] != self.true_labels[index]
    }

    pub fn noisy_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_noisy(i)).count()
    }

    /// Row position of a sample id.
    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.sample_ids.binary_search(&id).ok()
    }

    pub(crate) fn with_observed_labels(&self, observed: Vec<usize>) -> Result<Self> {
        Self::from_parts(
            self.features.clone(),
            self.true_labels.clone(),
            observed,
            self.sample_ids.clone(),
            self.num_classes,
            true,
        )
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(argument("cannot truncate a dataset to zero samples"));
        }
        if n >= self.len() {
            return Ok(self.clone());
        }
        let rows: Vec<usize> = (0..n).collect();
        self.select_rows(&rows, self.corrupted)
    }

    fn select_rows(&self, rows: &[usize], corrupted: bool) -> Result<Self> {
        Self::from_parts(
            self.features.select(Axis(0), rows),
            rows.iter().map(|&r| self.true_labels[r]).collect(),
            rows.iter().map(|&r| self.observed_labels[r]).collect(),
            rows.iter().map(|&r| self.sample_ids[r]).collect(),
            self.num_classes,
            corrupted,
        )
    }

    /// Observed and true labels per sample, as audit CSV.
    pub fn write_label_audit<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = ::csv::Writer::from_writer(out);
        let csv_err = |e: ::csv::Error| Error::Format(format!("writing label audit: {e}"));
        writer
            .write_record(["id", "true_label", "observed_label"])
            .map_err(csv_err)?;
        for i in 0..self.len() {
            writer
                .write_record([
                    self.sample_ids[i].to_string(),
                    self.true_labels[i].to_string(),
                    self.observed_labels[i].to_string(),
                ])
                .map_err(csv_err)?;
        }
        writer
            .flush()
            .map_err(|e| Error::Format(format!("writing label audit: {e}")))?;
        Ok(())
    }
}

/// Seeded train/test split. The test part is returned with its true labels as
/// the observed labels, so it can never carry label noise.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(argument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(argument(format!(
            "test fraction {test_fraction} of {n} samples leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::SPLIT, 0));
    let mut test_rows = order[..n_test].to_vec();
    let mut train_rows = order[n_test..].to_vec();
    test_rows.sort_unstable();
    train_rows.sort_unstable();

    let train = dataset.select_rows(&train_rows, dataset.corrupted)?;
    let test = dataset.select_rows(&test_rows, false)?;
    let test = LabeledDataset {
        observed_labels: test.true_labels.clone(),
        ..test
    };
    Ok((train, test))
}

/// One mini-batch, materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub sample_ids: Vec<usize>,
    /// Row positions in the parent dataset.
    pub rows: Vec<usize>,
    pub features: Array2<f64>,
    pub observed_labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A batch made of every row of `dataset`, in order.
    pub fn whole(dataset: &LabeledDataset) -> Self {
        let rows: Vec<usize> = (0..dataset.len()).collect();
        Self::gather(dataset, rows)
    }

    pub(crate) fn gather(dataset: &LabeledDataset, rows: Vec<usize>) -> Self {
        Batch {
            sample_ids: rows.iter().map(|&r| dataset.sample_ids[r]).collect(),
            features: dataset.features.select(Axis(0), &rows),
            observed_labels: rows.iter().map(|&r| dataset.observed_labels[r]).collect(),
            rows,
        }
    }
}

/// Row order for one epoch, cut into `floor(N / batch_size)` full batches.
pub fn batch_plan(
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(argument("batch size must be positive"));
    }
    if batch_size > n {
        return Err(argument(format!(
            "batch size {batch_size} exceeds dataset size {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::SHUFFLE, epoch as u64));
    Ok(order
        .chunks_exact(batch_size)
        .map(|chunk| chunk.to_vec())
        .collect())
}

/// Mini-batches of one epoch. The trailing partial batch is dropped.
pub fn batches<'a>(
    dataset: &'a LabeledDataset,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<impl ExactSizeIterator<Item = Batch> + 'a> {
    let plan = batch_plan(dataset.len(), batch_size, seed, epoch)?;
    Ok(plan.into_iter().map(move |rows| Batch::gather(dataset, rows)))
}
