use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{argument, Result};
use crate::rng;

/// Isotropic Gaussian clusters, one per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    /// Centers are drawn uniformly from `[-center_spread, center_spread]^dim`.
    pub center_spread: f64,
    pub cluster_std: f64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(argument("blobs need at least 2 classes"));
        }
        if self.dim == 0 || self.samples_per_class == 0 {
            return Err(argument("blobs need dim >= 1 and samples_per_class >= 1"));
        }
        if !(self.center_spread > 0.0 && self.center_spread.is_finite()) {
            return Err(argument("center_spread must be positive"));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return Err(argument("cluster_std must be positive"));
        }
        Ok(())
    }
}

/// Generates `num_classes * samples_per_class` samples, class-major.
///
/// The raw cloud is mapped to [0, 1] by the fixed affine map that sends
/// `[-(spread + 4 std), spread + 4 std]` onto the unit interval; the rare
/// points beyond four standard deviations are clamped.
pub fn gen_blobs(spec: &BlobSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut centers_rng = rng::stream(seed, rng::BLOBS, 0);
    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| centers_rng.random_range(-spec.center_spread..=spec.center_spread))
                .collect()
        })
        .collect();

    let noise = Normal::new(0.0, spec.cluster_std).map_err(|e| argument(e.to_string()))?;
    let mut sample_rng = rng::stream(seed, rng::BLOBS, 1);
    let half_width = spec.center_spread + 4.0 * spec.cluster_std;
    let n = spec.num_classes * spec.samples_per_class;
    let mut features = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for k in 0..spec.samples_per_class {
            let row = class * spec.samples_per_class + k;
            for (d, &c) in center.iter().enumerate() {
                let raw = c + noise.sample(&mut sample_rng);
                features[[row, d]] = ((raw + half_width) / (2.0 * half_width)).clamp(0.0, 1.0);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, spec.num_classes)
}
