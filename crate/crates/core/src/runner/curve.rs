use std::io::Write;

use serde::Serialize;

use super::config::{Mode, RunConfig};
use super::engine::{prepare_data, Engine};
use crate::error::{argument, Error, Result};
use crate::selector::{threshold_bin, LabeledHistogram, Statistic};

/// Drop rates probed by [`drop_curve`]: 0.05, 0.10, ..., 0.95.
pub fn probe_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub drop_rate: f64,
    /// Share of the training set actually dropped after bin quantization.
    pub dropped_fraction: f64,
    /// Share of the dropped samples that are truly noisy.
    pub real_noise_rate: f64,
}

/// Drops the bins strictly below the rate's threshold bin (everything for
/// `rate >= 1`) and scores what was dropped.
pub fn drop_point(hist: &LabeledHistogram, rate: f64) -> Result<CurvePoint> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(argument(format!("drop rate must lie in [0, 1], got {rate}")));
    }
    let total = hist.total();
    if total == 0 {
        return Err(argument("cannot probe an empty histogram"));
    }
    let below = if rate >= 1.0 {
        hist.bins
    } else {
        threshold_bin(&hist.all, rate)?.expect("non-empty histogram") - 1
    };
    let dropped: u64 = hist.all[..below].iter().sum();
    let noisy: u64 = hist.noise[..below].iter().sum();
    Ok(CurvePoint {
        drop_rate: rate,
        dropped_fraction: dropped as f64 / total as f64,
        real_noise_rate: if dropped == 0 { 0.0 } else { noisy as f64 / dropped as f64 },
    })
}

pub fn curve_from_histogram(hist: &LabeledHistogram) -> Result<Vec<CurvePoint>> {
    probe_grid().into_iter().map(|r| drop_point(hist, r)).collect()
}

/// Histograms of the requested statistics over the training set, taken at
/// the first iteration of `probe_epoch` of ordinary training (i.e. after
/// `probe_epoch - 1` full epochs).
pub fn probe_histograms(
    config: &RunConfig,
    probe_epoch: usize,
    statistics: &[Statistic],
) -> Result<Vec<LabeledHistogram>> {
    if probe_epoch == 0 {
        return Err(argument("probe epoch must be >= 1"));
    }
    let mut probe = config.clone();
    probe.mode = Mode::Normal;
    probe.selector.tau = None;
    probe.train.epochs = probe.train.epochs.max(probe_epoch);
    probe.output.snapshot_epochs.clear();
    let (train, test) = prepare_data(&probe)?;
    let mut engine = Engine::new(probe, train, test)?;
    for _ in 1..probe_epoch {
        engine.run_epoch()?;
    }
    statistics.iter().map(|&s| engine.snapshot(s)).collect()
}

/// Drop-rate curve for one statistic.
pub fn drop_curve(config: &RunConfig, probe_epoch: usize, statistic: Statistic) -> Result<Vec<CurvePoint>> {
    let hist = probe_histograms(config, probe_epoch, &[statistic])?;
    curve_from_histogram(&hist[0])
}

/// CSV with columns `drop_rate,dropped_fraction,real_noise_rate`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let err = |e: ::csv::Error| Error::Format(format!("writing drop curve: {e}"));
    let mut writer = ::csv::Writer::from_writer(out);
    for p in points {
        writer.serialize(p).map_err(err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Format(format!("writing drop curve: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_nineteen_points() {
        let g = probe_grid();
        assert_eq!(g.len(), 19);
        assert!((g[0] - 0.05).abs() < 1e-12 && (g[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn dropping_everything_gives_the_overall_rate() {
        let values = [-0.5, -0.2, 0.1, 0.3, 0.6, 0.9];
        let noisy = [true, false, true, false, false, false];
        let hist = LabeledHistogram::build(&values, &noisy, 200).unwrap();
        let p = drop_point(&hist, 1.0).unwrap();
        assert_eq!(p.dropped_fraction, 1.0);
        assert!((p.real_noise_rate - 2.0 / 6.0).abs() < 1e-12);
        // Lowest half: the three smallest, two of which are noisy.
        let p = drop_point(&hist, 0.5).unwrap();
        assert_eq!(p.dropped_fraction, 0.5);
        assert!((p.real_noise_rate - 2.0 / 3.0).abs() < 1e-12);
        assert!(drop_point(&hist, 1.5).is_err());
    }

    #[test]
    fn clean_histogram_has_zero_noise_everywhere() {
        let values: Vec<f64> = (0..50).map(|i| i as f64 / 50.0 - 0.5).collect();
        let hist = LabeledHistogram::build(&values, &[false; 50], 200).unwrap();
        for p in curve_from_histogram(&hist).unwrap() {
            assert_eq!(p.real_noise_rate, 0.0);
            assert!(p.dropped_fraction <= p.drop_rate + 1e-12);
        }
    }
}
