//! Probability-difference sample selection.
//!
//! Each sample's statistic (by default `delta = p_y - max_{m != y} p_m`) is
//! pushed into a FIFO window covering the last `M * Iter_epoch` mini-batches.
//! The window's H-bin histogram stands in for the distribution over the whole
//! training set. Samples whose statistic is not above the lower edge of the
//! first bin where the cumulative mass exceeds the current drop rate get
//! weight zero.
//!
//! Without a known noise rate the threshold ramps from -1 to 0 over `T_k`
//! epochs. After that, once the window's mean absolute bin edge (zeta) exceeds
//! its threshold, the fraction of negative deltas is taken as the noise rate
//! and selection switches to the histogram rule.

mod histogram;
mod stat;
mod state;
mod threshold;

pub use self::histogram::{bin_lower_edge, bin_of, DiffWindow, LabeledHistogram};
pub use self::stat::{prob_diff, Statistic};
pub use self::state::{maybe_estimate_tau, Phase, Selector, SelectorConfig, SelectorState, TauSource};
pub use self::threshold::{
    drop_rate, threshold_with_tau, threshold_without_tau, weights, zeta, Threshold,
};

pub(crate) use self::threshold::threshold_bin;
