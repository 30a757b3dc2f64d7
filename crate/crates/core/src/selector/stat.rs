use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// `p_y - max_{m != y} p_m`.
pub fn prob_diff(probs: &[f64], y: usize) -> Result<f64> {
    if probs.len() < 2 {
        return Err(argument("probability difference needs at least 2 classes"));
    }
    if y >= probs.len() {
        return Err(argument(format!("label {y} outside [0, {})", probs.len())));
    }
    let runner_up = probs
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != y)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((probs[y] - runner_up).clamp(-1.0, 1.0))
}

/// Per-sample statistic the selector histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Probability difference, in [-1, 1].
    #[default]
    ProbDiff,
    /// Probability of the observed label, mapped onto [-1, 1] as `2 p_y - 1`
    /// so that bin `ceil(H (s + 1) / 2)` equals `ceil(H p_y)`.
    TrueClassProb,
}

impl Statistic {
    pub fn score(self, probs: &[f64], y: usize) -> Result<f64> {
        match self {
            Statistic::ProbDiff => prob_diff(probs, y),
            Statistic::TrueClassProb => {
                let p = *probs
                    .get(y)
                    .ok_or_else(|| argument(format!("label {y} outside [0, {})", probs.len())))?;
                Ok((2.0 * p - 1.0).clamp(-1.0, 1.0))
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::ProbDiff => "delta",
            Statistic::TrueClassProb => "py",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" | "prob_diff" => Ok(Statistic::ProbDiff),
            "py" | "p_y" => Ok(Statistic::TrueClassProb),
            other => Err(argument(format!("unknown statistic '{other}' (expected delta or py)"))),
        }
    }
}
