//! Sensitivity analysis for fairness audits under target variable bias.
//!
//! The observed outcome `Y` (e.g. rearrest) is treated as a one-sided noisy
//! proxy of the true outcome `Y*` (e.g. reoffense) in one group only. Every
//! module answers the same question for a different fairness metric: how much
//! hidden-positive mass would have to exist before the audit verdict changes?
//!
//! * [`data`] ingestion, score binning and per-level contingency tables
//! * [`confusion`] observed confusion matrices and error metrics
//! * [`tvb_bounds`] sharp bounds on FPR*/FNR*/PPV* and related diagnostics
//! * [`auc`] Mann-Whitney AUC and its bounds under hidden positives
//! * [`logistic`] damped Newton logistic regression with Wald tests
//! * [`calib_logistic`] coefficient envelopes for the logistic calibration test
//! * [`calib_chisq`] chi-squared calibration test and its budgeted optimizers
//! * [`noise_est`] plug-in noise rate estimators
//! * [`sim`] synthetic generators and the signed maximal disparate impact
//! * [`report`] report assembly, plot-data tables and binomial intervals

pub mod auc;
pub mod calib_chisq;
pub mod calib_logistic;
pub mod confusion;
pub mod data;
pub mod error;
pub mod logistic;
pub mod noise_est;
pub mod report;
pub mod sim;
pub mod stats;
pub mod tvb_bounds;

pub use error::{Error, Result};

/// Number of hidden positives `⌈n·α⌉` realized on a finite sample.
///
/// A relative slack of 1e-9 keeps products such as `100 × 0.07` from rounding
/// up to the next integer.
pub fn hidden_count(n: usize, alpha: f64) -> usize {
    let x = n as f64 * alpha;
    let slack = 1e-9 * x.abs().max(1.0);
    (x - slack).ceil().max(0.0) as usize
}
