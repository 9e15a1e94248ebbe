//! Observed per-group confusion matrices and the error metrics derived
//! from them.
//!
//! Cell `p_ij` is `P(Y = i, Ŷ = j)` within one group. Metrics whose
//! denominator vanishes are `None` rather than NaN.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

/// Integer cell counts `c_ij`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub c00: u64,
    pub c01: u64,
    pub c10: u64,
    pub c11: u64,
}

impl ConfusionCounts {
    pub fn n(&self) -> u64 {
        self.c00 + self.c01 + self.c10 + self.c11
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    /// Present when the matrix was tallied from records.
    pub counts: Option<ConfusionCounts>,
}

impl GroupConfusion {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self> {
        let n = counts.n();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let n = n as f64;
        Ok(Self {
            p00: counts.c00 as f64 / n,
            p01: counts.c01 as f64 / n,
            p10: counts.c10 as f64 / n,
            p11: counts.c11 as f64 / n,
            counts: Some(counts),
        })
    }

    /// Matrix given directly as proportions; they must be nonnegative and
    /// sum to one within 1e-12.
    pub fn from_proportions(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let ps = [p00, p01, p10, p11];
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "confusion cells must be nonnegative, got {ps:?}"
            )));
        }
        let total: f64 = ps.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "confusion cells sum to {total}, not 1"
            )));
        }
        Ok(Self {
            p00,
            p01,
            p10,
            p11,
            counts: None,
        })
    }

    pub fn n(&self) -> Option<u64> {
        self.counts.map(|c| c.n())
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

/// Standard error metrics of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub prevalence: Option<f64>,
}

pub(crate) fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn metrics(cm: &GroupConfusion) -> Metrics {
    // Integer counts give the exact same quotient as the proportions would
    // only up to rounding, so prefer them when available.
    let (p00, p01, p10, p11) = match cm.counts {
        Some(c) => (c.c00 as f64, c.c01 as f64, c.c10 as f64, c.c11 as f64),
        None => (cm.p00, cm.p01, cm.p10, cm.p11),
    };
    let total = p00 + p01 + p10 + p11;
    Metrics {
        fpr: ratio(p01, p00 + p01),
        fnr: ratio(p10, p10 + p11),
        ppv: ratio(p11, p01 + p11),
        npv: ratio(p00, p00 + p10),
        prevalence: ratio(p10 + p11, total),
    }
}

/// Tally one group's confusion matrix.
///
/// With `threshold = Some(s)` the prediction is `Ŷ = 1{S > s}` for every
/// record; otherwise each record's stored `y_hat` is used.
pub fn group_confusion(d: &Dataset, group: &str, threshold: Option<f64>) -> Result<GroupConfusion> {
    let mut counts = ConfusionCounts::default();
    let mut any = false;
    for r in d.group_records(group) {
        any = true;
        let y_hat = match threshold {
            Some(s) => r.score > s,
            None => r.y_hat.ok_or(Error::NoPrediction)?,
        };
        match (r.y_obs, y_hat) {
            (false, false) => counts.c00 += 1,
            (false, true) => counts.c01 += 1,
            (true, false) => counts.c10 += 1,
            (true, true) => counts.c11 += 1,
        }
    }
    if !any {
        return Err(Error::GroupAbsent(group.to_string()));
    }
    GroupConfusion::from_counts(counts)
}
