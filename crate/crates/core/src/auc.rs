//! Mann-Whitney AUC with midranks, its sharp bounds when `k` observed
//! negatives are hidden positives, and the label-dependent AUC identity.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{hidden_count, Error, Result};

/// Pooled midranks and class sizes for one score/label sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub n0: usize,
    pub n1: usize,
    /// 1-based midrank of each record, in input order.
    pub ranks: Vec<f64>,
    /// Sum of ranks over observed positives.
    pub r1: f64,
    /// Observed negatives ordered by ascending rank, ties by input index.
    neg_by_rank: Vec<usize>,
}

/// Midranks (average rank within ties), 1-based.
pub fn midranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i+1..=j share the average rank
        let r = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = r;
        }
        i = j;
    }
    ranks
}

impl RankSummary {
    pub fn new(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite score {s}")));
        }
        let n1 = labels.iter().filter(|&&y| y).count();
        let n0 = labels.len() - n1;
        if n0 == 0 || n1 == 0 {
            return Err(Error::Degenerate("AUC needs both observed outcomes".into()));
        }
        let ranks = midranks(scores);
        let r1 = ranks
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y)
            .map(|(r, _)| r)
            .sum();
        let mut neg_by_rank: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        neg_by_rank.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
        Ok(Self {
            n0,
            n1,
            ranks,
            r1,
            neg_by_rank,
        })
    }

    pub fn auc(&self) -> f64 {
        let (n0, n1) = (self.n0 as f64, self.n1 as f64);
        (self.r1 - n1 * (n1 + 1.0) / 2.0) / (n1 * n0)
    }

    /// Indices of the `k` lowest-ranked observed negatives.
    pub fn lowest_negatives(&self, k: usize) -> Vec<usize> {
        self.neg_by_rank.iter().take(k).copied().collect()
    }

    /// Indices of the `k` highest-ranked observed negatives, ties broken
    /// toward the smaller input index.
    pub fn highest_negatives(&self, k: usize) -> Vec<usize> {
        let mut v = self.neg_by_rank.clone();
        v.sort_by(|&a, &b| self.ranks[b].total_cmp(&self.ranks[a]).then(a.cmp(&b)));
        v.truncate(k);
        v
    }

    /// AUC after relabeling the given observed negatives as positives.
    fn auc_after(&self, flipped: &[usize]) -> f64 {
        let k = flipped.len();
        let n1 = (self.n1 + k) as f64;
        let n0 = (self.n0 - k) as f64;
        let extra: f64 = flipped.iter().map(|&i| self.ranks[i]).sum();
        let beta = n1 * (n1 + 1.0) / 2.0;
        (self.r1 + extra - beta) / (n0 * n1)
    }
}

pub fn observed_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(RankSummary::new(scores, labels)?.auc())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucBounds {
    pub k: usize,
    pub observed: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Range of the AUC once `k` observed negatives are relabeled positive.
///
/// The lower end flips the `k` lowest-scored negatives and the upper end the
/// `k` highest-scored ones; pooled ranks are unaffected by relabeling.
pub fn auc_bounds(scores: &[f64], labels: &[bool], k: usize) -> Result<AucBounds> {
    let rs = RankSummary::new(scores, labels)?;
    let limit = rs.n0.min(rs.n1);
    if k >= limit {
        return Err(Error::InvalidParameter(format!(
            "k = {k} hidden positives must be below min(n0, n1) = {limit}"
        )));
    }
    Ok(AucBounds {
        k,
        observed: rs.auc(),
        lower: rs.auc_after(&rs.lowest_negatives(k)),
        upper: rs.auc_after(&rs.highest_negatives(k)),
    })
}

/// [`auc_bounds`] with `k = ⌈n·α⌉`.
pub fn auc_bounds_alpha(scores: &[f64], labels: &[bool], alpha: f64) -> Result<AucBounds> {
    auc_bounds(scores, labels, hidden_count(scores.len(), alpha))
}

/// `AUC* = (AUC − ρ/2)/(1 − ρ)` under label-dependent noise.
pub fn auc_label_dependent(auc_obs: f64, rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    Ok((auc_obs - rho / 2.0) / (1.0 - rho))
}

/// Scores and observed labels of one group, in input order.
pub fn group_sample(d: &Dataset, group: &str) -> (Vec<f64>, Vec<bool>) {
    d.group_records(group).map(|r| (r.score, r.y_obs)).unzip()
}
