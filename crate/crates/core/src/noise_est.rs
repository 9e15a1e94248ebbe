//! Plug-in estimates of the noise rate `γ = P(Y=0 | Y*=1)` and the inverse
//! noise rate `ρ = P(Y*=1 | Y=0)` from predicted probabilities
//! `m(x) = P(Y=1 | x)` of any scorer.
//!
//! Under one-sided label-dependent noise `m(x) = (1 − γ)·P(Y*=1 | x)`, so
//! wherever the true outcome is certain the scorer reads off `1 − γ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::logistic::{fit_logistic, sigmoid, Design, NewtonOptions};
use crate::stats::quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Observed positives are certain true positives: `γ = 1 − mean m(x)`
    /// over records with `y = 1`.
    StrongSep,
    /// Some region has `P(Y*=1 | x) = 1`: `γ = 1 − q-quantile of m(x)`.
    WeakSepSup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub group: String,
    pub estimator: Estimator,
    pub gamma: f64,
    pub rho: f64,
    /// Observed positive rate `E[Y]` of the group.
    pub mean_y: f64,
    /// Quantile of the weak estimator; `None` for the strong one.
    pub q: Option<f64>,
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter("no predicted probabilities".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

fn gamma_from_level(level: f64) -> Result<f64> {
    let gamma = 1.0 - level;
    if gamma >= 1.0 {
        return Err(Error::Degenerate(
            "predicted probabilities are all zero, so the noise rate would be 1".into(),
        ));
    }
    Ok(gamma.max(0.0))
}

/// `γ̂ = 1 − mean m(x)` over observed positives.
pub fn estimate_strong_sep(probs_on_positives: &[f64]) -> Result<f64> {
    check_probs(probs_on_positives)?;
    let mean = probs_on_positives.iter().sum::<f64>() / probs_on_positives.len() as f64;
    gamma_from_level(mean)
}

/// `γ̂ = 1 − Q_q(m(x))`; `q = 1` takes the maximum.
pub fn estimate_weak_sep(probs: &[f64], q: f64) -> Result<f64> {
    check_probs(probs)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile must lie in (0, 1], got {q}"
        )));
    }
    gamma_from_level(quantile(probs, q).expect("nonempty"))
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1), got {v}"
        )));
    }
    Ok(())
}

fn check_mean_y(ey: f64) -> Result<()> {
    if !(ey > 0.0 && ey < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "E[Y] must lie in (0, 1), got {ey}"
        )));
    }
    Ok(())
}

/// `ρ = (γ/(1−γ)) · (E[Y]/(1−E[Y]))`.
pub fn gamma_to_rho(gamma: f64, mean_y: f64) -> Result<f64> {
    check_unit("gamma", gamma)?;
    check_mean_y(mean_y)?;
    Ok(gamma / (1.0 - gamma) * mean_y / (1.0 - mean_y))
}

/// Inverse of [`gamma_to_rho`].
pub fn rho_to_gamma(rho: f64, mean_y: f64) -> Result<f64> {
    check_unit("rho", rho)?;
    check_mean_y(mean_y)?;
    let r = rho * (1.0 - mean_y) / mean_y;
    Ok(r / (1.0 + r))
}

/// Apply `estimator` within each group. `probs` is aligned with the records.
pub fn estimate_per_group(
    d: &Dataset,
    probs: &[f64],
    estimator: Estimator,
    q: f64,
) -> Result<BTreeMap<String, NoiseEstimate>> {
    if probs.len() != d.len() {
        return Err(Error::InvalidParameter(format!(
            "{} probabilities for {} records",
            probs.len(),
            d.len()
        )));
    }
    let mut out = BTreeMap::new();
    for group in [d.noisy_group(), d.baseline_group()] {
        let members: Vec<(bool, f64)> = d
            .records()
            .iter()
            .zip(probs)
            .filter(|(r, _)| r.group == group)
            .map(|(r, &p)| (r.y_obs, p))
            .collect();
        let mean_y = members.iter().filter(|(y, _)| *y).count() as f64 / members.len() as f64;
        let gamma = match estimator {
            Estimator::StrongSep => {
                let pos: Vec<f64> = members
                    .iter()
                    .filter(|(y, _)| *y)
                    .map(|(_, p)| *p)
                    .collect();
                if pos.is_empty() {
                    return Err(Error::Degenerate(format!(
                        "group `{group}` has no observed positives"
                    )));
                }
                estimate_strong_sep(&pos)?
            }
            Estimator::WeakSepSup => {
                let all: Vec<f64> = members.iter().map(|(_, p)| *p).collect();
                estimate_weak_sep(&all, q)?
            }
        };
        out.insert(
            group.to_string(),
            NoiseEstimate {
                group: group.to_string(),
                estimator,
                gamma,
                rho: gamma_to_rho(gamma, mean_y)?,
                mean_y,
                q: (estimator == Estimator::WeakSepSup).then_some(q),
            },
        );
    }
    Ok(out)
}

/// Built-in scorer: a logistic regression of `y_obs` on the dataset's
/// feature columns fitted separately per group, or on the score when the
/// dataset has no features. Returns `m(x)` per record.
pub fn logistic_scores(d: &Dataset) -> Result<Vec<f64>> {
    let use_score = d.feature_names().is_empty();
    let row_of = |r: &crate::data::LabeledRecord| -> Vec<f64> {
        let mut row = vec![1.0];
        if use_score {
            row.push(r.score);
        } else {
            row.extend_from_slice(&r.features);
        }
        row
    };
    let cols = if use_score {
        2
    } else {
        1 + d.feature_names().len()
    };
    let mut probs = vec![0.0; d.len()];
    for group in [d.noisy_group(), d.baseline_group()] {
        let idx: Vec<usize> = (0..d.len())
            .filter(|&i| d.records()[i].group == group)
            .collect();
        let mut x = Design::with_capacity(cols, idx.len());
        let mut y = Vec::with_capacity(idx.len());
        for &i in &idx {
            x.push_row(&row_of(&d.records()[i]));
            y.push(d.records()[i].y_obs);
        }
        let fit = fit_logistic(&x, &y, None, &NewtonOptions::default())?;
        for (j, &i) in idx.iter().enumerate() {
            probs[i] = sigmoid(x.row(j).iter().zip(&fit.beta).map(|(a, b)| a * b).sum());
        }
    }
    Ok(probs)
}
