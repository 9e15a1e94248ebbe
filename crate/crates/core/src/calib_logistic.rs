//! Logistic calibration test `Y ~ 1 + S + 1{A = noisy}` and its sensitivity
//! to hidden positives in the noisy group.
//!
//! For a fixed hidden mass the extreme race coefficients arise when the
//! hidden positives are the noisy-group negatives with the highest or the
//! lowest scores. That ordering argument needs `condition3 ≥ 0` at the
//! fitted coefficients, so every refit reports it.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::logistic::{fit_logistic, sigmoid, Design, KahanSum, LogisticFit, NewtonOptions};
use crate::report::{fmt_num, CsvTable};
use crate::{hidden_count, Error, Result};

/// Coefficient indices in the calibration design.
pub const INTERCEPT: usize = 0;
pub const SCORE: usize = 1;
pub const GROUP: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub fit: LogisticFit,
    /// `(Σ_W s)(Σ_P s·x) − (Σ_W s·x)(Σ_P s)` with `s = σ(1−σ)` at the fit,
    /// `W` the noisy group, `P` everyone and `x` the score.
    pub condition3: f64,
}

impl CalibrationFit {
    pub fn beta_s(&self) -> f64 {
        self.fit.beta[SCORE]
    }

    pub fn beta_a(&self) -> f64 {
        self.fit.beta[GROUP]
    }

    pub fn p_value(&self) -> f64 {
        self.fit.p_values[GROUP]
    }

    pub fn condition3_ok(&self) -> bool {
        self.condition3 >= 0.0
    }
}

/// Rows `(1, score, 1{noisy})` in record order.
pub fn calibration_design(d: &Dataset) -> Design {
    let mut x = Design::with_capacity(3, d.len());
    for r in d.records() {
        x.push_row(&[1.0, r.score, f64::from(u8::from(d.is_noisy(r)))]);
    }
    x
}

/// The design-matrix condition under which the extreme allocations bound
/// the race coefficient, evaluated at `beta`.
pub fn condition3(x: &Design, beta: &[f64]) -> f64 {
    let mut w_s = KahanSum::default();
    let mut w_sx = KahanSum::default();
    let mut p_s = KahanSum::default();
    let mut p_sx = KahanSum::default();
    for i in 0..x.rows() {
        let row = x.row(i);
        let mu = sigmoid(row.iter().zip(beta).map(|(a, b)| a * b).sum());
        let s = mu * (1.0 - mu);
        p_s.add(s);
        p_sx.add(s * row[SCORE]);
        if row[GROUP] == 1.0 {
            w_s.add(s);
            w_sx.add(s * row[SCORE]);
        }
    }
    w_s.value() * p_sx.value() - w_sx.value() * p_s.value()
}

fn fit_design(x: &Design, labels: &[bool], start: Option<&[f64]>) -> Result<CalibrationFit> {
    let fit = fit_logistic(x, labels, start, &NewtonOptions::default())?;
    let condition3 = condition3(x, &fit.beta);
    Ok(CalibrationFit { fit, condition3 })
}

/// Fit the calibration model with the given outcome vector.
pub fn fit_calibration(
    d: &Dataset,
    labels: &[bool],
    start: Option<&[f64]>,
) -> Result<CalibrationFit> {
    if labels.len() != d.len() {
        return Err(Error::InvalidParameter(format!(
            "{} labels for {} records",
            labels.len(),
            d.len()
        )));
    }
    fit_design(&calibration_design(d), labels, start)
}

/// Fit with the observed outcomes.
pub fn fit_observed(d: &Dataset) -> Result<CalibrationFit> {
    fit_calibration(d, &d.labels(), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lowest,
    Highest,
}

/// Noisy-group observed negatives ordered from the chosen extreme, ties in
/// input order.
fn ranked_negatives(d: &Dataset, side: Side) -> Vec<usize> {
    let mut idx = d.noisy_negatives();
    let recs = d.records();
    match side {
        Side::Lowest => idx.sort_by(|&a, &b| recs[a].score.total_cmp(&recs[b].score)),
        Side::Highest => idx.sort_by(|&a, &b| recs[b].score.total_cmp(&recs[a].score)),
    }
    idx
}

/// Labels after relabeling the `⌈n_w·α⌉` most extreme noisy-group negatives
/// on `side` as positives.
pub fn extreme_allocation(d: &Dataset, alpha: f64, side: Side) -> Result<Vec<bool>> {
    let n_w = d.group_size(d.noisy_group());
    let k = hidden_count(n_w, alpha);
    let ranked = ranked_negatives(d, side);
    if k > ranked.len() {
        return Err(Error::InfeasibleNoise(format!(
            "alpha = {alpha} needs {k} hidden positives but the noisy group has {} observed negatives",
            ranked.len()
        )));
    }
    let mut labels = d.labels();
    for &i in &ranked[..k] {
        labels[i] = true;
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Race coefficient not significant at either extreme.
    CalibratedAll,
    /// Extremes disagree.
    Mixed,
    /// Significant at both extremes with the same sign (`+1` or `-1`).
    MiscalibratedAll { sign: i8 },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::CalibratedAll => "calibrated_all",
            Verdict::Mixed => "mixed",
            Verdict::MiscalibratedAll { sign } if *sign > 0 => "miscalibrated_all_positive",
            Verdict::MiscalibratedAll { .. } => "miscalibrated_all_negative",
        }
    }

    pub fn is_miscalibrated_all(&self) -> bool {
        matches!(self, Verdict::MiscalibratedAll { .. })
    }
}

fn classify(low: &CalibrationFit, high: &CalibrationFit, level: f64) -> Verdict {
    let sig_low = low.p_value() < level;
    let sig_high = high.p_value() < level;
    match (sig_low, sig_high) {
        (false, false) => Verdict::CalibratedAll,
        (true, true) if low.beta_a().signum() == high.beta_a().signum() => {
            Verdict::MiscalibratedAll {
                sign: low.beta_a().signum() as i8,
            }
        }
        _ => Verdict::Mixed,
    }
}

/// Fits at both extreme allocations for one hidden mass. The `*_low`
/// fields come from the lowest-score allocation, `*_high` from the highest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub alpha: f64,
    pub k: usize,
    pub beta_a_low: Option<f64>,
    pub beta_a_high: Option<f64>,
    pub beta_s_low: Option<f64>,
    pub beta_s_high: Option<f64>,
    pub p_low: Option<f64>,
    pub p_high: Option<f64>,
    pub condition3_low: Option<f64>,
    pub condition3_high: Option<f64>,
    pub condition3_ok: bool,
    pub verdict: Option<Verdict>,
    /// Set when either refit failed; the other fields are then partial.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEnvelope {
    pub level: f64,
    pub observed: CalibrationFit,
    pub points: Vec<EnvelopePoint>,
}

impl CoefficientEnvelope {
    /// Smallest grid value whose verdict satisfies `pred`.
    pub fn first_alpha(&self, pred: impl Fn(&Verdict) -> bool) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.verdict.as_ref().is_some_and(&pred))
            .map(|p| p.alpha)
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "alpha",
            "beta_A_low",
            "beta_A_high",
            "beta_S_low",
            "beta_S_high",
            "p_low",
            "p_high",
            "verdict",
            "condition3_ok",
        ]);
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        for p in &self.points {
            t.push(vec![
                fmt_num(p.alpha),
                opt(p.beta_a_low),
                opt(p.beta_a_high),
                opt(p.beta_s_low),
                opt(p.beta_s_high),
                opt(p.p_low),
                opt(p.p_high),
                p.verdict.map(|v| v.label()).unwrap_or("error").to_string(),
                p.condition3_ok.to_string(),
            ]);
        }
        t
    }
}

fn envelope_point(d: &Dataset, x: &Design, alpha: f64, level: f64, start: &[f64]) -> EnvelopePoint {
    let k = hidden_count(d.group_size(d.noisy_group()), alpha);
    let fit_side = |side| -> Result<CalibrationFit> {
        let labels = extreme_allocation(d, alpha, side)?;
        fit_design(x, &labels, Some(start))
    };
    let low = fit_side(Side::Lowest);
    let high = fit_side(Side::Highest);
    let ok = |r: &Result<CalibrationFit>| r.as_ref().ok().cloned();
    let (l, h) = (ok(&low), ok(&high));
    let error = [low.err(), high.err()]
        .into_iter()
        .flatten()
        .map(|e| e.to_string())
        .reduce(|a, b| format!("{a}; {b}"));
    EnvelopePoint {
        alpha,
        k,
        beta_a_low: l.as_ref().map(CalibrationFit::beta_a),
        beta_a_high: h.as_ref().map(CalibrationFit::beta_a),
        beta_s_low: l.as_ref().map(CalibrationFit::beta_s),
        beta_s_high: h.as_ref().map(CalibrationFit::beta_s),
        p_low: l.as_ref().map(CalibrationFit::p_value),
        p_high: h.as_ref().map(CalibrationFit::p_value),
        condition3_low: l.as_ref().map(|f| f.condition3),
        condition3_high: h.as_ref().map(|f| f.condition3),
        condition3_ok: l
            .as_ref()
            .zip(h.as_ref())
            .is_some_and(|(a, b)| a.condition3_ok() && b.condition3_ok()),
        verdict: l
            .as_ref()
            .zip(h.as_ref())
            .map(|(a, b)| classify(a, b, level)),
        error,
    }
}

/// Refit at both extreme allocations for every grid value. Failed refits
/// are recorded on their grid point and the sweep continues.
pub fn coefficient_envelope(
    d: &Dataset,
    alpha_grid: &[f64],
    level: f64,
) -> Result<CoefficientEnvelope> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let x = calibration_design(d);
    let observed = fit_design(&x, &d.labels(), None)?;
    let start = observed.fit.beta.clone();
    let points = alpha_grid
        .par_iter()
        .map(|&a| envelope_point(d, &x, a, level, &start))
        .collect();
    Ok(CoefficientEnvelope {
        level,
        observed,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefPair {
    pub beta_s: f64,
    pub beta_a: f64,
}

/// Rep `r` draws from ChaCha stream `r` under `seed`, so the sample does
/// not depend on scheduling.
pub(crate) fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Refits with `⌈n_w·α⌉` hidden positives drawn uniformly among the noisy
/// group's observed negatives.
pub fn random_mechanism_baseline(
    d: &Dataset,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<CoefPair>> {
    let k = hidden_count(d.group_size(d.noisy_group()), alpha);
    let candidates = d.noisy_negatives();
    if k > candidates.len() {
        return Err(Error::InfeasibleNoise(format!(
            "alpha = {alpha} needs {k} hidden positives but the noisy group has {} observed negatives",
            candidates.len()
        )));
    }
    let x = calibration_design(d);
    let base = d.labels();
    let observed = fit_design(&x, &base, None)?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut labels = base.clone();
            for j in rand::seq::index::sample(&mut rng, candidates.len(), k) {
                labels[candidates[j]] = true;
            }
            let f = fit_design(&x, &labels, Some(&observed.fit.beta))?;
            Ok(CoefPair {
                beta_s: f.beta_s(),
                beta_a: f.beta_a(),
            })
        })
        .collect()
}

/// Refit after resampling each group with label-dependent-cost weights.
///
/// With `β_a = (1 − γ_a)/2`, records with `y = 1` get weight `1 − β_a` and
/// records with `y = 0` weight `β_a`; each group keeps its size.
pub fn corrected_calibration(
    d: &Dataset,
    gamma_by_group: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<CalibrationFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Design::with_capacity(3, d.len());
    let mut labels = Vec::with_capacity(d.len());
    for group in [d.noisy_group(), d.baseline_group()] {
        let gamma = gamma_by_group.get(group).copied().unwrap_or(0.0);
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma for `{group}` must lie in [0, 1), got {gamma}"
            )));
        }
        let beta = (1.0 - gamma) / 2.0;
        let members: Vec<_> = d.group_records(group).collect();
        let weights: Vec<f64> = members
            .iter()
            .map(|r| if r.y_obs { 1.0 - beta } else { beta })
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Degenerate(format!("resampling weights for `{group}`: {e}")))?;
        let a = f64::from(u8::from(group == d.noisy_group()));
        for _ in 0..members.len() {
            let r = members[dist.sample(&mut rng)];
            x.push_row(&[1.0, r.score, a]);
            labels.push(r.y_obs);
        }
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::Degenerate(
            "resample contains a single outcome".into(),
        ));
    }
    fit_design(&x, &labels, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledRecord;

    fn small() -> Dataset {
        let mut records = Vec::new();
        // noisy group: negatives with scores 1..5 and two positives
        for s in 1..=5 {
            records.push(LabeledRecord::new(s as f64, "w", false));
        }
        records.push(LabeledRecord::new(3.0, "w", true));
        records.push(LabeledRecord::new(5.0, "w", true));
        for s in 1..=6 {
            records.push(LabeledRecord::new(s as f64, "b", s % 2 == 0));
        }
        Dataset::new(records, "w", "b", vec![]).unwrap()
    }

    #[test]
    fn zero_alpha_is_identity() {
        let d = small();
        for side in [Side::Lowest, Side::Highest] {
            assert_eq!(extreme_allocation(&d, 0.0, side).unwrap(), d.labels());
        }
    }

    #[test]
    fn highest_side_flips_top_scores() {
        let d = small();
        // n_w = 7, α = 0.25 → k = 2
        let labels = extreme_allocation(&d, 0.25, Side::Highest).unwrap();
        let flipped: Vec<f64> = (0..d.len())
            .filter(|&i| labels[i] != d.labels()[i])
            .map(|i| d.records()[i].score)
            .collect();
        assert_eq!(flipped, vec![4.0, 5.0]);
        let labels = extreme_allocation(&d, 0.25, Side::Lowest).unwrap();
        let flipped: Vec<f64> = (0..d.len())
            .filter(|&i| labels[i] != d.labels()[i])
            .map(|i| d.records()[i].score)
            .collect();
        assert_eq!(flipped, vec![1.0, 2.0]);
        assert!(extreme_allocation(&d, 0.9, Side::Lowest).is_err());
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(
            Verdict::MiscalibratedAll { sign: -1 }.label(),
            "miscalibrated_all_negative"
        );
        assert_eq!(Verdict::CalibratedAll.label(), "calibrated_all");
    }

    #[test]
    fn baseline_is_reproducible() {
        let d = small();
        let a = random_mechanism_baseline(&d, 0.15, 8, 7).unwrap();
        let b = random_mechanism_baseline(&d, 0.15, 8, 7).unwrap();
        assert_eq!(a, b);
        let zero = random_mechanism_baseline(&d, 0.0, 3, 1).unwrap();
        let obs = fit_observed(&d).unwrap();
        for c in zero {
            assert!((c.beta_a - obs.beta_a()).abs() < 1e-8);
        }
    }
}
