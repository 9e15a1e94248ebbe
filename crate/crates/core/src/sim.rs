//! Synthetic populations with feature-dependent catch probabilities, the
//! random-flip experiment and the signed maximal disparate impact.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib_logistic::rep_rng;
use crate::data::{Dataset, LabeledRecord};
use crate::logistic::{fit_logistic, sigmoid, Design, NewtonOptions};
use crate::report::{fmt_num, CsvTable};
use crate::{hidden_count, Error, Result};

/// Probability `γ(x)` that a true positive at feature value `x ∈ [0, 1]`
/// is not observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatchModel {
    /// `γ(x) = 1 − (b+1)x/(1+bx)`: catching becomes likelier as `x` grows.
    Inc {
        b: f64,
    },
    /// `γ(x) = 1 − (b+1)(1−x)/(1+b(1−x))`: the mirror image of `Inc`.
    Dec {
        b: f64,
    },
    Constant {
        gamma: f64,
    },
    /// Piecewise constant on equal-width bins of `[0, 1]`.
    Table {
        gammas: Vec<f64>,
    },
}

impl CatchModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            CatchModel::Inc { b } | CatchModel::Dec { b } if !(*b >= 0.0 && b.is_finite()) => {
                bad(format!("shape b must be >= 0, got {b}"))
            }
            CatchModel::Constant { gamma } if !(0.0..=1.0).contains(gamma) => {
                bad(format!("gamma must lie in [0, 1], got {gamma}"))
            }
            CatchModel::Table { gammas } if gammas.is_empty() => bad("empty gamma table".into()),
            CatchModel::Table { gammas } if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) => {
                bad("gamma table entries must lie in [0, 1]".into())
            }
            _ => Ok(()),
        }
    }

    pub fn gamma(&self, x: f64) -> f64 {
        match self {
            CatchModel::Inc { b } => 1.0 - (b + 1.0) * x / (1.0 + b * x),
            CatchModel::Dec { b } => {
                let u = 1.0 - x;
                1.0 - (b + 1.0) * u / (1.0 + b * u)
            }
            CatchModel::Constant { gamma } => *gamma,
            CatchModel::Table { gammas } => {
                let m = gammas.len();
                let i = ((x * m as f64).floor() as usize).min(m - 1);
                gammas[i]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub x: f64,
    pub y_true: bool,
    pub y_obs: bool,
    pub y_hat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2 {
    pub records: Vec<SimRecord>,
    pub hidden: usize,
    /// Share of hidden positives classified high risk; `None` when there
    /// are no hidden positives.
    pub frac_high_risk_hidden: Option<f64>,
}

impl Example2 {
    /// Records for the canonical CSV, with the true outcome as a feature.
    pub fn to_labeled(&self, group: &str) -> (Vec<LabeledRecord>, Vec<String>) {
        let records = self
            .records
            .iter()
            .map(|r| LabeledRecord {
                y_hat: Some(r.y_hat),
                features: vec![f64::from(u8::from(r.y_true))],
                ..LabeledRecord::new(r.x, group, r.y_obs)
            })
            .collect();
        (records, vec!["y_true".to_string()])
    }

    pub fn mean_true(&self) -> f64 {
        self.records.iter().filter(|r| r.y_true).count() as f64 / self.records.len() as f64
    }

    pub fn mean_observed(&self) -> f64 {
        self.records.iter().filter(|r| r.y_obs).count() as f64 / self.records.len() as f64
    }
}

/// `X ~ U[0,1]`, `Y* ~ Bern(x)`, `Y = Y*·Bern(1 − γ(x))`, and `Ŷ = 1{x > median}`.
pub fn simulate_example2(n: usize, model: &CatchModel, seed: u64) -> Result<Example2> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records: Vec<SimRecord> = (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y_true = rng.random::<f64>() < x;
            let caught = rng.random::<f64>() >= model.gamma(x);
            SimRecord {
                x,
                y_true,
                y_obs: y_true && caught,
                y_hat: false,
            }
        })
        .collect();
    let xs: Vec<f64> = records.iter().map(|r| r.x).collect();
    let median = crate::stats::quantile(&xs, 0.5).expect("n >= 2");
    let mut hidden = 0;
    let mut hidden_high = 0;
    for r in &mut records {
        r.y_hat = r.x > median;
        if r.y_true && !r.y_obs {
            hidden += 1;
            hidden_high += usize::from(r.y_hat);
        }
    }
    Ok(Example2 {
        records,
        hidden,
        frac_high_risk_hidden: (hidden > 0).then(|| hidden_high as f64 / hidden as f64),
    })
}

/// `∫₀¹ x·γ(x) dx`, the expected hidden-positive mass, by composite Simpson.
pub fn expected_hidden_mass(model: &CatchModel) -> f64 {
    let m = 20_000;
    let h = 1.0 / m as f64;
    let f = |x: f64| x * model.gamma(x);
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Indices of `⌈n_w·α⌉` noisy-group observed negatives drawn uniformly.
pub fn random_flip_indices<R: Rng>(d: &Dataset, alpha: f64, rng: &mut R) -> Result<Vec<usize>> {
    let k = hidden_count(d.group_size(d.noisy_group()), alpha);
    let candidates = d.noisy_negatives();
    if k > candidates.len() {
        return Err(Error::InfeasibleNoise(format!(
            "alpha = {alpha} needs {k} hidden positives but the noisy group has {} observed negatives",
            candidates.len()
        )));
    }
    let mut idx: Vec<usize> = sample(rng, candidates.len(), k)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    idx.sort_unstable();
    Ok(idx)
}

fn flipped_labels(d: &Dataset, idx: &[usize]) -> Vec<bool> {
    let mut labels = d.labels();
    for &i in idx {
        labels[i] = true;
    }
    labels
}

/// Dataset with `⌈n_w·α⌉` uniformly chosen noisy-group negatives relabeled.
pub fn random_flip(d: &Dataset, alpha: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = random_flip_indices(d, alpha, &mut rng)?;
    d.with_labels(&flipped_labels(d, &idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdiResult {
    /// `sup_{t ≥ t0} F_b(t) − F_w(t)`.
    pub d_plus: f64,
    /// `sup_{t ≥ t0} F_w(t) − F_b(t)`.
    pub d_minus: f64,
    pub t0: f64,
    pub argmax_plus: f64,
    pub argmax_minus: f64,
}

fn count_le(sorted: &[f64], t: f64) -> i64 {
    sorted.partition_point(|&s| s <= t) as i64
}

/// Signed maximal disparate impact over thresholds `t ≥ t0`, using
/// right-continuous empirical cdfs. The sup is attained at `t0` or at a
/// jump point above it; with `t0` beyond every score both cdfs are one.
pub fn smdi(scores_b: &[f64], scores_w: &[f64], t0: f64) -> Result<SmdiResult> {
    if scores_b.is_empty() || scores_w.is_empty() {
        return Err(Error::Degenerate(
            "signed disparate impact needs both groups".into(),
        ));
    }
    if t0.is_nan() {
        return Err(Error::InvalidParameter("t0 is NaN".into()));
    }
    let sort = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (b, w) = (sort(scores_b), sort(scores_w));
    let mut candidates: Vec<f64> = std::iter::once(t0)
        .chain(b.iter().chain(&w).copied().filter(|&s| s > t0))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // compare F_b − F_w exactly as the integer numerator over n_b·n_w
    let (nb, nw) = (b.len() as i64, w.len() as i64);
    let mut plus = (i64::MIN, t0);
    let mut minus = (i64::MIN, t0);
    for t in candidates {
        let num = count_le(&b, t) * nw - count_le(&w, t) * nb;
        if num > plus.0 {
            plus = (num, t);
        }
        if -num > minus.0 {
            minus = (-num, t);
        }
    }
    let den = (nb * nw) as f64;
    let out = SmdiResult {
        d_plus: plus.0 as f64 / den,
        d_minus: minus.0 as f64 / den,
        t0,
        argmax_plus: plus.1,
        argmax_minus: minus.1,
    };
    Ok(out)
}

/// Threshold `t` at which `#(Y=0, S>t)` and `#(Y=1, S≤t)` are closest,
/// smallest such `t` among the observed scores.
pub fn balanced_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::InvalidParameter(
            "scores and labels must be nonempty and aligned".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let negatives = labels.iter().filter(|&&y| !y).count() as i64;
    // sweeping t upward over distinct scores
    let (mut fp, mut fnc) = (negatives, 0i64);
    let mut best = (i64::MAX, f64::NAN);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                fnc += 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        let gap = (fp - fnc).abs();
        if gap < best.0 {
            best = (gap, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdiSample {
    pub alpha: f64,
    pub rep: usize,
    pub result: Option<SmdiResult>,
    pub error: Option<String>,
}

fn score_design(d: &Dataset) -> Design {
    let use_score = d.feature_names().is_empty();
    let cols = if use_score {
        2
    } else {
        1 + d.feature_names().len()
    };
    let mut x = Design::with_capacity(cols, d.len());
    for r in d.records() {
        let mut row = vec![1.0];
        if use_score {
            row.push(r.score);
        } else {
            row.extend_from_slice(&r.features);
        }
        x.push_row(&row);
    }
    x
}

fn predict(x: &Design, beta: &[f64]) -> Vec<f64> {
    (0..x.rows())
        .map(|i| sigmoid(x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()))
        .collect()
}

fn group_split(d: &Dataset, scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut b = Vec::new();
    let mut w = Vec::new();
    for (r, &s) in d.records().iter().zip(scores) {
        if d.is_noisy(r) {
            w.push(s);
        } else {
            b.push(s);
        }
    }
    (b, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdiExperiment {
    pub t0: f64,
    pub samples: Vec<SmdiSample>,
}

impl SmdiExperiment {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["alpha", "rep", "d_plus", "d_minus"]);
        for s in &self.samples {
            let (p, m) = s
                .result
                .map(|r| (fmt_num(r.d_plus), fmt_num(r.d_minus)))
                .unwrap_or_default();
            t.push(vec![fmt_num(s.alpha), s.rep.to_string(), p, m]);
        }
        t
    }

    /// Mean `(d_plus, d_minus)` over successful reps at `alpha`.
    pub fn mean_at(&self, alpha: f64) -> Option<(f64, f64)> {
        let rs: Vec<SmdiResult> = self
            .samples
            .iter()
            .filter(|s| s.alpha == alpha)
            .filter_map(|s| s.result)
            .collect();
        (!rs.is_empty()).then(|| {
            let n = rs.len() as f64;
            (
                rs.iter().map(|r| r.d_plus).sum::<f64>() / n,
                rs.iter().map(|r| r.d_minus).sum::<f64>() / n,
            )
        })
    }
}

/// For every `α` and rep: flip random noisy-group negatives, refit a
/// pooled logistic score model on the feature columns (or the score when
/// there are none) and measure the disparate impact of its predictions.
///
/// Without an explicit `t0` the threshold balancing false positives and
/// false negatives of the model fitted to the observed labels is used.
pub fn smdi_retrain_experiment(
    d: &Dataset,
    alpha_grid: &[f64],
    reps: usize,
    seed: u64,
    t0: Option<f64>,
) -> Result<SmdiExperiment> {
    let x = score_design(d);
    let opts = NewtonOptions::default();
    let base = fit_logistic(&x, &d.labels(), None, &opts)?;
    let t0 = match t0 {
        Some(t) => t,
        None => balanced_threshold(&predict(&x, &base.beta), &d.labels())?,
    };
    let jobs: Vec<(usize, usize)> = (0..alpha_grid.len())
        .flat_map(|a| (0..reps).map(move |r| (a, r)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(a, rep)| {
            let alpha = alpha_grid[a];
            let mut rng = rep_rng(seed, (a * reps + rep) as u64);
            let mut run = || -> Result<SmdiResult> {
                let idx = random_flip_indices(d, alpha, &mut rng)?;
                let labels = flipped_labels(d, &idx);
                let fit = fit_logistic(&x, &labels, Some(&base.beta), &opts)?;
                let (b, w) = group_split(d, &predict(&x, &fit.beta));
                smdi(&b, &w, t0)
            };
            match run() {
                Ok(r) => SmdiSample {
                    alpha,
                    rep,
                    result: Some(r),
                    error: None,
                },
                Err(e) => SmdiSample {
                    alpha,
                    rep,
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SmdiExperiment { t0, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_stay_in_unit_interval() {
        for model in [CatchModel::Inc { b: 3.0 }, CatchModel::Dec { b: 0.5 }] {
            for i in 0..=100 {
                let g = model.gamma(i as f64 / 100.0);
                assert!((-1e-15..=1.0 + 1e-15).contains(&g));
            }
        }
        // catch probability rises with x for Inc and falls for Dec
        let inc = CatchModel::Inc { b: 2.0 };
        let dec = CatchModel::Dec { b: 2.0 };
        assert!(inc.gamma(0.2) > inc.gamma(0.8));
        assert!(dec.gamma(0.2) < dec.gamma(0.8));
        assert!(CatchModel::Inc { b: -1.0 }.validate().is_err());
    }

    #[test]
    fn no_noise_no_hidden() {
        let sim = simulate_example2(2000, &CatchModel::Constant { gamma: 0.0 }, 3).unwrap();
        assert_eq!(sim.hidden, 0);
        assert_eq!(sim.frac_high_risk_hidden, None);
        assert!(sim.records.iter().all(|r| r.y_obs == r.y_true));
        assert_eq!(sim.records.iter().filter(|r| r.y_hat).count(), 1000);
    }

    #[test]
    fn hidden_mass_integral() {
        // ∫ x(1−x) dx = 1/6 for Inc with b = 0
        assert!((expected_hidden_mass(&CatchModel::Inc { b: 0.0 }) - 1.0 / 6.0).abs() < 1e-12);
        assert!((expected_hidden_mass(&CatchModel::Constant { gamma: 0.4 }) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn smdi_conventions() {
        let s = [0.1, 0.4, 0.4, 0.9];
        let r = smdi(&s, &s, f64::NEG_INFINITY).unwrap();
        assert_eq!((r.d_plus, r.d_minus), (0.0, 0.0));
        let r = smdi(&[0.0, 1.0], &[0.5, 2.0], 10.0).unwrap();
        assert_eq!((r.d_plus, r.d_minus), (0.0, 0.0));
        assert!(smdi(&[], &s, 0.0).is_err());
    }

    #[test]
    fn shifted_grid() {
        // b = {0..9}, w = {1..10}: F_b − F_w peaks at 1/10
        let b: Vec<f64> = (0..10).map(f64::from).collect();
        let w: Vec<f64> = (1..11).map(f64::from).collect();
        let r = smdi(&b, &w, f64::NEG_INFINITY).unwrap();
        assert!((r.d_plus - 0.1).abs() < 1e-15);
        assert_eq!(r.d_minus, 0.0);
        assert_eq!(r.argmax_plus, 0.0);
    }

    #[test]
    fn balanced_threshold_small() {
        // negatives at 1,2,3 and positives at 4,5,6: t = 3 gives 0 and 0
        let s = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [false, false, false, true, true, true];
        assert_eq!(balanced_threshold(&s, &y).unwrap(), 3.0);
    }
}
