//! Brute-force oracles shared by the integration targets. Nothing here calls
//! the code paths it is used to check.

#![allow(dead_code)]

use std::path::PathBuf;

use num_rational::Ratio;
use rand::Rng;
use tvb_core::calib_chisq::{self, ChiSqOptions, Continuity};
use tvb_core::data::{self, ColumnMap, Dataset, LevelCounts, ScoreBinTable};

pub type Q = Ratio<i64>;

pub fn compas_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/compas-scores-two-years.csv")
}

pub const COMPAS_NOISY: &str = "Caucasian";
pub const COMPAS_BASELINE: &str = "African-American";

pub fn compas_columns() -> ColumnMap {
    ColumnMap {
        score: "decile_score".into(),
        group: "race".into(),
        label: "two_year_recid".into(),
        noisy_group: Some(COMPAS_NOISY.into()),
        baseline_group: Some(COMPAS_BASELINE.into()),
        ..Default::default()
    }
}

/// COMPAS restricted to the two audited groups, one level per decile.
pub fn compas() -> Dataset {
    let d = data::load_csv(compas_path(), &compas_columns()).expect("COMPAS data");
    data::bin_scores(&d, 10).expect("deciles")
}

/// Calls `f` with every subset of `0..n` as a bit mask.
pub fn for_each_subset(n: usize, mut f: impl FnMut(u32)) {
    for mask in 0..(1u32 << n) {
        f(mask);
    }
}

/// Calls `f` with every `k`-subset of `items`.
pub fn for_each_combination(items: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), f);
}

/// Exact error rates from a list of `(y, y_hat)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactRates {
    pub fpr: Option<Q>,
    pub fnr: Option<Q>,
    pub ppv: Option<Q>,
}

pub fn exact_rates(pairs: impl IntoIterator<Item = (bool, bool)>) -> ExactRates {
    let mut c = [[0i64; 2]; 2];
    for (y, yh) in pairs {
        c[y as usize][yh as usize] += 1;
    }
    let frac = |num: i64, den: i64| (den != 0).then(|| Q::new(num, den));
    ExactRates {
        fpr: frac(c[0][1], c[0][0] + c[0][1]),
        fnr: frac(c[1][0], c[1][0] + c[1][1]),
        ppv: frac(c[1][1], c[0][1] + c[1][1]),
    }
}

/// Mann-Whitney AUC by comparing every positive/negative pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            wins += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

/// Pearson statistic summed over the 2×2 layers, written out cell by cell.
pub fn textbook_statistic(tbl: &ScoreBinTable, h: &[u64], yates: bool) -> (f64, usize) {
    let mut t = 0.0;
    let mut df = 0;
    for (c, &hk) in tbl.levels.iter().zip(h) {
        let o = [
            [
                c.noisy_neg as f64 - hk as f64,
                c.noisy_pos as f64 + hk as f64,
            ],
            [c.base_neg as f64, c.base_pos as f64],
        ];
        let rows = [o[0][0] + o[0][1], o[1][0] + o[1][1]];
        let cols = [o[0][0] + o[1][0], o[0][1] + o[1][1]];
        let n = rows[0] + rows[1];
        if rows.contains(&0.0) || cols.contains(&0.0) {
            continue;
        }
        df += 1;
        for i in 0..2 {
            for j in 0..2 {
                let e = rows[i] * cols[j] / n;
                let mut dev = (o[i][j] - e).abs();
                if yates {
                    dev = (dev - 0.5).max(0.0);
                }
                t += dev * dev / e;
            }
        }
    }
    (t, df)
}

/// Every allocation with `h_k ≤ caps[k]` and `Σh ≤ budget`.
pub fn allocations(caps: &[u64], budget: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut h = vec![0u64; caps.len()];
    fn rec(k: usize, left: u64, caps: &[u64], h: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == caps.len() {
            out.push(h.clone());
            return;
        }
        for v in 0..=caps[k].min(left) {
            h[k] = v;
            rec(k + 1, left - v, caps, h, out);
        }
        h[k] = 0;
    }
    rec(0, budget, caps, &mut h, &mut out);
    out
}

pub struct Extremes {
    pub min: f64,
    pub max: f64,
}

pub fn exhaustive_extremes(tbl: &ScoreBinTable, budget: u64, opts: &ChiSqOptions) -> Extremes {
    let caps = calib_chisq::caps(tbl, opts).unwrap();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for h in allocations(&caps, budget) {
        let t = calib_chisq::chisq_statistic(tbl, &h, opts.continuity)
            .unwrap()
            .t;
        min = min.min(t);
        max = max.max(t);
    }
    Extremes { min, max }
}

/// Small random table: up to three levels and at most six noisy negatives
/// per level. Every margin is nonempty whatever the allocation.
pub fn random_small_table<R: Rng>(rng: &mut R) -> ScoreBinTable {
    let k = rng.random_range(1..=3);
    let levels = (0..k)
        .map(|_| {
            let noisy_neg = rng.random_range(0..=6);
            let noisy_pos = rng.random_range(u64::from(noisy_neg == 0)..=6);
            LevelCounts::new(
                noisy_neg,
                noisy_pos,
                rng.random_range(1..=8),
                rng.random_range(1..=8),
            )
        })
        .collect();
    ScoreBinTable::new(levels)
}

pub fn random_options<R: Rng>(rng: &mut R) -> ChiSqOptions {
    ChiSqOptions {
        continuity: if rng.random_bool(0.5) {
            Continuity::Yates
        } else {
            Continuity::None
        },
        eps: rng.random_bool(0.3).then(|| rng.random_range(0.2..0.7)),
        ..Default::default()
    }
}

/// Largest violation of discrete convexity along each coordinate, starting
/// from the zero allocation. Zero means convex.
pub fn convexity_violation(tbl: &ScoreBinTable, opts: &ChiSqOptions) -> f64 {
    let caps = calib_chisq::caps(tbl, opts).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..caps.len() {
        let values: Vec<f64> = (0..=caps[k])
            .map(|v| {
                let mut h = vec![0; caps.len()];
                h[k] = v;
                calib_chisq::chisq_statistic(tbl, &h, opts.continuity)
                    .unwrap()
                    .t
            })
            .collect();
        for w in values.windows(3) {
            let second = w[2] - 2.0 * w[1] + w[0];
            let scale = w.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            worst = worst.max(-second / scale);
        }
    }
    worst
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RateOracleTally {
    /// Flip counts `k` compared, summed over metrics.
    pub checked: usize,
    /// Closed-form endpoints that differ from the enumerated extremes.
    pub exact_mismatches: usize,
    /// Floating-point bounds further than 1e-12 from the exact extremes.
    pub float_mismatches: usize,
    /// Relabelings landing in the excluded FPR/FNR quadrant.
    pub trichotomy_violations: usize,
}

impl std::ops::AddAssign for RateOracleTally {
    fn add_assign(&mut self, o: Self) {
        self.checked += o.checked;
        self.exact_mismatches += o.exact_mismatches;
        self.float_mismatches += o.float_mismatches;
        self.trichotomy_violations += o.trichotomy_violations;
    }
}

/// Enumerates every relabeling of a random group of at most 12 records
/// and compares the extremes of each true rate with the bounds.
pub fn rate_oracle_instance<R: Rng>(rng: &mut R) -> RateOracleTally {
    use num_traits::ToPrimitive;
    use tvb_core::confusion::{ConfusionCounts, GroupConfusion};
    use tvb_core::tvb_bounds::{self, Metric, Trichotomy};

    let n = rng.random_range(2..=12);
    let pairs: Vec<(bool, bool)> = (0..n)
        .map(|_| (rng.random_bool(0.5), rng.random_bool(0.5)))
        .collect();
    let count = |y: bool, yh: bool| pairs.iter().filter(|&&p| p == (y, yh)).count() as u64;
    let counts = ConfusionCounts {
        c00: count(false, false),
        c01: count(false, true),
        c10: count(true, false),
        c11: count(true, true),
    };
    let cm = GroupConfusion::from_counts(counts).unwrap();
    let p = [counts.c00, counts.c01, counts.c10, counts.c11].map(|c| Q::from_integer(c as i64));
    let negatives: Vec<usize> = (0..n).filter(|&i| !pairs[i].0).collect();
    let observed = exact_rates(pairs.iter().copied());
    let regime = tvb_bounds::trichotomy(&cm).ok();

    let mut tally = RateOracleTally::default();
    for k in 0..=negatives.len() {
        let mut extremes: [Option<(Q, Q)>; 3] = [None; 3];
        for_each_combination(&negatives, k, &mut |flip| {
            let relabeled = pairs
                .iter()
                .enumerate()
                .map(|(i, &(y, yh))| (y || flip.contains(&i), yh));
            let r = exact_rates(relabeled);
            for (slot, v) in extremes.iter_mut().zip([r.fpr, r.fnr, r.ppv]) {
                if let Some(v) = v {
                    *slot = Some(slot.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
                }
            }
            if let (Some(regime), Some(fpr), Some(fnr), Some(fpr0), Some(fnr0)) =
                (regime, r.fpr, r.fnr, observed.fpr, observed.fnr)
            {
                let down_up = fnr < fnr0 && fpr > fpr0;
                let up_down = fnr > fnr0 && fpr < fpr0;
                let violated = match regime {
                    Trichotomy::FnrDownFprUpExcluded => down_up,
                    Trichotomy::FnrUpFprDownExcluded => up_down,
                    Trichotomy::Boundary => down_up || up_down,
                };
                tally.trichotomy_violations += violated as usize;
            }
        });

        let alpha = Q::from_integer(k as i64);
        let (lo1, hi1) =
            tvb_bounds::alpha1_range(&p, alpha).expect("k never exceeds the negatives");
        let float = tvb_bounds::metric_bounds(&cm, k as f64 / n as f64).unwrap();
        for (m, enumerated) in Metric::ALL.into_iter().zip(extremes) {
            tally.checked += 1;
            let ends = [m.star(&p, alpha - lo1, lo1), m.star(&p, alpha - hi1, hi1)];
            let closed = match ends {
                [Some(a), Some(b)] => Some((a.min(b), a.max(b))),
                _ => None,
            };
            if closed != enumerated {
                tally.exact_mismatches += 1;
            }
            let fb = float.get(m).map(|b| (b.lower, b.upper));
            let agrees = match (enumerated, fb) {
                (Some((lo, hi)), Some((flo, fhi))) => {
                    close(lo.to_f64().unwrap(), flo, 1e-12)
                        && close(hi.to_f64().unwrap(), fhi, 1e-12)
                }
                (None, None) => true,
                _ => false,
            };
            if !agrees {
                tally.float_mismatches += 1;
            }
        }
    }
    tally
}

/// Largest gap between the AUC bounds and the enumerated extremes over all
/// relabelings of a random sample of at most 12 scores.
pub fn auc_oracle_instance<R: Rng>(rng: &mut R) -> Option<f64> {
    let n = rng.random_range(4..=12);
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(1..=5) as f64).collect();
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let n1 = labels.iter().filter(|&&y| y).count();
    let n0 = n - n1;
    if n0.min(n1) < 1 {
        return None;
    }
    let negatives: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    let mut worst: f64 = 0.0;
    for k in 0..n0.min(n1) {
        let b = tvb_core::auc::auc_bounds(&scores, &labels, k).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for_each_combination(&negatives, k, &mut |flip| {
            let mut y = labels.clone();
            for &i in flip {
                y[i] = true;
            }
            let a = pairwise_auc(&scores, &y);
            lo = lo.min(a);
            hi = hi.max(a);
        });
        worst = worst.max((lo - b.lower).abs()).max((hi - b.upper).abs());
    }
    Some(worst)
}
