//! Pearson chi-squared test of `Y ⟂ A | S` on a binned score, and budgeted
//! searches over hidden-positive allocations `h`.
//!
//! Moving `h_k` noisy-group records at level `k` from `y = 0` to `y = 1`
//! shifts the observed layer to `[[w0 − h, w1 + h], [b0, b1]]`. Each level's
//! contribution `f_k(h_k)` is convex, so minimizing the statistic is a
//! separable convex resource allocation problem; maximizing it is not, and
//! uses a greedy heuristic.

use serde::{Deserialize, Serialize};

use crate::data::{LevelCounts, ScoreBinTable};
use crate::report::{binomial_ci, fmt_num, CsvTable};
use crate::stats::{chi2_critical, chi2_sf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    /// Plain Pearson statistic.
    None,
    /// Yates correction on every 2×2 layer: `|O − E|` becomes
    /// `max(|O − E| − ½, 0)`.
    #[default]
    Yates,
}

/// How the proportionality bound `ε` limits `h_k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProportionalityRule {
    /// Hidden positives are at most a share `ε` of all true positives at the
    /// level: `h ≤ ε·(n_w1 + h)`.
    #[default]
    HiddenShare,
    /// `h ≤ ε·n_w1`.
    ObservedPositives,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChiSqOptions {
    pub continuity: Continuity,
    pub eps: Option<f64>,
    pub rule: ProportionalityRule,
}

/// One 2×2 layer after shifting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStat {
    /// 1-based score level.
    pub level: usize,
    pub h: u64,
    /// Rows noisy/baseline, columns `y = 0`/`y = 1`.
    pub observed: [[f64; 2]; 2],
    pub expected: [[f64; 2]; 2],
    pub contribution: f64,
    /// False when a margin is empty; the layer then adds nothing and no
    /// degree of freedom.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSqResult {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub h: Vec<u64>,
    pub per_level: Vec<LayerStat>,
}

impl ChiSqResult {
    pub fn budget(&self) -> u64 {
        self.h.iter().sum()
    }
}

fn layer(level: usize, c: &LevelCounts, h: u64, cont: Continuity) -> LayerStat {
    let hf = h as f64;
    let o = [
        [c.noisy_neg as f64 - hf, c.noisy_pos as f64 + hf],
        [c.base_neg as f64, c.base_pos as f64],
    ];
    let rows = [o[0][0] + o[0][1], o[1][0] + o[1][1]];
    let cols = [o[0][0] + o[1][0], o[0][1] + o[1][1]];
    let n = rows[0] + rows[1];
    let mut e = [[0.0; 2]; 2];
    let included = rows.iter().chain(&cols).all(|&m| m > 0.0);
    let mut contribution = 0.0;
    if n > 0.0 {
        for a in 0..2 {
            for y in 0..2 {
                e[a][y] = rows[a] * cols[y] / n;
            }
        }
    }
    if included {
        for a in 0..2 {
            for y in 0..2 {
                let mut dev = (o[a][y] - e[a][y]).abs();
                if cont == Continuity::Yates {
                    dev = (dev - 0.5).max(0.0);
                }
                contribution += dev * dev / e[a][y];
            }
        }
    }
    LayerStat {
        level: level + 1,
        h,
        observed: o,
        expected: e,
        contribution,
        included,
    }
}

fn level_value(c: &LevelCounts, h: u64, cont: Continuity) -> f64 {
    layer(0, c, h, cont).contribution
}

/// Per-level upper limits on `h_k`: the observed negatives, further limited
/// by the proportionality bound when `eps` is set.
pub fn caps(tbl: &ScoreBinTable, opts: &ChiSqOptions) -> Result<Vec<u64>> {
    if let Some(eps) = opts.eps {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in [0, 1), got {eps}"
            )));
        }
    }
    Ok(tbl
        .levels
        .iter()
        .map(|c| {
            let prop = opts.eps.map(|eps| {
                let bound = match opts.rule {
                    ProportionalityRule::HiddenShare => eps * c.noisy_pos as f64 / (1.0 - eps),
                    ProportionalityRule::ObservedPositives => eps * c.noisy_pos as f64,
                };
                (bound + 1e-9).floor() as u64
            });
            prop.map_or(c.noisy_neg, |p| p.min(c.noisy_neg))
        })
        .collect())
}

fn check_allocation(tbl: &ScoreBinTable, h: &[u64]) -> Result<()> {
    if h.len() != tbl.num_levels() {
        return Err(Error::InvalidParameter(format!(
            "allocation has {} entries for {} levels",
            h.len(),
            tbl.num_levels()
        )));
    }
    for (k, (c, &hk)) in tbl.levels.iter().zip(h).enumerate() {
        if hk > c.noisy_neg {
            return Err(Error::InfeasibleNoise(format!(
                "h = {hk} at level {} exceeds its {} observed negatives",
                k + 1,
                c.noisy_neg
            )));
        }
    }
    Ok(())
}

/// Statistic, degrees of freedom and p-value for allocation `h`.
pub fn chisq_statistic(tbl: &ScoreBinTable, h: &[u64], cont: Continuity) -> Result<ChiSqResult> {
    check_allocation(tbl, h)?;
    let per_level: Vec<LayerStat> = tbl
        .levels
        .iter()
        .zip(h)
        .enumerate()
        .map(|(k, (c, &hk))| layer(k, c, hk, cont))
        .collect();
    let df = per_level.iter().filter(|l| l.included).count();
    if df == 0 {
        return Err(Error::Degenerate(
            "every score level has an empty margin".into(),
        ));
    }
    let t = per_level.iter().map(|l| l.contribution).sum();
    Ok(ChiSqResult {
        t,
        df,
        p_value: chi2_sf(t, df),
        h: h.to_vec(),
        per_level,
    })
}

/// Continuous extension of one level's contribution and its derivative.
struct SmoothLevel {
    scale: f64,
    d0: f64,
    rb: f64,
    c0: f64,
    c1: f64,
    shift: f64,
}

impl SmoothLevel {
    fn new(c: &LevelCounts, cont: Continuity) -> Option<Self> {
        let rw = c.noisy_total() as f64;
        let rb = c.base_total() as f64;
        if rw == 0.0 || rb == 0.0 {
            return None;
        }
        let n = rw + rb;
        Some(Self {
            scale: n / (rw * rb),
            d0: c.noisy_neg as f64 * c.base_pos as f64 - c.noisy_pos as f64 * c.base_neg as f64,
            rb,
            c0: (c.noisy_neg + c.base_neg) as f64,
            c1: (c.noisy_pos + c.base_pos) as f64,
            shift: if cont == Continuity::Yates {
                n / 2.0
            } else {
                0.0
            },
        })
    }

    /// `f'(h)` for `f = scale·(|D| − shift)₊² / ((c0 − h)(c1 + h))`.
    fn derivative(&self, h: f64) -> f64 {
        let q = (self.c0 - h) * (self.c1 + h);
        if q <= 1e-12 {
            return self.derivative(h - 1e-7);
        }
        let d = self.d0 - h * self.rb;
        let g = (d.abs() - self.shift).max(0.0);
        if g == 0.0 {
            return 0.0;
        }
        let dg = -self.rb * d.signum();
        let dq = self.c0 - self.c1 - 2.0 * h;
        self.scale * (2.0 * g * dg * q - g * g * dq) / (q * q)
    }

    /// Minimizer of `f(h) + λh` on `[0, cap]`.
    fn argmin_tilted(&self, lambda: f64, cap: f64) -> f64 {
        if self.derivative(0.0) + lambda >= 0.0 {
            return 0.0;
        }
        if self.derivative(cap) + lambda <= 0.0 {
            return cap;
        }
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.derivative(mid) + lambda < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Continuous relaxation solved through the budget multiplier.
fn relaxed_minimizer(tbl: &ScoreBinTable, caps: &[u64], budget: u64, cont: Continuity) -> Vec<f64> {
    let smooth: Vec<Option<SmoothLevel>> = tbl
        .levels
        .iter()
        .map(|c| SmoothLevel::new(c, cont))
        .collect();
    let solve = |lambda: f64| -> Vec<f64> {
        smooth
            .iter()
            .zip(caps)
            .map(|(s, &cap)| {
                s.as_ref()
                    .map_or(0.0, |s| s.argmin_tilted(lambda, cap as f64))
            })
            .collect()
    };
    let at_zero = solve(0.0);
    let b = budget as f64;
    if at_zero.iter().sum::<f64>() <= b {
        return at_zero;
    }
    let mut hi = smooth
        .iter()
        .flatten()
        .map(|s| -s.derivative(0.0))
        .fold(0.0, f64::max)
        .max(1e-12);
    while solve(hi).iter().sum::<f64>() > b {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).iter().sum::<f64>() > b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    solve(hi)
}

fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - 1e-12 * current.abs().max(1.0)
}

/// Integer allocation minimizing the statistic subject to `Σh ≤ budget`,
/// the per-level caps and the optional proportionality bound.
///
/// The continuous relaxation is rounded down and then repaired by unit
/// moves on one level and budget-preserving unit transfers between two
/// levels until neither improves; for separable convex objectives that
/// local optimum is global.
pub fn minimize_t(tbl: &ScoreBinTable, budget: u64, opts: &ChiSqOptions) -> Result<ChiSqResult> {
    let caps = caps(tbl, opts)?;
    let cont = opts.continuity;
    let relaxed = relaxed_minimizer(tbl, &caps, budget, cont);
    let mut h: Vec<u64> = relaxed
        .iter()
        .zip(&caps)
        .map(|(&x, &cap)| (x.floor().max(0.0) as u64).min(cap))
        .collect();
    // flooring keeps the budget unless rounding noise pushed a value up
    while h.iter().sum::<u64>() > budget {
        let k = (0..h.len())
            .rev()
            .find(|&k| h[k] > 0)
            .expect("positive sum");
        h[k] -= 1;
    }
    let levels = &tbl.levels;
    let mut f: Vec<f64> = levels
        .iter()
        .zip(&h)
        .map(|(c, &x)| level_value(c, x, cont))
        .collect();
    loop {
        let used: u64 = h.iter().sum();
        let up: Vec<Option<f64>> = (0..h.len())
            .map(|k| (h[k] < caps[k]).then(|| level_value(&levels[k], h[k] + 1, cont) - f[k]))
            .collect();
        let down: Vec<Option<f64>> = (0..h.len())
            .map(|k| (h[k] > 0).then(|| level_value(&levels[k], h[k] - 1, cont) - f[k]))
            .collect();
        // best move as (delta, raise, lower)
        let mut best: Option<(f64, Option<usize>, Option<usize>)> = None;
        let mut consider = |delta: f64, raise: Option<usize>, lower: Option<usize>| {
            let current: f64 = f.iter().sum();
            if improves(current + delta, current) && best.is_none_or(|(b, _, _)| delta < b) {
                best = Some((delta, raise, lower));
            }
        };
        for k in 0..h.len() {
            if used < budget {
                if let Some(d) = up[k] {
                    consider(d, Some(k), None);
                }
            }
            if let Some(d) = down[k] {
                consider(d, None, Some(k));
            }
        }
        for (i, du) in up.iter().enumerate() {
            for (j, dd) in down.iter().enumerate() {
                if let (true, Some(du), Some(dd)) = (i != j, du, dd) {
                    consider(du + dd, Some(i), Some(j));
                }
            }
        }
        let Some((_, raise, lower)) = best else { break };
        if let Some(i) = raise {
            h[i] += 1;
            f[i] = level_value(&levels[i], h[i], cont);
        }
        if let Some(j) = lower {
            h[j] -= 1;
            f[j] = level_value(&levels[j], h[j], cont);
        }
    }
    chisq_statistic(tbl, &h, cont)
}

/// Greedy maximizer: repeatedly push the single level whose move to
/// `min(cap, h_k + remaining budget)` gains most, lowest level on ties,
/// until the budget is spent or no move gains.
pub fn maximize_t_greedy(
    tbl: &ScoreBinTable,
    budget: u64,
    opts: &ChiSqOptions,
) -> Result<ChiSqResult> {
    let caps = caps(tbl, opts)?;
    let cont = opts.continuity;
    let levels = &tbl.levels;
    let mut h = vec![0u64; levels.len()];
    let mut remaining = budget;
    while remaining > 0 {
        let mut best: Option<(usize, u64, f64)> = None;
        for k in 0..levels.len() {
            let target = caps[k].min(h[k] + remaining);
            if target == h[k] {
                continue;
            }
            let gain = level_value(&levels[k], target, cont) - level_value(&levels[k], h[k], cont);
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((k, target, gain));
            }
        }
        match best {
            Some((k, target, gain)) if gain > 0.0 => {
                remaining -= target - h[k];
                h[k] = target;
            }
            _ => break,
        }
    }
    chisq_statistic(tbl, &h, cont)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Smallest budget whose greedy maximum is significant.
    BreakCalibration,
    /// Smallest budget whose minimum is no longer significant.
    AchieveCalibration,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::BreakCalibration => "break_calibration",
            Direction::AchieveCalibration => "achieve_calibration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSearch {
    pub direction: Direction,
    pub level: f64,
    /// Critical value at the degrees of freedom of the unshifted table.
    pub critical: f64,
    pub df: usize,
    pub step: u64,
    /// `None` when no feasible budget reaches the target.
    pub budget: Option<u64>,
    /// Allocation at the reported budget, or the most extreme one tried
    /// when the target is unreachable.
    pub result: ChiSqResult,
}

impl BudgetSearch {
    pub fn reachable(&self) -> bool {
        self.budget.is_some()
    }
}

/// Smallest budget on the grid `0, step, 2·step, …` that flips the verdict
/// at significance `level`.
///
/// Breaking scans the grid in order because the greedy maximum need not be
/// monotone in the budget; achieving bisects since the exact minimum is
/// nonincreasing in the budget.
pub fn minimal_budget(
    tbl: &ScoreBinTable,
    direction: Direction,
    level: f64,
    opts: &ChiSqOptions,
    step: u64,
) -> Result<BudgetSearch> {
    if step == 0 {
        return Err(Error::InvalidParameter(
            "budget step must be positive".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let cont = opts.continuity;
    let zero = vec![0; tbl.num_levels()];
    let base = chisq_statistic(tbl, &zero, cont)?;
    let df = base.df;
    let critical = chi2_critical(level, df)?;
    let max_budget: u64 = caps(tbl, opts)?.iter().sum();
    let max_steps = max_budget.div_ceil(step);
    let done = |r: &ChiSqResult| match direction {
        Direction::BreakCalibration => r.t > critical,
        Direction::AchieveCalibration => r.t < critical,
    };
    let eval = |m: u64| -> Result<ChiSqResult> {
        let b = (m * step).min(max_budget);
        match direction {
            Direction::BreakCalibration => maximize_t_greedy(tbl, b, opts),
            Direction::AchieveCalibration => minimize_t(tbl, b, opts),
        }
    };
    let found = |m: u64, result: ChiSqResult| BudgetSearch {
        direction,
        level,
        critical,
        df,
        step,
        budget: Some(m * step),
        result,
    };
    if done(&base) {
        return Ok(found(0, base));
    }
    let unreachable = |result: ChiSqResult| BudgetSearch {
        direction,
        level,
        critical,
        df,
        step,
        budget: None,
        result,
    };
    match direction {
        Direction::BreakCalibration => {
            let mut last = base;
            for m in 1..=max_steps {
                let r = eval(m)?;
                if done(&r) {
                    return Ok(found(m, r));
                }
                last = r;
            }
            Ok(unreachable(last))
        }
        Direction::AchieveCalibration => {
            let top = eval(max_steps)?;
            if !done(&top) {
                return Ok(unreachable(top));
            }
            // invariant: lo fails, hi succeeds
            let (mut lo, mut hi, mut hi_res) = (0u64, max_steps, top);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let r = eval(mid)?;
                if done(&r) {
                    hi = mid;
                    hi_res = r;
                } else {
                    lo = mid;
                }
            }
            Ok(found(hi, hi_res))
        }
    }
}

/// Per-level positive rates by group before and after the allocation,
/// with Wilson intervals at `confidence`.
pub fn rate_table(
    tbl: &ScoreBinTable,
    h: &[u64],
    confidence: f64,
    group_names: [&str; 2],
) -> Result<CsvTable> {
    check_allocation(tbl, h)?;
    let mut t = CsvTable::new([
        "level",
        "group",
        "n",
        "rate",
        "ci_low",
        "ci_high",
        "rate_shifted",
        "ci_low_shifted",
        "ci_high_shifted",
    ]);
    for (k, (c, &hk)) in tbl.levels.iter().zip(h).enumerate() {
        let rows = [
            (group_names[0], c.noisy_pos, c.noisy_total(), hk),
            (group_names[1], c.base_pos, c.base_total(), 0),
        ];
        for (name, pos, n, shift) in rows {
            let mut row = vec![(k + 1).to_string(), name.to_string(), n.to_string()];
            for successes in [pos, pos + shift] {
                match binomial_ci(successes, n, confidence) {
                    Some((lo, hi)) => {
                        let rate = successes as f64 / n as f64;
                        row.extend([fmt_num(rate), fmt_num(lo), fmt_num(hi)]);
                    }
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            t.push(row);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(levels: &[[u64; 4]]) -> ScoreBinTable {
        ScoreBinTable::new(
            levels
                .iter()
                .map(|c| LevelCounts::new(c[0], c[1], c[2], c[3]))
                .collect(),
        )
    }

    #[test]
    fn identical_rows_give_zero() {
        let t = table(&[[10, 5, 10, 5]]);
        let r = chisq_statistic(&t, &[0], Continuity::None).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.df, 1);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn hand_layer() {
        // [[10, 20], [30, 40]]: E = [[12, 18], [28, 42]]
        let t = table(&[[10, 20, 30, 40]]);
        let r = chisq_statistic(&t, &[0], Continuity::None).unwrap();
        let expect = 4.0 / 12.0 + 4.0 / 18.0 + 4.0 / 28.0 + 4.0 / 42.0;
        assert!((r.t - expect).abs() < 1e-12);
        let y = chisq_statistic(&t, &[0], Continuity::Yates).unwrap();
        let expect = 2.25 * (1.0 / 12.0 + 1.0 / 18.0 + 1.0 / 28.0 + 1.0 / 42.0);
        assert!((y.t - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_margin_drops_a_degree_of_freedom() {
        let t = table(&[[10, 20, 30, 40], [0, 0, 3, 4], [5, 0, 6, 0]]);
        let r = chisq_statistic(&t, &[0, 0, 0], Continuity::None).unwrap();
        assert_eq!(r.df, 1);
        assert!(!r.per_level[1].included && !r.per_level[2].included);
        assert!(chisq_statistic(&table(&[[0, 0, 1, 1]]), &[0], Continuity::None).is_err());
    }

    #[test]
    fn allocation_is_checked() {
        let t = table(&[[2, 1, 1, 1]]);
        assert!(matches!(
            chisq_statistic(&t, &[3], Continuity::None),
            Err(Error::InfeasibleNoise(_))
        ));
        assert!(chisq_statistic(&t, &[0, 0], Continuity::None).is_err());
    }

    #[test]
    fn caps_follow_rule() {
        let t = table(&[[50, 100, 1, 1], [5, 100, 1, 1]]);
        let share = ChiSqOptions {
            eps: Some(0.1),
            ..Default::default()
        };
        assert_eq!(caps(&t, &share).unwrap(), vec![11, 5]);
        let observed = ChiSqOptions {
            rule: ProportionalityRule::ObservedPositives,
            ..share
        };
        assert_eq!(caps(&t, &observed).unwrap(), vec![10, 5]);
        assert_eq!(caps(&t, &ChiSqOptions::default()).unwrap(), vec![50, 5]);
        let bad = ChiSqOptions {
            eps: Some(1.0),
            ..Default::default()
        };
        assert!(caps(&t, &bad).is_err());
    }

    #[test]
    fn zero_budget() {
        let t = table(&[[10, 20, 30, 40], [20, 5, 9, 9]]);
        let opts = ChiSqOptions::default();
        let r = minimize_t(&t, 0, &opts).unwrap();
        assert_eq!(r.h, vec![0, 0]);
        let g = maximize_t_greedy(&t, 0, &opts).unwrap();
        assert_eq!(
            g.t,
            chisq_statistic(&t, &[0, 0], opts.continuity).unwrap().t
        );
    }

    #[test]
    fn already_past_target() {
        let t = table(&[[90, 10, 10, 90]]);
        let s = minimal_budget(
            &t,
            Direction::BreakCalibration,
            0.05,
            &ChiSqOptions::default(),
            1,
        )
        .unwrap();
        assert_eq!(s.budget, Some(0));
        let t = table(&[[10, 10, 10, 10]]);
        let s = minimal_budget(
            &t,
            Direction::AchieveCalibration,
            0.05,
            &ChiSqOptions::default(),
            1,
        )
        .unwrap();
        assert_eq!(s.budget, Some(0));
    }

    #[test]
    fn rate_table_shape() {
        let t = table(&[[10, 20, 30, 40]]);
        let csv = rate_table(&t, &[5], 0.95, ["w", "b"]).unwrap();
        assert_eq!(csv.rows.len(), 2);
        assert_eq!(csv.rows[0][3], fmt_num(20.0 / 30.0));
        assert_eq!(csv.rows[0][6], fmt_num(25.0 / 30.0));
    }
}
