//! Sharp bounds on true error metrics when the noisy group hides positives
//! among its observed negatives.
//!
//! A hidden mass `α = α₀ + α₁` of observed negatives is truly positive, with
//! `α_j` of it among predictions `Ŷ = j`. Given the observed confusion
//! matrix, every true metric is a monotone function of the single free
//! coordinate `α₁`, so the bounds are the metric at the two ends of the
//! feasible `α₁` interval.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::confusion::{ratio, GroupConfusion, Metrics};
use crate::report::{fmt_num, CsvTable};
use crate::{Error, Result};

const FEAS_TOL: f64 = 1e-12;

/// Hidden-positive mass, optionally split by predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
}

impl NoiseSpec {
    pub fn total(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            alpha0: None,
            alpha1: None,
        })
    }

    pub fn split(alpha0: f64, alpha1: f64) -> Result<Self> {
        for (name, v) in [("alpha0", alpha0), ("alpha1", alpha1)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(Self {
            alpha: alpha0 + alpha1,
            alpha0: Some(alpha0),
            alpha1: Some(alpha1),
        })
    }

    /// `(α₀, α₁)` when the split is known.
    pub fn allocation(&self) -> Option<(f64, f64)> {
        Some((self.alpha0?, self.alpha1?))
    }

    /// Check the split against the observed-negative cells it draws from.
    pub fn check_feasible(&self, cm: &GroupConfusion) -> Result<()> {
        let (a0, a1) = self.allocation().ok_or_else(|| {
            Error::InvalidParameter("noise spec needs both alpha0 and alpha1".into())
        })?;
        if a0 > cm.p00 + FEAS_TOL {
            return Err(Error::InfeasibleNoise(format!(
                "alpha0 = {a0} exceeds p00 = {} (observed negatives predicted negative)",
                cm.p00
            )));
        }
        if a1 > cm.p01 + FEAS_TOL {
            return Err(Error::InfeasibleNoise(format!(
                "alpha1 = {a1} exceeds p01 = {} (observed negatives predicted positive)",
                cm.p01
            )));
        }
        Ok(())
    }
}

// Generic closed forms. `p` is `[p00, p01, p10, p11]`; `None` marks a zero
// denominator. They are generic so tests can evaluate them in exact
// rational arithmetic.

pub fn fpr_star<T: Num + Copy>(p: &[T; 4], a0: T, a1: T) -> Option<T> {
    let den = p[0] + p[1] - a0 - a1;
    (den != T::zero()).then(|| (p[1] - a1) / den)
}

pub fn fnr_star<T: Num + Copy>(p: &[T; 4], a0: T, a1: T) -> Option<T> {
    let den = p[2] + p[3] + a0 + a1;
    (den != T::zero()).then(|| (p[2] + a0) / den)
}

pub fn ppv_star<T: Num + Copy>(p: &[T; 4], _a0: T, a1: T) -> Option<T> {
    let den = p[1] + p[3];
    (den != T::zero()).then(|| (p[3] + a1) / den)
}

/// Feasible interval of `α₁` for total mass `α`: both `α₁ ≤ p01` and
/// `α₀ = α − α₁ ≤ p00` must hold. `None` when `α > p00 + p01`.
pub fn alpha1_range<T: Num + Copy + PartialOrd>(p: &[T; 4], alpha: T) -> Option<(T, T)> {
    let max = |a: T, b: T| if a > b { a } else { b };
    let min = |a: T, b: T| if a < b { a } else { b };
    let lo = max(T::zero(), alpha - p[0]);
    let hi = min(alpha, p[1]);
    (lo <= hi && alpha >= T::zero()).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Fpr,
    Fnr,
    Ppv,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Fpr, Metric::Fnr, Metric::Ppv];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fpr => "FPR",
            Metric::Fnr => "FNR",
            Metric::Ppv => "PPV",
        }
    }

    pub fn star<T: Num + Copy>(self, p: &[T; 4], a0: T, a1: T) -> Option<T> {
        match self {
            Metric::Fpr => fpr_star(p, a0, a1),
            Metric::Fnr => fnr_star(p, a0, a1),
            Metric::Ppv => ppv_star(p, a0, a1),
        }
    }

    pub fn observed(self, m: &Metrics) -> Option<f64> {
        match self {
            Metric::Fpr => m.fpr,
            Metric::Fnr => m.fnr,
            Metric::Ppv => m.ppv,
        }
    }
}

/// Split `(α₀, α₁)` at which a bound endpoint is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub alpha0: f64,
    pub alpha1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBound {
    pub metric: Metric,
    pub lower: f64,
    pub upper: f64,
    pub lower_at: Allocation,
    pub upper_at: Allocation,
}

impl MetricBound {
    pub fn contains(&self, x: f64) -> bool {
        self.lower - 1e-12 <= x && x <= self.upper + 1e-12
    }
}

/// Bounds on the three metrics; a metric whose denominator vanishes is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub alpha: f64,
    pub fpr: Option<MetricBound>,
    pub fnr: Option<MetricBound>,
    pub ppv: Option<MetricBound>,
}

impl MetricBounds {
    pub fn get(&self, metric: Metric) -> Option<&MetricBound> {
        match metric {
            Metric::Fpr => self.fpr.as_ref(),
            Metric::Fnr => self.fnr.as_ref(),
            Metric::Ppv => self.ppv.as_ref(),
        }
    }
}

fn cells(cm: &GroupConfusion) -> [f64; 4] {
    [cm.p00, cm.p01, cm.p10, cm.p11]
}

/// Sharp bounds on FPR*, FNR* and PPV* for total hidden mass `alpha`.
///
/// When `α ≤ min(p00, p01)` these are the familiar closed forms, e.g.
/// `FPR* ∈ [(p01−α)/(p00+p01−α), p01/(p00+p01−α)]`. Larger `α` forces part
/// of the mass into one cell and the interval shrinks accordingly.
pub fn metric_bounds(cm: &GroupConfusion, alpha: f64) -> Result<MetricBounds> {
    let p = cells(cm);
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    let negatives = p[0] + p[1];
    // alpha = k/n for the full negative count can overshoot p00 + p01 by rounding
    let exhausted = (alpha - negatives).abs() <= 1e-12;
    let alpha = if exhausted { negatives } else { alpha };
    let (lo1, hi1) = match alpha1_range(&p, alpha) {
        Some(r) => r,
        None if exhausted => (p[1], p[1]),
        None => {
            return Err(Error::InfeasibleNoise(format!(
                "alpha = {alpha} exceeds the observed negatives p00 + p01 = {negatives}"
            )))
        }
    };
    let at = |a1: f64| Allocation {
        alpha0: alpha - a1,
        alpha1: a1,
    };
    let bound = |metric: Metric| -> Option<MetricBound> {
        if exhausted && metric == Metric::Fpr {
            return None;
        }
        let v_lo = metric.star(&p, alpha - lo1, lo1)?;
        let v_hi = metric.star(&p, alpha - hi1, hi1)?;
        let (lower, lower_at, upper, upper_at) = if v_lo <= v_hi {
            (v_lo, at(lo1), v_hi, at(hi1))
        } else {
            (v_hi, at(hi1), v_lo, at(lo1))
        };
        Some(MetricBound {
            metric,
            lower,
            upper,
            lower_at,
            upper_at,
        })
    };
    Ok(MetricBounds {
        alpha,
        fpr: bound(Metric::Fpr),
        fnr: bound(Metric::Fnr),
        ppv: bound(Metric::Ppv),
    })
}

/// True metrics under a fully specified allocation.
pub fn metric_at(cm: &GroupConfusion, spec: &NoiseSpec) -> Result<Metrics> {
    spec.check_feasible(cm)?;
    let (a0, a1) = spec.allocation().expect("checked above");
    let p = cells(cm);
    Ok(Metrics {
        fpr: fpr_star(&p, a0, a1),
        fnr: fnr_star(&p, a0, a1),
        ppv: ppv_star(&p, a0, a1),
        npv: ratio(p[0] - a0, p[0] + p[2]),
        prevalence: Some(p[2] + p[3] + a0 + a1),
    })
}

/// Which pair of movements the observed matrix rules out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trichotomy {
    /// `1 − FPR > FNR`: FNR* < FNR together with FPR* > FPR is impossible.
    FnrDownFprUpExcluded,
    /// `1 − FPR < FNR`: FNR* > FNR together with FPR* < FPR is impossible.
    FnrUpFprDownExcluded,
    Boundary,
}

pub fn trichotomy(cm: &GroupConfusion) -> Result<Trichotomy> {
    // 1 − FPR versus FNR, cross-multiplied: p00·(p10+p11) versus p10·(p00+p01)
    let ord = match cm.counts {
        Some(c) => {
            if c.c00 + c.c01 == 0 {
                return Err(Error::UndefinedMetric("FPR"));
            }
            if c.c10 + c.c11 == 0 {
                return Err(Error::UndefinedMetric("FNR"));
            }
            let lhs = c.c00 as u128 * (c.c10 + c.c11) as u128;
            let rhs = c.c10 as u128 * (c.c00 + c.c01) as u128;
            lhs.cmp(&rhs)
        }
        None => {
            let m = cm.metrics();
            let fpr = m.fpr.ok_or(Error::UndefinedMetric("FPR"))?;
            let fnr = m.fnr.ok_or(Error::UndefinedMetric("FNR"))?;
            let d = (1.0 - fpr) - fnr;
            if d.abs() <= 1e-12 {
                std::cmp::Ordering::Equal
            } else {
                d.partial_cmp(&0.0).unwrap()
            }
        }
    };
    Ok(match ord {
        std::cmp::Ordering::Greater => Trichotomy::FnrDownFprUpExcluded,
        std::cmp::Ordering::Less => Trichotomy::FnrUpFprDownExcluded,
        std::cmp::Ordering::Equal => Trichotomy::Boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionConditions {
    /// `FPR ≤ FPR*`, equivalently `FPR ≥ α₁/α`.
    pub fpr_cond: bool,
    /// `FNR ≥ FNR*`, equivalently `FNR ≥ α₀/α`.
    pub fnr_cond: bool,
    /// `(α₁/α₀)/(p11/p10)`; at least one iff `fnr_cond`.
    pub odds_ratio_fnr: Option<f64>,
    /// `(α₀/α₁)/(p00/p01)`; at least one iff `fpr_cond`.
    pub odds_ratio_fpr: Option<f64>,
    /// `fpr_cond` holds iff `α₁ ≤ fpr_ratio · α₀`, with `fpr_ratio = p01/p00`.
    pub fpr_ratio: Option<f64>,
    /// `fnr_cond` holds iff `α₁ ≥ fnr_ratio · α₀`, with `fnr_ratio = p11/p10`.
    pub fnr_ratio: Option<f64>,
}

/// `(p01/p00, p11/p10)`: the FPR condition holds iff `α₁ ≤ (p01/p00)·α₀`
/// and the FNR condition iff `α₁ ≥ (p11/p10)·α₀`.
pub fn direction_thresholds(cm: &GroupConfusion) -> (Option<f64>, Option<f64>) {
    (ratio(cm.p01, cm.p00), ratio(cm.p11, cm.p10))
}

pub fn direction_conditions(cm: &GroupConfusion, spec: &NoiseSpec) -> Result<DirectionConditions> {
    let (a0, a1) = spec.allocation().ok_or_else(|| {
        Error::InvalidParameter("direction conditions need alpha0 and alpha1".into())
    })?;
    let alpha = a0 + a1;
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "direction conditions need alpha > 0".into(),
        ));
    }
    let p = cells(cm);
    let m = cm.metrics();
    let fpr = m.fpr.ok_or(Error::UndefinedMetric("FPR"))?;
    let fnr = m.fnr.ok_or(Error::UndefinedMetric("FNR"))?;
    Ok(DirectionConditions {
        fpr_cond: fpr >= a1 / alpha,
        fnr_cond: fnr >= a0 / alpha,
        odds_ratio_fnr: ratio(a1 * p[2], a0 * p[3]),
        odds_ratio_fpr: ratio(a0 * p[1], a1 * p[0]),
        fpr_ratio: direction_thresholds(cm).0,
        fnr_ratio: direction_thresholds(cm).1,
    })
}

/// `α ∈ {0, 0.005, …, 0.2}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 / 200.0).collect()
}

/// Evenly spaced grid `start, start+step, …` up to `stop` inclusive.
pub fn alpha_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !step.is_finite()
        || step <= 0.0
        || !start.is_finite()
        || start < 0.0
        || stop.is_nan()
        || stop < start
    {
        return Err(Error::InvalidParameter(format!(
            "bad alpha grid {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub metric: Metric,
    pub lower: f64,
    pub upper: f64,
    /// Observed metric of the baseline group.
    pub reference: f64,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRegion {
    pub metric: Metric,
    pub alpha_start: f64,
    pub alpha_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub alphas: Vec<f64>,
    pub points: Vec<CurvePoint>,
    /// Maximal runs of consecutive grid points with `flip` set.
    pub flip_regions: Vec<FlipRegion>,
}

/// Whether some true noisy-group value in `[lower, upper]` is strictly on the
/// other side of `reference` than the observed noisy value. With no observed
/// disparity any value away from the reference counts.
fn flips(observed: f64, reference: f64, lower: f64, upper: f64) -> bool {
    if observed > reference {
        lower < reference
    } else if observed < reference {
        upper > reference
    } else {
        lower < reference || upper > reference
    }
}

pub fn bound_curve(
    cm_noisy: &GroupConfusion,
    cm_base: &GroupConfusion,
    alpha_grid: &[f64],
) -> Result<BoundCurve> {
    let obs = cm_noisy.metrics();
    let base = cm_base.metrics();
    let mut points = Vec::new();
    let mut flip_regions = Vec::new();
    let bounds = alpha_grid
        .iter()
        .map(|&a| metric_bounds(cm_noisy, a))
        .collect::<Result<Vec<_>>>()?;
    for metric in Metric::ALL {
        let (Some(observed), Some(reference)) = (metric.observed(&obs), metric.observed(&base))
        else {
            continue;
        };
        let mut run: Option<(f64, f64)> = None;
        for b in &bounds {
            let Some(mb) = b.get(metric) else { continue };
            let flip = flips(observed, reference, mb.lower, mb.upper);
            points.push(CurvePoint {
                alpha: b.alpha,
                metric,
                lower: mb.lower,
                upper: mb.upper,
                reference,
                flip,
            });
            run = match (run, flip) {
                (None, true) => Some((b.alpha, b.alpha)),
                (Some((s, _)), true) => Some((s, b.alpha)),
                (Some((s, e)), false) => {
                    flip_regions.push(FlipRegion {
                        metric,
                        alpha_start: s,
                        alpha_end: e,
                    });
                    None
                }
                (None, false) => None,
            };
        }
        if let Some((s, e)) = run {
            flip_regions.push(FlipRegion {
                metric,
                alpha_start: s,
                alpha_end: e,
            });
        }
    }
    Ok(BoundCurve {
        alphas: alpha_grid.to_vec(),
        points,
        flip_regions,
    })
}

impl BoundCurve {
    /// Plot data with columns `alpha,metric,lower,upper,reference,flip`.
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["alpha", "metric", "lower", "upper", "reference", "flip"]);
        for p in &self.points {
            t.push(vec![
                fmt_num(p.alpha),
                p.metric.name().to_string(),
                fmt_num(p.lower),
                fmt_num(p.upper),
                fmt_num(p.reference),
                p.flip.to_string(),
            ]);
        }
        t
    }

    /// First grid value flagged as a flip for `metric`.
    pub fn first_flip(&self, metric: Metric) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.metric == metric && p.flip)
            .map(|p| p.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDependent {
    pub metrics: Metrics,
    /// Some identity left `[0, 1]`, so `(ρ, γ)` cannot be reconciled with
    /// the observed matrix.
    pub inconsistent: bool,
}

/// True metrics when the missing-positive rate depends on the true label
/// only. `rho` is `P(Y*=1 | Y=0)` and `gamma` is `P(Y=0 | Y*=1)`.
pub fn label_dependent_identities(
    cm: &GroupConfusion,
    rho: f64,
    gamma: f64,
) -> Result<LabelDependent> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    let m = cm.metrics();
    let fnr = m.fnr;
    let fpr = match (m.fpr, fnr) {
        (Some(fpr), Some(fnr)) => Some((fpr - rho * (1.0 - fnr)) / (1.0 - rho)),
        _ => None,
    };
    let ppv = m.ppv.map(|v| v / (1.0 - gamma));
    let prevalence = m.prevalence.map(|v| v / (1.0 - gamma));
    let out = Metrics {
        fpr,
        fnr,
        ppv,
        npv: None,
        prevalence,
    };
    let inconsistent = [fpr, ppv, prevalence]
        .into_iter()
        .flatten()
        .any(|v| !(-1e-12..=1.0 + 1e-12).contains(&v));
    Ok(LabelDependent {
        metrics: out,
        inconsistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::ConfusionCounts;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn example() -> GroupConfusion {
        GroupConfusion::from_proportions(0.4, 0.2, 0.2, 0.2).unwrap()
    }

    fn counts(c00: u64, c01: u64, c10: u64, c11: u64) -> GroupConfusion {
        GroupConfusion::from_counts(ConfusionCounts { c00, c01, c10, c11 }).unwrap()
    }

    #[test]
    fn zero_alpha_collapses() {
        let cm = example();
        let m = cm.metrics();
        let b = metric_bounds(&cm, 0.0).unwrap();
        for metric in Metric::ALL {
            let mb = b.get(metric).unwrap();
            let obs = metric.observed(&m).unwrap();
            assert!(close(mb.lower, obs) && close(mb.upper, obs), "{metric:?}");
        }
    }

    #[test]
    fn fnr_interval_by_hand() {
        let b = metric_bounds(&example(), 0.1).unwrap();
        let fnr = b.fnr.unwrap();
        assert!(close(fnr.lower, 0.4) && close(fnr.upper, 0.6));
        assert_eq!(fnr.upper_at.alpha1, 0.0);
        let fpr = b.fpr.unwrap();
        assert!(close(fpr.lower, 0.1 / 0.5) && close(fpr.upper, 0.2 / 0.5));
        let ppv = b.ppv.unwrap();
        assert!(close(ppv.lower, 0.5) && close(ppv.upper, 0.75));
    }

    #[test]
    fn extreme_split_matches_lower_fpr() {
        let cm = example();
        let b = metric_bounds(&cm, 0.15).unwrap();
        let at = metric_at(&cm, &NoiseSpec::split(0.0, 0.15).unwrap()).unwrap();
        assert!(close(at.fpr.unwrap(), b.fpr.unwrap().lower));
        let at = metric_at(&cm, &NoiseSpec::split(0.15, 0.0).unwrap()).unwrap();
        assert!(close(at.fpr.unwrap(), b.fpr.unwrap().upper));
    }

    #[test]
    fn mass_beyond_negatives_is_infeasible() {
        let cm = example();
        assert!(matches!(
            metric_bounds(&cm, 0.61),
            Err(Error::InfeasibleNoise(_))
        ));
        let err = metric_at(&cm, &NoiseSpec::split(0.0, 0.25).unwrap()).unwrap_err();
        assert!(err.to_string().contains("p01"), "{err}");
    }

    #[test]
    fn clipped_range_when_alpha_exceeds_a_cell() {
        // p01 = 0.2 < α = 0.3: at least 0.1 must come from Ŷ = 0
        let b = metric_bounds(&example(), 0.3).unwrap();
        let fpr = b.fpr.unwrap();
        assert!(close(fpr.lower, 0.0));
        assert!(close(fpr.lower_at.alpha0, 0.1));
        assert!(close(fpr.upper, 0.2 / 0.3));
    }

    #[test]
    fn trichotomy_cases() {
        // FPR = 0.6, FNR = 0.5
        assert_eq!(
            trichotomy(&counts(2, 3, 1, 1)).unwrap(),
            Trichotomy::FnrUpFprDownExcluded
        );
        // FPR = 0.2, FNR = 0.5
        assert_eq!(
            trichotomy(&counts(4, 1, 1, 1)).unwrap(),
            Trichotomy::FnrDownFprUpExcluded
        );
        // FPR = 0.5, FNR = 0.5
        assert_eq!(
            trichotomy(&counts(1, 1, 1, 1)).unwrap(),
            Trichotomy::Boundary
        );
        assert!(trichotomy(&counts(0, 0, 1, 1)).is_err());
    }

    #[test]
    fn direction_thresholds() {
        let cm = counts(3, 1, 1, 2);
        let d = direction_conditions(&cm, &NoiseSpec::split(0.1, 0.02).unwrap()).unwrap();
        assert!(close(d.fpr_ratio.unwrap(), 1.0 / 3.0));
        assert!(close(d.fnr_ratio.unwrap(), 2.0));
        assert!(d.fpr_cond);
        assert!(!d.fnr_cond);
        assert!(direction_conditions(&cm, &NoiseSpec::split(0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn identical_groups_flip_immediately_on_ppv() {
        let cm = example();
        let curve = bound_curve(&cm, &cm, &default_alpha_grid()).unwrap();
        assert_eq!(curve.first_flip(Metric::Ppv), Some(0.005));
        let at_zero: Vec<_> = curve.points.iter().filter(|p| p.alpha == 0.0).collect();
        assert!(at_zero.iter().all(|p| !p.flip));
    }

    #[test]
    fn hand_built_crossing() {
        // noisy FNR = 0.25 vs baseline 0.5: FNR* upper = (0.125+α)/(0.5+α)
        // reaches 0.5 exactly at α = 0.25, so only α strictly above flips
        let noisy = GroupConfusion::from_proportions(0.375, 0.125, 0.125, 0.375).unwrap();
        let base = GroupConfusion::from_proportions(0.25, 0.25, 0.25, 0.25).unwrap();
        let grid = alpha_grid(0.0, 0.375, 0.125).unwrap();
        let curve = bound_curve(&noisy, &base, &grid).unwrap();
        assert_eq!(curve.first_flip(Metric::Fnr), Some(0.375));
        let table = curve.to_table();
        assert_eq!(
            table.header.join(","),
            "alpha,metric,lower,upper,reference,flip"
        );
    }

    #[test]
    fn label_dependent_cases() {
        let cm = example();
        let id = label_dependent_identities(&cm, 0.0, 0.0).unwrap();
        assert_eq!(id.metrics.fpr, cm.metrics().fpr);
        assert!(!id.inconsistent);

        // FPR = 0.3, FNR = 0.4
        let cm = GroupConfusion::from_proportions(0.35, 0.15, 0.2, 0.3).unwrap();
        let id = label_dependent_identities(&cm, 0.2, 0.0).unwrap();
        assert!(close(id.metrics.fpr.unwrap(), 0.225));
        assert_eq!(id.metrics.fnr, cm.metrics().fnr);

        // PPV = 0.8
        let cm = GroupConfusion::from_proportions(0.4, 0.1, 0.1, 0.4).unwrap();
        let id = label_dependent_identities(&cm, 0.0, 0.5).unwrap();
        assert!(close(id.metrics.ppv.unwrap(), 1.6));
        assert!(id.inconsistent);

        assert!(label_dependent_identities(&cm, 1.0, 0.0).is_err());
        assert!(label_dependent_identities(&cm, 0.0, 1.0).is_err());
    }
}
