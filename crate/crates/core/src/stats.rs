//! Distribution tails used by the hypothesis tests.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::{erf, gamma};

use crate::{Error, Result};

/// Upper tail `P(X > x)` of a chi-squared variable with `df` degrees of freedom,
/// via the regularized upper incomplete gamma function `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(df as f64 / 2.0, x / 2.0)
}

/// Critical value `c` with `P(X > c) = level`.
pub fn chi2_critical(level: f64, df: usize) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {level}"
        )));
    }
    if df == 0 {
        return Err(Error::InvalidParameter("zero degrees of freedom".into()));
    }
    // chi2_sf is strictly decreasing; bracket then bisect.
    let mut lo = 0.0;
    let mut hi = df as f64 + 10.0;
    while chi2_sf(hi, df) > level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, df) > level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-sided normal tail `P(|Z| > |z|)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Linear-interpolation sample quantile (the default "type 7" rule).
/// `q = 1` returns the maximum.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}
