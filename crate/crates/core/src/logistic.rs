//! Unpenalized logistic regression by damped Newton-Raphson, with Wald
//! standard errors from the observed information.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats::normal_two_sided_p;
use crate::{Error, Result};

/// Row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(cols: usize, rows: usize) -> Self {
        Self {
            cols,
            data: Vec::with_capacity(cols * rows),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols.max(1)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the score vector.
    pub tol: f64,
    /// Any coefficient beyond this magnitude is taken as separation.
    pub max_coef: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            max_coef: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    /// Two-sided Wald p-values.
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^η)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn linear(row: &[f64], beta: &[f64]) -> f64 {
    row.iter().zip(beta).map(|(x, b)| x * b).sum()
}

fn log_likelihood(x: &Design, y: &[bool], beta: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for (i, &yi) in y.iter().enumerate() {
        let eta = linear(x.row(i), beta);
        acc.add(if yi { eta } else { 0.0 } - softplus(eta));
    }
    acc.value()
}

/// Score vector `Xᵀ(y − σ)` and information `Xᵀ diag(σ(1−σ)) X`.
fn derivatives(x: &Design, y: &[bool], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let p = x.cols();
    let mut grad = vec![KahanSum::default(); p];
    let mut info = vec![KahanSum::default(); p * p];
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let mu = sigmoid(linear(row, beta));
        let r = f64::from(u8::from(yi)) - mu;
        let s = mu * (1.0 - mu);
        for a in 0..p {
            grad[a].add(r * row[a]);
            for b in a..p {
                info[a * p + b].add(s * row[a] * row[b]);
            }
        }
    }
    let g = DVector::from_iterator(p, grad.iter().map(KahanSum::value));
    let mut h = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = info[a * p + b].value();
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    (g, h)
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood fit of `P(y = 1 | x) = σ(xᵀβ)`.
///
/// Each Newton step is halved until the log-likelihood does not decrease.
/// `start` warm-starts the iteration.
pub fn fit_logistic(
    x: &Design,
    y: &[bool],
    start: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<LogisticFit> {
    let p = x.cols();
    if x.rows() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "design has {} rows for {} outcomes",
            x.rows(),
            y.len()
        )));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Degenerate(
            "logistic fit needs both outcome values".into(),
        ));
    }
    let mut beta: Vec<f64> = match start {
        Some(s) if s.len() == p && s.iter().all(|b| b.is_finite()) => s.to_vec(),
        _ => vec![0.0; p],
    };
    let mut ll = log_likelihood(x, y, &beta);
    let mut iterations = 0;
    let (mut grad, mut info) = derivatives(x, y, &beta);
    while sup_norm(&grad) >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                gradient: sup_norm(&grad),
            });
        }
        iterations += 1;
        let chol = info.clone().cholesky().ok_or(Error::Singular)?;
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(step.iter())
                .map(|(b, d)| b + t * d)
                .collect();
            let cand_ll = log_likelihood(x, y, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if let Some(b) = beta.iter().find(|b| b.abs() > opts.max_coef) {
            return Err(Error::Separation(*b));
        }
        (grad, info) = derivatives(x, y, &beta);
        if !accepted {
            return Err(Error::NonConvergence {
                iterations,
                gradient: sup_norm(&grad),
            });
        }
    }
    let cov = info.clone().cholesky().ok_or(Error::Singular)?.inverse();
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let z: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p_values = z.iter().map(|&z| normal_two_sided_p(z)).collect();
    Ok(LogisticFit {
        beta,
        se,
        z,
        p_values,
        converged: true,
        iterations,
        gradient_norm: sup_norm(&grad),
        log_likelihood: ll,
    })
}

/// Score vector `Xᵀ(y − σ(Xβ))`.
pub fn score_vector(x: &Design, y: &[bool], beta: &[f64]) -> Vec<f64> {
    derivatives(x, y, beta).0.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) == 0.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_matches_log_odds() {
        let mut x = Design::new(1);
        let y: Vec<bool> = (0..10).map(|i| i < 3).collect();
        for _ in 0..10 {
            x.push_row(&[1.0]);
        }
        let fit = fit_logistic(&x, &y, None, &NewtonOptions::default()).unwrap();
        assert!((fit.beta[0] - (3.0f64 / 7.0).ln()).abs() < 1e-10);
        // se of the log-odds is sqrt(1/3 + 1/7)
        assert!((fit.se[0] - (1.0 / 3.0 + 1.0 / 7.0f64).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn separation_is_reported() {
        let mut x = Design::new(2);
        let mut y = Vec::new();
        for i in 0..20 {
            x.push_row(&[1.0, i as f64]);
            y.push(i >= 10);
        }
        let err = fit_logistic(&x, &y, None, &NewtonOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::Separation(_) | Error::NonConvergence { .. }),
            "{err}"
        );
    }

    #[test]
    fn collinear_columns_are_singular() {
        let mut x = Design::new(2);
        let mut y = Vec::new();
        for i in 0..20 {
            x.push_row(&[1.0, 1.0]);
            y.push(i % 3 == 0);
        }
        assert!(matches!(
            fit_logistic(&x, &y, None, &NewtonOptions::default()),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }
}
