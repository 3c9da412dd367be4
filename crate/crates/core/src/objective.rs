//! Exact and quadratic expected-log-growth objectives over a compound panel.
//!
//! Growth rates are in nats per elementary period: both objectives carry the
//! `1/n` factor of the rebalancing period.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::CompoundPanel;

/// Tolerance on `sum(K) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Long-only, fully invested weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexWeight(Vec<f64>);

impl SimplexWeight {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NotOnSimplex("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::NotOnSimplex(format!("entry {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(SimplexWeight(weights))
    }

    pub fn uniform(m: usize) -> Self {
        SimplexWeight(vec![1.0 / m as f64; m])
    }

    /// Unit vector `e_j`.
    pub fn vertex(m: usize, j: usize) -> Self {
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        SimplexWeight(w)
    }

    /// `alpha * a + (1 - alpha) * b`.
    pub fn mix(a: &SimplexWeight, b: &SimplexWeight, alpha: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        SimplexWeight::new(
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &SimplexWeight) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for SimplexWeight {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Sample first and raw second moments of the fee-adjusted returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: Vec<f64>,
    pub second_moment: Vec<Vec<f64>>,
}

impl MomentPair {
    /// Validates symmetry (1e-12) and positive semidefiniteness (smallest
    /// eigenvalue above -1e-10).
    pub fn new(mean: Vec<f64>, second_moment: Vec<Vec<f64>>) -> Result<Self> {
        let m = mean.len();
        if second_moment.len() != m || second_moment.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: second_moment.len(),
            });
        }
        for i in 0..m {
            for j in 0..i {
                if (second_moment[i][j] - second_moment[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidMoments);
                }
            }
        }
        if m > 0 {
            let mat = DMatrix::from_fn(m, m, |i, j| second_moment[i][j]);
            let min_eig = mat.symmetric_eigenvalues().min();
            if !(min_eig >= -1e-10) {
                return Err(Error::InvalidMoments);
            }
        }
        Ok(MomentPair {
            mean,
            second_moment,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn times(&self, k: &[f64]) -> Vec<f64> {
        self.second_moment
            .iter()
            .map(|row| dot(row, k))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Nats per period; `-inf` when any sample leaves the log domain.
    pub value: f64,
    pub finite: bool,
    pub domain_violations: usize,
}

impl ObjectiveValue {
    fn finite(value: f64) -> Self {
        ObjectiveValue {
            value,
            finite: true,
            domain_violations: 0,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Column means and `(1/S) sum x x'` of the fee-adjusted blocks.
pub fn moments(cp: &CompoundPanel) -> Result<MomentPair> {
    let s = cp.num_blocks();
    if s == 0 {
        return Err(Error::EmptyPanel);
    }
    let m = cp.num_assets();
    let mut mean = vec![0.0; m];
    let mut second = vec![vec![0.0; m]; m];
    for x in cp.fee_adjusted() {
        for i in 0..m {
            mean[i] += x[i];
            for j in 0..=i {
                second[i][j] += x[i] * x[j];
            }
        }
    }
    let inv = 1.0 / s as f64;
    for i in 0..m {
        mean[i] *= inv;
        for j in 0..=i {
            second[i][j] *= inv;
            second[j][i] = second[i][j];
        }
    }
    Ok(MomentPair {
        mean,
        second_moment: second,
    })
}

/// `(1/n) * mean_s log(1 + K'x_s)` over fee-adjusted blocks.
pub fn exact_elg(cp: &CompoundPanel, k: &[f64]) -> Result<ObjectiveValue> {
    check_dim(cp.num_assets(), k.len())?;
    if cp.num_blocks() == 0 {
        return Err(Error::EmptyPanel);
    }
    let mut total = 0.0;
    let mut violations = 0;
    for x in cp.fee_adjusted() {
        let gross = 1.0 + dot(k, x);
        if gross > 0.0 {
            total += gross.ln();
        } else {
            violations += 1;
        }
    }
    if violations > 0 {
        return Ok(ObjectiveValue {
            value: f64::NEG_INFINITY,
            finite: false,
            domain_violations: violations,
        });
    }
    Ok(ObjectiveValue::finite(
        total / (cp.num_blocks() as f64 * cp.period() as f64),
    ))
}

/// Per-sample `1 + K'x`, failing on the first non-positive entry count.
fn gross_values(cp: &CompoundPanel, k: &[f64]) -> Result<Vec<f64>> {
    check_dim(cp.num_assets(), k.len())?;
    if cp.num_blocks() == 0 {
        return Err(Error::EmptyPanel);
    }
    let gross: Vec<f64> = cp.fee_adjusted().iter().map(|x| 1.0 + dot(k, x)).collect();
    let count = gross.iter().filter(|g| **g <= 0.0).count();
    if count > 0 {
        return Err(Error::DomainViolation { count });
    }
    Ok(gross)
}

/// Unscaled gradient `mean_s x_s / (1 + K'x_s)`.
pub(crate) fn exact_gradient_unscaled(cp: &CompoundPanel, k: &[f64]) -> Result<Vec<f64>> {
    let gross = gross_values(cp, k)?;
    let m = cp.num_assets();
    let mut grad = vec![0.0; m];
    for (x, g) in cp.fee_adjusted().iter().zip(&gross) {
        for i in 0..m {
            grad[i] += x[i] / g;
        }
    }
    let inv = 1.0 / cp.num_blocks() as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    Ok(grad)
}

/// Gradient of [`exact_elg`] with respect to `K`.
pub fn exact_gradient(cp: &CompoundPanel, k: &[f64]) -> Result<Vec<f64>> {
    let n = cp.period() as f64;
    Ok(exact_gradient_unscaled(cp, k)?
        .into_iter()
        .map(|g| g / n)
        .collect())
}

/// Quadratic approximation `(1/n)(K'mu - K'MK/2)`.
pub fn approx_elg(mom: &MomentPair, n: usize, k: &[f64]) -> Result<ObjectiveValue> {
    check_dim(mom.dim(), k.len())?;
    let mk = mom.times(k);
    let value = (dot(k, &mom.mean) - 0.5 * dot(k, &mk)) / n as f64;
    Ok(ObjectiveValue::finite(value))
}

/// `(1/n)(mu - M K)`.
pub fn approx_gradient(mom: &MomentPair, n: usize, k: &[f64]) -> Result<Vec<f64>> {
    check_dim(mom.dim(), k.len())?;
    let mk = mom.times(k);
    Ok(mom
        .mean
        .iter()
        .zip(&mk)
        .map(|(mu, v)| (mu - v) / n as f64)
        .collect())
}

/// Sample estimate of `log E[(1 + K*'x) / (1 + K^'x)]`, the Jensen upper
/// bound on the growth lost by trading `k_hat` instead of `k_star`. It is
/// nonnegative whenever `k_star` maximizes the exact objective.
pub fn approximation_gap_bound(cp: &CompoundPanel, k_star: &[f64], k_hat: &[f64]) -> Result<f64> {
    let num = gross_values(cp, k_star)?;
    let den = gross_values(cp, k_hat)?;
    let mean = num.iter().zip(&den).map(|(a, b)| a / b).sum::<f64>() / num.len() as f64;
    Ok(mean.ln())
}

/// Fraction of blocks with `|K'x| > 1`, where the log series behind the
/// quadratic approximation stops converging.
pub fn taylor_violation_fraction(cp: &CompoundPanel, k: &[f64]) -> Result<f64> {
    check_dim(cp.num_assets(), k.len())?;
    if cp.num_blocks() == 0 {
        return Err(Error::EmptyPanel);
    }
    let bad = cp
        .fee_adjusted()
        .iter()
        .filter(|x| dot(k, x).abs() > 1.0)
        .count();
    Ok(bad as f64 / cp.num_blocks() as f64)
}
