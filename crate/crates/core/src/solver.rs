//! Projected-gradient ascent over the unit simplex for both growth
//! objectives, the first-order optimality certificate, and a lattice oracle
//! used to cross-check the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::CompoundPanel;
use crate::objective::{
    approx_elg, approx_gradient, dot, exact_elg, exact_gradient_unscaled, MomentPair, ObjectiveValue,
    SimplexWeight,
};

/// A coordinate counts as active (strictly positive) above this value.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Largest lattice [`grid_oracle`] will enumerate.
pub const MAX_LATTICE_POINTS: u128 = 10_000_000;

const MAX_BACKTRACKS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub step_init: f64,
    pub armijo_c: f64,
    pub grid_step: f64,
    /// Keep the objective value of every accepted iterate.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 100_000,
            kkt_tol: 1e-8,
            step_init: 1.0,
            armijo_c: 1e-4,
            grid_step: 0.01,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.kkt_tol, self.step_init, self.armijo_c, self.grid_step];
        if self.max_iters == 0 || positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("solver parameters must be positive".into()));
        }
        if self.kkt_tol >= 1.0 || self.armijo_c >= 1.0 {
            return Err(Error::Config("kkt_tol and armijo_c must be below 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    /// No starting point keeps wealth positive in every sample.
    InfeasibleExact,
    /// Best point of a lattice search; carries no convergence claim.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub weight: SimplexWeight,
    pub objective: ObjectiveValue,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Euclidean projection onto the unit simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> SimplexWeight {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        w.iter_mut().for_each(|x| *x /= sum);
    }
    SimplexWeight::new(w).expect("projection lands on the simplex")
}

/// Max violation of the simplex first-order conditions for an ascent
/// problem with gradient `grad`: with `d_i = grad_i - K'grad`, active
/// coordinates need `d_i = 0` and inactive ones `d_i <= 0`.
fn residual_from_gradient(grad: &[f64], k: &[f64]) -> f64 {
    let lambda = dot(k, grad);
    grad.iter()
        .zip(k)
        .map(|(g, &ki)| {
            let d = g - lambda;
            if ki > ACTIVE_TOL {
                d.abs()
            } else {
                d.max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Optimality residual of the quadratic problem: for each `i`,
/// `E[x_i] - sum_j K_j E[x_i x_j]` against `K'E[x] - K'E[xx']K`.
pub fn kkt_residual(mom: &MomentPair, k: &[f64]) -> Result<f64> {
    let grad = approx_gradient(mom, 1, k)?;
    Ok(residual_from_gradient(&grad, k))
}

/// The same first-order residual built from the exact objective's gradient
/// `E[x / (1 + K'x)]`.
pub fn exact_kkt_residual(cp: &CompoundPanel, k: &[f64]) -> Result<f64> {
    let grad = exact_gradient_unscaled(cp, k)?;
    Ok(residual_from_gradient(&grad, k))
}

trait AscentProblem {
    fn value(&self, k: &[f64]) -> ObjectiveValue;
    /// Gradient without the `1/n` factor of the objective.
    fn gradient(&self, k: &[f64]) -> Vec<f64>;
    fn period(&self) -> f64;
}

struct ExactProblem<'a>(&'a CompoundPanel);

impl AscentProblem for ExactProblem<'_> {
    fn value(&self, k: &[f64]) -> ObjectiveValue {
        exact_elg(self.0, k).expect("dimensions checked by caller")
    }

    fn gradient(&self, k: &[f64]) -> Vec<f64> {
        exact_gradient_unscaled(self.0, k).expect("iterates stay in the log domain")
    }

    fn period(&self) -> f64 {
        self.0.period() as f64
    }
}

struct ApproxProblem<'a>(&'a MomentPair, usize);

impl AscentProblem for ApproxProblem<'_> {
    fn value(&self, k: &[f64]) -> ObjectiveValue {
        approx_elg(self.0, self.1, k).expect("dimensions checked by caller")
    }

    fn gradient(&self, k: &[f64]) -> Vec<f64> {
        approx_gradient(self.0, 1, k).expect("dimensions checked by caller")
    }

    fn period(&self) -> f64 {
        self.1 as f64
    }
}

/// Projected gradient ascent with Barzilai-Borwein trial steps and Armijo
/// backtracking. Steps leaving the log domain evaluate to `-inf` and are
/// rejected by the sufficient-increase test.
fn ascend(problem: &dyn AscentProblem, start: SimplexWeight, cfg: &SolverConfig) -> SolveReport {
    let mut k = start;
    let mut value = problem.value(&k);
    let mut grad = problem.gradient(&k);
    let mut residual = residual_from_gradient(&grad, &k);
    let mut step = cfg.step_init;
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(value.value);
    }
    let period = problem.period();
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIters;

    while iterations < cfg.max_iters {
        if residual <= cfg.kkt_tol {
            status = SolveStatus::Converged;
            break;
        }
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = k.iter().zip(&grad).map(|(x, g)| x + t * g).collect();
            let candidate = project_simplex(&trial);
            let ascent: f64 = candidate
                .iter()
                .zip(k.iter())
                .zip(&grad)
                .map(|((c, x), g)| (c - x) * g)
                .sum();
            if ascent <= 0.0 && candidate.as_slice() == k.as_slice() {
                break;
            }
            let cand_value = problem.value(&candidate);
            if cand_value.finite && cand_value.value >= value.value + cfg.armijo_c * ascent / period {
                accepted = Some((candidate, cand_value, t));
                break;
            }
            // Near the optimum the Armijo increment drops below the rounding
            // of the objective; a non-decreasing step that shrinks the
            // residual is still progress.
            if cand_value.finite && cand_value.value >= value.value {
                let cand_grad = problem.gradient(&candidate);
                if residual_from_gradient(&cand_grad, &candidate) < residual {
                    accepted = Some((candidate, cand_value, t));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, next_value, used)) = accepted else {
            break;
        };
        let next_grad = problem.gradient(&next);
        let s: Vec<f64> = next.iter().zip(k.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let ss = dot(&s, &s);
        let sy = -dot(&s, &y);
        step = if sy > 1e-300 && ss > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (used * 4.0).min(1e12)
        };
        k = next;
        value = next_value;
        grad = next_grad;
        residual = residual_from_gradient(&grad, &k);
        if cfg.record_trace {
            trace.push(value.value);
        }
    }
    if status != SolveStatus::Converged && residual <= cfg.kkt_tol {
        status = SolveStatus::Converged;
    }
    SolveReport {
        weight: k,
        objective: value,
        kkt_residual: residual,
        iterations,
        status,
        trace,
    }
}

/// Maximizes the exact growth rate over the simplex.
///
/// Starts at the uniform weight, or at the best feasible vertex when the
/// uniform weight bankrupts some sample. Returns
/// [`SolveStatus::InfeasibleExact`] when neither is available.
pub fn solve_exact(cp: &CompoundPanel, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if cp.num_blocks() == 0 {
        return Err(Error::EmptyPanel);
    }
    let m = cp.num_assets();
    let problem = ExactProblem(cp);
    let uniform = SimplexWeight::uniform(m);
    let start = if problem.value(&uniform).finite {
        Some(uniform.clone())
    } else {
        (0..m)
            .map(|j| SimplexWeight::vertex(m, j))
            .map(|v| (problem.value(&v), v))
            .filter(|(val, _)| val.finite)
            .max_by(|a, b| a.0.value.total_cmp(&b.0.value))
            .map(|(_, v)| v)
    };
    let Some(start) = start else {
        return Ok(SolveReport {
            objective: problem.value(&uniform),
            weight: uniform,
            kkt_residual: f64::INFINITY,
            iterations: 0,
            status: SolveStatus::InfeasibleExact,
            trace: Vec::new(),
        });
    };
    Ok(ascend(&problem, start, cfg))
}

/// Maximizes the quadratic approximation over the simplex.
pub fn solve_approx(mom: &MomentPair, n: usize, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::ZeroPeriod);
    }
    if mom.dim() == 0 {
        return Err(Error::EmptyPanel);
    }
    let problem = ApproxProblem(mom, n);
    Ok(ascend(&problem, SimplexWeight::uniform(mom.dim()), cfg))
}

#[derive(Debug, Clone, Copy)]
pub enum GridObjective<'a> {
    Exact(&'a CompoundPanel),
    Approx(&'a MomentPair, usize),
}

impl GridObjective<'_> {
    fn dim(&self) -> usize {
        match self {
            GridObjective::Exact(cp) => cp.num_assets(),
            GridObjective::Approx(mom, _) => mom.dim(),
        }
    }

    fn value(&self, k: &[f64]) -> Result<ObjectiveValue> {
        match self {
            GridObjective::Exact(cp) => exact_elg(cp, k),
            GridObjective::Approx(mom, n) => approx_elg(mom, *n, k),
        }
    }

    fn residual(&self, k: &[f64]) -> Result<f64> {
        match self {
            GridObjective::Exact(cp) => exact_kkt_residual(cp, k),
            GridObjective::Approx(mom, _) => kkt_residual(mom, k),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Exhaustive search over `{K : K_i = k_i * step, sum k_i = 1/step}`.
pub fn grid_oracle(objective: GridObjective<'_>, step: f64) -> Result<SolveReport> {
    let m = objective.dim();
    if m == 0 {
        return Err(Error::EmptyPanel);
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidGridStep(step));
    }
    let cells = (1.0 / step).round() as usize;
    if cells == 0 || ((cells as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidGridStep(step));
    }
    let points = binomial((cells + m - 1) as u128, (m - 1) as u128);
    if points > MAX_LATTICE_POINTS {
        return Err(Error::LatticeTooLarge {
            points,
            limit: MAX_LATTICE_POINTS,
        });
    }
    let mut best: Option<(Vec<f64>, ObjectiveValue)> = None;
    let mut visited = 0usize;
    let mut counts = vec![0usize; m];
    let mut failure = None;
    for_each_composition(&mut counts, 0, cells, &mut |counts| {
        if failure.is_some() {
            return;
        }
        let k: Vec<f64> = counts.iter().map(|&c| c as f64 / cells as f64).collect();
        match objective.value(&k) {
            Ok(val) => {
                visited += 1;
                if val.finite && best.as_ref().map_or(true, |(_, b)| val.value > b.value) {
                    best = Some((k, val));
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let Some((k, val)) = best else {
        let k = SimplexWeight::uniform(m);
        return Ok(SolveReport {
            objective: objective.value(&k)?,
            weight: k,
            kkt_residual: f64::INFINITY,
            iterations: visited,
            status: SolveStatus::InfeasibleExact,
            trace: Vec::new(),
        });
    };
    let weight = SimplexWeight::new(k)?;
    Ok(SolveReport {
        kkt_residual: objective.residual(&weight)?,
        weight,
        objective: val,
        iterations: visited,
        status: SolveStatus::Lattice,
        trace: Vec::new(),
    })
}

/// Calls `visit` on every way of splitting `remaining` units over
/// `counts[idx..]`.
fn for_each_composition(counts: &mut [usize], idx: usize, remaining: usize, visit: &mut dyn FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        for_each_composition(counts, idx + 1, remaining - c, visit);
    }
}
