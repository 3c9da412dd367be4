//! Structural checks on a panel: dominant assets, survival of the account
//! over one rebalancing block, the growth/variance feasible region and the
//! two-fund property of the quadratic problem's optima.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{CompoundPanel, CostVector, ReturnPanel};
use crate::objective::{dot, exact_elg, MomentPair, SimplexWeight};
use crate::solver::{kkt_residual, solve_exact, SolveStatus, SolverConfig};

/// Default tolerance for the dominance ratios on analytic data.
pub const DEFAULT_DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub dominant_assets: Vec<usize>,
    /// `ratios[i][j]` estimates `E[(1 + x_i) / (1 + x_j)]`.
    pub ratios: Vec<Vec<f64>>,
}

/// Asset `j` is dominant when every other asset's expected fee-adjusted
/// gross return relative to `j` is at most `1 + tol`; the single-asset
/// portfolio `e_j` then maximizes the exact growth rate.
pub fn dominance_check(cp: &CompoundPanel, tol: f64) -> Result<DominanceReport> {
    let m = cp.num_assets();
    let s = cp.num_blocks();
    if s == 0 {
        return Err(Error::EmptyPanel);
    }
    for (sample, x) in cp.fee_adjusted().iter().enumerate() {
        if let Some(asset) = x.iter().position(|v| 1.0 + v <= 0.0) {
            return Err(Error::NonPositiveGross { asset, sample });
        }
    }
    let mut ratios = vec![vec![0.0; m]; m];
    for x in cp.fee_adjusted() {
        for i in 0..m {
            for j in 0..m {
                ratios[i][j] += (1.0 + x[i]) / (1.0 + x[j]);
            }
        }
    }
    for (i, row) in ratios.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v /= s as f64;
        }
        row[i] = 1.0;
    }
    let dominant_assets = (0..m)
        .filter(|&j| (0..m).all(|i| i == j || ratios[i][j] <= 1.0 + tol))
        .collect();
    Ok(DominanceReport {
        dominant_assets,
        ratios,
    })
}

/// Per-asset flag of the sufficient survival condition
/// `x_min_i > c_i^(1/n) - 1`. When every flag holds, wealth stays positive
/// over a block with probability one for any weight.
pub fn survival_sufficient(x_min: &[f64], costs: &CostVector, n: usize) -> Result<Vec<bool>> {
    if x_min.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: costs.len(),
            got: x_min.len(),
        });
    }
    if n == 0 {
        return Err(Error::ZeroPeriod);
    }
    Ok(x_min
        .iter()
        .zip(costs.costs())
        .map(|(x, c)| *x > c.powf(1.0 / n as f64) - 1.0)
        .collect())
}

/// Necessary survival condition `sum K_i ((1 + mu_i)^n - c_i) >= 0`. A
/// `false` result certifies that wealth cannot stay positive almost surely.
/// Requires every cost to be strictly positive.
pub fn survival_necessary(mu: &[f64], costs: &CostVector, n: usize, k: &[f64]) -> Result<bool> {
    if mu.len() != costs.len() || k.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: costs.len(),
            got: if mu.len() != costs.len() { mu.len() } else { k.len() },
        });
    }
    if !(costs.min_cost() > 0.0) {
        return Err(Error::ZeroCost);
    }
    let total: f64 = k
        .iter()
        .zip(mu)
        .zip(costs.costs())
        .map(|((ki, m), c)| ki * ((1.0 + m).powi(n as i32) - c))
        .sum();
    Ok(total >= 0.0)
}

/// Source of i.i.d. per-period return vectors.
pub trait ReturnSampler {
    fn num_assets(&self) -> usize;
    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Independent uniform returns on `[lo_i, hi_i]`.
#[derive(Debug, Clone)]
pub struct UniformBoxSampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ReturnSampler for UniformBoxSampler {
    fn num_assets(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for ((o, lo), hi) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = if hi > lo { rng.gen_range(*lo..=*hi) } else { *lo };
        }
    }
}

/// Finite distribution over whole return vectors.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    pub outcomes: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl ReturnSampler for DiscreteSampler {
    fn num_assets(&self) -> usize {
        self.outcomes.first().map_or(0, Vec::len)
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = self.outcomes.len() - 1;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        out.copy_from_slice(&self.outcomes[pick]);
    }
}

/// Resamples whole rows of an observed panel.
#[derive(Debug, Clone)]
pub struct BootstrapSampler<'a> {
    pub panel: &'a ReturnPanel,
}

impl ReturnSampler for BootstrapSampler<'_> {
    fn num_assets(&self) -> usize {
        self.panel.num_assets()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let t = rng.gen_range(0..self.panel.periods());
        out.copy_from_slice(&self.panel.samples()[t]);
    }
}

/// Fraction of simulated `n`-period blocks in which `1 + K'x <= 0` after
/// costs. Deterministic for a given seed.
pub fn survival_monte_carlo(
    sampler: &dyn ReturnSampler,
    k: &[f64],
    n: usize,
    costs: &CostVector,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let m = sampler.num_assets();
    if k.len() != m || costs.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: k.len(),
        });
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::ZeroPeriod);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0; m];
    let mut gross = vec![0.0; m];
    let mut failures = 0usize;
    for _ in 0..trials {
        gross.iter_mut().for_each(|g| *g = 1.0);
        for _ in 0..n {
            sampler.sample(&mut rng, &mut draw);
            for (g, x) in gross.iter_mut().zip(&draw) {
                *g *= 1.0 + x;
            }
        }
        let wealth: f64 = k
            .iter()
            .zip(&gross)
            .zip(costs.costs())
            .map(|((ki, g), c)| ki * (g - c))
            .sum();
        if wealth <= 0.0 {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub sufficient_ok: Vec<bool>,
    /// `None` when some cost is zero and the necessary test does not apply.
    pub necessary_ok: Option<bool>,
    pub mc_bankruptcy_rate: f64,
}

/// Runs the three survival checks for weight `k` on an observed panel; the
/// Monte Carlo part bootstraps the panel's rows.
pub fn survival_report(
    panel: &ReturnPanel,
    costs: &CostVector,
    n: usize,
    k: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SurvivalReport> {
    let sufficient_ok = survival_sufficient(&panel.min_returns(), costs, n)?;
    let necessary_ok = match survival_necessary(&panel.mean_returns(), costs, n, k) {
        Ok(flag) => Some(flag),
        Err(Error::ZeroCost) => None,
        Err(e) => return Err(e),
    };
    let mc_bankruptcy_rate = survival_monte_carlo(&BootstrapSampler { panel }, k, n, costs, trials, seed)?;
    Ok(SurvivalReport {
        sufficient_ok,
        necessary_ok,
        mc_bankruptcy_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Vertex,
    Sample,
    Optimum,
    /// Optimum of the quadratic approximation.
    ApproxOptimum,
    /// Convex combination of two other points.
    Combination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub weight: SimplexWeight,
    /// Growth rate in nats per period.
    pub elg: f64,
    /// Sample variance of the block log-return.
    pub log_variance: f64,
    pub on_frontier: bool,
    pub kind: PointKind,
}

/// Growth rate and log-return variance of weight `k`, or `None` when `k`
/// bankrupts some block.
pub fn growth_and_variance(cp: &CompoundPanel, k: &[f64]) -> Result<Option<(f64, f64)>> {
    let elg = exact_elg(cp, k)?;
    if !elg.finite {
        return Ok(None);
    }
    let logs: Vec<f64> = cp
        .fee_adjusted()
        .iter()
        .map(|x| (1.0 + dot(k, x)).ln())
        .collect();
    let s = logs.len();
    let mean = logs.iter().sum::<f64>() / s as f64;
    let var = if s > 1 {
        logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (s - 1) as f64
    } else {
        0.0
    };
    Ok(Some((elg.value, var)))
}

/// Samples the feasible region at the vertices, `samples` Dirichlet(1, ..., 1)
/// weights and the exact optimum, and flags the upper-left boundary: points
/// no other point beats on growth without also having more variance.
pub fn frontier(cp: &CompoundPanel, samples: usize, seed: u64, cfg: &SolverConfig) -> Result<Vec<FrontierPoint>> {
    if samples == 0 {
        return Err(Error::Config("frontier needs at least one sample".into()));
    }
    let m = cp.num_assets();
    let mut candidates: Vec<(SimplexWeight, PointKind)> = (0..m)
        .map(|j| (SimplexWeight::vertex(m, j), PointKind::Vertex))
        .collect();
    if m > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            candidates.push((dirichlet_uniform(&mut rng, m), PointKind::Sample));
        }
        let opt = solve_exact(cp, cfg)?;
        if opt.status != SolveStatus::InfeasibleExact {
            candidates.push((opt.weight, PointKind::Optimum));
        }
    }
    let mut points = Vec::with_capacity(candidates.len());
    for (weight, kind) in candidates {
        if let Some((elg, log_variance)) = growth_and_variance(cp, &weight)? {
            points.push(FrontierPoint {
                weight,
                elg,
                log_variance,
                on_frontier: false,
                kind,
            });
        }
    }
    mark_frontier(&mut points);
    Ok(points)
}

fn dirichlet_uniform(rng: &mut ChaCha8Rng, m: usize) -> SimplexWeight {
    let draws: Vec<f64> = (0..m)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let sum: f64 = draws.iter().sum();
    let mut w: Vec<f64> = draws.iter().map(|d| d / sum).collect();
    // absorb rounding so the weight passes the simplex check
    let drift = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    SimplexWeight::new(w).expect("normalized exponentials lie on the simplex")
}

/// Resets and recomputes the `on_frontier` flags over `points`.
pub fn mark_frontier(points: &mut [FrontierPoint]) {
    points.iter_mut().for_each(|p| p.on_frontier = false);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .log_variance
            .total_cmp(&points[b].log_variance)
            .then(points[b].elg.total_cmp(&points[a].elg))
    });
    let mut best = f64::NEG_INFINITY;
    let mut best_var = f64::NAN;
    for i in order {
        let p = &mut points[i];
        // exact duplicates of a frontier point share its status
        if p.elg > best || (p.elg == best && p.log_variance == best_var) {
            p.on_frontier = true;
            best = p.elg;
            best_var = p.log_variance;
        }
    }
}

/// KKT residuals of `alpha * k1 + (1 - alpha) * k2` for each alpha, after
/// checking that both endpoints satisfy the optimality conditions at `tol`.
pub fn two_fund_check(mom: &MomentPair, k1: &SimplexWeight, k2: &SimplexWeight, alphas: &[f64], tol: f64) -> Result<Vec<f64>> {
    for (which, k) in [(1, k1), (2, k2)] {
        let residual = kkt_residual(mom, k)?;
        if residual > tol {
            return Err(Error::InputNotOptimal { which, residual, tol });
        }
    }
    alphas
        .iter()
        .map(|&alpha| {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
            }
            let mixed = SimplexWeight::mix(k1, k2, alpha)?;
            kkt_residual(mom, &mixed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{compound, BlockMode};
    use crate::objective::moments;
    use crate::solver::solve_approx;

    #[test]
    fn deterministic_dominance() {
        let costs = CostVector::zeros(2);
        let cp = CompoundPanel::from_unnamed_blocks(1, vec![vec![0.1, 0.0]; 4], &costs).unwrap();
        let rep = dominance_check(&cp, 0.0).unwrap();
        assert!((rep.ratios[1][0] - 1.0 / 1.1).abs() < 1e-15);
        assert_eq!(rep.dominant_assets, vec![0]);
        assert_eq!(rep.ratios[0][0], 1.0);
        assert_eq!(rep.ratios[1][1], 1.0);
    }

    #[test]
    fn identical_assets_tie() {
        let costs = CostVector::zeros(2);
        let cp = CompoundPanel::from_unnamed_blocks(1, vec![vec![0.1, 0.1], vec![-0.1, -0.1]], &costs).unwrap();
        let rep = dominance_check(&cp, 0.0).unwrap();
        assert_eq!(rep.dominant_assets, vec![0, 1]);
    }

    #[test]
    fn dominance_needs_positive_gross() {
        let costs = CostVector::new(vec![0.5, 0.0], 0.9).unwrap();
        let cp = CompoundPanel::from_unnamed_blocks(1, vec![vec![-0.6, 0.0]], &costs).unwrap();
        assert!(matches!(dominance_check(&cp, 0.0), Err(Error::NonPositiveGross { asset: 0, sample: 0 })));
    }

    #[test]
    fn costless_ratio_factorizes_over_blocks() {
        // all ordered pairs of a 2-point law: compound blocks are exact products
        let outcomes = [(0.2, 0.05), (-0.1, 0.02)];
        let mut rows = Vec::new();
        for a in outcomes {
            for b in outcomes {
                rows.push(vec![a.0, a.1]);
                rows.push(vec![b.0, b.1]);
            }
        }
        let panel = ReturnPanel::new(vec!["X".into(), "Y".into()], rows, None).unwrap();
        let one = compound(&panel, 1, &CostVector::zeros(2), BlockMode::NonOverlapping).unwrap();
        let two = compound(&panel, 2, &CostVector::zeros(2), BlockMode::NonOverlapping).unwrap();
        let r1 = dominance_check(&one, 0.0).unwrap().ratios[0][1];
        let r2 = dominance_check(&two, 0.0).unwrap().ratios[0][1];
        assert!((r2 - r1 * r1).abs() < 1e-14);
    }

    #[test]
    fn sufficient_survival_thresholds() {
        let c = CostVector::uniform(1, 0.25).unwrap();
        assert_eq!(survival_sufficient(&[-0.4], &c, 2).unwrap(), vec![true]);
        assert_eq!(survival_sufficient(&[-0.6], &c, 2).unwrap(), vec![false]);
        let zero = CostVector::zeros(1);
        assert_eq!(survival_sufficient(&[-0.999], &zero, 1).unwrap(), vec![true]);
        let c = CostVector::uniform(1, 0.01).unwrap();
        assert_eq!(survival_sufficient(&[-0.001], &c, 10).unwrap(), vec![true]);
        assert_eq!(survival_sufficient(&[-0.001], &c, 10_000).unwrap(), vec![false]);
        assert_eq!(survival_sufficient(&[-1e-6], &c, 10_000_000).unwrap(), vec![false]);
    }

    #[test]
    fn necessary_survival_examples() {
        let c = CostVector::uniform(1, 0.01).unwrap();
        assert!(survival_necessary(&[0.1], &c, 1, &[1.0]).unwrap());
        let c = CostVector::uniform(1, 0.5).unwrap();
        assert!(!survival_necessary(&[-0.6], &c, 1, &[1.0]).unwrap());
        let c = CostVector::uniform(2, 0.5).unwrap();
        assert!(survival_necessary(&[-0.75, -0.25], &c, 1, &[0.5, 0.5]).unwrap());
        assert_eq!(survival_necessary(&[0.1], &CostVector::zeros(1), 1, &[1.0]), Err(Error::ZeroCost));
    }

    #[test]
    fn monte_carlo_examples() {
        let doom = DiscreteSampler {
            outcomes: vec![vec![-0.9]],
            probabilities: vec![1.0],
        };
        let c = CostVector::uniform(1, 0.2).unwrap();
        assert_eq!(survival_monte_carlo(&doom, &[1.0], 1, &c, 1000, 1).unwrap(), 1.0);

        let cash = UniformBoxSampler {
            lo: vec![-0.5, 0.0],
            hi: vec![0.5, 0.0],
        };
        let c = CostVector::new(vec![0.6, 0.0], 0.9).unwrap();
        assert_eq!(survival_monte_carlo(&cash, &[0.0, 1.0], 3, &c, 1000, 2).unwrap(), 0.0);
        let a = survival_monte_carlo(&cash, &[1.0, 0.0], 3, &c, 1000, 9).unwrap();
        let b = survival_monte_carlo(&cash, &[1.0, 0.0], 3, &c, 1000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn frontier_single_asset() {
        let cp = CompoundPanel::from_unnamed_blocks(1, vec![vec![0.1], vec![-0.05]], &CostVector::zeros(1)).unwrap();
        let pts = frontier(&cp, 10, 0, &SolverConfig::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].on_frontier);
    }

    #[test]
    fn frontier_optimum_tops_growth() {
        let rows = vec![vec![0.1, -0.02, 0.0], vec![-0.05, 0.04, 0.0], vec![0.07, 0.01, 0.0], vec![-0.03, 0.03, 0.0]];
        let cp = CompoundPanel::from_unnamed_blocks(1, rows, &CostVector::zeros(3)).unwrap();
        let pts = frontier(&cp, 300, 7, &SolverConfig::default()).unwrap();
        let opt = pts.iter().find(|p| p.kind == PointKind::Optimum).unwrap();
        assert!(pts.iter().all(|p| p.elg <= opt.elg + 1e-9));
        assert!(opt.on_frontier);
        assert!(pts.iter().all(|p| p.log_variance >= 0.0));
        // growth never falls along the frontier as variance rises
        let mut front: Vec<&FrontierPoint> = pts.iter().filter(|p| p.on_frontier).collect();
        front.sort_by(|a, b| a.log_variance.total_cmp(&b.log_variance));
        assert!(front.windows(2).all(|w| w[1].elg >= w[0].elg));
    }

    #[test]
    fn two_fund_endpoints_and_errors() {
        let rows = vec![vec![0.1, -0.02], vec![-0.05, 0.04], vec![0.07, 0.01]];
        let cp = CompoundPanel::from_unnamed_blocks(1, rows, &CostVector::zeros(2)).unwrap();
        let mom = moments(&cp).unwrap();
        let opt = solve_approx(&mom, 1, &SolverConfig::default()).unwrap().weight;
        let res = two_fund_check(&mom, &opt, &opt, &[0.0, 0.3, 1.0], 1e-8).unwrap();
        assert!(res.iter().all(|r| *r <= 1e-8));
        let base = kkt_residual(&mom, &opt).unwrap();
        assert_eq!(res[0], base);
        assert_eq!(res[2], base);
        let bad = SimplexWeight::vertex(2, 1);
        assert!(matches!(
            two_fund_check(&mom, &opt, &bad, &[0.5], 1e-8),
            Err(Error::InputNotOptimal { which: 2, .. })
        ));
    }
}
