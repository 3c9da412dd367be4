//! Account simulation with proportional costs charged at every rebalance,
//! and the performance metrics used to compare strategies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{CostVector, ReturnPanel};
use crate::objective::SimplexWeight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Rebalance to the same weight every `n` periods.
    Fixed(SimplexWeight),
    /// One purchase at the start, no further trades.
    BuyAndHold(SimplexWeight),
    /// Weight for each rebalancing block, in order.
    Schedule(Vec<SimplexWeight>),
}

impl Strategy {
    pub fn equal_weight_buy_and_hold(m: usize) -> Strategy {
        Strategy::BuyAndHold(SimplexWeight::uniform(m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub n: usize,
    pub costs: CostVector,
    /// Per-period riskless rate, used by the Sharpe ratio.
    pub r_f: f64,
    pub initial_value: f64,
    pub strategy: Strategy,
}

impl BacktestConfig {
    pub fn new(n: usize, costs: CostVector, r_f: f64, strategy: Strategy) -> Self {
        BacktestConfig {
            n,
            costs,
            r_f,
            initial_value: 1.0,
            strategy,
        }
    }
}

/// Cumulative return, log growth, volatility, maximum drawdown and the
/// horizon-scaled Sharpe ratio of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cumulative_return: f64,
    pub log_growth: f64,
    pub volatility: f64,
    pub max_drawdown: f64,
    pub sharpe: f64,
    /// Sharpe ratio undefined (fewer than two returns or zero dispersion);
    /// reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub trajectory: Vec<f64>,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Wealth hit zero or below; the trajectory ends there.
    pub bankrupt: bool,
    pub rebalances: usize,
    pub total_costs: f64,
}

impl BacktestReport {
    /// CSV with columns `period,value`.
    pub fn write_trajectory_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["period", "value"])?;
        for (t, v) in self.trajectory.iter().enumerate() {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn max_drawdown(trajectory: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in trajectory {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    worst
}

/// Metrics of a strictly positive value series. Standard deviations use the
/// `N - 1` normalizer; the Sharpe ratio is `sqrt(N) (mean - r_f) / s`.
pub fn metrics(trajectory: &[f64], r_f: f64) -> Result<Metrics> {
    if trajectory.len() < 2 {
        return Err(Error::TrajectoryTooShort);
    }
    if let Some((index, &value)) = trajectory
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::NonPositiveValue { index, value });
    }
    let v0 = trajectory[0];
    let vn = trajectory[trajectory.len() - 1];
    let ratio = vn / v0;
    let returns: Vec<f64> = trajectory.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let (volatility, sharpe, degenerate) = if returns.len() < 2 {
        (0.0, 0.0, true)
    } else {
        let s = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if s > 0.0 {
            (s, n.sqrt() * (mean - r_f) / s, false)
        } else {
            (0.0, 0.0, true)
        }
    };
    Ok(Metrics {
        cumulative_return: ratio - 1.0,
        log_growth: ratio.ln(),
        volatility,
        max_drawdown: max_drawdown(trajectory),
        sharpe,
        degenerate,
    })
}

/// Simulates the account.
///
/// At the start of each block of `n` periods the account buys `K_i V` of
/// asset `i` and pays `sum K_i c_i V` in costs. Within the block the share
/// counts are fixed, so each period is marked at
/// `V_start + sum u_i (G_i - 1) - cost` with `G_i` the gross return so far;
/// at the block end this equals `(1 + K'(X_n - c)) V_start`. A trailing
/// partial block is traded the same way.
pub fn run_backtest(panel: &ReturnPanel, cfg: &BacktestConfig) -> Result<BacktestReport> {
    let m = panel.num_assets();
    let t_total = panel.periods();
    if cfg.n == 0 {
        return Err(Error::ZeroPeriod);
    }
    if t_total < cfg.n {
        return Err(Error::PeriodExceedsData {
            n: cfg.n,
            available: t_total,
        });
    }
    if !(cfg.initial_value.is_finite() && cfg.initial_value > 0.0) {
        return Err(Error::Config("initial value must be positive".into()));
    }
    if cfg.costs.len() != m {
        return Err(Error::CostLengthMismatch {
            expected: m,
            got: cfg.costs.len(),
        });
    }
    let blocks: Vec<(usize, usize)> = match &cfg.strategy {
        Strategy::BuyAndHold(_) => vec![(0, t_total)],
        _ => (0..t_total)
            .step_by(cfg.n)
            .map(|s| (s, (s + cfg.n).min(t_total)))
            .collect(),
    };
    let weight_for = |b: usize| -> &SimplexWeight {
        match &cfg.strategy {
            Strategy::Fixed(k) | Strategy::BuyAndHold(k) => k,
            Strategy::Schedule(ks) => &ks[b],
        }
    };
    if let Strategy::Schedule(ks) = &cfg.strategy {
        if ks.len() < blocks.len() {
            return Err(Error::ScheduleTooShort {
                expected: blocks.len(),
                got: ks.len(),
            });
        }
    }
    for b in 0..blocks.len() {
        if weight_for(b).len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: weight_for(b).len(),
            });
        }
    }

    let mut value = cfg.initial_value;
    let mut trajectory = Vec::with_capacity(t_total + 1);
    trajectory.push(value);
    let mut bankrupt = false;
    let mut rebalances = 0;
    let mut total_costs = 0.0;
    let mut growth = vec![0.0; m];
    'blocks: for (b, &(start, end)) in blocks.iter().enumerate() {
        let k = weight_for(b);
        let alloc: Vec<f64> = k.iter().map(|w| w * value).collect();
        let cost: f64 = alloc.iter().zip(cfg.costs.costs()).map(|(u, c)| u * c).sum();
        total_costs += cost;
        rebalances += 1;
        growth.iter_mut().for_each(|g| *g = 0.0);
        let start_value = value;
        for row in &panel.samples()[start..end] {
            for (g, x) in growth.iter_mut().zip(row) {
                *g = *g + x + *g * x;
            }
            let gain: f64 = alloc.iter().zip(&growth).map(|(u, g)| u * g).sum();
            value = start_value + gain - cost;
            trajectory.push(value);
            if value <= 0.0 {
                bankrupt = true;
                break 'blocks;
            }
        }
    }

    let metrics = if bankrupt {
        let positive = &trajectory[..trajectory.len() - 1];
        let mut m = if positive.len() >= 2 {
            metrics(positive, cfg.r_f)?
        } else {
            Metrics {
                cumulative_return: 0.0,
                log_growth: 0.0,
                volatility: 0.0,
                max_drawdown: 0.0,
                sharpe: 0.0,
                degenerate: true,
            }
        };
        m.cumulative_return = value / cfg.initial_value - 1.0;
        m.log_growth = f64::NEG_INFINITY;
        m.max_drawdown = max_drawdown(&trajectory);
        m
    } else {
        metrics(&trajectory, cfg.r_f)?
    };
    Ok(BacktestReport {
        trajectory,
        metrics,
        bankrupt,
        rebalances,
        total_costs,
    })
}

/// Runs every configuration on the same panel, concurrently; reports come
/// back in input order.
pub fn compare_strategies(panel: &ReturnPanel, cfgs: &[BacktestConfig]) -> Result<Vec<BacktestReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| scope.spawn(move || run_backtest(panel, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("backtest thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(returns: &[f64]) -> ReturnPanel {
        ReturnPanel::new(vec!["A".into()], returns.iter().map(|r| vec![*r]).collect(), None).unwrap()
    }

    #[test]
    fn idle_cash_account() {
        let panel = ReturnPanel::new(vec!["A".into(), "CASH".into()], vec![vec![0.1, 0.0], vec![-0.2, 0.0]], Some(1)).unwrap();
        let cfg = BacktestConfig::new(1, CostVector::zeros(2), 0.0, Strategy::Fixed(SimplexWeight::vertex(2, 1)));
        let rep = run_backtest(&panel, &cfg).unwrap();
        assert_eq!(rep.trajectory, vec![1.0, 1.0, 1.0]);
        let m = rep.metrics;
        assert_eq!((m.cumulative_return, m.log_growth, m.volatility, m.max_drawdown, m.sharpe), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(m.degenerate);
    }

    #[test]
    fn hand_recursion() {
        let cfg = BacktestConfig::new(1, CostVector::zeros(1), 0.0, Strategy::Fixed(SimplexWeight::vertex(1, 0)));
        let rep = run_backtest(&single(&[0.2, -0.25]), &cfg).unwrap();
        assert!((rep.trajectory[1] - 1.2).abs() < 1e-15);
        assert!((rep.trajectory[2] - 0.9).abs() < 1e-15);
        assert!((rep.metrics.cumulative_return + 0.1).abs() < 1e-15);
        assert!((rep.metrics.max_drawdown - 0.25).abs() < 1e-15);

        let cfg = BacktestConfig::new(1, CostVector::uniform(1, 0.1).unwrap(), 0.0, Strategy::Fixed(SimplexWeight::vertex(1, 0)));
        let rep = run_backtest(&single(&[0.2, -0.25]), &cfg).unwrap();
        assert!((rep.trajectory[1] - 1.1).abs() < 1e-15);
        assert!((rep.trajectory[2] - 0.715).abs() < 1e-15);
    }

    #[test]
    fn metric_fixtures() {
        let m = metrics(&[1.0, 1.2, 0.9, 1.1], 0.0).unwrap();
        assert!((m.max_drawdown - 0.25).abs() < 1e-15);
        assert!((m.cumulative_return - 0.1).abs() < 1e-15);
        assert!(!m.degenerate);

        let m = metrics(&[2.0, 2.0, 2.0], 0.0).unwrap();
        assert_eq!((m.volatility, m.sharpe, m.degenerate), (0.0, 0.0, true));

        let m = metrics(&[1.0, 1.1], 0.0).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.sharpe, 0.0);

        assert!(matches!(metrics(&[1.0, 0.0], 0.0), Err(Error::NonPositiveValue { index: 1, .. })));
        assert_eq!(metrics(&[1.0], 0.0), Err(Error::TrajectoryTooShort));
    }

    #[test]
    fn sharpe_uses_sample_deviation() {
        let traj = [1.0, 1.1, 1.21, 1.1495];
        let m = metrics(&traj, 0.01).unwrap();
        let r = [0.1, 0.1, -0.05];
        let mean = r.iter().sum::<f64>() / 3.0;
        let s = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((m.volatility - s).abs() < 1e-12);
        assert!((m.sharpe - 3f64.sqrt() * (mean - 0.01) / s).abs() < 1e-12);
    }

    #[test]
    fn buy_and_hold_trades_once() {
        // 3 periods, 2 assets: shares bought at t=0 with costs, then drift
        let panel = ReturnPanel::new(
            vec!["A".into(), "B".into()],
            vec![vec![0.1, -0.1], vec![0.2, 0.0], vec![-0.5, 0.3]],
            None,
        )
        .unwrap();
        let costs = CostVector::new(vec![0.02, 0.04], 0.5).unwrap();
        let cfg = BacktestConfig::new(1, costs, 0.0, Strategy::equal_weight_buy_and_hold(2));
        let rep = run_backtest(&panel, &cfg).unwrap();
        // u = [0.5, 0.5], cost = 0.5*0.02 + 0.5*0.04 = 0.03
        let expected = [
            1.0,
            0.5 * 1.1 + 0.5 * 0.9 - 0.03,
            0.5 * 1.1 * 1.2 + 0.5 * 0.9 - 0.03,
            0.5 * 1.1 * 1.2 * 0.5 + 0.5 * 0.9 * 1.3 - 0.03,
        ];
        for (a, b) in rep.trajectory.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert_eq!(rep.rebalances, 1);
        assert!((rep.total_costs - 0.03).abs() < 1e-15);
    }

    #[test]
    fn bankruptcy_truncates() {
        let cfg = BacktestConfig::new(1, CostVector::uniform(1, 0.2).unwrap(), 0.0, Strategy::Fixed(SimplexWeight::vertex(1, 0)));
        let rep = run_backtest(&single(&[0.1, -0.9, 0.5]), &cfg).unwrap();
        assert!(rep.bankrupt);
        assert_eq!(rep.trajectory.len(), 3);
        assert!(rep.trajectory[2] <= 0.0);
        assert_eq!(rep.metrics.log_growth, f64::NEG_INFINITY);
    }

    #[test]
    fn schedule_length_checked() {
        let cfg = BacktestConfig::new(1, CostVector::zeros(1), 0.0, Strategy::Schedule(vec![SimplexWeight::vertex(1, 0)]));
        assert!(matches!(run_backtest(&single(&[0.1, 0.1]), &cfg), Err(Error::ScheduleTooShort { .. })));
        let cfg = BacktestConfig::new(3, CostVector::zeros(1), 0.0, Strategy::Fixed(SimplexWeight::vertex(1, 0)));
        assert!(matches!(run_backtest(&single(&[0.1, 0.1]), &cfg), Err(Error::PeriodExceedsData { .. })));
    }

    #[test]
    fn trajectory_csv() {
        let cfg = BacktestConfig::new(1, CostVector::zeros(1), 0.0, Strategy::Fixed(SimplexWeight::vertex(1, 0)));
        let rep = run_backtest(&single(&[0.5]), &cfg).unwrap();
        let mut buf = Vec::new();
        rep.write_trajectory_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "period,value\n0,1\n1,1.5\n");
    }
}
