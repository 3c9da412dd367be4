//! Sliding-window online trading: before each rebalance, re-solve the growth
//! problem on the most recent `M` completed blocks and hold the result for
//! the next block.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestConfig, BacktestReport, Strategy};
use crate::error::{Error, Result};
use crate::market_data::{compound, BlockMode, CostVector, ReturnPanel};
use crate::objective::{moments, SimplexWeight};
use crate::solver::{solve_approx, solve_exact, SolveReport, SolveStatus, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Exact,
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// Window length in blocks.
    pub window: usize,
    pub n: usize,
    pub problem: ProblemKind,
    pub solver: SolverConfig,
    pub costs: CostVector,
    pub r_f: f64,
    pub initial_value: f64,
}

impl OnlineConfig {
    pub fn new(window: usize, n: usize, problem: ProblemKind, costs: CostVector) -> Self {
        OnlineConfig {
            window,
            n,
            problem,
            solver: SolverConfig::default(),
            costs,
            r_f: 0.0,
            initial_value: 1.0,
        }
    }
}

/// Weight held over each block. Entry `s` applies to block `s` and was
/// computed from blocks `s - M .. s` only; the last entry (index equal to
/// the number of complete blocks) is the recommendation for the block after
/// the data ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub times: Vec<usize>,
    pub weights: Vec<SimplexWeight>,
    /// `None` during warm-up.
    pub solve_reports: Vec<Option<SolveReport>>,
    /// The solve failed and the previous weight was kept.
    pub carried_forward: Vec<bool>,
}

impl WeightSchedule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of warm-up entries.
    pub fn warm_up(&self) -> usize {
        self.solve_reports.iter().take_while(|r| r.is_none()).count()
    }

    /// CSV with columns `rebalance_index,asset,weight`.
    pub fn write_csv<W: Write>(&self, assets: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rebalance_index", "asset", "weight"])?;
        for (t, k) in self.times.iter().zip(&self.weights) {
            for (asset, v) in assets.iter().zip(k.iter()) {
                w.write_record([t.to_string(), asset.clone(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the sliding-window schedule. Blocks are non-overlapping runs of
/// `n` periods. Before `M` blocks have been observed the schedule holds the
/// riskless asset (or the uniform weight when the panel has none).
pub fn run_online(panel: &ReturnPanel, cfg: &OnlineConfig) -> Result<WeightSchedule> {
    if cfg.window == 0 {
        return Err(Error::ZeroWindow);
    }
    if cfg.n == 0 {
        return Err(Error::ZeroPeriod);
    }
    cfg.solver.validate()?;
    let available = panel.periods() / cfg.n;
    if cfg.window > available {
        return Err(Error::WindowExceedsData {
            window: cfg.window,
            available,
        });
    }
    let cp = compound(panel, cfg.n, &cfg.costs, BlockMode::NonOverlapping)?;
    let blocks = cp.num_blocks();
    let m = panel.num_assets();
    let warm = match panel.riskless_index() {
        Some(r) => SimplexWeight::vertex(m, r),
        None => SimplexWeight::uniform(m),
    };

    let mut schedule = WeightSchedule {
        times: Vec::with_capacity(blocks + 1),
        weights: Vec::with_capacity(blocks + 1),
        solve_reports: Vec::with_capacity(blocks + 1),
        carried_forward: Vec::with_capacity(blocks + 1),
    };
    let mut held = warm.clone();
    for s in 0..=blocks {
        schedule.times.push(s);
        if s < cfg.window {
            schedule.weights.push(warm.clone());
            schedule.solve_reports.push(None);
            schedule.carried_forward.push(false);
            continue;
        }
        let window = cp.blocks(s - cfg.window..s);
        let report = match cfg.problem {
            ProblemKind::Exact => solve_exact(&window, &cfg.solver)?,
            ProblemKind::Approx => solve_approx(&moments(&window)?, cfg.n, &cfg.solver)?,
        };
        let failed = report.status == SolveStatus::InfeasibleExact;
        if !failed {
            held = report.weight.clone();
        }
        schedule.weights.push(held.clone());
        schedule.solve_reports.push(Some(report));
        schedule.carried_forward.push(failed);
    }
    Ok(schedule)
}

/// Backtests a schedule produced by [`run_online`] on the same panel.
pub fn schedule_backtest(panel: &ReturnPanel, schedule: &WeightSchedule, cfg: &OnlineConfig) -> Result<BacktestReport> {
    let bt = BacktestConfig {
        n: cfg.n,
        costs: cfg.costs.clone(),
        r_f: cfg.r_f,
        initial_value: cfg.initial_value,
        strategy: Strategy::Schedule(schedule.weights.clone()),
    };
    run_backtest(panel, &bt)
}

/// Runs the online trader and backtests its schedule.
pub fn online_backtest(panel: &ReturnPanel, cfg: &OnlineConfig) -> Result<BacktestReport> {
    let schedule = run_online(panel, cfg)?;
    schedule_backtest(panel, &schedule, cfg)
}
