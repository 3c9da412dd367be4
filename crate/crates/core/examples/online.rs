//! Sliding-window trader on a panel whose winning asset changes halfway:
//! the schedule follows the switch within one window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logopt::market_data::CostVector;
use logopt::online::{run_online, schedule_backtest, OnlineConfig, ProblemKind};
use logopt::synthetic::regime_switch;

fn main() -> logopt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let panel = regime_switch(&mut rng, 120, 60, 0.004, 0.01);
    for problem in [ProblemKind::Exact, ProblemKind::Approx] {
        let cfg = OnlineConfig::new(6, 5, problem, CostVector::uniform(2, 0.001)?);
        let schedule = run_online(&panel, &cfg)?;
        let report = schedule_backtest(&panel, &schedule, &cfg)?;
        println!("{problem:?}: warm-up {} blocks, log growth {:.4}", schedule.warm_up(), report.metrics.log_growth);
        for (t, k) in schedule.times.iter().zip(&schedule.weights) {
            println!("  block {t:>2}: K = {:.3?}", k.as_slice());
        }
    }
    Ok(())
}
