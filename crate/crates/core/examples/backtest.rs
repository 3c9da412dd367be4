//! Rebalancing-period sweep: fit on the first half, trade the second half
//! with the exact and approximate weights and compare with buy-and-hold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logopt::backtest::{compare_strategies, BacktestConfig, Strategy};
use logopt::market_data::{compound, BlockMode, CostVector, ReturnPanel};
use logopt::objective::moments;
use logopt::solver::{solve_approx, solve_exact, SolverConfig};
use logopt::synthetic::random_panel;

fn main() -> logopt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let risky = random_panel(&mut rng, 400, 3, 0.04);
    let samples = risky.samples().iter().map(|r| vec![r[0], r[1], r[2], 0.0]).collect();
    let names = ["A0", "A1", "A2", "CASH"].map(String::from).to_vec();
    let panel = ReturnPanel::new(names, samples, Some(3))?;
    let (train, test) = panel.split(0.5);
    let costs = CostVector::new(vec![0.002, 0.002, 0.002, 0.0], 0.99)?;
    let cfg = SolverConfig::default();

    println!("{:>3} {:>10} {:>10} {:>10} {:>10}  K*", "n", "exact", "approx", "hold", "costs(ex)");
    for n in [1, 2, 5, 10, 20] {
        let cp = compound(&train, n, &costs, BlockMode::NonOverlapping)?;
        let exact = solve_exact(&cp, &cfg)?.weight;
        let approx = solve_approx(&moments(&cp)?, n, &cfg)?.weight;
        let shown = format!("{:.3?}", exact.as_slice());
        let runs: Vec<BacktestConfig> = [
            Strategy::Fixed(exact),
            Strategy::Fixed(approx),
            Strategy::equal_weight_buy_and_hold(4),
        ]
        .into_iter()
        .map(|s| BacktestConfig::new(n, costs.clone(), 0.0, s))
        .collect();
        let reports = compare_strategies(&test, &runs)?;
        println!(
            "{n:>3} {:>10.5} {:>10.5} {:>10.5} {:>10.5}  {shown}",
            reports[0].metrics.log_growth,
            reports[1].metrics.log_growth,
            reports[2].metrics.log_growth,
            reports[0].total_costs
        );
    }
    Ok(())
}
