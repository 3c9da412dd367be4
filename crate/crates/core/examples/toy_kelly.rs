//! Cash plus a coin paying +/-50%: the growth-optimal coin weight against
//! the win probability, for one- and two-period rebalancing and a few costs.

use logopt::market_data::{compound, BlockMode, CostVector};
use logopt::objective::moments;
use logopt::solver::{solve_approx, solve_exact, SolverConfig};
use logopt::synthetic::binomial_toy;

fn main() -> logopt::Result<()> {
    let cfg = SolverConfig::default();
    println!("{:>4} {:>2} {:>5} {:>9} {:>9}", "p", "n", "cost", "exact", "approx");
    for n in [1, 2] {
        for cost in [0.0, 0.01, 0.05] {
            for wins in [11, 12, 13, 14, 15, 16] {
                let p = wins as f64 / 20.0;
                // every n-step path appears with its exact probability
                let panel = binomial_toy(wins, 20, 0.5, 0.5, n)?;
                let cp = compound(&panel, n, &CostVector::from_slice(&[0.0, cost])?, BlockMode::NonOverlapping)?;
                let exact = solve_exact(&cp, &cfg)?;
                let approx = solve_approx(&moments(&cp)?, n, &cfg)?;
                println!(
                    "{p:>4.2} {n:>2} {cost:>5.2} {:>9.5} {:>9.5}",
                    exact.weight[1], approx.weight[1]
                );
            }
        }
    }
    Ok(())
}
