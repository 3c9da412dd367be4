//! Growth / log-variance cloud of a two-asset-plus-cash panel, its upper-left
//! frontier, and the two-fund property on a panel with a duplicated asset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logopt::analysis::{frontier, two_fund_check};
use logopt::market_data::{compound, BlockMode, CostVector, ReturnPanel};
use logopt::objective::{moments, SimplexWeight};
use logopt::solver::{solve_approx, SolverConfig};
use logopt::synthetic::{duplicate_column, random_panel};

fn main() -> logopt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let risky = random_panel(&mut rng, 200, 2, 0.08);
    let samples = risky.samples().iter().map(|r| vec![r[0], r[1], 0.0]).collect();
    let panel = ReturnPanel::new(vec!["A0".into(), "A1".into(), "CASH".into()], samples, Some(2))?;
    let cp = compound(&panel, 1, &CostVector::new(vec![0.001, 0.001, 0.0], 0.99)?, BlockMode::NonOverlapping)?;
    let cfg = SolverConfig::default();

    let mut points = frontier(&cp, 500, 7, &cfg)?;
    points.retain(|p| p.on_frontier);
    points.sort_by(|a, b| a.log_variance.total_cmp(&b.log_variance));
    println!("{} frontier points (of 503 evaluated):", points.len());
    for p in points.iter().step_by((points.len() / 10).max(1)) {
        println!("  var {:.3e}  elg {:+.6}  K = {:.3?}  {:?}", p.log_variance, p.elg, p.weight.as_slice(), p.kind);
    }

    // a copied column makes the optimum a segment; every mixture stays optimal
    let dup = duplicate_column(&risky, 0);
    let mom = moments(&compound(&dup, 1, &CostVector::zeros(3), BlockMode::NonOverlapping)?)?;
    let k = solve_approx(&mom, 1, &cfg)?.weight;
    let shared = k[0] + k[2];
    let a = SimplexWeight::new(vec![shared, k[1], 0.0])?;
    let b = SimplexWeight::new(vec![0.0, k[1], shared])?;
    let residuals = two_fund_check(&mom, &a, &b, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-8)?;
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    println!("two-fund: mixtures of {:.3?} and {:.3?} have residual <= {worst:.1e}", a.as_slice(), b.as_slice());
    Ok(())
}
