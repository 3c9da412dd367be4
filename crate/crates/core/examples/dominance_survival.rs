//! Dominance ratios and the survival conditions: when costs make cash the
//! only sensible holding, and when a portfolio can be wiped out in one block.

use logopt::analysis::{
    dominance_check, survival_monte_carlo, survival_necessary, survival_sufficient, DiscreteSampler, UniformBoxSampler,
    DEFAULT_DOMINANCE_TOL,
};
use logopt::market_data::{compound, BlockMode, CostVector};
use logopt::solver::{solve_exact, SolverConfig};
use logopt::synthetic::binomial_toy;

fn main() -> logopt::Result<()> {
    let cfg = SolverConfig::default();
    for cost in [0.0, 0.05, 0.1, 0.2] {
        let panel = binomial_toy(13, 20, 0.5, 0.5, 1)?;
        let cp = compound(&panel, 1, &CostVector::from_slice(&[0.0, cost])?, BlockMode::NonOverlapping)?;
        let dom = dominance_check(&cp, DEFAULT_DOMINANCE_TOL)?;
        let k = solve_exact(&cp, &cfg)?.weight;
        println!(
            "cost {cost:.2}: E[(1+x_coin)/(1+x_cash)] = {:.4}, dominant {:?}, K* = {:.4?}",
            dom.ratios[1][0],
            dom.dominant_assets,
            k.as_slice()
        );
    }

    let costs = CostVector::from_slice(&[0.3, 0.1])?;
    let n = 3;
    let lo = [0.3f64.powf(1.0 / 3.0) - 1.0 + 0.01, -0.2];
    println!("\nsufficient condition per asset: {:?}", survival_sufficient(&lo, &costs, n)?);
    let safe = UniformBoxSampler {
        lo: lo.to_vec(),
        hi: vec![0.3, 0.3],
    };
    println!(
        "ruin rate inside the bound: {}",
        survival_monte_carlo(&safe, &[0.5, 0.5], n, &costs, 100_000, 1)?
    );

    let crash = DiscreteSampler {
        outcomes: vec![vec![-0.9], vec![0.3]],
        probabilities: vec![0.2, 0.8],
    };
    let c = CostVector::from_slice(&[0.5])?;
    println!("ruin rate with a 90% crash at 50% cost: {}", survival_monte_carlo(&crash, &[1.0], 1, &c, 100_000, 1)?);
    println!("necessary condition for mu = -0.6, c = 0.5: {}", survival_necessary(&[-0.6], &c, 1, &[1.0])?);
    Ok(())
}
