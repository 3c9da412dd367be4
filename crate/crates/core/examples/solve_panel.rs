//! Solve both growth problems on a random three-asset panel, check the
//! first-order certificate, and compare against a brute-force lattice.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logopt::market_data::{compound, BlockMode, CostVector};
use logopt::objective::{exact_elg, moments, taylor_violation_fraction};
use logopt::solver::{exact_kkt_residual, grid_oracle, kkt_residual, solve_approx, solve_exact, GridObjective, SolverConfig};
use logopt::synthetic::random_panel;

fn main() -> logopt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let panel = random_panel(&mut rng, 400, 3, 0.04);
    let costs = CostVector::uniform(3, 0.002)?;
    let cfg = SolverConfig::default();

    for n in [1, 5, 10] {
        let cp = compound(&panel, n, &costs, BlockMode::NonOverlapping)?;
        let mom = moments(&cp)?;
        let exact = solve_exact(&cp, &cfg)?;
        let approx = solve_approx(&mom, n, &cfg)?;
        let lattice = grid_oracle(GridObjective::Exact(&cp), 0.01)?;
        println!("n = {n} ({} blocks)", cp.num_blocks());
        println!(
            "  exact   K = {:.4?}  g = {:.6}  residual {:.1e}  ({} iters)",
            exact.weight.as_slice(),
            exact.objective.value,
            exact_kkt_residual(&cp, &exact.weight)?,
            exact.iterations
        );
        println!(
            "  approx  K = {:.4?}  g = {:.6}  residual {:.1e}",
            approx.weight.as_slice(),
            exact_elg(&cp, &approx.weight)?.value,
            kkt_residual(&mom, &approx.weight)?
        );
        println!("  lattice K = {:.4?}  g = {:.6}", lattice.weight.as_slice(), lattice.objective.value);
        println!("  |K'x| > 1 in {:.1}% of blocks", 100.0 * taylor_violation_fraction(&cp, &approx.weight)?);
    }
    Ok(())
}
