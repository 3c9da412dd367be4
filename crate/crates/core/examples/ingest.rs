//! Price CSV to return panel to compound blocks, both block layouts.

use logopt::market_data::{assemble_panel, compound, read_prices_csv, BlockMode, CostVector};

const PRICES: &str = "\
timestamp,symbol,price
2024-01-02,SPY,100
2024-01-03,SPY,101
2024-01-04,SPY,99.5
2024-01-05,SPY,100.2
2024-01-08,SPY,102
2024-01-02,TLT,90
2024-01-03,TLT,89.6
2024-01-05,TLT,90.4
2024-01-08,TLT,90.1
2024-01-04,TLT,90.0
";

fn main() -> logopt::Result<()> {
    let series = read_prices_csv(PRICES.as_bytes())?;
    // 2 bps per period on cash, appended as a riskless column
    let panel = assemble_panel(&series, 0.0002, true)?;
    println!("assets {:?}, {} periods", panel.assets(), panel.periods());
    for row in panel.samples() {
        println!("  {row:+.5?}");
    }
    let costs = CostVector::new(vec![0.001, 0.001, 0.0], 0.99)?;
    for mode in [BlockMode::NonOverlapping, BlockMode::Overlapping] {
        let cp = compound(&panel, 2, &costs, mode)?;
        println!("\n{mode:?}, n = 2:");
        cp.write_csv(std::io::stdout())?;
    }
    Ok(())
}
