//! Synthetic return panels with known structure, used by the examples,
//! the test suites and the CLI's demo data.

use rand::Rng;

use crate::error::Result;
use crate::market_data::{ReturnPanel, RISKLESS_SYMBOL};

/// Cash plus one asset returning `+up` or `-down` per period, with the up
/// move having probability `up_count / total`.
///
/// The panel enumerates every length-`n` sequence of equally likely outcome
/// slots, so non-overlapping `n`-period blocks reproduce the exact two-point
/// distribution of the `n`-period compound return. Column 0 is cash at zero
/// rate, column 1 the risky asset.
pub fn binomial_toy(up_count: usize, total: usize, up: f64, down: f64, n: usize) -> Result<ReturnPanel> {
    assert!(total > 0 && up_count <= total && n > 0);
    let blocks = total.pow(n as u32);
    let mut samples = Vec::with_capacity(blocks * n);
    for b in 0..blocks {
        let mut code = b;
        for _ in 0..n {
            let slot = code % total;
            code /= total;
            let r = if slot < up_count { up } else { -down };
            samples.push(vec![0.0, r]);
        }
    }
    ReturnPanel::new(vec![RISKLESS_SYMBOL.to_string(), "RISKY".to_string()], samples, Some(0))
}

/// `periods` x `m` panel of independent uniform returns in `[-bound, bound]`
/// shifted by a per-asset drift drawn from `[-bound/4, bound/4]`, clipped to
/// stay within `bound`.
pub fn random_panel<R: Rng + ?Sized>(rng: &mut R, periods: usize, m: usize, bound: f64) -> ReturnPanel {
    let drift: Vec<f64> = (0..m).map(|_| rng.gen_range(-bound / 4.0..=bound / 4.0)).collect();
    let samples = (0..periods)
        .map(|_| {
            drift
                .iter()
                .map(|d| (d + rng.gen_range(-bound..=bound)).clamp(-bound, bound))
                .collect()
        })
        .collect();
    ReturnPanel::new(crate::market_data::default_names(m), samples, None).expect("bounded returns are valid")
}

/// Copies column `source` of `panel` to a new trailing column, creating a
/// flat direction in both objectives.
pub fn duplicate_column(panel: &ReturnPanel, source: usize) -> ReturnPanel {
    let mut assets = panel.assets().to_vec();
    assets.push(format!("{}_dup", assets[source]));
    let samples = panel
        .samples()
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push(row[source]);
            r
        })
        .collect();
    ReturnPanel::new(assets, samples, panel.riskless_index()).expect("copied column is valid")
}

/// Two deterministic-dominance regimes: asset 0 gains `edge` per period for
/// the first `switch_at` periods while asset 1 is flat, then the roles swap.
/// Both assets carry a common noise term so neither is trivially constant.
pub fn regime_switch<R: Rng + ?Sized>(rng: &mut R, periods: usize, switch_at: usize, edge: f64, noise: f64) -> ReturnPanel {
    let samples = (0..periods)
        .map(|t| {
            let common = rng.gen_range(-noise..=noise);
            if t < switch_at {
                vec![common + edge, common]
            } else {
                vec![common, common + edge]
            }
        })
        .collect();
    ReturnPanel::new(vec!["A".into(), "B".into()], samples, None).expect("small returns are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{compound, BlockMode, CostVector};

    #[test]
    fn toy_blocks_match_distribution() {
        let p = binomial_toy(3, 5, 0.5, 0.5, 2).unwrap();
        assert_eq!(p.periods(), 50);
        let cp = compound(&p, 2, &CostVector::zeros(2), BlockMode::NonOverlapping).unwrap();
        let up_up = cp.raw().iter().filter(|r| (r[1] - 1.25).abs() < 1e-12).count();
        let mixed = cp.raw().iter().filter(|r| (r[1] + 0.25).abs() < 1e-12).count();
        assert_eq!((up_up, mixed, cp.num_blocks()), (9, 12, 25));
    }

    #[test]
    fn duplicate_adds_column() {
        let p = binomial_toy(1, 2, 0.5, 0.5, 1).unwrap();
        let d = duplicate_column(&p, 1);
        assert_eq!(d.num_assets(), 3);
        assert_eq!(d.column(1), d.column(2));
    }
}
