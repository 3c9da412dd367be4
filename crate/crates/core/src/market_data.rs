//! Price ingestion, per-period returns and fee-adjusted n-period compound
//! return panels.
//!
//! Every optimization in this crate runs on the empirical distribution held
//! by a [`CompoundPanel`]: each row is one block of `n` consecutive periods,
//! compounded per asset, with the proportional cost of a rebalance
//! subtracted.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling for proportional costs.
pub const DEFAULT_COST_CEILING: f64 = 0.99;

/// Name given to the riskless column appended by [`assemble_panel`].
pub const RISKLESS_SYMBOL: &str = "CASH";

/// Time index of a price observation: either an integer index or an
/// ISO-8601 string (compared lexicographically).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Timestamp {
    Index(i64),
    Iso(String),
}

impl Timestamp {
    pub fn parse(raw: &str) -> Timestamp {
        let raw = raw.trim();
        match raw.parse::<i64>() {
            Ok(i) => Timestamp::Index(i),
            Err(_) => Timestamp::Iso(raw.to_string()),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::Iso(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    timestamps: Vec<Timestamp>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, timestamps: Vec<Timestamp>, prices: Vec<f64>) -> Result<Self> {
        let symbol = symbol.into();
        if timestamps.len() != prices.len() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len(),
                got: prices.len(),
            });
        }
        if let Some((index, &price)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::NonPositivePrice {
                symbol,
                index,
                price,
            });
        }
        if let Some(index) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedTimestamps {
                symbol,
                index: index + 1,
            });
        }
        Ok(PriceSeries {
            symbol,
            timestamps,
            prices,
        })
    }

    /// Series indexed 0, 1, 2, ...
    pub fn indexed(symbol: impl Into<String>, prices: Vec<f64>) -> Result<Self> {
        let timestamps = (0..prices.len() as i64).map(Timestamp::Index).collect();
        PriceSeries::new(symbol, timestamps, prices)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Per-period simple returns `(S(k+1) - S(k)) / S(k)`.
pub fn to_returns(series: &PriceSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            symbol: series.symbol.clone(),
            len: series.len(),
        });
    }
    Ok(series
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect())
}

/// T x m matrix of per-period arithmetic returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    assets: Vec<String>,
    samples: Vec<Vec<f64>>,
    riskless_index: Option<usize>,
}

impl ReturnPanel {
    pub fn new(assets: Vec<String>, samples: Vec<Vec<f64>>, riskless_index: Option<usize>) -> Result<Self> {
        let m = assets.len();
        let mut seen = BTreeSet::new();
        for a in &assets {
            if !seen.insert(a.as_str()) {
                return Err(Error::DuplicateSymbol(a.clone()));
            }
        }
        for (row, values) in samples.iter().enumerate() {
            if values.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: values.len(),
                });
            }
            for (col, &value) in values.iter().enumerate() {
                if !(value.is_finite() && value > -1.0) {
                    return Err(Error::ReturnOutOfDomain { row, col, value });
                }
            }
        }
        if let Some(r) = riskless_index {
            if r >= m {
                return Err(Error::DimensionMismatch { expected: m, got: r + 1 });
            }
            if let Some(first) = samples.first().map(|row| row[r]) {
                if first < 0.0 || samples.iter().any(|row| row[r] != first) {
                    return Err(Error::InvalidRisklessColumn(r));
                }
            }
        }
        Ok(ReturnPanel {
            assets,
            samples,
            riskless_index,
        })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn riskless_index(&self) -> Option<usize> {
        self.riskless_index
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn periods(&self) -> usize {
        self.samples.len()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[i]).collect()
    }

    /// Worst observed per-period return of each asset.
    pub fn min_returns(&self) -> Vec<f64> {
        (0..self.num_assets())
            .map(|i| self.samples.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn max_returns(&self) -> Vec<f64> {
        (0..self.num_assets())
            .map(|i| self.samples.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Sample mean of each asset's per-period return.
    pub fn mean_returns(&self) -> Vec<f64> {
        let t = self.periods().max(1) as f64;
        (0..self.num_assets())
            .map(|i| self.samples.iter().map(|r| r[i]).sum::<f64>() / t)
            .collect()
    }

    /// Sub-panel over periods `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReturnPanel {
        ReturnPanel {
            assets: self.assets.clone(),
            samples: self.samples[range].to_vec(),
            riskless_index: self.riskless_index,
        }
    }

    /// Splits at `fraction` of the periods: `(first, rest)`.
    pub fn split(&self, fraction: f64) -> (ReturnPanel, ReturnPanel) {
        let t = self.periods();
        let cut = ((t as f64) * fraction).floor() as usize;
        let cut = cut.min(t);
        (self.slice(0..cut), self.slice(cut..t))
    }
}

/// Aligns risky series on their common timestamps and converts them into a
/// return panel. With `include_riskless` a constant column of `r_f` named
/// [`RISKLESS_SYMBOL`] is appended.
pub fn assemble_panel(series: &[PriceSeries], r_f: f64, include_riskless: bool) -> Result<ReturnPanel> {
    if series.is_empty() {
        return Err(Error::NoSeries);
    }
    let mut seen = BTreeSet::new();
    for s in series {
        if !seen.insert(s.symbol()) || (include_riskless && s.symbol() == RISKLESS_SYMBOL) {
            return Err(Error::DuplicateSymbol(s.symbol().to_string()));
        }
    }
    let mut common: BTreeSet<&Timestamp> = series[0].timestamps.iter().collect();
    for s in &series[1..] {
        let other: BTreeSet<&Timestamp> = s.timestamps.iter().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.len() < 2 {
        return Err(Error::NoCommonTimestamps);
    }
    let mut columns = Vec::with_capacity(series.len());
    for s in series {
        let prices: Vec<f64> = s
            .timestamps
            .iter()
            .zip(&s.prices)
            .filter(|(t, _)| common.contains(t))
            .map(|(_, &p)| p)
            .collect();
        let aligned = PriceSeries::new(
            s.symbol.clone(),
            common.iter().map(|t| (*t).clone()).collect(),
            prices,
        )?;
        columns.push(to_returns(&aligned)?);
    }
    let periods = common.len() - 1;
    let mut assets: Vec<String> = series.iter().map(|s| s.symbol.clone()).collect();
    let mut samples: Vec<Vec<f64>> = (0..periods)
        .map(|t| columns.iter().map(|c| c[t]).collect())
        .collect();
    let mut riskless_index = None;
    if include_riskless {
        riskless_index = Some(assets.len());
        assets.push(RISKLESS_SYMBOL.to_string());
        for row in &mut samples {
            row.push(r_f);
        }
    }
    ReturnPanel::new(assets, samples, riskless_index)
}

/// Proportional transaction costs, one per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    costs: Vec<f64>,
    c_max: f64,
}

impl CostVector {
    pub fn new(costs: Vec<f64>, c_max: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c_max) {
            return Err(Error::InvalidCostCeiling(c_max));
        }
        for (index, &cost) in costs.iter().enumerate() {
            if !(cost >= 0.0 && cost <= c_max) {
                return Err(Error::InvalidCost { index, cost, c_max });
            }
        }
        Ok(CostVector { costs, c_max })
    }

    pub fn zeros(m: usize) -> Self {
        CostVector {
            costs: vec![0.0; m],
            c_max: DEFAULT_COST_CEILING,
        }
    }

    pub fn uniform(m: usize, cost: f64) -> Result<Self> {
        CostVector::new(vec![cost; m], DEFAULT_COST_CEILING)
    }

    pub fn from_slice(costs: &[f64]) -> Result<Self> {
        CostVector::new(costs.to_vec(), DEFAULT_COST_CEILING)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BlockMode {
    #[default]
    #[serde(rename = "nonoverlap")]
    NonOverlapping,
    #[serde(rename = "overlap")]
    Overlapping,
}

/// S x m panel of n-period compound returns and their fee-adjusted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPanel {
    n: usize,
    assets: Vec<String>,
    raw: Vec<Vec<f64>>,
    fee_adjusted: Vec<Vec<f64>>,
    costs: Vec<f64>,
    block_mode: BlockMode,
}

impl CompoundPanel {
    /// Builds a panel straight from compound returns, one row per block.
    pub fn from_blocks(n: usize, assets: Vec<String>, raw: Vec<Vec<f64>>, costs: &CostVector) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroPeriod);
        }
        let m = assets.len();
        if costs.len() != m {
            return Err(Error::CostLengthMismatch {
                expected: m,
                got: costs.len(),
            });
        }
        for (row, values) in raw.iter().enumerate() {
            if values.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: values.len(),
                });
            }
            for (col, &value) in values.iter().enumerate() {
                if !(value.is_finite() && value > -1.0) {
                    return Err(Error::ReturnOutOfDomain { row, col, value });
                }
            }
        }
        let fee_adjusted = raw
            .iter()
            .map(|row| row.iter().zip(costs.costs()).map(|(x, c)| x - c).collect())
            .collect();
        Ok(CompoundPanel {
            n,
            assets,
            raw,
            fee_adjusted,
            costs: costs.costs().to_vec(),
            block_mode: BlockMode::NonOverlapping,
        })
    }

    /// Unnamed assets `A0, A1, ...`; convenient for synthetic data.
    pub fn from_unnamed_blocks(n: usize, raw: Vec<Vec<f64>>, costs: &CostVector) -> Result<Self> {
        let m = costs.len();
        CompoundPanel::from_blocks(n, default_names(m), raw, costs)
    }

    pub fn period(&self) -> usize {
        self.n
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn raw(&self) -> &[Vec<f64>] {
        &self.raw
    }

    pub fn fee_adjusted(&self) -> &[Vec<f64>] {
        &self.fee_adjusted
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn block_mode(&self) -> BlockMode {
        self.block_mode
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.raw.len()
    }

    /// Sub-panel over the blocks in `range`.
    pub fn blocks(&self, range: std::ops::Range<usize>) -> CompoundPanel {
        CompoundPanel {
            n: self.n,
            assets: self.assets.clone(),
            raw: self.raw[range.clone()].to_vec(),
            fee_adjusted: self.fee_adjusted[range].to_vec(),
            costs: self.costs.clone(),
            block_mode: self.block_mode,
        }
    }

    /// CSV with columns `block,asset,raw,fee_adjusted`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["block", "asset", "raw", "fee_adjusted"])?;
        for (s, (raw, adj)) in self.raw.iter().zip(&self.fee_adjusted).enumerate() {
            for (i, asset) in self.assets.iter().enumerate() {
                w.write_record([
                    s.to_string(),
                    asset.clone(),
                    raw[i].to_string(),
                    adj[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("A{i}")).collect()
}

/// Compounds per-period returns into n-period blocks and subtracts costs.
///
/// Non-overlapping mode yields `floor(T / n)` blocks and drops the trailing
/// remainder; overlapping mode yields `T - n + 1` blocks.
pub fn compound(panel: &ReturnPanel, n: usize, costs: &CostVector, mode: BlockMode) -> Result<CompoundPanel> {
    if n == 0 {
        return Err(Error::ZeroPeriod);
    }
    let t = panel.periods();
    if t < n {
        return Err(Error::PeriodExceedsData { n, available: t });
    }
    let m = panel.num_assets();
    if costs.len() != m {
        return Err(Error::CostLengthMismatch {
            expected: m,
            got: costs.len(),
        });
    }
    let starts: Vec<usize> = match mode {
        BlockMode::NonOverlapping => (0..t / n).map(|s| s * n).collect(),
        BlockMode::Overlapping => (0..=t - n).collect(),
    };
    let raw = starts
        .iter()
        .map(|&start| compound_block(&panel.samples[start..start + n]))
        .collect();
    let mut cp = CompoundPanel::from_blocks(n, panel.assets.clone(), raw, costs)?;
    cp.block_mode = mode;
    Ok(cp)
}

/// Per-asset `prod(1 + x) - 1` over the given rows.
pub(crate) fn compound_block(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; m];
    for row in rows {
        // (1 + a)(1 + x) - 1, kept in return space so a single period is exact
        for (a, x) in acc.iter_mut().zip(row) {
            *a = *a + x + *a * x;
        }
    }
    acc
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    timestamp: String,
    symbol: String,
    price: String,
}

/// Reads `timestamp,symbol,price` rows into one series per symbol, in order
/// of first appearance. Rows of a symbol may come in any order.
pub fn read_prices_csv<R: Read>(reader: R) -> Result<Vec<PriceSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["timestamp", "symbol", "price"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `timestamp,symbol,price`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(Timestamp, f64, usize)>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: PriceRow = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let price: f64 = row.price.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid price `{}`", row.price),
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("price must be positive, got {price}"),
            });
        }
        if row.symbol.is_empty() || row.timestamp.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty timestamp or symbol".to_string(),
            });
        }
        if !rows.contains_key(&row.symbol) {
            order.push(row.symbol.clone());
        }
        rows.entry(row.symbol)
            .or_default()
            .push((Timestamp::parse(&row.timestamp), price, line));
    }
    let mut out = Vec::with_capacity(order.len());
    for symbol in order {
        let mut obs = rows.remove(&symbol).unwrap_or_default();
        obs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line: w[1].2,
                message: format!("duplicate timestamp {} for `{symbol}`", w[1].0),
            });
        }
        let (timestamps, prices) = obs.into_iter().map(|(t, p, _)| (t, p)).unzip();
        out.push(PriceSeries::new(symbol, timestamps, prices)?);
    }
    Ok(out)
}
