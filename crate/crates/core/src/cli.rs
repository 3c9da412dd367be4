//! Command-line front end: flag and config-file handling, and the five
//! batch commands. Every command reads a price CSV, writes its reports to
//! the output directory and prints a short summary to stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dominance_check, frontier, growth_and_variance, mark_frontier, survival_report, FrontierPoint, PointKind,
    DEFAULT_DOMINANCE_TOL,
};
use crate::backtest::{compare_strategies, BacktestConfig, BacktestReport, Metrics, Strategy};
use crate::error::Error;
use crate::market_data::{
    assemble_panel, compound, read_prices_csv, BlockMode, CompoundPanel, CostVector, ReturnPanel,
    DEFAULT_COST_CEILING,
};
use crate::objective::{moments, taylor_violation_fraction, MomentPair, SimplexWeight};
use crate::online::{run_online, schedule_backtest, OnlineConfig, ProblemKind, WeightSchedule};
use crate::solver::{kkt_residual, solve_approx, solve_exact, SolveReport, SolveStatus, SolverConfig};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SPLIT: f64 = 0.5;
pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_TRIALS: usize = 10_000;

/// Interpolation points between the two optima in the frontier file.
const FRONTIER_ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Parser)]
#[command(name = "logopt", version, about = "Log-optimal portfolios with proportional transaction costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the exact and approximate growth problems; report dominance and survival.
    Optimize(Flags),
    /// Sample the growth / log-variance region and mark its frontier.
    Frontier(Flags),
    /// Fit on the first part of the data, evaluate fixed-rebalancing strategies on the rest.
    Backtest(Flags),
    /// Sliding-window online trader, evaluated after the split point.
    Online(Flags),
    /// Moments, compound panel, Taylor-domain check, dominance and survival.
    Analyze(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Approx,
    Both,
}

impl Mode {
    fn exact(self) -> bool {
        self != Mode::Approx
    }

    fn approx(self) -> bool {
        self != Mode::Exact
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Price CSV with header `timestamp,symbol,price`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rebalancing period in base periods.
    #[arg(long)]
    pub n: Option<usize>,
    /// Either one fraction for every risky asset or `asset=frac,...`.
    #[arg(long)]
    pub cost: Option<String>,
    /// Per-period riskless rate of the cash column.
    #[arg(long)]
    pub rf: Option<f64>,
    /// Online window length in blocks.
    #[arg(long)]
    pub window: Option<usize>,
    /// Fraction of periods used for fitting.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// `nonoverlap` or `overlap`.
    #[arg(long, value_parser = parse_blocks)]
    pub blocks: Option<BlockMode>,
    /// Do not add the cash column.
    #[arg(long)]
    pub no_riskless: bool,
    /// Random weights drawn by `frontier`.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Monte Carlo trials of the survival check.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub kkt_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Largest admissible cost.
    #[arg(long)]
    pub c_max: Option<f64>,
}

fn parse_blocks(raw: &str) -> Result<BlockMode, String> {
    match raw {
        "nonoverlap" => Ok(BlockMode::NonOverlapping),
        "overlap" => Ok(BlockMode::Overlapping),
        other => Err(format!("expected `nonoverlap` or `overlap`, got `{other}`")),
    }
}

/// Cost given in a config file: a number, the flag syntax, or a map.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CostValue {
    Global(f64),
    Text(String),
    PerAsset(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub n: Option<usize>,
    pub cost: Option<CostValue>,
    pub rf: Option<f64>,
    pub window: Option<usize>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub mode: Option<Mode>,
    pub blocks: Option<BlockMode>,
    pub riskless: Option<bool>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub kkt_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub c_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    /// Applied to every risky asset; cash stays free unless named.
    Global(f64),
    PerAsset(Vec<(String, f64)>),
}

impl CostSpec {
    pub fn parse(raw: &str) -> Result<CostSpec, CliError> {
        let raw = raw.trim();
        if !raw.contains('=') {
            return parse_fraction(raw).map(CostSpec::Global);
        }
        let mut pairs: Vec<(String, f64)> = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (asset, frac) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("cost entry `{item}` is not `asset=frac`")))?;
            let asset = asset.trim().to_string();
            if pairs.iter().any(|(a, _)| *a == asset) {
                return Err(CliError::Config(format!("cost given twice for `{asset}`")));
            }
            pairs.push((asset, parse_fraction(frac.trim())?));
        }
        Ok(CostSpec::PerAsset(pairs))
    }

    /// Cost vector aligned with the panel's columns.
    pub fn resolve(&self, panel: &ReturnPanel, c_max: f64) -> Result<CostVector, CliError> {
        let assets = panel.assets();
        let costs = match self {
            CostSpec::Global(c) => (0..assets.len())
                .map(|i| if Some(i) == panel.riskless_index() { 0.0 } else { *c })
                .collect(),
            CostSpec::PerAsset(pairs) => {
                let mut costs = vec![0.0; assets.len()];
                for (asset, c) in pairs {
                    let i = assets
                        .iter()
                        .position(|a| a == asset)
                        .ok_or_else(|| CliError::Config(format!("cost given for unknown asset `{asset}`")))?;
                    costs[i] = *c;
                }
                costs
            }
        };
        Ok(CostVector::new(costs, c_max)?)
    }
}

fn parse_fraction(raw: &str) -> Result<f64, CliError> {
    raw.parse::<f64>()
        .map_err(|_| CliError::Config(format!("`{raw}` is not a number")))
}

/// Fully resolved parameters of one command run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub n: usize,
    pub cost: CostSpec,
    pub c_max: f64,
    pub r_f: f64,
    pub include_riskless: bool,
    pub window: usize,
    pub split: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub mode: Mode,
    pub blocks: BlockMode,
    pub samples: usize,
    pub trials: usize,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Merges the config file named by `--config` (if any) under the flags
    /// and checks every value.
    pub fn resolve(flags: &Flags) -> Result<RunConfig, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        Self::merge(flags, file)
    }

    pub fn merge(flags: &Flags, file: FileConfig) -> Result<RunConfig, CliError> {
        let cost = match (&flags.cost, file.cost) {
            (Some(raw), _) => CostSpec::parse(raw)?,
            (None, Some(CostValue::Global(c))) => CostSpec::Global(c),
            (None, Some(CostValue::Text(raw))) => CostSpec::parse(&raw)?,
            (None, Some(CostValue::PerAsset(map))) => CostSpec::PerAsset(map.into_iter().collect()),
            (None, None) => CostSpec::Global(0.0),
        };
        let mut solver = SolverConfig::default();
        if let Some(tol) = flags.kkt_tol.or(file.kkt_tol) {
            solver.kkt_tol = tol;
        }
        if let Some(iters) = flags.max_iters.or(file.max_iters) {
            solver.max_iters = iters;
        }
        let cfg = RunConfig {
            input: flags
                .input
                .clone()
                .or(file.input)
                .ok_or_else(|| CliError::Config("no input file given (--input)".into()))?,
            n: flags.n.or(file.n).unwrap_or(1),
            cost,
            c_max: flags.c_max.or(file.c_max).unwrap_or(DEFAULT_COST_CEILING),
            r_f: flags.rf.or(file.rf).unwrap_or(0.0),
            include_riskless: !flags.no_riskless && file.riskless.unwrap_or(true),
            window: flags.window.or(file.window).unwrap_or(DEFAULT_WINDOW),
            split: flags.split.or(file.split).unwrap_or(DEFAULT_SPLIT),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            mode: flags.mode.or(file.mode).unwrap_or(Mode::Both),
            blocks: flags.blocks.or(file.blocks).unwrap_or_default(),
            samples: flags.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
            trials: flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            solver,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(Error::ZeroPeriod.into());
        }
        if self.window == 0 {
            return Err(Error::ZeroWindow.into());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(CliError::Config(format!("split {} must lie strictly between 0 and 1", self.split)));
        }
        if !(self.r_f.is_finite() && self.r_f >= 0.0) {
            return Err(CliError::Config(format!("riskless rate {} must be finite and non-negative", self.r_f)));
        }
        if self.samples == 0 || self.trials == 0 {
            return Err(CliError::Config("samples and trials must be positive".into()));
        }
        self.solver.validate()?;
        // validates the ceiling and, for a global cost, the value itself
        match &self.cost {
            CostSpec::Global(c) => CostVector::new(vec![*c], self.c_max).map(drop)?,
            CostSpec::PerAsset(pairs) => {
                CostVector::new(pairs.iter().map(|(_, c)| *c).collect(), self.c_max).map(drop)?
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidCost { .. }
            | Error::InvalidCostCeiling(_)
            | Error::CostLengthMismatch { .. }
            | Error::ZeroPeriod
            | Error::PeriodExceedsData { .. }
            | Error::WindowExceedsData { .. }
            | Error::ZeroWindow
            | Error::InvalidGridStep(_)
            | Error::LatticeTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let (flags, f): (&Flags, fn(&RunConfig) -> Result<(), CliError>) = match command {
        Command::Optimize(f) => (f, cmd_optimize),
        Command::Frontier(f) => (f, cmd_frontier),
        Command::Backtest(f) => (f, cmd_backtest),
        Command::Online(f) => (f, cmd_online),
        Command::Analyze(f) => (f, cmd_analyze),
    };
    let cfg = RunConfig::resolve(flags)?;
    f(&cfg)
}

/// Reads the price file and builds the return panel and costs.
pub fn load(cfg: &RunConfig) -> Result<(ReturnPanel, CostVector), CliError> {
    let file = File::open(&cfg.input)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", cfg.input.display())))?;
    let series = read_prices_csv(file)?;
    let panel = assemble_panel(&series, cfg.r_f, cfg.include_riskless)?;
    let costs = cfg.cost.resolve(&panel, cfg.c_max)?;
    Ok((panel, costs))
}

fn prepare_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(name), text).map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(dir.join(name)).map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    File::create(dir.join(name))
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Flat view of a solve for the report files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub problem: ProblemKind,
    pub assets: Vec<String>,
    pub weight: Vec<f64>,
    /// `null` when the exact problem is infeasible.
    pub objective: Option<f64>,
    pub domain_violations: usize,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl SolveSummary {
    fn new(problem: ProblemKind, assets: &[String], report: &SolveReport) -> Self {
        SolveSummary {
            problem,
            assets: assets.to_vec(),
            weight: report.weight.to_vec(),
            objective: report.objective.finite.then_some(report.objective.value),
            domain_violations: report.objective.domain_violations,
            kkt_residual: report.kkt_residual,
            iterations: report.iterations,
            status: report.status,
        }
    }

    fn line(&self) -> String {
        let weights: Vec<String> = self
            .assets
            .iter()
            .zip(&self.weight)
            .map(|(a, w)| format!("{a}={w:.6}"))
            .collect();
        let objective = self.objective.map_or("n/a".to_string(), |v| format!("{v:.8}"));
        format!(
            "{}: status={} elg={} kkt={:.2e} iters={} weights=[{}]",
            problem_name(self.problem),
            status_name(self.status),
            objective,
            self.kkt_residual,
            self.iterations,
            weights.join(",")
        )
    }
}

fn problem_name(p: ProblemKind) -> &'static str {
    match p {
        ProblemKind::Exact => "exact",
        ProblemKind::Approx => "approx",
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max_iters",
        SolveStatus::InfeasibleExact => "infeasible_exact",
        SolveStatus::Lattice => "lattice",
    }
}

/// Solves whichever problems `mode` selects on one compound panel.
struct Solved {
    exact: Option<SolveReport>,
    approx: Option<SolveReport>,
}

impl Solved {
    fn new(cp: &CompoundPanel, cfg: &RunConfig) -> Result<Solved, CliError> {
        let mom = moments(cp)?;
        let exact = cfg.mode.exact().then(|| solve_exact(cp, &cfg.solver)).transpose()?;
        let approx = cfg
            .mode
            .approx()
            .then(|| solve_approx(&mom, cp.period(), &cfg.solver))
            .transpose()?;
        Ok(Solved { exact, approx })
    }

    fn feasible_exact(&self) -> Option<&SolveReport> {
        self.exact
            .as_ref()
            .filter(|r| r.status != SolveStatus::InfeasibleExact)
    }

    fn summaries(&self, assets: &[String]) -> Vec<SolveSummary> {
        let mut out = Vec::new();
        if let Some(r) = &self.exact {
            out.push(SolveSummary::new(ProblemKind::Exact, assets, r));
        }
        if let Some(r) = &self.approx {
            out.push(SolveSummary::new(ProblemKind::Approx, assets, r));
        }
        out
    }

    /// Exact optimum when feasible, otherwise the approximate one.
    fn preferred(&self) -> Option<(ProblemKind, &SolveReport)> {
        self.feasible_exact()
            .map(|r| (ProblemKind::Exact, r))
            .or(self.approx.as_ref().map(|r| (ProblemKind::Approx, r)))
    }

    /// Fixed-rebalancing strategies from the optima, named.
    fn strategies(&self) -> Vec<(String, Strategy)> {
        let mut out = Vec::new();
        if let Some(r) = self.feasible_exact() {
            out.push(("exact".to_string(), Strategy::Fixed(r.weight.clone())));
        }
        if let Some(r) = &self.approx {
            out.push(("approx".to_string(), Strategy::Fixed(r.weight.clone())));
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct DominanceSummary {
    applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    assets: Vec<String>,
    dominant_assets: Vec<String>,
    ratios: Vec<Vec<f64>>,
}

fn dominance_summary(cp: &CompoundPanel) -> Result<DominanceSummary, CliError> {
    let assets = cp.assets().to_vec();
    match dominance_check(cp, DEFAULT_DOMINANCE_TOL) {
        Ok(rep) => Ok(DominanceSummary {
            applicable: true,
            reason: None,
            dominant_assets: rep.dominant_assets.iter().map(|&j| assets[j].clone()).collect(),
            assets,
            ratios: rep.ratios,
        }),
        Err(e @ Error::NonPositiveGross { .. }) => Ok(DominanceSummary {
            applicable: false,
            reason: Some(e.to_string()),
            assets,
            dominant_assets: Vec::new(),
            ratios: Vec::new(),
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Serialize)]
struct SurvivalSummary {
    weight_source: ProblemKind,
    assets: Vec<String>,
    weight: Vec<f64>,
    sufficient_ok: Vec<bool>,
    necessary_ok: Option<bool>,
    mc_trials: usize,
    mc_bankruptcy_rate: f64,
}

fn survival_summary(
    panel: &ReturnPanel,
    costs: &CostVector,
    cfg: &RunConfig,
    source: ProblemKind,
    k: &SimplexWeight,
) -> Result<SurvivalSummary, CliError> {
    let rep = survival_report(panel, costs, cfg.n, k, cfg.trials, cfg.seed)?;
    Ok(SurvivalSummary {
        weight_source: source,
        assets: panel.assets().to_vec(),
        weight: k.to_vec(),
        sufficient_ok: rep.sufficient_ok,
        necessary_ok: rep.necessary_ok,
        mc_trials: cfg.trials,
        mc_bankruptcy_rate: rep.mc_bankruptcy_rate,
    })
}

/// Solves both problems on the full panel and writes `exact`/`approx`
/// reports, `dominance.json` and `survival.json`.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, costs) = load(cfg)?;
    let cp = compound(&panel, cfg.n, &costs, cfg.blocks)?;
    let solved = Solved::new(&cp, cfg)?;
    prepare_out(cfg)?;
    let summaries = solved.summaries(panel.assets());
    match cfg.format {
        Format::Json => {
            for s in &summaries {
                write_json(&cfg.out, &format!("{}.json", problem_name(s.problem)), s)?;
            }
        }
        Format::Csv => {
            let mut w = csv_writer(&cfg.out, "solves.csv")?;
            w.write_record(["problem", "status", "objective", "kkt_residual", "iterations"])
                .map_err(csv_err)?;
            for s in &summaries {
                w.write_record([
                    problem_name(s.problem).to_string(),
                    status_name(s.status).to_string(),
                    s.objective.map_or(String::new(), |v| v.to_string()),
                    s.kkt_residual.to_string(),
                    s.iterations.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
            let mut w = csv_writer(&cfg.out, "weights.csv")?;
            let mut header = vec!["asset".to_string()];
            header.extend(summaries.iter().map(|s| problem_name(s.problem).to_string()));
            w.write_record(&header).map_err(csv_err)?;
            for (i, asset) in panel.assets().iter().enumerate() {
                let mut row = vec![asset.clone()];
                row.extend(summaries.iter().map(|s| s.weight[i].to_string()));
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    write_json(&cfg.out, "dominance.json", &dominance_summary(&cp)?)?;
    if let Some((source, report)) = solved.preferred() {
        write_json(
            &cfg.out,
            "survival.json",
            &survival_summary(&panel, &costs, cfg, source, &report.weight)?,
        )?;
    }
    for s in &summaries {
        println!("{}", s.line());
    }
    if solved.exact.as_ref().is_some_and(|r| r.status == SolveStatus::InfeasibleExact) {
        println!("exact: infeasible on this data; use the approximate weights");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FrontierRow {
    kind: PointKind,
    alpha: Option<f64>,
    elg: f64,
    log_variance: f64,
    on_frontier: bool,
    kkt_residual: f64,
    weight: Vec<f64>,
}

fn point(cp: &CompoundPanel, weight: SimplexWeight, kind: PointKind) -> Result<Option<FrontierPoint>, CliError> {
    Ok(growth_and_variance(cp, &weight)?.map(|(elg, log_variance)| FrontierPoint {
        weight,
        elg,
        log_variance,
        on_frontier: false,
        kind,
    }))
}

/// Writes the sampled region with both optima and their convex
/// combinations. `kkt_residual` is that of the approximate problem.
pub fn cmd_frontier(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, costs) = load(cfg)?;
    let cp = compound(&panel, cfg.n, &costs, cfg.blocks)?;
    let mom = moments(&cp)?;
    let mut points = frontier(&cp, cfg.samples, cfg.seed, &cfg.solver)?;
    let mut alphas: Vec<Option<f64>> = vec![None; points.len()];
    if cp.num_assets() > 1 {
        let approx = solve_approx(&mom, cp.period(), &cfg.solver)?;
        let exact = points
            .iter()
            .find(|p| p.kind == PointKind::Optimum)
            .map(|p| p.weight.clone());
        if let Some(p) = point(&cp, approx.weight.clone(), PointKind::ApproxOptimum)? {
            points.push(p);
            alphas.push(None);
        }
        if let Some(exact) = exact {
            for alpha in FRONTIER_ALPHAS {
                let w = SimplexWeight::mix(&exact, &approx.weight, alpha)?;
                if let Some(p) = point(&cp, w, PointKind::Combination)? {
                    points.push(p);
                    alphas.push(Some(alpha));
                }
            }
        }
        mark_frontier(&mut points);
    }
    let rows = points
        .iter()
        .zip(alphas)
        .map(|(p, alpha)| {
            Ok(FrontierRow {
                kind: p.kind,
                alpha,
                elg: p.elg,
                log_variance: p.log_variance,
                on_frontier: p.on_frontier,
                kkt_residual: kkt_residual(&mom, &p.weight)?,
                weight: p.weight.to_vec(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    prepare_out(cfg)?;
    match cfg.format {
        Format::Json => write_json(&cfg.out, "frontier.json", &FrontierFile { assets: panel.assets(), points: &rows })?,
        Format::Csv => {
            let mut w = csv_writer(&cfg.out, "frontier.csv")?;
            let mut header: Vec<String> = ["kind", "alpha", "elg", "log_variance", "on_frontier", "kkt_residual"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend(panel.assets().iter().map(|a| format!("w_{a}")));
            w.write_record(&header).map_err(csv_err)?;
            for r in &rows {
                let mut rec = vec![
                    kind_name(r.kind).to_string(),
                    r.alpha.map_or(String::new(), |a| a.to_string()),
                    r.elg.to_string(),
                    r.log_variance.to_string(),
                    r.on_frontier.to_string(),
                    r.kkt_residual.to_string(),
                ];
                rec.extend(r.weight.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    let on = rows.iter().filter(|r| r.on_frontier).count();
    let best = rows.iter().map(|r| r.elg).fold(f64::NEG_INFINITY, f64::max);
    println!("frontier: points={} on_frontier={} max_elg={best:.8}", rows.len(), on);
    Ok(())
}

#[derive(Serialize)]
struct FrontierFile<'a> {
    assets: &'a [String],
    points: &'a [FrontierRow],
}

fn kind_name(k: PointKind) -> &'static str {
    match k {
        PointKind::Vertex => "vertex",
        PointKind::Sample => "sample",
        PointKind::Optimum => "optimum",
        PointKind::ApproxOptimum => "approx_optimum",
        PointKind::Combination => "combination",
    }
}

#[derive(Debug, Serialize)]
struct NamedReport {
    strategy: String,
    #[serde(flatten)]
    report: BacktestReport,
}

#[derive(Debug, Serialize)]
struct BacktestFile {
    assets: Vec<String>,
    split_index: usize,
    fit: Vec<SolveSummary>,
    in_sample: Vec<NamedReport>,
    out_of_sample: Vec<NamedReport>,
}

fn run_named(panel: &ReturnPanel, cfg: &RunConfig, costs: &CostVector, strategies: &[(String, Strategy)]) -> Result<Vec<NamedReport>, CliError> {
    let cfgs: Vec<BacktestConfig> = strategies
        .iter()
        .map(|(_, s)| BacktestConfig::new(cfg.n, costs.clone(), cfg.r_f, s.clone()))
        .collect();
    let reports = compare_strategies(panel, &cfgs)?;
    Ok(strategies
        .iter()
        .zip(reports)
        .map(|((name, _), report)| NamedReport {
            strategy: name.clone(),
            report,
        })
        .collect())
}

const METRIC_ROWS: [&str; 5] = ["cumulative_return", "log_growth", "volatility", "max_drawdown", "sharpe"];

fn metric_value(m: &Metrics, row: &str) -> f64 {
    match row {
        "cumulative_return" => m.cumulative_return,
        "log_growth" => m.log_growth,
        "volatility" => m.volatility,
        "max_drawdown" => m.max_drawdown,
        _ => m.sharpe,
    }
}

/// Table with one row per metric and one column per strategy.
fn write_metrics_csv(dir: &Path, name: &str, reports: &[NamedReport]) -> Result<(), CliError> {
    let mut w = csv_writer(dir, name)?;
    let mut header = vec!["metric".to_string()];
    header.extend(reports.iter().map(|r| r.strategy.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for row in METRIC_ROWS {
        let mut rec = vec![row.to_string()];
        rec.extend(reports.iter().map(|r| metric_value(&r.report.metrics, row).to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let mut rec = vec!["bankrupt".to_string()];
    rec.extend(reports.iter().map(|r| r.report.bankrupt.to_string()));
    w.write_record(&rec).map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn write_trajectories(dir: &Path, prefix: &str, reports: &[NamedReport]) -> Result<(), CliError> {
    for r in reports {
        r.report
            .write_trajectory_csv(create(dir, &format!("trajectory_{prefix}_{}.csv", r.strategy))?)?;
    }
    Ok(())
}

fn print_reports(label: &str, reports: &[NamedReport]) {
    for r in reports {
        let m = &r.report.metrics;
        println!(
            "{label} {}: cumulative_return={:.6} log_growth={:.6} max_drawdown={:.6} sharpe={:.4}{}",
            r.strategy,
            m.cumulative_return,
            m.log_growth,
            m.max_drawdown,
            m.sharpe,
            if r.report.bankrupt { " BANKRUPT" } else { "" }
        );
    }
}

fn split_panel(panel: &ReturnPanel, split: f64) -> Result<(ReturnPanel, ReturnPanel), CliError> {
    let (train, test) = panel.split(split);
    if train.periods() == 0 || test.periods() == 0 {
        return Err(CliError::Config(format!(
            "split {split} leaves an empty part of the {} periods",
            panel.periods()
        )));
    }
    Ok((train, test))
}

/// Fits on the first `split` fraction of periods and evaluates the fixed
/// optima and equal-weight buy-and-hold in and out of sample.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, costs) = load(cfg)?;
    let (train, test) = split_panel(&panel, cfg.split)?;
    let cp = compound(&train, cfg.n, &costs, cfg.blocks)?;
    let solved = Solved::new(&cp, cfg)?;
    let mut strategies = solved.strategies();
    strategies.push((
        "buy_and_hold".to_string(),
        Strategy::equal_weight_buy_and_hold(panel.num_assets()),
    ));
    let in_sample = run_named(&train, cfg, &costs, &strategies)?;
    let out_of_sample = run_named(&test, cfg, &costs, &strategies)?;
    prepare_out(cfg)?;
    let fit = solved.summaries(panel.assets());
    match cfg.format {
        Format::Json => write_json(
            &cfg.out,
            "backtest.json",
            &BacktestFile {
                assets: panel.assets().to_vec(),
                split_index: train.periods(),
                fit: fit.clone(),
                in_sample,
                out_of_sample,
            },
        )?,
        Format::Csv => {
            print_reports("out_of_sample", &out_of_sample);
            write_metrics_csv(&cfg.out, "metrics_in_sample.csv", &in_sample)?;
            write_metrics_csv(&cfg.out, "metrics_out_of_sample.csv", &out_of_sample)?;
            write_trajectories(&cfg.out, "in_sample", &in_sample)?;
            write_trajectories(&cfg.out, "out_of_sample", &out_of_sample)?;
        }
    }
    for s in &fit {
        println!("{}", s.line());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScheduleFile {
    problem: ProblemKind,
    window: usize,
    times: Vec<usize>,
    weights: Vec<Vec<f64>>,
    carried_forward: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct OnlineFile {
    assets: Vec<String>,
    /// First period of the evaluation range.
    eval_start: usize,
    schedules: Vec<ScheduleFile>,
    fit: Vec<SolveSummary>,
    out_of_sample: Vec<NamedReport>,
}

/// Runs the sliding-window trader over the whole panel and evaluates it,
/// with the static optima fitted before the split and buy-and-hold, on the
/// periods after the split. The evaluation starts at the first block
/// boundary at or after the split so the schedule lines up with its blocks.
pub fn cmd_online(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, costs) = load(cfg)?;
    let (train, _) = split_panel(&panel, cfg.split)?;
    let start_block = train.periods().div_ceil(cfg.n);
    let eval_start = start_block * cfg.n;
    if eval_start >= panel.periods() {
        return Err(CliError::Config(format!(
            "no complete evaluation period after the split at {}",
            train.periods()
        )));
    }
    let problems: Vec<ProblemKind> = [(cfg.mode.exact(), ProblemKind::Exact), (cfg.mode.approx(), ProblemKind::Approx)]
        .into_iter()
        .filter_map(|(on, p)| on.then_some(p))
        .collect();
    let test = panel.slice(eval_start..panel.periods());
    let mut schedules: Vec<(ProblemKind, WeightSchedule)> = Vec::new();
    let mut reports = Vec::new();
    for &problem in &problems {
        let mut ocfg = OnlineConfig::new(cfg.window, cfg.n, problem, costs.clone());
        ocfg.solver = cfg.solver.clone();
        ocfg.r_f = cfg.r_f;
        let schedule = run_online(&panel, &ocfg)?;
        let tail = WeightSchedule {
            times: schedule.times[start_block..].to_vec(),
            weights: schedule.weights[start_block..].to_vec(),
            solve_reports: schedule.solve_reports[start_block..].to_vec(),
            carried_forward: schedule.carried_forward[start_block..].to_vec(),
        };
        reports.push(NamedReport {
            strategy: format!("online_{}", problem_name(problem)),
            report: schedule_backtest(&test, &tail, &ocfg)?,
        });
        schedules.push((problem, schedule));
    }
    let fit_panel = panel.slice(0..eval_start);
    let cp = compound(&fit_panel, cfg.n, &costs, cfg.blocks)?;
    let solved = Solved::new(&cp, cfg)?;
    let mut strategies = solved.strategies();
    strategies.push((
        "buy_and_hold".to_string(),
        Strategy::equal_weight_buy_and_hold(panel.num_assets()),
    ));
    reports.extend(run_named(&test, cfg, &costs, &strategies)?);

    prepare_out(cfg)?;
    match cfg.format {
        Format::Json => write_json(
            &cfg.out,
            "online.json",
            &OnlineFile {
                assets: panel.assets().to_vec(),
                eval_start,
                schedules: schedules
                    .iter()
                    .map(|(problem, s)| ScheduleFile {
                        problem: *problem,
                        window: cfg.window,
                        times: s.times.clone(),
                        weights: s.weights.iter().map(|w| w.to_vec()).collect(),
                        carried_forward: s.carried_forward.clone(),
                    })
                    .collect(),
                fit: solved.summaries(panel.assets()),
                out_of_sample: reports,
            },
        )?,
        Format::Csv => {
            for (problem, s) in &schedules {
                s.write_csv(panel.assets(), create(&cfg.out, &format!("schedule_{}.csv", problem_name(*problem)))?)?;
            }
            write_metrics_csv(&cfg.out, "metrics_out_of_sample.csv", &reports)?;
            write_trajectories(&cfg.out, "out_of_sample", &reports)?;
            print_reports("out_of_sample", &reports);
        }
    }
    for (problem, s) in &schedules {
        let carried = s.carried_forward.iter().filter(|c| **c).count();
        println!(
            "online {}: rebalances={} warm_up={} carried_forward={} eval_start={eval_start}",
            problem_name(*problem),
            s.len(),
            s.warm_up(),
            carried
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisFile {
    assets: Vec<String>,
    n: usize,
    block_mode: BlockMode,
    num_blocks: usize,
    costs: Vec<f64>,
    moments: MomentPair,
    /// Share of blocks with `|K'X| > 1` at the approximate optimum, where
    /// the quadratic expansion is outside its convergence radius.
    taylor_violation_fraction: f64,
    approx: SolveSummary,
    dominance: DominanceSummary,
    survival: SurvivalSummary,
}

/// Moments and diagnostics of the full panel.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, costs) = load(cfg)?;
    let cp = compound(&panel, cfg.n, &costs, cfg.blocks)?;
    let mom = moments(&cp)?;
    let approx = solve_approx(&mom, cp.period(), &cfg.solver)?;
    let taylor = taylor_violation_fraction(&cp, &approx.weight)?;
    let dominance = dominance_summary(&cp)?;
    let survival = survival_summary(&panel, &costs, cfg, ProblemKind::Approx, &approx.weight)?;
    let mc_rate = survival.mc_bankruptcy_rate;
    prepare_out(cfg)?;
    match cfg.format {
        Format::Json => write_json(
            &cfg.out,
            "analysis.json",
            &AnalysisFile {
                assets: panel.assets().to_vec(),
                n: cfg.n,
                block_mode: cfg.blocks,
                num_blocks: cp.num_blocks(),
                costs: costs.costs().to_vec(),
                moments: mom.clone(),
                taylor_violation_fraction: taylor,
                approx: SolveSummary::new(ProblemKind::Approx, panel.assets(), &approx),
                dominance,
                survival,
            },
        )?,
        Format::Csv => {
            cp.write_csv(create(&cfg.out, "compound.csv")?)?;
            let mut w = csv_writer(&cfg.out, "moments.csv")?;
            let mut header = vec!["asset".to_string(), "mean".to_string()];
            header.extend(panel.assets().iter().map(|a| format!("m_{a}")));
            w.write_record(&header).map_err(csv_err)?;
            for (i, asset) in panel.assets().iter().enumerate() {
                let mut rec = vec![asset.clone(), mom.mean[i].to_string()];
                rec.extend(mom.second_moment[i].iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush()?;
            write_json(&cfg.out, "dominance.json", &dominance)?;
            write_json(&cfg.out, "survival.json", &survival)?;
        }
    }
    println!(
        "analyze: blocks={} taylor_violation_fraction={taylor:.6} mc_bankruptcy_rate={mc_rate:.6}",
        cp.num_blocks()
    );
    Ok(())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
