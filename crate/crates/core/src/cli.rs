//! Command-line surface: `simulate`, `fit`, `gof`, `analyze`, `forecast`, `cost`.
//!
//! Every output is a pure function of the inputs and `--seed`, so repeated
//! runs produce byte-identical files.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{
    default_taus, duration_volume, epps, power_law_fit, previous_tick_sample, signature_plot,
    BeforeFirst, LagTable, PowerLawFit, RegularGrid, StepSeries,
};
use crate::error::{Error, Result};
use crate::estimator::{fit, fit_windowed, FitOptions, FitReport};
use crate::forecast::{market_impact_cost, next_event_forecast, rollout, ImpactLadder};
use crate::gof::{all_residuals, gof_report};
use crate::io::events::event_prices;
use crate::io::tables::{num, opt, Table};
use crate::io::{
    deserialize_params, ingest, serialize_params, write_events, IngestConfig, Ingested,
};
use crate::orderbook::{InteractionPattern, PriceConfig};
use crate::params::ParameterSet;
use crate::simulator::{empirical_rate, rng_for, simulate, SimConfig};
use crate::stream::{Side, StreamId};

#[derive(Debug, Parser)]
#[command(
    name = "hawkes-lob",
    version,
    about = "Marked Hawkes models of the first line of a limit order book"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate events and price paths from a parameter file.
    Simulate(SimulateArgs),
    /// Fit parameters to an event file.
    Fit(FitArgs),
    /// Time-rescaling goodness-of-fit report.
    Gof(GofArgs),
    /// Signature plot, Epps curve and duration tables.
    Analyze(AnalyzeArgs),
    /// Next-event survival forecast at the end of an event file.
    Forecast(ForecastArgs),
    /// Market-impact cost of walking an order-book ladder.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Event file (timestamp_ms, asset, side, direction, price, volume).
    #[arg(long)]
    pub input: PathBuf,
    /// Expected number of assets in the input.
    #[arg(long)]
    pub assets: Option<usize>,
    /// Price tick; off-grid prices are reported.
    #[arg(long)]
    pub tick_size: Option<f64>,
    /// Drop off-grid prices and treat warnings as errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameter file (keyed text).
    #[arg(long)]
    pub params: PathBuf,
    /// Directory receiving events.csv, prices.csv and simulation.json.
    #[arg(long)]
    pub output: PathBuf,
    /// Seed of every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// End of the simulated window in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub horizon: f64,
    /// Price tick.
    #[arg(long, default_value_t = 1e-5)]
    pub tick_size: f64,
    /// Bid price before the first event.
    #[arg(long, default_value_t = 1.0)]
    pub initial_price: f64,
    /// Initial spread in ticks.
    #[arg(long, default_value_t = 1)]
    pub initial_spread: i64,
    /// Simulate even when the branching matrix has spectral radius >= 1.
    #[arg(long)]
    pub allow_nonstationary: bool,
    /// Asset symbols, comma separated (default A0, A1, …).
    #[arg(long, value_delimiter = ',')]
    pub symbols: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PatternChoice {
    /// Every cell of the bid/ask interaction table.
    Table,
    /// Self-excitation only.
    SelfOnly,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory (default: report to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Branching cells left free in the fit.
    #[arg(long, value_enum, default_value_t = PatternChoice::Table)]
    pub pattern: PatternChoice,
    /// Fit consecutive windows of this many seconds and average them.
    #[arg(long)]
    pub window: Option<f64>,
    /// Seconds discarded at the start of the data.
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    /// One impact exponent shared by every stream.
    #[arg(long)]
    pub tie_impact: bool,
    /// One decay rate shared by every stream.
    #[arg(long)]
    pub tie_decay: bool,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Parameter file (keyed text).
    #[arg(long)]
    pub params: PathBuf,
    /// Output directory (default: report to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Significance level of the per-stream KS tests.
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory (default: report to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Sampling step of the previous-tick grid, seconds.
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
    /// Lags in seconds (default: every grid step up to 100 s).
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Seconds discarded at the start of the data.
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Parameter file (keyed text).
    #[arg(long)]
    pub params: PathBuf,
    /// Output directory (default: report to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Forecast lags in seconds (default 0, 0.1, …, 10).
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Monte Carlo rollouts in addition to the frozen-history curve.
    #[arg(long, default_value_t = 0)]
    pub rollouts: usize,
    /// Seed of the rollouts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Ladder as `offset:volume` pairs, e.g. `0:5,1:5`.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<String>>,
    /// Draw a ladder of this many consecutive levels with Exp(mark-rate) volumes.
    #[arg(long)]
    pub ladder_levels: Option<usize>,
    /// Rate β of the exponential volume law for drawn ladders.
    #[arg(long, default_value_t = 1.0)]
    pub mark_rate: f64,
    /// Quantity to buy by walking the ladder.
    #[arg(long)]
    pub quantity: f64,
    /// Price tick.
    #[arg(long, default_value_t = 1e-5)]
    pub tick_size: f64,
    /// Seed of the drawn ladder.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: report to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn read_params(path: &Path) -> Result<ParameterSet<f64>> {
    deserialize_params(&std::fs::read_to_string(path)?)
}

fn load(args: &InputArgs) -> Result<Ingested<f64>> {
    let cfg = IngestConfig {
        tick_size: args.tick_size,
        strict: args.strict,
        ..IngestConfig::default()
    };
    let data = ingest(&args.input, &cfg)?;
    if let Some(d) = args.assets {
        if d != data.events.assets() {
            return Err(Error::InvalidInput(format!(
                "expected {d} asset(s), the input has {}",
                data.events.assets()
            )));
        }
    }
    log::info!("ingested {} events: {:?}", data.events.len(), data.report);
    Ok(data)
}

fn json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `name` into the output directory, or prints it when there is none.
fn emit(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), contents)?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn emit_file(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    horizon: f64,
    events: usize,
    counts: Vec<(String, usize)>,
    /// Events per second after discarding the first `RATE_BURN_IN` of the horizon.
    rates: Vec<(String, f64)>,
    truncated: bool,
    proposals: usize,
    crossed_fraction: Vec<f64>,
}

const RATE_BURN_IN: f64 = 0.1;

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let params = read_params(&a.params)?;
    let cfg = SimConfig {
        price: PriceConfig::new(a.initial_price, a.tick_size, a.initial_spread)?,
        allow_nonstationary: a.allow_nonstationary,
        ..SimConfig::new(a.horizon, a.seed)
    };
    let sim = simulate(&params, &cfg)?;
    let symbols = match &a.symbols {
        Some(s) => s.clone(),
        None => (0..params.assets()).map(|k| format!("A{k}")).collect(),
    };
    let prices = event_prices(&sim.events, &sim.paths);
    let out = Some(a.output.as_path());
    emit_file(
        out,
        "events.csv",
        &write_events(&sim.events, &prices, &symbols, None)?,
    )?;

    let mut t = Table::new(&["time", "asset", "ask", "bid", "spread"]);
    for p in &sim.paths {
        for k in 0..p.times.len() {
            let ask = p.p0 + p.ask_ticks[k] as f64 * p.tick;
            let bid = p.p0 + p.bid_ticks[k] as f64 * p.tick;
            t.push(vec![
                num(p.times[k]),
                symbols[p.asset].clone(),
                num(ask),
                num(bid),
                num((p.ask_ticks[k] - p.bid_ticks[k]) as f64 * p.tick),
            ]);
        }
    }
    emit_file(out, "prices.csv", &t.to_csv()?)?;
    let counts = sim.events.counts();
    let summary = SimulationSummary {
        seed: a.seed,
        horizon: sim.events.end(),
        events: sim.events.len(),
        counts: StreamId::all(params.assets())
            .map(|s| (s.key(), counts[s.index()]))
            .collect(),
        rates: StreamId::all(params.assets())
            .map(|s| (s.key(), empirical_rate(&sim.events, s, RATE_BURN_IN)))
            .collect(),
        truncated: sim.truncated,
        proposals: sim.proposals,
        crossed_fraction: sim.paths.iter().map(|p| p.crossed_fraction()).collect(),
    };
    emit_file(out, "simulation.json", &json(&summary)?)
}

fn check_fit(report: &FitReport<f64>, strict: bool) -> Result<()> {
    if strict && !report.stationary {
        return Err(Error::NonStationary {
            radius: report.spectral_radius,
        });
    }
    if strict && !report.converged {
        return Err(Error::Numerical(format!(
            "optimizer did not converge in {} iterations",
            report.iterations
        )));
    }
    Ok(())
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let data = load(&a.input)?;
    let mut events = data.events;
    if a.burn_in > 0.0 {
        events = events.window(events.start() + a.burn_in, events.end())?;
    }
    let pattern = match a.pattern {
        PatternChoice::Table => InteractionPattern::table(events.assets()),
        PatternChoice::SelfOnly => InteractionPattern::self_only(events.assets()),
    };
    let opts = FitOptions {
        tie_impact_exponent: a.tie_impact,
        tie_decay: a.tie_decay,
        ..FitOptions::default()
    };
    let out = a.output.as_deref();
    match a.window {
        Some(w) => {
            let res = fit_windowed(&events, &pattern, &opts, w)?;
            emit_file(out, "fit.params", &serialize_params(&res.average))?;
            emit(out, "fit_windows.json", &json(&res)?)?;
            for r in &res.reports {
                check_fit(r, a.input.strict)?;
            }
        }
        None => {
            let report = fit(&events, &pattern, &opts)?;
            emit_file(out, "fit.params", &serialize_params(&report.params))?;
            emit(out, "fit_report.json", &json(&report)?)?;
            check_fit(&report, a.input.strict)?;
        }
    }
    Ok(())
}

fn run_gof(a: &GofArgs) -> Result<()> {
    let data = load(&a.input)?;
    let params = read_params(&a.params)?;
    let residuals = all_residuals(&params, &data.events)?;
    let mut t = Table::new(&["stream", "index", "residual"]);
    for r in &residuals {
        for (k, v) in r.values.iter().enumerate() {
            t.push(vec![r.stream.key(), k.to_string(), num(*v)]);
        }
    }
    let out = a.output.as_deref();
    emit_file(out, "residuals.csv", &t.to_csv()?)?;
    let report = gof_report(&params, &data.events, a.level)?;
    emit(out, "gof_report.json", &json(&report)?)
}

/// Log mid-price of each asset, from the quoted prices in the event file.
fn log_mid_series(data: &Ingested<f64>) -> Result<Vec<StepSeries<f64>>> {
    let d = data.events.assets();
    let mut quotes = vec![(None::<f64>, None::<f64>); d];
    let mut times = vec![Vec::new(); d];
    let mut values = vec![Vec::new(); d];
    for (ev, &p) in data.events.events().iter().zip(&data.prices) {
        let a = ev.stream.asset;
        match ev.stream.side {
            Side::Ask => quotes[a].0 = Some(p),
            Side::Bid => quotes[a].1 = Some(p),
        }
        let mid = match quotes[a] {
            (Some(x), Some(y)) => (x + y) / 2.0,
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => continue,
        };
        if times[a].last() == Some(&ev.time) {
            *values[a].last_mut().expect("value per time") = mid.ln();
        } else {
            times[a].push(ev.time);
            values[a].push(mid.ln());
        }
    }
    times
        .into_iter()
        .zip(values)
        .map(|(t, v)| StepSeries::new(t, v))
        .collect()
}

#[derive(Serialize)]
struct AnalysisSummary {
    grid_step: f64,
    grid_points: usize,
    events: usize,
    signature_fits: Vec<(String, Option<PowerLawFit<f64>>)>,
    dropped_lags: Vec<f64>,
}

fn run_analyze(a: &AnalyzeArgs) -> Result<()> {
    let data = load(&a.input)?;
    let ev = &data.events;
    let step = a.grid_step;
    if !(step > 0.0) {
        return Err(Error::param("grid-step", "must be positive"));
    }
    let taus = a.taus.clone().unwrap_or_else(|| default_taus(step, 100.0));
    let grid = RegularGrid::covering(ev.start() + a.burn_in, ev.end(), step)?;
    let mids = log_mid_series(&data)?;
    let mut sampled = Vec::with_capacity(mids.len());
    for m in &mids {
        let fill = m.values().first().copied().unwrap_or(0.0);
        sampled.push(previous_tick_sample(m, &grid, BeforeFirst::Fill(fill))?);
    }

    let sym = &data.symbols;
    let name = |k: usize| sym.get(k).cloned().unwrap_or_else(|| format!("A{k}"));
    let mut sig = Table::new(&["asset", "tau", "variance"]);
    let mut fits = Vec::new();
    let mut dropped = Vec::new();
    for (k, x) in sampled.iter().enumerate() {
        let table = signature_plot(x, step, &taus)?;
        push_lag_rows(&mut sig, &[name(k)], &table);
        fits.push((name(k), power_law_fit(&table)));
        dropped = table.dropped.clone();
    }
    let mut ep = Table::new(&["asset1", "asset2", "tau", "rho"]);
    for i in 0..sampled.len() {
        for j in i + 1..sampled.len() {
            let table = epps(&sampled[i], &sampled[j], step, &taus)?;
            push_lag_rows(&mut ep, &[name(i), name(j)], &table);
        }
    }
    let mut dur = Table::new(&["asset", "duration", "volume"]);
    for k in 0..ev.assets() {
        for (d, v) in duration_volume(ev, |s| s.asset == k) {
            dur.push(vec![name(k), num(d), num(v)]);
        }
    }
    let out = a.output.as_deref();
    emit_file(out, "signature.csv", &sig.to_csv()?)?;
    if ev.assets() > 1 {
        emit_file(out, "epps.csv", &ep.to_csv()?)?;
    }
    emit_file(out, "durations.csv", &dur.to_csv()?)?;
    let summary = AnalysisSummary {
        grid_step: step,
        grid_points: grid.count,
        events: ev.len(),
        signature_fits: fits,
        dropped_lags: dropped,
    };
    emit(out, "analysis.json", &json(&summary)?)
}

fn push_lag_rows(t: &mut Table, keys: &[String], table: &LagTable<f64>) {
    for r in &table.rows {
        let mut row = keys.to_vec();
        row.push(num(r.tau));
        row.push(opt(r.value));
        t.push(row);
    }
}

fn run_forecast(a: &ForecastArgs) -> Result<()> {
    let data = load(&a.input)?;
    let params = read_params(&a.params)?;
    let taus = a
        .taus
        .clone()
        .unwrap_or_else(|| (0..=100).map(|k| k as f64 * 0.1).collect());
    let f = next_event_forecast(&params, &data.events, &taus)?;
    let horizon = taus.iter().copied().fold(0.0, f64::max);
    let mc = if a.rollouts > 0 && horizon > 0.0 {
        Some(rollout(&params, &data.events, horizon, a.rollouts, a.seed)?)
    } else {
        None
    };
    let mut header = vec!["stream", "tau", "survival"];
    if mc.is_some() {
        header.push("rollout_survival");
    }
    let mut t = Table::new(&header);
    for c in &f.curves {
        for (k, &tau) in c.taus.iter().enumerate() {
            let mut row = vec![c.stream.key(), num(tau), num(c.survival[k])];
            if let Some(r) = &mc {
                row.push(num(r.empirical_survival(c.stream, tau)));
            }
            t.push(row);
        }
    }
    let out = a.output.as_deref();
    emit_file(out, "survival.csv", &t.to_csv()?)?;
    emit(out, "forecast.json", &json(&f)?)
}

fn parse_ladder(spec: &[String]) -> Result<ImpactLadder<f64>> {
    let levels = spec
        .iter()
        .map(|s| {
            let (x, k) = s.split_once(':').ok_or_else(|| {
                Error::InvalidInput(format!("ladder level `{s}` is not offset:volume"))
            })?;
            let x: i64 = x
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad ladder offset `{x}`")))?;
            let k: f64 = k
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad ladder volume `{k}`")))?;
            Ok((x, k))
        })
        .collect::<Result<Vec<_>>>()?;
    ImpactLadder::new(levels)
}

fn run_cost(a: &CostArgs) -> Result<()> {
    let ladder = match (&a.ladder, a.ladder_levels) {
        (Some(spec), None) => parse_ladder(spec)?,
        (None, Some(n)) => ImpactLadder::simulated(a.mark_rate, n, &mut rng_for(a.seed, 0))?,
        _ => {
            return Err(Error::InvalidInput(
                "give exactly one of --ladder and --ladder-levels".into(),
            ))
        }
    };
    let cost = market_impact_cost(&ladder, a.quantity, a.tick_size)?;
    #[derive(Serialize)]
    struct CostReport<'a> {
        tick: f64,
        ladder: &'a [(i64, f64)],
        #[serde(flatten)]
        cost: crate::forecast::ImpactCost<f64>,
    }
    let report = CostReport {
        tick: a.tick_size,
        ladder: ladder.levels(),
        cost,
    };
    emit(a.output.as_deref(), "cost.json", &json(&report)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Fit(a) => run_fit(a),
        Command::Gof(a) => run_gof(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Forecast(a) => run_forecast(a),
        Command::Cost(a) => run_cost(a),
    }
}
