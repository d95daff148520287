use std::fs::File;
use std::path::Path;

use regbat_core::rainflow::DEFAULT_TOLERANCE;
use regbat_core::sim::trace::read_profile_csv;
use regbat_core::sim::{generate_trace, load_trace_csv, table_one_cases, TraceFormat};
use regbat_core::*;
use serde::Serialize;

use crate::output::Output;
use crate::{Format, OracleArgs, TraceArgs};

pub fn oracle_config(args: &OracleArgs) -> OracleConfig {
    OracleConfig {
        levels_per_step: args.levels,
        max_steps: args.max_steps,
        leaf_budget: args.budget,
    }
}

/// Reads `--trace` or generates `--steps` samples. A trace file fixes the
/// interval, so `T` is overwritten with it.
pub fn load_trace(
    args: &TraceArgs,
    mut sc: Scenario,
    seed: u64,
) -> Result<(RegulationTrace, Scenario)> {
    let trace = match (&args.trace, args.steps) {
        (Some(path), _) => {
            let interval = args.interval_seconds / 3600.0;
            let format = TraceFormat {
                normalized: !args.raw,
                negate: args.negate,
                interval,
            };
            let trace = load_trace_csv(path, sc.battery.power, format)?;
            if sc.battery.interval != interval {
                log::info!(
                    "using the trace interval {interval} h instead of T = {}",
                    sc.battery.interval
                );
            }
            sc.battery.interval = interval;
            trace
        }
        (None, Some(steps)) => {
            let trace = generate_trace(seed, steps, sc.battery.power, sc.battery.interval)?;
            if args.negate {
                trace.negated()
            } else {
                trace
            }
        }
        (None, None) => return Err(Error::Config("give --trace FILE or --steps N".into())),
    };
    sc.validate()?;
    Ok((trace, sc))
}

#[derive(Serialize)]
struct CountReport {
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    delta_life: f64,
}

#[derive(Serialize)]
struct KindValue {
    kind: &'static str,
    value: f64,
}

pub fn count(
    profile: &Path,
    sc: &Scenario,
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let samples = read_profile_csv(File::open(profile).map_err(Error::from)?)?;
    let cycles = rainflow_count(&extract_extrema(&samples, DEFAULT_TOLERANCE));
    let report = CountReport {
        delta_life: delta_life(&cycles, &sc.stress)?,
        u: cycles.full,
        v: cycles.charge_half,
        w: cycles.discharge_half,
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&report),
        Format::Csv => {
            let depths = [("u", &report.u), ("v", &report.v), ("w", &report.w)];
            let rows = depths
                .into_iter()
                .flat_map(|(kind, xs)| xs.iter().map(move |&value| KindValue { kind, value }))
                .chain([KindValue {
                    kind: "delta_life",
                    value: report.delta_life,
                }]);
            out.csv(rows)
        }
    }
}

pub fn gap(sc: &Scenario, format: Option<Format>, out: &mut Output) -> anyhow::Result<()> {
    let report = optimality_gap_bound(&sc.prices, &sc.battery, &sc.stress)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&report),
        Format::Csv => out.csv([report]),
    }
}

#[derive(Serialize)]
struct StepRow {
    n: usize,
    r: f64,
    charge: f64,
    discharge: f64,
    /// SoC after the step (MWh).
    soc: f64,
}

fn step_rows<'a>(
    trace: &'a RegulationTrace,
    dispatch: &'a Dispatch,
    soc: &'a [f64],
) -> impl Iterator<Item = StepRow> + 'a {
    trace
        .setpoints
        .iter()
        .enumerate()
        .map(move |(n, &r)| StepRow {
            n,
            r,
            charge: dispatch.charge[n],
            discharge: dispatch.discharge[n],
            soc: soc[n + 1],
        })
}

pub fn simulate(
    trace: &RegulationTrace,
    sc: &Scenario,
    kind: PolicyKind,
    oracle: Option<&OracleConfig>,
    seed: Option<u64>,
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let mut report = run_simulation(kind, trace, sc, oracle)?;
    report.meta.seed = seed;
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&report),
        Format::Csv => out.csv(step_rows(trace, &report.dispatch, report.soc.as_slice())),
    }
}

#[derive(Serialize)]
struct BreakdownRow {
    policy: PolicyKind,
    u_hat: f64,
    j_cyc: f64,
    j_reg: f64,
    j_total: f64,
    delta_life: f64,
}

pub fn compare(
    trace: &RegulationTrace,
    sc: &Scenario,
    kinds: &[PolicyKind],
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let rows = kinds
        .iter()
        .map(|&kind| {
            let r = run_simulation(kind, trace, sc, None)?;
            Ok(BreakdownRow {
                policy: kind,
                u_hat: r.u_hat,
                j_cyc: r.cost.j_cyc,
                j_reg: r.cost.j_reg,
                j_total: r.cost.j_total,
                delta_life: r.cost.delta_life,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match format.unwrap_or(Format::Csv) {
        Format::Json => out.json(&rows),
        Format::Csv => out.csv(rows),
    }
}

#[derive(Serialize)]
struct SweepRow {
    price: f64,
    policy: PolicyKind,
    u_hat: f64,
    j_cyc: f64,
    j_reg: f64,
    j_total: f64,
}

/// Sets `theta = pi = price` for each price in turn.
pub fn sweep(
    trace: &RegulationTrace,
    sc: &Scenario,
    kind: PolicyKind,
    prices: &[f64],
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let rows = prices
        .iter()
        .map(|&price| {
            let m = MarketPrices::new(price, price)?;
            let r = run_simulation(kind, trace, &sc.with_prices(m), None)?;
            Ok(SweepRow {
                price,
                policy: kind,
                u_hat: r.u_hat,
                j_cyc: r.cost.j_cyc,
                j_reg: r.cost.j_reg,
                j_total: r.cost.j_total,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match format.unwrap_or(Format::Csv) {
        Format::Json => out.json(&rows),
        Format::Csv => out.csv(rows),
    }
}

#[derive(Serialize)]
struct OracleReport {
    optimum: CostBreakdown,
    dispatch: Dispatch,
    gap_vs_policy: GapMeasurement,
    /// `J*(K) - J*(2K - 1)`, floored at zero.
    slack: f64,
    levels: usize,
    leaves: u64,
}

pub fn oracle(
    trace: &RegulationTrace,
    sc: &Scenario,
    cfg: &OracleConfig,
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let best = brute_force_offline(trace, sc, cfg)?;
    let fine = brute_force_offline(trace, sc, &cfg.refined())?;
    let policy = run_simulation(PolicyKind::Threshold, trace, sc, None)?.cost;
    let raw_gap = policy.j_total - best.cost.j_total;
    let report = OracleReport {
        optimum: best.cost,
        gap_vs_policy: GapMeasurement {
            policy,
            oracle: best.cost,
            raw_gap,
            gap: raw_gap.max(0.0),
        },
        slack: (best.cost.j_total - fine.cost.j_total).max(0.0),
        levels: cfg.levels_per_step,
        leaves: best.leaves,
        dispatch: best.dispatch,
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&report),
        Format::Csv => {
            let soc = sc.battery.simulate_soc(sc.e0, &report.dispatch)?;
            out.csv(step_rows(trace, &report.dispatch, soc.as_slice()))
        }
    }
}

pub fn batch(
    trials: u64,
    steps: usize,
    base: Scenario,
    oracle: Option<OracleConfig>,
    format: Option<Format>,
    out: &mut Output,
) -> anyhow::Result<()> {
    let cfg = BatchConfig {
        trials,
        base,
        oracle,
    };
    let rows = run_batch(&table_one_cases(steps), &cfg)?;
    match format.unwrap_or(Format::Csv) {
        Format::Json => out.json(&rows),
        Format::Csv => out.csv(rows),
    }
}
