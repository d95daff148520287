//! Simulation harness: runs a controller over a trace and checks the run
//! against independent recounts.

mod batch;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use batch::{run_batch, table_one_cases, BatchCase, BatchConfig, BatchRow};
pub use trace::{generate_trace, load_trace_csv, read_trace_csv, TraceFormat, TWO_SECONDS};

use crate::battery::{Dispatch, SocSeries};
use crate::cost::{total_cost, CostBreakdown};
use crate::error::{Error, Result};
use crate::market::RegulationTrace;
use crate::offline::{brute_force_offline, gap_between, GapMeasurement, OracleConfig};
use crate::policy::{Controller, SimplePolicy, ThresholdPolicy};
use crate::rainflow::{extract_extrema, rainflow_count, CycleSet, ResidueStack, DEFAULT_TOLERANCE};
use crate::scenario::Scenario;
use crate::stress::StressModel;

/// Relative tolerance of the throughput conservation check.
const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Threshold,
    Simple,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Threshold => "threshold",
            PolicyKind::Simple => "simple",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(PolicyKind::Threshold),
            "simple" => Ok(PolicyKind::Simple),
            other => Err(Error::param(format!("unknown policy `{other}`"))),
        }
    }
}

/// What was simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub seed: Option<u64>,
    pub steps: usize,
    pub theta: f64,
    pub pi: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    pub round_trip: f64,
    pub e0: f64,
    pub interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub meta: TrialMeta,
    /// Depth threshold in force; 1 for the simple policy.
    pub u_hat: f64,
    pub cost: CostBreakdown,
    /// Oracle comparison, present only when the oracle ran.
    pub gap: Option<GapMeasurement>,
    pub cycles: CycleSet,
    pub soc: SocSeries,
    #[serde(skip)]
    pub dispatch: Dispatch,
}

/// Runs `kind` over `trace`.
///
/// Cycles are counted online while stepping and compared with a batch
/// recount of the final SoC series; the counted throughput is compared with
/// the dispatch totals. For the threshold policy the SoC span and the full
/// cycle depths are also checked against `u_hat`. Any mismatch is an
/// [`Error::Invariant`].
///
/// With `oracle` set, the offline optimum is computed when the trace fits
/// under `max_steps` and skipped otherwise.
pub fn run_simulation<S: StressModel>(
    kind: PolicyKind,
    trace: &RegulationTrace,
    scenario: &Scenario<S>,
    oracle: Option<&OracleConfig>,
) -> Result<SimReport> {
    scenario.validate()?;
    let params = &scenario.battery;
    let (u_hat, mut controller): (f64, Box<dyn Controller>) = match kind {
        PolicyKind::Threshold => {
            let p = ThresholdPolicy::new(scenario.e0, &scenario.prices, params, &scenario.stress)?;
            (p.u_hat(), Box::new(p))
        }
        PolicyKind::Simple => (1.0, Box::new(SimplePolicy::new(params))),
    };

    let span = u_hat * params.capacity;
    let mut dispatch = Dispatch::with_capacity(trace.len());
    let mut soc = Vec::with_capacity(trace.len() + 1);
    let mut stack = ResidueStack::with_tolerance(DEFAULT_TOLERANCE);
    let mut full = Vec::new();
    let mut e = scenario.e0;
    let (mut hi, mut lo) = (e, e);
    soc.push(e);
    stack.push_with(e / params.capacity, |d| full.push(d));
    for (n, &r) in trace.setpoints.iter().enumerate() {
        let a = controller.step(e, r);
        e = params
            .soc_step(e, a.charge, a.discharge)
            .map_err(|err| match err {
                Error::Complementarity { .. } => Error::Complementarity { index: n },
                Error::InvalidPower { .. } => Error::InvalidPower { index: n },
                other => other,
            })?;
        if !params.contains(e) {
            return Err(Error::Invariant(format!(
                "SoC {e} out of bounds after step {}",
                n + 1
            )));
        }
        hi = hi.max(e);
        lo = lo.min(e);
        if kind == PolicyKind::Threshold && hi - lo > span {
            return Err(Error::Invariant(format!(
                "SoC span {} exceeds u_hat E = {span} after step {}",
                hi - lo,
                n + 1
            )));
        }
        dispatch.push(a.charge, a.discharge);
        soc.push(e);
        stack.push_with(e / params.capacity, |d| full.push(d));
    }
    let mut cycles = stack.finalize();
    cycles.full = full;
    let soc = SocSeries(soc);

    let recount = rainflow_count(&extract_extrema(
        &soc.normalized(params.capacity),
        DEFAULT_TOLERANCE,
    ));
    if recount.sorted() != cycles.sorted() {
        return Err(Error::Invariant(
            "streaming and batch cycle counts differ".into(),
        ));
    }
    check_conservation(&cycles, &dispatch, scenario)?;
    if kind == PolicyKind::Threshold {
        if let Some(max) = cycles.max_full_depth() {
            if max > u_hat + 1e-9 {
                return Err(Error::Invariant(format!(
                    "full cycle of depth {max} above u_hat {u_hat}"
                )));
            }
        }
    }

    let cost = total_cost(&dispatch, trace, params, &scenario.stress, &scenario.prices)?;
    let gap = match oracle {
        Some(cfg) if trace.len() <= cfg.max_steps => {
            let best = brute_force_offline(trace, scenario, cfg)?;
            Some(gap_between(cost, best.cost))
        }
        Some(cfg) => {
            log::info!(
                "skipping oracle: {} steps above cap {}",
                trace.len(),
                cfg.max_steps
            );
            None
        }
        None => None,
    };

    Ok(SimReport {
        policy: kind,
        meta: TrialMeta {
            seed: None,
            steps: trace.len(),
            theta: scenario.prices.theta,
            pi: scenario.prices.pi,
            eta_c: params.eta_c,
            eta_d: params.eta_d,
            round_trip: params.round_trip(),
            e0: scenario.e0,
            interval: trace.interval,
        },
        u_hat,
        cost,
        gap,
        cycles,
        soc,
        dispatch,
    })
}

/// Rises and falls counted by rainflow must add up to the charged and
/// discharged energy (normalized).
fn check_conservation<S>(
    cycles: &CycleSet,
    dispatch: &Dispatch,
    scenario: &Scenario<S>,
) -> Result<()> {
    let p = &scenario.battery;
    let charged: f64 = dispatch.charge.iter().sum::<f64>() * p.interval * p.eta_c / p.capacity;
    let discharged: f64 =
        dispatch.discharge.iter().sum::<f64>() * p.interval / (p.eta_d * p.capacity);
    let (rise, fall) = cycles.throughput();
    for (counted, expected, what) in [(rise, charged, "charge"), (fall, discharged, "discharge")] {
        if (counted - expected).abs() > CONSERVATION_TOL * expected.max(1.0) {
            return Err(Error::Invariant(format!(
                "{what} throughput {counted} does not match dispatch {expected}"
            )));
        }
    }
    Ok(())
}
