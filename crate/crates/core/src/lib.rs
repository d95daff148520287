//! Online battery control for pay-for-performance frequency regulation with
//! rainflow-counted cycle aging.
//!
//! The crate covers the whole pipeline: SoC dynamics ([`battery`]), market
//! settlement ([`market`], [`cost`]), rainflow counting ([`rainflow`]), the
//! threshold controller ([`policy`]), its worst-case regret ([`analysis`]),
//! an exhaustive offline optimum for small instances ([`offline`]) and a
//! simulation harness ([`sim`]).

// Negated float comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod battery;
pub mod config;
pub mod cost;
pub mod error;
pub mod market;
pub mod numeric;
pub mod offline;
pub mod policy;
pub mod rainflow;
pub mod scenario;
pub mod sim;
pub mod stress;

pub use analysis::{optimal_half_depths, optimality_gap_bound, GapReport, Regime};
pub use battery::{BatteryParams, Dispatch, SocSeries};
pub use config::ConfigFile;
pub use cost::{cycle_aging_cost, delta_life, settlement_cost, stress, total_cost, CostBreakdown};
pub use error::{Error, Result};
pub use market::{MarketPrices, RegulationTrace};
pub use offline::{
    brute_force_offline, estimate_slack, measure_gap, GapMeasurement, OracleConfig, OracleSolution,
};
pub use policy::{compute_u_hat, rollout, Action, Controller, SimplePolicy, ThresholdPolicy};
pub use rainflow::{
    count_dispatch, extract_extrema, rainflow_count, stream_count, CycleSet, ExtremaSequence,
    ResidueStack,
};
pub use scenario::Scenario;
pub use sim::{run_batch, run_simulation, BatchCase, BatchConfig, BatchRow, PolicyKind, SimReport};
pub use stress::{Polynomial, PowerLaw, StressModel};
