//! Many seeded trials per price case, aggregated into one row per case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_trace, run_simulation, PolicyKind};
use crate::analysis::optimality_gap_bound;
use crate::error::Result;
use crate::market::MarketPrices;
use crate::offline::OracleConfig;
use crate::policy::compute_u_hat;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCase {
    pub name: String,
    pub theta: f64,
    pub pi: f64,
    /// Round-trip efficiency, split evenly between charge and discharge.
    pub eta: f64,
    /// Length of each generated trace before repetition.
    pub steps: usize,
    /// The trace is concatenated with itself this many times.
    pub repeat: usize,
}

/// Nine cases: balanced prices at three levels with a lossless battery, three
/// price mixes at 85% round trip, and the same three mixes over traces
/// repeated twice.
pub fn table_one_cases(steps: usize) -> Vec<BatchCase> {
    let case = |i: usize, theta, pi, eta, repeat| BatchCase {
        name: i.to_string(),
        theta,
        pi,
        eta,
        steps,
        repeat,
    };
    vec![
        case(1, 50.0, 50.0, 1.0, 1),
        case(2, 100.0, 100.0, 1.0, 1),
        case(3, 200.0, 200.0, 1.0, 1),
        case(4, 50.0, 50.0, 0.85, 1),
        case(5, 80.0, 20.0, 0.85, 1),
        case(6, 20.0, 80.0, 0.85, 1),
        case(7, 50.0, 50.0, 0.85, 2),
        case(8, 80.0, 20.0, 0.85, 2),
        case(9, 20.0, 80.0, 0.85, 2),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub trials: u64,
    /// Battery, stress model and e0 shared by all cases; prices and
    /// efficiencies are taken from each case.
    pub base: Scenario,
    /// Oracle settings; cases longer than its cap get no gap column.
    pub oracle: Option<OracleConfig>,
}

/// One output row. Column order matches the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub case: String,
    pub theta: f64,
    pub pi: f64,
    pub eta: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub u_hat: f64,
    pub epsilon_theory: f64,
    pub max_gap: Option<f64>,
    pub mean_objective_offline: Option<f64>,
    pub mean_objective_policy: f64,
    pub mean_objective_simple: f64,
}

struct Trial {
    offline: Option<f64>,
    gap: Option<f64>,
    policy: f64,
    simple: f64,
}

/// Runs seeds `1..=trials` for every case. Trials run in parallel on the
/// current rayon pool; rows are identical for any thread count.
pub fn run_batch(cases: &[BatchCase], cfg: &BatchConfig) -> Result<Vec<BatchRow>> {
    cases.iter().map(|case| run_case(case, cfg)).collect()
}

fn run_case(case: &BatchCase, cfg: &BatchConfig) -> Result<BatchRow> {
    let mut scenario = cfg.base.clone();
    scenario.prices = MarketPrices::new(case.theta, case.pi)?;
    scenario.battery = scenario.battery.with_round_trip(case.eta);
    scenario.validate()?;
    let params = &scenario.battery;
    let report = optimality_gap_bound(&scenario.prices, params, &scenario.stress)?;
    let u_hat = compute_u_hat(&scenario.prices, params, &scenario.stress);

    let trials: Vec<Trial> = (1..=cfg.trials)
        .into_par_iter()
        .map(|seed| -> Result<Trial> {
            let trace = generate_trace(seed, case.steps, params.power, params.interval)?
                .repeated(case.repeat);
            let policy = run_simulation(
                PolicyKind::Threshold,
                &trace,
                &scenario,
                cfg.oracle.as_ref(),
            )?;
            let simple = run_simulation(PolicyKind::Simple, &trace, &scenario, None)?;
            Ok(Trial {
                offline: policy.gap.map(|g| g.oracle.j_total),
                gap: policy.gap.map(|g| g.gap),
                policy: policy.cost.j_total,
                simple: simple.cost.j_total,
            })
        })
        .collect::<Result<_>>()?;

    let n = trials.len() as f64;
    let mean = |f: &dyn Fn(&Trial) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let with_oracle = !trials.is_empty() && trials.iter().all(|t| t.offline.is_some());
    Ok(BatchRow {
        case: case.name.clone(),
        theta: case.theta,
        pi: case.pi,
        eta: case.eta,
        steps: case.steps * case.repeat,
        u_hat,
        epsilon_theory: report.epsilon,
        max_gap: with_oracle.then(|| trials.iter().filter_map(|t| t.gap).fold(0.0, f64::max)),
        mean_objective_offline: with_oracle.then(|| mean(&|t| t.offline.unwrap_or(0.0))),
        mean_objective_policy: mean(&|t| t.policy),
        mean_objective_simple: mean(&|t| t.simple),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(trials: u64, oracle: Option<OracleConfig>) -> BatchConfig {
        let mut base = Scenario::default();
        base.battery.interval = 1.0;
        BatchConfig {
            trials,
            base,
            oracle,
        }
    }

    #[test]
    fn repeated_case_doubles_length() {
        let cases = table_one_cases(10);
        assert_eq!(cases.len(), 9);
        let rows = run_batch(&cases[6..7], &config(3, None)).unwrap();
        assert_eq!(rows[0].steps, 20);
        assert!(rows[0].max_gap.is_none());
    }

    #[test]
    fn balanced_case_with_oracle() {
        let case = BatchCase {
            name: "b".into(),
            theta: 50.0,
            pi: 50.0,
            eta: 1.0,
            steps: 5,
            repeat: 1,
        };
        let rows = run_batch(&[case], &config(4, Some(OracleConfig::default()))).unwrap();
        let row = &rows[0];
        assert_eq!(row.epsilon_theory, 0.0);
        assert!(row.max_gap.unwrap() < 1e-6);
        assert!(row.mean_objective_offline.is_some());
    }

    #[test]
    fn rows_are_reproducible() {
        let cases = table_one_cases(30);
        let a = run_batch(&cases[3..6], &config(5, None)).unwrap();
        let b = run_batch(&cases[3..6], &config(5, None)).unwrap();
        assert_eq!(a, b);
    }
}
