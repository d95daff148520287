//! Exhaustive offline oracle over a discretized action space.
//!
//! Every step either follows a fraction `k / (K - 1)` of the instruction
//! (`k = 0..K`) in the instructed direction, clipped to what the SoC bounds
//! allow. The cost of a leaf depends on the whole path through the rainflow
//! residue, so the search is a depth-first enumeration carrying an online
//! [`ResidueStack`]. Branches are pruned with a lower bound that is valid for
//! every completion: the aging already locked into closed cycles plus half
//! the aging of the current residue (extending a path never lowers either
//! term, since the stress function is convex and increasing) plus the
//! settlement cost paid so far.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::{BatteryParams, Dispatch};
use crate::cost::{total_cost, CostBreakdown};
use crate::error::{Error, Result};
use crate::market::{MarketPrices, RegulationTrace};
use crate::policy::{rollout, ThresholdPolicy};
use crate::rainflow::ResidueStack;
use crate::scenario::Scenario;
use crate::stress::StressModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Action levels per step (`K >= 2`).
    pub levels_per_step: usize,
    /// Longest trace the oracle accepts.
    pub max_steps: usize,
    /// Maximum number of complete action sequences evaluated.
    pub leaf_budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            levels_per_step: 9,
            max_steps: 12,
            leaf_budget: 10_000_000,
        }
    }
}

impl OracleConfig {
    pub fn with_levels(self, levels_per_step: usize) -> Self {
        Self {
            levels_per_step,
            ..self
        }
    }

    /// The next grid that contains this one: `2K - 1` levels.
    pub fn refined(self) -> Self {
        self.with_levels(2 * self.levels_per_step - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels_per_step < 2 {
            return Err(Error::param("oracle needs at least two levels per step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub dispatch: Dispatch,
    pub cost: CostBreakdown,
    /// Complete action sequences evaluated.
    pub leaves: u64,
}

/// Minimizes aging plus settlement cost over the action grid.
///
/// Ties resolve to the lexicographically smallest sequence of level indices.
pub fn brute_force_offline<S: StressModel>(
    trace: &RegulationTrace,
    scenario: &Scenario<S>,
    cfg: &OracleConfig,
) -> Result<OracleSolution> {
    cfg.validate()?;
    if trace.len() > cfg.max_steps {
        return Err(Error::TooManySteps {
            steps: trace.len(),
            cap: cfg.max_steps,
        });
    }
    let params = &scenario.battery;
    if !params.contains(scenario.e0) {
        return Err(Error::param("e0 outside the SoC bounds"));
    }
    let search = Search::new(trace, params, &scenario.stress, &scenario.prices, cfg);

    // Seed the bound with two grid paths: never respond, and always respond
    // as fully as the bounds allow.
    let idle = search.evaluate_path(scenario.e0, |_| 0);
    let eager = search.evaluate_path(scenario.e0, |choices| choices - 1);
    let seed_bound = idle.min(eager);

    let root = Node::root(scenario.e0);
    let mut first = Vec::new();
    search.choices(&root, 0, &mut first);
    let leaves = AtomicU64::new(0);
    let exhausted = AtomicBool::new(false);
    let branches: Vec<Option<(f64, Vec<f64>)>> = first
        .par_iter()
        .map(|&amount| {
            let mut walker = Walker::new(&search, seed_bound, &leaves, &exhausted);
            let mut node = root.clone();
            walker.descend(&mut node, 0, amount);
            walker.best
        })
        .collect();
    if exhausted.load(Ordering::Relaxed) {
        return Err(Error::BudgetExceeded {
            budget: cfg.leaf_budget,
        });
    }

    let mut winner: Option<(f64, Vec<f64>)> = None;
    for branch in branches.into_iter().flatten() {
        if winner.as_ref().is_none_or(|w| branch.0 < w.0) {
            winner = Some(branch);
        }
    }
    let (_, amounts) = winner.ok_or_else(|| Error::Invariant("oracle found no leaf".into()))?;
    let mut dispatch = Dispatch::with_capacity(trace.len());
    for (&amount, &r) in amounts.iter().zip(&trace.setpoints) {
        if r >= 0.0 {
            dispatch.push(amount, 0.0);
        } else {
            dispatch.push(0.0, amount);
        }
    }
    params.simulate_soc(scenario.e0, &dispatch)?;
    let cost = total_cost(&dispatch, trace, params, &scenario.stress, &scenario.prices)?;
    Ok(OracleSolution {
        dispatch,
        cost,
        leaves: leaves.load(Ordering::Relaxed),
    })
}

/// Regret of the threshold policy against the oracle on one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    pub policy: CostBreakdown,
    pub oracle: CostBreakdown,
    /// `policy - oracle` before clamping.
    pub raw_gap: f64,
    /// Non-negative regret.
    pub gap: f64,
}

pub fn measure_gap<S: StressModel>(
    trace: &RegulationTrace,
    scenario: &Scenario<S>,
    cfg: &OracleConfig,
) -> Result<GapMeasurement> {
    let oracle = brute_force_offline(trace, scenario, cfg)?;
    let policy = threshold_cost(trace, scenario)?;
    Ok(gap_between(policy, oracle.cost))
}

pub(crate) fn gap_between(policy: CostBreakdown, oracle: CostBreakdown) -> GapMeasurement {
    let raw_gap = policy.j_total - oracle.j_total;
    if raw_gap < 0.0 {
        log::debug!("policy beats the oracle grid by {}", -raw_gap);
    }
    GapMeasurement {
        policy,
        oracle,
        raw_gap,
        gap: raw_gap.max(0.0),
    }
}

pub(crate) fn threshold_cost<S: StressModel>(
    trace: &RegulationTrace,
    scenario: &Scenario<S>,
) -> Result<CostBreakdown> {
    let params = &scenario.battery;
    let mut policy = ThresholdPolicy::new(scenario.e0, &scenario.prices, params, &scenario.stress)?;
    let (dispatch, _) = rollout(&mut policy, trace, params, scenario.e0)?;
    total_cost(&dispatch, trace, params, &scenario.stress, &scenario.prices)
}

/// Discretization slack: how much the optimum improves when the grid is
/// refined from `K` to `2K - 1` levels. Never negative since the grids nest.
pub fn estimate_slack<S: StressModel>(
    trace: &RegulationTrace,
    scenario: &Scenario<S>,
    cfg: &OracleConfig,
) -> Result<f64> {
    let coarse = brute_force_offline(trace, scenario, cfg)?;
    let fine = brute_force_offline(trace, scenario, &cfg.refined())?;
    Ok((coarse.cost.j_total - fine.cost.j_total).max(0.0))
}

/// Read-only problem data shared by all branches.
struct Search<'a, S: ?Sized> {
    trace: &'a RegulationTrace,
    params: &'a BatteryParams,
    phi: &'a S,
    prices: &'a MarketPrices,
    levels: usize,
    budget: u64,
    /// `E R`, dollars per unit of life.
    life_price: f64,
    up: f64,
    down: f64,
    /// Instruction direction per step (`true` = charge); zero instructions
    /// take the direction of the previous nonzero one.
    charging: Vec<bool>,
    /// End (exclusive) of the run of equal-direction steps containing `n`.
    run_end: Vec<usize>,
    /// Total instructed magnitude from `n` to the end of its run.
    run_rest: Vec<f64>,
    /// `tail[n]`: lower bound on the cost of steps `n..N` from a fresh half
    /// cycle.
    tail: Vec<f64>,
    /// Half-cycle depth where marginal aging meets the penalty price, for
    /// charge and discharge runs.
    knee: (f64, f64),
}

#[derive(Clone)]
struct Node {
    soc: f64,
    level: f64,
    stack: ResidueStack,
    closed_life: f64,
    settlement: f64,
}

impl Node {
    fn root(e0: f64) -> Self {
        let mut stack = ResidueStack::new();
        stack.push(0.0);
        Self {
            soc: e0,
            level: 0.0,
            stack,
            closed_life: 0.0,
            settlement: 0.0,
        }
    }
}

/// Node fields needed to undo one step.
#[derive(Default)]
struct Saved {
    soc: f64,
    level: f64,
    closed_life: f64,
    settlement: f64,
    points: Vec<f64>,
}

impl Saved {
    fn capture(&mut self, node: &Node) {
        self.soc = node.soc;
        self.level = node.level;
        self.closed_life = node.closed_life;
        self.settlement = node.settlement;
        self.points.clear();
        self.points.extend_from_slice(node.stack.points());
    }

    fn restore(&self, node: &mut Node) {
        node.soc = self.soc;
        node.level = self.level;
        node.closed_life = self.closed_life;
        node.settlement = self.settlement;
        node.stack.restore(&self.points);
    }
}

impl<'a, S: StressModel + ?Sized> Search<'a, S> {
    fn new(
        trace: &'a RegulationTrace,
        params: &'a BatteryParams,
        phi: &'a S,
        prices: &'a MarketPrices,
        cfg: &OracleConfig,
    ) -> Self {
        let n = trace.len();
        let r = &trace.setpoints;
        let mut charging = vec![true; n];
        let first = r.iter().find(|x| **x != 0.0).is_none_or(|x| *x > 0.0);
        let mut current = first;
        for (dir, &x) in charging.iter_mut().zip(r) {
            if x != 0.0 {
                current = x > 0.0;
            }
            *dir = current;
        }
        let mut run_end = vec![n; n];
        let mut run_rest = vec![0.0; n + 1];
        for m in (0..n).rev() {
            let same = m + 1 < n && charging[m + 1] == charging[m];
            run_end[m] = if same { run_end[m + 1] } else { m + 1 };
            let magnitude = r[m].abs().min(params.power);
            run_rest[m] = magnitude + if same { run_rest[m + 1] } else { 0.0 };
        }
        let mut search = Self {
            trace,
            params,
            phi,
            prices,
            levels: cfg.levels_per_step,
            budget: cfg.leaf_budget,
            life_price: params.capacity * params.replacement_price,
            up: params.interval * params.eta_c / params.capacity,
            down: params.interval / (params.eta_d * params.capacity),
            charging,
            run_end,
            run_rest,
            tail: Vec::new(),
            knee: (0.0, 0.0),
        };
        if search.life_price > 0.0 {
            let knee = |price: f64, rate: f64| {
                phi.derivative_inverse(2.0 * price * trace.interval / (search.life_price * rate))
            };
            search.knee = (knee(prices.pi, search.up), knee(prices.theta, search.down));
        }
        let mut tail = vec![0.0; n + 1];
        for m in (0..n).rev() {
            tail[m] = search.run_floor(search.charging[m], search.run_rest[m], 0.0)
                + tail[search.run_end[m]];
        }
        search.tail = tail;
        search
    }

    /// Lower bound on the cost of a run of same-direction instructions with
    /// total magnitude `magnitude` (MW summed over steps) whose response
    /// extends a half cycle that is already `depth` deep.
    ///
    /// Within a run the whole response `A` lands in one extrema difference,
    /// so the run costs at least `price T (magnitude - A)` in settlement plus
    /// `E R (Phi(depth + rate A) - Phi(depth)) / 2` in aging. That is convex
    /// in `A`; its minimum is bounded by the tangent at the clamped
    /// stationary point.
    fn run_floor(&self, charging: bool, magnitude: f64, depth: f64) -> f64 {
        if magnitude == 0.0 || self.life_price == 0.0 {
            return 0.0;
        }
        let (price, rate, knee) = if charging {
            (self.prices.pi, self.up, self.knee.0)
        } else {
            (self.prices.theta, self.down, self.knee.1)
        };
        let t = self.trace.interval;
        let stress = self.phi.value(depth);
        let cost = |a: f64| {
            price * t * (magnitude - a)
                + 0.5 * self.life_price * (self.phi.value(depth + rate * a) - stress)
        };
        let slope = |a: f64| {
            -price * t + 0.5 * self.life_price * rate * self.phi.derivative(depth + rate * a)
        };
        let a = ((knee - depth) / rate).clamp(0.0, magnitude);
        let g = slope(a);
        let best = cost(a) + (g * (0.0 - a)).min(g * (magnitude - a));
        (best * (1.0 - 1e-12) - 1e-12).max(0.0)
    }

    /// Lower bound on the cost of steps `next..N` given the current residue.
    ///
    /// Rainflow aging is never below half the stress of every extrema
    /// difference of the profile: closing a full cycle replaces two halves by
    /// a spread-out pair with the same sum. Each later run of instructions
    /// contributes at most one such difference, and the run in progress
    /// extends the open top half when it pushes the same way.
    fn future(&self, node: &Node, next: usize) -> f64 {
        if next >= self.trace.len() {
            return 0.0;
        }
        let dir = self.charging[next];
        let depth = match node.stack.points() {
            [.., a, b] if (*b > *a) == dir && b != a => (b - a).abs(),
            _ => 0.0,
        };
        self.run_floor(dir, self.run_rest[next], depth) + self.tail[self.run_end[next]]
    }

    /// Distinct feasible amounts for step `n`, ascending, written to `out`.
    fn choices(&self, node: &Node, n: usize, out: &mut Vec<f64>) {
        out.clear();
        let r = self.trace.setpoints[n];
        let magnitude = r.abs().min(self.params.power);
        if magnitude == 0.0 {
            out.push(0.0);
            return;
        }
        let limit = if r > 0.0 {
            self.params.max_charge(node.soc, self.params.e_max)
        } else {
            self.params.max_discharge(node.soc, self.params.e_min)
        };
        let top = (self.levels - 1) as f64;
        for k in 0..self.levels {
            let a = magnitude * k as f64 / top;
            if a >= limit {
                out.push(limit);
                break;
            }
            out.push(a);
        }
    }

    /// Applies `amount` at step `n` to `node`.
    fn apply(&self, node: &mut Node, n: usize, amount: f64) {
        let r = self.trace.setpoints[n];
        let (c, d) = if r >= 0.0 {
            (amount, 0.0)
        } else {
            (0.0, amount)
        };
        node.soc = self.params.next_soc(node.soc, c, d);
        node.level += self.up * c - self.down * d;
        let dev = c - d - r;
        node.settlement += self.trace.interval
            * (self.prices.theta * dev.max(0.0) + self.prices.pi * (-dev).max(0.0));
        let phi = self.phi;
        let mut closed = 0.0;
        node.stack.push_with(node.level, |u| closed += phi.value(u));
        node.closed_life += closed;
    }

    /// Cost if the path ended here.
    fn settled(&self, node: &Node) -> f64 {
        let residue: f64 = node
            .stack
            .points()
            .windows(2)
            .map(|w| self.phi.value((w[1] - w[0]).abs()))
            .sum();
        self.life_price * (node.closed_life + 0.5 * residue) + node.settlement
    }

    fn evaluate_path(&self, e0: f64, pick: impl Fn(usize) -> usize) -> f64 {
        let mut node = Node::root(e0);
        let mut options = Vec::with_capacity(self.levels);
        for n in 0..self.trace.len() {
            self.choices(&node, n, &mut options);
            let amount = options[pick(options.len()).min(options.len() - 1)];
            self.apply(&mut node, n, amount);
        }
        self.settled(&node)
    }
}

/// Depth-first branch and bound below one first-step choice.
struct Walker<'s, 'a, S: ?Sized> {
    search: &'s Search<'a, S>,
    bound: f64,
    best: Option<(f64, Vec<f64>)>,
    path: Vec<f64>,
    saved: Vec<Saved>,
    options: Vec<Vec<f64>>,
    leaves: &'s AtomicU64,
    exhausted: &'s AtomicBool,
}

impl<'s, 'a, S: StressModel + ?Sized> Walker<'s, 'a, S> {
    fn new(
        search: &'s Search<'a, S>,
        bound: f64,
        leaves: &'s AtomicU64,
        exhausted: &'s AtomicBool,
    ) -> Self {
        let n = search.trace.len();
        Self {
            search,
            bound,
            best: None,
            path: Vec::with_capacity(n),
            saved: (0..n).map(|_| Saved::default()).collect(),
            options: vec![Vec::with_capacity(search.levels); n],
            leaves,
            exhausted,
        }
    }

    fn cutoff(&self) -> f64 {
        let best = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
        let limit = best.min(self.bound);
        limit + 1e-12 * limit.abs().max(1.0)
    }

    /// Applies `amount` at step `n`, explores the subtree, then undoes it.
    fn descend(&mut self, node: &mut Node, n: usize, amount: f64) {
        if self.exhausted.load(Ordering::Relaxed) {
            return;
        }
        let last = n + 1 == self.search.trace.len();
        if last {
            let seen = self.leaves.fetch_add(1, Ordering::Relaxed) + 1;
            if seen > self.search.budget {
                self.exhausted.store(true, Ordering::Relaxed);
                return;
            }
        }
        let mut saved = std::mem::take(&mut self.saved[n]);
        saved.capture(node);

        self.search.apply(node, n, amount);
        self.path.push(amount);
        let settled = self.search.settled(node);
        if last {
            if self.best.as_ref().is_none_or(|b| settled < b.0) && settled <= self.cutoff() {
                self.best = Some((settled, self.path.clone()));
            }
        } else if settled + self.search.future(node, n + 1) <= self.cutoff() {
            let mut options = std::mem::take(&mut self.options[n + 1]);
            self.search.choices(node, n + 1, &mut options);
            for &next in &options {
                self.descend(node, n + 1, next);
            }
            self.options[n + 1] = options;
        }
        self.path.pop();

        saved.restore(node);
        self.saved[n] = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stress::PowerLaw;

    fn scenario(r_price: f64, prices: MarketPrices) -> Scenario {
        Scenario {
            battery: BatteryParams {
                e_min: 0.0,
                e_max: 1.0,
                capacity: 1.0,
                power: 1.0,
                eta_c: 1.0,
                eta_d: 1.0,
                replacement_price: r_price,
                interval: 1.0,
            },
            prices,
            stress: PowerLaw::LITHIUM_ION,
            e0: 0.5,
        }
    }

    /// Plain enumeration of every level sequence, no pruning, evaluated with
    /// the public cost function.
    fn enumerate(trace: &RegulationTrace, sc: &Scenario, k: usize) -> f64 {
        let n = trace.len();
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; n];
        loop {
            let mut dsp = Dispatch::with_capacity(n);
            let mut e = sc.e0;
            for (i, &r) in trace.setpoints.iter().enumerate() {
                let a = r.abs() * idx[i] as f64 / (k - 1) as f64;
                let (c, d) = if r >= 0.0 {
                    (a.min(sc.battery.max_charge(e, sc.battery.e_max)), 0.0)
                } else {
                    (0.0, a.min(sc.battery.max_discharge(e, sc.battery.e_min)))
                };
                e = sc.battery.next_soc(e, c, d);
                dsp.push(c, d);
            }
            let cost = total_cost(&dsp, trace, &sc.battery, &sc.stress, &sc.prices).unwrap();
            best = best.min(cost.j_total);
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                idx[i] += 1;
                if idx[i] < k {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn expensive_battery_stays_idle() {
        let sc = scenario(1e12, MarketPrices::balanced(50.0));
        let tr = RegulationTrace::new(1.0, vec![0.5, -0.5], 1.0).unwrap();
        let cfg = OracleConfig::default().with_levels(2);
        let sol = brute_force_offline(&tr, &sc, &cfg).unwrap();
        assert_eq!(sol.dispatch, Dispatch::zeros(2));
        assert!((sol.cost.j_reg - 50.0).abs() < 1e-12);
        assert_eq!(sol.cost.j_cyc, 0.0);
        assert!((enumerate(&tr, &sc, 2) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn free_battery_follows() {
        let sc = scenario(0.0, MarketPrices::new(30.0, 70.0).unwrap());
        let tr = RegulationTrace::new(1.0, vec![0.2, -0.4, 0.1, 0.3], 1.0).unwrap();
        let sol = brute_force_offline(&tr, &sc, &OracleConfig::default()).unwrap();
        assert_eq!(sol.cost.j_total, 0.0);
        let followed: Vec<f64> = sol.dispatch.net().collect();
        assert_eq!(followed, tr.setpoints);
    }

    #[test]
    fn pruned_search_matches_plain_enumeration() {
        let prices = [
            MarketPrices::balanced(50.0),
            MarketPrices::new(80.0, 20.0).unwrap(),
            MarketPrices::new(10.0, 120.0).unwrap(),
        ];
        let traces = [
            vec![0.3, -0.25, 0.4, 0.1, -0.6],
            vec![-0.9, 0.2, 0.45, -0.3, 0.05],
            vec![0.7, 0.7, -0.8, 0.1, -0.2],
        ];
        for (m, r) in prices.iter().zip(&traces) {
            let mut sc = scenario(300_000.0, *m);
            sc.battery.interval = 0.5;
            sc.battery = sc.battery.with_round_trip(0.85);
            let tr = RegulationTrace::new(0.5, r.clone(), 1.0).unwrap();
            let sol =
                brute_force_offline(&tr, &sc, &OracleConfig::default().with_levels(5)).unwrap();
            let plain = enumerate(&tr, &sc, 5);
            assert!(
                (sol.cost.j_total - plain).abs() < 1e-9,
                "{} vs {plain}",
                sol.cost.j_total
            );
        }
    }

    #[test]
    fn finer_grid_never_worse() {
        let mut sc = scenario(300_000.0, MarketPrices::new(60.0, 40.0).unwrap());
        sc.battery.interval = 0.25;
        let tr = RegulationTrace::new(0.25, vec![0.8, -0.3, -0.9, 0.6, 0.2, -0.4], 1.0).unwrap();
        let cfg = OracleConfig::default().with_levels(3);
        let coarse = brute_force_offline(&tr, &sc, &cfg).unwrap();
        let fine = brute_force_offline(&tr, &sc, &cfg.refined()).unwrap();
        assert!(fine.cost.j_total <= coarse.cost.j_total + 1e-12);
        let slack = estimate_slack(&tr, &sc, &cfg).unwrap();
        assert!((slack - (coarse.cost.j_total - fine.cost.j_total).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn budget_and_length_limits() {
        let sc = scenario(300_000.0, MarketPrices::balanced(50.0));
        let tr = RegulationTrace::new(1.0, vec![0.1; 6], 1.0).unwrap();
        let cfg = OracleConfig {
            leaf_budget: 3,
            ..OracleConfig::default()
        };
        assert!(matches!(
            brute_force_offline(&tr, &sc, &cfg),
            Err(Error::BudgetExceeded { .. })
        ));
        let cfg = OracleConfig {
            max_steps: 4,
            ..OracleConfig::default()
        };
        assert!(matches!(
            brute_force_offline(&tr, &sc, &cfg),
            Err(Error::TooManySteps { .. })
        ));
        assert!(brute_force_offline(&tr, &sc, &OracleConfig::default().with_levels(1)).is_err());
    }

    #[test]
    fn tie_break_prefers_smallest_levels() {
        // Zero prices and a free battery: every sequence costs nothing.
        let sc = scenario(0.0, MarketPrices::balanced(0.0));
        let tr = RegulationTrace::new(1.0, vec![0.2, -0.1], 1.0).unwrap();
        let sol = brute_force_offline(&tr, &sc, &OracleConfig::default()).unwrap();
        assert_eq!(sol.dispatch, Dispatch::zeros(2));
    }

    #[test]
    fn gap_is_clamped_at_zero() {
        let sc = scenario(300_000.0, MarketPrices::balanced(50.0));
        let tr = RegulationTrace::new(1.0, vec![0.2, -0.1, 0.3], 1.0).unwrap();
        let g = measure_gap(&tr, &sc, &OracleConfig::default()).unwrap();
        assert!(g.gap >= 0.0);
        assert_eq!(g.gap, g.raw_gap.max(0.0));
    }
}
