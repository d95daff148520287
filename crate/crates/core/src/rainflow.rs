//! Rainflow cycle counting on normalized state-of-charge profiles.
//!
//! Full cycles are identified with the three-difference rule: for four
//! consecutive extrema with differences `d1, d2, d3`, the inner pair forms a
//! full cycle of depth `d2` whenever `d2 <= d1` and `d2 <= d3`. Whatever is
//! left afterwards (the residue) is split into half cycles between adjacent
//! extrema; rising halves are charge halves, falling halves discharge halves.
//!
//! Two independent implementations are provided: [`rainflow_count`] works on
//! a complete extrema sequence, [`ResidueStack`] consumes samples one at a
//! time and emits full cycles as soon as they close.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryParams, Dispatch};
use crate::error::{Error, Result};
use crate::numeric::compensated_cumsum;

/// Plateau tolerance in normalized units.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Cycle depths produced by rainflow counting, all in `(0, 1]` for a profile
/// normalized by capacity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleSet {
    #[serde(rename = "u")]
    pub full: Vec<f64>,
    #[serde(rename = "v")]
    pub charge_half: Vec<f64>,
    #[serde(rename = "w")]
    pub discharge_half: Vec<f64>,
}

impl CycleSet {
    pub fn is_empty(&self) -> bool {
        self.full.is_empty() && self.charge_half.is_empty() && self.discharge_half.is_empty()
    }

    /// `(sum u + sum v, sum u + sum w)`: total normalized rise and fall.
    pub fn throughput(&self) -> (f64, f64) {
        let u: f64 = self.full.iter().sum();
        let v: f64 = self.charge_half.iter().sum();
        let w: f64 = self.discharge_half.iter().sum();
        (u + v, u + w)
    }

    /// Copy with every depth list sorted ascending; used to compare counts as
    /// multisets.
    pub fn sorted(&self) -> Self {
        let sort = |xs: &[f64]| {
            let mut xs = xs.to_vec();
            xs.sort_by(f64::total_cmp);
            xs
        };
        Self {
            full: sort(&self.full),
            charge_half: sort(&self.charge_half),
            discharge_half: sort(&self.discharge_half),
        }
    }

    pub fn max_full_depth(&self) -> Option<f64> {
        self.full.iter().copied().reduce(f64::max)
    }
}

/// A strictly alternating sequence of local extrema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtremaSequence(Vec<f64>);

impl ExtremaSequence {
    /// Wraps `points`, rejecting sequences that are not strictly alternating.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        for (i, w) in points.windows(3).enumerate() {
            let a = w[1] - w[0];
            let b = w[2] - w[1];
            if !(a * b < 0.0) {
                return Err(Error::param(format!(
                    "extrema not alternating at position {}",
                    i + 1
                )));
            }
        }
        if points.len() == 2 && points[0] == points[1] {
            return Err(Error::param("repeated point in extrema sequence"));
        }
        Ok(Self(points))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ExtremaSequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Drops every sample that is not a turning point.
///
/// Moves of at most `tol` relative to the last kept point are treated as a
/// plateau (the first sample of a plateau is kept). The first sample is always
/// kept and the last one always determines the final point.
pub fn extract_extrema(profile: &[f64], tol: f64) -> ExtremaSequence {
    let mut out: Vec<f64> = Vec::new();
    for &x in profile {
        push_turning_point(&mut out, x, tol);
    }
    ExtremaSequence(out)
}

/// Appends `x` to a turning-point list: ignored within tolerance, extends the
/// last point when moving in the same direction, otherwise appended.
/// Returns `true` if the list changed.
#[inline]
fn push_turning_point(points: &mut Vec<f64>, x: f64, tol: f64) -> bool {
    let n = points.len();
    let Some(&top) = points.last() else {
        points.push(x);
        return true;
    };
    if (x - top).abs() <= tol {
        return false;
    }
    if n >= 2 && (x - top) * (top - points[n - 2]) > 0.0 {
        points[n - 1] = x;
    } else {
        points.push(x);
    }
    true
}

/// Batch rainflow count of an alternating extrema sequence.
///
/// Scans windows of four points from the start; after every extraction the
/// scan resumes two positions earlier, which is where the first window that
/// contains the new difference begins. Earlier windows are unchanged, so this
/// is the same as rescanning from the beginning.
pub fn rainflow_count(extrema: &ExtremaSequence) -> CycleSet {
    let pts = &extrema.0;
    let len = pts.len();
    // Doubly linked list over indices so that removals are O(1).
    let mut next: Vec<usize> = (1..=len).collect();
    let mut prev: Vec<usize> = (0..len).map(|i| i.wrapping_sub(1)).collect();
    let end = len;
    let mut full = Vec::new();

    let mut head = 0;
    while len >= 4 && head != end {
        let a = head;
        let b = next[a];
        if b == end {
            break;
        }
        let c = next[b];
        if c == end {
            break;
        }
        let d = next[c];
        if d == end {
            break;
        }
        let d1 = (pts[a] - pts[b]).abs();
        let d2 = (pts[b] - pts[c]).abs();
        let d3 = (pts[c] - pts[d]).abs();
        if d2 <= d1 && d2 <= d3 {
            if d2 > 0.0 {
                full.push(d2);
            }
            next[a] = d;
            prev[d] = a;
            // back up two positions (or to the front)
            let mut back = a;
            for _ in 0..2 {
                if prev[back] != usize::MAX {
                    back = prev[back];
                }
            }
            head = back;
        } else {
            head = b;
        }
    }

    let mut residue = Vec::new();
    if len > 0 {
        let mut i = 0;
        while i != end {
            residue.push(pts[i]);
            i = next[i];
        }
    }
    let (charge_half, discharge_half) = split_residue(&residue);
    CycleSet {
        full,
        charge_half,
        discharge_half,
    }
}

/// Decomposes a residue into charge (rising) and discharge (falling) halves.
fn split_residue(points: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::new();
    let mut w = Vec::new();
    for pair in points.windows(2) {
        let delta = pair[1] - pair[0];
        if delta > 0.0 {
            v.push(delta);
        } else if delta < 0.0 {
            w.push(-delta);
        }
    }
    (v, w)
}

/// Normalized cumulative profile `(T eta_c / E) c - (T / (eta_d E)) d`,
/// anchored at `start`. Has `dispatch.len() + 1` samples.
pub fn dispatch_profile(dispatch: &Dispatch, params: &BatteryParams, start: f64) -> Vec<f64> {
    let up = params.interval * params.eta_c / params.capacity;
    let down = params.interval / (params.eta_d * params.capacity);
    compensated_cumsum(
        start,
        dispatch
            .charge
            .iter()
            .zip(&dispatch.discharge)
            .map(|(c, d)| up * c - down * d),
    )
}

/// Counts the cycles of a dispatch from its normalized profile starting at 0.
pub fn count_dispatch(dispatch: &Dispatch, params: &BatteryParams) -> CycleSet {
    count_dispatch_from(dispatch, params, 0.0)
}

/// Same as [`count_dispatch`] with an arbitrary profile anchor. Depths are
/// differences, so the anchor only matters through rounding.
pub fn count_dispatch_from(dispatch: &Dispatch, params: &BatteryParams, start: f64) -> CycleSet {
    let profile = dispatch_profile(dispatch, params, start);
    rainflow_count(&extract_extrema(&profile, DEFAULT_TOLERANCE))
}

/// Online rainflow state: the residue of everything pushed so far.
///
/// The top of the stack is the most recent sample and may still move; every
/// point below it is a confirmed turning point. A full cycle is emitted as
/// soon as the last four points satisfy the three-difference rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueStack {
    points: Vec<f64>,
    tol: f64,
}

impl Default for ResidueStack {
    fn default() -> Self {
        Self::new()
    }
}

impl ResidueStack {
    pub fn new() -> Self {
        Self::with_tolerance(DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            points: Vec::new(),
            tol,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    /// Resets the stack to a previously saved [`points`](Self::points) value.
    pub(crate) fn restore(&mut self, points: &[f64]) {
        self.points.clear();
        self.points.extend_from_slice(points);
    }

    /// Pushes the next sample and reports each closed full cycle to `emit`.
    #[inline]
    pub fn push_with(&mut self, x: f64, mut emit: impl FnMut(f64)) {
        if !push_turning_point(&mut self.points, x, self.tol) {
            return;
        }
        while self.points.len() >= 4 {
            let n = self.points.len();
            let p = &self.points[n - 4..];
            let d1 = (p[0] - p[1]).abs();
            let d2 = (p[1] - p[2]).abs();
            let d3 = (p[2] - p[3]).abs();
            if d2 <= d1 && d2 <= d3 {
                if d2 > 0.0 {
                    emit(d2);
                }
                let top = self.points[n - 1];
                self.points.truncate(n - 3);
                self.points.push(top);
            } else {
                break;
            }
        }
    }

    /// Pushes the next sample and returns the full cycles it closed.
    pub fn push(&mut self, x: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.push_with(x, |d| out.push(d));
        out
    }

    /// Half cycles of the current residue.
    pub fn finalize(&self) -> CycleSet {
        let (charge_half, discharge_half) = split_residue(&self.points);
        CycleSet {
            full: Vec::new(),
            charge_half,
            discharge_half,
        }
    }
}

/// Streams a whole profile through a [`ResidueStack`].
pub fn stream_count(profile: impl IntoIterator<Item = f64>, tol: f64) -> CycleSet {
    let mut stack = ResidueStack::with_tolerance(tol);
    let mut full = Vec::new();
    for x in profile {
        stack.push_with(x, |d| full.push(d));
    }
    let mut out = stack.finalize();
    out.full = full;
    out
}

/// Shape of a rainflow residue: adjacent differences rise strictly to a
/// single peak and then fall strictly.
pub fn residue_is_unimodal(points: &[f64]) -> bool {
    let diffs: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let Some(peak) = diffs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    let rising = diffs[..=peak].windows(2).all(|w| w[0] < w[1]);
    let falling = diffs[peak..].windows(2).all(|w| w[0] > w[1]);
    rising && falling
}
