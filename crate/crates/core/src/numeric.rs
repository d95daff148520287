//! Summation helpers for long traces.

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation. Error grows as O(log n) rather than O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Running sums with Neumaier compensation. The output has `xs.len() + 1`
/// entries and starts at `start`.
pub fn compensated_cumsum(start: f64, xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let iter = xs.into_iter();
    let mut out = Vec::with_capacity(iter.size_hint().0 + 1);
    out.push(start);
    let mut sum = start;
    let mut comp = 0.0;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// Shrinks `estimate` toward zero until `admit` accepts it.
///
/// Used to turn a closed-form clip amount into one that satisfies a bound
/// exactly under floating-point evaluation. `scale` is the magnitude of the
/// quantity being bounded divided by the rate, so that the first step is
/// roughly one ulp of the bound.
pub(crate) fn shrink_until(estimate: f64, scale: f64, mut admit: impl FnMut(f64) -> bool) -> f64 {
    if !(estimate > 0.0) {
        return 0.0;
    }
    let mut amount = estimate;
    let mut step = (scale.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
    while !admit(amount) {
        amount -= step;
        step *= 2.0;
        if amount <= 0.0 {
            return 0.0;
        }
    }
    amount
}
