//! Globally adaptive bisection on top of the G7-K15 pair.
//!
//! Panels are refined in order of decreasing error estimate; ties are broken
//! by creation order and the final sum is taken over panels sorted by their
//! left endpoint, so a given integrand and tolerance always produce the same
//! bits.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::rules::gk15;

/// Absolute/relative stopping rule: stop once `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Value, error estimate and work counters of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

impl Integral {
    pub fn zero() -> Self {
        Integral { value: 0.0, error: 0.0, panels: 0, converged: true }
    }

    /// Adds two independent integrals; errors add linearly.
    pub fn combine(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            panels: self.panels + other.panels,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, factor: f64) -> Integral {
        Integral {
            value: self.value * factor,
            error: self.error * factor.abs(),
            ..self
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    seq: usize,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Integrates `f` over `[points[0], points[last]]`, using every entry of
/// `points` as an initial panel boundary. Non-finite integrand values are
/// treated as zero contributions only when they occur at isolated nodes of
/// vanishing panels; otherwise they poison the estimate and the result is
/// reported as not converged.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
    max_panels: usize,
) -> Integral {
    let mut pts: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    pts.dedup();
    if pts.len() < 2 {
        return Integral::zero();
    }
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let est = gk15(&mut f, w[0], w[1]);
        total += est.value;
        total_err += est.error;
        heap.push(Panel { a: w[0], b: w[1], value: est.value, error: est.error, seq });
        seq += 1;
    }
    let max_panels = max_panels.max(heap.len());
    while total_err > tol.target(total) && heap.len() < max_panels {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: left.value, error: left.error, seq });
        heap.push(Panel { a: mid, b: worst.b, value: right.value, error: right.error, seq: seq + 1 });
        seq += 2;
        if !total.is_finite() {
            break;
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    let converged = value.is_finite() && error <= tol.target(value);
    Integral { value, error, panels: panels.len(), converged }
}

/// Integrates `f` over `[start, inf)` for integrands decaying like
/// `r^(-decay - 1)` with `decay > 0`. The substitution
/// `r = start * u^(-1/decay)` maps the tail onto `(0, 1]` with an integrand
/// that tends to a finite limit at `u = 0`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    decay: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Integral {
    assert!(start > 0.0 && decay > 0.0, "tail map needs start > 0 and decay > 0");
    let g = |u: f64| {
        let r = start * u.powf(-1.0 / decay);
        if !r.is_finite() {
            return 0.0;
        }
        let v = f(r) * r / (decay * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, &[0.0, 1.0], tol, max_panels)
}

/// Integrates `f` over `[0, end]` for integrands behaving like
/// `r^(exponent - 1)` at the origin with `exponent > 0`, via
/// `r = end * u^(1/exponent)`.
pub fn integrate_origin_power<F: FnMut(f64) -> f64>(
    mut f: F,
    end: f64,
    exponent: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Integral {
    assert!(end > 0.0 && exponent > 0.0, "origin map needs end > 0 and exponent > 0");
    let g = |u: f64| {
        let r = end * u.powf(1.0 / exponent);
        if r <= 0.0 {
            return 0.0;
        }
        let v = f(r) * r / (exponent * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, &[0.0, 1.0], tol, max_panels)
}
