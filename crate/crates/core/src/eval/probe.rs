//! Moment probes for a single isolated triangle.
//!
//! A probe stream holds one triangle `{0, 1, 2}` whose closing edge arrives
//! in a chosen bucket, padded with a disjoint matching so that no other
//! triangle exists. Running many seeded trials and reading the estimate of
//! node 0 gives the empirical mean and variance of the per-triangle
//! estimator, which can be compared against closed forms.
//!
//! Notation: `T_λ` is the closing time, `b` its bucket, `B` the query bucket
//! (queries happen at the end of bucket `B`), `u(t)` the number of distinct
//! edges among the first `t` events and `ψ = 1 − δ^(B−b+1)`.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::counts::format_estimate;
use crate::error::{Error, Result};
use crate::estimator::{run, Counting, EstimatorConfig, Variant};
use crate::eval::trial_config;
use crate::oracle::exact_local_binary;
use crate::stream::{Edge, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeStream {
    pub edges: Vec<Edge>,
    pub triangle: [NodeId; 3],
}

fn edge(u: u32, v: u32) -> Edge {
    Edge::new(u, v).expect("probe edges are never self-loops")
}

/// Overflow time `T_M` implied by `u(t)` reaching `M + 1` at event `t`.
fn overflow_from_distinct(variant: Variant, first_excess: u64) -> u64 {
    match variant.counting() {
        // Sampling happens before counting, so the last exact event is t−1.
        Counting::Binary => first_excess - 1,
        Counting::Simple | Counting::Weighted => first_excess,
    }
}

/// Builds a probe stream whose triangle closes in bucket `formation_bucket`
/// (near the middle of it) and which ends exactly at the end of bucket
/// `query_bucket`. Multigraph variants get a filler with repeated edges.
pub fn build_probe_stream(
    config: &EstimatorConfig,
    formation_bucket: u64,
    query_bucket: u64,
) -> Result<ProbeStream> {
    config.validate()?;
    if config.variant == Variant::Mascot {
        return Err(Error::ProbeUnsupported(
            "the Bernoulli baseline has no bucket structure".into(),
        ));
    }
    if query_bucket < formation_bucket {
        return Err(Error::Config(
            "query bucket precedes the formation bucket".into(),
        ));
    }
    let m = config.memory as u64;
    let j = config.bucket_size() as u64;
    let multigraph = config.variant.counting() != Counting::Simple;
    let closing = edge(1, 2);

    let mut edges = vec![edge(0, 1), edge(0, 2)];
    let mut distinct = 2u64;
    let mut fillers: Vec<Edge> = Vec::new();
    let mut next_filler = 0u32;
    let mut t_m: Option<u64> = None;
    let mut closed = false;

    if formation_bucket == 0 {
        edges.push(closing);
        distinct += 1;
        closed = true;
    }
    loop {
        let t = edges.len() as u64;
        if let Some(t_m) = t_m {
            let target = t_m + (formation_bucket.max(1) - 1) * j + j.div_ceil(2).max(1);
            if !closed && t + 1 >= target {
                if t + 1 > target || t < t_m {
                    return Err(Error::Config(
                        "bucket too small to place the closing edge".into(),
                    ));
                }
                edges.push(closing);
                distinct += 1;
                closed = true;
                continue;
            }
            if closed && t >= t_m + query_bucket * j {
                if t > t_m + query_bucket * j {
                    return Err(Error::Config("probe stream overshot the query time".into()));
                }
                break;
            }
        }
        // Every third filler event repeats an earlier filler edge.
        let repeat =
            multigraph && fillers.len() >= 2 && next_filler % 3 == 2 && edges.len() % 2 == 0;
        let e = if repeat {
            fillers[fillers.len() - 2]
        } else {
            let k = 3 + 2 * next_filler;
            next_filler += 1;
            let e = edge(k, k + 1);
            fillers.push(e);
            distinct += 1;
            e
        };
        edges.push(e);
        if t_m.is_none() {
            let t = edges.len() as u64;
            t_m = match config.variant.counting() {
                Counting::Simple if t == m + 1 => Some(t),
                Counting::Binary | Counting::Weighted if !repeat && distinct == m + 1 => {
                    Some(overflow_from_distinct(config.variant, t))
                }
                _ => None,
            };
        }
    }
    Ok(ProbeStream {
        edges,
        triangle: [NodeId(0), NodeId(1), NodeId(2)],
    })
}

/// Timing of the probed triangle inside a stream, derived from the stream
/// alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeGeometry {
    pub closing_time: u64,
    pub overflow_time: Option<u64>,
    pub formation_bucket: u64,
    pub query_bucket: u64,
    pub query_time: u64,
    /// `u(T_λ)`.
    pub distinct_at_close: u64,
    /// `u(T_λ − 1)`.
    pub distinct_before_close: u64,
}

pub fn geometry(config: &EstimatorConfig, probe: &ProbeStream) -> Result<ProbeGeometry> {
    config.validate()?;
    if config.variant == Variant::Mascot {
        return Err(Error::ProbeUnsupported(
            "the Bernoulli baseline has no bucket structure".into(),
        ));
    }
    let [x, y, z] = probe.triangle;
    let sides = [Edge::new(x, y)?, Edge::new(x, z)?, Edge::new(y, z)?];
    for side in sides {
        let n = probe.edges.iter().filter(|&&e| e == side).count();
        if n != 1 {
            return Err(Error::ProbeInvalid(format!(
                "triangle edge {side} occurs {n} times"
            )));
        }
    }
    let truth = exact_local_binary(&probe.edges);
    for u in probe.triangle {
        if truth.get(u) != 1.0 {
            return Err(Error::ProbeInvalid(format!(
                "node {u} lies in other triangles"
            )));
        }
    }
    if config.variant.counting() == Counting::Simple
        && crate::stream::distinct_edge_count(&probe.edges) != probe.edges.len()
    {
        return Err(Error::ProbeInvalid(
            "simple-stream probe contains repeated edges".into(),
        ));
    }

    let m = config.memory as u64;
    let mut seen = HashSet::new();
    let mut distinct_after = Vec::with_capacity(probe.edges.len() + 1);
    distinct_after.push(0u64);
    let mut overflow_time = None;
    let mut closing_time = 0;
    for (i, &e) in probe.edges.iter().enumerate() {
        let t = i as u64 + 1;
        seen.insert(e);
        distinct_after.push(seen.len() as u64);
        if sides.contains(&e) && sides.iter().all(|s| seen.contains(s)) && closing_time == 0 {
            closing_time = t;
        }
        if overflow_time.is_none() {
            overflow_time = match config.variant.counting() {
                Counting::Simple if t == m + 1 => Some(t),
                Counting::Binary | Counting::Weighted if seen.len() as u64 == m + 1 => {
                    Some(overflow_from_distinct(config.variant, t))
                }
                _ => None,
            };
        }
    }
    let j = config.bucket_size() as u64;
    let bucket = |t: u64| match overflow_time {
        Some(t_m) if t > t_m => (t - t_m).div_ceil(j),
        _ => 0,
    };
    let query_time = probe.edges.len() as u64;
    Ok(ProbeGeometry {
        closing_time,
        overflow_time,
        formation_bucket: bucket(closing_time),
        query_bucket: bucket(query_time),
        query_time,
        distinct_at_close: distinct_after[closing_time as usize],
        distinct_before_close: distinct_after[closing_time as usize - 1],
    })
}

/// `ψ = 1 − δ^span` with `span = B − b + 1`.
pub fn psi(delta: f64, span: u64) -> f64 {
    1.0 - delta.powi(span as i32)
}

/// Second-moment factor of the simple estimator: `q_T = (T−1)(T−2)/(M(M−1))`.
pub fn simple_factor(closing_time: u64, memory: usize) -> f64 {
    let (t, m) = (closing_time as f64, memory as f64);
    ((t - 1.0) / m) * ((t - 2.0) / (m - 1.0))
}

/// Second-moment factor of the binary estimator with `u = u(T_λ)`:
/// `(M−3)(u−3)(u−4)(u−5) / (M(M−4)(M−5)(M−6))`. Needs `M ≥ 7`.
pub fn binary_factor(distinct_at_close: u64, memory: usize) -> f64 {
    let (u, m) = (distinct_at_close as f64, memory as f64);
    ((m - 3.0) / m) * ((u - 3.0) / (m - 4.0)) * ((u - 4.0) / (m - 5.0)) * ((u - 5.0) / (m - 6.0))
}

/// Second-moment factor of the weighted estimator with `u' = u(T_λ − 1)`:
/// `(M−2)(u'−2)(u'−3) / (M(M−3)(M−4))`. Needs `M ≥ 5`.
pub fn weighted_factor(distinct_before_close: u64, memory: usize) -> f64 {
    let (u, m) = (distinct_before_close as f64, memory as f64);
    ((m - 2.0) / m) * ((u - 2.0) / (m - 3.0)) * ((u - 3.0) / (m - 4.0))
}

fn second_moment_factor(config: &EstimatorConfig, g: &ProbeGeometry) -> Result<f64> {
    let m = config.memory;
    match config.variant.counting() {
        Counting::Simple => Ok(simple_factor(g.closing_time, m)),
        Counting::Binary if m >= 7 => Ok(binary_factor(g.distinct_at_close, m)),
        Counting::Weighted if m >= 5 => Ok(weighted_factor(g.distinct_before_close, m)),
        _ => Err(Error::ProbeUnsupported(format!(
            "no variance formula for {} with M = {m}",
            config.variant
        ))),
    }
}

fn scale(config: &EstimatorConfig, g: &ProbeGeometry) -> f64 {
    if config.variant.is_smoothed() {
        psi(config.delta, g.query_bucket - g.formation_bucket + 1)
    } else {
        1.0
    }
}

/// Expected estimate of a triangle node at the query time.
pub fn predicted_expectation(config: &EstimatorConfig, g: &ProbeGeometry) -> f64 {
    if g.formation_bucket == 0 {
        1.0
    } else {
        scale(config, g)
    }
}

/// Variance of the estimate of a triangle node at the query time.
pub fn predicted_variance(config: &EstimatorConfig, g: &ProbeGeometry) -> Result<f64> {
    if g.formation_bucket == 0 {
        return Ok(0.0);
    }
    let s = scale(config, g);
    Ok(s * s * (second_moment_factor(config, g)? - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Expectation,
    Variance,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Expectation => "expectation",
            Quantity::Variance => "variance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub quantity: Quantity,
    pub empirical: f64,
    pub predicted: f64,
    pub stderr: f64,
    pub tolerance: f64,
}

impl ProbeOutcome {
    pub const CSV_HEADER: &'static str = "quantity,empirical,predicted,stderr,pass";

    /// `|empirical − predicted| ≤ tolerance · stderr`.
    pub fn pass(&self) -> bool {
        (self.empirical - self.predicted).abs() <= self.tolerance * self.stderr
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.quantity,
            format_estimate(self.empirical),
            format_estimate(self.predicted),
            format_estimate(self.stderr),
            self.pass()
        )
    }
}

/// Estimates of the first triangle node over `n_trials` seeded runs, in
/// trial order.
pub fn sample_triangle_estimates(
    config: &EstimatorConfig,
    probe: &ProbeStream,
    n_trials: usize,
) -> Result<Vec<f64>> {
    let node = probe.triangle[0];
    (0..n_trials as u64)
        .into_par_iter()
        .map(|i| Ok(run(trial_config(config, i), &probe.edges)?.estimate(node)))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials < 2 {
        return Err(Error::Config("a probe needs at least two trials".into()));
    }
    Ok(())
}

pub fn probe_expectation(
    config: &EstimatorConfig,
    probe: &ProbeStream,
    n_trials: usize,
    tolerance: f64,
) -> Result<ProbeOutcome> {
    check_trials(n_trials)?;
    let g = geometry(config, probe)?;
    let xs = sample_triangle_estimates(config, probe, n_trials)?;
    let n = xs.len() as f64;
    let mu = mean(&xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ProbeOutcome {
        quantity: Quantity::Expectation,
        empirical: mu,
        predicted: predicted_expectation(config, &g),
        stderr: (var / n).sqrt(),
        tolerance,
    })
}

/// Sample variance against the closed form. The standard error uses the
/// fourth central moment: `sqrt((m4 − s⁴)/n)`.
pub fn probe_variance(
    config: &EstimatorConfig,
    probe: &ProbeStream,
    n_trials: usize,
    tolerance: f64,
) -> Result<ProbeOutcome> {
    check_trials(n_trials)?;
    let g = geometry(config, probe)?;
    let predicted = predicted_variance(config, &g)?;
    let xs = sample_triangle_estimates(config, probe, n_trials)?;
    let n = xs.len() as f64;
    let mu = mean(&xs);
    let s2 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / n;
    Ok(ProbeOutcome {
        quantity: Quantity::Variance,
        empirical: s2,
        predicted,
        stderr: ((m4 - s2 * s2).max(0.0) / n).sqrt(),
        tolerance,
    })
}

/// Smallest integer `T` with `(T−1)(T−2)/(M(M−1)) > (2−δ)/(1−δ)`.
pub fn concentration_threshold(memory: usize, delta: f64) -> Result<u64> {
    if memory < 2 {
        return Err(Error::Config("threshold needs M ≥ 2".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Config(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    let bound = (2.0 - delta) / (1.0 - delta);
    let holds = |t: u64| simple_factor(t, memory) > bound;
    let (mut lo, mut hi) = (2u64, 4u64);
    while !holds(hi) {
        lo = hi;
        hi *= 2;
    }
    // invariant: !holds(lo), holds(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One point of the interval-inclusion grid: whether
/// `[E_Y − Var_Y, E_Y + Var_Y]` lies strictly inside
/// `[1 − Var_X, 1 + Var_X]` for the per-triangle estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalCase {
    pub counting: Counting,
    pub memory: usize,
    pub delta: f64,
    pub span: u64,
    /// `T_λ`, `u(T_λ)` or `u(T_λ − 1)` depending on `counting`.
    pub statistic: u64,
    pub inside: bool,
}

/// First value of the timing statistic at which inclusion is claimed:
/// `√2·M + 1` (simple), `∛2·M + 3` (binary), `√2·M + 2` (weighted).
pub fn inclusion_start(counting: Counting, memory: usize) -> u64 {
    let m = memory as f64;
    let x = match counting {
        Counting::Simple => std::f64::consts::SQRT_2 * m + 1.0,
        Counting::Binary => 2f64.cbrt() * m + 3.0,
        Counting::Weighted => std::f64::consts::SQRT_2 * m + 2.0,
    };
    x.ceil() as u64
}

pub fn interval_case(
    counting: Counting,
    memory: usize,
    delta: f64,
    span: u64,
    statistic: u64,
) -> IntervalCase {
    let f = match counting {
        Counting::Simple => simple_factor(statistic, memory),
        Counting::Binary => binary_factor(statistic, memory),
        Counting::Weighted => weighted_factor(statistic, memory),
    };
    let var_x = f - 1.0;
    let p = psi(delta, span);
    let (e_y, var_y) = (p, p * p * var_x);
    IntervalCase {
        counting,
        memory,
        delta,
        span,
        statistic,
        inside: e_y - var_y > 1.0 - var_x && e_y + var_y < 1.0 + var_x,
    }
}

/// Sweeps the statistic from its inclusion start up to `horizon · M` for
/// every memory, delta and span `1..=max_span`.
pub fn interval_grid(
    memories: &[usize],
    deltas: &[f64],
    max_span: u64,
    horizon: u64,
) -> Vec<IntervalCase> {
    let mut out = Vec::new();
    for counting in [Counting::Simple, Counting::Binary, Counting::Weighted] {
        for &m in memories {
            let start = inclusion_start(counting, m);
            let end = horizon * m as u64;
            for &delta in deltas {
                for span in 1..=max_span {
                    for s in start..=end {
                        out.push(interval_case(counting, m, delta, span, s));
                    }
                }
            }
        }
    }
    out
}
