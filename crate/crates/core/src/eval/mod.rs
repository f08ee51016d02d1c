//! Accuracy metrics, multi-seed trial running and report output.

pub mod probe;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::counts::{format_estimate, LocalCounts};
use crate::error::{Error, Result};
use crate::estimator::{run, Counting, EstimatorConfig, Variant};
use crate::oracle::{exact_local_binary, exact_local_simple, exact_local_weighted};
use crate::stream::{Edge, NodeId, StreamStats};

/// Mean relative error with +1 smoothing over the node set `nodes`:
/// `(1/|V|) Σ |τ_u − Δ_u| / (Δ_u + 1)`. Nodes missing from `estimate`
/// contribute `τ_u = 0`.
pub fn mre(estimate: &LocalCounts, truth: &LocalCounts, nodes: &[NodeId]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Metric("MRE over an empty node set"));
    }
    let total: f64 = nodes
        .iter()
        .map(|&u| {
            let d = truth.get(u);
            (estimate.get(u) - d).abs() / (d + 1.0)
        })
        .sum();
    Ok(total / nodes.len() as f64)
}

/// Memory proportion: `M/m` for simple-stream variants, `M/u` for
/// multigraph variants, `p` for the Bernoulli baseline.
pub fn xi(config: &EstimatorConfig, stats: &StreamStats) -> Result<f64> {
    let denom = match config.variant.counting() {
        _ if config.variant == Variant::Mascot => return Ok(config.probability),
        Counting::Simple => stats.edges,
        Counting::Binary | Counting::Weighted => stats.distinct,
    };
    if denom == 0 {
        return Err(Error::Metric("memory proportion of an empty stream"));
    }
    Ok(config.memory as f64 / denom as f64)
}

/// Buffer size `⌈ξ·m⌉` (simple) or `⌈ξ·u⌉` (multigraph) for a proportion.
pub fn memory_for_xi(variant: Variant, xi: f64, stats: &StreamStats) -> usize {
    let base = match variant.counting() {
        Counting::Simple => stats.edges,
        Counting::Binary | Counting::Weighted => stats.distinct,
    };
    // Guard against ξ·m landing a hair above an integer.
    let raw = xi * base as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Ground truth matching the variant's counting semantics.
pub fn truth_for(variant: Variant, stream: &[Edge]) -> LocalCounts {
    match variant.counting() {
        Counting::Simple => exact_local_simple(stream),
        Counting::Binary => exact_local_binary(stream),
        Counting::Weighted => exact_local_weighted(stream),
    }
}

/// One estimator run in an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub variant: Variant,
    pub xi: f64,
    pub delta: f64,
    pub bucket: usize,
    /// `None` marks an aggregate (mean) row.
    pub seed: Option<u64>,
    pub mre: f64,
    pub wall_ms: f64,
    pub n_nodes: usize,
    pub n_edges: usize,
}

impl TrialReport {
    pub const CSV_HEADER: &'static str = "variant,xi,delta,J,seed,mre,wall_ms,n_nodes,n_edges";

    /// Aggregate row averaging `mre` and `wall_ms`.
    pub fn mean_of(rows: &[TrialReport]) -> Option<TrialReport> {
        let first = rows.first()?;
        let n = rows.len() as f64;
        Some(TrialReport {
            seed: None,
            mre: rows.iter().map(|r| r.mre).sum::<f64>() / n,
            wall_ms: rows.iter().map(|r| r.wall_ms).sum::<f64>() / n,
            ..first.clone()
        })
    }

    pub fn csv_row(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "mean".to_owned(), |s| s.to_string());
        format!(
            "{},{},{},{},{},{},{:.3},{},{}",
            self.variant,
            format_estimate(self.xi),
            format_estimate(self.delta),
            self.bucket,
            seed,
            format_estimate(self.mre),
            self.wall_ms,
            self.n_nodes,
            self.n_edges
        )
    }
}

pub fn write_reports<W: Write>(mut out: W, rows: &[TrialReport]) -> Result<()> {
    writeln!(out, "{}", TrialReport::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Per-node sample statistics over trials plus one report per trial.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub mean: LocalCounts,
    /// Standard error of the mean (0 for a single trial).
    pub stderr: LocalCounts,
    pub reports: Vec<TrialReport>,
}

impl TrialSummary {
    pub fn mean_mre(&self) -> f64 {
        self.reports.iter().map(|r| r.mre).sum::<f64>() / self.reports.len() as f64
    }
}

/// Config of trial `i`: both the sampling RNG seed and the hash seed are
/// offset by `i`, so every trial is an independent draw.
pub fn trial_config(config: &EstimatorConfig, i: u64) -> EstimatorConfig {
    EstimatorConfig {
        seed: config.seed.wrapping_add(i),
        hash_seed: config.hash_seed.wrapping_add(i),
        ..config.clone()
    }
}

const TRIAL_CHUNK: usize = 512;

/// Runs `n_trials` independent estimations of `stream` in parallel and
/// aggregates them in trial order, so the result does not depend on
/// scheduling. `truth` defines the node set `V` and the MRE reference.
pub fn run_trials(
    stream: &[Edge],
    config: &EstimatorConfig,
    n_trials: usize,
    truth: &LocalCounts,
) -> Result<TrialSummary> {
    if n_trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    config.validate()?;
    let nodes: Vec<NodeId> = truth.nodes().collect();
    let stats = StreamStats::of(stream);
    let xi_value = xi(config, &stats)?;

    let mut welford = vec![(0.0f64, 0.0f64); nodes.len()];
    let mut reports = Vec::with_capacity(n_trials);
    let mut done = 0usize;
    let mut start = 0usize;
    while start < n_trials {
        let end = (start + TRIAL_CHUNK).min(n_trials);
        let chunk: Vec<Result<(Vec<f64>, TrialReport)>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let cfg = trial_config(config, i as u64);
                let clock = Instant::now();
                let est = run(cfg.clone(), stream)?;
                let query = est.query();
                let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
                let values: Vec<f64> = nodes.iter().map(|&u| query.get(u)).collect();
                let report = TrialReport {
                    variant: cfg.variant,
                    xi: xi_value,
                    delta: cfg.delta,
                    bucket: cfg.bucket_size(),
                    seed: Some(cfg.seed),
                    mre: mre(&query, truth, &nodes)?,
                    wall_ms,
                    n_nodes: stats.nodes,
                    n_edges: stats.edges,
                };
                Ok((values, report))
            })
            .collect();
        for item in chunk {
            let (values, report) = item?;
            done += 1;
            for (acc, x) in welford.iter_mut().zip(values) {
                let delta = x - acc.0;
                acc.0 += delta / done as f64;
                acc.1 += delta * (x - acc.0);
            }
            reports.push(report);
        }
        start = end;
    }

    let n = n_trials as f64;
    let mean = nodes
        .iter()
        .zip(&welford)
        .map(|(&u, &(m, _))| (u, m))
        .collect();
    let stderr = nodes
        .iter()
        .zip(&welford)
        .map(|(&u, &(_, m2))| {
            let se = if n_trials > 1 {
                (m2 / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            (u, se)
        })
        .collect();
    Ok(TrialSummary {
        mean,
        stderr,
        reports,
    })
}

/// Nodes whose trial mean lies more than `k` standard errors from the truth.
pub fn unbiasedness_outliers(
    summary: &TrialSummary,
    truth: &LocalCounts,
    k: f64,
) -> Vec<(NodeId, f64, f64, f64)> {
    truth
        .iter()
        .filter_map(|(u, d)| {
            let (m, se) = (summary.mean.get(u), summary.stderr.get(u));
            ((m - d).abs() > k * se).then_some((u, m, d, se))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::erdos_renyi;

    fn counts(values: &[(u32, f64)]) -> LocalCounts {
        values.iter().map(|&(u, c)| (NodeId(u), c)).collect()
    }

    #[test]
    fn mre_examples() {
        let truth = counts(&[(0, 1.0), (1, 4.0)]);
        let v = [NodeId(0), NodeId(1)];
        assert_eq!(mre(&truth, &truth, &v).unwrap(), 0.0);
        assert_eq!(
            mre(&counts(&[(0, 3.0)]), &counts(&[(0, 1.0)]), &[NodeId(0)]).unwrap(),
            1.0
        );
        assert_eq!(
            mre(&counts(&[(0, 0.5)]), &counts(&[]), &[NodeId(0)]).unwrap(),
            0.5
        );
        // absent estimate reads 0
        assert_eq!(
            mre(&counts(&[]), &counts(&[(0, 1.0)]), &[NodeId(0)]).unwrap(),
            0.5
        );
        assert!(mre(&truth, &truth, &[]).is_err());
    }

    #[test]
    fn mre_is_relabeling_invariant() {
        let est = counts(&[(0, 2.0), (1, 0.0), (2, 7.5)]);
        let truth = counts(&[(0, 1.0), (1, 3.0), (2, 6.0)]);
        let perm = |c: &LocalCounts| -> LocalCounts {
            c.iter().map(|(u, x)| (NodeId((u.0 + 1) % 3), x)).collect()
        };
        let v: Vec<NodeId> = (0..3).map(NodeId).collect();
        let a = mre(&est, &truth, &v).unwrap();
        let b = mre(&perm(&est), &perm(&truth), &v).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn xi_examples() {
        let stats = |edges, distinct| StreamStats {
            nodes: 10,
            edges,
            distinct,
        };
        let s = EstimatorConfig::new(Variant::FurlS, 100);
        assert_eq!(xi(&s, &stats(1000, 1000)).unwrap(), 0.1);
        let mb = EstimatorConfig::new(Variant::FurlMb, 100);
        assert_eq!(xi(&mb, &stats(2000, 400)).unwrap(), 0.25);
        assert_eq!(
            xi(&EstimatorConfig::mascot(0.3), &stats(5, 5)).unwrap(),
            0.3
        );
        assert!(xi(&s, &stats(0, 0)).is_err());
    }

    #[test]
    fn memory_resolution() {
        let stats = StreamStats {
            nodes: 10,
            edges: 1000,
            distinct: 400,
        };
        assert_eq!(memory_for_xi(Variant::FurlS, 0.1, &stats), 100);
        assert_eq!(memory_for_xi(Variant::FurlS, 0.3, &stats), 300);
        assert_eq!(memory_for_xi(Variant::FurlMw, 0.25, &stats), 100);
        assert_eq!(memory_for_xi(Variant::FurlS, 0.1234, &stats), 124);
        let hundred = StreamStats {
            nodes: 10,
            edges: 100,
            distinct: 100,
        };
        // 0.07 · 100 is 7.000000000000001 in f64
        assert_eq!(memory_for_xi(Variant::FurlS, 0.07, &hundred), 7);
    }

    #[test]
    fn single_trial_and_exact_phase() {
        let g = erdos_renyi(25, 0.3, 4);
        let truth = exact_local_simple(&g);
        let cfg = EstimatorConfig::new(Variant::FurlS, g.len() + 5);
        let one = run_trials(&g, &cfg, 1, &truth).unwrap();
        assert_eq!(one.reports.len(), 1);
        assert!(one.stderr.iter().all(|(_, s)| s == 0.0));

        let many = run_trials(&g, &cfg, 8, &truth).unwrap();
        assert!(many.reports.iter().all(|r| r.mre == 0.0));
        assert_eq!(many.mean, truth);
        assert!(many.stderr.iter().all(|(_, s)| s == 0.0));
    }

    #[test]
    fn single_trial_mean_equals_the_run() {
        let g = erdos_renyi(25, 0.4, 5);
        let truth = exact_local_simple(&g);
        let cfg = EstimatorConfig::new(Variant::FurlS, 20).with_seed(3);
        let summary = run_trials(&g, &cfg, 1, &truth).unwrap();
        let single = run(cfg, &g).unwrap().query();
        for (u, x) in single.iter() {
            assert_eq!(summary.mean.get(u), x);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let g = erdos_renyi(30, 0.3, 6);
        let truth = exact_local_simple(&g);
        let cfg = EstimatorConfig::new(Variant::FurlSx, 30);
        let a = run_trials(&g, &cfg, 600, &truth).unwrap();
        let b = run_trials(&g, &cfg, 600, &truth).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        let mres = |s: &TrialSummary| s.reports.iter().map(|r| r.mre).collect::<Vec<_>>();
        assert_eq!(mres(&a), mres(&b));
    }

    #[test]
    fn report_csv() {
        let row = TrialReport {
            variant: Variant::FurlSx,
            xi: 0.1,
            delta: 0.4,
            bucket: 100,
            seed: Some(3),
            mre: 0.25,
            wall_ms: 1.5,
            n_nodes: 40,
            n_edges: 1000,
        };
        let mean = TrialReport::mean_of(std::slice::from_ref(&row)).unwrap();
        let mut out = Vec::new();
        write_reports(&mut out, &[row, mean]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "variant,xi,delta,J,seed,mre,wall_ms,n_nodes,n_edges\n\
             furl-sx,0.1,0.4,100,3,0.25,1.500,40,1000\n\
             furl-sx,0.1,0.4,100,mean,0.25,1.500,40,1000\n"
        );
    }
}
