//! Streaming local triangle estimators.
//!
//! Every variant keeps at most `M` edges in a [`SampleBuffer`] and updates
//! per-node raw counts `c` as each edge arrives:
//!
//! | variant    | stream     | sampling            | counting            |
//! |------------|------------|---------------------|---------------------|
//! | `FurlS`    | simple     | uniform reservoir   | before sampling     |
//! | `FurlMb`   | multigraph | min-hash, distinct  | after sampling      |
//! | `FurlMw`   | multigraph | min-hash + `O_e`    | before sampling     |
//!
//! The `X` variants (`FurlSx`, `FurlMxb`, `FurlMxw`) run the same update and
//! sampling steps and additionally smooth `c` over buckets of `J` events
//! after the buffer first overflows. `Mascot` is the unbounded-memory
//! Bernoulli-sampling baseline.

mod smoothing;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::buffer::SampleBuffer;
use crate::counts::LocalCounts;
use crate::error::{Error, Result};
use crate::stream::{Edge, NodeId};

use smoothing::Smoother;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    FurlS,
    FurlSx,
    FurlMb,
    FurlMxb,
    FurlMw,
    FurlMxw,
    Mascot,
}

/// How duplicate edges are treated, and which oracle an estimator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counting {
    Simple,
    Binary,
    Weighted,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::FurlS,
        Variant::FurlSx,
        Variant::FurlMb,
        Variant::FurlMxb,
        Variant::FurlMw,
        Variant::FurlMxw,
        Variant::Mascot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FurlS => "furl-s",
            Variant::FurlSx => "furl-sx",
            Variant::FurlMb => "furl-mb",
            Variant::FurlMxb => "furl-mxb",
            Variant::FurlMw => "furl-mw",
            Variant::FurlMxw => "furl-mxw",
            Variant::Mascot => "mascot",
        }
    }

    pub fn counting(self) -> Counting {
        match self {
            Variant::FurlS | Variant::FurlSx | Variant::Mascot => Counting::Simple,
            Variant::FurlMb | Variant::FurlMxb => Counting::Binary,
            Variant::FurlMw | Variant::FurlMxw => Counting::Weighted,
        }
    }

    /// Whether the variant smooths its counts over buckets.
    pub fn is_smoothed(self) -> bool {
        matches!(self, Variant::FurlSx | Variant::FurlMxb | Variant::FurlMxw)
    }

    /// The unsmoothed variant with the same update and sampling steps.
    pub fn base(self) -> Variant {
        match self {
            Variant::FurlSx => Variant::FurlS,
            Variant::FurlMxb => Variant::FurlMb,
            Variant::FurlMxw => Variant::FurlMw,
            other => other,
        }
    }

    pub fn smoothed(self) -> Option<Variant> {
        match self.base() {
            Variant::FurlS => Some(Variant::FurlSx),
            Variant::FurlMb => Some(Variant::FurlMxb),
            Variant::FurlMw => Some(Variant::FurlMxw),
            _ => None,
        }
    }

    pub fn is_fixed_memory(self) -> bool {
        self != Variant::Mascot
    }

    /// Smallest buffer for which the estimation weights are positive.
    pub fn min_memory(self) -> usize {
        match self.base() {
            Variant::FurlMb => 4,
            Variant::Mascot => 0,
            _ => 3,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub variant: Variant,
    /// Buffer capacity `M` (ignored by `Mascot`).
    pub memory: usize,
    /// Bucket size `J`; `None` means `J = M`.
    pub bucket: Option<usize>,
    /// Decaying factor `δ` of the smoothed variants.
    pub delta: f64,
    /// Seed of the reservoir / Bernoulli RNG.
    pub seed: u64,
    /// Seed of the edge hash used by min-hash sampling.
    pub hash_seed: u64,
    /// Edge sampling probability `p` of `Mascot`.
    pub probability: f64,
    /// Reject an arriving edge that is already buffered on simple-stream
    /// variants instead of trusting the caller's deduplication.
    pub strict: bool,
    /// Use the lazy form of the bucket smoothing.
    pub lazy_average: bool,
}

impl EstimatorConfig {
    pub fn new(variant: Variant, memory: usize) -> Self {
        EstimatorConfig {
            variant,
            memory,
            bucket: None,
            delta: 0.4,
            seed: 0,
            hash_seed: 1,
            probability: 1.0,
            strict: false,
            lazy_average: false,
        }
    }

    pub fn mascot(probability: f64) -> Self {
        EstimatorConfig {
            probability,
            ..Self::new(Variant::Mascot, 0)
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_bucket(mut self, bucket: usize) -> Self {
        self.bucket = Some(bucket);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hash_seed(mut self, hash_seed: u64) -> Self {
        self.hash_seed = hash_seed;
        self
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn with_lazy_average(mut self, lazy: bool) -> Self {
        self.lazy_average = lazy;
        self
    }

    /// Resolved bucket size `J`.
    pub fn bucket_size(&self) -> usize {
        self.bucket.unwrap_or(self.memory)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.variant;
        if v == Variant::Mascot {
            if !(self.probability > 0.0 && self.probability <= 1.0) {
                return Err(Error::Config(format!(
                    "mascot needs 0 < p <= 1, got {}",
                    self.probability
                )));
            }
            return Ok(());
        }
        if self.memory < v.min_memory() {
            return Err(Error::Config(format!(
                "{v} needs memory M >= {}, got {}",
                v.min_memory(),
                self.memory
            )));
        }
        if v.is_smoothed() {
            if !(0.0..1.0).contains(&self.delta) {
                return Err(Error::Config(format!(
                    "delta must be in [0, 1), got {}",
                    self.delta
                )));
            }
            if self.bucket_size() == 0 {
                return Err(Error::Config("bucket size J must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// One estimator instance: sample buffer, raw counts, optional smoothing.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    time: u64,
    counts: Vec<f64>,
    discovered: Vec<bool>,
    node_count: usize,
    exact: bool,
    smoother: Option<Smoother>,
    buffer: SampleBuffer,
    rng: ChaCha8Rng,
    peak: usize,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let buffer = match config.variant.base() {
            Variant::FurlS => SampleBuffer::uniform(config.memory),
            Variant::FurlMb | Variant::FurlMw => {
                SampleBuffer::min_hash(config.memory, config.hash_seed)
            }
            _ => SampleBuffer::unbounded(),
        };
        let smoother = config.variant.is_smoothed().then(|| {
            Smoother::new(
                config.delta,
                config.bucket_size() as u64,
                config.lazy_average,
            )
        });
        Ok(Estimator {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            time: 0,
            counts: Vec::new(),
            discovered: Vec::new(),
            node_count: 0,
            exact: true,
            smoother,
            buffer,
            peak: 0,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Current time `T` (number of processed events).
    pub fn time(&self) -> u64 {
        self.time
    }

    /// Whether the raw counts are still exact (`ExactCnt`).
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// `T_M` of the smoothed variants, once the buffer has overflowed.
    pub fn overflow_time(&self) -> Option<u64> {
        self.smoother.as_ref().and_then(Smoother::overflow_time)
    }

    pub fn buffer(&self) -> &SampleBuffer {
        &self.buffer
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn peak_buffer_len(&self) -> usize {
        self.peak
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Processes one arriving edge at time `T + 1`.
    pub fn process(&mut self, e: Edge) -> Result<()> {
        self.time += 1;
        self.discover(e.a());
        self.discover(e.b());
        match self.config.variant.base() {
            Variant::FurlS => self.step_simple(e)?,
            Variant::FurlMb => self.step_binary(e)?,
            Variant::FurlMw => self.step_weighted(e)?,
            _ => self.step_mascot(e)?,
        }
        if let Some(s) = &mut self.smoother {
            s.after_event(self.time, &self.counts);
        }
        self.peak = self.peak.max(self.buffer.len());
        Ok(())
    }

    pub fn process_all<'a, I: IntoIterator<Item = &'a Edge>>(&mut self, edges: I) -> Result<()> {
        for &e in edges {
            self.process(e)?;
        }
        Ok(())
    }

    /// Estimate for a single node; unseen nodes read 0.
    pub fn estimate(&self, u: NodeId) -> f64 {
        let c = self.counts.get(u.index()).copied().unwrap_or(0.0);
        match &self.smoother {
            Some(s) if !self.exact => s.query(self.time, u.index(), c),
            _ => c,
        }
    }

    /// Current estimates of every discovered node.
    pub fn query(&self) -> LocalCounts {
        self.discovered_nodes()
            .map(|u| (u, self.estimate(u)))
            .collect()
    }

    /// Raw counts `c` of every discovered node.
    pub fn raw_counts(&self) -> LocalCounts {
        self.discovered_nodes()
            .map(|u| (u, self.counts[u.index()]))
            .collect()
    }

    fn discovered_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.discovered
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(i, _)| NodeId(i as u32))
    }

    fn discover(&mut self, u: NodeId) {
        let i = u.index();
        if i >= self.counts.len() {
            self.counts.resize(i + 1, 0.0);
            self.discovered.resize(i + 1, false);
        }
        if !self.discovered[i] {
            self.discovered[i] = true;
            self.node_count += 1;
        }
    }

    fn memory_f64(&self) -> f64 {
        self.config.memory as f64
    }

    /// `q_T = (T−1)(T−2) / (M(M−1))`, evaluated as a product of ratios.
    fn simple_weight(&self) -> f64 {
        let (t, m) = (self.time as f64, self.memory_f64());
        ((t - 1.0) / m) * ((t - 2.0) / (m - 1.0))
    }

    /// Raw-count increment for every triangle closed by `e` in the buffer.
    fn increase(&mut self, e: Edge, theta: f64) {
        let Estimator {
            buffer,
            counts,
            smoother,
            ..
        } = self;
        let (u, v) = e.endpoints();
        let mut closed = 0u64;
        buffer.for_each_common_neighbor(u, v, |w| {
            bump(counts, smoother, w, theta);
            closed += 1;
        });
        if closed > 0 {
            let total = theta * closed as f64;
            bump(counts, smoother, u, total);
            bump(counts, smoother, v, total);
        }
    }

    /// Weighted increment: each wedge `u–w–v` adds `θ·O_uw·O_vw`.
    fn increase_weighted(&mut self, e: Edge, theta: f64) {
        let Estimator {
            buffer,
            counts,
            smoother,
            ..
        } = self;
        let (u, v) = e.endpoints();
        buffer.for_each_common_neighbor(u, v, |w| {
            let o_uw = buffer.occurrence(Edge::new(u, w).expect("w differs from u"));
            let o_vw = buffer.occurrence(Edge::new(v, w).expect("w differs from v"));
            let x = theta * (o_uw * o_vw) as f64;
            bump(counts, smoother, w, x);
            bump(counts, smoother, u, x);
            bump(counts, smoother, v, x);
        });
    }

    fn end_exact_phase(&mut self, overflow_time: u64, snapshot_now: bool) {
        if !self.exact {
            return;
        }
        self.exact = false;
        if let Some(s) = &mut self.smoother {
            s.mark_overflow(overflow_time);
            if snapshot_now {
                s.snapshot(&self.counts);
            }
        }
    }

    fn step_simple(&mut self, e: Edge) -> Result<()> {
        if self.config.strict && self.buffer.contains(e) {
            return Err(Error::DuplicateEdge(e));
        }
        let theta = if self.exact {
            1.0
        } else {
            self.simple_weight()
        };
        self.increase(e, theta);
        if self.buffer.contains(e) {
            // Non-strict mode on an undeduplicated stream: an edge cannot be
            // stored twice, so the repeat only counts.
            return Ok(());
        }
        if !self.buffer.is_full() {
            self.buffer.append(e)?;
        } else {
            self.end_exact_phase(self.time, false);
            self.buffer.replace_uniform(e, self.time, &mut self.rng)?;
        }
        Ok(())
    }

    fn step_binary(&mut self, e: Edge) -> Result<()> {
        if self.buffer.contains(e) {
            return Ok(());
        }
        let sampled = if !self.buffer.is_full() {
            self.buffer.append(e)?;
            true
        } else {
            // Sampling precedes counting here, so the last exact time is
            // T−1 and c has not changed yet in this event: snapshot now.
            self.end_exact_phase(self.time - 1, true);
            self.buffer.replace_minhash(e)?
        };
        if self.exact {
            self.increase(e, 1.0);
        } else if sampled {
            let m = self.memory_f64();
            let theta = ((m - 3.0) / m) / self.buffer.h_max()?.powi(3);
            self.increase(e, theta);
        }
        Ok(())
    }

    fn step_weighted(&mut self, e: Edge) -> Result<()> {
        let theta = if self.exact {
            1.0
        } else {
            let m = self.memory_f64();
            ((m - 2.0) / m) / self.buffer.h_max()?.powi(2)
        };
        self.increase_weighted(e, theta);
        if self.buffer.contains(e) {
            self.buffer.increment_occurrence(e)?;
        } else if !self.buffer.is_full() {
            self.buffer.append(e)?;
        } else {
            self.end_exact_phase(self.time, false);
            self.buffer.replace_minhash(e)?;
        }
        Ok(())
    }

    fn step_mascot(&mut self, e: Edge) -> Result<()> {
        let duplicate = self.buffer.contains(e);
        if duplicate && self.config.strict {
            return Err(Error::DuplicateEdge(e));
        }
        let p = self.config.probability;
        self.increase(e, 1.0 / (p * p));
        if self.rng.random::<f64>() < p && !duplicate {
            self.buffer.append(e)?;
        }
        Ok(())
    }
}

#[inline]
fn bump(counts: &mut [f64], smoother: &mut Option<Smoother>, u: NodeId, x: f64) {
    let i = u.index();
    if let Some(s) = smoother {
        s.before_change(i, counts[i]);
    }
    counts[i] += x;
}

/// Runs a fresh estimator over `edges` and returns it.
pub fn run(config: EstimatorConfig, edges: &[Edge]) -> Result<Estimator> {
    let mut est = Estimator::new(config)?;
    est.process_all(edges)?;
    Ok(est)
}
