//! Bucketed exponential smoothing of the raw counts `c` into `τ̂`.
//!
//! Bucket 0 is `[1, T_M]`; afterwards every `J` events form one bucket. At
//! `T_M` the smoothed vector is a copy of `c`; at each later boundary it
//! becomes `δ·τ̂ + (1−δ)·c`.
//!
//! The dense form touches every node at every boundary. The lazy form keeps,
//! per node, the number of boundaries already folded in and replays the
//! missing folds when the node's raw count is about to change or when it is
//! read. Between two touches a node's raw count is constant, so replaying the
//! same recurrence gives bit-identical results.

#[derive(Debug, Clone)]
pub(crate) struct Smoother {
    delta: f64,
    bucket: u64,
    overflow_time: Option<u64>,
    tau: Vec<f64>,
    lazy: Option<Lazy>,
}

#[derive(Debug, Clone, Default)]
struct Lazy {
    boundaries: u64,
    folded: Vec<u64>,
}

impl Smoother {
    pub(crate) fn new(delta: f64, bucket: u64, lazy: bool) -> Self {
        Smoother {
            delta,
            bucket,
            overflow_time: None,
            tau: Vec::new(),
            lazy: lazy.then(Lazy::default),
        }
    }

    pub(crate) fn overflow_time(&self) -> Option<u64> {
        self.overflow_time
    }

    pub(crate) fn mark_overflow(&mut self, t_m: u64) {
        debug_assert!(self.overflow_time.is_none());
        self.overflow_time = Some(t_m);
    }

    /// `τ̂ ← c`.
    pub(crate) fn snapshot(&mut self, counts: &[f64]) {
        self.tau.clear();
        self.tau.extend_from_slice(counts);
        if let Some(lazy) = &mut self.lazy {
            lazy.folded.clear();
            lazy.folded.resize(counts.len(), lazy.boundaries);
        }
    }

    #[inline]
    fn fold(delta: f64, tau: f64, c: f64) -> f64 {
        delta * tau + (1.0 - delta) * c
    }

    /// Must be called with the node's current raw count right before that
    /// count changes. No-op in dense mode or before the first overflow.
    #[inline]
    pub(crate) fn before_change(&mut self, u: usize, c_old: f64) {
        let Some(lazy) = &mut self.lazy else { return };
        if self.overflow_time.is_none() {
            return;
        }
        if u >= self.tau.len() {
            self.tau.resize(u + 1, 0.0);
            lazy.folded.resize(u + 1, 0);
        }
        while lazy.folded[u] < lazy.boundaries {
            self.tau[u] = Self::fold(self.delta, self.tau[u], c_old);
            lazy.folded[u] += 1;
        }
    }

    /// End-of-event update.
    pub(crate) fn after_event(&mut self, time: u64, counts: &[f64]) {
        let Some(t_m) = self.overflow_time else {
            return;
        };
        if time == t_m {
            self.snapshot(counts);
        } else if time > t_m && (time - t_m).is_multiple_of(self.bucket) {
            match &mut self.lazy {
                Some(lazy) => lazy.boundaries += 1,
                None => {
                    if self.tau.len() < counts.len() {
                        self.tau.resize(counts.len(), 0.0);
                    }
                    for (tau, &c) in self.tau.iter_mut().zip(counts) {
                        *tau = Self::fold(self.delta, *tau, c);
                    }
                }
            }
        }
    }

    /// `τ̂[u]` as of the last boundary.
    #[inline]
    pub(crate) fn smoothed(&self, u: usize, c: f64) -> f64 {
        let mut tau = self.tau.get(u).copied().unwrap_or(0.0);
        if let Some(lazy) = &self.lazy {
            let folded = lazy.folded.get(u).copied().unwrap_or(0);
            for _ in folded..lazy.boundaries {
                tau = Self::fold(self.delta, tau, c);
            }
        }
        tau
    }

    /// Query value of node `u` at `time`, given its raw count `c`.
    #[inline]
    pub(crate) fn query(&self, time: u64, u: usize, c: f64) -> f64 {
        match self.overflow_time {
            None => c,
            Some(t_m) if time <= t_m => c,
            Some(t_m) if (time - t_m).is_multiple_of(self.bucket) => self.smoothed(u, c),
            Some(_) => Self::fold(self.delta, self.smoothed(u, c), c),
        }
    }
}
