//! Fixed-memory estimation of per-node (local) triangle counts over simple
//! and multigraph edge streams.
//!
//! The crate is organized as:
//!
//! - [`stream`]: edge model, edge-list I/O and offline preprocessing;
//! - [`buffer`]: the bounded edge sample with uniform or min-hash replacement;
//! - [`estimator`]: the streaming estimators and the Bernoulli baseline;
//! - [`oracle`]: exact local counts (simple, binary, weighted);
//! - [`eval`]: error metrics, multi-trial runs and statistical probes;
//! - [`synth`]: seeded synthetic fixtures.
//!
//! ```
//! use furl::estimator::{run, EstimatorConfig, Variant};
//! use furl::oracle::exact_local_simple;
//! use furl::synth::erdos_renyi;
//!
//! let edges = erdos_renyi(30, 0.3, 7);
//! let est = run(EstimatorConfig::new(Variant::FurlSx, 1_000), &edges).unwrap();
//! // The whole stream fits in the buffer, so the estimate is exact.
//! assert_eq!(est.query(), exact_local_simple(&edges));
//! ```

pub mod buffer;
pub mod counts;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod oracle;
pub mod stream;
pub mod synth;

pub use counts::LocalCounts;
pub use error::{Error, Result};
pub use estimator::{Estimator, EstimatorConfig, Variant};
pub use stream::{Edge, NodeId};
