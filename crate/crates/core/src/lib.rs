//! A library-only PGAS runtime.
//!
//! Programs run as a fixed set of units (threads or processes). Each unit owns
//! a slice of a partitioned global address space that every other unit can
//! read and write with one-sided operations. On top of that sit distribution
//! patterns, distributed containers and collective algorithms.
//!
//! ```no_run
//! use pgas::{launch, algorithms, DistributedArray, RuntimeConfig};
//!
//! let sums = launch(&RuntimeConfig::in_process(4), |ctx| {
//!     let arr = DistributedArray::<i64>::new(ctx.team_all(), 1000).unwrap();
//!     algorithms::generate(arr.range(), |i| i as i64).unwrap();
//!     algorithms::accumulate(arr.range(), 0, |a, b| a + b).unwrap()
//! })
//! .unwrap();
//! assert!(sums.iter().all(|&s| s == 499_500));
//! ```

pub mod algorithms;
pub mod bench;
pub mod containers;
pub mod error;
pub mod launcher;
pub mod memory;
pub mod pattern;
pub mod runtime;
pub mod transport;
pub mod viz;

pub use containers::{DistributedArray, DistributedMatrix, LocalView, MatrixView};
pub use error::{Error, Result};
pub use memory::{AsyncHandle, GlobalIter, GlobalMemory, GlobalPointer, GlobalRange, GlobalRef};
pub use pattern::{Distribution, MemoryOrder, Pattern, PatternSpec, TeamSpec};
pub use runtime::{launch, my_id, n_units, run, Context, LocalityMap, RuntimeConfig, Team, UnitId};
pub use transport::{SegmentId, StatsSnapshot, TransportKind};
