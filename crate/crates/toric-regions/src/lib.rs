//! Minimal invariant and globally attracting regions of two-dimensional
//! toric differential inclusions.
//!
//! Geometry lives in log space: a point `x = (x, y)` of the positive quadrant
//! is handled through `X = (log x, log y)` so that coordinates of order
//! `e^{cδ}` never overflow.

// `!(a < b)` is used on purpose: a NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod dynamics;
pub mod fan_geometry;
pub mod logline;
pub mod region_construction;
pub mod tdi_rhs;
pub mod verification;

pub use fan_geometry::{
    Cone2, Fan, GeometryError, LineGenerator, LogPoint, PosPoint, UncertaintyRegion,
};
pub use region_construction::{construct_region, ConstructionError, Containment, RegionBoundary};
pub use tdi_rhs::{rhs_bruteforce, rhs_classified, ConeRHS};

/// Worked example used throughout tests and docs.
pub const WORKED_FAN: [(i64, i64); 3] = [(-1, 1), (1, 2), (2, 1)];

/// Worker count for parallel sweeps, honouring `TORIC_REGIONS_THREADS`.
pub fn worker_threads() -> usize {
    std::env::var("TORIC_REGIONS_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs `f` inside a rayon pool sized by [`worker_threads`].
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
    {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
