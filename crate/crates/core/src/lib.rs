//! Estimation of the quadratic covariation of two asynchronously traded
//! prices and its split into a continuous part (integrated covariance) and a
//! co-jump part.
//!
//! The pipeline runs from raw ticks to daily covariance matrices:
//!
//! 1. [`ingest`] loads tick files, averages trades sharing a time stamp and
//!    assigns every tick to a trading session.
//! 2. [`sync`] aligns two assets on refresh times and forms log returns.
//! 3. [`wavelet`] computes the maximal overlap discrete wavelet transform.
//! 4. [`jumps`] flags jumps from the finest-scale wavelet coefficients.
//! 5. [`estimators`] computes realized, bipower, two-scale and jump-robust
//!    wavelet covariance.
//! 6. [`cojump_test`] decides by bootstrap whether a day contains co-jumps.
//! 7. [`analysis`] turns daily matrices into correlations, regressions and
//!    session reports.
//!
//! [`simulate`] generates a bivariate stochastic volatility model with jumps
//! and noise for Monte Carlo evaluation of the estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod estimators;
pub mod ingest;
pub mod jumps;
pub mod matrix;
pub mod pipeline;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod sync;
pub mod wavelet;

pub use matrix::Sym2;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Calendar(#[from] ingest::CalendarError),
    #[error(transparent)]
    Sync(#[from] sync::SyncError),
    #[error(transparent)]
    Wavelet(#[from] wavelet::WaveletError),
    #[error(transparent)]
    Jump(#[from] jumps::JumpError),
    #[error(transparent)]
    Estimator(#[from] estimators::EstimatorError),
    #[error(transparent)]
    Test(#[from] cojump_test::TestError),
    #[error(transparent)]
    Simulation(#[from] simulate::SimError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ticks.md")]
    mod ticks {}
    #[doc = include_str!("../../../book/src/sync.md")]
    mod sync {}
    #[doc = include_str!("../../../book/src/wavelets.md")]
    mod wavelets {}
    #[doc = include_str!("../../../book/src/jumps.md")]
    mod jumps {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/cojump-test.md")]
    mod cojump_test {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
