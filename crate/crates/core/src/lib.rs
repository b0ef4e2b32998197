//! Bayesian piecewise sinusoidal regression.
//!
//! A series `y_1..y_n` is split by `k` change-points into segments, each a
//! linear trend plus `m_j` sinusoids observed in Gaussian noise. The number
//! of change-points, their locations, the number of frequencies in every
//! segment and the frequencies themselves are all unknown. [`chain::run_chain`]
//! samples their joint posterior with a two-level reversible-jump sampler:
//! change-point moves on the outer level, frequency moves inside each
//! segment.
//!
//! ```
//! use cyclepoint::chain::{run_chain, ChainConfig};
//! use cyclepoint::hyper::Hyperparams;
//! use cyclepoint::model::TimeSeries;
//!
//! let y: Vec<f64> = (1..=200)
//!     .map(|t| 3.0 * (std::f64::consts::TAU * 0.1 * t as f64).cos() + 0.1 * (t as f64).sin())
//!     .collect();
//! let ts = TimeSeries::new(y)?;
//! let config = ChainConfig { iterations: 600, burn_in: 200, ..ChainConfig::default() };
//! let out = run_chain(&ts, &Hyperparams::for_length(ts.len()), &config)?;
//! assert_eq!(out.samples.len(), 400);
//! # Ok::<(), cyclepoint::Error>(())
//! ```
//!
//! Modules, bottom up:
//!
//! - [`model`]: series, segment parameters, basis and likelihood
//! - [`hyper`] and [`priors`]: prior constants and densities
//! - [`spectral`]: periodogram and the frequency proposal built on it
//! - [`conjugate`]: Gaussian and inverse-gamma full conditionals
//! - [`segment`] and [`changepoint`]: the two move levels
//! - [`chain`]: the driver
//! - [`summaries`], [`simulate`], [`io`]: post-processing, synthetic data, files

pub mod chain;
pub mod changepoint;
pub mod conjugate;
pub mod error;
pub mod hyper;
pub mod io;
pub mod model;
pub mod priors;
pub mod segment;
pub mod simulate;
pub mod spectral;
pub mod summaries;

pub use chain::{run_chain, ChainConfig, ChainOutput};
pub use error::{Error, Result};
pub use hyper::Hyperparams;
pub use model::{ModelState, SegmentParams, TimeSeries};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/priors.md")]
    struct Priors;
    #[doc = include_str!("../../../book/src/spectral.md")]
    struct Spectral;
    #[doc = include_str!("../../../book/src/moves.md")]
    struct Moves;
    #[doc = include_str!("../../../book/src/chain.md")]
    struct Chain;
    #[doc = include_str!("../../../book/src/summaries.md")]
    struct Summaries;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
