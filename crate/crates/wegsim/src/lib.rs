//! Library and CLI simulator for sequential model specialization over
//! piecewise-stationary, class-skewed label streams.
//!
//! A heavyweight "oracle" classifier can always label an input at cost `R*`.
//! When the short-term class distribution is skewed toward a small dominant
//! set, a cheap specialized model cascaded with the oracle can serve most
//! inputs at a fraction of the cost. The [`weg`] module implements the
//! windowed ε-greedy controller that detects such skews online, decides when
//! to retarget a compact template to the current dominant set, exploits the
//! resulting cascade, and falls back to the oracle when the distribution
//! drifts.
//!
//! The crate is organized along the pipeline:
//!
//! - [`stream`]: seeded piecewise-stationary stream generation and trace files
//! - [`models`]: stochastic oracle / compact / specialized classifier models
//!   and their cost parameters
//! - [`cascade`]: specialized-plus-oracle cascading with per-call cost
//!   accounting and the closed-form accuracy estimate
//! - [`weg`]: the controller state machine and its ablation variants
//! - [`analysis`]: closed-form dominant-class detection probabilities and
//!   trace skew measurement
//! - [`config`] / [`sim`] / [`sweep`]: run configuration, the simulation
//!   driver with metrics and regret accounting, and parameter sweeps
//!
//! Everything is deterministic given the configured seeds; see [`rng`] for
//! the stream-splitting scheme.

pub mod analysis;
pub mod cascade;
pub mod config;
pub mod error;
pub mod models;
pub mod rng;
pub mod sim;
pub mod stream;
pub mod sweep;
pub mod weg;

pub use error::Error;
