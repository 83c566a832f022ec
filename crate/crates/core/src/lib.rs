//! Downlink coverage and area spectral efficiency of multi-tier mmWave
//! networks with multi-antenna ZF base stations, delayed imperfect CSIT and
//! residual transceiver hardware impairments.
//!
//! The crate has two engines that share one configuration model:
//! semi-analytic coverage ([`coverage`]) built on exact Laplace-transform
//! derivatives ([`laplace`]), and a Monte Carlo harness ([`montecarlo`])
//! that samples the network and evaluates the SDINR directly ([`sdinr`]).

pub mod channel;
pub mod config;
pub mod coverage;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod laplace;
pub mod montecarlo;
pub mod quadrature;
pub mod sdinr;
pub mod special;
pub mod stats;

pub use config::{load_config, Aging, BeamPattern, FadingScale, NetworkConfig, TierParams};
pub use error::{Error, Result};
