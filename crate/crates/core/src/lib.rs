//! Passive geolocation of multiple wideband emitters from phased-array
//! stations.
//!
//! The crate simulates multi-station array recordings and implements four
//! direct-positioning estimators over a grid of position hypotheses:
//! channelized DPD, LOST, TARGET and the cross-correlation estimator ccDPD,
//! together with the Monte Carlo harness used to compare them.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod scenario;
pub mod seed;
pub mod selftest;
pub mod synth;
pub mod xcov;

pub use error::{Error, Result};
