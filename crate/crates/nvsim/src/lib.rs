//! Simulation of nanoscale ion-channel detection through spin-echo
//! decoherence of a near-surface probe spin.
//!
//! The crate models the magnetic environment above a cell membrane — ion
//! flux through a channel, diffusing water and lipid protons, interfacial
//! charge fluctuations — as Ornstein-Uhlenbeck noise sources, computes the
//! resulting echo envelopes and detection contrast, and builds the layers on
//! top: measurement planning, telegraph-signal monitoring, lateral scanning,
//! and wide-field ensemble contrast. Monte-Carlo counterparts (explicit OU
//! trajectories and particle baths) validate the closed forms.

pub mod config;
pub mod constants;
pub mod dephasing;
pub mod error;
pub mod imaging;
pub mod measurement;
pub mod montecarlo;
pub mod noise;
pub mod planner;
pub mod report;
pub mod rng;

pub use error::NvError;
