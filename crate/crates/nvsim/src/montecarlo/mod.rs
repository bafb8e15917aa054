//! Trajectory-level simulations that validate the closed-form envelopes:
//! exact Ornstein-Uhlenbeck sampling, the spin-echo phase kernel, and
//! explicit particle baths (diffusing dipoles, channel shot noise).

pub mod bath;
pub mod echo;
pub mod ou;

pub use bath::{dipole_field_z, ShotNoiseChannel, SlabBath};
pub use echo::{echo_phase, simulate_envelope, envelope_scan, EnvelopeEstimate};
pub use ou::OrnsteinUhlenbeck;
