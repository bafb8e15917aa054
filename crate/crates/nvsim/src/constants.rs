//! Physical constants used throughout the simulator.
//!
//! All values are SI. The set is exposed as a config section so that unit
//! conventions (most importantly the probe gyromagnetic ratio) stay explicit
//! and overridable rather than baked into formulas.

use serde::{Deserialize, Serialize};

/// Fundamental and probe-specific constants.
///
/// `gamma_p` is the probe-spin gyromagnetic ratio in cyclic units (Hz/T).
/// Analytic dephasing rates in this crate are calibrated in that convention;
/// code that accumulates real precession phase (the Monte-Carlo echo kernel)
/// uses [`PhysicalConstants::gamma_p_angular`] instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Vacuum permeability over 4π, T·m/A.
    pub mu0_over_4pi: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Nuclear magneton, J/T.
    pub mu_n: f64,
    /// Proton magnetic moment in nuclear magnetons (dimensionless).
    pub g_h: f64,
    /// Probe-spin gyromagnetic ratio, Hz/T (cyclic convention).
    pub gamma_p: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon_0: f64,
    /// Ground-state Stark response of the probe spin, Hz per V/m.
    pub r_3d: f64,
    /// Probe crystal-field (zero-field) splitting, Hz. Used only to sanity-check
    /// that magnetic noise amplitudes stay perturbative.
    pub d_crystal_field: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            mu0_over_4pi: 1.0e-7,
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
            mu_n: 5.050_783_746_1e-27,
            g_h: 2.792_847_344,
            gamma_p: 2.80e10,
            epsilon_0: 8.854_187_812_8e-12,
            r_3d: 3.5e-3,
            d_crystal_field: 2.88e9,
        }
    }
}

impl PhysicalConstants {
    /// Gyromagnetic ratio in angular units, rad/(s·T).
    pub fn gamma_p_angular(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.gamma_p
    }

    /// Proton magnetic moment, J/T.
    pub fn mu_p(&self) -> f64 {
        self.g_h * self.mu_n
    }
}
