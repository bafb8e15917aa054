//! Run configuration: environment, probe, and execution settings.
//!
//! Configuration is loaded from a JSON file with three optional sections
//! (`constants`, `environment`, `run`) and one required section (`probe`,
//! because the probe standoff has no universal default). Individual values
//! can be overridden from the command line with `--set section.key=value`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::measurement::SwitchWaiting;

/// Errors produced while loading or manipulating configuration.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("override key {0:?} is not of the form section.key")]
    BadOverrideKey(String),
    #[error("override {key}={value} rejected: {reason}")]
    BadOverrideValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Properties of the membrane environment the probe is sensing.
///
/// Densities are number densities (m⁻³), moments are in J/T, diffusion
/// coefficients in m²/s, lengths in m.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    /// Mean number of ions inside the channel.
    pub n_ion: f64,
    /// Effective magnetic moment per channel ion, J/T.
    pub mu_ion: f64,
    /// Mean number of ortho-water molecules inside the channel.
    pub n_h2o: f64,
    /// Effective magnetic moment per channel water molecule, J/T
    /// (ortho water carries two aligned proton moments).
    pub mu_h2o: f64,
    /// Ion flux through an open channel, ions/(s·m²).
    pub ion_flux: f64,
    /// Channel aperture radius, m.
    pub aperture_radius: f64,
    /// Dimensionless factor mapping raw aperture throughput to the effective
    /// channel fluctuation rate (accounts for correlated, single-file passage).
    pub ion_fe_scale: f64,
    /// Mean ion transit time through the channel, s.
    pub transit_time: f64,
    /// Bulk water number density, m⁻³.
    pub water_density: f64,
    /// Fraction of water molecules in the magnetically active ortho state.
    pub ortho_fraction: f64,
    /// Water self-diffusion coefficient, m²/s.
    pub water_diffusion: f64,
    /// Proton number density in the lipid head-group region, m⁻³.
    pub lipid_proton_density: f64,
    /// Lateral lipid diffusion coefficient, m²/s.
    pub lipid_diffusion: f64,
    /// Lateral correlation length of lipid motion, m.
    pub lipid_correlation_length: f64,
    /// Relative permittivity of the electrolyte.
    pub epsilon_r: f64,
    /// Debye screening length of the electrolyte, m.
    pub debye_length: f64,
    /// Electrolyte resistivity, Ω·m.
    pub resistivity: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Electrolyte ion diffusion coefficient, m²/s.
    pub electrolyte_diffusion: f64,
    /// Calibration factor for the charge-fluctuation field amplitude.
    pub c_e: f64,
    /// Calibration factor for the channel dephasing exponent.
    pub c_ic: f64,
    /// Calibration factor for per-probe decoherence rates in the dense-layer
    /// imaging model.
    pub c_ens: f64,
    /// Probe-layer density for wide-field imaging, m⁻³.
    pub n_nv: f64,
    /// Probe-layer thickness for wide-field imaging, m.
    pub nv_layer_thickness: f64,
    /// Areal channel density in the imaged membrane patch, m⁻².
    pub channel_density: f64,
    /// Fraction of the imaged field of view covered by membrane.
    pub membrane_coverage: f64,
}

fn base_constants() -> PhysicalConstants {
    PhysicalConstants::default()
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        let c = base_constants();
        EnvironmentConfig {
            n_ion: 3.0,
            mu_ion: 2.22 * c.mu_n,
            n_h2o: 36.0,
            mu_h2o: 2.0 * c.mu_p(),
            ion_flux: 5.0e23,
            aperture_radius: 1.0e-9,
            ion_fe_scale: 0.06 / std::f64::consts::PI,
            transit_time: 1.0e-6,
            water_density: 3.3e28,
            ortho_fraction: 0.75,
            water_diffusion: 3.0e-9,
            lipid_proton_density: 1.5e28,
            lipid_diffusion: 2.0e-15,
            lipid_correlation_length: 2.0e-9,
            epsilon_r: 80.0,
            debye_length: 7.8e-10,
            resistivity: 1.0,
            temperature: 310.0,
            electrolyte_diffusion: 1.5e-9,
            c_e: 0.565_860_705,
            c_ic: 2.0,
            c_ens: 150.0,
            n_nv: 1.0e24,
            nv_layer_thickness: 3.0e-9,
            channel_density: 1.0e16,
            membrane_coverage: 0.55,
        }
    }
}

impl EnvironmentConfig {
    /// Number density of ortho water in the bulk, m⁻³.
    pub fn n_ortho(&self) -> f64 {
        self.water_density * self.ortho_fraction
    }
}

/// Probe-spin parameters. The standoff `h_p` must always be given explicitly
/// in config files; every other field has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Probe standoff from the membrane, m.
    pub h_p: f64,
    /// Intrinsic coherence time of the probe spin, s.
    #[serde(default = "default_t2")]
    pub t2: f64,
    /// Stretch exponent of the intrinsic decoherence envelope.
    #[serde(default = "default_stretch")]
    pub stretch_exponent: f64,
    /// Echo interrogation time, s.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Optical readout/repolarization time per cycle, s.
    #[serde(default = "default_tau_m")]
    pub tau_m: f64,
    /// Microwave control overhead per cycle, s.
    #[serde(default = "default_tau_2pi")]
    pub tau_2pi: f64,
    /// Θ above which a source counts as fast-fluctuation limit.
    #[serde(default = "default_theta_ffl")]
    pub theta_ffl: f64,
    /// Θ below which a source counts as slow-fluctuation limit.
    #[serde(default = "default_theta_sfl")]
    pub theta_sfl: f64,
}

fn default_t2() -> f64 {
    3.0e-4
}
fn default_stretch() -> f64 {
    3.0
}
fn default_tau() -> f64 {
    1.5e-4
}
fn default_tau_m() -> f64 {
    9.0e-7
}
fn default_tau_2pi() -> f64 {
    1.0e-7
}
fn default_theta_ffl() -> f64 {
    10.0
}
fn default_theta_sfl() -> f64 {
    0.1
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            h_p: 4.0e-9,
            t2: default_t2(),
            stretch_exponent: default_stretch(),
            tau: default_tau(),
            tau_m: default_tau_m(),
            tau_2pi: default_tau_2pi(),
            theta_ffl: default_theta_ffl(),
            theta_sfl: default_theta_sfl(),
        }
    }
}

/// Execution settings: randomness, record lengths, grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stochastic stage derives its own stream from it.
    pub seed: u64,
    /// Trajectories per Monte-Carlo envelope estimate.
    pub trajectories: usize,
    /// Duration of synthesized monitoring records, s.
    pub record_duration: f64,
    /// Mean dwell time between channel gating events, s.
    pub switch_mean_dwell: f64,
    /// Waiting-time statistics of the gating process.
    pub switch_waiting: SwitchWaiting,
    /// Scan grid edge length, pixels.
    pub grid_n: usize,
    /// Scan grid pitch, m.
    pub grid_pitch: f64,
    /// Dwell time per scan pixel, s.
    pub dwell: f64,
    /// Independent probe/channel layouts for wide-field contrast estimates.
    pub n_layouts: usize,
    /// Worker threads (0 = library/runtime default).
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            trajectories: 1000,
            record_duration: 0.5,
            switch_mean_dwell: 5.0e-3,
            switch_waiting: SwitchWaiting::Exponential,
            grid_n: 20,
            grid_pitch: 1.0e-9,
            dwell: 0.1,
            n_layouts: 8,
            threads: 0,
        }
    }
}

/// Full simulator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    pub probe: ProbeConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            constants: PhysicalConstants::default(),
            environment: EnvironmentConfig::default(),
            probe: ProbeConfig::default(),
            run: RunConfig::default(),
        }
    }
}

impl Config {
    /// Load a configuration file (JSON). Unknown fields are rejected.
    pub fn from_path(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Config = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Apply a `section.key=value` override.
    ///
    /// The value is interpreted as JSON when possible (numbers, booleans) and
    /// as a bare string otherwise, then the whole config is re-validated
    /// through its schema so type errors and unknown keys are caught.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut parts = key.splitn(2, '.');
        let section = parts.next().unwrap_or_default();
        let field = parts
            .next()
            .ok_or_else(|| ConfigError::BadOverrideKey(key.to_string()))?;
        if section.is_empty() || field.is_empty() || field.contains('.') {
            return Err(ConfigError::BadOverrideKey(key.to_string()));
        }

        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));

        let sec = tree
            .get_mut(section)
            .ok_or_else(|| ConfigError::BadOverrideValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: format!("unknown section {section:?}"),
            })?;
        let obj = sec.as_object_mut().expect("sections are objects");
        if !obj.contains_key(field) {
            return Err(ConfigError::BadOverrideValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: format!("unknown field {field:?} in section {section:?}"),
            });
        }
        obj.insert(field.to_string(), parsed);

        *self = serde_json::from_value(tree).map_err(|e| ConfigError::BadOverrideValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: e.to_string(),
        })?;
        Ok(())
    }

    /// Hard validation errors (nonsensical geometry/timing).
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.probe;
        if !(p.h_p.is_finite() && p.h_p > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "probe.h_p must be positive, got {}",
                p.h_p
            )));
        }
        if !(p.t2.is_finite() && p.t2 > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "probe.t2 must be positive, got {}",
                p.t2
            )));
        }
        if !(p.tau.is_finite() && p.tau > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "probe.tau must be positive, got {}",
                p.tau
            )));
        }
        if p.theta_sfl >= p.theta_ffl {
            return Err(ConfigError::Invalid(format!(
                "regime thresholds must satisfy theta_sfl < theta_ffl, got {} >= {}",
                p.theta_sfl, p.theta_ffl
            )));
        }
        if self.run.trajectories == 0 || self.run.grid_n == 0 || self.run.n_layouts == 0 {
            return Err(ConfigError::Invalid(
                "run.trajectories, run.grid_n and run.n_layouts must be nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Soft diagnostics: conditions under which results are still produced but
    /// the model is being stretched.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let c = &self.constants;
        let e = &self.environment;
        let h = self.probe.h_p;

        let sigma_w = crate::noise::sigma_water(h, e.n_ortho(), c.mu_p(), c.mu0_over_4pi);
        let shift = c.gamma_p * sigma_w;
        if shift > 1.0e-4 * c.d_crystal_field {
            out.push(format!(
                "magnetic noise amplitude is large: gamma_p*sigma_water = {:.3e} Hz exceeds \
                 1e-4 of the crystal-field splitting ({:.3e} Hz); the secular noise model \
                 is marginal at this standoff",
                shift,
                1.0e-4 * c.d_crystal_field
            ));
        }
        if self.probe.tau >= 0.95 * self.probe.t2 {
            out.push(format!(
                "tau = {:.3e} s is at or beyond 0.95*t2 = {:.3e} s; the intrinsic envelope \
                 dominates and population contrasts will be tiny",
                self.probe.tau,
                0.95 * self.probe.t2
            ));
        }
        out
    }

    /// Stable 64-bit fingerprint of the full configuration (FNV-1a over the
    /// canonical JSON serialization), reported in run manifests.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in text.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mut s = String::with_capacity(16);
        write!(s, "{hash:016x}").expect("write to string");
        s
    }
}
