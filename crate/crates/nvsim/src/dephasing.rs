//! Spin-echo dephasing envelopes.
//!
//! Every noise source is modeled as an Ornstein-Uhlenbeck field with RMS
//! amplitude σ and fluctuation rate f_e. Under a two-window echo the
//! accumulated phase variance has the closed form
//!
//! χ(t) = (γσ/f_e)² · K(f_e·t),  K(x) = x − 3 + 4e^(−x/2) − e^(−x),
//!
//! which interpolates between motional narrowing (χ → (γσ)²t/f_e for fast
//! noise) and cubic echo suppression (χ → (γσ)²f_e t³/12 for slow noise).
//! The envelope of a single source is D(t) = e^(−χ(t)); independent sources
//! multiply. The γ argument carries the phase convention: pass a cyclic rate
//! (Hz/T) for amplitudes calibrated that way, or an angular rate when
//! comparing against trajectory-level simulations that accumulate 2π-full
//! phase.

use serde::Serialize;

use crate::config::Config;
use crate::error::NvError;
use crate::noise;

/// Echo filter kernel K(x) = x − 3 + 4e^(−x/2) − e^(−x).
///
/// Evaluated by series below x = 0.05 where the closed form loses precision
/// to cancellation (K(x) ~ x³/12 against terms of order 1).
pub fn echo_kernel(x: f64) -> f64 {
    assert!(x >= 0.0, "kernel argument must be nonnegative");
    if x < 0.05 {
        // K(x) = x³/12 − x⁴/32 + 7x⁵/960 − x⁶/768 + O(x⁷)
        let x3 = x * x * x;
        x3 * (1.0 / 12.0 + x * (-1.0 / 32.0 + x * (7.0 / 960.0 - x / 768.0)))
    } else {
        x - 3.0 + 4.0 * (-0.5 * x).exp() - (-x).exp()
    }
}

/// Echo phase variance exponent χ(t) for an Ornstein-Uhlenbeck source.
pub fn echo_exponent(sigma: f64, f_e: f64, gamma: f64, t: f64) -> f64 {
    let a = gamma * sigma / f_e;
    a * a * echo_kernel(f_e * t)
}

/// Motional-narrowing (fast-fluctuation) dephasing rate Γ = (γσ)²/f_e.
pub fn ffl_rate(sigma: f64, f_e: f64, gamma: f64) -> f64 {
    let gs = gamma * sigma;
    gs * gs / f_e
}

/// `ffl_rate`, rejecting sources that are not actually in the fast regime.
pub fn ffl_rate_checked(
    sigma: f64,
    f_e: f64,
    gamma: f64,
    theta_ffl: f64,
) -> Result<f64, NvError> {
    let theta = noise::theta(f_e, gamma, sigma);
    if theta < theta_ffl {
        return Err(NvError::WrongRegime {
            theta,
            expected: format!("fast-fluctuation (theta >= {theta_ffl})"),
        });
    }
    Ok(ffl_rate(sigma, f_e, gamma))
}

/// Slow-fluctuation-limit dephasing rate for a quasi-static lateral bath,
/// Γ = 0.2973 · Θ^(−1/2) · f_e.
pub fn sfl_rate(theta: f64, f_e: f64) -> f64 {
    0.2973 * f_e / theta.sqrt()
}

/// `sfl_rate`, rejecting sources that are not actually in the slow regime.
pub fn sfl_rate_checked(theta: f64, f_e: f64, theta_sfl: f64) -> Result<f64, NvError> {
    if theta > theta_sfl {
        return Err(NvError::WrongRegime {
            theta,
            expected: format!("slow-fluctuation (theta <= {theta_sfl})"),
        });
    }
    Ok(sfl_rate(theta, f_e))
}

/// Spin population from a coherence envelope: P = (1 + D)/2.
pub fn population(envelope: f64) -> f64 {
    0.5 * (1.0 + envelope)
}

/// Coherence envelope from a spin population: D = 2P − 1.
pub fn envelope_from_population(p: f64) -> f64 {
    2.0 * p - 1.0
}

/// One background noise contribution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BackgroundSource {
    pub label: &'static str,
    /// RMS field amplitude (or Stark-equivalent field), T.
    pub sigma: f64,
    /// Fluctuation rate, Hz.
    pub f_e: f64,
}

/// Everything that dephases the probe whether or not the channel conducts:
/// water, lipid, interfacial charge, plus the intrinsic stretched-exponential
/// envelope e^(−(t/T2)^n) of the probe itself.
#[derive(Debug, Clone, Serialize)]
pub struct BackgroundSet {
    pub sources: Vec<BackgroundSource>,
    pub t2: f64,
    pub stretch_exponent: f64,
    /// Coupling rate used for every source, Hz/T (cyclic convention).
    pub gamma: f64,
}

impl BackgroundSet {
    /// Total background exponent at interrogation time `t`.
    pub fn exponent(&self, t: f64) -> f64 {
        let mut chi: f64 = self
            .sources
            .iter()
            .map(|s| echo_exponent(s.sigma, s.f_e, self.gamma, t))
            .sum();
        chi += (t / self.t2).powf(self.stretch_exponent);
        chi
    }

    /// Exponent of the environmental sources only (no intrinsic term).
    pub fn environmental_exponent(&self, t: f64) -> f64 {
        self.sources
            .iter()
            .map(|s| echo_exponent(s.sigma, s.f_e, self.gamma, t))
            .sum()
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (-self.exponent(t)).exp()
    }
}

/// The conducting channel as a noise source, with its calibration factor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChannelNoise {
    pub sigma: f64,
    pub f_e: f64,
    pub c_ic: f64,
    pub gamma: f64,
}

impl ChannelNoise {
    pub fn exponent(&self, t: f64) -> f64 {
        self.c_ic * echo_exponent(self.sigma, self.f_e, self.gamma, t)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (-self.exponent(t)).exp()
    }
}

/// Detection model: background plus switchable channel.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionModel {
    pub background: BackgroundSet,
    pub channel: ChannelNoise,
}

impl DetectionModel {
    /// Envelope with the channel closed.
    pub fn d_off(&self, t: f64) -> f64 {
        self.background.envelope(t)
    }

    /// Envelope with the channel open.
    pub fn d_on(&self, t: f64) -> f64 {
        self.background.envelope(t) * self.channel.envelope(t)
    }

    pub fn p_off(&self, t: f64) -> f64 {
        population(self.d_off(t))
    }

    pub fn p_on(&self, t: f64) -> f64 {
        population(self.d_on(t))
    }

    /// Population contrast between channel states.
    pub fn delta_p(&self, t: f64) -> f64 {
        0.5 * (self.d_off(t) - self.d_on(t))
    }
}

/// Build the detection model for a probe at standoff `h` with the channel at
/// line-of-sight distance `channel_distance` (both m).
///
/// For the on-axis geometry the two distances coincide; scanning geometries
/// keep the backgrounds pinned to the standoff while the channel recedes.
pub fn detection_model_at(cfg: &Config, h: f64, channel_distance: f64) -> DetectionModel {
    let c = &cfg.constants;
    let e = &cfg.environment;
    let p = &cfg.probe;

    let q2 = noise::charge_variance(
        h,
        e.debye_length,
        e.temperature,
        e.electrolyte_diffusion,
        c.k_b,
    );
    let sigma_e = noise::sigma_efield(h, e.c_e, q2, e.epsilon_r, c.epsilon_0);

    let background = BackgroundSet {
        sources: vec![
            BackgroundSource {
                label: "water",
                sigma: noise::sigma_water(h, e.n_ortho(), c.mu_p(), c.mu0_over_4pi),
                f_e: noise::fe_water(e.water_diffusion, h),
            },
            BackgroundSource {
                label: "lipid",
                sigma: noise::sigma_lipid(h, e.lipid_proton_density, c.mu_p(), c.mu0_over_4pi),
                f_e: noise::fe_lipid(e.lipid_diffusion, e.lipid_correlation_length),
            },
            BackgroundSource {
                label: "charge",
                sigma: noise::stark_equivalent_field(sigma_e, c.r_3d, c.gamma_p),
                f_e: noise::fe_efield(e.epsilon_r, c.epsilon_0, e.resistivity),
            },
        ],
        t2: p.t2,
        stretch_exponent: p.stretch_exponent,
        gamma: c.gamma_p,
    };

    let channel = ChannelNoise {
        sigma: noise::sigma_ion_channel(
            channel_distance,
            e.n_ion,
            e.mu_ion,
            e.n_h2o,
            e.mu_h2o,
            c.mu0_over_4pi,
        ),
        f_e: noise::fe_ion_channel(e.ion_flux, e.aperture_radius, e.ion_fe_scale),
        c_ic: e.c_ic,
        gamma: c.gamma_p,
    };

    DetectionModel {
        background,
        channel,
    }
}

/// Detection model with the channel directly under the probe.
pub fn detection_model(cfg: &Config, h: f64) -> DetectionModel {
    detection_model_at(cfg, h, h)
}
