//! Magnetic and electric noise sources seen by the probe spin.
//!
//! Each environmental source is reduced to two numbers: an RMS field
//! amplitude `sigma` (T) at the probe position and a fluctuation rate `f_e`
//! (Hz). Their ratio Θ = f_e / (γ·σ) decides which dephasing regime the
//! source sits in. The amplitude formulas are closed-form integrals over the
//! relevant dipole distributions; each takes its inputs explicitly so that it
//! can be evaluated (and tested) independent of any configuration.

use serde::Serialize;

use crate::config::Config;

/// Fluctuation regime of a noise source relative to the probe coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Θ ≥ threshold: fluctuations average out, dephasing is motionally narrowed.
    FastFluctuation,
    /// Intermediate Θ: neither limit applies.
    Crossover,
    /// Θ ≤ threshold: field is quasi-static over a coupling period.
    SlowFluctuation,
}

impl Regime {
    /// Classify a source by Θ against the configured thresholds.
    pub fn classify(theta: f64, theta_ffl: f64, theta_sfl: f64) -> Regime {
        if theta >= theta_ffl {
            Regime::FastFluctuation
        } else if theta <= theta_sfl {
            Regime::SlowFluctuation
        } else {
            Regime::Crossover
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::FastFluctuation => "fast",
            Regime::Crossover => "crossover",
            Regime::SlowFluctuation => "slow",
        }
    }
}

/// A fully characterized noise source.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseSource {
    pub label: &'static str,
    /// RMS field amplitude at the probe, T.
    pub sigma: f64,
    /// Fluctuation rate, Hz.
    pub f_e: f64,
    /// Θ = f_e / (γ_p σ).
    pub theta: f64,
    pub regime: Regime,
}

/// Θ = f_e / (γ σ): fluctuation rate in units of the coupling strength.
pub fn theta(f_e: f64, gamma: f64, sigma: f64) -> f64 {
    f_e / (gamma * sigma)
}

/// RMS field of the ion/water column inside a channel at distance `h`.
///
/// The channel contents act as a point cluster of `n_ion` ions and `n_h2o`
/// ortho-water molecules with uncorrelated orientations:
/// σ = (μ0/4π) √(n_ion μ_ion² + n_h2o μ_h2o²) / h³.
pub fn sigma_ion_channel(
    h: f64,
    n_ion: f64,
    mu_ion: f64,
    n_h2o: f64,
    mu_h2o: f64,
    mu0_over_4pi: f64,
) -> f64 {
    mu0_over_4pi * (n_ion * mu_ion * mu_ion + n_h2o * mu_h2o * mu_h2o).sqrt() / (h * h * h)
}

/// Fluctuation rate of the channel field.
///
/// Raw aperture throughput (flux × area) rescaled by `scale`, which absorbs
/// the correlated, single-file character of transport through the pore.
pub fn fe_ion_channel(flux: f64, aperture_radius: f64, scale: f64) -> f64 {
    flux * std::f64::consts::PI * aperture_radius * aperture_radius * scale
}

/// RMS field of diffusing ortho-water protons filling the half-space beyond `h`:
/// σ = (μ0/2π) μ_p √(n_ortho π / h³).
pub fn sigma_water(h: f64, n_ortho: f64, mu_p: f64, mu0_over_4pi: f64) -> f64 {
    2.0 * mu0_over_4pi * mu_p * (n_ortho * std::f64::consts::PI / (h * h * h)).sqrt()
}

/// Fluctuation rate of the water bath: time to diffuse across the standoff,
/// f_e = D / (2h)².
pub fn fe_water(diffusion: f64, h: f64) -> f64 {
    diffusion / (4.0 * h * h)
}

/// RMS field of lipid head-group protons in the membrane below the probe:
/// σ = (μ0/8π) μ_p √(5 n_H π / (4 h³)).
pub fn sigma_lipid(h: f64, n_h: f64, mu_p: f64, mu0_over_4pi: f64) -> f64 {
    0.5 * mu0_over_4pi
        * mu_p
        * (5.0 * n_h * std::f64::consts::PI / (4.0 * h * h * h)).sqrt()
}

/// Fluctuation rate of lateral lipid motion, f_e = D_L / (2ℓ)².
pub fn fe_lipid(diffusion: f64, correlation_length: f64) -> f64 {
    diffusion / (4.0 * correlation_length * correlation_length)
}

/// Variance of the screened interfacial charge seen at distance `h`.
///
/// Debye–Hückel form; the bracket is clamped at zero since at extreme
/// screening the subtraction can go numerically negative.
pub fn charge_variance(
    h: f64,
    debye_length: f64,
    temperature: f64,
    electrolyte_diffusion: f64,
    k_b: f64,
) -> f64 {
    let kappa = 1.0 / debye_length;
    let x = kappa * h;
    let bracket = (h * x.cosh() - x.sinh() / kappa).max(0.0);
    electrolyte_diffusion * k_b * temperature * (1.0 + x) * (-x).exp() * bracket
}

/// RMS electric field of interfacial charge fluctuations, V/m:
/// σ_E = c_E √⟨Q²⟩ / (4π ε0 ε_r h²).
pub fn sigma_efield(h: f64, c_e: f64, q_variance: f64, epsilon_r: f64, epsilon_0: f64) -> f64 {
    c_e * q_variance.sqrt()
        / (4.0 * std::f64::consts::PI * epsilon_0 * epsilon_r * h * h)
}

/// Dielectric relaxation rate of the electrolyte, f_e = 1/(ε_r ε0 ρ).
pub fn fe_efield(epsilon_r: f64, epsilon_0: f64, resistivity: f64) -> f64 {
    1.0 / (epsilon_r * epsilon_0 * resistivity)
}

/// Magnetic-field equivalent of an electric-field amplitude through the
/// probe's Stark response: B_eff = R σ_E / γ_p.
pub fn stark_equivalent_field(sigma_e: f64, r_3d: f64, gamma_p: f64) -> f64 {
    r_3d * sigma_e / gamma_p
}

/// Evaluate every noise source at standoff `h` (m) under a configuration.
///
/// Order: ion channel, water, lipid, interfacial charge.
pub fn evaluate_sources(cfg: &Config, h: f64) -> Vec<NoiseSource> {
    let c = &cfg.constants;
    let e = &cfg.environment;
    let p = &cfg.probe;
    let gamma = c.gamma_p;

    let mut out = Vec::with_capacity(4);

    let sigma = sigma_ion_channel(h, e.n_ion, e.mu_ion, e.n_h2o, e.mu_h2o, c.mu0_over_4pi);
    let f_e = fe_ion_channel(e.ion_flux, e.aperture_radius, e.ion_fe_scale);
    let th = theta(f_e, gamma, sigma);
    out.push(NoiseSource {
        label: "ion_channel",
        sigma,
        f_e,
        theta: th,
        regime: Regime::classify(th, p.theta_ffl, p.theta_sfl),
    });

    let sigma = sigma_water(h, e.n_ortho(), c.mu_p(), c.mu0_over_4pi);
    let f_e = fe_water(e.water_diffusion, h);
    let th = theta(f_e, gamma, sigma);
    out.push(NoiseSource {
        label: "water",
        sigma,
        f_e,
        theta: th,
        regime: Regime::classify(th, p.theta_ffl, p.theta_sfl),
    });

    let sigma = sigma_lipid(h, e.lipid_proton_density, c.mu_p(), c.mu0_over_4pi);
    let f_e = fe_lipid(e.lipid_diffusion, e.lipid_correlation_length);
    let th = theta(f_e, gamma, sigma);
    out.push(NoiseSource {
        label: "lipid",
        sigma,
        f_e,
        theta: th,
        regime: Regime::classify(th, p.theta_ffl, p.theta_sfl),
    });

    let q2 = charge_variance(
        h,
        e.debye_length,
        e.temperature,
        e.electrolyte_diffusion,
        c.k_b,
    );
    let se = sigma_efield(h, e.c_e, q2, e.epsilon_r, c.epsilon_0);
    let sigma = stark_equivalent_field(se, c.r_3d, gamma);
    let f_e = fe_efield(e.epsilon_r, c.epsilon_0, e.resistivity);
    let th = theta(f_e, gamma, sigma);
    out.push(NoiseSource {
        label: "charge",
        sigma,
        f_e,
        theta: th,
        regime: Regime::classify(th, p.theta_ffl, p.theta_sfl),
    });

    out
}
