//! Measurement planning: how long must one integrate to see a channel gate?
//!
//! A single echo cycle yields one bit with success probability p_off or p_on.
//! Distinguishing the two at unit signal-to-noise requires
//! N_τ ≈ 1/ΔP² cycles, i.e. a temporal resolution of
//! δt = (τ + τ_m)/ΔP(τ)². The interrogation time trades contrast against
//! cycle duration; this module scans and optimizes that trade-off, and
//! carries the analogous contrast model for a dense probe layer imaged in
//! wide field.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::constants::PhysicalConstants;
use crate::dephasing::{self, DetectionModel};
use crate::rng::stream_rng;
use rand::Rng;

/// Time to resolve a population step ΔP at unit SNR, s.
pub fn temporal_resolution(delta_p: f64, tau: f64, tau_m: f64) -> f64 {
    (tau + tau_m) / (delta_p * delta_p)
}

/// Number of averaging cycles per resolved data point.
pub fn cycles_per_point(resolution: f64, tau: f64, tau_m: f64) -> u64 {
    (resolution / (tau + tau_m)).ceil() as u64
}

/// One point of a planning scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanPoint {
    pub tau: f64,
    pub p_off: f64,
    pub p_on: f64,
    pub delta_p: f64,
    pub resolution: f64,
    pub n_tau: u64,
}

/// Evaluate the resolution curve over a set of interrogation times.
pub fn resolution_curve(model: &DetectionModel, tau_m: f64, taus: &[f64]) -> Vec<PlanPoint> {
    taus.iter()
        .map(|&tau| {
            let delta_p = model.delta_p(tau);
            let resolution = temporal_resolution(delta_p, tau, tau_m);
            PlanPoint {
                tau,
                p_off: model.p_off(tau),
                p_on: model.p_on(tau),
                delta_p,
                resolution,
                n_tau: cycles_per_point(resolution, tau, tau_m),
            }
        })
        .collect()
}

/// Golden-section minimization of the temporal resolution over `tau`.
///
/// Assumes a unimodal objective on `[lo, hi]` (true for these envelopes:
/// contrast vanishes as τ³ at short times and is crushed by background decay
/// at long times). Returns `(tau_star, resolution_star)`.
pub fn optimize_tau(
    model: &DetectionModel,
    tau_m: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> (f64, f64) {
    assert!(lo > 0.0 && hi > lo, "need 0 < lo < hi");
    let objective = |tau: f64| temporal_resolution(model.delta_p(tau), tau, tau_m);
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while (b - a) > tol * (a + b) {
        // Ties shrink the right bound: past the background-limited time both
        // envelopes underflow to zero and the objective plateaus at +inf, so
        // an equal pair must steer the bracket back toward finite territory.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let tau = 0.5 * (a + b);
    (tau, objective(tau))
}

/// Time at which the environmental background exponent alone reaches 1.
///
/// Beyond a few of these the intrinsic coherence time no longer matters:
/// the environment, not the probe, limits the measurement.
pub fn background_limit_time(model: &DetectionModel) -> f64 {
    let f = |t: f64| model.background.environmental_exponent(t) - 1.0;
    let mut lo = 1.0e-9;
    let mut hi = 1.0e-9;
    while f(hi) < 0.0 {
        hi *= 2.0;
        assert!(hi < 1.0e3, "background never reaches unit exponent");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dipolar decoherence rate of a probe layer of density `n_nv` (m⁻³) on its
/// own members: Γ_nv = (√(2π)/3) · (ħ μ0/4π) · γ² · n_nv, with γ angular.
pub fn ensemble_rate(n_nv: f64, c: &PhysicalConstants) -> f64 {
    let gamma = c.gamma_p_angular();
    (2.0 * std::f64::consts::PI).sqrt() / 3.0 * c.hbar * c.mu0_over_4pi * gamma * gamma * n_nv
}

/// Characteristic probe-probe coupling (Hz) at density `n_nv`; must stay
/// far below the control bandwidth for the layer to behave as independent
/// sensors.
pub fn coupling_scale(n_nv: f64, c: &PhysicalConstants) -> f64 {
    let gamma = c.gamma_p_angular();
    c.hbar * c.mu0_over_4pi * gamma * gamma * n_nv
}

/// Wide-field pixel contrast scan.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleScan {
    /// Interrogation times, s.
    pub taus: Vec<f64>,
    /// Mean pixel contrast at each τ, percent of full signal.
    pub contrast: Vec<f64>,
    /// Standard error over layouts, percent.
    pub std_err: Vec<f64>,
    /// τ with maximal contrast, s.
    pub tau_star: f64,
    /// Contrast at the optimum, percent.
    pub contrast_star: f64,
    /// Standard error at the optimum, percent.
    pub std_err_star: f64,
    pub layouts: usize,
}

/// Contrast between all-channels-open and all-channels-closed frames for one
/// wide-field pixel, Monte-Carlo averaged over probe and channel layouts.
///
/// The membrane occupies a patch covering `membrane_coverage` of the pixel
/// area; channels sit only inside it, at areal density `channel_density`.
/// Each probe in the layer decoheres at a rate G_i set by the summed channel
/// field amplitudes at its position (strong-coupling regime: rate ∝ field),
/// on top of the probe-probe rate Γ_nv and the ordinary backgrounds:
///
/// ΔΦ(τ) = 100 · ⟨ ½ D_bg(τ) e^(−Γ_nv τ) (1 − e^(−G_i τ)) ⟩ over probes.
///
/// Probes far outside the membrane patch stay coherent in both frames; that
/// geometric dilution, not the rate normalization, caps the contrast.
pub fn pixel_contrast_scan(cfg: &Config, pixel_edge: f64, taus: &[f64]) -> EnsembleScan {
    let c = &cfg.constants;
    let e = &cfg.environment;
    let gamma_ang = c.gamma_p_angular();
    let gamma_nv = ensemble_rate(e.n_nv, c);
    let layouts = cfg.run.n_layouts;
    let seed = cfg.run.seed;

    // Field-amplitude kernel of a single channel: sigma(d) = k_sigma / d³.
    let sigma_ref = crate::noise::sigma_ion_channel(
        1.0e-9, e.n_ion, e.mu_ion, e.n_h2o, e.mu_h2o, c.mu0_over_4pi,
    );
    let k_sigma = sigma_ref * 1.0e-27;

    // Background envelope at the probe standoff (layer is thin; evaluate at
    // its top surface where the contribution is largest).
    let model = dephasing::detection_model(cfg, cfg.probe.h_p);

    let n_probes = (e.n_nv * pixel_edge * pixel_edge * e.nv_layer_thickness).round() as usize;
    assert!(
        e.membrane_coverage > 0.0 && e.membrane_coverage <= 1.0,
        "membrane coverage must be a fraction of the pixel area"
    );
    let patch_edge = e.membrane_coverage.sqrt() * pixel_edge;
    let patch_origin = 0.5 * (pixel_edge - patch_edge);
    let n_channels = (e.channel_density * patch_edge * patch_edge).round() as usize;

    // Per-layout contrast curves.
    let curves: Vec<Vec<f64>> = (0..layouts)
        .into_par_iter()
        .map(|layout| {
            let mut rng = stream_rng(seed, 0x4000_0000 + layout as u64);
            // Channel positions inside the membrane patch.
            let chans: Vec<(f64, f64)> = (0..n_channels)
                .map(|_| {
                    (
                        patch_origin + patch_edge * rng.random::<f64>(),
                        patch_origin + patch_edge * rng.random::<f64>(),
                    )
                })
                .collect();
            // Probe positions, depths, and orientation projections.
            let mut rates = Vec::with_capacity(n_probes);
            for _ in 0..n_probes {
                let x = pixel_edge * rng.random::<f64>();
                let y = pixel_edge * rng.random::<f64>();
                let z = cfg.probe.h_p + e.nv_layer_thickness * rng.random::<f64>();
                let kappa = rng.random::<f64>();
                let mut sigma_sum = 0.0;
                for &(cx, cy) in &chans {
                    let (dx, dy) = (x - cx, y - cy);
                    let d2 = dx * dx + dy * dy + z * z;
                    sigma_sum += k_sigma / (d2 * d2.sqrt());
                }
                rates.push(e.c_ens * gamma_ang * sigma_sum * kappa);
            }
            taus.iter()
                .map(|&tau| {
                    let d_bg = model.d_off(tau) * (-gamma_nv * tau).exp();
                    let mean_blocked: f64 = rates
                        .iter()
                        .map(|&g| 1.0 - (-g * tau).exp())
                        .sum::<f64>()
                        / n_probes as f64;
                    100.0 * 0.5 * d_bg * mean_blocked
                })
                .collect()
        })
        .collect();

    let mut contrast = Vec::with_capacity(taus.len());
    let mut std_err = Vec::with_capacity(taus.len());
    for i in 0..taus.len() {
        let vals: Vec<f64> = curves.iter().map(|c| c[i]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (vals.len() as f64 - 1.0).max(1.0);
        contrast.push(mean);
        std_err.push((var / vals.len() as f64).sqrt());
    }

    let mut best = 0;
    for i in 0..contrast.len() {
        if contrast[i] > contrast[best] {
            best = i;
        }
    }
    EnsembleScan {
        tau_star: taus[best],
        contrast_star: contrast[best],
        std_err_star: std_err[best],
        taus: taus.to_vec(),
        contrast,
        std_err,
        layouts,
    }
}

/// Default τ grid for ensemble scans: log-spaced through the microsecond range.
pub fn ensemble_tau_grid() -> Vec<f64> {
    log_spaced(1.0e-7, 1.0e-5, 41)
}

/// `n` logarithmically spaced points over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` linearly spaced points over `[lo, hi]`.
pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
