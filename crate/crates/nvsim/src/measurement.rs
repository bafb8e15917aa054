//! Repeated single-shot readout of the probe and telegraph-signal analysis.
//!
//! A monitoring run strings echo cycles together: each cycle interrogates for
//! `tau`, spends `tau_m` on optical readout/repolarization and `tau_2pi` on
//! control overhead, and yields one Bernoulli bit whose success probability is
//! the current spin population. Channel gating toggles that population between
//! its closed- and open-state values, so the bit stream is a noisy random
//! telegraph signal. This module synthesizes such records and provides the
//! smoothing, threshold-detection, and spectral tools used to read them.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::ProbeConfig;

/// Waiting-time statistics of channel gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchWaiting {
    /// Memoryless gating: exponential dwell times.
    Exponential,
    /// Clock-like gating: every dwell lasts exactly the mean.
    Periodic,
}

/// Durations making up one measurement cycle.
#[derive(Debug, Clone, Copy)]
pub struct CycleTiming {
    pub tau: f64,
    pub tau_m: f64,
    pub tau_2pi: f64,
}

impl CycleTiming {
    pub fn from_probe(p: &ProbeConfig) -> CycleTiming {
        CycleTiming {
            tau: p.tau,
            tau_m: p.tau_m,
            tau_2pi: p.tau_2pi,
        }
    }

    /// Full duration of one cycle, s.
    pub fn cycle(&self) -> f64 {
        self.tau + self.tau_m + self.tau_2pi
    }

    /// Measurement rate, Hz.
    pub fn rate(&self) -> f64 {
        1.0 / self.cycle()
    }

    /// Duration of one averaged data point built from `n_tau` cycles, s.
    /// Control overhead is interleaved with readout and does not count.
    pub fn point_duration(&self, n_tau: u64) -> f64 {
        n_tau as f64 * (self.tau + self.tau_m)
    }
}

/// Generate channel gating times in `(0, duration)`.
///
/// The channel starts closed; each returned time toggles the state.
pub fn switch_times<R: Rng>(
    duration: f64,
    mean_dwell: f64,
    waiting: SwitchWaiting,
    rng: &mut R,
) -> Vec<f64> {
    let mut times = Vec::new();
    let mut t = 0.0;
    match waiting {
        SwitchWaiting::Periodic => loop {
            t += mean_dwell;
            if t >= duration {
                break;
            }
            times.push(t);
        },
        SwitchWaiting::Exponential => {
            let exp = Exp::new(1.0 / mean_dwell).expect("positive rate");
            loop {
                t += exp.sample(rng);
                if t >= duration {
                    break;
                }
                times.push(t);
            }
        }
    }
    times
}

/// A synthesized monitoring record.
#[derive(Debug, Clone)]
pub struct TelegraphRecord {
    /// Time stamp of each cycle, s.
    pub times: Vec<f64>,
    /// True channel state at each cycle.
    pub open: Vec<bool>,
    /// Readout bit for each cycle (0.0 or 1.0).
    pub bits: Vec<f64>,
    /// Population in the closed state.
    pub p_closed: f64,
    /// Population in the open state.
    pub p_open: f64,
    /// Measurement rate, Hz.
    pub sample_rate: f64,
}

impl TelegraphRecord {
    /// Detection threshold halfway between the two state populations.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.p_closed + self.p_open)
    }
}

/// Synthesize a record of Bernoulli readouts under a gating sequence.
pub fn synthesize_record<R: Rng>(
    p_closed: f64,
    p_open: f64,
    timing: &CycleTiming,
    duration: f64,
    switches: &[f64],
    rng: &mut R,
) -> TelegraphRecord {
    let cycle = timing.cycle();
    let n = (duration / cycle).floor() as usize;
    let mut times = Vec::with_capacity(n);
    let mut open = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * cycle;
        // Parity of the number of toggles before t gives the state.
        let flips = switches.partition_point(|&s| s <= t);
        let is_open = flips % 2 == 1;
        let p = if is_open { p_open } else { p_closed };
        let bit = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        times.push(t);
        open.push(is_open);
        bits.push(bit);
    }
    TelegraphRecord {
        times,
        open,
        bits,
        p_closed,
        p_open,
        sample_rate: timing.rate(),
    }
}

/// Centered running average with window `w` samples (edges clamp the window).
pub fn running_average(x: &[f64], w: usize) -> Vec<f64> {
    assert!(w > 0, "window must be nonzero");
    let n = x.len();
    let half = w / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + w - half).min(n);
        let sum: f64 = x[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    out
}

/// A detected gating event.
#[derive(Debug, Clone, Copy)]
pub struct SwitchEvent {
    /// Time of the detected crossing, s.
    pub time: f64,
    /// Whether the detector inferred a closed→open transition.
    pub opened: bool,
}

/// Threshold detector on a smoothed record.
///
/// The open state sits *below* the threshold (channel noise destroys signal).
/// A state flip is accepted only after `debounce` consecutive samples on the
/// new side, and is stamped with the time of the first crossing sample.
pub fn detect_switches(
    smoothed: &[f64],
    times: &[f64],
    threshold: f64,
    debounce: usize,
) -> Vec<SwitchEvent> {
    assert_eq!(smoothed.len(), times.len());
    let mut events = Vec::new();
    if smoothed.is_empty() {
        return events;
    }
    let mut state_open = smoothed[0] < threshold;
    let mut run_start: Option<usize> = None;
    let mut run_len = 0usize;
    for i in 1..smoothed.len() {
        let below = smoothed[i] < threshold;
        if below != state_open {
            if run_len == 0 {
                run_start = Some(i);
            }
            run_len += 1;
            if run_len >= debounce.max(1) {
                let start = run_start.expect("run started");
                state_open = below;
                events.push(SwitchEvent {
                    time: times[start],
                    opened: state_open,
                });
                run_len = 0;
                run_start = None;
            }
        } else {
            run_len = 0;
            run_start = None;
        }
    }
    events
}

/// For each true gating time, the delay until the first detection at or after
/// it (unmatched events and truths are dropped).
pub fn detection_delays(true_times: &[f64], events: &[SwitchEvent]) -> Vec<f64> {
    let mut delays = Vec::new();
    for &t in true_times {
        if let Some(e) = events.iter().find(|e| e.time >= t) {
            delays.push(e.time - t);
        }
    }
    delays
}

/// One-sided power spectrum of a mean-removed record.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Frequencies, Hz (DC excluded).
    pub freqs: Vec<f64>,
    /// Power per bin, |X_k|²/n.
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Frequency and power of the strongest bin.
    pub fn peak(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, p) in self.power.iter().enumerate() {
            if *p > self.power[best] {
                best = i;
            }
        }
        (self.freqs[best], self.power[best])
    }

    /// Median bin power (noise-floor estimate).
    pub fn median_power(&self) -> f64 {
        let mut sorted = self.power.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite powers"));
        let n = sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    }
}

/// Compute the one-sided power spectrum of `samples` at `sample_rate`.
pub fn power_spectrum(samples: &[f64], sample_rate: f64) -> Spectrum {
    let n = samples.len();
    assert!(n >= 4, "record too short for a spectrum");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut buf);
    let mut freqs = Vec::with_capacity(n / 2);
    let mut power = Vec::with_capacity(n / 2);
    for (k, value) in buf.iter().enumerate().take(n / 2).skip(1) {
        freqs.push(k as f64 * sample_rate / n as f64);
        power.push(value.norm_sqr() / n as f64);
    }
    Spectrum { freqs, power }
}
