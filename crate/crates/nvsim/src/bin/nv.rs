//! Command-line front end for the decoherence-probe simulator.
//!
//! Every subcommand loads one configuration (file + `--set` overrides),
//! runs one simulation, writes diffable CSV/PGM outputs, and records a JSON
//! manifest next to the primary output. Given identical configuration and
//! seed, the data files are byte-identical regardless of thread count.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 runtime
//! error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nvsim::config::{Config, ConfigError};
use nvsim::dephasing::{detection_model, echo_exponent, DetectionModel};
use nvsim::imaging::{acquisition_time, analyze, scan_image, write_pgm, ScanImage};
use nvsim::measurement::{
    detect_switches, detection_delays, power_spectrum, running_average, switch_times,
    synthesize_record, CycleTiming, SwitchWaiting, TelegraphRecord,
};
use nvsim::montecarlo::{envelope_scan, OrnsteinUhlenbeck, ShotNoiseChannel, SlabBath};
use nvsim::noise::{evaluate_sources, sigma_ion_channel, NoiseSource};
use nvsim::planner::{
    background_limit_time, coupling_scale, ensemble_rate, ensemble_tau_grid, lin_spaced,
    log_spaced, optimize_tau, pixel_contrast_scan, resolution_curve, temporal_resolution,
};
use nvsim::report::{csv_cell, manifest_path_for, write_csv, write_table, RunManifest};
use nvsim::rng::stream_rng;
use nvsim::NvError;

/// Stream ids for the CLI's own random draws. Library components own the
/// 0x4000_0000+ (planner layouts) and 0x7000_0000+ (scan pixels) ranges.
const TRACE_STREAM: u64 = 0x1000_0000;
const MONITOR_SWITCH_STREAM: u64 = 0x2000_0000;
const MONITOR_BIT_STREAM: u64 = 0x2000_0001;
const RECORD_STREAM_BASE: u64 = 0x3000_0000;

#[derive(Parser)]
#[command(
    name = "nv",
    version,
    about = "Nanoscale decoherence-probe simulator: noise sources, coherence \
             envelopes, gating monitors, scans, and planning tools",
    max_term_width = 100
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON configuration file (built-in defaults when omitted)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration value, e.g. --set probe.h_p=3e-9 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", action = clap::ArgAction::Append)]
    set: Vec<String>,

    /// Master random seed (overrides run.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads: 0 = automatic (overrides NV_SIM_THREADS, then run.threads)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Primary output path (each subcommand has a default)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Particle baths the `trace` subcommand can sample.
#[derive(ValueEnum, Clone, Copy, Debug)]
enum FieldSource {
    /// Diffusing ortho-water hydrogen bath
    Water,
    /// Laterally diffusing membrane proton bath
    Lipid,
    /// Shot-noise ion occupancy of a conducting channel
    Channel,
}

/// Noise sources the `envelope-mc` subcommand can simulate.
#[derive(ValueEnum, Clone, Copy, Debug)]
enum NoiseKind {
    Channel,
    Water,
    Lipid,
    Charge,
}

/// Named result bundles for `reproduce`.
#[derive(ValueEnum, Clone, Copy, Debug)]
enum FigureId {
    /// Field amplitude vs standoff for all sources
    #[value(name = "2b")]
    F2b,
    /// Fluctuation parameter Θ vs standoff for all sources
    #[value(name = "2c")]
    F2c,
    /// Grid scans of one channel at three dwell times
    #[value(name = "3")]
    F3,
    /// Optimal temporal resolution vs intrinsic coherence time
    #[value(name = "4b")]
    F4b,
    /// Temporal resolution vs interrogation time
    #[value(name = "4c")]
    F4c,
    /// Gating records and their power spectra vs standoff
    #[value(name = "5")]
    F5,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the noise sources at the configured standoff
    Sources,

    /// Analytic coherence envelopes and populations vs interrogation time
    Envelopes {
        /// Number of interrogation times
        #[arg(long, default_value_t = 80)]
        points: usize,
    },

    /// Sampled magnetic-field trace from an explicit particle bath
    Trace {
        /// Which bath to sample
        #[arg(long, value_enum)]
        source: FieldSource,
        /// Probe standoff, m (defaults to probe.h_p)
        #[arg(long)]
        h: Option<f64>,
        /// Trace duration, s
        #[arg(long, default_value_t = 1.0e-3)]
        duration: f64,
        /// Recorded samples (diffusing baths advance one step per sample, so
        /// coarse sampling yields independent stationary draws)
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },

    /// Monte-Carlo echo envelope for one noise source
    #[command(name = "envelope-mc")]
    EnvelopeMc {
        /// Which source to simulate
        #[arg(long, value_enum, default_value_t = NoiseKind::Channel)]
        source: NoiseKind,
        /// Trajectories per point (defaults to run.trajectories)
        #[arg(long)]
        traj: Option<usize>,
        /// Comma-separated interrogation times, s (auto grid when omitted)
        #[arg(long = "tau-grid", value_delimiter = ',', num_args = 1..)]
        tau_grid: Option<Vec<f64>>,
        /// Points in the automatic grid
        #[arg(long, default_value_t = 20)]
        points: usize,
    },

    /// Synthesize and analyze a channel-gating monitor record
    Monitor {
        /// Measurement cycles per displayed point (smoothing window)
        #[arg(long = "n-tau", default_value_t = 20)]
        n_tau: usize,
    },

    /// Interrogation-time planning: populations, contrast, temporal resolution
    Plan {
        /// Number of interrogation times
        #[arg(long, default_value_t = 60)]
        points: usize,
    },

    /// Wide-field ensemble contrast vs interrogation time
    Ensemble {
        /// Pixel edge length, m
        #[arg(long, default_value_t = 4.0e-7)]
        pixel: f64,
    },

    /// Grid scan over a single channel: graymap image plus raw estimates
    Scan {
        /// Per-pixel dwell time, s (defaults to run.dwell)
        #[arg(long)]
        dwell: Option<f64>,
        /// Grid side length in pixels (defaults to run.grid_n)
        #[arg(long)]
        grid: Option<usize>,
    },

    /// Regenerate a named result bundle (CSV/PGM files plus a JSON summary)
    Reproduce {
        /// Bundle id
        #[arg(long, value_enum)]
        figure: FigureId,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                NvError::Config(_) => 3,
                _ => 4,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), NvError> {
    let started = Instant::now();

    let mut cfg = match &cli.global.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    for kv in &cli.global.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverrideKey(kv.clone()))?;
        cfg.apply_override(key, value)?;
    }
    if let Some(seed) = cli.global.seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    configure_threads(cli.global.threads, &cfg);

    let name = match &cli.cmd {
        Cmd::Sources => "sources",
        Cmd::Envelopes { .. } => "envelopes",
        Cmd::Trace { .. } => "trace",
        Cmd::EnvelopeMc { .. } => "envelope-mc",
        Cmd::Monitor { .. } => "monitor",
        Cmd::Plan { .. } => "plan",
        Cmd::Ensemble { .. } => "ensemble",
        Cmd::Scan { .. } => "scan",
        Cmd::Reproduce { .. } => "reproduce",
    };

    let out = cli.global.out.clone();
    let outputs = match cli.cmd {
        Cmd::Sources => cmd_sources(&cfg, target(out, "sources.csv"))?,
        Cmd::Envelopes { points } => cmd_envelopes(&cfg, points, target(out, "envelopes.csv"))?,
        Cmd::Trace {
            source,
            h,
            duration,
            samples,
        } => cmd_trace(&cfg, source, h, duration, samples, target(out, "trace.csv"))?,
        Cmd::EnvelopeMc {
            source,
            traj,
            tau_grid,
            points,
        } => cmd_envelope_mc(
            &cfg,
            source,
            traj,
            tau_grid,
            points,
            target(out, "envelope_mc.csv"),
        )?,
        Cmd::Monitor { n_tau } => cmd_monitor(&cfg, n_tau, target(out, "monitor.csv"))?,
        Cmd::Plan { points } => cmd_plan(&cfg, points, target(out, "plan.csv"))?,
        Cmd::Ensemble { pixel } => cmd_ensemble(&cfg, pixel, target(out, "ensemble.csv"))?,
        Cmd::Scan { dwell, grid } => cmd_scan(&cfg, dwell, grid, target(out, "scan.pgm"))?,
        Cmd::Reproduce { figure } => cmd_reproduce(&cfg, figure, out)?,
    };

    let primary = outputs.first().expect("every run writes an output").clone();
    let manifest = RunManifest::new(
        name,
        &cfg,
        cfg.run.seed,
        &outputs,
        started.elapsed().as_secs_f64(),
    );
    let manifest_path = manifest_path_for(&primary);
    manifest.write(&manifest_path)?;
    println!("manifest {}", manifest_path.display());
    Ok(())
}

/// Pick the primary output path and make sure its directory exists.
fn target(out: Option<PathBuf>, default: &str) -> PathBuf {
    let path = out.unwrap_or_else(|| PathBuf::from(default));
    ensure_parent(&path);
    path
}

fn ensure_parent(path: &Path) {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            let _ = std::fs::create_dir_all(parent);
        }
    }
}

fn configure_threads(cli_threads: Option<usize>, cfg: &Config) {
    let n = cli_threads
        .or_else(|| {
            std::env::var("NV_SIM_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(cfg.run.threads);
    if n > 0 {
        // Ignore failure: the global pool can only be built once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Time at which a single source's echo exponent reaches `level`, or None if
/// it stays below even at cosmological times (deeply narrowed sources).
fn exponent_crossing(sigma: f64, f_e: f64, gamma: f64, level: f64) -> Option<f64> {
    let chi = |t: f64| echo_exponent(sigma, f_e, gamma, t);
    let mut hi = 1.0e-9;
    while chi(hi) < level {
        hi *= 2.0;
        if hi > 1.0e6 {
            return None;
        }
    }
    let mut lo = hi * 0.5;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

fn cmd_sources(cfg: &Config, out: PathBuf) -> Result<Vec<PathBuf>, NvError> {
    let h = cfg.probe.h_p;
    let gamma = cfg.constants.gamma_p;
    let sources = evaluate_sources(cfg, h);

    let header = [
        "source",
        "sigma_t",
        "f_e_hz",
        "theta",
        "regime",
        "dephasing_rate_hz",
    ];
    let mut rows = Vec::new();
    for s in &sources {
        let rate = exponent_crossing(s.sigma, s.f_e, gamma, 1.0)
            .map(|t| 1.0 / t)
            .unwrap_or(0.0);
        rows.push(vec![
            s.label.to_string(),
            csv_cell(s.sigma),
            csv_cell(s.f_e),
            csv_cell(s.theta),
            s.regime.label().to_string(),
            csv_cell(rate),
        ]);
    }
    write_table(&out, &header, &rows)?;

    println!("standoff {} m", csv_cell(h));
    for (s, row) in sources.iter().zip(&rows) {
        println!(
            "{:<12} sigma {} T  f_e {} Hz  theta {}  [{}]  rate {} Hz",
            s.label, row[1], row[2], row[3], row[4], row[5]
        );
    }
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// envelopes
// ---------------------------------------------------------------------------

fn cmd_envelopes(cfg: &Config, points: usize, out: PathBuf) -> Result<Vec<PathBuf>, NvError> {
    let model = detection_model(cfg, cfg.probe.h_p);
    let taus = log_spaced(1.0e-6, 2.0 * cfg.probe.t2, points.max(2));
    let bg = &model.background;
    // One column per dephasing factor: water, lipid, interfacial charge,
    // intrinsic crystal bath, ion channel, then the composites.
    let header = [
        "t_s", "d_h2o", "d_l", "d_e", "d_13c", "d_ic", "d_off", "d_on", "p_off", "p_on",
    ];
    let source_envelope = |label: &str, t: f64| -> f64 {
        let s = bg
            .sources
            .iter()
            .find(|s| s.label == label)
            .expect("background source present");
        (-echo_exponent(s.sigma, s.f_e, bg.gamma, t)).exp()
    };
    let rows: Vec<Vec<f64>> = taus
        .iter()
        .map(|&t| {
            let d_13c = (-(t / bg.t2).powf(bg.stretch_exponent)).exp();
            vec![
                t,
                source_envelope("water", t),
                source_envelope("lipid", t),
                source_envelope("charge", t),
                d_13c,
                model.channel.envelope(t),
                model.d_off(t),
                model.d_on(t),
                model.p_off(t),
                model.p_on(t),
            ]
        })
        .collect();
    write_csv(&out, &header, &rows)?;

    let tau = cfg.probe.tau;
    println!(
        "at tau {} s: p_off {}  p_on {}  delta_p {}",
        csv_cell(tau),
        csv_cell(model.p_off(tau)),
        csv_cell(model.p_on(tau)),
        csv_cell(model.delta_p(tau)),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

fn cmd_trace(
    cfg: &Config,
    source: FieldSource,
    h: Option<f64>,
    duration: f64,
    samples: usize,
    out: PathBuf,
) -> Result<Vec<PathBuf>, NvError> {
    let h = h.unwrap_or(cfg.probe.h_p);
    if !(h > 0.0) {
        return Err(NvError::Invalid(format!("standoff must be positive, got {h}")));
    }
    if !(duration > 0.0) || samples == 0 {
        return Err(NvError::Invalid(
            "trace too short: duration and samples must be positive".into(),
        ));
    }

    let mut rng = stream_rng(cfg.run.seed, TRACE_STREAM);
    let dt = duration / samples as f64;
    let mut rows = Vec::with_capacity(samples);

    let particles = match source {
        FieldSource::Water => {
            // Box wide enough that truncation costs little of the variance,
            // scaled with the standoff so particle count stays bounded.
            let lateral = 2.5 * h;
            let depth = h;
            let mut bath =
                SlabBath::water(&cfg.environment, &cfg.constants, h, lateral, depth, &mut rng);
            for k in 0..samples {
                bath.step(dt, &mut rng);
                rows.push(vec![(k + 1) as f64 * dt, bath.field_at_origin()]);
            }
            bath.len()
        }
        FieldSource::Lipid => {
            let lateral = (8.0 / 3.0) * h;
            let depth = 4.0e-9; // bilayer thickness
            let mut bath =
                SlabBath::lipid(&cfg.environment, &cfg.constants, h, lateral, depth, &mut rng);
            for k in 0..samples {
                bath.step(dt, &mut rng);
                rows.push(vec![(k + 1) as f64 * dt, bath.field_at_origin()]);
            }
            bath.len()
        }
        FieldSource::Channel => {
            let e = &cfg.environment;
            let shot = ShotNoiseChannel::from_config(e);
            let arrivals = shot.sample_arrivals(duration, &mut rng);
            // Per-ion on-axis amplitude chosen so the occupancy fluctuation
            // (Poisson: variance = mean) reproduces the closed-form RMS.
            let b1 = sigma_ion_channel(h, e.n_ion, e.mu_ion, e.n_h2o, e.mu_h2o, cfg.constants.mu0_over_4pi)
                / shot.mean_occupancy().sqrt();
            for k in 0..samples {
                let t = (k + 1) as f64 * dt;
                rows.push(vec![t, b1 * shot.occupancy_at(&arrivals, t) as f64]);
            }
            arrivals.len()
        }
    };

    write_csv(&out, &["time_s", "field_t"], &rows)?;

    let rms = (rows.iter().map(|r| r[1] * r[1]).sum::<f64>() / rows.len() as f64).sqrt();
    println!(
        "{:?} trace at h {} m: {} samples over {} s, {} carriers, rms {} T",
        source,
        csv_cell(h),
        samples,
        csv_cell(duration),
        particles,
        csv_cell(rms),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// envelope-mc
// ---------------------------------------------------------------------------

fn cmd_envelope_mc(
    cfg: &Config,
    kind: NoiseKind,
    traj: Option<usize>,
    tau_grid: Option<Vec<f64>>,
    points: usize,
    out: PathBuf,
) -> Result<Vec<PathBuf>, NvError> {
    let sources = evaluate_sources(cfg, cfg.probe.h_p);
    let src: &NoiseSource = match kind {
        NoiseKind::Channel => &sources[0],
        NoiseKind::Water => &sources[1],
        NoiseKind::Lipid => &sources[2],
        NoiseKind::Charge => &sources[3],
    };
    let gamma_cyclic = cfg.constants.gamma_p;
    // The trajectory integrator's phase kernel supplies the cycle→radian 2π
    // itself, while the closed-form exponents use the plain γ·σ product;
    // de-cycle the coupling here so both frames share one exponent.
    let gamma_mc = gamma_cyclic / (2.0 * std::f64::consts::PI);

    let taus = match tau_grid {
        Some(ts) => {
            if ts.iter().any(|&t| !(t > 0.0)) {
                return Err(NvError::Invalid("tau grid values must be positive".into()));
            }
            ts
        }
        None => {
            // Window the grid around the source's own decay, bounded by the
            // intrinsic coherence time and by integration cost (steps scale
            // with f_e·τ for fast sources).
            let step_cap = 5.0e3 / src.f_e;
            let mut hi = (2.0 * cfg.probe.t2).min(step_cap);
            if let Some(t_unit) = exponent_crossing(src.sigma, src.f_e, gamma_cyclic, 1.0) {
                hi = hi.min(3.0 * t_unit);
            }
            log_spaced(hi / 50.0, hi, points.max(2))
        }
    };

    let traj = traj.unwrap_or(cfg.run.trajectories).max(2);
    let ou = OrnsteinUhlenbeck {
        sigma: src.sigma,
        rate: src.f_e,
    };
    let estimates = envelope_scan(ou, gamma_mc, &taus, traj, cfg.run.seed);

    let rows: Vec<Vec<f64>> = estimates
        .iter()
        .map(|e| vec![e.tau, e.envelope, e.std_err])
        .collect();
    write_csv(&out, &["tau", "D", "stderr"], &rows)?;

    println!(
        "{} source: sigma {} T, f_e {} Hz, theta {}; {} trajectories x {} points",
        src.label,
        csv_cell(src.sigma),
        csv_cell(src.f_e),
        csv_cell(src.theta),
        traj,
        taus.len(),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

fn cmd_monitor(cfg: &Config, n_tau: usize, out: PathBuf) -> Result<Vec<PathBuf>, NvError> {
    if n_tau == 0 {
        return Err(NvError::Invalid("n-tau must be positive".into()));
    }
    let model = detection_model(cfg, cfg.probe.h_p);
    let tau = cfg.probe.tau;
    let timing = CycleTiming::from_probe(&cfg.probe);
    let duration = cfg.run.record_duration;

    let mut switch_rng = stream_rng(cfg.run.seed, MONITOR_SWITCH_STREAM);
    let switches = switch_times(
        duration,
        cfg.run.switch_mean_dwell,
        cfg.run.switch_waiting,
        &mut switch_rng,
    );
    let mut bit_rng = stream_rng(cfg.run.seed, MONITOR_BIT_STREAM);
    let record = synthesize_record(
        model.p_off(tau),
        model.p_on(tau),
        &timing,
        duration,
        &switches,
        &mut bit_rng,
    );
    let smoothed = running_average(&record.bits, n_tau);
    let events = detect_switches(
        &smoothed,
        &record.times,
        record.midpoint(),
        (n_tau / 2).max(1),
    );
    let delays = detection_delays(&switches, &events);

    let rows: Vec<Vec<f64>> = (0..record.times.len())
        .map(|i| {
            vec![
                record.times[i],
                record.bits[i],
                if record.open[i] { 1.0 } else { 0.0 },
                smoothed[i],
            ]
        })
        .collect();
    write_csv(&out, &["time_s", "bit", "open", "smoothed"], &rows)?;

    println!(
        "record: {} cycles at {} Hz over {} s",
        record.times.len(),
        csv_cell(record.sample_rate),
        csv_cell(duration),
    );
    println!(
        "populations closed {}  open {}  threshold {}",
        csv_cell(record.p_closed),
        csv_cell(record.p_open),
        csv_cell(record.midpoint()),
    );
    let mean_delay = if delays.is_empty() {
        f64::NAN
    } else {
        delays.iter().sum::<f64>() / delays.len() as f64
    };
    println!(
        "gating events {}  detected {}  mean delay {} s",
        switches.len(),
        events.len(),
        csv_cell(mean_delay),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

fn cmd_plan(cfg: &Config, points: usize, out: PathBuf) -> Result<Vec<PathBuf>, NvError> {
    let model = detection_model(cfg, cfg.probe.h_p);
    let tau_m = cfg.probe.tau_m;
    let taus = log_spaced(1.0e-5, 1.5 * cfg.probe.t2, points.max(2));
    let curve = resolution_curve(&model, tau_m, &taus);

    let header = ["tau_s", "p_off", "p_on", "delta_p", "resolution_s", "n_tau"];
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|p| {
            vec![
                p.tau,
                p.p_off,
                p.p_on,
                p.delta_p,
                p.resolution,
                p.n_tau as f64,
            ]
        })
        .collect();
    write_csv(&out, &header, &rows)?;

    let (tau_star, res_star) = optimize_tau(&model, tau_m, 1.0e-6, 1.5 * cfg.probe.t2, 1.0e-6);
    let n_tau = (res_star / (tau_star + tau_m)).ceil() as u64;
    println!(
        "optimum tau {} s -> resolution {} s ({} cycles per point)",
        csv_cell(tau_star),
        csv_cell(res_star),
        n_tau,
    );
    println!(
        "populations there: closed {}  open {}",
        csv_cell(model.p_off(tau_star)),
        csv_cell(model.p_on(tau_star)),
    );
    println!(
        "background-limited beyond {} s of interrogation",
        csv_cell(background_limit_time(&model)),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

fn cmd_ensemble(cfg: &Config, pixel: f64, out: PathBuf) -> Result<Vec<PathBuf>, NvError> {
    if !(pixel > 0.0) {
        return Err(NvError::Invalid("pixel edge must be positive".into()));
    }
    let taus = ensemble_tau_grid();
    let scan = pixel_contrast_scan(cfg, pixel, &taus);

    let rows: Vec<Vec<f64>> = scan
        .taus
        .iter()
        .zip(scan.contrast.iter().zip(&scan.std_err))
        .map(|(&tau, (&c, &se))| vec![tau, c, se])
        .collect();
    write_csv(&out, &["tau_s", "contrast_pct", "std_err_pct"], &rows)?;

    let c = &cfg.constants;
    println!(
        "pixel {} m, {} layouts: peak contrast {} % +/- {} at tau {} s",
        csv_cell(pixel),
        scan.layouts,
        csv_cell(scan.contrast_star),
        csv_cell(scan.std_err_star),
        csv_cell(scan.tau_star),
    );
    println!(
        "probe-probe rate {} Hz at density {} m^-3 (coupling scale {} Hz)",
        csv_cell(ensemble_rate(cfg.environment.n_nv, c)),
        csv_cell(cfg.environment.n_nv),
        csv_cell(coupling_scale(cfg.environment.n_nv, c)),
    );
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

fn cmd_scan(
    cfg: &Config,
    dwell: Option<f64>,
    grid: Option<usize>,
    out: PathBuf,
) -> Result<Vec<PathBuf>, NvError> {
    let dwell = dwell.unwrap_or(cfg.run.dwell);
    let n = grid.unwrap_or(cfg.run.grid_n);
    let pitch = cfg.run.grid_pitch;
    let channels = [(0.0, 0.0)];

    let img = scan_image(cfg, n, pitch, dwell, &channels, cfg.run.seed)?;
    write_pgm(&out, n, &img.p_hat)?;
    let csv_path = out.with_extension("csv");
    write_scan_csv(&csv_path, &img, None)?;

    let report = analyze(&img);
    let channel_px = img.pixel_of(0.0, 0.0).expect("channel inside grid");
    println!(
        "grid {}x{} pitch {} m dwell {} s -> acquisition {} s ({} cycles/pixel)",
        n,
        n,
        csv_cell(pitch),
        csv_cell(dwell),
        csv_cell(acquisition_time(img.pixels(), dwell)),
        img.samples_per_pixel,
    );
    println!(
        "contrast {} +/- {} -> CNR {}; background {}",
        csv_cell(report.contrast),
        csv_cell(report.pixel_noise),
        csv_cell(report.cnr),
        csv_cell(report.background_mean),
    );
    println!(
        "darkest pixel ({}, {}); channel pixel ({}, {})",
        report.min_pixel.0, report.min_pixel.1, channel_px.0, channel_px.1,
    );
    Ok(vec![out, csv_path])
}

/// Raw per-pixel estimates; `dwell` adds a leading column when one CSV holds
/// several scans.
fn write_scan_csv(path: &Path, img: &ScanImage, dwell: Option<f64>) -> Result<(), NvError> {
    let delta = img.delta();
    let mut header = vec!["x_m", "y_m", "p_true", "p_hat", "delta"];
    if dwell.is_some() {
        header.insert(0, "dwell_s");
    }
    let mut rows = Vec::with_capacity(img.pixels());
    for row in 0..img.n {
        for col in 0..img.n {
            let idx = row * img.n + col;
            let (x, y) = img.pixel_center(row, col);
            let mut r = vec![x, y, img.p_true[idx], img.p_hat[idx], delta[idx]];
            if let Some(d) = dwell {
                r.insert(0, d);
            }
            rows.push(r);
        }
    }
    write_csv(path, &header, &rows)
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

fn cmd_reproduce(
    cfg: &Config,
    figure: FigureId,
    out: Option<PathBuf>,
) -> Result<Vec<PathBuf>, NvError> {
    let default = match figure {
        FigureId::F2b => "fig2b",
        FigureId::F2c => "fig2c",
        FigureId::F3 => "fig3",
        FigureId::F4b => "fig4b",
        FigureId::F4c => "fig4c",
        FigureId::F5 => "fig5",
    };
    let stem = reproduce_stem(out, default);
    ensure_parent(&stem);
    match figure {
        FigureId::F2b => repro_amplitudes(cfg, &stem),
        FigureId::F2c => repro_thetas(cfg, &stem),
        FigureId::F3 => repro_scans(cfg, &stem),
        FigureId::F4b => repro_resolution_vs_t2(cfg, &stem),
        FigureId::F4c => repro_resolution_vs_tau(cfg, &stem),
        FigureId::F5 => repro_records(cfg, &stem),
    }
}

fn reproduce_stem(out: Option<PathBuf>, default: &str) -> PathBuf {
    match out {
        Some(p) => {
            let s = p.to_string_lossy().into_owned();
            let trimmed = s
                .strip_suffix(".summary.json")
                .or_else(|| s.strip_suffix(".json"))
                .unwrap_or(&s);
            PathBuf::from(trimmed)
        }
        None => PathBuf::from(default),
    }
}

fn stem_file(stem: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{}", stem.display(), suffix))
}

fn write_summary(stem: &Path, summary: &serde_json::Value) -> Result<PathBuf, NvError> {
    let path = stem_file(stem, ".summary.json");
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    println!("summary {}", path.display());
    Ok(path)
}

/// Standoff grid shared by the source-characterization bundles.
fn standoff_grid() -> Vec<f64> {
    lin_spaced(1.0e-9, 1.0e-8, 46)
}

fn repro_amplitudes(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let heights = standoff_grid();
    let rows: Vec<Vec<f64>> = heights
        .iter()
        .map(|&h| {
            let s = evaluate_sources(cfg, h);
            vec![h, s[0].sigma, s[1].sigma, s[2].sigma, s[3].sigma]
        })
        .collect();
    let csv = stem_file(stem, "_amplitudes.csv");
    write_csv(
        &csv,
        &[
            "h_m",
            "sigma_channel_t",
            "sigma_water_t",
            "sigma_lipid_t",
            "sigma_charge_t",
        ],
        &rows,
    )?;

    let at4 = evaluate_sources(cfg, 4.0e-9);
    let summary = serde_json::json!({
        "bundle": "2b",
        "heights_m": {"min": 1.0e-9, "max": 1.0e-8, "points": heights.len()},
        "sigma_at_4nm_t": {
            "channel": at4[0].sigma,
            "water": at4[1].sigma,
            "lipid": at4[2].sigma,
            "charge": at4[3].sigma,
        },
    });
    let summary_path = write_summary(stem, &summary)?;
    Ok(vec![summary_path, csv])
}

fn repro_thetas(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let heights = standoff_grid();
    let rows: Vec<Vec<f64>> = heights
        .iter()
        .map(|&h| {
            let s = evaluate_sources(cfg, h);
            vec![h, s[0].theta, s[1].theta, s[2].theta, s[3].theta]
        })
        .collect();
    let csv = stem_file(stem, "_thetas.csv");
    write_csv(
        &csv,
        &[
            "h_m",
            "theta_channel",
            "theta_water",
            "theta_lipid",
            "theta_charge",
        ],
        &rows,
    )?;

    // Ranges over the standoffs where each source matters most.
    let range = |lo: f64, hi: f64, idx: usize| {
        let vals: Vec<f64> = heights
            .iter()
            .zip(&rows)
            .filter(|(&h, _)| h >= lo && h <= hi)
            .map(|(_, r)| r[idx + 1])
            .collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        serde_json::json!({"min": min, "max": max})
    };
    let summary = serde_json::json!({
        "bundle": "2c",
        "theta_channel_2_to_8nm": range(2.0e-9, 8.0e-9, 0),
        "theta_water_1_to_10nm": range(1.0e-9, 1.0e-8, 1),
        "theta_lipid_1_to_10nm": range(1.0e-9, 1.0e-8, 2),
        "theta_charge_1_to_10nm": range(1.0e-9, 1.0e-8, 3),
    });
    let summary_path = write_summary(stem, &summary)?;
    Ok(vec![summary_path, csv])
}

fn repro_scans(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let dwells = [1.0e-2, 1.0e-1, 1.0];
    let n = cfg.run.grid_n;
    let pitch = cfg.run.grid_pitch;
    let channels = [(0.0, 0.0)];

    let mut outputs = Vec::new();
    let mut per_dwell = Vec::new();
    let mut csv_rows: Vec<Vec<f64>> = Vec::new();
    let mut cnrs = Vec::new();

    for (i, &dwell) in dwells.iter().enumerate() {
        let img = scan_image(
            cfg,
            n,
            pitch,
            dwell,
            &channels,
            cfg.run.seed.wrapping_add(i as u64),
        )?;
        let pgm = stem_file(stem, &format!("_dwell_{}ms.pgm", (dwell * 1.0e3) as u64));
        write_pgm(&pgm, n, &img.p_hat)?;
        outputs.push(pgm);

        let delta = img.delta();
        for row in 0..n {
            for col in 0..n {
                let idx = row * n + col;
                let (x, y) = img.pixel_center(row, col);
                csv_rows.push(vec![dwell, x, y, img.p_true[idx], img.p_hat[idx], delta[idx]]);
            }
        }

        let report = analyze(&img);
        let channel_px = img.pixel_of(0.0, 0.0).expect("channel inside grid");
        let min_px = report.min_pixel;
        let within_one = min_px.0.abs_diff(channel_px.0) <= 1 && min_px.1.abs_diff(channel_px.1) <= 1;
        cnrs.push(report.cnr);
        per_dwell.push(serde_json::json!({
            "dwell_s": dwell,
            "acquisition_s": acquisition_time(img.pixels(), dwell),
            "samples_per_pixel": img.samples_per_pixel,
            "contrast": report.contrast,
            "pixel_noise": report.pixel_noise,
            "cnr": report.cnr,
            "min_pixel": [min_px.0, min_px.1],
            "channel_pixel": [channel_px.0, channel_px.1],
            "min_within_one_pixel": within_one,
        }));
    }

    let csv = stem_file(stem, "_scans.csv");
    write_csv(
        &csv,
        &["dwell_s", "x_m", "y_m", "p_true", "p_hat", "delta"],
        &csv_rows,
    )?;
    outputs.push(csv);

    let summary = serde_json::json!({
        "bundle": "3",
        "grid": n,
        "pitch_m": pitch,
        "standoff_m": cfg.probe.h_p,
        "scans": per_dwell,
        "cnr_ratios": [cnrs[1] / cnrs[0], cnrs[2] / cnrs[1]],
    });
    let summary_path = write_summary(stem, &summary)?;
    let mut all = vec![summary_path];
    all.extend(outputs);
    Ok(all)
}

/// Standoffs examined by the planning bundles, m.
const PLAN_STANDOFFS: [f64; 5] = [2.0e-9, 3.0e-9, 4.0e-9, 5.0e-9, 6.0e-9];

fn repro_resolution_vs_t2(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let t2s = log_spaced(3.0e-5, 1.0e-2, 25);
    let mut rows = Vec::new();
    for &t2 in &t2s {
        let mut row = vec![t2];
        for &h in &PLAN_STANDOFFS {
            let mut local = cfg.clone();
            local.probe.t2 = t2;
            let model = detection_model(&local, h);
            let (_, res) = optimize_tau(&model, local.probe.tau_m, 1.0e-6, 1.5 * t2, 1.0e-5);
            row.push(res);
        }
        rows.push(row);
    }
    let csv = stem_file(stem, "_resolution_vs_t2.csv");
    write_csv(
        &csv,
        &["t2_s", "dt_2nm_s", "dt_3nm_s", "dt_4nm_s", "dt_5nm_s", "dt_6nm_s"],
        &rows,
    )?;

    // Long-coherence plateau: once the environment dominates, extending the
    // intrinsic coherence time buys nothing.
    let mut per_h = Vec::new();
    for (j, &h) in PLAN_STANDOFFS.iter().enumerate() {
        let first = rows.first().expect("nonempty")[j + 1];
        let last = rows.last().expect("nonempty")[j + 1];
        let prev = rows[rows.len() - 2][j + 1];
        per_h.push(serde_json::json!({
            "h_m": h,
            "dt_at_shortest_t2_s": first,
            "dt_at_longest_t2_s": last,
            "plateau_step_ratio": last / prev,
        }));
    }
    let summary = serde_json::json!({
        "bundle": "4b",
        "t2_range_s": {"min": 3.0e-5, "max": 1.0e-2, "points": t2s.len()},
        "standoffs": per_h,
    });
    let summary_path = write_summary(stem, &summary)?;
    Ok(vec![summary_path, csv])
}

fn repro_resolution_vs_tau(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let taus = log_spaced(1.0e-5, 0.95 * cfg.probe.t2, 48);
    let tau_m = cfg.probe.tau_m;
    let models: Vec<DetectionModel> = PLAN_STANDOFFS
        .iter()
        .map(|&h| detection_model(cfg, h))
        .collect();

    let rows: Vec<Vec<f64>> = taus
        .iter()
        .map(|&tau| {
            let mut row = vec![tau];
            for model in &models {
                row.push(temporal_resolution(model.delta_p(tau), tau, tau_m));
            }
            row
        })
        .collect();
    let csv = stem_file(stem, "_resolution_vs_tau.csv");
    write_csv(
        &csv,
        &["tau_s", "dt_2nm_s", "dt_3nm_s", "dt_4nm_s", "dt_5nm_s", "dt_6nm_s"],
        &rows,
    )?;

    let mut per_h = Vec::new();
    for (model, &h) in models.iter().zip(&PLAN_STANDOFFS) {
        let (tau_star, res_star) = optimize_tau(model, tau_m, 1.0e-6, 1.5 * cfg.probe.t2, 1.0e-5);
        per_h.push(serde_json::json!({
            "h_m": h,
            "tau_star_s": tau_star,
            "dt_star_s": res_star,
        }));
    }
    let summary = serde_json::json!({
        "bundle": "4c",
        "t2_s": cfg.probe.t2,
        "optima": per_h,
    });
    let summary_path = write_summary(stem, &summary)?;
    Ok(vec![summary_path, csv])
}

fn repro_records(cfg: &Config, stem: &Path) -> Result<Vec<PathBuf>, NvError> {
    let standoffs = [4.0e-9, 5.0e-9, 6.0e-9];
    let smoothing = 20;
    let timing = CycleTiming::from_probe(&cfg.probe);
    let duration = cfg.run.record_duration;
    let tau = cfg.probe.tau;

    let mut outputs = Vec::new();
    let mut per_h = Vec::new();
    for (i, &h) in standoffs.iter().enumerate() {
        let model = detection_model(cfg, h);
        // Clock-like gating concentrates the signature at half the gating
        // rate; random waiting spreads it into a broadband shoulder instead.
        let mut switch_rng = stream_rng(cfg.run.seed, RECORD_STREAM_BASE + 2 * i as u64);
        let switches = switch_times(
            duration,
            cfg.run.switch_mean_dwell,
            SwitchWaiting::Periodic,
            &mut switch_rng,
        );
        let mut bit_rng = stream_rng(cfg.run.seed, RECORD_STREAM_BASE + 2 * i as u64 + 1);
        let record = synthesize_record(
            model.p_off(tau),
            model.p_on(tau),
            &timing,
            duration,
            &switches,
            &mut bit_rng,
        );
        let smoothed = running_average(&record.bits, smoothing);
        let km = (h * 1.0e9).round() as u64;

        let record_csv = stem_file(stem, &format!("_record_{km}nm.csv"));
        write_record_csv(&record_csv, &record, &smoothed)?;
        outputs.push(record_csv);

        let spectrum = power_spectrum(&record.bits, record.sample_rate);
        let spec_csv = stem_file(stem, &format!("_spectrum_{km}nm.csv"));
        let spec_rows: Vec<Vec<f64>> = spectrum
            .freqs
            .iter()
            .zip(&spectrum.power)
            .map(|(&f, &p)| vec![f, p])
            .collect();
        write_csv(&spec_csv, &["freq_hz", "power"], &spec_rows)?;
        outputs.push(spec_csv);

        let (peak_f, peak_p) = spectrum.peak();
        let floor = spectrum.median_power();
        // The gating signature lives at half the switching rate (one full
        // open/close period spans two dwells).
        let f_half = 0.5 / cfg.run.switch_mean_dwell;
        let half_idx = spectrum
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - f_half)
                    .abs()
                    .partial_cmp(&(b.1 - f_half).abs())
                    .expect("finite freqs")
            })
            .map(|(i, _)| i)
            .expect("nonempty spectrum");
        let half_p = spectrum.power[half_idx];
        let dominant_at_half = (peak_f - f_half).abs() <= 0.1 * f_half;
        per_h.push(serde_json::json!({
            "h_m": h,
            "p_closed": record.p_closed,
            "p_open": record.p_open,
            "gating_events": switches.len(),
            "peak_freq_hz": peak_f,
            "peak_to_median": peak_p / floor,
            "half_rate_freq_hz": spectrum.freqs[half_idx],
            "half_rate_to_median": half_p / floor,
            "resolvable": dominant_at_half && peak_p / floor >= 3.0,
        }));
    }

    let summary = serde_json::json!({
        "bundle": "5",
        "duration_s": duration,
        "mean_dwell_s": cfg.run.switch_mean_dwell,
        "cycles_per_point": smoothing,
        "records": per_h,
    });
    let summary_path = write_summary(stem, &summary)?;
    let mut all = vec![summary_path];
    all.extend(outputs);
    Ok(all)
}

fn write_record_csv(
    path: &Path,
    record: &TelegraphRecord,
    smoothed: &[f64],
) -> Result<(), NvError> {
    let rows: Vec<Vec<f64>> = (0..record.times.len())
        .map(|i| {
            vec![
                record.times[i],
                record.bits[i],
                if record.open[i] { 1.0 } else { 0.0 },
                smoothed[i],
            ]
        })
        .collect();
    write_csv(path, &["time_s", "bit", "open", "smoothed"], &rows)
}
