//! Subcommands of the `snowdwell` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use snowdwell_core::detector::{
    detect, split, DetectError, DetectorConfig, EtaSchedule, ExpirePolicy,
};
use snowdwell_core::eval::{
    dwell_histogram, error_fractions, event_prf, exclusion_windows, match_boxes, measured_dwells,
    percent_removed_curve, EvalError, MetricReport, PositiveClass, DEFAULT_WIPER_EXCLUSION_US,
};
use snowdwell_core::model::{
    calibrate_tau_beta, critical_dwell_us, eta_from_tau, fn_rate, fp_rate_bound,
    np_threshold_alpha, ModelError,
};
use snowdwell_core::render::{render_accumulation, render_accumulation_color};
use snowdwell_core::synth::{generate, SynthError};
use snowdwell_core::{
    classify, CameraGeometry, EventClass, FilterConfig, LabeledStream, StreamError,
};

use crate::config::{ConfigError, FileConfig};
use crate::csvio::{self, CsvError};
use crate::evd::EvdError;
use crate::manifest::RunManifest;
use crate::{read_stream, write_stream, Format};

/// Baseline pair count below which `calibrate` warns.
const MIN_CALIBRATION_PAIRS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Evd { path: String, source: EvdError },
    #[error("{path}: {source}")]
    Csv { path: String, source: CsvError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "snowdwell",
    version,
    about = "Dwell-time snowflake removal for event-camera streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify events, flag snow and write snow and background streams.
    Filter(FilterArgs),
    /// Generate a synthetic scene with ground-truth flags.
    Synth(SynthArgs),
    /// Derive τ from a background-only baseline recording.
    Calibrate(CalibrateArgs),
    /// Print τ, η and the error-rate formulas for a configuration.
    Model(ModelArgs),
    /// Render accumulation frames as PGM or PPM images.
    Render(RenderArgs),
    /// Event metrics, removal curves, dwell histograms and box scores.
    Eval(EvalArgs),
    /// Run the command recorded in a manifest again.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Default)]
pub struct ThresholdArgs {
    /// Fixed dwell threshold η in µs.
    #[arg(long)]
    pub eta_us: Option<f64>,
    /// Normalized threshold τ; η = τθ/V.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Significance level giving τ = ℓ/(R√α).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ego velocity in mm/s.
    #[arg(long)]
    pub velocity_mm_s: Option<f64>,
    /// CSV of `t,V` (µs, mm/s) applied piecewise-constant to η.
    #[arg(long)]
    pub velocity_file: Option<PathBuf>,
    /// Half-width of the pairing window in pixels.
    #[arg(long)]
    pub omega_px: Option<u32>,
    /// Largest snowflake diameter θ in mm.
    #[arg(long)]
    pub theta_mm: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_snow: Option<PathBuf>,
    #[arg(long)]
    pub output_background: Option<PathBuf>,
    /// Output format; defaults to the file extension (`.csv`, else EVD).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Inceptive filter gap Δ in µs.
    #[arg(long)]
    pub delta_us: Option<u64>,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Remove noisy events from the background output.
    #[arg(long)]
    pub drop_noisy: bool,
    /// Configuration file with camera and threshold keys.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Configuration file with camera and scene keys.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub velocity_mm_s: Option<f64>,
    #[arg(long)]
    pub delta_us: Option<u64>,
    #[arg(long)]
    pub duration_us: Option<u64>,
    /// Snowflakes per second.
    #[arg(long)]
    pub flake_rate: Option<f64>,
    /// Probability of dropping each event.
    #[arg(long)]
    pub p_miss: Option<f64>,
    /// Background edge tracks per second.
    #[arg(long)]
    pub background_rate: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Background-only baseline recording.
    #[arg(long)]
    pub input: PathBuf,
    /// Share of baseline dwells allowed below η.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Velocity of the baseline recording in mm/s.
    #[arg(long)]
    pub velocity_mm_s: Option<f64>,
    #[arg(long)]
    pub delta_us: Option<u64>,
    #[arg(long)]
    pub omega_px: Option<u32>,
    #[arg(long)]
    pub theta_mm: Option<f64>,
    /// Longest dwell measured, µs.
    #[arg(long, default_value_t = 200_000.0)]
    pub cap_us: f64,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Write the dwell histogram as CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Write `tau`, `theta_mm`, `delta_us` and `omega_px` as a config file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub theta_mm: Option<f64>,
    #[arg(long)]
    pub velocity_mm_s: Option<f64>,
    #[arg(long)]
    pub focal_mm: Option<f64>,
    #[arg(long)]
    pub radius_mm: Option<f64>,
    /// Detail sizes at which to report the background miss rate, mm.
    #[arg(long = "d0-mm")]
    pub d0_mm: Vec<f64>,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Image path; with several frames an index is added before the
    /// extension.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 33_333)]
    pub window_us: u64,
    /// Start of the first window; defaults to the first event.
    #[arg(long)]
    pub t0_us: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Color snow-flagged pixels red (PPM output).
    #[arg(long)]
    pub color: bool,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Streams to score; several files (e.g. snow and background outputs)
    /// are merged by time.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Metrics as CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Percent-removed curve as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000.0)]
    pub eta_max_us: f64,
    #[arg(long, default_value_t = 250.0)]
    pub eta_step_us: f64,
    /// Dwell histogram as CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    #[arg(long, default_value_t = 20_000.0)]
    pub cap_us: f64,
    #[arg(long)]
    pub delta_us: Option<u64>,
    #[arg(long)]
    pub omega_px: Option<u32>,
    /// Detected boxes, CSV `t,x0,y0,x1,y1`.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Annotated boxes, CSV `t,x0,y0,x1,y1`.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub iou_min: f64,
    /// Wiper sweep times, one per line, µs.
    #[arg(long)]
    pub wiper_sweeps: Option<PathBuf>,
    /// Half-width of the window ignored around each sweep, µs.
    #[arg(long, default_value_t = DEFAULT_WIPER_EXCLUSION_US)]
    pub exclusion_us: u64,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    Ok(match path {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    })
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| CliError::Io {
            path: display(path),
            source,
        })
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|source| CliError::Io {
        path: display(path),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: display(path),
        source,
    })
}

fn csv_err(path: &Path) -> impl FnOnce(CsvError) -> CliError + '_ {
    move |source| CliError::Csv {
        path: display(path),
        source,
    }
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

/// τ from the flag or config value, else from α.
fn resolve_tau(cfg: &FileConfig, geom: &CameraGeometry) -> Result<Option<f64>, CliError> {
    Ok(match (cfg.tau, cfg.alpha) {
        (Some(t), _) => Some(t),
        (None, Some(a)) => Some(np_threshold_alpha(a, geom)?),
        (None, None) => None,
    })
}

/// η schedule from, in order of precedence: a fixed η, τ with a velocity
/// log, τ with a scalar velocity.
fn resolve_eta(
    cfg: &FileConfig,
    velocity_file: Option<&Path>,
    geom: &CameraGeometry,
) -> Result<EtaSchedule, CliError> {
    if let Some(eta) = cfg.eta_us {
        return Ok(EtaSchedule::Fixed(eta));
    }
    let missing = || {
        CliError::Usage(
            "no dwell threshold: pass --eta-us, or --tau (or --alpha) together with --velocity-mm-s or --velocity-file".into(),
        )
    };
    let tau = resolve_tau(cfg, geom)?.ok_or_else(missing)?;
    let theta = cfg
        .theta_mm
        .unwrap_or(snowdwell_core::model::DEFAULT_THETA_MM);
    if let Some(path) = velocity_file {
        let samples = csvio::read_velocity(open(path)?).map_err(csv_err(path))?;
        return Ok(csvio::eta_schedule(&samples, tau, theta)?);
    }
    let v = cfg.velocity()?.ok_or_else(missing)?;
    Ok(EtaSchedule::Fixed(eta_from_tau(tau, theta, &v)?))
}

fn eta_json(eta: &EtaSchedule) -> serde_json::Value {
    match eta {
        EtaSchedule::Fixed(e) => json!(e),
        EtaSchedule::Piecewise(steps) => json!(steps),
    }
}

/// The keys that are set.
fn config_json(cfg: &FileConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(map) = v.as_object_mut() {
        map.retain(|_, x| !x.is_null());
    }
    v
}

fn finish(mut manifest: RunManifest, started: Instant) -> Result<(), CliError> {
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest
        .write_beside_outputs()
        .map_err(|source| CliError::Io {
            path: "manifest".into(),
            source,
        })?;
    Ok(())
}

fn filter(a: FilterArgs, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(a.geometry.as_deref())?;
    let t = a.threshold;
    set(&mut cfg.delta_us, a.delta_us);
    set(&mut cfg.eta_us, t.eta_us);
    set(&mut cfg.tau, t.tau);
    set(&mut cfg.alpha, t.alpha);
    set(&mut cfg.velocity_mm_s, t.velocity_mm_s);
    set(&mut cfg.omega_px, t.omega_px);
    set(&mut cfg.theta_mm, t.theta_mm);
    cfg.threshold()?;

    let (stream, _) = read_stream(&a.input, &cfg)?;
    let eta = resolve_eta(&cfg, t.velocity_file.as_deref(), &stream.geometry)?;
    let filter_cfg = FilterConfig::new(
        cfg.delta_us
            .unwrap_or(snowdwell_core::inceptive::DEFAULT_DELTA_US),
    )?;
    let det_cfg = DetectorConfig {
        eta: eta.clone(),
        omega_px: cfg.omega_px.unwrap_or(1),
        expire_policy: ExpirePolicy::OnRead,
    };
    det_cfg.validate()?;

    let n = stream.len();
    let clock = Instant::now();
    let (classified, _) = classify(stream, &filter_cfg)?;
    let labeled = detect(classified, &det_cfg)?;
    let (snow, mut background) = split(labeled);
    let mut dropped = 0;
    if a.drop_noisy {
        let before = background.len();
        background.events.retain(|e| e.class != EventClass::Noisy);
        dropped = before - background.len();
    }
    let secs = clock.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(
        "filter",
        argv,
        json!({ "parameters": config_json(&cfg), "eta_us": eta_json(&eta), "drop_noisy": a.drop_noisy }),
    );
    manifest.inputs.push(display(&a.input));
    for (path, part) in [(&a.output_snow, &snow), (&a.output_background, &background)] {
        if let Some(p) = path {
            let mut part = part.clone();
            part.relink(filter_cfg.per_polarity);
            write_stream(p, &part, Format::for_path(p, a.format))?;
            manifest.outputs.push(display(p));
        }
    }
    writeln!(
        out,
        "events {n}\nsnow {}\nbackground {}\ndropped_noisy {dropped}\nfilter_seconds {secs:.6}\nevents_per_second {:.0}",
        snow.len(),
        background.len(),
        if secs > 0.0 { n as f64 / secs } else { 0.0 }
    )
    .map_err(out_err)?;
    finish(manifest, started)
}

fn synth(a: SynthArgs, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(a.geometry.as_deref())?;
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.velocity_mm_s, a.velocity_mm_s);
    set(&mut cfg.delta_us, a.delta_us);
    set(&mut cfg.duration_us, a.duration_us);
    set(&mut cfg.flake_rate, a.flake_rate);
    set(&mut cfg.p_miss, a.p_miss);
    set(&mut cfg.background_tracks_per_s, a.background_rate);
    let scfg = cfg.synth()?;
    let scene = generate(&scfg)?;
    write_stream(
        &a.output,
        &scene.stream,
        Format::for_path(&a.output, a.format),
    )?;
    let snow = scene
        .stream
        .events
        .iter()
        .filter(|e| e.truth == Some(true))
        .count();
    writeln!(
        out,
        "events {}\nsnow_events {snow}\nflakes {}",
        scene.stream.len(),
        scene.flakes.len()
    )
    .map_err(out_err)?;

    let mut manifest = RunManifest::new("synth", argv, json!({ "parameters": config_json(&cfg) }));
    manifest.seed = Some(scfg.seed);
    manifest.outputs.push(display(&a.output));
    finish(manifest, started)
}

fn calibrate(a: CalibrateArgs, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = load_config(a.geometry.as_deref())?;
    set(&mut cfg.beta, a.beta);
    set(&mut cfg.velocity_mm_s, a.velocity_mm_s);
    set(&mut cfg.delta_us, a.delta_us);
    set(&mut cfg.omega_px, a.omega_px);
    set(&mut cfg.theta_mm, a.theta_mm);
    let threshold = cfg.threshold()?;
    let beta = cfg
        .beta
        .ok_or_else(|| CliError::Usage("calibrate needs --beta".into()))?;
    let v0 = cfg
        .velocity()?
        .ok_or_else(|| CliError::Usage("calibrate needs the baseline --velocity-mm-s".into()))?;

    let (stream, _) = read_stream(&a.input, &cfg)?;
    let filter_cfg = FilterConfig::new(
        cfg.delta_us
            .unwrap_or(snowdwell_core::inceptive::DEFAULT_DELTA_US),
    )?;
    let (classified, _) = classify(stream, &filter_cfg)?;
    let det_cfg = DetectorConfig {
        omega_px: threshold.omega_px,
        ..DetectorConfig::default()
    };
    let dwells: Vec<f64> = measured_dwells(&classified, &det_cfg, a.cap_us)?
        .into_iter()
        .map(|g| g as f64)
        .collect();
    if dwells.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no dwell pairs below {} µs; nothing to calibrate on",
            a.input.display(),
            a.cap_us
        )));
    }
    if dwells.len() < MIN_CALIBRATION_PAIRS {
        eprintln!(
            "warning: only {} baseline pairs; the β-quantile is unreliable below {MIN_CALIBRATION_PAIRS}",
            dwells.len()
        );
    }
    let tau = calibrate_tau_beta(&dwells, beta, threshold.theta_mm, v0.velocity_mm_s)?;
    let eta0 = eta_from_tau(tau, threshold.theta_mm, &v0)?;
    writeln!(
        out,
        "pairs = {}\ntau = {tau}\neta_us = {eta0}",
        dwells.len()
    )
    .map_err(out_err)?;

    let mut manifest = RunManifest::new(
        "calibrate",
        argv,
        json!({ "parameters": config_json(&cfg), "cap_us": a.cap_us, "tau": tau }),
    );
    manifest.inputs.push(display(&a.input));
    if let Some(p) = &a.histogram {
        let h = dwell_histogram(&classified, &det_cfg, a.bins, a.cap_us)?;
        let rows = h
            .counts
            .iter()
            .enumerate()
            .map(|(k, &c)| vec![h.edge(k), h.edge(k + 1), c as f64]);
        csvio::write_table(&["lower_us", "upper_us", "count"], rows, create(p)?)
            .map_err(csv_err(p))?;
        manifest.outputs.push(display(p));
    }
    if let Some(p) = &a.output {
        let text = format!(
            "tau = {tau:?}\ntheta_mm = {:?}\ndelta_us = {}\nomega_px = {}\n",
            threshold.theta_mm, filter_cfg.delta_us, threshold.omega_px
        );
        write_file(p, text.as_bytes())?;
        manifest.outputs.push(display(p));
    }
    finish(manifest, started)
}

fn model(a: ModelArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(a.geometry.as_deref())?;
    set(&mut cfg.alpha, a.alpha);
    set(&mut cfg.tau, a.tau);
    set(&mut cfg.theta_mm, a.theta_mm);
    set(&mut cfg.velocity_mm_s, a.velocity_mm_s);
    set(&mut cfg.focal_mm, a.focal_mm);
    set(&mut cfg.radius_mm, a.radius_mm);
    let threshold = cfg.threshold()?;
    let geom = cfg.geometry(None)?;
    let theta = threshold.theta_mm;
    let tau = resolve_tau(&cfg, &geom)?
        .ok_or_else(|| CliError::Usage("model needs --tau or --alpha".into()))?;
    // α implied by τ when only τ is given.
    let alpha = cfg
        .alpha
        .unwrap_or_else(|| (geom.focal_mm / (geom.radius_mm * tau)).powi(2));
    let mut text = format!(
        "tau = {tau:.4}\nalpha = {alpha:.6}\nfp_rate_bound = {:.6}\n",
        fp_rate_bound(tau, &geom)
    );
    if let Some(v) = cfg.velocity()? {
        text += &format!(
            "eta_us = {:.1}\ncritical_dwell_us = {:.1}\n",
            eta_from_tau(tau, theta, &v)?,
            critical_dwell_us(theta, &geom, &v)
        );
    }
    if alpha <= 1.0 {
        text += &format!("fn_zero_above_mm = {:.4}\n", theta / alpha.sqrt());
        for d0 in &a.d0_mm {
            text += &format!("fn_rate_{d0}mm = {:.6}\n", fn_rate(*d0, alpha, theta)?);
        }
    }
    out.write_all(text.as_bytes()).map_err(out_err)
}

fn indexed(path: &Path, k: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{k:04}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{k:04}"),
    };
    path.with_file_name(name)
}

fn render(a: RenderArgs, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    if a.window_us == 0 {
        return Err(CliError::Usage("--window-us must be positive".into()));
    }
    let cfg = load_config(a.geometry.as_deref())?;
    let (stream, _) = read_stream(&a.input, &cfg)?;
    let t0 = a
        .t0_us
        .unwrap_or_else(|| stream.events.first().map_or(0, |e| e.t));
    let mut manifest = RunManifest::new(
        "render",
        argv,
        json!({ "window_us": a.window_us, "t0_us": t0, "frames": a.frames, "color": a.color }),
    );
    manifest.inputs.push(display(&a.input));
    for k in 0..a.frames {
        let start = t0 + k as u64 * a.window_us;
        let path = if a.frames == 1 {
            a.output.clone()
        } else {
            indexed(&a.output, k)
        };
        let bytes = if a.color {
            render_accumulation_color(&stream, a.window_us, start).to_ppm()
        } else {
            render_accumulation(&stream, a.window_us, start).to_pgm()
        };
        write_file(&path, &bytes)?;
        writeln!(out, "{}", path.display()).map_err(out_err)?;
        manifest.outputs.push(display(&path));
    }
    finish(manifest, started)
}

fn metrics_line(name: &str, m: &MetricReport) -> String {
    format!(
        "{name}: precision {:.6} recall {:.6} f1 {:.6} tp {} fp {} fn {}",
        m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_
    )
}

fn metrics_row(m: &MetricReport) -> Vec<f64> {
    vec![
        m.precision,
        m.recall,
        m.f1,
        m.tp as f64,
        m.fp as f64,
        m.fn_ as f64,
        m.avg_po,
        m.avg_iou,
    ]
}

fn eval(a: EvalArgs, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    if a.input.is_empty() && a.detections.is_none() {
        return Err(CliError::Usage(
            "eval needs --input streams or --detections with --ground-truth".into(),
        ));
    }
    let mut cfg = load_config(a.geometry.as_deref())?;
    set(&mut cfg.delta_us, a.delta_us);
    set(&mut cfg.omega_px, a.omega_px);
    let mut manifest = RunManifest::new(
        "eval",
        argv,
        json!({ "parameters": config_json(&cfg), "iou_min": a.iou_min, "exclusion_us": a.exclusion_us }),
    );
    let mut rows: Vec<(&str, MetricReport)> = Vec::new();

    if !a.input.is_empty() {
        let mut merged: Option<LabeledStream> = None;
        for p in &a.input {
            let (s, _) = read_stream(p, &cfg)?;
            manifest.inputs.push(display(p));
            match &mut merged {
                None => merged = Some(s),
                Some(m) => {
                    if m.geometry.width_px != s.geometry.width_px
                        || m.geometry.height_px != s.geometry.height_px
                    {
                        return Err(CliError::Usage(format!(
                            "{}: sensor size differs from the other inputs",
                            p.display()
                        )));
                    }
                    m.events.extend(s.events);
                }
            }
        }
        let mut stream = merged.expect("at least one input");
        stream.sort_stable();
        stream.relink(true);

        if stream.events.iter().all(|e| e.truth.is_some()) {
            let snow = event_prf(&stream, PositiveClass::Snow)?;
            let bg = event_prf(&stream, PositiveClass::Background)?;
            let (bg_flagged, snow_missed) = error_fractions(&stream)?;
            writeln!(
                out,
                "{}\n{}\nbackground_flagged_fraction {bg_flagged:.6}\nsnow_missed_fraction {snow_missed:.6}",
                metrics_line("snow", &snow),
                metrics_line("background", &bg)
            )
            .map_err(out_err)?;
            rows.push(("snow", snow));
            rows.push(("background", bg));
        } else {
            writeln!(out, "no ground truth in the input; event metrics skipped")
                .map_err(out_err)?;
        }

        if a.curve.is_some() || a.histogram.is_some() {
            if stream
                .events
                .iter()
                .any(|e| e.class == EventClass::Unclassified)
            {
                let f = FilterConfig::new(
                    cfg.delta_us
                        .unwrap_or(snowdwell_core::inceptive::DEFAULT_DELTA_US),
                )?;
                stream = classify(stream, &f)?.0;
            }
            let det_cfg = DetectorConfig {
                omega_px: cfg.omega_px.unwrap_or(1),
                ..DetectorConfig::default()
            };
            if let Some(p) = &a.curve {
                if !(a.eta_step_us > 0.0) {
                    return Err(CliError::Usage("--eta-step-us must be positive".into()));
                }
                let steps = (a.eta_max_us / a.eta_step_us).floor() as usize;
                let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * a.eta_step_us).collect();
                let curve = percent_removed_curve(&stream, &grid, &det_cfg)?;
                csvio::write_table(
                    &["eta_us", "fraction_removed"],
                    curve.iter().map(|&(e, f)| vec![e, f]),
                    create(p)?,
                )
                .map_err(csv_err(p))?;
                manifest.outputs.push(display(p));
            }
            if let Some(p) = &a.histogram {
                let h = dwell_histogram(&stream, &det_cfg, a.bins, a.cap_us)?;
                let rows = h
                    .counts
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| vec![h.edge(k), h.edge(k + 1), c as f64]);
                csvio::write_table(&["lower_us", "upper_us", "count"], rows, create(p)?)
                    .map_err(csv_err(p))?;
                manifest.outputs.push(display(p));
            }
        }
    }

    if let Some(dp) = &a.detections {
        let gp = a
            .ground_truth
            .as_ref()
            .ok_or_else(|| CliError::Usage("--detections needs --ground-truth".into()))?;
        let dets = csvio::read_boxes(open(dp)?).map_err(csv_err(dp))?;
        let gts = csvio::read_boxes(open(gp)?).map_err(csv_err(gp))?;
        let sweeps = match &a.wiper_sweeps {
            Some(p) => csvio::read_times(open(p)?).map_err(csv_err(p))?,
            None => Vec::new(),
        };
        let m = match_boxes(
            &dets,
            &gts,
            a.iou_min,
            &exclusion_windows(&sweeps, a.exclusion_us),
        )?;
        writeln!(
            out,
            "{} avg_po {:.6} avg_iou {:.6}",
            metrics_line("boxes", &m),
            m.avg_po,
            m.avg_iou
        )
        .map_err(out_err)?;
        manifest.inputs.extend([display(dp), display(gp)]);
        rows.push(("boxes", m));
    }

    if let Some(p) = &a.report {
        let mut w = csv::WriterBuilder::new().from_writer(create(p)?);
        let header = [
            "class",
            "precision",
            "recall",
            "f1",
            "tp",
            "fp",
            "fn",
            "avg_po",
            "avg_iou",
        ];
        w.write_record(header).map_err(|e| csv_err(p)(e.into()))?;
        for (name, m) in &rows {
            let mut rec = vec![name.to_string()];
            rec.extend(metrics_row(m).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(p)(e.into()))?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: display(p),
            source,
        })?;
        manifest.outputs.push(display(p));
    }
    finish(manifest, started)
}

fn replay(a: ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|source| CliError::Io {
        path: display(&a.manifest),
        source,
    })?;
    let m = RunManifest::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.manifest.display())))?;
    let cli = Cli::try_parse_from(&m.argv)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.manifest.display())))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage(
            "a manifest cannot replay another replay".into(),
        ));
    }
    execute(cli, m.argv, out)
}

/// Runs a parsed command. `argv` is recorded in the manifests.
pub fn execute(cli: Cli, argv: Vec<String>, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Filter(a) => filter(a, argv, out),
        Command::Synth(a) => synth(a, argv, out),
        Command::Calibrate(a) => calibrate(a, argv, out),
        Command::Model(a) => model(a, out),
        Command::Render(a) => render(a, argv, out),
        Command::Eval(a) => eval(a, argv, out),
        Command::Replay(a) => replay(a, out),
    }
}

/// Parses `args` (program name first) and runs the command, printing
/// diagnostics to stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, argv, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
