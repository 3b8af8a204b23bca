//! Command-line front end: experiment configs in, CSV/JSON/SVG artifacts out.

mod artifacts;
pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::analysis::{hexagon_sweep, run_pipeline, sweep, PointResult, SweepResult};
use crate::dynamics::NoiseParams;
use crate::geometry::{blockade_graph, classify_graph, TransformFamily};
use crate::{Error, Result};
use artifacts::{ArtifactWriter, Metadata};
pub use config::{family_default_preset, preset, ExperimentConfig, Format, PRESETS};
pub use verify::{run_verify, Overrides, Status, VerifyReport};

/// Prints to stdout, ignoring write errors such as a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RYDSPEC_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rydspec", version, about = "Fourier spectroscopy of few-atom Rydberg-blockade systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration; see `rydspec presets`.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Seed for shot noise; implies nothing about whether noise is enabled.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "rydspec-out")]
    pub out: PathBuf,
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Enable dephasing, SPAM and shot noise with default parameters when
    /// the config has none.
    #[arg(long, global = true)]
    pub noisy: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write its time series and spectrum.
    Spectrum,
    /// Sweep a transformation family and write a spectrogram.
    Sweep(SweepArgs),
    /// Run the built-in consistency checks.
    Verify(VerifyArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Transformation family, e.g. star-to-tetra or hexagon-antiprism.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Start of the range in family units.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// End of the range in family units.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Largest plane separation for the hexagon family, in μm or as a
    /// multiple of d (e.g. `1.5d`).
    #[arg(long)]
    pub z_max: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Replace a reference constant, `NAME=VALUE` (e.g.
    /// `cycle_4.lambda_7=1.3`).
    #[arg(long = "override", value_name = "NAME=VALUE")]
    pub overrides: Vec<String>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_)
        | Error::AmbiguousBlockade { .. }
        | Error::Capacity { .. }
        | Error::Unsupported(_)
        | Error::Json(_) => EXIT_CONFIG,
        Error::Numerical(_) | Error::Validation(_) => EXIT_NUMERICAL,
        Error::SweepPoint { source, .. } => exit_code(source),
        Error::Io(_) => EXIT_FAILURE,
    }
}

/// Parses `std::env::args` and runs the command; returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Spectrum => cmd_spectrum(&cli.global),
        Command::Sweep(a) => cmd_sweep(&cli.global, a),
        Command::Verify(a) => cmd_verify(&cli.global, a),
        Command::Presets => {
            for p in PRESETS {
                say!("{p}");
            }
            Ok(EXIT_OK)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rydspec: {e}");
            exit_code(&e)
        }
    }
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parameter(format!("{}: {e}", path.display()))
}

/// Reads a config file. A `config.json` artifact (`{"metadata", "config"}`)
/// is accepted as well.
pub fn load_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| config_error(path, e))?;
    let inner = match &value {
        Value::Object(m) if m.len() == 2 && m.contains_key("metadata") && m.contains_key("config") => {
            m["config"].clone()
        }
        _ => value,
    };
    let cfg: ExperimentConfig = serde_json::from_value(inner).map_err(|e| config_error(path, e))?;
    cfg.validate().map_err(|e| config_error(path, e))?;
    Ok(cfg)
}

fn base_config(g: &GlobalArgs, fallback: &str) -> Result<(ExperimentConfig, String)> {
    let (mut cfg, source) = match (&g.config, &g.preset) {
        (Some(p), _) => (load_config_file(p)?, p.display().to_string()),
        (None, Some(name)) => (preset(name)?, format!("preset {name}")),
        (None, None) => (preset(fallback)?, format!("preset {fallback}")),
    };
    if g.noisy && cfg.noise.is_none() {
        cfg.noise = Some(NoiseParams::default());
    }
    if let (Some(seed), Some(n)) = (g.seed, cfg.noise.as_mut()) {
        n.rng_seed = seed;
    }
    cfg.validate()?;
    Ok((cfg, source))
}

fn writer(g: &GlobalArgs, cfg: &ExperimentConfig) -> Result<ArtifactWriter> {
    let materialized = cfg.materialized()?;
    let meta = Metadata::new(&materialized, cfg.noise.map(|n| n.rng_seed))?;
    ArtifactWriter::create(&g.out, meta, &cfg.output.formats)
}

fn cmd_spectrum(g: &GlobalArgs) -> Result<i32> {
    let (cfg, source) = base_config(g, "c4")?;
    let arr = cfg.geometry.arrangement()?;
    let settings = cfg.pipeline_settings()?;
    let graph = blockade_graph(&arr, settings.drive.blockade_radius())?;
    let class = classify_graph(&graph)?;
    let point = run_pipeline(&arr, &settings, 0)?;
    let w = writer(g, &cfg)?;
    artifacts::write_spectrum(&w, &cfg, &arr, &point)?;
    if g.json {
        say!("{}", serde_json::to_string_pretty(&spectrum_summary(&w, &source, &class.to_string(), &point))?);
    } else {
        print_spectrum_summary(&w, &source, &class.to_string(), &point);
    }
    Ok(EXIT_OK)
}

fn spectrum_summary(w: &ArtifactWriter, source: &str, class: &str, p: &PointResult) -> Value {
    json!({
        "metadata": w.metadata(),
        "source": source,
        "graph": class,
        "output": w.dir().display().to_string(),
        "lines": p.lines,
        "peaks": p.peaks,
        "match": p.report,
    })
}

fn print_spectrum_summary(w: &ArtifactWriter, source: &str, class: &str, p: &PointResult) {
    say!("source: {source}");
    say!("graph: {class}");
    say!("bright lines (MHz):");
    for l in &p.lines {
        say!("  lambda_{}{}  {:.6}  weight {:.4}", l.k, l.j, l.freq_mhz(), l.weight);
    }
    say!("peaks (MHz):");
    for pk in &p.peaks.peaks {
        say!("  {:.6}  height {:.4e}", pk.freq_mhz, pk.height);
    }
    for m in &p.report.matches {
        say!(
            "match {:.6} -> {:.6}  rel. error {:.4} {}",
            m.line_freq,
            m.peak_freq,
            m.rel_err,
            if m.within_tol { "ok" } else { "out of tolerance" }
        );
    }
    for m in &p.report.missed {
        say!("missed line {:.6}", m.line_freq);
    }
    say!("artifacts written to {}", w.dir().display());
}

/// Parses `1.5d` (multiple of d) or a plain value in μm.
pub fn parse_length(s: &str, d: f64) -> Result<f64> {
    let t = s.trim();
    let v = match t.strip_suffix('d') {
        Some(m) => m.trim().parse::<f64>().map(|x| x * d),
        None => t.trim_end_matches("um").trim().parse::<f64>(),
    }
    .map_err(|_| Error::Parameter(format!("cannot parse length '{s}'; use e.g. 12 or 1.5d")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parameter(format!("length must be > 0, got '{s}'")));
    }
    Ok(v)
}

fn cmd_sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<i32> {
    let flag_family = a.family.as_deref().map(str::parse::<TransformFamily>).transpose()?;
    let fallback = flag_family.map_or("s4", family_default_preset);
    let (mut cfg, source) = base_config(g, fallback)?;
    let mut sc = cfg.sweep.unwrap_or(config::SweepConfig {
        family: flag_family.or(cfg.geometry.family).ok_or_else(|| {
            Error::Parameter("no sweep family: pass --family or set sweep.family".into())
        })?,
        steps: 21,
        from: None,
        to: None,
    });
    if let Some(f) = flag_family {
        if f != sc.family {
            sc.from = None;
            sc.to = None;
        }
        sc.family = f;
    }
    if let Some(s) = a.steps {
        sc.steps = s;
    }
    if a.from.is_some() {
        sc.from = a.from;
    }
    if a.to.is_some() {
        sc.to = a.to;
    }
    let d = cfg.geometry.d_um;
    if let Some(z) = &a.z_max {
        if sc.family != TransformFamily::HexagonToAntiprism {
            return Err(Error::Parameter("--z-max applies to the hexagon-antiprism family only".into()));
        }
        sc.to = Some(parse_length(z, d)? / d);
    }
    if sc.steps < 2 {
        return Err(Error::Parameter(format!("sweep steps must be >= 2, got {}", sc.steps)));
    }
    cfg.sweep = Some(sc);
    cfg.validate()?;
    let settings = cfg.pipeline_settings()?;
    let (lo, hi) = sc.range();
    let result: SweepResult = if sc.family == TransformFamily::HexagonToAntiprism {
        if !(lo < hi) {
            return Err(Error::Parameter(format!("sweep range must be increasing, got [{lo}, {hi}]")));
        }
        let z: Vec<f64> = (0..sc.steps)
            .map(|i| d * (lo + (hi - lo) * i as f64 / (sc.steps - 1) as f64))
            .collect();
        hexagon_sweep(&z, d, &settings)?
    } else {
        sweep(sc.family, sc.steps, Some((lo, hi)), d, &settings)?
    };
    let w = writer(g, &cfg)?;
    artifacts::write_sweep(&w, &cfg, &result)?;
    if g.json {
        let s = json!({
            "metadata": w.metadata(),
            "source": source,
            "family": result.family,
            "values": result.values,
            "output": w.dir().display().to_string(),
        });
        say!("{}", serde_json::to_string_pretty(&s)?);
    } else {
        say!("source: {source}");
        say!(
            "swept {:?} over {} values from {} to {}",
            result.family,
            result.values.len(),
            lo,
            hi
        );
        say!("artifacts written to {}", w.dir().display());
    }
    Ok(EXIT_OK)
}

fn parse_overrides(raw: &[String]) -> Result<Overrides> {
    let mut o = Overrides::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("override '{item}' is not NAME=VALUE")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("override '{item}' has a non-numeric value")))?;
        o.insert(k.trim().to_string(), v);
    }
    Ok(o)
}

fn cmd_verify(g: &GlobalArgs, a: &VerifyArgs) -> Result<i32> {
    let report = run_verify(&parse_overrides(&a.overrides)?);
    if g.json {
        say!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for c in &report.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Warn => "WARN",
            };
            say!("{tag} {}: {}", c.name, c.detail);
        }
        say!(
            "{} passed, {} failed, {} warnings",
            report.count(Status::Pass),
            report.count(Status::Fail),
            report.count(Status::Warn)
        );
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
}
