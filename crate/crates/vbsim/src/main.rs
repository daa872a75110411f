//! Command-line interface of the dephasing simulator.
//!
//! Every subcommand reads its settings from an optional `--config` file of
//! `key=value` lines, overridden by repeatable `--set key=value` flags.
//! Unknown keys are rejected by name. Results go to stdout or `--output`;
//! `--manifest` writes the fully resolved settings back out as a reusable
//! configuration file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vbsim::config::{ConfigMap, Manifest};
use vbsim::consts;
use vbsim::couplings::CouplingSet;
use vbsim::lattice::{build_lattice, BathPreset, LatticeSpec, Selection};
use vbsim::phonon::{self, PhononParams};
use vbsim::trace::{Protocol, TimeGrid};
use vbsim::{analysis, exact, hpa};
use vbsim::{CoherenceTraceF64, Error, FieldParams, Result, SiteF64};

/// Environment variable supplying the default worker count for sampled
/// runs. Worker count never changes results, only wall time.
const WORKERS_ENV: &str = "VBSIM_WORKERS";

#[derive(Parser)]
#[command(
    name = "vbsim",
    version,
    about = "Dephasing and coherence times of a spin defect in a 2D honeycomb nuclear-spin bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a bath geometry and print it as CSV.
    Lattice(CommonArgs),
    /// Print site frequencies, defect couplings, and pair couplings.
    Couplings(CouplingsArgs),
    /// Coherence trace of a small bath by exact quantum evolution.
    Exact(CommonArgs),
    /// Coherence trace of a large bath by sampled bosonic-mode dynamics.
    Hpa(HpaArgs),
    /// Two-phonon dephasing rate of the defect.
    Phonon(CommonArgs),
    /// Coherence time and stretched-exponential fit of a trace CSV.
    Fit(FitArgs),
    /// Combined spin-bath plus phonon coherence time, with optional
    /// coupling sweep.
    Combine(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file of key=value lines; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Set or override one key, e.g. --set b_field_t=0.0015 (repeatable).
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the result here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Write the fully resolved settings as a reusable configuration file.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CouplingsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the long-form pair couplings (columns i,j,g_nn_rad_s).
    #[arg(long, value_name = "FILE")]
    pairs_output: Option<PathBuf>,
}

#[derive(Args)]
struct HpaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write every per-sample signal (columns sample,time_s,sx).
    #[arg(long, value_name = "FILE")]
    samples_output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trace CSV to analyse (columns time_s,sx[,sx_stderr]).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Lattice(args) => run_lattice(&args),
        Command::Couplings(args) => run_couplings(&args),
        Command::Exact(args) => run_exact(&args),
        Command::Hpa(args) => run_hpa_command(&args),
        Command::Phonon(args) => run_phonon(&args),
        Command::Fit(args) => run_fit(&args),
        Command::Combine(args) => run_combine(&args),
    }
}

/// Loads `--config` and applies every `--set` override.
fn load_config(args: &CommonArgs) -> Result<ConfigMap> {
    let mut cfg = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::new(),
    };
    for spec in &args.set {
        cfg.apply_override(spec)?;
    }
    Ok(cfg)
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content).map_err(Error::from),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn finish(args: &CommonArgs, manifest: &Manifest, content: &str) -> Result<()> {
    if let Some(path) = &args.manifest {
        std::fs::write(path, manifest.render())?;
    }
    write_output(args.output.as_deref(), content)
}

/// Resolves the bath-selection keys: exactly one of `preset`, `rings`, or
/// the `nearest_boron`/`nearest_nitrogen` pair, plus `bond_length_m`.
fn resolve_sites(cfg: &mut ConfigMap, manifest: &mut Manifest) -> Result<Vec<SiteF64>> {
    let preset = cfg.take("preset");
    let rings = cfg.take_usize("rings")?;
    let nearest_b = cfg.take_usize("nearest_boron")?;
    let nearest_n = cfg.take_usize("nearest_nitrogen")?;
    let bond_length = cfg
        .take_f64("bond_length_m")?
        .unwrap_or(consts::BOND_LENGTH);
    manifest.push_float("bond_length_m", bond_length);

    let selection = match (preset, rings, nearest_b, nearest_n) {
        (Some(name), None, None, None) => {
            let preset: BathPreset = name.parse()?;
            manifest.push("preset", preset.name());
            preset.selection()
        }
        (None, Some(count), None, None) => {
            manifest.push("rings", count.to_string());
            Selection::Rings(count)
        }
        (None, None, Some(boron), Some(nitrogen)) => {
            manifest.push("nearest_boron", boron.to_string());
            manifest.push("nearest_nitrogen", nitrogen.to_string());
            Selection::NearestCounts { boron, nitrogen }
        }
        (None, None, None, None) => {
            return Err(Error::Config(
                "no bath selected: set `preset`, `rings`, or both `nearest_boron` \
                 and `nearest_nitrogen`"
                    .to_string(),
            ));
        }
        _ => {
            return Err(Error::Config(
                "conflicting bath selection: set exactly one of `preset`, `rings`, \
                 or the `nearest_boron`/`nearest_nitrogen` pair"
                    .to_string(),
            ));
        }
    };
    build_lattice(&LatticeSpec::with_bond_length(selection, bond_length))
}

fn resolve_field(cfg: &mut ConfigMap, manifest: &mut Manifest) -> Result<FieldParams<f64>> {
    let b_field = cfg.take_f64("b_field_t")?.unwrap_or(1.0);
    manifest.push_float("b_field_t", b_field);
    Ok(FieldParams::new(b_field))
}

/// Resolves the keys shared by both trace engines.
fn resolve_trace_keys(
    cfg: &mut ConfigMap,
    manifest: &mut Manifest,
) -> Result<(f64, TimeGrid<f64>, Protocol)> {
    let temperature = cfg.take_f64("temperature_k")?.unwrap_or(0.1);
    let t_max = cfg
        .take_f64("t_max_s")?
        .ok_or_else(|| Error::Config("missing required key \"t_max_s\"".to_string()))?;
    let n_points = cfg.take_usize("n_points")?.unwrap_or(201);
    let protocol: Protocol = match cfg.take("protocol") {
        Some(raw) => raw.parse()?,
        None => Protocol::Fid,
    };
    manifest.push_float("temperature_k", temperature);
    manifest.push_float("t_max_s", t_max);
    manifest.push("n_points", n_points.to_string());
    manifest.push("protocol", protocol.name());
    Ok((temperature, TimeGrid::new(t_max, n_points)?, protocol))
}

fn float_cell(x: f64) -> String {
    format!("{x:.11e}")
}

fn trace_csv(trace: &CoherenceTraceF64, with_stderr: bool) -> String {
    let stderr = trace.stderr.as_ref().filter(|_| with_stderr);
    let mut out = String::from(if stderr.is_some() {
        "time_s,sx,sx_stderr\n"
    } else {
        "time_s,sx\n"
    });
    for k in 0..trace.len() {
        out.push_str(&float_cell(trace.times[k]));
        out.push(',');
        out.push_str(&float_cell(trace.sx[k]));
        if let Some(se) = stderr {
            out.push(',');
            out.push_str(&float_cell(se[k]));
        }
        out.push('\n');
    }
    out
}

fn run_lattice(args: &CommonArgs) -> Result<()> {
    let mut cfg = load_config(args)?;
    let mut manifest = Manifest::new();
    let sites = resolve_sites(&mut cfg, &mut manifest)?;
    cfg.ensure_empty("lattice")?;

    let mut out = String::from("index,species,x_m,y_m,ring\n");
    for site in &sites {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            site.index,
            site.species.species.label(),
            float_cell(site.position.x),
            float_cell(site.position.y),
            site.ring
        ));
    }
    finish(args, &manifest, &out)
}

fn run_couplings(args: &CouplingsArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    let mut manifest = Manifest::new();
    let sites = resolve_sites(&mut cfg, &mut manifest)?;
    let field = resolve_field(&mut cfg, &mut manifest)?;
    cfg.ensure_empty("couplings")?;

    let couplings = CouplingSet::build(&sites, &field)?;
    let mut out = String::from("index,species,x_m,y_m,ring,omega_n_rad_s,g_e_rad_s\n");
    for (i, site) in sites.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            site.index,
            site.species.species.label(),
            float_cell(site.position.x),
            float_cell(site.position.y),
            site.ring,
            float_cell(couplings.omega_n[i]),
            float_cell(couplings.g_e[i])
        ));
    }

    if let Some(path) = &args.pairs_output {
        let mut pairs = String::from("i,j,g_nn_rad_s\n");
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                pairs.push_str(&format!("{i},{j},{}\n", float_cell(couplings.g_nn[(i, j)])));
            }
        }
        std::fs::write(path, pairs)?;
    }
    finish(&args.common, &manifest, &out)
}

fn run_exact(args: &CommonArgs) -> Result<()> {
    let mut cfg = load_config(args)?;
    let mut manifest = Manifest::new();
    let sites = resolve_sites(&mut cfg, &mut manifest)?;
    let field = resolve_field(&mut cfg, &mut manifest)?;
    let (temperature, grid, protocol) = resolve_trace_keys(&mut cfg, &mut manifest)?;
    let method: exact::Method = match cfg.take("method") {
        Some(raw) => raw.parse()?,
        None => exact::Method::Block,
    };
    manifest.push("method", method.name());
    cfg.ensure_empty("exact")?;

    let trace = exact::coherence_trace(&exact::ExactConfig {
        sites,
        field,
        temperature,
        grid,
        protocol,
        method,
    })?;
    finish(args, &manifest, &trace_csv(&trace, false))
}

fn run_hpa_command(args: &HpaArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    let mut manifest = Manifest::new();
    let sites = resolve_sites(&mut cfg, &mut manifest)?;
    let field = resolve_field(&mut cfg, &mut manifest)?;
    let (temperature, grid, protocol) = resolve_trace_keys(&mut cfg, &mut manifest)?;

    let n_samples = cfg.take_usize("n_samples")?.unwrap_or(200);
    let seed = cfg.take_u64("seed")?.unwrap_or(1);
    let dt = cfg.take_f64("dt_s")?;
    let v_refresh_every = cfg.take_usize("v_refresh_every")?;
    let shift_mode: hpa::FreqShiftMode = match cfg.take("shift_mode") {
        Some(raw) => raw.parse()?,
        None => hpa::FreqShiftMode::MeanField,
    };
    let with_stderr = cfg.take_bool("stderr")?.unwrap_or(true);
    let workers = match cfg.take_usize("workers")? {
        Some(w) => Some(w),
        None => workers_from_env()?,
    };
    manifest.push("n_samples", n_samples.to_string());
    manifest.push("seed", seed.to_string());
    if let Some(dt) = dt {
        manifest.push_float("dt_s", dt);
    }
    if let Some(r) = v_refresh_every {
        manifest.push("v_refresh_every", r.to_string());
    }
    manifest.push(
        "shift_mode",
        match shift_mode {
            hpa::FreqShiftMode::MeanField => "mean-field",
            hpa::FreqShiftMode::SelfShift => "self-shift",
        },
    );
    manifest.push("stderr", if with_stderr { "true" } else { "false" });
    cfg.ensure_empty("hpa")?;

    let run = hpa::run_hpa_full(&hpa::HpaConfig {
        sites,
        field,
        temperature,
        grid,
        protocol,
        shift_mode,
        n_samples,
        seed,
        dt,
        v_refresh_every,
        workers,
        keep_samples: args.samples_output.is_some(),
    })?;

    if let Some(path) = &args.samples_output {
        let rows = run
            .sample_sx
            .as_ref()
            .expect("sample rows were requested from the engine");
        let mut out = String::from("sample,time_s,sx\n");
        for (k, row) in rows.iter().enumerate() {
            for (t, sx) in run.trace.times.iter().zip(row) {
                out.push_str(&format!("{k},{},{}\n", float_cell(*t), float_cell(*sx)));
            }
        }
        std::fs::write(path, out)?;
    }
    finish(&args.common, &manifest, &trace_csv(&run.trace, with_stderr))
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => raw.parse::<usize>().map(Some).map_err(|_| {
            Error::Config(format!(
                "{WORKERS_ENV}: cannot interpret {raw:?} as a worker count"
            ))
        }),
        Err(_) => Ok(None),
    }
}

/// Resolves the phonon-model keys shared by `phonon` and `combine`.
///
/// Couplings are given in ordinary frequency units (`*_hz`) and converted
/// to angular frequencies internally.
fn resolve_phonon(
    cfg: &mut ConfigMap,
    manifest: &mut Manifest,
    lambda00_required: bool,
) -> Result<PhononParams<f64>> {
    let temperature = cfg
        .take_f64("temperature_k")?
        .unwrap_or(consts::ROOM_TEMPERATURE);
    let lambda00_hz = match cfg.take_f64("lambda00_hz")? {
        Some(x) => x,
        None if lambda00_required => {
            return Err(Error::Config(
                "missing required key \"lambda00_hz\"".to_string(),
            ));
        }
        None => 0.0,
    };
    let lambda0_hz = cfg.take_f64("lambda0_hz")?.unwrap_or(0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut params = PhononParams::new(temperature, two_pi * lambda00_hz);
    params.lambda0 = two_pi * lambda0_hz;
    if let Some(x) = cfg.take_f64("debye_frequency_rad_s")? {
        params.debye_frequency = x;
    }
    if let Some(x) = cfg.take_f64("sound_speed_m_s")? {
        params.sound_speed = x;
    }
    if let Some(x) = cfg.take_f64("upsilon")? {
        params.upsilon = x;
    }
    if let Some(x) = cfg.take_f64("cell_factor_m")? {
        params.cell_factor = x;
    }
    manifest.push_float("temperature_k", params.temperature);
    manifest.push_float("lambda00_hz", lambda00_hz);
    manifest.push_float("lambda0_hz", lambda0_hz);
    manifest.push_float("debye_frequency_rad_s", params.debye_frequency);
    manifest.push_float("sound_speed_m_s", params.sound_speed);
    manifest.push_float("upsilon", params.upsilon);
    manifest.push_float("cell_factor_m", params.cell_factor);
    params.validate()?;
    Ok(params)
}

#[derive(Serialize)]
struct PhononReport {
    temperature_k: f64,
    lambda00_hz: f64,
    beta_omega_d: f64,
    /// Dephasing rate from the full spectral quadrature (1/s).
    gamma_per_s: f64,
    /// Low-temperature closed-form rate (1/s).
    gamma_low_t_per_s: f64,
    /// High-temperature closed-form rate (1/s).
    gamma_high_t_per_s: f64,
}

fn run_phonon(args: &CommonArgs) -> Result<()> {
    let mut cfg = load_config(args)?;
    let mut manifest = Manifest::new();
    let params = resolve_phonon(&mut cfg, &mut manifest, true)?;
    cfg.ensure_empty("phonon")?;

    let report = PhononReport {
        temperature_k: params.temperature,
        lambda00_hz: params.lambda00 / (2.0 * std::f64::consts::PI),
        beta_omega_d: params.beta_omega_d(),
        gamma_per_s: phonon::decay_rate_quadrature(&params)?,
        gamma_low_t_per_s: phonon::decay_rate_low_t(&params)?,
        gamma_high_t_per_s: phonon::decay_rate_high_t(&params)?,
    };
    finish(args, &manifest, &to_json(&report)?)
}

#[derive(Serialize)]
struct FitReport {
    /// Time at which the envelope first crosses one half, if it does (s).
    t2_s: Option<f64>,
    /// Stretched-exponential decay rate `c` in `exp(-(c t)^n)` (1/s).
    rate_per_s: f64,
    /// Stretched time constant `1 / c` (s).
    time_constant_s: f64,
    /// Stretching exponent `n`.
    exponent: f64,
    /// Root-mean-square residual over the fit window.
    residual_rms: f64,
    /// Number of points inside the fit window.
    n_fit_points: usize,
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    cfg.ensure_empty("fit")?;

    let trace = read_trace_csv(&args.input)?;
    let envelope = analysis::envelope(&trace);
    let fit = analysis::fit_stretched_exponential(&envelope)?;
    let report = FitReport {
        t2_s: analysis::coherence_time(&trace),
        rate_per_s: fit.rate,
        time_constant_s: 1.0 / fit.rate,
        exponent: fit.exponent,
        residual_rms: fit.residual,
        n_fit_points: fit.n_points,
    };
    finish(&args.common, &Manifest::new(), &to_json(&report)?)
}

#[derive(Serialize)]
struct SweepPointReport {
    lambda00_hz: f64,
    gamma_per_s: f64,
    t2_s: f64,
}

#[derive(Serialize)]
struct CombineReport {
    temperature_k: f64,
    lambda00_hz: f64,
    /// Phonon dephasing rate at `lambda00_hz` (1/s).
    gamma_per_s: f64,
    /// Spin-bath-only coherence time (s).
    t2_bath_s: f64,
    /// Combined coherence time (s).
    t2_combined_s: f64,
    /// Combined coherence time across the coupling sweep, if requested.
    sweep: Vec<SweepPointReport>,
}

fn run_combine(args: &CommonArgs) -> Result<()> {
    let mut cfg = load_config(args)?;
    let mut manifest = Manifest::new();
    let params = resolve_phonon(&mut cfg, &mut manifest, false)?;
    let t2_bath = cfg
        .take_f64("t2_bath_s")?
        .ok_or_else(|| Error::Config("missing required key \"t2_bath_s\"".to_string()))?;
    manifest.push_float("t2_bath_s", t2_bath);

    let lambda_min = cfg.take_f64("lambda_min_hz")?;
    let lambda_max = cfg.take_f64("lambda_max_hz")?;
    let n_lambda = cfg.take_usize("n_lambda")?;
    cfg.ensure_empty("combine")?;

    let two_pi = 2.0 * std::f64::consts::PI;
    let gamma = if params.lambda00 == 0.0 {
        0.0
    } else {
        phonon::decay_rate_quadrature(&params)?
    };

    let sweep = match (lambda_min, lambda_max, n_lambda) {
        (None, None, None) => Vec::new(),
        (Some(lo), Some(hi), Some(count)) => {
            if !(lo > 0.0 && hi >= lo) || count < 2 {
                return Err(Error::Config(
                    "sweep needs 0 < lambda_min_hz <= lambda_max_hz and n_lambda >= 2".to_string(),
                ));
            }
            manifest.push_float("lambda_min_hz", lo);
            manifest.push_float("lambda_max_hz", hi);
            manifest.push("n_lambda", count.to_string());
            let ratio = (hi / lo).ln();
            let lambdas: Vec<f64> = (0..count)
                .map(|k| two_pi * lo * (ratio * k as f64 / (count - 1) as f64).exp())
                .collect();
            phonon::t2_vs_lambda(&params, &lambdas, t2_bath)?
                .into_iter()
                .map(|p| SweepPointReport {
                    lambda00_hz: p.lambda00 / two_pi,
                    gamma_per_s: p.gamma,
                    t2_s: p.t2,
                })
                .collect()
        }
        _ => {
            return Err(Error::Config(
                "partial sweep specification: set all of lambda_min_hz, lambda_max_hz, \
                 and n_lambda, or none"
                    .to_string(),
            ));
        }
    };

    let report = CombineReport {
        temperature_k: params.temperature,
        lambda00_hz: params.lambda00 / two_pi,
        gamma_per_s: gamma,
        t2_bath_s: t2_bath,
        t2_combined_s: phonon::combined_t2(gamma, t2_bath)?,
        sweep,
    };
    finish(args, &manifest, &to_json(&report)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialising report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Reads a trace CSV produced by `exact` or `hpa`.
fn read_trace_csv(path: &Path) -> Result<CoherenceTraceF64> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty trace file", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| columns.iter().position(|&c| c == name);
    let time_col = col("time_s")
        .ok_or_else(|| Error::Config(format!("{}: no \"time_s\" column", path.display())))?;
    let sx_col =
        col("sx").ok_or_else(|| Error::Config(format!("{}: no \"sx\" column", path.display())))?;
    let stderr_col = col("sx_stderr");

    let mut times = Vec::new();
    let mut sx = Vec::new();
    let mut stderr = stderr_col.map(|_| Vec::new());
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |col: usize| -> Result<f64> {
            cells
                .get(col)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{}: row {}: cannot parse column {} as a number",
                        path.display(),
                        k + 2,
                        col + 1
                    ))
                })
        };
        times.push(parse(time_col)?);
        sx.push(parse(sx_col)?);
        if let (Some(out), Some(col)) = (stderr.as_mut(), stderr_col) {
            out.push(parse(col)?);
        }
    }
    let trace = CoherenceTraceF64 {
        times,
        sx,
        stderr,
        n_samples: 1,
    };
    trace.validate()?;
    Ok(trace)
}
