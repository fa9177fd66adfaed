//! `piezobeam` command line: `design | verify | simulate | spectrum | sweep`.
//!
//! Exit status: 0 on success, 1 when the physics or the requested design is
//! rejected (bad parameters, epsilon, amplifiers) or a file cannot be
//! written, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::design::{self, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::io::{write_grid_csv, write_json, write_normalized_csv, write_trace_csv, RunManifest};
use crate::material::{derive_constants, MaterialParams, PRESET_DIR_ENV};
use crate::orfd::build_system;
use crate::simulation::{self, Integrator, SimulationOptions};
use crate::spectrum;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "piezobeam",
    version,
    about = "Boundary feedback design and ORFD verification for magnetizable piezoelectric beams",
    arg_required_else_help = true,
    after_help = format!("Presets: built-in `table1`, or <name>.toml in the directory named by ${PRESET_DIR_ENV}.")
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute eta, sigma_max and the safe amplifier intervals.
    Design(DesignArgs),
    /// Check a concrete amplifier pair against the design.
    Verify(VerifyArgs),
    /// Integrate the semi-discrete closed loop from hat initial data.
    Simulate(SimulateArgs),
    /// Spectral abscissa of the closed loop at one amplifier pair.
    Spectrum(SpectrumArgs),
    /// Spectral abscissa over a grid of amplifier pairs.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MaterialArgs {
    /// Named parameter preset.
    #[arg(long, default_value = "table1", conflicts_with = "config")]
    pub preset: String,
    /// Parameter file with `L, rho, mu, alpha, gamma, beta`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl MaterialArgs {
    fn load(&self) -> Result<MaterialParams> {
        match &self.config {
            Some(path) => MaterialParams::from_config_file(path),
            None => MaterialParams::preset(&self.preset),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DesignArgs {
    #[command(flatten)]
    pub material: MaterialArgs,
    /// Young-inequality weight.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Also write the resolved parameters as a config file.
    #[arg(long)]
    pub emit_config: Option<PathBuf>,
    /// JSON report.
    #[arg(long, default_value = "design.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub material: MaterialArgs,
    #[arg(long)]
    pub xi1: f64,
    #[arg(long)]
    pub xi2: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value = "verify.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub material: MaterialArgs,
    #[arg(long)]
    pub xi1: f64,
    #[arg(long)]
    pub xi2: f64,
    /// Interior nodes.
    #[arg(long = "N", default_value_t = spectrum::DEFAULT_N)]
    pub n: usize,
    /// Final time [s].
    #[arg(long = "T", default_value_t = simulation::DEFAULT_T)]
    pub t_end: f64,
    /// Time step [s].
    #[arg(long, default_value_t = simulation::DEFAULT_DT)]
    pub dt: f64,
    /// Hat peak position as a fraction of the beam length.
    #[arg(long, default_value_t = simulation::DEFAULT_PEAK_FRAC)]
    pub peak_frac: f64,
    /// `modal` (exact propagator) or `midpoint`.
    #[arg(long, default_value = "modal", value_parser = parse_integrator)]
    #[serde(serialize_with = "serialize_display")]
    pub integrator: Integrator,
    /// Keep every k-th step in the trace.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Energy trace CSV; the normalized trace goes to `<stem>_normalized.csv`.
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
    /// Write M, A_h, B and the operators as text matrices into this directory.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub material: MaterialArgs,
    #[arg(long)]
    pub xi1: f64,
    #[arg(long)]
    pub xi2: f64,
    #[arg(long = "N", default_value_t = spectrum::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value = "spectrum.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub material: MaterialArgs,
    /// Use the published 7x6 reference grid instead of a log grid.
    #[arg(long)]
    pub table3: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub xi1_min: f64,
    #[arg(long, default_value_t = 1e12)]
    pub xi1_max: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub xi2_min: f64,
    #[arg(long, default_value_t = 1e12)]
    pub xi2_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    #[arg(long = "N", default_value_t = spectrum::DEFAULT_N)]
    pub n: usize,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

fn parse_integrator(s: &str) -> std::result::Result<Integrator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn serialize_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Parses `argv` (including the program name) and runs the command.
/// Output goes to the given writers; returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{text}");
            return EXIT_OK;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let kind = if e.is_domain() { "rejected" } else { "error" };
            let _ = writeln!(err, "{kind}: {e}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let start = Instant::now();
    let (name, params, options, primary, outputs, code) = match cmd {
        Command::Design(a) => {
            let p = a.material.load()?;
            let outputs = cmd_design(a, &p, out)?;
            ("design", p, serde_json::to_value(a)?, a.out.clone(), outputs, EXIT_OK)
        }
        Command::Verify(a) => {
            let p = a.material.load()?;
            let (outputs, code) = cmd_verify(a, &p, out, err)?;
            ("verify", p, serde_json::to_value(a)?, a.out.clone(), outputs, code)
        }
        Command::Simulate(a) => {
            let p = a.material.load()?;
            let outputs = cmd_simulate(a, &p, out, err)?;
            ("simulate", p, serde_json::to_value(a)?, a.out.clone(), outputs, EXIT_OK)
        }
        Command::Spectrum(a) => {
            let p = a.material.load()?;
            let outputs = cmd_spectrum(a, &p, out)?;
            ("spectrum", p, serde_json::to_value(a)?, a.out.clone(), outputs, EXIT_OK)
        }
        Command::Sweep(a) => {
            let p = a.material.load()?;
            let outputs = cmd_sweep(a, &p, out, err)?;
            ("sweep", p, serde_json::to_value(a)?, a.out.clone(), outputs, EXIT_OK)
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        params,
        options,
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = manifest.write(&primary)?;
    writeln!(out, "manifest: {}", path.display())?;
    Ok(code)
}

fn cmd_design(a: &DesignArgs, p: &MaterialParams, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let d = derive_constants(p)?;
    let des = design::amplifier_intervals(a.epsilon, &d, p)?;
    let report = json!({
        "epsilon": des.epsilon,
        "eps_bounds": design::epsilon_bounds(&d, p),
        "c1": [des.c1_lo, des.c1_hi],
        "c2": [des.c2_lo, des.c2_hi],
        "xi_star": [des.xi1_star, des.xi2_star],
        "sigma_max": d.sigma_max,
        "bigM": des.big_m,
        "delta": des.delta,
        "eta": d.eta,
        "alpha1": d.alpha1,
        "zeta_minus": d.zeta_minus,
        "zeta_plus": d.zeta_plus,
        "t_obs_min": d.t_obs_min,
    });
    write_json(&a.out, &report)?;
    let (lo, hi) = design::epsilon_bounds(&d, p);
    writeln!(out, "eta                 {:.6e} s/m", d.eta)?;
    writeln!(out, "sigma_max           {:.6} 1/s", d.sigma_max)?;
    writeln!(out, "M (delta optimal)   {:.6}", des.big_m)?;
    writeln!(out, "epsilon             {:e}  admissible ({lo:.4e}, {hi:.4e})", des.epsilon)?;
    writeln!(out, "(c1-, c1+)          ({:.6e}, {:.6e})", des.c1_lo, des.c1_hi)?;
    writeln!(out, "(c2-, c2+)          ({:.6e}, {:.6e})", des.c2_lo, des.c2_hi)?;
    writeln!(out, "xi*                 ({:.6e}, {:.6e})", des.xi1_star, des.xi2_star)?;
    writeln!(out, "T_obs >             {:.6e} s", d.t_obs_min)?;
    writeln!(out, "report: {}", a.out.display())?;
    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.emit_config {
        std::fs::write(path, p.to_config_string())?;
        writeln!(out, "config: {}", path.display())?;
        outputs.push(path.clone());
    }
    Ok(outputs)
}

fn cmd_verify(a: &VerifyArgs, p: &MaterialParams, out: &mut dyn Write, err: &mut dyn Write) -> Result<(Vec<PathBuf>, i32)> {
    let d = derive_constants(p)?;
    let check = design::verify_design(a.xi1, a.xi2, a.epsilon, &d, p)?;
    write_json(&a.out, &check)?;
    let code = if check.passed() {
        writeln!(out, "ok: (xi1, xi2) = ({:e}, {:e}) guarantees sigma_max = {:.6}", a.xi1, a.xi2, d.sigma_max)?;
        EXIT_OK
    } else {
        for v in &check.violations {
            writeln!(err, "violated: {v}")?;
        }
        writeln!(err, "guaranteed rate for these amplifiers: {:.6e} 1/s", check.guaranteed_sigma)?;
        EXIT_DOMAIN
    };
    writeln!(out, "report: {}", a.out.display())?;
    Ok((vec![a.out.clone()], code))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

fn cmd_simulate(a: &SimulateArgs, p: &MaterialParams, out: &mut dyn Write, err: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sys = build_system(p, a.xi1, a.xi2, a.n)?;
    let mut outputs = Vec::new();
    if let Some(dir) = &a.dump_matrices {
        outputs.extend(sys.dump_matrices(dir)?);
    }
    let s0 = simulation::hat_initial_condition(a.n, a.peak_frac)?;
    let opts = SimulationOptions { t_end: a.t_end, dt: a.dt, integrator: a.integrator, record_every: a.record_every };
    let trace = simulation::integrate(&sys, &s0, &opts)?;
    if trace.under_resolved && a.integrator == Integrator::ImplicitMidpoint {
        writeln!(
            err,
            "warning: dt = {:e} exceeds 0.2/|mu_max| = {:e}; the midpoint rule will not resolve the fastest modes",
            a.dt,
            0.2 / trace.spectral_radius_estimate
        )?;
    }
    write_trace_csv(&a.out, &trace)?;
    let normalized = sibling(&a.out, "_normalized");
    write_normalized_csv(&normalized, &trace)?;
    outputs.insert(0, a.out.clone());
    outputs.insert(1, normalized.clone());

    let last = trace.normalized().last().copied().unwrap_or(f64::NAN);
    writeln!(out, "steps {}  E(0) = {:.6e}  E(T)/E(0) = {:.6e}", (a.t_end / a.dt).round(), trace.initial_energy(), last)?;
    match simulation::fit_decay(&trace) {
        Ok(fit) => writeln!(
            out,
            "sigma_fit = {:.6}  r^2 = {:.6}  window ({:.4e}, {:.4e}){}",
            fit.sigma_fit,
            fit.r_squared,
            fit.window.0,
            fit.window.1,
            if fit.truncated { "  [truncated at the energy floor]" } else { "" }
        )?,
        Err(e) => writeln!(err, "no decay fit: {e}")?,
    }
    writeln!(out, "trace: {}\nnormalized: {}", a.out.display(), normalized.display())?;
    Ok(outputs)
}

fn cmd_spectrum(a: &SpectrumArgs, p: &MaterialParams, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let sys = build_system(p, a.xi1, a.xi2, a.n)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(dir) = &a.dump_matrices {
        outputs.extend(sys.dump_matrices(dir)?);
    }
    let s = spectrum::eigenvalues(&sys)?;
    write_json(&a.out, &s)?;
    writeln!(out, "max Re(mu) = {:.6}  spectral radius = {:.6e}", s.max_real, s.spectral_radius)?;
    writeln!(out, "residual max = {:.3e} ({:.3e} x norm)", s.residual_max, s.residual_max / s.norm)?;
    writeln!(out, "spectrum: {}", a.out.display())?;
    Ok(outputs)
}

fn cmd_sweep(a: &SweepArgs, p: &MaterialParams, out: &mut dyn Write, err: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let (xi1, xi2) = if a.table3 {
        (spectrum::table3::columns().to_vec(), spectrum::table3::ROWS.to_vec())
    } else {
        (
            spectrum::log_grid(a.xi1_min, a.xi1_max, a.points)?,
            spectrum::log_grid(a.xi2_min, a.xi2_max, a.points)?,
        )
    };
    let grid = match a.threads {
        Some(t) => spectrum::sweep_with_threads(p, &xi1, &xi2, a.n, t)?,
        None => spectrum::sweep(p, &xi1, &xi2, a.n)?,
    };
    write_grid_csv(&a.out, &grid)?;
    for c in grid.cells.iter().filter(|c| c.max_real.is_none()) {
        writeln!(err, "cell ({:e}, {:e}) failed: {}", c.xi1, c.xi2, c.error.as_deref().unwrap_or("unknown"))?;
    }
    writeln!(out, "{} cells ({} failed)  grid: {}", grid.cells.len(), grid.failed_cells(), a.out.display())?;
    Ok(vec![a.out.clone()])
}

/// Entry point used by the binary.
pub fn main_with_args() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
