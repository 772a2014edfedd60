//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bdris_core::channel::{sample_scenario, synth_channels, ChannelSet, ElementGrid, ScenarioConfig};
use bdris_core::objective::{fd_check, Assignment, PowerAlloc};
use bdris_core::ris::{make_feasible_random, Architecture, Mode, Side};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::{parse_arch, parse_config, parse_mode, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ResultsTable};
use crate::plot::render_svg;
use crate::summary::summarize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Largest relative gradient error `gradcheck` accepts.
pub const GRADCHECK_LIMIT: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "bdris", version, about = "BD-RIS assisted UAV downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file and print the resolved settings.
    ValidateConfig { path: PathBuf },
    /// Run the configured experiment.
    Run {
        path: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; defaults to the config's output path, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per CPU).
        #[arg(long)]
        workers: Option<usize>,
        /// Record wall-clock time per row.
        #[arg(long)]
        timing: bool,
    },
    /// Run the experiment over a range of K or P_t.
    Sweep {
        path: PathBuf,
        /// `K=start:end:step` or `pt_dbm=start:end:step`, end inclusive.
        #[arg(long, default_value = "K=8:32:4")]
        param: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        timing: bool,
    },
    /// Compare the analytic gradient with central differences.
    Gradcheck {
        #[arg(long = "K", default_value_t = 6)]
        k: usize,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// single | group | fully
        #[arg(long, default_value = "fully")]
        arch: String,
        /// Number of groups for the group-connected architecture.
        #[arg(long, default_value_t = 2)]
        groups: usize,
        /// reflective | transmissive | hybrid
        #[arg(long, default_value = "hybrid")]
        mode: String,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
    /// Plot SE against K from a results CSV.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parsed `--param` range.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepParam {
    K(Vec<usize>),
    PtDbm(Vec<f64>),
}

/// Parses `name=start:end:step` with an inclusive end.
pub fn parse_sweep(spec: &str) -> Result<SweepParam> {
    let bad = |why: &str| HarnessError::Input(format!("invalid --param `{spec}`: {why}"));
    let (name, range) = spec.split_once('=').ok_or_else(|| bad("expected name=start:end:step"))?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:end:step"));
    }
    match name.trim() {
        "K" | "k" => {
            let v: Vec<usize> = parts
                .iter()
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("K bounds must be integers"))?;
            let (a, b, step) = (v[0], v[1], v[2]);
            if step == 0 || a == 0 || b < a {
                return Err(bad("need 0 < start <= end and step > 0"));
            }
            Ok(SweepParam::K((a..=b).step_by(step).collect()))
        }
        "pt_dbm" | "pt" => {
            let v: Vec<f64> = parts
                .iter()
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bounds must be numbers"))?;
            let (a, b, step) = (v[0], v[1], v[2]);
            if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                return Err(bad("need start <= end and step > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok(SweepParam::PtDbm((0..=n).map(|i| a + i as f64 * step).collect()))
        }
        other => Err(bad(&format!("unknown parameter `{other}` (K | pt_dbm)"))),
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    parse_config(&text)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn execute(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    timing: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    cfg.record_timing |= timing;
    let table = run_experiment(&cfg)?;
    let csv = table.to_csv_string();
    let summary = summarize(&table);
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    match out.or_else(|| cfg.output.csv.clone()) {
        Some(path) => {
            write_file(&path, csv.as_bytes())?;
            let _ = write!(stdout, "{}", summary.render());
            let _ = writeln!(stdout, "wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => {
            let _ = write!(stdout, "{csv}");
            let _ = write!(stderr, "{}", summary.render());
        }
    }
    if failed > 0 {
        let _ = writeln!(stderr, "warning: {failed} row(s) failed and are marked `error`");
    }
    if let Some(path) = &cfg.output.plot {
        match render_svg(&summary) {
            Ok(svg) => write_file(path, svg.as_bytes())?,
            Err(e) => {
                let _ = writeln!(stderr, "plot skipped: {e}");
            }
        }
    }
    Ok(())
}

fn gradcheck(k: usize, n: usize, seed: u64, arch: &str, groups: usize, mode: &str, step: f64) -> Result<f64> {
    let kind = parse_arch(arch).ok_or_else(|| HarnessError::Input(format!("unknown architecture `{arch}`")))?;
    let mode = parse_mode(mode).ok_or_else(|| HarnessError::Input(format!("unknown mode `{mode}`")))?;
    if k == 0 || n == 0 {
        return Err(HarnessError::Input("K and N must be positive".into()));
    }
    let arch = Architecture::for_elements(kind, groups, k)?;
    let scn_cfg = ScenarioConfig { num_ues: n, grid: ElementGrid::near_square(k, 0.5), ..ScenarioConfig::default() };
    let scn = sample_scenario(&scn_cfg, seed)?;
    let raw = synth_channels(&scn, &scn_cfg, seed ^ 0x9e37_79b9)?;
    let sides = (0..n)
        .map(|i| match mode {
            Mode::Reflective => Side::Reflect,
            Mode::Transmissive => Side::Transmit,
            Mode::Hybrid if i % 2 == 0 => Side::Transmit,
            Mode::Hybrid => Side::Reflect,
        })
        .collect();
    // Unit noise and unit powers keep every user near 0 dB SNR.
    let ch = ChannelSet::new(raw.h().to_vec(), raw.f().clone(), 1.0)?.with_sides(sides)?;
    let cfg = make_feasible_random(arch, mode, k, seed.wrapping_add(1))?;
    let pa = PowerAlloc::uniform(n, n as f64)?;
    Ok(fd_check(&ch, &cfg, &pa, &Assignment::identity(n), step)?)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::ValidateConfig { path } => {
            let cfg = read_config(&path)?;
            let _ = writeln!(stdout, "{}: ok", path.display());
            let _ = write!(stdout, "{}", cfg.to_toml());
        }
        Command::Run { path, seed, out, workers, timing } => {
            execute(read_config(&path)?, seed, out, workers, timing, stdout, stderr)?;
        }
        Command::Sweep { path, param, seed, out, workers, timing } => {
            let mut cfg = read_config(&path)?;
            match parse_sweep(&param)? {
                SweepParam::K(ks) => {
                    for &k in &ks {
                        cfg.system.architecture(k)?;
                    }
                    cfg.system.k_values = ks;
                }
                SweepParam::PtDbm(pts) => cfg.pt_dbm = pts,
            }
            execute(cfg, seed, out, workers, timing, stdout, stderr)?;
        }
        Command::Gradcheck { k, n, seed, arch, groups, mode, step } => {
            let err = gradcheck(k, n, seed, &arch, groups, &mode, step)?;
            let _ = writeln!(stdout, "max relative error: {err:.3e}");
            if !(err <= GRADCHECK_LIMIT) {
                let _ = writeln!(stderr, "gradient check failed: {err:.3e} exceeds {GRADCHECK_LIMIT:e}");
                return Ok(EXIT_RUNTIME);
            }
        }
        Command::Plot { input, out } => {
            let file = fs::File::open(&input).map_err(|source| HarnessError::Io { path: input.clone(), source })?;
            let table = ResultsTable::read_csv(file)?;
            let summary = summarize(&table);
            for w in &summary.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            write_file(&out, render_svg(&summary)?.as_bytes())?;
            let _ = writeln!(stdout, "wrote {}", out.display());
        }
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
