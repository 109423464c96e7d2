//! Command-line front end: argument parsing, scenario loading, output files
//! and the run manifest.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{coverage, laptop_link, laptop_pdp, LinkMode};
use crate::config::{preset_source, Scenario};
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::materials::{energy_fraction, load_profile_path, MaterialLibrary, DEFAULT_MATERIAL_NAMES};

pub const EXIT_OK: i32 = 0;
/// Bad command line (reported by the argument parser).
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_SIMULATION: i32 = 5;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const OUT_DIR_ENV: &str = "TERASIM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "terasim", version, about = "Indoor terahertz ray tracing: PDPs, link budgets and coverage maps")]
pub struct Cli {
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laptop-case power delay profiles, one CSV per frequency.
    Pdp {
        #[command(flatten)]
        common: CommonArgs,
        /// Frequency in GHz; repeat for several (default: scenario list).
        #[arg(long = "freq", value_name = "GHZ")]
        freqs: Vec<f64>,
    },
    /// Plug-to-laptop link budget.
    Laptop {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "los", value_parser = parse_mode)]
        mode: LinkMode,
    },
    /// SNR and capacity map over the room.
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "los", value_parser = parse_mode)]
        mode: LinkMode,
        /// Grid step in meters.
        #[arg(long, value_name = "M")]
        grid_step: Option<f64>,
    },
    /// Material data utilities.
    Materials {
        #[command(subcommand)]
        command: MaterialsCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum MaterialsCommand {
    /// Load a material CSV and report its grid, or the first invalid row.
    Validate { csv: PathBuf },
    /// Write the bundled parametric materials as CSV files.
    Export {
        #[arg(long, env = OUT_DIR_ENV, default_value = "terasim-out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Bundled preset the run starts from.
    #[arg(long, default_value = "ieee", value_name = "ieee|thz")]
    pub scenario: String,
    /// Scenario file merged over the preset.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "terasim-out")]
    pub out: PathBuf,
    /// First-order segment size in meters.
    #[arg(long, value_name = "M")]
    pub segment_size: Option<f64>,
    /// Highest interaction order (0, 1 or 2).
    #[arg(long, value_name = "0|1|2")]
    pub max_order: Option<u8>,
    /// Add received-power-proportional molecular noise.
    #[arg(long)]
    pub molecular_noise: bool,
}

fn parse_mode(s: &str) -> std::result::Result<LinkMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub preset: String,
    pub config_hash: String,
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub duration_s: f64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::NoPath => EXIT_SIMULATION,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("terasim: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Pdp { common, freqs } => {
            let mut run = Run::start("pdp", common)?;
            if !freqs.is_empty() {
                run.note("freq", freqs.iter().map(|f| fmt_sig(*f)).collect::<Vec<_>>().join(";"));
                run.scenario.pdp.frequencies_ghz = freqs.clone();
            }
            let s = &run.scenario;
            let mut files = Vec::new();
            for &f in &s.pdp.frequencies_ghz {
                let pdp = laptop_pdp(s, f, &s.tracing)?;
                files.push((format!("pdp_{}ghz.csv", file_number(f)), pdp.to_csv()));
            }
            for (name, body) in files {
                run.write(&name, &body)?;
            }
            run.finish()
        }
        Command::Laptop { common, mode } => {
            let mut run = Run::start("laptop", common)?;
            run.note("mode", mode.as_str().into());
            let r = laptop_link(&run.scenario, *mode)?;
            if r.selected_surface.is_none() {
                return Err(Error::NoPath);
            }
            let body = format!(
                "mode,snr_db,capacity_gbps,throughput_gbps,selected_surface\n{},{},{},{},{}\n",
                mode.as_str(),
                fmt_sig(r.snr_db),
                fmt_sig(r.capacity_bps / 1e9),
                fmt_sig(r.throughput_bps / 1e9),
                r.selected_surface.as_deref().unwrap_or("")
            );
            println!(
                "{} laptop link ({}): SNR {} dB, capacity {} Gbit/s, throughput {} Gbit/s via {}",
                run.scenario.name,
                mode.as_str(),
                fmt_sig(r.snr_db),
                fmt_sig(r.capacity_bps / 1e9),
                fmt_sig(r.throughput_bps / 1e9),
                r.selected_surface.as_deref().unwrap_or("-")
            );
            run.write("laptop.csv", &body)?;
            run.finish()
        }
        Command::Coverage { common, mode, grid_step } => {
            let mut run = Run::start("coverage", common)?;
            run.note("mode", mode.as_str().into());
            if let Some(step) = grid_step {
                run.note("grid_step", fmt_sig(*step));
                run.scenario.coverage.step_m = *step;
            }
            if let Some(order) = common.max_order {
                run.scenario.coverage.max_order = order;
            }
            let grid = coverage(&run.scenario, *mode, &run.scenario.coverage)?;
            run.write(&format!("coverage_{}.csv", mode.as_str()), &grid.to_csv())?;
            run.finish()
        }
        Command::Materials { command } => match command {
            MaterialsCommand::Validate { csv } => validate_material(csv),
            MaterialsCommand::Export { out } => export_materials(out),
        },
    }
}

fn file_number(f: f64) -> String {
    fmt_sig(f).trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One analysis run: resolved scenario, written files and manifest data.
struct Run {
    started: Instant,
    command: &'static str,
    preset: String,
    hash: Sha256,
    overrides: BTreeMap<String, String>,
    out: PathBuf,
    outputs: Vec<String>,
    scenario: Scenario,
}

impl Run {
    fn start(command: &'static str, args: &CommonArgs) -> Result<Run> {
        let started = Instant::now();
        let mut hash = Sha256::new();
        hash.update(command.as_bytes());
        hash.update([0]);
        hash.update(preset_source(&args.scenario)?.as_bytes());
        hash.update([0]);
        if let Some(path) = &args.config {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            hash.update(&bytes);
        }
        hash.update([0]);
        let mut scenario = Scenario::load(&args.scenario, args.config.as_deref())?;
        let mut run = Run {
            started,
            command,
            preset: args.scenario.clone(),
            hash,
            overrides: BTreeMap::new(),
            out: args.out.clone(),
            outputs: Vec::new(),
            scenario: {
                if let Some(s) = args.segment_size {
                    scenario.tracing.segment_size = s;
                }
                if let Some(o) = args.max_order {
                    scenario.tracing.max_order = o;
                }
                if args.molecular_noise {
                    scenario.radio.molecular_noise_enabled = true;
                }
                scenario
            },
        };
        if let Some(p) = &args.config {
            run.overrides.insert("config".into(), p.display().to_string());
        }
        if let Some(s) = args.segment_size {
            run.note("segment_size", fmt_sig(s));
        }
        if let Some(o) = args.max_order {
            run.note("max_order", o.to_string());
        }
        if args.molecular_noise {
            run.note("molecular_noise", "true".into());
        }
        run.scenario.tracing.validate()?;
        fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
        Ok(run)
    }

    /// Records a parameter that feeds the results.
    fn note(&mut self, key: &str, value: String) {
        self.hash.update(key.as_bytes());
        self.hash.update(b"=");
        self.hash.update(value.as_bytes());
        self.hash.update([0]);
        self.overrides.insert(key.into(), value);
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let manifest = RunManifest {
            tool: "terasim",
            version: crate::VERSION,
            command: self.command.to_string(),
            preset: self.preset,
            config_hash: hex::encode(self.hash.finalize()),
            overrides: self.overrides,
            outputs: self.outputs,
            duration_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        eprintln!("wrote {} file(s) to {}", manifest.outputs.len() + 1, self.out.display());
        Ok(())
    }
}

fn validate_material(csv: &Path) -> Result<()> {
    let profile = load_profile_path(csv)?;
    let (lo, hi) = profile.frequency_span_ghz();
    println!(
        "{}: {} samples ({} incidence x {} observation x {} frequency), {}-{} GHz",
        csv.display(),
        profile.sample_count(),
        profile.incidence_deg().len(),
        profile.observation_deg().len(),
        profile.frequency_ghz().len(),
        fmt_sig(lo),
        fmt_sig(hi)
    );
    // Where the specular angle is sampled, report whether it carries the peak
    // at the band edges.
    let freqs = profile.frequency_ghz();
    let edges = if freqs.len() > 1 { vec![freqs[0], freqs[freqs.len() - 1]] } else { vec![freqs[0]] };
    for f in edges {
        let Some(&theta) = profile.incidence_deg().iter().find(|t| profile.observation_deg().contains(t)) else {
            break;
        };
        let peak = profile
            .observation_deg()
            .iter()
            .map(|&o| (o, energy_fraction(&profile, theta, o, f).unwrap_or(0.0)))
            .fold((theta, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        println!(
            "  {} GHz, incidence {} deg: peak {} at observation {} deg",
            fmt_sig(f),
            fmt_sig(theta),
            fmt_sig(peak.1),
            fmt_sig(peak.0)
        );
    }
    Ok(())
}

fn export_materials(out: &Path) -> Result<()> {
    let lib = MaterialLibrary::defaults()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for name in DEFAULT_MATERIAL_NAMES {
        let path = out.join(format!("{name}.csv"));
        fs::write(&path, lib.profile(name)?.to_csv()).map_err(|e| Error::io(&path, e))?;
    }
    eprintln!("wrote {} material files to {}", DEFAULT_MATERIAL_NAMES.len(), out.display());
    Ok(())
}
