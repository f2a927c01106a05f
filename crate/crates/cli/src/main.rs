//! Command-line front end for the kP power simulator and horizontal attack.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors (bad
//! files, bad scalars, failed runs).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use kpsim::accelerator::run_kp;
use kpsim::attack::{run_attack, Provenance};
use kpsim::curve::CurveB233;
use kpsim::power::{
    builtin_profile, builtin_profiles, simulate_power, synthesize_raw, DEFAULT_SAMPLES_PER_CYCLE,
};
use kpsim::trace::{compress_mean, compress_msq, read_trace, write_trace, CompressedTrace, TraceFile};

#[derive(Parser)]
#[command(name = "kpsim", version, about = "B-233 kP power simulator and horizontal attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a kP execution and write its power trace.
    Simulate(SimulateArgs),
    /// Run the comparison-to-the-mean attack against a trace file.
    Attack(AttackArgs),
    /// Compare mean and mean-of-squares compression of a raw trace.
    Compare(CompareArgs),
    /// Export a trace file as CSV.
    Export(ExportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Htrc,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scalar k as a hex string; random when omitted.
    #[arg(long)]
    scalar: Option<String>,
    /// Seed for scalar generation and simulated noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leakage profile name (noUltra or ultra).
    #[arg(long, default_value = "noUltra")]
    profile: String,
    /// Store oscilloscope-style raw samples instead of one value per cycle.
    #[arg(long)]
    raw: bool,
    /// Samples per clock cycle for raw output.
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_CYCLE)]
    samples_per_cycle: usize,
    /// Gaussian noise sigma added per raw sample.
    #[arg(long, default_value_t = 0.0)]
    sample_noise: f64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Htrc)]
    format: Format,
    /// Omit the scalar from the metadata sidecar.
    #[arg(long)]
    redact: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Trace file (HTRC). Raw traces are compressed with mean-of-squares.
    #[arg(long)]
    trace: PathBuf,
    /// True scalar as hex; read from the trace's sidecar when omitted.
    #[arg(long)]
    scalar: Option<String>,
    /// Write the per-candidate report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Raw trace file (HTRC).
    #[arg(long)]
    trace: PathBuf,
    /// True scalar as hex; read from the trace's sidecar when omitted.
    #[arg(long)]
    scalar: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// Trace file (HTRC).
    #[arg(long)]
    trace: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Attack(args) => attack(args),
        Command::Compare(args) => compare(args),
        Command::Export(args) => export(args),
    }
}

fn parse_scalar(hex: &str) -> Result<BigUint> {
    let hex = hex.trim().trim_start_matches("0x");
    BigUint::parse_bytes(hex.as_bytes(), 16).ok_or_else(|| anyhow!("bad scalar hex: {hex:?}"))
}

fn sidecar_path(trace_path: &Path) -> PathBuf {
    let mut os = trace_path.as_os_str().to_owned();
    os.push(".meta");
    PathBuf::from(os)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let curve = CurveB233::standard();
    let profile = builtin_profile(&args.profile).with_context(|| {
        let names: Vec<String> = builtin_profiles().into_iter().map(|p| p.name).collect();
        format!("known profiles: {}", names.join(", "))
    })?;
    let k = match &args.scalar {
        Some(hex) => parse_scalar(hex)?,
        None => {
            let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
            curve.random_scalar(&mut rng)
        }
    };
    let exec = run_kp(&k, &curve.generator(), &curve).context("kP run failed")?;
    let power = simulate_power(&exec, &profile, args.seed);

    let mut meta = String::new();
    if !args.redact {
        writeln!(meta, "scalar={}", k.to_str_radix(16))?;
    }
    writeln!(meta, "profile={}", profile.name)?;
    writeln!(meta, "seed={}", args.seed)?;
    writeln!(meta, "slot_offset={}", power.slot_offset)?;
    writeln!(meta, "num_slots={}", power.num_slots)?;
    writeln!(meta, "slot_len={}", power.slot_len)?;

    if args.raw {
        let raw = synthesize_raw(&power, args.samples_per_cycle, args.sample_noise, args.seed);
        writeln!(meta, "samples_per_cycle={}", raw.samples_per_cycle)?;
        writeln!(meta, "sample_noise={}", args.sample_noise)?;
        if args.format == Format::Csv {
            bail!("raw traces can only be written as htrc");
        }
        write_trace(&args.out, &TraceFile::Raw(raw))?;
    } else {
        let trace = CompressedTrace::from_power(&power);
        match args.format {
            Format::Htrc => write_trace(&args.out, &TraceFile::Compressed(trace))?,
            Format::Csv => {
                let mut buf = Vec::new();
                trace.write_csv(&mut buf)?;
                write_atomic(&args.out, &buf)?;
            }
        }
    }
    write_atomic(&sidecar_path(&args.out), meta.as_bytes())?;
    println!(
        "simulated kP over {} cycles ({} slots of {}), profile {}, written to {}",
        power.values.len(),
        power.num_slots,
        power.slot_len,
        profile.name,
        args.out.display()
    );
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn load_scalar(explicit: Option<&str>, trace_path: &Path) -> Result<BigUint> {
    if let Some(hex) = explicit {
        return parse_scalar(hex);
    }
    let sidecar = sidecar_path(trace_path);
    let text = fs::read_to_string(&sidecar).with_context(|| {
        format!(
            "no --scalar given and no sidecar at {}",
            sidecar.display()
        )
    })?;
    for line in text.lines() {
        if let Some(hex) = line.strip_prefix("scalar=") {
            return parse_scalar(hex);
        }
    }
    bail!(
        "sidecar {} has no scalar entry (written with --redact?)",
        sidecar.display()
    )
}

fn load_compressed(path: &Path) -> Result<CompressedTrace> {
    let file = read_trace(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.into_compressed())
}

fn attack(args: AttackArgs) -> Result<()> {
    let k = load_scalar(args.scalar.as_deref(), &args.trace)?;
    let trace = load_compressed(&args.trace)?;
    let provenance = Provenance {
        trace_path: Some(args.trace.display().to_string()),
        ..Provenance::default()
    };
    let report = run_attack(&trace, &k, provenance).map_err(|e| anyhow!(e))?;
    let mut out = Vec::new();
    report.write_summary(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    if let Some(path) = &args.out {
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        write_atomic(path, &csv)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let k = load_scalar(args.scalar.as_deref(), &args.trace)?;
    let file = read_trace(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let raw = match file {
        TraceFile::Raw(raw) => raw,
        TraceFile::Compressed(_) => bail!("compare needs a raw trace; this file is compressed"),
    };
    for (name, compressed) in [("mean", compress_mean(&raw)), ("msq", compress_msq(&raw))] {
        let report = run_attack(&compressed, &k, Provenance::default()).map_err(|e| anyhow!(e))?;
        println!(
            "{name}: best delta = {:.2}% at clock cycle j = {}",
            report.best.1, report.best.0
        );
    }
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let trace = load_compressed(&args.trace)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    write_atomic(&args.out, &buf)?;
    println!(
        "exported {} values to {}",
        trace.values.len(),
        args.out.display()
    );
    Ok(())
}
