//! `nbldpc`: build codes and interleavers, run FER simulations.

mod manifest;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nbldpc::interleaver::global_girth;
use nbldpc::sim::{run_sweep, CSV_HEADER};
use nbldpc::{
    CodeFile, Encoder, Field, InterleaverError, InterleaverKind, InterleaverPattern, Modulation, PegOptions,
    SimConfig, SimError, Sweep, System, TannerError, TannerGraph,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use manifest::{manifest_path, sha256_hex, FileRef, RunManifest, SimulateConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<TannerError> for CliError {
    fn from(e: TannerError) -> Self {
        match e {
            TannerError::NotDivisible { .. } | TannerError::Infeasible(_) | TannerError::RankDeficient { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<InterleaverError> for CliError {
    fn from(e: InterleaverError) -> Self {
        match e {
            InterleaverError::Format(_) | InterleaverError::UnknownKind(_) | InterleaverError::NotBijection(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(_) => CliError::Io(e.to_string()),
            SimError::Code(c) => c.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "nbldpc", version, about = "Non-binary LDPC codes with bit-interleaved QAM over Rayleigh fading")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a regular code with the PEG construction.
    MakeCode(MakeCodeArgs),
    /// Build a bit interleaver for a code file.
    MakeInterleaver(MakeInterleaverArgs),
    /// Run an Eb/N0 sweep and write a results CSV plus manifest.
    Simulate(SimulateArgs),
    /// Repeat a run recorded in a manifest and compare the results.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct MakeCodeArgs {
    /// Field order q.
    #[arg(long, value_parser = parse_field)]
    field: u32,
    #[arg(long)]
    n_symbols: usize,
    #[arg(long, default_value_t = 2)]
    dv: usize,
    #[arg(long)]
    dc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct MakeInterleaverArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: InterleaverKind,
    #[arg(long, value_parser = parse_modulation)]
    modulation: Modulation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permute bit slots inside each coded symbol (PEG only).
    #[arg(long, value_enum, default_value = "off")]
    local_scramble: OnOff,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    interleaver: PathBuf,
    #[arg(long, value_parser = parse_modulation)]
    modulation: Modulation,
    /// Eb/N0 sweep in dB, `START:STOP:STEP`.
    #[arg(long)]
    ebn0: String,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long, default_value_t = nbldpc::decoder::DEFAULT_MAX_ITER)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the reproduced CSV.
    #[arg(long)]
    out: PathBuf,
    /// Override the recorded worker count; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_field(s: &str) -> Result<u32, String> {
    match s {
        "4" => Ok(2),
        "16" => Ok(4),
        "64" => Ok(6),
        "256" => Ok(8),
        _ => Err("field must be one of 4, 16, 64, 256".into()),
    }
}

fn parse_kind(s: &str) -> Result<InterleaverKind, String> {
    s.parse().map_err(|e: InterleaverError| e.to_string())
}

fn parse_modulation(s: &str) -> Result<Modulation, String> {
    s.parse().map_err(|e: nbldpc::modem::ModemError| e.to_string())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn utf8(path: &Path, bytes: &[u8]) -> Result<String, CliError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| CliError::Io(format!("{}: not UTF-8 text", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn make_code(args: MakeCodeArgs) -> Result<(), CliError> {
    let field = Arc::new(Field::new(args.field).map_err(|e| CliError::Usage(e.to_string()))?);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let graph = TannerGraph::peg_construct(args.n_symbols, args.dv, args.dc, field, &mut rng)?;
    let k = Encoder::new(&graph)?.k();
    let file = CodeFile::new(graph, args.seed);
    write_text(&args.out, &file.to_text())?;
    let g = &file.graph;
    println!(
        "N={} M={} K={} n={} bits rate={:.4}",
        g.n_symbols(),
        g.n_checks(),
        k,
        g.n_symbols() * g.field().p() as usize,
        k as f64 / g.n_symbols() as f64
    );
    println!("girth {}", file.girth);
    Ok(())
}

fn load_code(path: &Path) -> Result<(CodeFile, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let code = CodeFile::from_text(&utf8(path, &bytes)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((code, bytes))
}

fn load_interleaver(path: &Path) -> Result<(InterleaverPattern, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let pat = InterleaverPattern::from_text(&utf8(path, &bytes)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((pat, bytes))
}

fn make_interleaver(args: MakeInterleaverArgs) -> Result<(), CliError> {
    let (code, _) = load_code(&args.code)?;
    let g = &code.graph;
    let p = g.field().p() as usize;
    let m = args.modulation.bits();
    if m != p {
        return Err(CliError::Usage(format!(
            "{} carries {m} bits per point but the code has {p} bits per symbol",
            args.modulation
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pat = match args.kind {
        InterleaverKind::Identity => InterleaverPattern::identity(g.n_symbols(), p, m)?,
        InterleaverKind::Random => InterleaverPattern::random(g.n_symbols() * p, p, m, args.seed, &mut rng)?,
        InterleaverKind::Peg => {
            let opts = PegOptions {
                shuffle_order: false,
                local_scramble: matches!(args.local_scramble, OnOff::On),
            };
            InterleaverPattern::peg(g, m, opts, args.seed, &mut rng)?
        }
    };
    write_text(&args.out, &pat.to_text())?;
    println!("global girth {}", global_girth(g, &pat)?);
    Ok(())
}

struct Run {
    config: SimulateConfig,
    code: PathBuf,
    interleaver: PathBuf,
    out: PathBuf,
}

/// Loads the artifacts, runs the sweep while streaming rows to `out`, and
/// returns the manifest describing the run.
fn execute(run: &Run) -> Result<RunManifest, CliError> {
    let cfg = &run.config;
    let modulation: Modulation = parse_modulation(&cfg.modulation).map_err(CliError::Usage)?;
    let sweep: Sweep = cfg.ebn0.parse().map_err(|e: SimError| CliError::Usage(e.to_string()))?;
    let sim_cfg = SimConfig {
        sweep,
        max_frames: cfg.max_frames,
        min_frame_errors: cfg.min_errors,
        max_iter: cfg.max_iters,
        master_seed: cfg.seed,
        workers: cfg.workers,
    };
    sim_cfg.validate()?;
    let points = sweep.points()?;

    let (code, code_bytes) = load_code(&run.code)?;
    let (pat, pat_bytes) = load_interleaver(&run.interleaver)?;
    let system = System::new(code.graph, pat, modulation)?;

    let file = fs::File::create(&run.out).map_err(|e| CliError::io(&run.out, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}").map_err(|e| CliError::io(&run.out, e))?;
    run_sweep(&system, &sim_cfg, |rec| {
        writeln!(w, "{}", rec.csv_row())?;
        w.flush()
    })
    .map_err(|e| match e {
        SimError::Io(io) => CliError::io(&run.out, io),
        other => other.into(),
    })?;
    drop(w);
    let results = read_bytes(&run.out)?;

    Ok(RunManifest {
        tool: env!("CARGO_BIN_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        code: FileRef::of(&run.code, &code_bytes),
        interleaver: FileRef::of(&run.interleaver, &pat_bytes),
        results: FileRef::of(&run.out, &results),
        code_rate: system.rate(),
        esn0_db: points.iter().map(|&e| system.esn0_db(e)).collect(),
    })
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let run = Run {
        config: SimulateConfig {
            modulation: args.modulation.to_string(),
            ebn0: args.ebn0,
            max_frames: args.max_frames,
            min_errors: args.min_errors,
            max_iters: args.max_iters,
            workers: args.workers,
            seed: args.seed,
        },
        code: args.code,
        interleaver: args.interleaver,
        out: args.out,
    };
    let manifest = execute(&run)?;
    let path = manifest_path(&run.out);
    manifest.save(&path)?;
    println!("results {}", run.out.display());
    println!("manifest {}", path.display());
    Ok(())
}

fn rerun(args: RerunArgs) -> Result<(), CliError> {
    let recorded = RunManifest::load(&args.manifest)?;
    for input in [&recorded.code, &recorded.interleaver] {
        let bytes = read_bytes(&input.path)?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(CliError::Usage(format!(
                "{} changed since the manifest was written",
                input.path.display()
            )));
        }
    }
    let mut config = recorded.config.clone();
    if let Some(w) = args.workers {
        config.workers = w;
    }
    let run = Run {
        config,
        code: recorded.code.path.clone(),
        interleaver: recorded.interleaver.path.clone(),
        out: args.out,
    };
    let fresh = execute(&run)?;
    if fresh.results.sha256 != recorded.results.sha256 {
        return Err(CliError::Usage(format!(
            "results differ from the manifest (sha256 {} vs {})",
            fresh.results.sha256, recorded.results.sha256
        )));
    }
    println!("results {} match the manifest", run.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let result = match cli.command {
        Command::MakeCode(a) => make_code(a),
        Command::MakeInterleaver(a) => make_interleaver(a),
        Command::Simulate(a) => simulate(a),
        Command::Rerun(a) => rerun(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
