use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beyondq_bench::{list_experiments, run_manifest, validate, BenchError, RunManifest, RunOptions};

#[derive(Parser)]
#[command(name = "beyondq", version, about = "Run pilot-wave and collapse-model experiments from manifests")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a manifest and write CSV, summary.json and record.json.
    Run {
        manifest: PathBuf,
        /// Override the manifest's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the manifest's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a manifest against its kind's schema.
    Validate { manifest: PathBuf },
    /// Show the experiment catalog.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| BenchError::Io(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run { manifest, seed, out } => {
            let m = RunManifest::load(&manifest)?;
            let record = run_manifest(&m, &RunOptions { seed, out })?;
            println!("{} seed={} wall={:.2}s", record.kind, record.seed, record.wall_time_s);
            for o in &record.outputs {
                println!("  {} {} ({} bytes)", o.sha256, o.file, o.bytes);
            }
        }
        Command::Validate { manifest } => {
            let m = validate(&manifest)?;
            println!("ok: {} manifest with seed {}", m.kind.name(), m.seed);
        }
        Command::List { json } => {
            let catalog = list_experiments();
            if json {
                println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
            } else {
                for e in catalog {
                    println!("{:<12} {}\n{:<12} [{}]", e.kind, e.description, "", e.reference);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
