use std::path::PathBuf;
use std::process::ExitCode;

use bandlab::cli::{self, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bandlab", version, about = "Random band-matrix spectral experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides the config and BANDLAB_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides out_path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick invariant checks across all modules.
    Selftest,
    /// Print the experiment names.
    List,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    match Args::parse().command {
        Command::Run { config, threads, out } => run(config, threads, out),
        Command::Selftest => {
            let checks = cli::selftest();
            let failed = checks.iter().filter(|c| !c.ok).count();
            for c in &checks {
                println!("{} {}  {}", if c.ok { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            println!("status: {}/{} checks passed", checks.len() - failed, checks.len());
            code(if failed == 0 { EXIT_OK } else { EXIT_ASSERTION })
        }
        Command::List => {
            for e in cli::ExperimentKind::all() {
                println!("{}", e.name());
            }
            code(EXIT_OK)
        }
    }
}

fn run(config: PathBuf, threads: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return code(EXIT_CONFIG);
        }
    };
    let cfg = match cli::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return code(EXIT_CONFIG);
        }
    };
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_path));
    let threads = cli::resolve_threads(threads, cfg.threads);
    print!("{}", cfg.resolved_block());
    println!("# threads={}", threads.map_or("auto".to_string(), |k| k.to_string()));
    match cli::run_with_threads(&cfg, threads, &out_dir) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            println!("status: {}", if outcome.passed { "ok" } else { "assertion failed" });
            code(if outcome.passed { EXIT_OK } else { EXIT_ASSERTION })
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(cli::exit_code(&e))
        }
    }
}
