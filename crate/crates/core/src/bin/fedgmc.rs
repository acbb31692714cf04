use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedgmc::cli::{self, ReportInput, RunConfig, CONFIG_FILE};
use fedgmc::graph::Split;
use fedgmc::Error;

#[derive(Parser)]
#[command(name = "fedgmc", version, about = "Federated graph manifold calibration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the data seed and the federation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or re-export) the configured graph.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Directory for edges.txt, features.txt and labels.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a federation and write its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Mechanisms to disable: comma list of semantic, structural, refinement, or local.
        #[arg(long)]
        ablate: Option<String>,
        /// Worker threads for client training; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write calibrated embeddings per client.
        #[arg(long)]
        embeddings: bool,
    },
    /// Recompute metrics from the saved models of a run.
    Eval {
        /// Run directory; its config.toml is used unless --config is given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// train, val or test.
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Mean ± std table over history CSVs (`label=path` or `path`).
    Report {
        #[arg(required = true)]
        histories: Vec<String>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> fedgmc::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

// a closed pipe (e.g. `| head`) is not an error worth a panic
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json<T: serde::Serialize>(value: &T) {
    emit(&(serde_json::to_string_pretty(value).expect("serializable") + "\n"));
}

fn execute(command: Command) -> fedgmc::Result<()> {
    match command {
        Command::GenData { common, out } => {
            let cfg = load_config(&common)?;
            cfg.validate()?;
            let s = cli::gen_data(&cfg, &out)?;
            emit(&format!("nodes {} edges {} homophily {:.4}\n", s.nodes, s.edges, s.homophily));
        }
        Command::Run {
            common,
            ablate,
            threads,
            out,
            embeddings,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(a) = ablate {
                cfg.federation.ablate = a;
            }
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            cfg.output.embeddings |= embeddings;
            if threads == Some(0) {
                return Err(Error::Config("--threads must be >= 1".into()));
            }
            let summary = cli::run(&cfg, threads)?;
            log::info!("wrote {}", cfg.output.dir.display());
            print_json(&summary);
        }
        Command::Eval { out, config, split } => {
            let path = config.unwrap_or_else(|| out.join(CONFIG_FILE));
            let cfg = RunConfig::load(&path)?;
            print_json(&cli::eval(&cfg, &out, split)?);
        }
        Command::Report { histories, out } => {
            let inputs: Vec<ReportInput> = histories.iter().map(|h| ReportInput::parse(h)).collect();
            let table = cli::format_report(&cli::report(&inputs)?);
            emit(&table);
            if let Some(path) = out {
                write_out(&path, &table)?;
            }
        }
    }
    Ok(())
}

fn write_out(path: &Path, text: &str) -> fedgmc::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
