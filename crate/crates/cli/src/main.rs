use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilink_cli::config::{read_kv_file, RunConfig};
use bilink_cli::{cmd_evaluate, cmd_ingest, cmd_recommend, cmd_score, cmd_split, render_table, with_threads, CliError};
use bilink_core::Measure;

/// Link prediction experiments on user-item rating graphs.
#[derive(Parser, Debug)]
#[command(name = "bilink", version)]
struct Cli {
    /// File of `key = value` lines.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Set one config key; repeatable, applied after the file.
    #[arg(short, long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    data: Option<String>,
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    measures: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a rating file and print its summary as JSON.
    Ingest,
    /// Write train and test files for each fold.
    Split,
    /// Score the candidate pairs of each fold with each measure.
    Score,
    /// Compute metrics over a directory of score files.
    Evaluate {
        /// Defaults to the configured output directory.
        dir: Option<PathBuf>,
    },
    /// Print the top-k unrated items for one user.
    Recommend {
        #[arg(long)]
        user: u32,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(short, long)]
        measure: String,
    },
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut map = match &cli.config {
        Some(path) => read_kv_file(path)?,
        None => BTreeMap::new(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let flags = [
        ("data", &cli.data),
        ("format", &cli.format),
        ("out", &cli.out),
        ("measures", &cli.measures),
        ("threads", &cli.threads),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    }
    RunConfig::from_map(&map)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config(&cli)?;
    let threads = cfg.threads;
    with_threads(threads, move || match cli.cmd {
        Command::Ingest => {
            let summary = cmd_ingest(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?);
            Ok(())
        }
        Command::Split => {
            for p in cmd_split(&cfg)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Score => {
            for p in cmd_score(&cfg)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Evaluate { dir } => {
            let report = cmd_evaluate(dir.as_ref().unwrap_or(&cfg.out), cfg.halflife)?;
            print!("{}", render_table(&report));
            Ok(())
        }
        Command::Recommend { user, k, measure } => {
            let m: Measure = measure.parse()?;
            for (rank, (item, score)) in cmd_recommend(&cfg, user, k, m)?.into_iter().enumerate() {
                match score {
                    Some(s) => println!("{}\t{}\t{s:.6e}", rank + 1, item.0),
                    None => println!("{}\t{}\tundefined", rank + 1, item.0),
                }
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
