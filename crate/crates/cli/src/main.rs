use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use zermelo_cli::compare::compare;
use zermelo_cli::config::RunConfig;
use zermelo_cli::{bundled, exit, run};

#[derive(Parser)]
#[command(name = "zermelo", version, about = "Minimum-time navigation in planar current fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario file and write reports, trajectories and a plot.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir, then out/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plot: bool,
    },
    /// Tabulate reports of one scenario and check that their times agree.
    Compare {
        #[arg(required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
    },
    /// List the bundled scenarios, optionally writing them to a directory.
    Examples {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZERMELO_LOG", "warn")).init();
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::Run { config, out, no_plot } => run_command(config, out, no_plot),
        Command::Compare { reports } => compare_command(&reports),
        Command::Examples { write } => examples_command(write),
    })
}

fn run_command(config: PathBuf, out: Option<PathBuf>, no_plot: bool) -> u8 {
    let cfg = match RunConfig::load(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit::CONFIG_INVALID;
        }
    };
    let out_dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let summary = match run::run(&cfg, &out_dir, cfg.plot && !no_plot) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit::CONFIG_INVALID;
        }
    };
    for (id, outcome) in &summary.outcomes {
        match outcome {
            Ok(o) => println!("{:<16} t_f = {:.9}", id.as_str(), o.t_f()),
            Err(e) => println!("{:<16} failed: {e}", id.as_str()),
        }
    }
    for path in &summary.written {
        println!("wrote {}", path.display());
    }
    if summary.all_ok() {
        exit::OK
    } else {
        exit::SOLVER_FAILED
    }
}

fn compare_command(reports: &[PathBuf]) -> u8 {
    match compare(reports) {
        Ok(cmp) => {
            print!("{}", cmp.table());
            if cmp.disagreements.is_empty() {
                exit::OK
            } else {
                exit::DISAGREE
            }
        }
        Err(e) => {
            error!("{e}");
            eprintln!("invalid reports: {e}");
            exit::CONFIG_INVALID
        }
    }
}

fn examples_command(write: Option<PathBuf>) -> u8 {
    for b in bundled::SCENARIOS {
        println!("{:<22} {}", b.name, b.summary);
    }
    if let Some(dir) = write {
        if let Err(e) = std::fs::create_dir_all(&dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return exit::CONFIG_INVALID;
        }
        for b in bundled::SCENARIOS {
            let path = dir.join(format!("{}.json", b.name));
            if let Err(e) = std::fs::write(&path, b.json) {
                eprintln!("cannot write {}: {e}", path.display());
                return exit::CONFIG_INVALID;
            }
            println!("wrote {}", path.display());
        }
    }
    exit::OK
}
