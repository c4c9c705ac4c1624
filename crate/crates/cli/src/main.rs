use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsl_cli::commands::{self, RunOptions, EXIT_OK};

#[derive(Parser)]
#[command(name = "rsl", version, about = "Rigid formation control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory, summary and plot data.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "h")]
        h: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Validate a scenario without simulating.
    Check { scenario: PathBuf },
    /// Run every scenario in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed, h, t_end } => {
            let opts = RunOptions { out, seed, h, t_end };
            match commands::run(&scenario, &opts) {
                Ok(o) => {
                    print!("{}", o.summary);
                    println!("wrote {}", o.out_dir.display());
                    code(EXIT_OK)
                }
                Err(f) => {
                    eprintln!("error: {}", f.message);
                    code(f.code)
                }
            }
        }
        Command::Check { scenario } => match commands::check(&scenario) {
            Ok(report) => {
                print!("{report}");
                code(EXIT_OK)
            }
            Err(f) => {
                eprintln!("error: {}", f.message);
                code(f.code)
            }
        },
        Command::Batch { dir, jobs, out } => match commands::batch(&dir, jobs, &out, &RunOptions::default()) {
            Ok(entries) => {
                let mut worst = EXIT_OK;
                for e in entries {
                    match e.result {
                        Ok(o) => println!("ok      {} -> {}", e.path.display(), o.out_dir.display()),
                        Err(f) => {
                            println!("failed  {} ({}): {}", e.path.display(), f.code, f.message);
                            worst = worst.max(f.code);
                        }
                    }
                }
                code(worst)
            }
            Err(f) => {
                eprintln!("error: {}", f.message);
                code(f.code)
            }
        },
    }
}
