use clap::{Args, Parser, Subcommand};
use lamina_cli::commands::{self, Exit, Failure};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lamina", version, about = "Persistent laminations by the graph transform")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, env = "THREADS")]
    threads: Option<usize>,
    #[arg(long, env = "SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured pipeline and checks.
    Run(Common),
    /// Re-check a previous run's section dump.
    Verify(Common),
    /// One run per parameter value.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Option<Vec<f64>>,
    },
}

fn threads(n: Option<usize>) {
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<Exit, Failure> = match cli.cmd {
        Cmd::Run(c) => {
            threads(c.threads);
            commands::run(&c.config, &c.out, c.seed)
        }
        Cmd::Verify(c) => {
            threads(c.threads);
            commands::verify(&c.config, &c.out, c.seed)
        }
        Cmd::Sweep {
            common: c,
            param,
            values,
        } => {
            threads(c.threads);
            commands::sweep(&c.config, &c.out, c.seed, param, values)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Schema(e)) => {
            eprintln!("lamina: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("lamina: {e:#}");
            ExitCode::from(1)
        }
    }
}
