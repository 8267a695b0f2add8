use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ancg::bench::{self, spec::load_config, Algo, Fault, RunSpec, SpecOverrides, Suite};
use ancg::Error;

#[derive(Parser)]
#[command(name = "ancg-bench", about = "Adaptive Newton-CG benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one algorithm on every seed.
    Run {
        #[arg(long)]
        algo: Option<Algo>,
        /// JSON config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: SpecOverrides,
    },
    /// Solve several algorithms on the same instances and tabulate.
    Compare {
        /// Comma-separated list, e.g. `ancg,uancg,fixed`.
        #[arg(long, value_delimiter = ',')]
        algo: Vec<Algo>,
        /// JSON config; repeat for one spec per algorithm.
        #[arg(long)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        overrides: SpecOverrides,
    },
    /// Run the property suites.
    Verify {
        #[arg(long)]
        suite: Option<Suite>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn base_spec(config: Option<&PathBuf>, overrides: &SpecOverrides) -> Result<RunSpec, Error> {
    let mut spec = match config {
        Some(p) => load_config(p)?,
        None => RunSpec::default(),
    };
    overrides.apply(&mut spec)?;
    Ok(spec)
}

fn compare_specs(algos: &[Algo], configs: &[PathBuf], overrides: &SpecOverrides) -> Result<Vec<RunSpec>, Error> {
    if !algos.is_empty() {
        if configs.len() > 1 {
            return Err(Error::Config("--algo with several --config files is ambiguous".into()));
        }
        let base = base_spec(configs.first(), overrides)?;
        return Ok(algos.iter().map(|&algo| RunSpec { algo, ..base.clone() }).collect());
    }
    configs.iter().map(|c| base_spec(Some(c), overrides)).collect()
}

fn main() -> ExitCode {
    // Malformed flags are configuration errors, not clap's usual code 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(bench::EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let code = match cli.command {
        Command::Run {
            algo,
            config,
            overrides,
        } => match base_spec(config.as_ref(), &overrides) {
            Ok(mut spec) => {
                if let Some(a) = algo {
                    spec.algo = a;
                }
                bench::cmd_run(&spec)
            }
            Err(e) => {
                eprintln!("error: {e}");
                bench::EXIT_CONFIG
            }
        },
        Command::Compare {
            algo,
            config,
            overrides,
        } => match compare_specs(&algo, &config, &overrides) {
            Ok(specs) => bench::cmd_compare(&specs),
            Err(e) => {
                eprintln!("error: {e}");
                bench::EXIT_CONFIG
            }
        },
        Command::Verify { suite, inject_fault } => bench::cmd_verify(suite, inject_fault),
    };
    ExitCode::from(code as u8)
}
