use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use nldisp_cli::{run, validate, RunError, RunOptions, Subcommand};

#[derive(Parser)]
#[command(
    name = "nldisp",
    version,
    about = "Nonlocal dispersal reaction equations: simulation and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Evolve an initial datum and write snapshots.
    Simulate(Common),
    /// Compare the linearized spreading speed with an observed front.
    Speed(Common),
    /// Compute a periodic steady state.
    Steady(Common),
    /// Check the compactness ingredients and the contraction diagnostic.
    Diagnose(Common),
    /// Run the built-in verification matrix.
    Selfcheck(Common),
    /// Validate a config and print the resolved scenario.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; optional for `selfcheck`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

fn load(path: Option<&PathBuf>, required: bool) -> Result<nldisp_cli::ScenarioConfig, RunError> {
    let (text, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| RunError::Output(format!("{}: {e}", p.display())))?;
            let base = p.parent().map(PathBuf::from).unwrap_or_default();
            (text, base)
        }
        None if required => return Err(RunError::Output("--config is required".into())),
        None => (String::new(), PathBuf::from(".")),
    };
    Ok(validate(&text, &base)?)
}

fn main() -> ExitCode {
    let env = env_logger::Env::new().filter_or(
        "NLDISP_LOG",
        std::env::var("TOOL_LOG").unwrap_or_else(|_| "warn".into()),
    );
    env_logger::Builder::from_env(env).init();
    let cli = Cli::parse();

    let (sub, common) = match cli.command {
        Command::Simulate(c) => (Subcommand::Simulate, c),
        Command::Speed(c) => (Subcommand::Speed, c),
        Command::Steady(c) => (Subcommand::Steady, c),
        Command::Diagnose(c) => (Subcommand::Diagnose, c),
        Command::Selfcheck(c) => (Subcommand::Selfcheck, c),
        Command::Check { config } => {
            return match load(Some(&config), true) {
                Ok(cfg) => {
                    print!("{cfg}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            };
        }
    };

    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            log::warn!("thread pool: {e}");
        }
    }
    let config = match load(common.config.as_ref(), sub != Subcommand::Selfcheck) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let options = RunOptions {
        seed: common.seed,
        threads: common.threads,
        svg: common.svg,
    };
    match run(sub, &config, &common.out, &options) {
        Ok(m) => {
            println!(
                "{} complete: {} files in {}",
                m.subcommand,
                m.files.len(),
                common.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
