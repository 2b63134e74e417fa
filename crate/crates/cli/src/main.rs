use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcfl_cli::{
    execute_run, execute_sweep, load_config, parse_overrides, resolve_out_dir, sweep_configs, CliError, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "gcfl", version, about = "Federated coreset experiments on synthetic and CSV data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured arm once.
    Run(Common),
    /// Run once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of noise.ratio, budget_fraction, dirichlet_alpha, refresh_period, num_clients.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Config overrides as `--key value`, dots for nesting (`--noise.ratio 0.4`).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut o = parse_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            o.push(("seed".into(), seed.to_string()));
        }
        Ok(o)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) | CliError::Core(gcfl_core::Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let env_out = std::env::var(OUT_DIR_ENV).ok();
    match command {
        Command::Run(common) => {
            let mut cfg = load_config(&common.config, &common.overrides()?)?;
            cfg.output_dir = resolve_out_dir(&cfg, env_out.as_deref(), common.out.as_deref());
            if common.dry_run {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let out = execute_run(&cfg)?;
            for arm in &out.summary.arms {
                println!("{:<20} final accuracy {:.4}", arm.algo.to_string(), arm.final_accuracy);
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep { common, param, values } => {
            let configs = sweep_configs(&common.config, &common.overrides()?, &param, &values)?;
            let out = resolve_out_dir(&configs[0], env_out.as_deref(), common.out.as_deref());
            if common.dry_run {
                for (v, cfg) in values.iter().zip(&configs) {
                    println!("# {param} = {v}\n{}", cfg.to_toml());
                }
                return Ok(());
            }
            let summary = execute_sweep(configs, &param, &values, &out)?;
            for r in &summary.records {
                println!("{param}={:<8} {:<20} {:.4}", r.value, r.algo.to_string(), r.final_accuracy);
            }
            println!("wrote {}", out.join("sweep.json").display());
        }
    }
    Ok(())
}
