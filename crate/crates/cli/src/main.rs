use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergmpool::pipeline::{self, exit, Manifest, NetworkType, RecoveryConfig, RunOptions, SimulateConfig};
use ergmpool::{Error, ModelSpec, Preset};

#[derive(Parser)]
#[command(name = "ergmpool", version, about = "Fit ERGMs to many small networks and pool the estimates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Worker threads for fitting and pooling.
    #[arg(long, global = true, env = "ERGMPOOL_WORKERS")]
    workers: Option<usize>,
    /// Overrides the seed of the manifest or config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit with status 4 when convergence warnings are present.
    #[arg(long, global = true)]
    strict: bool,
    /// Completed datasets to emit from the imputation step.
    #[arg(long, global = true)]
    imputations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis described by a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Simulate a batch of networks and attributes.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parameter-recovery study on simulated batches.
    Recovery {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 100)]
        networks: usize,
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, default_value_t = 4)]
        countries: usize,
        /// Comma-separated generating values, one per term.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Goodness of fit of one network under a fitted model.
    Gof {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        network: String,
        #[arg(long)]
        model: Preset,
        #[arg(long)]
        network_type: Option<NetworkType>,
        #[arg(long, default_value_t = ergmpool::sim::DEFAULT_GOF_REPLICATES)]
        replicates: usize,
    },
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::EmptyPool(_) => exit::EMPTY_POOL,
        e if e.is_validation() => exit::VALIDATION,
        _ => exit::FAILURE,
    }
}

fn preset_model(p: Preset) -> Result<ModelSpec, Error> {
    if p == Preset::Custom {
        return Err(Error::InvalidModel("custom models need a manifest or config file".into()));
    }
    Ok(ModelSpec::preset(p))
}

fn init_workers(workers: Option<usize>) -> Result<(), Error> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidConfig("workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32, Error> {
    let g = cli.global;
    match cli.command {
        Command::Run { manifest } => {
            let m = Manifest::load(&manifest)?;
            let opts = RunOptions { workers: g.workers, seed: g.seed, imputations: g.imputations };
            let outcome = pipeline::run(&m, &opts)?;
            print!("{}", outcome.report.render());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("outputs written to {}", outcome.output_dir.display());
            Ok(outcome.exit_code(g.strict))
        }
        Command::Simulate { config } => {
            init_workers(g.workers)?;
            let mut cfg = SimulateConfig::load(&config)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            let batch = pipeline::simulate(&cfg)?;
            for (kind, nets) in &batch {
                let ties: usize = nets.iter().map(|n| n.edge_count()).sum();
                println!("simulated {} {kind} networks ({ties} ties) into {}", nets.len(), cfg.output_dir.display());
            }
            Ok(exit::SUCCESS)
        }
        Command::Recovery { preset, networks, nodes, replications, countries, theta, json } => {
            init_workers(g.workers)?;
            let cfg = RecoveryConfig {
                theta_true: theta,
                replications,
                countries,
                ..RecoveryConfig::new(preset_model(preset)?, networks, nodes, g.seed.unwrap_or(0))
            };
            let report = pipeline::recovery_study(&cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
            let unconverged = report.max_r_hat.is_some_and(|r| r > ergmpool::pool::RHAT_WARNING);
            Ok(if g.strict && unconverged { exit::STRICT_WARNINGS } else { exit::SUCCESS })
        }
        Command::Gof { manifest, network, model, network_type, replicates } => {
            init_workers(g.workers)?;
            let mut m = Manifest::load(&manifest)?;
            if let Some(s) = g.seed {
                m.seed = s;
            }
            let (fit, records) = pipeline::gof_network(&m, &network, &preset_model(model)?, network_type, replicates)?;
            println!("network {} ({}), model {}, log-likelihood {:.4}", fit.network_id, fit.country, model, fit.log_likelihood);
            println!("{:<28} {:>10} {:>10} {:>10} {:>9} {:>9}", "term", "estimate", "observed", "sim mean", "sim sd", "quantile");
            for (r, est) in records.iter().zip(&fit.theta) {
                println!(
                    "{:<28} {:>10.4} {:>10.3} {:>10.3} {:>9.3} {:>9.3}",
                    r.term, est, r.observed, r.simulated_mean, r.simulated_sd, r.quantile
                );
            }
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
