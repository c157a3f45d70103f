use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use stagedtrees::simulate::ProbScheme;
use stagedtrees::Loss;
use stagedtrees_cli::{cmd_fit, cmd_report, cmd_simulate, exit_code, RunConfig, SimulateConfig};

#[derive(Parser)]
#[command(name = "stagedtrees", version, about = "Bayesian staged tree learning and causal effects")]
struct Cli {
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample staged trees for a dataset and write all artifacts.
    Fit(FitArgs),
    /// Draw datasets from a random or given staged tree.
    Simulate(SimArgs),
    /// Print stage counts, effect tables and independences of a fit.
    Report {
        /// Output directory of a previous `fit`.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    /// TOML run config; flags below override its values.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    loss: Option<Loss>,
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    /// TOML simulation config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    cardinalities: Option<Vec<usize>>,
    #[arg(long)]
    first_modeled: Option<usize>,
    #[arg(long)]
    merge_prob: Option<f64>,
    #[arg(long)]
    scheme: Option<ProbScheme>,
    #[arg(long)]
    generator: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long)]
    outcome: Option<String>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let mut c = RunConfig::from_path(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    set(&mut c.data.path, args.data);
    set(&mut c.output, args.output);
    set(&mut c.chain.seed, args.seed);
    set(&mut c.chain.iterations, args.iterations);
    set(&mut c.chain.burn_in, args.burn_in);
    set(&mut c.chain.thin, args.thin);
    set(&mut c.prior.kappa, args.kappa);
    set(&mut c.prior.xi, args.xi);
    set(&mut c.summary.loss, args.loss);
    set(&mut c.summary.level, args.level);
    let manifest = cmd_fit(&c)?;
    eprintln!(
        "wrote {} artifacts to {} (config {})",
        manifest.artifacts.len() + 1,
        c.output.display(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn simulate(args: SimArgs) -> anyhow::Result<()> {
    let mut c = match &args.config {
        Some(path) => SimulateConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?,
        None => SimulateConfig {
            output: args.output.clone().context("--output is required without --config")?,
            cardinalities: Vec::new(),
            first_modeled: 0,
            merge_prob: 0.0,
            scheme: ProbScheme::default(),
            generator: None,
            n: args.n.clone().context("--n is required without --config")?,
            replicates: 1,
            seed: 1,
            treatment: None,
            outcome: None,
        },
    };
    set(&mut c.output, args.output);
    set(&mut c.cardinalities, args.cardinalities);
    set(&mut c.first_modeled, args.first_modeled);
    set(&mut c.merge_prob, args.merge_prob);
    set(&mut c.scheme, args.scheme);
    set(&mut c.n, args.n);
    set(&mut c.replicates, args.replicates);
    set(&mut c.seed, args.seed);
    if args.generator.is_some() {
        c.generator = args.generator;
    }
    if args.treatment.is_some() {
        c.treatment = args.treatment;
    }
    if args.outcome.is_some() {
        c.outcome = args.outcome;
    }
    let jobs = cmd_simulate(&c)?;
    eprintln!("wrote {} datasets to {}", jobs.len(), c.output.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Fit(args) => fit(args),
        Command::Simulate(args) => simulate(args),
        Command::Report { dir } => {
            print!("{}", cmd_report(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
