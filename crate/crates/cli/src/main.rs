use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hierpin_cli::config::RunConfig;
use hierpin_cli::error::{CliError, CliResult};

/// Hierarchical pinning model with correlated disorder.
#[derive(Parser)]
#[command(name = "hierpin", version)]
struct Cli {
    /// Config file (sectioned key = value, or JSON; a run record also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON run record here instead of stdout. For `scan`, the
    /// output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the CSV series of the run here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "HIERPIN_WORKERS")]
    workers: Option<usize>,
    /// Print the resolved config in key = value form and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pure free energy and exponent.
    Pure(Params),
    /// Monte Carlo quenched free energy at one h or over an h grid.
    Quenched(Params),
    #[command(subcommand)]
    Annealed(Annealed),
    #[command(subcommand)]
    Relevance(Relevance),
    /// Phase-diagram scan over bs x kappas x betas.
    Scan(Params),
    /// Run whatever command the config file names.
    Run(Params),
}

#[derive(Subcommand)]
enum Annealed {
    /// Certified bracket around the annealed critical point.
    Critical(Params),
    /// Z^a, Zbar^a, E^a[S_n] and the running product by level.
    Profile(Params),
    /// Annealed weights by contact number at depth n.
    Weights(Params),
}

#[derive(Subcommand)]
enum Relevance {
    /// Fractional moments with the delocalization certificate.
    Fm(Params),
    /// Certificate search over (beta, u, gamma).
    Search(Params),
    /// Two-replica overlap series over depths n_from..=n.
    Overlap(Params),
    /// Normalization Y_n.
    Yn(Params),
    /// Change-of-measure statistics.
    Com(Params),
    /// Local exponent of the quenched free energy.
    Smoothing(Params),
    /// Positivity probe for kappa > 1/2.
    Strong(Params),
}

#[derive(Args, Default)]
struct Params {
    #[arg(long = "B", alias = "b", allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_from: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h_grid: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    us: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    betas: Option<Vec<f64>>,
}

impl Params {
    fn into_config(self, command: &str) -> RunConfig {
        RunConfig {
            command: command.to_string(),
            b: self.b,
            n: self.n,
            n_from: self.n_from,
            kappa: self.kappa,
            beta: self.beta,
            seed: self.seed,
            h: self.h,
            h_grid: self.h_grid,
            u: self.u,
            gamma: self.gamma,
            gammas: self.gammas,
            us: self.us,
            samples: self.samples,
            tol: self.tol,
            threshold: self.threshold,
            bs: self.bs,
            kappas: self.kappas,
            betas: self.betas,
            workers: None,
        }
    }
}

fn split(command: Command) -> (&'static str, Params) {
    match command {
        Command::Pure(p) => ("pure", p),
        Command::Quenched(p) => ("quenched", p),
        Command::Annealed(Annealed::Critical(p)) => ("annealed.critical", p),
        Command::Annealed(Annealed::Profile(p)) => ("annealed.profile", p),
        Command::Annealed(Annealed::Weights(p)) => ("annealed.weights", p),
        Command::Relevance(Relevance::Fm(p)) => ("relevance.fm", p),
        Command::Relevance(Relevance::Search(p)) => ("relevance.search", p),
        Command::Relevance(Relevance::Overlap(p)) => ("relevance.overlap", p),
        Command::Relevance(Relevance::Yn(p)) => ("relevance.yn", p),
        Command::Relevance(Relevance::Com(p)) => ("relevance.com", p),
        Command::Relevance(Relevance::Smoothing(p)) => ("relevance.smoothing", p),
        Command::Relevance(Relevance::Strong(p)) => ("relevance.strong", p),
        Command::Scan(p) => ("scan", p),
        Command::Run(p) => ("", p),
    }
}

fn main_inner(cli: Cli) -> CliResult<()> {
    let (name, params) = split(cli.command);
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if !name.is_empty() && !cfg.command.is_empty() && cfg.command != name {
        return Err(CliError::Config(format!(
            "config names command {:?} but {name:?} was requested",
            cfg.command
        )));
    }
    cfg.overlay(&params.into_config(name));
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if cfg.command.is_empty() {
        return Err(CliError::Config("no command given on the command line or in the config".into()));
    }
    if cli.print_config {
        print!("{}", hierpin_cli::commands::resolve(cfg)?.to_text());
        return Ok(());
    }
    let (record, csv) = hierpin_cli::run(cfg, cli.out.as_deref())?;
    let json = serde_json::to_string_pretty(&record)? + "\n";
    match (&cli.out, record.command.as_str()) {
        (Some(dir), "scan") => std::fs::write(dir.join("record.json"), &json)?,
        (Some(path), _) => std::fs::write(path, &json)?,
        (None, _) => print!("{json}"),
    }
    if let (Some(path), Some(csv)) = (&cli.csv, csv) {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hierpin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
