use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use geobias::config::{RatingMode, RunConfig, Variant};
use geobias::pipeline::{cmd_eval, cmd_gen_prompts, cmd_map, cmd_query, cmd_report, cmd_sample, Overrides, RunDir};
use geobias::{Error, Result};

/// Measure geographic bias in language-model ratings of places.
#[derive(Debug, Parser)]
#[command(name = "geobias", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "geobias.toml")]
    config: PathBuf,
    /// Directory holding this run's artifacts.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample inside `min_lat,min_lon,max_lat,max_lon` only.
    #[arg(long, global = true, allow_hyphen_values = true)]
    region: Option<Region>,
    /// Rating extraction for every model.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Comma-separated prompt ablations: no_coordinates, no_nearby,
    /// no_address, last_two_address; `none` for the full prompt only.
    #[arg(long, global = true)]
    ablation: Option<Ablations>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample evaluation locations into locations.csv.
    Sample,
    /// Render prompts for every location, topic and variant.
    GenPrompts,
    /// Query the configured models and write ratings.csv.
    Query,
    /// Compute correlations, bias scores and tables.
    Eval,
    /// Render rank and rank-error maps.
    Map,
    /// Print the tables of a finished evaluation.
    Report,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Greedy,
    Ev,
}

#[derive(Debug, Clone)]
struct Region([f64; 4]);

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}")))
            .collect::<Result<_, _>>()?;
        let arr: [f64; 4] = parts.try_into().map_err(|_| "expected min_lat,min_lon,max_lat,max_lon".to_string())?;
        Ok(Region(arr))
    }
}

#[derive(Debug, Clone)]
struct Ablations(Vec<Variant>);

impl FromStr for Ablations {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "none" {
            return Ok(Ablations(Vec::new()));
        }
        s.split(',')
            .map(|p| {
                Variant::parse(p.trim())
                    .filter(|v| *v != Variant::Full)
                    .ok_or_else(|| format!("unknown ablation {p:?}"))
            })
            .collect::<Result<_, _>>()
            .map(Ablations)
    }
}

fn run(cli: Cli) -> Result<()> {
    let dir = RunDir::new(&cli.run_dir);
    if let Command::Report = cli.command {
        print!("{}", cmd_report(&dir)?);
        return Ok(());
    }
    let mut cfg = RunConfig::load(&cli.config)?;
    Overrides {
        seed: cli.seed,
        region: cli.region.map(|r| r.0),
        mode: cli.mode.map(|m| match m {
            Mode::Greedy => RatingMode::Greedy,
            Mode::Ev => RatingMode::Ev,
        }),
        ablations: cli.ablation.map(|a| a.0),
    }
    .apply(&mut cfg)?;
    match cli.command {
        Command::Sample => cmd_sample(&cfg, &dir),
        Command::GenPrompts => cmd_gen_prompts(&cfg, &dir),
        Command::Query => cmd_query(&cfg, &dir),
        Command::Eval => cmd_eval(&cfg, &dir),
        Command::Map => cmd_map(&cfg, &dir),
        Command::Report => unreachable!("handled above"),
    }
    .map(|_| ())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e))
        }
    }
}
