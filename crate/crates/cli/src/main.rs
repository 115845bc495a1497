//! `mapsieve`: simulate, fit, build confidence regions, test, tune and run
//! Monte Carlo studies from the command line.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mapsieve::inference::HypothesisKind;
use mapsieve::process::{InnovationKind, Setup};

use config::{parse_innovation, parse_kind, parse_setup, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mapsieve", version, about = "Mapped sieve estimation and simultaneous inference for locally stationary regression")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write `simulated.csv`.
    Simulate(SimulateArgs),
    /// Fit the sieve model and write surface grids and `fit.json`.
    Fit(FitArgs),
    /// Build a simultaneous confidence region for one component.
    Scr(ScrArgs),
    /// Test an exact form, homogeneity or separability of one component.
    Test(TestArgs),
    /// Select (c, d) by cross-validation and m by minimum volatility.
    Tune(TuneArgs),
    /// Monte Carlo coverage or rejection study.
    Study(StudyArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario: 1, 2, 3, I, II or III.
    #[arg(long, value_parser = parse_setup)]
    setup: Option<Setup>,
    #[arg(long)]
    delta: Option<f64>,
    /// Innovation model: tv-ar2, setar or bilinear.
    #[arg(long, value_parser = parse_innovation)]
    innovation: Option<InnovationKind>,
    /// Series length.
    #[arg(short, long)]
    n: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Also write `X_lag1..X_lag<k>` (rows start at index k + 1).
    #[arg(long)]
    lags: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a series column (with --ar-lags) or Y, X1..Xr.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Regress the series column on its first r lags.
    #[arg(long)]
    ar_lags: Option<usize>,
}

#[derive(Args)]
struct SieveArgs {
    /// Time basis size of every component.
    #[arg(long)]
    c: Option<usize>,
    /// State basis size of every component.
    #[arg(long)]
    d: Option<usize>,
    /// Intercept basis size.
    #[arg(long)]
    c0: Option<usize>,
    /// Drop the Jacobian weight of the mapped state basis.
    #[arg(long)]
    no_weight: bool,
}

#[derive(Args)]
struct BootArgs {
    /// Component whose region is built.
    #[arg(long)]
    component: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Draws for the standard deviation (B).
    #[arg(long)]
    h_draws: Option<usize>,
    /// Draws for the critical value (M).
    #[arg(long)]
    c_draws: Option<usize>,
    /// Block length m.
    #[arg(long)]
    block_length: Option<usize>,
    /// Choose m by minimum volatility.
    #[arg(long)]
    tune_m: bool,
    #[arg(long)]
    grid_t: Option<usize>,
    #[arg(long)]
    grid_x: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    /// Bootstrap seed (defaults to the master seed).
    #[arg(long)]
    boot_seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sieve: SieveArgs,
    #[arg(long)]
    grid_t: Option<usize>,
    #[arg(long)]
    grid_x: Option<usize>,
}

#[derive(Args)]
struct ScrArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sieve: SieveArgs,
    #[command(flatten)]
    boot: BootArgs,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sieve: SieveArgs,
    #[command(flatten)]
    boot: BootArgs,
    /// exact, homogeneity or separability.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<HypothesisKind>,
    /// Exact-form target: fitted, zero, scenario, expr:<f(t, x)> or csv:<path>.
    #[arg(long)]
    m0_spec: Option<String>,
    /// Scenario whose true component `--m0-spec scenario` uses.
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sieve: SieveArgs,
    /// Candidate time sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<usize>>,
    /// Candidate state sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<usize>>,
    /// Validation length.
    #[arg(long)]
    validation: Option<usize>,
    /// Block-length ladder, comma separated and increasing.
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<usize>>,
    #[arg(long)]
    h0: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    sieve: SieveArgs,
    #[command(flatten)]
    boot: BootArgs,
    #[arg(long)]
    replicates: Option<usize>,
    /// coverage, exact, homogeneity or separability.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    centering_samples: Option<usize>,
    /// Tune (c, d) and m in every replicate.
    #[arg(long)]
    tune: bool,
    /// First replicate id of this shard.
    #[arg(long)]
    first: Option<usize>,
    /// Number of replicates in this shard.
    #[arg(long)]
    count: Option<usize>,
    /// Merge study tables from earlier shards instead of running.
    #[arg(long, num_args = 1..)]
    merge: Vec<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_scenario(cfg: &mut RunConfig, a: ScenarioArgs) {
    set(&mut cfg.scenario.setup, a.setup);
    set(&mut cfg.scenario.delta, a.delta);
    set(&mut cfg.scenario.innovation, a.innovation);
    set(&mut cfg.scenario.n, a.n);
}

fn apply_data(cfg: &mut RunConfig, a: DataArgs) {
    if a.input.is_some() {
        cfg.data.input = a.input;
    }
    if a.ar_lags.is_some() {
        cfg.data.ar_lags = a.ar_lags;
    }
}

fn apply_sieve(cfg: &mut RunConfig, a: SieveArgs) {
    set(&mut cfg.sieve.c, a.c);
    set(&mut cfg.sieve.d, a.d);
    if a.c0.is_some() {
        cfg.sieve.c0 = a.c0;
    }
    if a.no_weight {
        cfg.sieve.jacobian_weight = false;
    }
}

fn apply_boot(cfg: &mut RunConfig, a: BootArgs) {
    set(&mut cfg.inference.component, a.component);
    set(&mut cfg.bootstrap.alpha, a.alpha);
    set(&mut cfg.bootstrap.h_draws, a.h_draws);
    set(&mut cfg.bootstrap.c_draws, a.c_draws);
    if a.block_length.is_some() {
        cfg.bootstrap.block_length = a.block_length;
    }
    if a.tune_m {
        cfg.inference.tune_m = true;
    }
    set(&mut cfg.bootstrap.grid_t, a.grid_t);
    set(&mut cfg.bootstrap.grid_x, a.grid_x);
    set(&mut cfg.bootstrap.x_window[0], a.x_min);
    set(&mut cfg.bootstrap.x_window[1], a.x_max);
    if a.boot_seed.is_some() {
        cfg.bootstrap.seed = a.boot_seed;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed);
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.validate()?;
    if let Some(w) = cfg.workers {
        // A second initialization only happens in tests; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.command {
        Command::Simulate(a) => {
            apply_scenario(&mut cfg, a.scenario);
            set(&mut cfg.scenario.burn_in, a.burn_in);
            set(&mut cfg.scenario.lagged_columns, a.lags);
            commands::simulate(&cfg)
        }
        Command::Fit(a) => {
            apply_data(&mut cfg, a.data);
            apply_sieve(&mut cfg, a.sieve);
            set(&mut cfg.bootstrap.grid_t, a.grid_t);
            set(&mut cfg.bootstrap.grid_x, a.grid_x);
            commands::fit(&cfg)
        }
        Command::Scr(a) => {
            apply_data(&mut cfg, a.data);
            apply_sieve(&mut cfg, a.sieve);
            apply_boot(&mut cfg, a.boot);
            commands::scr(&cfg)
        }
        Command::Test(a) => {
            apply_scenario(&mut cfg, a.scenario);
            apply_data(&mut cfg, a.data);
            apply_sieve(&mut cfg, a.sieve);
            apply_boot(&mut cfg, a.boot);
            set(&mut cfg.inference.kind, a.kind);
            if a.m0_spec.is_some() {
                cfg.inference.m0 = a.m0_spec;
            }
            commands::test(&cfg)
        }
        Command::Tune(a) => {
            apply_data(&mut cfg, a.data);
            apply_sieve(&mut cfg, a.sieve);
            set(&mut cfg.tune.c, a.c_grid);
            set(&mut cfg.tune.d, a.d_grid);
            if a.validation.is_some() {
                cfg.tune.validation = a.validation;
            }
            set(&mut cfg.tune.m, a.m_grid);
            set(&mut cfg.tune.h0, a.h0);
            commands::tune(&cfg)
        }
        Command::Study(a) => {
            apply_scenario(&mut cfg, a.scenario);
            apply_sieve(&mut cfg, a.sieve);
            apply_boot(&mut cfg, a.boot);
            set(&mut cfg.study.replicates, a.replicates);
            set(&mut cfg.study.mode, a.mode);
            set(&mut cfg.study.centering_samples, a.centering_samples);
            if a.tune {
                cfg.study.tune = true;
            }
            set(&mut cfg.study.first, a.first);
            if a.count.is_some() {
                cfg.study.count = a.count;
            }
            commands::study(&cfg, &a.merge)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_owned());
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
