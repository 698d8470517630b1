//! Command line front end. Exit codes: 0 success, 1 configuration error,
//! 2 missing checkpoint.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use activepose::harness::{
    self, audit_text, build_setup, checkpoint_path, compare, curve, curve_csv, eval_policy,
    results_csv, table_text, HarnessConfig, HarnessError, Setup,
};
use activepose::policy::PolicyParams;
use activepose::rollout::Mode;

#[derive(Parser)]
#[command(name = "activepose", version, about = "Active viewpoint selection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    S,
    M,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::S => Mode::Single,
            ModeArg::M => Mode::Multi,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration file (activepose-config-v1).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training / evaluation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single- or multi-target mode.
    #[arg(long, value_enum, default_value = "s")]
    mode: ModeArg,
    /// Output directory for checkpoints, logs and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write its checkpoint and training log.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a trained policy on the test scenes.
    Eval {
        #[command(flatten)]
        common: Common,
        /// View budget: `auto` for the learned stop action, or a count.
        #[arg(long, default_value = "auto")]
        views: String,
    },
    /// Compare agent and baselines at matched view budgets over all trained
    /// seeds found in the output directory.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Seeds to include (each needs its checkpoint).
        #[arg(long, value_delimiter = ',', default_values_t = vec![0u64])]
        seeds: Vec<u64>,
    },
    /// Error-versus-budget sweep for every method.
    Curve {
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate the feature and prior ablation variants.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Validate a configuration and report the derived dimensions.
    Audit {
        /// Experiment configuration file (activepose-config-v1).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<HarnessConfig, HarnessError> {
    match path {
        Some(p) => HarnessConfig::load(p),
        None => Ok(HarnessConfig::default()),
    }
}

fn setup_for(common: &Common) -> Result<Setup, HarnessError> {
    let cfg = load_config(&common.config)?;
    build_setup(&cfg, common.mode.into())
}

fn load_params_or_die(setup_dir: &PathBuf, seed: u64) -> Result<PolicyParams, HarnessError> {
    harness::load_params(setup_dir, seed)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { common } => {
            let setup = setup_for(&common)?;
            let outcome = harness::train_run(&setup, common.seed, &common.out)?;
            println!(
                "trained seed {} for {} episodes; best validation error {:.2} mm",
                common.seed,
                setup.cfg.episodes,
                outcome.best_val_error
            );
            println!("checkpoint: {}", checkpoint_path(&common.out, common.seed).display());
        }
        Command::Eval { common, views } => {
            let setup = setup_for(&common)?;
            let fixed = match views.as_str() {
                "auto" => None,
                k => Some(k.parse::<usize>().map_err(|_| {
                    HarnessError::Config(format!("--views must be `auto` or a count, got `{k}`"))
                })?),
            };
            let params = load_params_or_die(&common.out, common.seed)?;
            let rows = eval_policy(&setup, &params, common.seed, fixed);
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(common.out.join("eval_results.csv"), results_csv(&rows))?;
            print!("{}", table_text(&rows));
        }
        Command::Compare { common, seeds } => {
            let setup = setup_for(&common)?;
            let trained: Result<Vec<(u64, PolicyParams)>, HarnessError> = seeds
                .iter()
                .map(|&s| load_params_or_die(&common.out, s).map(|p| (s, p)))
                .collect();
            let out = compare(&setup, &trained?);
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(common.out.join("results.csv"), results_csv(&out.rows))?;
            let table = table_text(&out.rows);
            std::fs::write(common.out.join("table.txt"), &table)?;
            for (seed, k) in &out.matched_k {
                println!("seed {seed}: matched view budget {k}");
            }
            print!("{table}");
        }
        Command::Curve { common } => {
            let setup = setup_for(&common)?;
            let params = load_params_or_die(&common.out, common.seed)?;
            let groups = curve(&setup, &params, common.seed);
            let csv = curve_csv(&groups);
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(common.out.join("curve.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Ablate { common } => {
            let setup = setup_for(&common)?;
            let rows = harness::ablate(&setup, common.seed, &common.out)?;
            std::fs::write(common.out.join("ablate_results.csv"), results_csv(&rows))?;
            let table = table_text(&rows);
            std::fs::write(common.out.join("ablate_table.txt"), &table)?;
            print!("{table}");
        }
        Command::Audit { config } => {
            let cfg = load_config(&config)?;
            print!("{}", audit_text(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(HarnessError::MissingCheckpoint(path)) => {
            eprintln!("missing checkpoint: {}", path.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
