//! `recavar` — recovery-aware tail risk from the command line.

use clap::{Args, Parser, Subcommand};
use recavar_cli::{parse_mu_grid, run_case1, run_case2, run_eval, run_frontier, run_optimize, run_verify, CliError, ScenarioSource};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "recavar", version, about = "Tail risk measurement with recovery-dependent acceptance levels")]
struct RunConfig {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Scenario CSV produced by `save_scenarios` (header `R1..RK,Z,prob`).
    #[arg(long, value_name = "FILE")]
    scenarios: Option<PathBuf>,
    /// Sample this many scenarios from the built-in two-asset market instead.
    #[arg(long, value_name = "M")]
    sample: Option<usize>,
    /// Seed for `--sample`.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Constant liability per unit of budget for `--sample`.
    #[arg(long, default_value_t = 0.1)]
    ell: f64,
}

impl SourceArgs {
    fn resolve(&self) -> Result<ScenarioSource, CliError> {
        match (&self.scenarios, self.sample) {
            (Some(path), None) => Ok(ScenarioSource::File(path.clone())),
            (None, Some(count)) => {
                Ok(ScenarioSource::Sampled { count, seed: self.seed, ell: self.ell })
            }
            (Some(_), Some(_)) => {
                Err(CliError::Usage("choose either --scenarios or --sample, not both".into()))
            }
            (None, None) => Err(CliError::Usage("needs --scenarios FILE or --sample M".into())),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Uniform box half-width around the observed probabilities.
    #[arg(long, value_name = "C")]
    box_c: Option<f64>,
    /// Candidate probability vector file (one probability per line); repeat
    /// the flag for several candidates.
    #[arg(long, value_name = "FILE")]
    mixture: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the risk of fixed portfolio weights.
    Eval {
        #[command(flatten)]
        source: SourceArgs,
        /// Acceptance levels as `alpha:r,...` with final r = 1.
        #[arg(long, default_value = "0.01:1")]
        levels: String,
        /// Portfolio weights, comma separated, summing to one.
        #[arg(long)]
        weights: String,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Minimize risk subject to a worst-case mean-return floor.
    Optimize {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "0.01:1")]
        levels: String,
        /// Required worst-case mean return.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sweep the mean-risk efficient frontier over a target grid.
    Frontier {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "0.01:1")]
        levels: String,
        /// Target grid as `lo:hi:steps`.
        #[arg(long, value_name = "LO:HI:STEPS")]
        mu_grid: String,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Two-point market study: closed-form weights vs the program, and
    /// recovery probabilities under both capitalization rules.
    Case1 {
        /// Tail level of the reduced-threshold acceptance entry.
        #[arg(long, default_value_t = 0.005)]
        beta: f64,
        /// Recovery threshold of that entry.
        #[arg(long, default_value_t = 0.99)]
        r: f64,
        /// Constant liability per unit of budget.
        #[arg(long, default_value_t = 0.1)]
        ell: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sampled two-asset market: frontiers across box widths.
    Case2 {
        /// Number of sampled scenarios (at least 100).
        #[arg(long, default_value_t = 5000)]
        m: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        ell: f64,
        /// Box half-width; repeat the flag for several widths.
        #[arg(long = "box-c", value_name = "C")]
        box_c: Vec<f64>,
        #[arg(long, value_name = "LO:HI:STEPS", default_value = "0.0:0.004:9")]
        mu_grid: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Randomized self-checks: coherence properties, minimax gaps, and the
    /// shared-scalar counterexample.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn run(config: RunConfig) -> Result<i32, CliError> {
    match config.command {
        Command::Eval { source, levels, weights, model, out } => run_eval(
            &source.resolve()?,
            &levels,
            &weights,
            model.box_c,
            &model.mixture,
            out.as_deref(),
        ),
        Command::Optimize { source, levels, mu, model, out } => run_optimize(
            &source.resolve()?,
            &levels,
            mu,
            model.box_c,
            &model.mixture,
            out.as_deref(),
        ),
        Command::Frontier { source, levels, mu_grid, model, out } => run_frontier(
            &source.resolve()?,
            &levels,
            &mu_grid,
            model.box_c,
            &model.mixture,
            out.as_deref(),
        ),
        Command::Case1 { beta, r, ell, out } => run_case1(beta, r, ell, out.as_deref()),
        Command::Case2 { m, seed, ell, box_c, mu_grid, out } => {
            let grid = parse_mu_grid(&mu_grid)?;
            run_case2(m, seed, ell, &box_c, &grid, out.as_deref())
        }
        Command::Verify { seed, trials, out } => run_verify(seed, trials, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match run(config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
