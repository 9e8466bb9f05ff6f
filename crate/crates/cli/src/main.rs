use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wsqaoa::warmstart::ThetaInit;
use wsqaoa_cli::commands::{
    cmd_fit, cmd_gen, cmd_plotdata, cmd_run, cmd_verify, Figure, RunOptions, VerifyTarget,
};
use wsqaoa_cli::config::{output_root, parse_point, ConfigOverrides, ProblemKind, OUTPUT_ENV};
use wsqaoa_cli::CliError;

/// Iterative warm-started QAOA experiments.
#[derive(Parser)]
#[command(name = "wsqaoa", version, about, after_help = format!("Output root defaults to ${OUTPUT_ENV}, then ./results."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance files.
    Gen(ExperimentArgs),
    /// Run the warm-start loop on every instance, resuming where a previous run stopped.
    Run {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Process at most this many pending instances.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Fit mean p_gm against the uniform-sampler probability per iteration.
    Fit {
        /// Results directory (default: output root).
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Run built-in consistency checks.
    Verify {
        #[arg(value_enum, default_value = "all")]
        what: VerifyTarget,
    },
    /// Emit plot-ready CSV series: fig2a, fig2b, fig2c, fig3, fig7, fig9a.
    Plotdata {
        figure: String,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML or JSON file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// Graph sizes, e.g. 8,10,12.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// DGMVP points as NxL, e.g. 4x1,4x2,4x3.
    #[arg(long, value_delimiter = ',', value_parser = parse_point)]
    grid: Option<Vec<(usize, usize)>>,
    /// Instances per size or point.
    #[arg(long)]
    instances: Option<usize>,
    /// QAOA layers p.
    #[arg(long)]
    layers: Option<usize>,
    /// Keep the best t distinct strings.
    #[arg(long, conflicts_with = "percentile")]
    order: Option<usize>,
    /// Keep strings up to this cumulative cost-mass fraction.
    #[arg(long)]
    percentile: Option<f64>,
    /// Stop when successive initial states are closer than this.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// zeros, random or carry-over.
    #[arg(long, value_parser = parse_theta_init)]
    theta_init: Option<ThetaInit>,
    /// Shots per objective evaluation (0 = exact).
    #[arg(long)]
    shots_optimize: Option<u64>,
    /// Shots of the final measurement.
    #[arg(long)]
    shots_final: Option<u64>,
    /// Objective evaluations per optimisation.
    #[arg(long)]
    budget: Option<usize>,
    /// Disable the annealer's local search.
    #[arg(long)]
    no_local_search: bool,
    /// Asset holding the whole budget in the DGMVP starting state.
    #[arg(long)]
    initial_asset: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Use the full ensemble sizes instead of desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
}

fn parse_theta_init(s: &str) -> Result<ThetaInit, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("expected zeros, random or carry-over, got {s:?}"))
}

impl ExperimentArgs {
    fn overrides(self) -> Result<ConfigOverrides, CliError> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::load(path)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            problem: self.problem,
            sizes: self.sizes,
            grid: self.grid,
            instances: self.instances,
            layers: self.layers,
            order: self.order,
            percentile: self.percentile,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            theta_init: self.theta_init,
            shots_optimize: self.shots_optimize,
            shots_final: self.shots_final,
            budget: self.budget,
            local_search: self.no_local_search.then_some(false),
            initial_asset: self.initial_asset,
            seed: self.seed,
            output: self.output,
            paper_scale: self.paper_scale.then_some(true),
        };
        Ok(file.layered(flags))
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(args) => {
            let (cfg, root) = args.overrides()?.resolve()?;
            let specs = cmd_gen(&cfg, &root)?;
            println!("wrote {} instances to {}", specs.len(), root.display());
        }
        Command::Run {
            experiment,
            workers,
            limit,
        } => {
            let (cfg, root) = experiment.overrides()?.resolve()?;
            let report = cmd_run(&cfg, &root, &RunOptions { workers, limit })?;
            println!(
                "{} completed, {} already done, {} failed, {} pending; results in {}",
                report.completed,
                report.skipped,
                report.failed.len(),
                report.pending,
                root.display()
            );
            if !report.failed.is_empty() {
                return Err(CliError::Runtime(format!(
                    "{} instances failed",
                    report.failed.len()
                )));
            }
        }
        Command::Fit { results } => {
            let root = output_root(results);
            println!("iter  points  a            b            note");
            for row in cmd_fit(&root)? {
                let show = |v: Option<f64>, e: Option<f64>| match (v, e) {
                    (Some(v), Some(e)) => format!("{v:.4}+-{e:.4}"),
                    _ => "-".to_string(),
                };
                println!(
                    "{:<5} {:<7} {:<12} {:<12} {}",
                    row.iter,
                    row.points.len() - row.excluded,
                    show(row.a, row.a_stderr),
                    show(row.b, row.b_stderr),
                    row.note
                );
            }
        }
        Command::Verify { what } => {
            let checks = cmd_verify(what)?;
            for c in &checks {
                println!(
                    "[{}] {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Verification(format!(
                    "{failed} of {} checks",
                    checks.len()
                )));
            }
        }
        Command::Plotdata { figure, results } => {
            let figure: Figure = figure.parse()?;
            println!("{}", cmd_plotdata(&output_root(results), figure)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
