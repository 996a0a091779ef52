//! `brw`: simulate branching random walks on transient chains, verify the
//! boundary-convergence experiment suites, and query potential theory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use brw_cli::config::{self, Settings};
use brw_cli::flags;
use brw_cli::record::{replica_digest, RecordKind, RunRecord};
use brw_core::brw::{ObserverConfig, RunOptions};
use brw_core::chains::{green_exact, green_mc, ChainModel};
use brw_core::experiments::{run_replicas, run_suite, DEFAULT_SEED, SUITE_NAMES};
use brw_core::potential::{
    harmonic_measure, harmonic_measure_mc, martin_kernel, martin_kernel_mc, CompactificationPoint,
};
use brw_core::report::{render_assertions_csv, render_config, render_summaries_csv, render_verdict};
use brw_core::rng::{domain, Streams};

#[derive(Parser)]
#[command(
    name = "brw",
    version,
    about = "Branching random walk simulation and boundary verification on transient chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicated simulations and write a run record plus a time-series CSV.
    Simulate {
        /// Configuration file (`key = value` lines, `#` comments).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (overrides the configuration file).
        #[arg(long)]
        seed: Option<u64>,
        /// Generations per replica (overrides the configuration file).
        #[arg(long)]
        generations: Option<u32>,
        /// Number of replicas (overrides the configuration file).
        #[arg(long)]
        replicas: Option<u32>,
        /// Output directory for record.txt and series.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite; exit status 0 exactly when it passes.
    Verify {
        /// Suite name: kesten_stigum, identity, support, phase_transition,
        /// tail_example, or martingale.
        suite: String,
        /// Configuration file overriding the suite's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (overrides the configuration file).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for record.txt and assertions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Potential-theory calculators: exact values alongside Monte Carlo.
    Potential {
        #[command(subcommand)]
        term: PotentialCommand,
    },
}

#[derive(Args)]
struct McArgs {
    /// Chain: regular_tree:<degree>, drifted_line:<p>, or lattice3d.
    #[arg(long)]
    chain: String,
    /// Monte-Carlo walk count.
    #[arg(long, default_value_t = 100_000)]
    walks: u64,
    /// Walk horizon in steps.
    #[arg(long, default_value_t = 400)]
    horizon: u32,
    /// Master seed for the walks.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum PotentialCommand {
    /// Green's function G(x, y): expected visits to y starting from x.
    Green {
        #[command(flatten)]
        mc: McArgs,
        /// Source state (`root`, tree word `0,1`, line `-3`, lattice `1,0,2`).
        #[arg(long)]
        x: String,
        /// Target state.
        #[arg(long)]
        y: String,
    },
    /// Martin kernel K(x, target).
    Kernel {
        #[command(flatten)]
        mc: McArgs,
        /// Source state.
        #[arg(long)]
        x: String,
        /// Target: state:<state>, tree ray:<word>, line plus_infinity or
        /// minus_infinity, lattice infinity.
        #[arg(long)]
        target: String,
    },
    /// Harmonic measure of a boundary cylinder.
    Measure {
        #[command(flatten)]
        mc: McArgs,
        /// Cylinder: tree shadow:<word>, line plus or minus, lattice full.
        #[arg(long)]
        cylinder: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            generations,
            replicas,
            out,
        } => simulate(config, seed, generations, replicas, out),
        Command::Verify {
            suite,
            config,
            seed,
            out,
        } => verify(suite, config, seed, out),
        Command::Potential { term } => potential(term),
    }
}

fn load_config(settings: &mut Settings, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading configuration {}", path.display()))?;
    let patch = config::parse_text(&text)
        .with_context(|| format!("parsing configuration {}", path.display()))?;
    settings
        .apply(&patch)
        .with_context(|| format!("applying configuration {}", path.display()))?;
    Ok(())
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn simulate(
    config: Option<PathBuf>,
    seed: Option<u64>,
    generations: Option<u32>,
    replicas: Option<u32>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut settings = Settings::simulation_default();
    if let Some(path) = &config {
        load_config(&mut settings, path)?;
    }
    if let Some(seed) = seed {
        settings.seed = seed;
    }
    if let Some(generations) = generations {
        settings.generations = generations;
    }
    if let Some(replicas) = replicas {
        settings.replicas = replicas;
    }
    if let Some(out) = out {
        settings.output_directory = Some(out);
    }

    let chain = ChainModel::from_kind(settings.chain)?;
    let offspring = settings.offspring.build()?;
    let mean = offspring.mean_offspring();
    if mean <= 1.0 {
        eprintln!(
            "warning: offspring mean {mean} is not supercritical; the population dies out \
             almost surely"
        );
    }

    let started = Instant::now();
    let streams = Streams::new(settings.seed);
    let summaries = run_replicas(
        &chain,
        &offspring,
        settings.generations,
        &ObserverConfig::with_cylinders(settings.cylinder_depth),
        &RunOptions::default(),
        &streams,
        domain::REPLICA,
        settings.replicas,
    )?;
    let runtime = started.elapsed();

    let record = RunRecord {
        kind: RecordKind::Simulation,
        config: settings.render(),
        runtime_millis: runtime.as_millis(),
        replica_digests: summaries.iter().map(replica_digest).collect(),
        verdict: None,
    };
    match &settings.output_directory {
        Some(dir) => {
            let record_path = write_output(dir, "record.txt", &record.render())?;
            let csv = render_summaries_csv(&summaries)?;
            let csv = format!("# run.seed = {}\n{csv}", settings.seed);
            let csv_path = write_output(dir, "series.csv", &csv)?;
            println!("wrote {} and {}", record_path.display(), csv_path.display());
        }
        None => print!("{}", record.render()),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(
    suite: String,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut settings = Settings::for_suite(&suite)
        .with_context(|| format!("unknown suite `{suite}` (expected one of {SUITE_NAMES:?})"))?;
    if let Some(path) = &config {
        load_config(&mut settings, path)?;
    }
    if let Some(seed) = seed {
        settings.seed = seed;
    }
    if let Some(out) = out {
        settings.output_directory = Some(out);
    }

    let suite_config = settings.to_suite_config()?;
    let started = Instant::now();
    let verdict = run_suite(&suite_config)?;
    let runtime = started.elapsed();
    let verdict_text = render_verdict(&verdict);
    print!("{verdict_text}");

    if let Some(dir) = &settings.output_directory {
        let record = RunRecord {
            kind: RecordKind::Suite,
            config: render_config(&suite_config),
            runtime_millis: runtime.as_millis(),
            replica_digests: Vec::new(),
            verdict: Some(verdict_text.clone()),
        };
        write_output(dir, "record.txt", &record.render())?;
        let csv = format!(
            "# run.seed = {}\n{}",
            suite_config.seed,
            render_assertions_csv(&verdict)
        );
        write_output(dir, "assertions.csv", &csv)?;
    }
    Ok(if verdict.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn print_exact(value: Option<f64>) {
    match value {
        Some(value) => println!("exact = {value}"),
        None => println!("exact = unavailable"),
    }
}

fn print_estimate(estimate: f64, std_error: f64, mc: &McArgs) {
    println!("estimate = {estimate}");
    println!("std_error = {std_error}");
    println!("walks = {}", mc.walks);
    println!("horizon = {}", mc.horizon);
    println!("seed = {}", mc.seed);
}

fn potential(term: PotentialCommand) -> Result<ExitCode> {
    match term {
        PotentialCommand::Green { mc, x, y } => {
            let chain = flags::parse_chain(&mc.chain)?;
            let x = flags::parse_state(&chain, &x)?;
            let y = flags::parse_state(&chain, &y)?;
            println!("chain = {}", mc.chain);
            println!("green({x:?}, {y:?})");
            print_exact(green_exact(&chain, &x, &y)?);
            let mut rng = Streams::new(mc.seed).stream(domain::WALK, 0);
            let (estimate, std_error) =
                green_mc(&chain, &x, &y, mc.walks, mc.horizon, &mut rng)?;
            print_estimate(estimate, std_error, &mc);
        }
        PotentialCommand::Kernel { mc, x, target } => {
            let chain = flags::parse_chain(&mc.chain)?;
            let x = flags::parse_state(&chain, &x)?;
            let target = flags::parse_target(&chain, &target)?;
            println!("chain = {}", mc.chain);
            println!("kernel({x:?}, {target:?})");
            print_exact(martin_kernel(&chain, &x, &target)?);
            // Monte Carlo estimates the kernel as a ratio of Green visits, a
            // route that exists for interior targets only.
            if let CompactificationPoint::Interior(y) = &target {
                let mut rng = Streams::new(mc.seed).stream(domain::WALK, 0);
                let (estimate, std_error) =
                    martin_kernel_mc(&chain, &x, y, mc.walks, mc.horizon, &mut rng)?;
                print_estimate(estimate, std_error, &mc);
            } else {
                println!("estimate = unavailable");
            }
        }
        PotentialCommand::Measure { mc, cylinder } => {
            let chain = flags::parse_chain(&mc.chain)?;
            let cylinder = flags::parse_cylinder(&chain, &cylinder)?;
            println!("chain = {}", mc.chain);
            println!("measure({})", cylinder.label());
            print_exact(Some(harmonic_measure(&chain, &cylinder)?));
            let mut rng = Streams::new(mc.seed).stream(domain::WALK, 0);
            let (estimate, std_error) =
                harmonic_measure_mc(&chain, &cylinder, mc.walks, mc.horizon, &mut rng)?;
            print_estimate(estimate, std_error, &mc);
        }
    }
    Ok(ExitCode::SUCCESS)
}
