//! `slice-weaver`: batch simulation, graph coloring, capacity bounds,
//! resource estimation and self-verification from the command line.
//!
//! Exit codes: 0 success, 2 bad arguments or unparsable config, 3 config
//! that parses but fails validation, 4 numeric failure during a run,
//! 5 a verification property failed, 6 file system error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slice_weaver::allocation::{estimate_resource, ServiceState};
use slice_weaver::capacity::{service_cap, sla_lower_bound, variance_bound};
use slice_weaver::graph::{
    build_dependency_graph, chromatic_number_brute, chromatic_poly_complete,
    chromatic_poly_layered_partite, greedy_color, is_perfect_brute, LayeredPartite,
    CHROMATIC_BRUTE_LIMIT, PERFECT_BRUTE_LIMIT,
};
use slice_weaver::report::{emit_report, format_sig9};
use slice_weaver::simulator::admit;
use slice_weaver::verify::{run_verification, Budget};
use slice_weaver::{
    parse_config_with_default_seed, run_scenario, ConfigError, ScenarioConfig, SimulationError,
};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "slice-weaver",
    version,
    about = "Slice-in-slice scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write arrivals.csv and summary.txt.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy coloring and chromatic polynomial of a complete or layered graph.
    Coloring {
        #[arg(long)]
        vertices: usize,
        /// Number of available colors `k` for the chromatic polynomial.
        #[arg(long)]
        colors: u64,
        /// Spread the vertices over this many layers instead of one clique.
        #[arg(long)]
        partite: Option<usize>,
    },
    /// Service cap, variance bound and SLA table for a config.
    Capacity {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Estimate the resource share of one more arrival after the scenario.
    Allocate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        category: usize,
    },
    /// Check the model's properties against independent oracles.
    Verify {
        /// Larger sample sizes and grids.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Used only when neither `--seed` nor the config sets one.
    #[arg(long = "default-seed", env = "SLICE_WEAVER_SEED", hide = true)]
    env_seed: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Validation { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Numeric(String),
    #[error("{failed} verification propert{} failed", if *.failed == 1 { "y" } else { "ies" })]
    Verification { failed: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Verification { .. } => 5,
            CliError::Io { .. } => 6,
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(err: SimulationError) -> Self {
        CliError::Numeric(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = String::new();
    match run(cli.command, &mut stdout) {
        Ok(()) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            print!("{stdout}");
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command, out: &mut String) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, out: dir } => simulate(&config, dir, out),
        Command::Coloring {
            vertices,
            colors,
            partite,
        } => coloring(vertices, colors, partite, out),
        Command::Capacity { config } => capacity(&config, out),
        Command::Allocate {
            config,
            snr,
            category,
        } => allocate(&config, snr, category, out),
        Command::Verify { full } => verify(full, out),
    }
}

fn load(args: &ConfigArgs) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut config =
        parse_config_with_default_seed(&text, args.env_seed.unwrap_or(0)).map_err(|source| {
            match source {
                ConfigError::Validation { .. } => CliError::Validation {
                    path: args.config.clone(),
                    source,
                },
                _ => CliError::Parse {
                    path: args.config.clone(),
                    source,
                },
            }
        })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn simulate(args: &ConfigArgs, dir: PathBuf, out: &mut String) -> Result<(), CliError> {
    let config = load(args)?;
    let report = run_scenario(&config)?;
    let written =
        emit_report(&report, &dir).map_err(|source| CliError::Io { path: dir, source })?;
    for path in written {
        writeln!(out, "wrote {}", path.display()).unwrap();
    }
    Ok(())
}

fn coloring(
    vertices: usize,
    colors: u64,
    partite: Option<usize>,
    out: &mut String,
) -> Result<(), CliError> {
    let (graph, polynomial) = match partite {
        None => (
            build_dependency_graph(vertices),
            chromatic_poly_complete(vertices as u64, colors),
        ),
        Some(layers) => {
            if layers == 0 || vertices < layers {
                return Err(CliError::Usage(format!(
                    "--partite {layers} needs 1 <= layers <= vertices ({vertices})"
                )));
            }
            let sizes: Vec<usize> = (0..layers)
                .map(|i| vertices / layers + usize::from(i < vertices % layers))
                .collect();
            let partite = LayeredPartite::new(sizes).map_err(|e| CliError::Usage(e.to_string()))?;
            let poly = chromatic_poly_layered_partite(layers as u64, colors)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(out, "layers={layers}").unwrap();
            (partite.to_graph(), poly)
        }
    };
    let coloring = greedy_color(&graph);
    writeln!(out, "vertices={}", graph.vertex_count()).unwrap();
    writeln!(out, "edges={}", graph.edge_count()).unwrap();
    writeln!(out, "greedy_colors_used={}", coloring.colors_used).unwrap();
    let assignment: Vec<String> = coloring.assignment.iter().map(usize::to_string).collect();
    writeln!(out, "greedy_assignment={}", assignment.join(",")).unwrap();
    if graph.vertex_count() <= CHROMATIC_BRUTE_LIMIT {
        let chi = chromatic_number_brute(&graph).map_err(|e| CliError::Numeric(e.to_string()))?;
        writeln!(out, "chromatic_number={chi}").unwrap();
    }
    if graph.vertex_count() <= PERFECT_BRUTE_LIMIT {
        let perfect = is_perfect_brute(&graph).map_err(|e| CliError::Numeric(e.to_string()))?;
        writeln!(out, "perfect={perfect}").unwrap();
    }
    writeln!(out, "chromatic_polynomial={polynomial}").unwrap();
    Ok(())
}

fn capacity(args: &ConfigArgs, out: &mut String) -> Result<(), CliError> {
    let config = load(args)?;
    let p = &config.bound_params;
    let numeric = |e: slice_weaver::capacity::CapacityError| CliError::Numeric(e.to_string());
    let cap = service_cap(p).map_err(numeric)?;
    let v = variance_bound(p).map_err(numeric)?;
    writeln!(out, "service_cap={cap}").unwrap();
    writeln!(out, "variance_u_effective={}", format_sig9(v.u_effective)).unwrap();
    writeln!(out, "variance_term_sigma={}", format_sig9(v.term_sigma)).unwrap();
    writeln!(out, "variance_term_cov={}", format_sig9(v.term_cov)).unwrap();
    writeln!(out, "variance_term_mean={}", format_sig9(v.term_mean)).unwrap();
    writeln!(out, "variance_total={}", format_sig9(v.total)).unwrap();
    writeln!(out, "services,mean_load,sla_lower_bound").unwrap();
    for n in 1..=cap {
        let mean_load = n as f64 * p.a;
        let bound = sla_lower_bound(p, mean_load).map_err(numeric)?;
        writeln!(out, "{n},{},{}", format_sig9(mean_load), format_sig9(bound)).unwrap();
    }
    Ok(())
}

fn allocate(
    args: &ConfigArgs,
    snr: f64,
    category: usize,
    out: &mut String,
) -> Result<(), CliError> {
    let config = load(args)?;
    if category >= config.category_count {
        return Err(CliError::Usage(format!(
            "--category {category} out of range for {} categories",
            config.category_count
        )));
    }
    let report = run_scenario(&config)?;
    let states: Vec<ServiceState> = report
        .records
        .iter()
        .zip(&config.arrivals)
        .filter(|(r, _)| r.admitted && r.category == category)
        .map(|(r, a)| ServiceState::new(r.resource, a.snr))
        .collect();
    let estimate = estimate_resource(&config.allocation_params, &states, snr, config.r_range)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let count = states.len() as u64;
    let admitted = admit(
        estimate.resource,
        report.total_allocated,
        count,
        &config.bound_params,
    )
    .map_err(|e| CliError::Numeric(e.to_string()))?;
    writeln!(out, "category={category}").unwrap();
    writeln!(out, "existing_services={count}").unwrap();
    writeln!(out, "resource={}", format_sig9(estimate.resource)).unwrap();
    writeln!(out, "objective={}", format_sig9(estimate.objective)).unwrap();
    writeln!(
        out,
        "snr_derivative={}",
        format_sig9(estimate.snr_derivative)
    )
    .unwrap();
    writeln!(out, "total_before={}", format_sig9(report.total_allocated)).unwrap();
    writeln!(out, "admitted={admitted}").unwrap();
    Ok(())
}

fn verify(full: bool, out: &mut String) -> Result<(), CliError> {
    let budget = if full { Budget::Full } else { Budget::Small };
    let outcomes = run_verification(budget);
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!o.passed);
        writeln!(out, "{status} {}: {}", o.name, o.detail).unwrap();
    }
    if failed > 0 {
        return Err(CliError::Verification { failed });
    }
    Ok(())
}
