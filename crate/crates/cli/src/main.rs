//! `elid`: validate backhaul topologies, solve for minimum-latency routing,
//! cross-check solvers and regenerate the experiment data.
//!
//! Exit codes: 0 success, 1 validation or constraint failure, 2 usage or
//! input error, 3 infeasible instance.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elid_core::experiments::{self, SchemeKind, SweepParam, SweepSpec};
use elid_core::solver::{solve_heuristic_with, Budget, SolveReport, SolveStatus};
use elid_core::{
    read_topology, solve_exact, solve_oracle, validate_topology, Scheme, Topology, TopologyRule,
    OBJECTIVE_TOLERANCE,
};

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "elid",
    version,
    about = "Minimum-latency routing for elevated-LiDAR backhaul networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology file and report every broken rule
    Validate { topology: PathBuf },
    /// Solve one instance and print the report as JSON
    Solve {
        topology: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Include search statistics and timing (not reproducible)
        #[arg(long)]
        stats: bool,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve with branch-and-bound and with the exhaustive oracle, and compare
    OracleCheck {
        topology: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Sweep one parameter and write CSV rows
    Sweep {
        topology: PathBuf,
        /// D_lambda, omega_mec or epsilon
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated, strictly increasing values in base units
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated schemes
        #[arg(
            long = "scheme",
            value_enum,
            value_delimiter = ',',
            default_value = "p3"
        )]
        schemes: Vec<SchemeName>,
        /// Channel fraction for p1
        #[arg(long)]
        epsilon: Option<f64>,
        /// Override the topology's downlink ratio
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        budget: BudgetArgs,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write gnuplot data blocks, one per scheme
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Run every experiment on the bundled fixtures
    Reproduce {
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "ELID_WORKERS")]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeName {
    P1,
    P2,
    P3,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Heuristic,
    Oracle,
}

#[derive(Args)]
struct SchemeArgs {
    #[arg(long, value_enum, default_value_t = SchemeName::P3)]
    scheme: SchemeName,
    /// Channel fraction for p1, in (0, 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the topology's downlink ratio
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Stop branch-and-bound after this many search nodes
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    time_limit_ms: Option<u64>,
    /// Search threads; defaults to the available cores
    #[arg(long, env = "ELID_WORKERS")]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Longest path considered, in hops; defaults to the node count
    #[arg(long)]
    hop_limit: Option<usize>,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        Budget {
            node_limit: self.node_limit,
            time_limit: self.time_limit_ms.map(Duration::from_millis),
            workers: workers(self.workers),
            hop_limit: self.hop_limit,
            seed: self.seed,
        }
    }
}

fn workers(requested: Option<usize>) -> usize {
    requested
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn scheme_kind(name: SchemeName, epsilon: Option<f64>) -> Result<SchemeKind, Failure> {
    match name {
        SchemeName::P1 => epsilon
            .map(|epsilon| SchemeKind::P1 { epsilon })
            .ok_or_else(|| fail(EXIT_USAGE, "--scheme p1 requires --epsilon")),
        SchemeName::P2 => Ok(SchemeKind::P2),
        SchemeName::P3 => Ok(SchemeKind::P3),
    }
}

fn resolve(args: &SchemeArgs, topology: &Topology) -> Result<Scheme, Failure> {
    scheme_kind(args.scheme, args.epsilon)?
        .resolve(topology.beta())
        .map_err(|e| fail(EXIT_USAGE, e.to_string()))
}

fn load(path: &Path, beta: Option<f64>) -> Result<Topology, Failure> {
    let topology = read_topology(path).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    Ok(match beta {
        Some(b) => topology.with_beta(b),
        None => topology,
    })
}

/// Load a topology for solving. Unreachable servers are left to the solver
/// to report as infeasibility; every other violation stops here.
fn load_solvable(path: &Path, beta: Option<f64>) -> Result<Topology, Failure> {
    let topology = load(path, beta)?;
    let blocking: Vec<String> = validate_topology(&topology)
        .into_iter()
        .filter(|v| v.rule != TopologyRule::NoReachableServer)
        .map(|v| v.to_string())
        .collect();
    if blocking.is_empty() {
        Ok(topology)
    } else {
        Err(fail(EXIT_VIOLATION, blocking.join("\n")))
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validate(path: &Path) -> Outcome {
    let topology = load(path, None)?;
    let violations = validate_topology(&topology);
    if violations.is_empty() {
        println!(
            "valid: {} nodes, {} links, {} elids",
            topology.nodes().len(),
            topology.links().len(),
            topology.elid_ids().len()
        );
        return Ok(0);
    }
    for v in &violations {
        println!("{v}");
    }
    Ok(EXIT_VIOLATION)
}

fn solve(
    path: &Path,
    scheme_args: &SchemeArgs,
    method: Method,
    budget: &BudgetArgs,
    stats: bool,
    out: Option<&Path>,
) -> Outcome {
    let topology = load_solvable(path, scheme_args.beta)?;
    let scheme = resolve(scheme_args, &topology)?;
    let budget = budget.budget();
    let report = match method {
        Method::Exact => solve_exact(&topology, &scheme, &budget),
        Method::Heuristic => {
            solve_heuristic_with(&topology, &scheme, budget.seed, budget.hop_limit)
        }
        Method::Oracle => solve_oracle(&topology, &scheme),
    }
    .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let text = serde_json::to_string_pretty(&report.to_json(stats)).expect("report serializes");
    write_or_print(out, &(text + "\n"))?;
    Ok(exit_for(&report))
}

fn exit_for(report: &SolveReport) -> u8 {
    if report.status == SolveStatus::Infeasible {
        EXIT_INFEASIBLE
    } else {
        0
    }
}

fn oracle_check(path: &Path, scheme_args: &SchemeArgs, budget: &BudgetArgs) -> Outcome {
    let topology = load_solvable(path, scheme_args.beta)?;
    let scheme = resolve(scheme_args, &topology)?;
    let oracle = solve_oracle(&topology, &scheme).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let exact = solve_exact(&topology, &scheme, &budget.budget())
        .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let show = |r: &SolveReport| match r.objective() {
        Some(v) => format!("{v} s ({})", r.status),
        None => r.status.to_string(),
    };
    println!("scheme {}", scheme.label());
    println!("exact:  {}", show(&exact));
    println!("oracle: {}", show(&oracle));
    match (exact.objective(), oracle.objective()) {
        (Some(a), Some(b)) if (a - b).abs() < OBJECTIVE_TOLERANCE => {
            println!("objectives match (Δ < 1e-9)");
            Ok(0)
        }
        (None, None) => {
            println!("both infeasible");
            Ok(EXIT_INFEASIBLE)
        }
        _ => {
            println!("objectives differ");
            Ok(EXIT_VIOLATION)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    path: &Path,
    param: SweepParam,
    values: Vec<f64>,
    schemes: &[SchemeName],
    epsilon: Option<f64>,
    beta: Option<f64>,
    budget: &BudgetArgs,
    out: Option<&Path>,
    plot_data: Option<&Path>,
) -> Outcome {
    let topology = load_solvable(path, beta)?;
    let schemes = schemes
        .iter()
        .map(|&s| {
            // an epsilon sweep supplies the fraction itself
            let eps = if param == SweepParam::Epsilon {
                Some(epsilon.unwrap_or(1.0))
            } else {
                epsilon
            };
            scheme_kind(s, eps)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        param,
        values,
        schemes,
    };
    let result = experiments::run_sweep(&topology, &spec, &budget.budget())
        .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    write_or_print(out, &result.to_csv())?;
    if let Some(plot) = plot_data {
        write_or_print(Some(plot), &(result.to_plot_data() + "\n"))?;
    }
    Ok(0)
}

fn reproduce(out: &Path, seed: u64, requested_workers: Option<usize>) -> Outcome {
    let budget = Budget {
        workers: workers(requested_workers),
        seed,
        ..Budget::default()
    };
    let output =
        experiments::reproduce(out, &budget).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    print!("{}", output.summary);
    println!("wrote {} files to {}", output.files.len(), out.display());
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { topology } => validate(&topology),
        Command::Solve {
            topology,
            scheme,
            method,
            budget,
            stats,
            out,
        } => solve(&topology, &scheme, method, &budget, stats, out.as_deref()),
        Command::OracleCheck {
            topology,
            scheme,
            budget,
        } => oracle_check(&topology, &scheme, &budget),
        Command::Sweep {
            topology,
            param,
            values,
            schemes,
            epsilon,
            beta,
            budget,
            out,
            plot_data,
        } => sweep(
            &topology,
            param,
            values,
            &schemes,
            epsilon,
            beta,
            &budget,
            out.as_deref(),
            plot_data.as_deref(),
        ),
        Command::Reproduce { out, seed, workers } => reproduce(&out, seed, workers),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', "\nerror: "));
            ExitCode::from(f.code)
        }
    }
}
