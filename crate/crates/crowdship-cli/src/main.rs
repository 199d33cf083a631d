//! Command-line entry point: run scenarios, compare solvers on paired
//! arrival streams, sweep parameters, run the property validation suites,
//! and print the recommended assignment interval.
//!
//! Exit codes: 0 success, 1 scenario/validation failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowdship::oracle::suites::{
    validate_mkp, validate_remarks, validate_schedule, validate_tum, SuiteOutcome,
};
use crowdship::sim::config::{ScenarioConfig, SolverChoice};
use crowdship::sim::recommend_timestep;
use crowdship::sim::report::{fmt_sig, run_scenario, RunReport};

#[derive(Parser)]
#[command(name = "crowdship", about = "Crowdshipping dispatch and relocation simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and write its report and event log.
    Run(ScenarioArgs),
    /// Run every solver (plus relocation variants) on shared arrival streams.
    Compare(ScenarioArgs),
    /// Cartesian sweep over configuration keys.
    Sweep(SweepArgs),
    /// Run the randomized property suites and report violation counts.
    Validate(ValidateArgs),
    /// Print the recommended assignment interval for a peak arrival rate.
    Timestep(TimestepArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Baseline preset the scenario and overrides build on.
    #[arg(long, default_value = "paper-small")]
    preset: String,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of replications.
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed value.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Solver: insertion | insertion-intra | sa | rts | mtamp.
    #[arg(long)]
    solver: Option<String>,
    /// Relocation after each assignment: on | off.
    #[arg(long)]
    relocation: Option<String>,
    /// Extra overrides, repeatable: --set key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Deterministic iteration budget for SA and RTS.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: ScenarioArgs,
    /// Swept keys, repeatable: --sweep key=v1,v2,... The pseudo-key `ratio`
    /// sets courier_rate = request_rate / value.
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...", required = true)]
    sweep: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    remarks: usize,
    #[arg(long, default_value_t = 500)]
    tum: usize,
    #[arg(long, default_value_t = 300)]
    mkp: usize,
    #[arg(long, default_value_t = 1000)]
    schedule: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TimestepArgs {
    /// Peak arrival rate, requests per minute.
    #[arg(long)]
    lambda: f64,
    /// Allowed probability of seeing at most one request per interval.
    #[arg(long)]
    epsilon: f64,
}

enum CliError {
    Usage(String),
    Scenario(String),
}

fn load_config(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = ScenarioConfig::preset(&args.preset)
        .ok_or_else(|| CliError::Usage(format!("unknown preset {:?}", args.preset)))?;
    if let Some(path) = &args.scenario {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        config = ScenarioConfig::parse_str(&text, config)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(solver) = &args.solver {
        config.set("solver", solver).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(relocation) = &args.relocation {
        config.set("relocation", relocation).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(base) = args.seed_base {
        config.seed_base = base;
    }
    if let Some(iterations) = args.iterations {
        config.sa_iterations = iterations;
        config.rts_iterations = iterations;
    }
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
        config.set(key.trim(), value.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))
}

fn write_outputs(dir: &Path, suffix: &str, report: &RunReport, trace: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Scenario(format!("{}: {e}", dir.display())))?;
    let name = |stem: &str| dir.join(format!("{stem}{suffix}.csv"));
    write(&name("report"), &report.to_csv())?;
    write(&name("events"), &report.events_csv())?;
    write(&name("zones"), &report.zones_csv())?;
    if trace {
        write(&name("trace"), &report.traces_csv())?;
        write(&name("relocation_flow"), &report.flow_csv())?;
        write(&name("relocation_virtual"), &report.virtual_csv())?;
        write(&name("relocation_counts"), &report.relocation_counts_csv())?;
    }
    Ok(())
}

fn cmd_run(args: &ScenarioArgs) -> Result<(), CliError> {
    let config = load_config(args)?;
    let report = run_scenario(&config).map_err(|e| CliError::Scenario(e.to_string()))?;
    write_outputs(&args.out, "", &report, config.trace)?;
    eprintln!(
        "run: solver={} relocation={} seeds={} mean_tsc=${} mean_solver_secs={:.4}",
        config.solver.name(),
        if config.relocation { "on" } else { "off" },
        config.seeds,
        fmt_sig(report.mean_of("tsc_usd")),
        report.mean_solver_secs(),
    );
    Ok(())
}

/// The comparison lineup: the four baselines, the main solver, and the main
/// solver with relocation.
fn compare_lineup() -> Vec<(&'static str, SolverChoice, bool)> {
    vec![
        ("insertion", SolverChoice::Insertion, false),
        ("insertion-intra", SolverChoice::InsertionIntra, false),
        ("sa", SolverChoice::SimulatedAnnealing, false),
        ("rts", SolverChoice::ReactiveTabu, false),
        ("mtamp", SolverChoice::Mtamp, false),
        ("mtamp-relocation", SolverChoice::Mtamp, true),
    ]
}

fn cmd_compare(args: &ScenarioArgs) -> Result<(), CliError> {
    let base = load_config(args)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Scenario(format!("{}: {e}", args.out.display())))?;
    let mut summary = String::from("solver,seed,tsc_usd,fulfilled_fraction,arrival_checksum\n");
    for (name, solver, relocation) in compare_lineup() {
        let mut config = base.clone();
        config.solver = solver;
        config.relocation = relocation;
        let report = run_scenario(&config).map_err(|e| CliError::Scenario(e.to_string()))?;
        write_outputs(&args.out, &format!("_{name}"), &report, config.trace)?;
        for seed_row in &report.per_seed {
            let tsc = seed_row
                .values
                .iter()
                .find(|(k, _)| k == "tsc_usd")
                .map(|(_, v)| *v)
                .unwrap_or(0.0);
            let frac = seed_row
                .values
                .iter()
                .find(|(k, _)| k == "fulfilled_fraction")
                .map(|(_, v)| *v)
                .unwrap_or(0.0);
            summary.push_str(&format!(
                "{name},{},{},{},{}\n",
                seed_row.seed,
                fmt_sig(tsc),
                fmt_sig(frac),
                seed_row.checksum
            ));
        }
        eprintln!(
            "compare: {name} mean_tsc=${} mean_solver_secs={:.4}",
            fmt_sig(report.mean_of("tsc_usd")),
            report.mean_solver_secs()
        );
    }
    write(&args.out.join("summary.csv"), &summary)
}

fn sanitize(v: &str) -> String {
    v.chars().map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let base = load_config(&args.base)?;
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for spec in &args.sweep {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--sweep expects key=v1,v2,..., got {spec:?}")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.is_empty() {
            return Err(CliError::Usage(format!("--sweep {key} has no values")));
        }
        axes.push((key.trim().to_string(), values));
    }
    fs::create_dir_all(&args.base.out)
        .map_err(|e| CliError::Scenario(format!("{}: {e}", args.base.out.display())))?;
    let mut header: Vec<String> = axes.iter().map(|(k, _)| k.clone()).collect();
    header.push("mean_tsc_usd".into());
    header.push("mean_fulfilled_fraction".into());
    let mut summary = header.join(",") + "\n";

    let mut counters = vec![0usize; axes.len()];
    loop {
        let cell: Vec<(String, String)> = axes
            .iter()
            .zip(&counters)
            .map(|((k, vs), &i)| (k.clone(), vs[i].clone()))
            .collect();
        let mut config = base.clone();
        for (key, value) in &cell {
            if key == "ratio" {
                let ratio: f64 = value
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad ratio value {value:?}")))?;
                if ratio <= 0.0 {
                    return Err(CliError::Usage("ratio must be positive".into()));
                }
                config.courier_rate = config.request_rate / ratio;
            } else {
                config.set(key, value).map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let report = run_scenario(&config).map_err(|e| CliError::Scenario(e.to_string()))?;
        let suffix: String =
            cell.iter().map(|(k, v)| format!("_{}-{}", sanitize(k), sanitize(v))).collect();
        write_outputs(&args.base.out, &suffix, &report, config.trace)?;
        let mut row: Vec<String> = cell.iter().map(|(_, v)| v.clone()).collect();
        row.push(fmt_sig(report.mean_of("tsc_usd")));
        row.push(fmt_sig(report.mean_of("fulfilled_fraction")));
        summary.push_str(&(row.join(",") + "\n"));
        eprintln!("sweep: {:?} mean_tsc=${}", cell, fmt_sig(report.mean_of("tsc_usd")));

        // next cell in the cartesian product
        let mut carry = true;
        for i in (0..counters.len()).rev() {
            if !carry {
                break;
            }
            counters[i] += 1;
            if counters[i] < axes[i].1.len() {
                carry = false;
            } else {
                counters[i] = 0;
            }
        }
        if carry {
            break;
        }
    }
    write(&args.base.out.join("sweep_summary.csv"), &summary)
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let suites: Vec<SuiteOutcome> = vec![
        validate_remarks(args.remarks, 10, 10, args.seed),
        validate_tum(args.tum, args.seed.wrapping_add(1)),
        validate_mkp(args.mkp, args.seed.wrapping_add(2)),
        validate_schedule(args.schedule, args.seed.wrapping_add(3)),
    ];
    let mut all_passed = true;
    for s in &suites {
        println!(
            "{}: cases={} violations={} {} ({:.2}s)",
            s.name,
            s.cases,
            s.violations,
            if s.passed() { "PASS" } else { "FAIL" },
            s.secs
        );
        all_passed &= s.passed();
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Scenario("validation suites reported violations".into()))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Compare(args) => cmd_compare(&args),
        Cmd::Sweep(args) => cmd_sweep(&args),
        Cmd::Validate(args) => cmd_validate(&args),
        Cmd::Timestep(args) => {
            if args.lambda <= 0.0 || !(0.0..1.0).contains(&args.epsilon) {
                return Err(CliError::Usage(
                    "timestep requires lambda > 0 and 0 <= epsilon < 1".into(),
                ));
            }
            println!("{}", fmt_sig(recommend_timestep(args.lambda, args.epsilon)));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Scenario(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
