//! `coordsched` — compile a coordination-language application into an
//! energy-optimal, deadline-feasible schedule and verify it by simulation.
//!
//! Exit codes are a stable contract:
//!   0  success
//!   1  validation failure (parse/graph/ft diagnostics, oversized exact run)
//!   2  I/O or usage error
//!   3  contract or platform store error (parse, invariants, no options)
//!   4  infeasible (deadline cannot be met)
//!   5  simulation violation (schedule is not a legal execution)

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coordsched_core::ast::{AppDecl, FtAnnotation};
use coordsched_core::contracts::{load_contracts, ContractStore};
use coordsched_core::diag::render_diagnostics;
use coordsched_core::ft::expand_ft;
use coordsched_core::graph::{activation_sets, build_graph, AppGraph};
use coordsched_core::manifest::RunManifest;
use coordsched_core::parser::parse_app;
use coordsched_core::platform::{load_platform, Platform, ScalingModel};
use coordsched_core::scheduler::{
    solve, Mode, SchedContext, SchedError, Schedule, SchedulerConfig,
};
use coordsched_core::simulator::{gantt, simulate, SimReport};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CONTRACTS: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_VIOLATION: u8 = 5;

#[derive(Parser)]
#[command(name = "coordsched", version, about = "Energy-aware scheduling for coordination-language applications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and statically validate an application
    Check {
        /// Application source file (.coord)
        app: PathBuf,
        #[command(flatten)]
        ft: FtFlags,
        /// Print the validated graph as JSON
        #[arg(long)]
        dump_graph: bool,
    },
    /// Compute a schedule and print it (table + JSON on request)
    Schedule {
        app: PathBuf,
        #[command(flatten)]
        inputs: InputFlags,
        #[command(flatten)]
        ft: FtFlags,
        #[command(flatten)]
        sched: SchedFlags,
        /// Write the schedule as JSON to this path
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Replay a previously computed schedule
    Simulate {
        app: PathBuf,
        #[command(flatten)]
        inputs: InputFlags,
        #[command(flatten)]
        ft: FtFlags,
        /// Schedule JSON produced by `schedule` or `run`
        #[arg(long)]
        schedule: PathBuf,
        /// Use average-case contract figures instead of worst-case
        #[arg(long)]
        use_average: bool,
        /// Write the simulation report as JSON to this path
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the event trace as JSON lines to this path
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Full pipeline: check, expand, schedule, simulate, report
    Run {
        app: PathBuf,
        #[command(flatten)]
        inputs: InputFlags,
        #[command(flatten)]
        ft: FtFlags,
        #[command(flatten)]
        sched: SchedFlags,
        /// Write the schedule as JSON to this path
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Schedule several configurations and tabulate them against the first
    Compare {
        app: PathBuf,
        #[command(flatten)]
        inputs: InputFlags,
        /// Row spec `label:mode[:Component=N|none]`, repeatable;
        /// mode is `energy`, `makespan` or `exact`
        #[arg(long = "row", required = true)]
        rows: Vec<String>,
    },
    /// Inspect platform descriptions
    #[command(subcommand)]
    Platform(PlatformCmd),
}

#[derive(Subcommand)]
enum PlatformCmd {
    /// Print units, operating points and reference points
    Show {
        /// Platform description file (.platform)
        platform: PathBuf,
    },
}

#[derive(Args)]
struct InputFlags {
    /// Platform description file (.platform)
    #[arg(long)]
    platform: PathBuf,
    /// Non-functional contract store (.contracts)
    #[arg(long)]
    contracts: PathBuf,
}

#[derive(Args)]
struct FtFlags {
    /// Skip the fault-tolerance expansion pass
    #[arg(long, conflicts_with = "expand_ft")]
    no_ft: bool,
    /// Force the fault-tolerance expansion pass (default for scheduling)
    #[arg(long)]
    expand_ft: bool,
    /// Override an ft annotation: `Component=N` or `Component=none`, repeatable
    #[arg(long = "ft-override")]
    ft_override: Vec<String>,
}

#[derive(Args)]
struct SchedFlags {
    /// Solver: `energy` (default), `makespan` or `exact`
    #[arg(long, default_value = "energy")]
    mode: String,
    /// Use average-case contract figures instead of worst-case
    #[arg(long)]
    use_average: bool,
    /// Schedule against this deadline instead of the one in the app
    #[arg(long)]
    deadline_override: Option<f64>,
    /// Require replicas of one ft group to sit on distinct units
    #[arg(long)]
    ft_distinct_units: bool,
    /// Fixed communication latency added per dependency, in ms
    #[arg(long, default_value_t = 0.0)]
    comm_cost: f64,
    /// Reserved for future stochastic solvers; current solvers are deterministic
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check { app, ft, dump_graph } => cmd_check(&app, &ft, dump_graph),
        Command::Schedule { app, inputs, ft, sched, json } => {
            cmd_schedule(&app, &inputs, &ft, &sched, json.as_deref())
        }
        Command::Simulate { app, inputs, ft, schedule, use_average, json, trace } => {
            cmd_simulate(&app, &inputs, &ft, &schedule, use_average, json.as_deref(), trace.as_deref())
        }
        Command::Run { app, inputs, ft, sched, json } => {
            cmd_run(&app, &inputs, &ft, &sched, json.as_deref())
        }
        Command::Compare { app, inputs, rows } => cmd_compare(&app, &inputs, &rows),
        Command::Platform(PlatformCmd::Show { platform }) => cmd_platform_show(&platform),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

type CmdResult = Result<(), u8>;

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    code
}

fn read_file(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_IO, format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), u8> {
    std::fs::write(path, contents)
        .map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn load_app(path: &Path) -> Result<AppDecl, u8> {
    let text = read_file(path)?;
    parse_app(&text, &path.display().to_string()).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_VALIDATION
    })
}

/// Apply `--ft-override` entries to the declaration tree.
fn apply_ft_overrides(app: &mut AppDecl, overrides: &[String]) -> Result<(), u8> {
    for entry in overrides {
        let (name, value) = entry.split_once('=').ok_or_else(|| {
            fail(EXIT_IO, format!("bad --ft-override `{entry}` (expected Component=N or Component=none)"))
        })?;
        let comp = app
            .components
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| fail(EXIT_VALIDATION, format!("--ft-override names unknown component `{name}`")))?;
        if value == "none" {
            comp.ft = None;
        } else {
            let replicas: u32 = value.parse().map_err(|_| {
                fail(EXIT_IO, format!("bad replica count `{value}` in --ft-override"))
            })?;
            if !coordsched_core::ast::ALLOWED_REPLICAS.contains(&replicas) {
                return Err(fail(
                    EXIT_VALIDATION,
                    format!("replica count {replicas} not allowed (use one of 2, 3, 5, 7)"),
                ));
            }
            comp.ft = Some(FtAnnotation {
                replicas,
                span: comp.span.clone(),
            });
        }
    }
    Ok(())
}

/// parse → validate → (optionally) expand ft; the `check` stage of every
/// pipeline. Warnings go to standard error, errors exit with code 1.
fn checked_graph(path: &Path, ft: &FtFlags) -> Result<AppGraph, u8> {
    let mut app = load_app(path)?;
    apply_ft_overrides(&mut app, &ft.ft_override)?;
    let graph = build_graph(&app).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_VALIDATION
    })?;
    if !graph.warnings.is_empty() {
        eprintln!("{}", render_diagnostics(&graph.warnings));
    }
    if ft.no_ft {
        return Ok(graph);
    }
    expand_ft(&graph).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_VALIDATION
    })
}

fn load_inputs(inputs: &InputFlags) -> Result<(Platform, ContractStore), u8> {
    if !inputs.platform.exists() {
        return Err(fail(EXIT_IO, format!("cannot read {}: not found", inputs.platform.display())));
    }
    if !inputs.contracts.exists() {
        return Err(fail(EXIT_IO, format!("cannot read {}: not found", inputs.contracts.display())));
    }
    let platform = load_platform(&inputs.platform).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_CONTRACTS
    })?;
    let contracts = load_contracts(&inputs.contracts).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_CONTRACTS
    })?;
    Ok((platform, contracts))
}

fn sched_config(sched: &SchedFlags) -> Result<SchedulerConfig, u8> {
    let mode = match sched.mode.as_str() {
        "energy" => Mode::EnergyMin,
        "makespan" => Mode::MakespanMin,
        "exact" => Mode::Exhaustive,
        other => return Err(fail(EXIT_IO, format!("unknown mode `{other}` (use energy, makespan or exact)"))),
    };
    Ok(SchedulerConfig {
        mode,
        use_average: sched.use_average,
        ft_distinct_units: sched.ft_distinct_units,
        comm_cost_ms: sched.comm_cost,
        ..SchedulerConfig::default()
    })
}

fn run_solver(
    graph: &AppGraph,
    platform: &Platform,
    contracts: &ContractStore,
    config: &SchedulerConfig,
    deadline_ms: f64,
) -> Result<Schedule, u8> {
    let ctx = SchedContext::new(graph, platform, contracts, config).map_err(|e| match e {
        SchedError::NoOptions { .. } => fail(EXIT_CONTRACTS, e),
        other => fail(EXIT_VALIDATION, other),
    })?;
    solve(&ctx, deadline_ms).map_err(|e| match e {
        SchedError::Infeasible { .. } => fail(EXIT_INFEASIBLE, e),
        SchedError::NoOptions { .. } => fail(EXIT_CONTRACTS, e),
        SchedError::TooLarge { .. } => fail(EXIT_VALIDATION, e),
    })
}

fn cmd_check(app_path: &Path, ft: &FtFlags, dump_graph: bool) -> CmdResult {
    let graph = checked_graph(app_path, ft)?;
    if dump_graph {
        println!("{}", serde_json::to_string_pretty(&graph.to_json()).expect("graph serializes"));
    } else {
        println!(
            "{}: {} components, {} edges, {} activation waves — OK",
            graph.app_name,
            graph.nodes.len(),
            graph.edges.len(),
            activation_sets(&graph).len()
        );
    }
    Ok(())
}

fn schedule_table(schedule: &Schedule) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:<10} {:<8} {:<16} {:>10} {:>10}\n",
        "task", "unit", "version", "opp", "start ms", "finish ms"
    ));
    for p in &schedule.placements {
        out.push_str(&format!(
            "{:<24} {:<10} {:<8} {:<16} {:>10.3} {:>10.3}\n",
            p.task, p.unit, p.version, p.opp, p.start_ms, p.finish_ms
        ));
    }
    out
}

fn energy_breakdown(schedule: &Schedule) -> String {
    format!(
        "makespan {:.3} ms (deadline {:.3} ms, {})\n\
         dynamic energy {:.3} mJ + static energy {:.3} mJ = {:.3} mJ total\n",
        schedule.predicted_makespan_ms,
        schedule.deadline_ms,
        if schedule.feasible { "met" } else { "missed" },
        schedule.predicted_dynamic_mj,
        schedule.predicted_static_mj,
        schedule.predicted_total_mj,
    )
}

fn cmd_schedule(
    app_path: &Path,
    inputs: &InputFlags,
    ft: &FtFlags,
    sched: &SchedFlags,
    json: Option<&Path>,
) -> CmdResult {
    let app = load_app(app_path)?;
    let deadline = sched.deadline_override.unwrap_or(app.deadline_ms);
    let graph = checked_graph(app_path, ft)?;
    let (platform, contracts) = load_inputs(inputs)?;
    let config = sched_config(sched)?;
    let schedule = run_solver(&graph, &platform, &contracts, &config, deadline)?;
    print!("{}", schedule_table(&schedule));
    print!("{}", energy_breakdown(&schedule));
    if let Some(path) = json {
        write_file(path, &schedule.to_json())?;
    }
    if !schedule.feasible {
        return Err(EXIT_INFEASIBLE);
    }
    Ok(())
}

fn sim_or_exit(
    graph: &AppGraph,
    schedule: &Schedule,
    platform: &Platform,
    contracts: &ContractStore,
    config: &SchedulerConfig,
) -> Result<SimReport, u8> {
    simulate(graph, schedule, platform, contracts, config)
        .map_err(|v| fail(EXIT_VIOLATION, v))
}

fn report_text(report: &SimReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "simulated makespan {:.3} ms (deadline {:.3} ms, {})\n",
        report.makespan_ms,
        report.deadline_ms,
        if report.deadline_met { "met" } else { "missed" }
    ));
    out.push_str(&format!(
        "simulated dynamic {:.3} mJ + static {:.3} mJ = {:.3} mJ total\n",
        report.dynamic_mj, report.static_mj, report.total_mj
    ));
    out.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>12}\n",
        "unit", "busy ms", "idle ms", "dynamic mJ"
    ));
    for (unit, usage) in &report.per_unit {
        out.push_str(&format!(
            "{:<10} {:>10.3} {:>10.3} {:>12.3}\n",
            unit, usage.busy_ms, usage.idle_ms, usage.dynamic_mj
        ));
    }
    out
}

fn cmd_simulate(
    app_path: &Path,
    inputs: &InputFlags,
    ft: &FtFlags,
    schedule_path: &Path,
    use_average: bool,
    json: Option<&Path>,
    trace: Option<&Path>,
) -> CmdResult {
    let graph = checked_graph(app_path, ft)?;
    let (platform, contracts) = load_inputs(inputs)?;
    let text = read_file(schedule_path)?;
    let schedule = Schedule::from_json(&text)
        .map_err(|e| fail(EXIT_IO, format!("bad schedule JSON {}: {e}", schedule_path.display())))?;
    let config = SchedulerConfig {
        use_average,
        ..SchedulerConfig::default()
    };
    let report = sim_or_exit(&graph, &schedule, &platform, &contracts, &config)?;
    print!("{}", report_text(&report));
    if let Some(path) = json {
        write_file(path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    if let Some(path) = trace {
        let mut lines = String::new();
        for event in &report.event_trace {
            lines.push_str(&serde_json::to_string(event).expect("event serializes"));
            lines.push('\n');
        }
        write_file(path, &lines)?;
    }
    if !report.deadline_met {
        return Err(EXIT_INFEASIBLE);
    }
    Ok(())
}

fn cmd_run(
    app_path: &Path,
    inputs: &InputFlags,
    ft: &FtFlags,
    sched: &SchedFlags,
    json: Option<&Path>,
) -> CmdResult {
    let app = load_app(app_path)?;
    let deadline = sched.deadline_override.unwrap_or(app.deadline_ms);
    let graph = checked_graph(app_path, ft)?;
    let (platform, contracts) = load_inputs(inputs)?;
    let config = sched_config(sched)?;
    let schedule = run_solver(&graph, &platform, &contracts, &config, deadline)?;
    let report = sim_or_exit(&graph, &schedule, &platform, &contracts, &config)?;

    println!("== schedule ==");
    print!("{}", schedule_table(&schedule));
    println!("\n== gantt ==");
    print!("{}", gantt(&schedule, &platform));
    println!("\n== energy ==");
    print!("{}", report_text(&report));
    let manifest = RunManifest::collect(
        &[app_path, &inputs.platform, &inputs.contracts],
        format!(
            "mode={} use_average={} deadline_ms={deadline} ft_distinct_units={} comm_cost_ms={}",
            sched.mode, sched.use_average, sched.ft_distinct_units, sched.comm_cost
        ),
    )
    .map_err(|e| fail(EXIT_IO, e))?;
    println!("\n== manifest ==");
    println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    if let Some(path) = json {
        write_file(path, &schedule.to_json())?;
    }
    if !report.deadline_met {
        return Err(EXIT_INFEASIBLE);
    }
    Ok(())
}

struct RowSpec {
    label: String,
    mode: String,
    ft_override: Option<String>,
}

fn parse_row(spec: &str) -> Result<RowSpec, u8> {
    let mut parts = spec.splitn(3, ':');
    let label = parts.next().unwrap_or_default();
    let mode = parts.next().unwrap_or_default();
    if label.is_empty() || mode.is_empty() {
        return Err(fail(EXIT_IO, format!("bad --row `{spec}` (expected label:mode[:Component=N|none])")));
    }
    Ok(RowSpec {
        label: label.to_string(),
        mode: mode.to_string(),
        ft_override: parts.next().map(str::to_string),
    })
}

fn cmd_compare(app_path: &Path, inputs: &InputFlags, rows: &[String]) -> CmdResult {
    let (platform, contracts) = load_inputs(inputs)?;
    let base_app = load_app(app_path)?;

    println!(
        "{:<12} {:<9} {:<10} {:>12} {:>12} {:>10}",
        "label", "mode", "feasible", "makespan ms", "total mJ", "delta %"
    );
    let mut baseline_mj: Option<f64> = None;
    for spec in rows {
        let row = parse_row(spec)?;
        let sched = SchedFlags {
            mode: row.mode.clone(),
            use_average: false,
            deadline_override: None,
            ft_distinct_units: false,
            comm_cost: 0.0,
            seed: None,
        };
        let config = sched_config(&sched)?;
        let mut app = base_app.clone();
        if let Some(over) = &row.ft_override {
            apply_ft_overrides(&mut app, std::slice::from_ref(over))?;
        }
        let result = build_graph(&app)
            .and_then(|g| expand_ft(&g))
            .map_err(|diags| {
                eprintln!("{}", render_diagnostics(&diags));
                EXIT_VALIDATION
            })
            .and_then(|graph| run_solver(&graph, &platform, &contracts, &config, app.deadline_ms));
        match result {
            Ok(schedule) => {
                let delta = match baseline_mj {
                    None => {
                        baseline_mj = Some(schedule.predicted_total_mj);
                        0.0
                    }
                    Some(base) if base > 0.0 => {
                        (schedule.predicted_total_mj - base) / base * 100.0
                    }
                    Some(_) => 0.0,
                };
                println!(
                    "{:<12} {:<9} {:<10} {:>12.3} {:>12.3} {:>+10.1}",
                    row.label,
                    row.mode,
                    schedule.feasible,
                    schedule.predicted_makespan_ms,
                    schedule.predicted_total_mj,
                    delta
                );
            }
            Err(code) if code == EXIT_INFEASIBLE => {
                println!(
                    "{:<12} {:<9} {:<10} {:>12} {:>12} {:>10}",
                    row.label, row.mode, "false", "-", "-", "-"
                );
            }
            Err(code) => return Err(code),
        }
    }
    Ok(())
}

fn cmd_platform_show(path: &Path) -> CmdResult {
    if !path.exists() {
        return Err(fail(EXIT_IO, format!("cannot read {}: not found", path.display())));
    }
    let platform = load_platform(path).map_err(|diags| {
        eprintln!("{}", render_diagnostics(&diags));
        EXIT_CONTRACTS
    })?;
    let scaling = ScalingModel::cycle_scaling(&platform);
    println!("platform {} ({} units)", platform.name, platform.units.len());
    println!(
        "{:<10} {:<8} {:>14} {:<32}",
        "unit", "type", "static mW", "operating points"
    );
    for unit in &platform.units {
        let opps = unit
            .opps
            .iter()
            .map(|o| o.id.clone())
            .collect::<Vec<_>>()
            .join(", ");
        println!(
            "{:<10} {:<8} {:>14.1} {:<32}",
            unit.name, unit.unit_type, unit.static_power_mw, opps
        );
    }
    println!("reference points:");
    for (ty, opp) in &scaling.reference {
        println!("  {ty}: {opp}");
    }
    println!("total static power {:.1} mW", platform.total_static_power_mw());
    Ok(())
}
