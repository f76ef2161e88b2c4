//! Discrete-event replay of a schedule over one application cycle.
//!
//! The simulator re-derives durations, energies and the makespan from the
//! contract store and the event trace instead of trusting the schedule's
//! own predictions, so scheduler accounting bugs surface as disagreement
//! or as explicit violations.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::contracts::ContractStore;
use crate::graph::AppGraph;
use crate::platform::{self, Platform, ScalingModel};
use crate::scheduler::{Placement, Schedule, SchedulerConfig, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TaskFinish,
    TokenProduced,
    TokenConsumed,
    TaskStart,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub t_ms: f64,
    pub kind: EventKind,
    /// Task name, or `producer.port -> consumer.port` for token events.
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitUsage {
    pub busy_ms: f64,
    pub idle_ms: f64,
    pub dynamic_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub makespan_ms: f64,
    pub per_unit: BTreeMap<String, UnitUsage>,
    pub dynamic_mj: f64,
    pub static_mj: f64,
    pub total_mj: f64,
    pub deadline_ms: f64,
    pub deadline_met: bool,
    pub event_trace: Vec<SimEvent>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Violation {
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("precedence: {0}")]
    Precedence(String),
    #[error("unit overlap: {0}")]
    Overlap(String),
    #[error("incompatibility: {0}")]
    Incompatible(String),
    #[error("missing contract: {0}")]
    MissingContract(String),
}

struct ResolvedTask {
    placement: Placement,
    unit_idx: usize,
    start: f64,
    finish: f64,
    energy_mj: f64,
}

/// Replay `schedule` against `graph` on `platform`. Returns the first
/// violation if the schedule is not a legal execution.
pub fn simulate(
    graph: &AppGraph,
    schedule: &Schedule,
    platform: &Platform,
    contracts: &ContractStore,
    config: &SchedulerConfig,
) -> Result<SimReport, Violation> {
    let scaling = ScalingModel::cycle_scaling(platform);

    // every task exactly once
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for p in &schedule.placements {
        *seen.entry(p.task.as_str()).or_insert(0) += 1;
    }
    for node in &graph.nodes {
        match seen.get(node.name.as_str()) {
            None => {
                return Err(Violation::Coverage(format!(
                    "task `{}` has no placement",
                    node.name
                )))
            }
            Some(1) => {}
            Some(n) => {
                return Err(Violation::Coverage(format!(
                    "task `{}` has {n} placements",
                    node.name
                )))
            }
        }
    }
    if schedule.placements.len() != graph.nodes.len() {
        let stray = schedule
            .placements
            .iter()
            .find(|p| graph.node(&p.task).is_none())
            .expect("count mismatch implies an unknown task");
        return Err(Violation::Coverage(format!(
            "placement for unknown task `{}`",
            stray.task
        )));
    }

    // resolve durations and energies from the contract store
    let mut tasks: HashMap<String, ResolvedTask> = HashMap::new();
    for p in &schedule.placements {
        let node = graph.node(&p.task).expect("coverage checked");
        let unit_idx = platform
            .units
            .iter()
            .position(|u| u.name == p.unit)
            .ok_or_else(|| Violation::Incompatible(format!("unknown unit `{}`", p.unit)))?;
        let unit = &platform.units[unit_idx];
        let version = node
            .versions
            .iter()
            .find(|v| v.name == p.version)
            .ok_or_else(|| {
                Violation::Incompatible(format!(
                    "task `{}` has no version `{}`",
                    p.task, p.version
                ))
            })?;
        if !version
            .compatible_unit_types
            .iter()
            .any(|t| *t == unit.unit_type)
        {
            return Err(Violation::Incompatible(format!(
                "version `{}` of task `{}` cannot run on unit `{}` (type {})",
                p.version, p.task, p.unit, unit.unit_type
            )));
        }
        let opp = unit.opp(&p.opp).ok_or_else(|| {
            Violation::Incompatible(format!("unit `{}` has no OPP `{}`", p.unit, p.opp))
        })?;
        let figures = contracts
            .lookup(&node.contract_key, &p.version, &unit.unit_type, opp, &scaling)
            .ok_or_else(|| {
                Violation::MissingContract(format!(
                    "{}/{}/{}/{}",
                    node.contract_key, p.version, unit.unit_type, opp.id
                ))
            })?;
        let (duration, energy) = if config.use_average {
            (figures.time.acet_ms, figures.energy.ace_mj)
        } else {
            (figures.time.wcet_ms, figures.energy.wce_mj)
        };
        tasks.insert(
            p.task.clone(),
            ResolvedTask {
                placement: p.clone(),
                unit_idx,
                start: p.start_ms,
                finish: p.start_ms + duration,
                energy_mj: energy,
            },
        );
    }

    // replay task starts in time order, checking activation and exclusivity
    let mut start_order: Vec<&ResolvedTask> = tasks.values().collect();
    start_order.sort_by(|a, b| {
        a.start
            .partial_cmp(&b.start)
            .unwrap()
            .then_with(|| a.placement.task.cmp(&b.placement.task))
    });
    for rt in &start_order {
        for edge in graph.producers_of(&rt.placement.task) {
            let producer = &tasks[&edge.producer.component];
            let available = producer.finish + config.comm_cost_ms;
            if available > rt.start + TIME_EPS {
                return Err(Violation::Precedence(format!(
                    "{}.{} not available at t={:.3} (produced at t={:.3})",
                    edge.producer.component, edge.producer.port, rt.start, available
                )));
            }
        }
        for other in start_order.iter() {
            if other.placement.task == rt.placement.task || other.unit_idx != rt.unit_idx {
                continue;
            }
            if rt.start + TIME_EPS < other.finish && other.start + TIME_EPS < rt.finish {
                return Err(Violation::Overlap(format!(
                    "tasks `{}` and `{}` overlap on unit `{}`",
                    other.placement.task, rt.placement.task, rt.placement.unit
                )));
            }
        }
    }

    // build the event trace
    let mut events = Vec::new();
    for rt in &start_order {
        let name = &rt.placement.task;
        events.push(SimEvent {
            t_ms: rt.start,
            kind: EventKind::TaskStart,
            subject: name.clone(),
        });
        events.push(SimEvent {
            t_ms: rt.finish,
            kind: EventKind::TaskFinish,
            subject: name.clone(),
        });
        for edge in graph.consumers_of(name) {
            events.push(SimEvent {
                t_ms: rt.finish,
                kind: EventKind::TokenProduced,
                subject: format!(
                    "{}.{} -> {}.{}",
                    edge.producer.component, edge.producer.port,
                    edge.consumer.component, edge.consumer.port
                ),
            });
        }
        for edge in graph.producers_of(name) {
            events.push(SimEvent {
                t_ms: rt.start,
                kind: EventKind::TokenConsumed,
                subject: format!(
                    "{}.{} -> {}.{}",
                    edge.producer.component, edge.producer.port,
                    edge.consumer.component, edge.consumer.port
                ),
            });
        }
    }
    events.sort_by(|a, b| {
        a.t_ms
            .partial_cmp(&b.t_ms)
            .unwrap()
            .then_with(|| a.kind.cmp(&b.kind))
            .then_with(|| a.subject.cmp(&b.subject))
    });

    // accounting, from the trace's resolved figures only
    let makespan = tasks.values().map(|t| t.finish).fold(0.0, f64::max);
    let mut per_unit = BTreeMap::new();
    for (idx, unit) in platform.units.iter().enumerate() {
        // the empty sum is IEEE -0.0; normalize for display
        let busy: f64 = 0.0
            + tasks
                .values()
                .filter(|t| t.unit_idx == idx)
                .map(|t| t.finish - t.start)
                .sum::<f64>();
        let dynamic: f64 = 0.0
            + tasks
                .values()
                .filter(|t| t.unit_idx == idx)
                .map(|t| t.energy_mj)
                .sum::<f64>();
        per_unit.insert(
            unit.name.clone(),
            UnitUsage {
                busy_ms: busy,
                idle_ms: makespan - busy,
                dynamic_mj: dynamic,
            },
        );
    }
    let dynamic_mj: f64 = per_unit.values().map(|u| u.dynamic_mj).sum();
    let static_mj = platform::static_energy(platform, makespan);
    Ok(SimReport {
        makespan_ms: makespan,
        per_unit,
        dynamic_mj,
        static_mj,
        total_mj: dynamic_mj + static_mj,
        deadline_ms: schedule.deadline_ms,
        deadline_met: makespan <= schedule.deadline_ms + TIME_EPS,
        event_trace: events,
    })
}

const GANTT_WIDTH: usize = 60;

/// Fixed-width chart, one row per unit. Task names are truncated to fit
/// their time slot.
pub fn gantt(schedule: &Schedule, platform: &Platform) -> String {
    let makespan = schedule.predicted_makespan_ms;
    let name_width = platform
        .units
        .iter()
        .map(|u| u.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = String::new();
    out.push_str(&format!(
        "{:name_width$} |0{:>width$}",
        "unit",
        format!("{makespan:.3} ms|"),
        width = GANTT_WIDTH - 1
    ));
    out.push('\n');
    if makespan <= 0.0 {
        return out;
    }
    let scale = GANTT_WIDTH as f64 / makespan;
    for unit in &platform.units {
        let mut row: Vec<char> = vec!['.'; GANTT_WIDTH];
        let mut on_unit: Vec<&crate::scheduler::Placement> = schedule
            .placements
            .iter()
            .filter(|p| p.unit == unit.name)
            .collect();
        on_unit.sort_by(|a, b| a.start_ms.partial_cmp(&b.start_ms).unwrap());
        for p in on_unit {
            let lo = ((p.start_ms * scale).round() as usize).min(GANTT_WIDTH - 1);
            let hi = ((p.finish_ms * scale).round() as usize)
                .max(lo + 1)
                .min(GANTT_WIDTH);
            for (offset, cell) in row[lo..hi].iter_mut().enumerate() {
                *cell = p.task.chars().nth(offset).unwrap_or('=');
            }
        }
        out.push_str(&format!(
            "{:name_width$} |{}|",
            unit.name,
            row.iter().collect::<String>()
        ));
        out.push('\n');
    }
    out
}
