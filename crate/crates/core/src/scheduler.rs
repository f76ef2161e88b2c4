//! Space/time mapping: assign each task a (unit, version, OPP, start time).
//!
//! Three solvers share one placement engine:
//!   * `schedule_makespan` — HEFT-style list scheduling on upward ranks;
//!   * `schedule_energy`   — deadline-feasible list schedule followed by a
//!     greedy single-task reassignment descent on total energy;
//!   * `schedule_exhaustive` — enumeration of all assignments and all
//!     topological orders, the ground-truth oracle for small instances.
//!
//! All solvers are deterministic; ties break by lexicographic task name,
//! then unit name, then version, then OPP id.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ast::Objective;
use crate::contracts::{ContractFigures, ContractStore};
use crate::graph::AppGraph;
use crate::platform::{self, Platform, ScalingModel};

pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    EnergyMin,
    MakespanMin,
    Exhaustive,
}

#[derive(Debug, Clone)]
pub struct SchedulerConfig {
    pub mode: Mode,
    pub use_average: bool,
    pub ft_distinct_units: bool,
    pub comm_cost_ms: f64,
    /// Hard task-count cap for the exhaustive solver.
    pub exhaustive_cap: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            mode: Mode::EnergyMin,
            use_average: false,
            ft_distinct_units: false,
            comm_cost_ms: 0.0,
            exhaustive_cap: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub task: String,
    pub unit: String,
    pub version: String,
    pub opp: String,
    pub start_ms: f64,
    pub finish_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub app: String,
    pub objective: Objective,
    pub placements: Vec<Placement>,
    pub predicted_makespan_ms: f64,
    pub predicted_dynamic_mj: f64,
    pub predicted_static_mj: f64,
    pub predicted_total_mj: f64,
    pub deadline_ms: f64,
    pub feasible: bool,
}

impl Schedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Schedule, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SchedError {
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        achieved_makespan_ms: Option<f64>,
    },
    #[error("task `{task}` has no resolvable (unit, version, OPP) option")]
    NoOptions { task: String },
    #[error("instance too large for exhaustive search: {tasks} tasks (cap {cap})")]
    TooLarge { tasks: usize, cap: usize },
}

/// One feasible (unit, version, OPP) choice for a task, with resolved cost.
#[derive(Debug, Clone)]
struct TaskOption {
    unit_idx: usize,
    unit: String,
    unit_type: String,
    version: String,
    opp: String,
    duration_ms: f64,
    energy_mj: f64,
}

/// Immutable solver context shared by all strategies.
pub struct SchedContext<'a> {
    pub graph: &'a AppGraph,
    pub platform: &'a Platform,
    pub contracts: &'a ContractStore,
    pub config: &'a SchedulerConfig,
    tasks: Vec<String>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    options: Vec<Vec<TaskOption>>,
    replica_group: Vec<Option<String>>,
}

impl<'a> SchedContext<'a> {
    pub fn new(
        graph: &'a AppGraph,
        platform: &'a Platform,
        contracts: &'a ContractStore,
        config: &'a SchedulerConfig,
    ) -> Result<SchedContext<'a>, SchedError> {
        let scaling = ScalingModel::cycle_scaling(platform);
        let tasks: Vec<String> = graph.topo_order.clone();
        let task_idx: HashMap<String, usize> = tasks
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let n = tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for e in &graph.edges {
            let u = task_idx[&e.producer.component];
            let v = task_idx[&e.consumer.component];
            if !succs[u].contains(&v) {
                succs[u].push(v);
            }
            if !preds[v].contains(&u) {
                preds[v].push(u);
            }
        }

        let mut options = Vec::with_capacity(n);
        let mut replica_group = Vec::with_capacity(n);
        for name in &tasks {
            let node = graph.node(name).expect("topo order names exist");
            replica_group.push(node.replica_group.clone());
            let mut opts = Vec::new();
            for (unit_idx, unit) in platform.units.iter().enumerate() {
                for version in &node.versions {
                    if !version
                        .compatible_unit_types
                        .iter()
                        .any(|t| *t == unit.unit_type)
                    {
                        continue;
                    }
                    for opp in &unit.opps {
                        let Some(figures) = contracts.lookup(
                            &node.contract_key,
                            &version.name,
                            &unit.unit_type,
                            opp,
                            &scaling,
                        ) else {
                            continue;
                        };
                        let (duration_ms, energy_mj) = pick_case(&figures, config.use_average);
                        opts.push(TaskOption {
                            unit_idx,
                            unit: unit.name.clone(),
                            unit_type: unit.unit_type.clone(),
                            version: version.name.clone(),
                            opp: opp.id.clone(),
                            duration_ms,
                            energy_mj,
                        });
                    }
                }
            }
            opts.sort_by(|a, b| {
                (&a.unit, &a.version, &a.opp).cmp(&(&b.unit, &b.version, &b.opp))
            });
            if opts.is_empty() {
                return Err(SchedError::NoOptions { task: name.clone() });
            }
            options.push(opts);
        }

        Ok(SchedContext {
            graph,
            platform,
            contracts,
            config,
            tasks,
            preds,
            succs,
            options,
            replica_group,
        })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    fn mean_duration(&self, task: usize) -> f64 {
        // mean over distinct (version, unit type, OPP) triples; multiple
        // units of one type contribute once
        let mut seen: Vec<(&str, &str, &str)> = Vec::new();
        let mut sum = 0.0;
        for o in &self.options[task] {
            let key = (o.version.as_str(), o.unit_type.as_str(), o.opp.as_str());
            if !seen.contains(&key) {
                seen.push(key);
                sum += o.duration_ms;
            }
        }
        sum / seen.len() as f64
    }

    fn upward_ranks(&self) -> Vec<f64> {
        let n = self.tasks.len();
        let mut rank = vec![0.0; n];
        // topo_order is topological, so walk it backwards
        for idx in (0..n).rev() {
            let tail = self.succs[idx]
                .iter()
                .map(|&s| self.config.comm_cost_ms + rank[s])
                .fold(0.0, f64::max);
            rank[idx] = self.mean_duration(idx) + tail;
        }
        rank
    }

    /// Task indices in descending upward rank, names breaking ties.
    fn list_order(&self) -> Vec<usize> {
        let ranks = self.upward_ranks();
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.sort_by(|&a, &b| {
            ranks[b]
                .partial_cmp(&ranks[a])
                .unwrap()
                .then_with(|| self.tasks[a].cmp(&self.tasks[b]))
        });
        order
    }

    /// Place tasks in `order` with the options picked by `choose`, using
    /// earliest-gap insertion. Returns per-task placements (indexed like
    /// `self.tasks`) or None if a distinct-units conflict arises.
    fn place(
        &self,
        order: &[usize],
        mut choose: impl FnMut(&Self, usize, &PartialSchedule) -> usize,
    ) -> Option<PartialSchedule> {
        let mut partial = PartialSchedule::new(self.tasks.len(), self.platform.units.len());
        for &task in order {
            let opt_idx = choose(self, task, &partial);
            if !self.place_one(task, opt_idx, &mut partial) {
                return None;
            }
        }
        Some(partial)
    }

    fn place_one(&self, task: usize, opt_idx: usize, partial: &mut PartialSchedule) -> bool {
        let opt = &self.options[task][opt_idx];
        if self.config.ft_distinct_units && !self.distinct_unit_ok(task, opt.unit_idx, partial) {
            return false;
        }
        let ready = self.ready_time(task, partial);
        let start = partial.timelines[opt.unit_idx].earliest_gap(ready, opt.duration_ms);
        partial.timelines[opt.unit_idx].insert(start, start + opt.duration_ms);
        partial.chosen[task] = Some(opt_idx);
        partial.start[task] = start;
        partial.finish[task] = start + opt.duration_ms;
        true
    }

    fn ready_time(&self, task: usize, partial: &PartialSchedule) -> f64 {
        self.preds[task]
            .iter()
            .map(|&p| partial.finish[p] + self.config.comm_cost_ms)
            .fold(0.0, f64::max)
    }

    fn distinct_unit_ok(&self, task: usize, unit_idx: usize, partial: &PartialSchedule) -> bool {
        let Some(group) = &self.replica_group[task] else {
            return true;
        };
        for (other, g) in self.replica_group.iter().enumerate() {
            if other == task || g.as_deref() != Some(group.as_str()) {
                continue;
            }
            if let Some(opt) = partial.chosen[other] {
                if self.options[other][opt].unit_idx == unit_idx {
                    return false;
                }
            }
        }
        true
    }

    fn finish_schedule(&self, partial: &PartialSchedule, deadline_ms: f64) -> Schedule {
        let mut placements: Vec<Placement> = (0..self.tasks.len())
            .map(|t| {
                let opt = &self.options[t][partial.chosen[t].expect("all tasks placed")];
                Placement {
                    task: self.tasks[t].clone(),
                    unit: opt.unit.clone(),
                    version: opt.version.clone(),
                    opp: opt.opp.clone(),
                    start_ms: partial.start[t],
                    finish_ms: partial.finish[t],
                }
            })
            .collect();
        placements.sort_by(|a, b| {
            a.start_ms
                .partial_cmp(&b.start_ms)
                .unwrap()
                .then_with(|| a.task.cmp(&b.task))
        });
        let makespan = partial.makespan();
        let (dynamic_mj, static_mj, total_mj) = self.energy_of(partial);
        Schedule {
            app: self.graph.app_name.clone(),
            objective: self.graph.objective,
            placements,
            predicted_makespan_ms: makespan,
            predicted_dynamic_mj: dynamic_mj,
            predicted_static_mj: static_mj,
            predicted_total_mj: total_mj,
            deadline_ms,
            feasible: makespan <= deadline_ms + TIME_EPS,
        }
    }

    fn energy_of(&self, partial: &PartialSchedule) -> (f64, f64, f64) {
        let dynamic: f64 = (0..self.tasks.len())
            .map(|t| self.options[t][partial.chosen[t].expect("placed")].energy_mj)
            .sum();
        let static_mj = platform::static_energy(self.platform, partial.makespan());
        (dynamic, static_mj, dynamic + static_mj)
    }

    fn empty_schedule(&self, deadline_ms: f64) -> Schedule {
        Schedule {
            app: self.graph.app_name.clone(),
            objective: self.graph.objective,
            placements: Vec::new(),
            predicted_makespan_ms: 0.0,
            predicted_dynamic_mj: 0.0,
            predicted_static_mj: 0.0,
            predicted_total_mj: 0.0,
            deadline_ms,
            feasible: true,
        }
    }
}

fn pick_case(figures: &ContractFigures, use_average: bool) -> (f64, f64) {
    if use_average {
        (figures.time.acet_ms, figures.energy.ace_mj)
    } else {
        (figures.time.wcet_ms, figures.energy.wce_mj)
    }
}

#[derive(Debug, Clone)]
struct PartialSchedule {
    chosen: Vec<Option<usize>>,
    start: Vec<f64>,
    finish: Vec<f64>,
    timelines: Vec<Timeline>,
}

impl PartialSchedule {
    fn new(tasks: usize, units: usize) -> Self {
        PartialSchedule {
            chosen: vec![None; tasks],
            start: vec![0.0; tasks],
            finish: vec![0.0; tasks],
            timelines: vec![Timeline::default(); units],
        }
    }

    fn makespan(&self) -> f64 {
        self.finish.iter().copied().fold(0.0, f64::max)
    }
}

/// Busy intervals on one unit, kept sorted by start time.
#[derive(Debug, Clone, Default)]
struct Timeline {
    intervals: Vec<(f64, f64)>,
}

impl Timeline {
    /// Earliest start >= ready such that [start, start+duration) is free.
    fn earliest_gap(&self, ready: f64, duration: f64) -> f64 {
        let mut candidate = ready;
        for &(s, e) in &self.intervals {
            if candidate + duration <= s + TIME_EPS {
                return candidate;
            }
            if e > candidate {
                candidate = e;
            }
        }
        candidate
    }

    fn insert(&mut self, start: f64, end: f64) {
        let idx = self
            .intervals
            .partition_point(|&(s, _)| s < start);
        self.intervals.insert(idx, (start, end));
    }
}

/// HEFT-style list scheduling: minimize each task's earliest finish time in
/// upward-rank order.
pub fn schedule_makespan(ctx: &SchedContext, deadline_ms: f64) -> Result<Schedule, SchedError> {
    if ctx.task_count() == 0 {
        return Ok(ctx.empty_schedule(deadline_ms));
    }
    let order = ctx.list_order();
    let partial = ctx
        .place(&order, |ctx, task, partial| {
            best_eft_option(ctx, task, partial)
        })
        .ok_or_else(|| SchedError::Infeasible {
            reason: "replicas cannot be placed on distinct units".to_string(),
            achieved_makespan_ms: None,
        })?;
    Ok(ctx.finish_schedule(&partial, deadline_ms))
}

fn best_eft_option(ctx: &SchedContext, task: usize, partial: &PartialSchedule) -> usize {
    let ready = ctx.ready_time(task, partial);
    let mut best = 0;
    let mut best_finish = f64::INFINITY;
    for (i, opt) in ctx.options[task].iter().enumerate() {
        if ctx.config.ft_distinct_units && !ctx.distinct_unit_ok(task, opt.unit_idx, partial) {
            continue;
        }
        let start = partial.timelines[opt.unit_idx].earliest_gap(ready, opt.duration_ms);
        let finish = start + opt.duration_ms;
        if finish < best_finish - TIME_EPS {
            best_finish = finish;
            best = i;
        }
    }
    best
}

/// Deadline-constrained energy minimization: a feasible list schedule, then
/// greedy single-task reassignment descent on predicted total energy.
pub fn schedule_energy(ctx: &SchedContext, deadline_ms: f64) -> Result<Schedule, SchedError> {
    if ctx.task_count() == 0 {
        return Ok(ctx.empty_schedule(deadline_ms));
    }
    let order = ctx.list_order();
    let phase1 = ctx
        .place(&order, |ctx, task, partial| {
            best_eft_option(ctx, task, partial)
        })
        .ok_or_else(|| SchedError::Infeasible {
            reason: "replicas cannot be placed on distinct units".to_string(),
            achieved_makespan_ms: None,
        })?;
    if phase1.makespan() > deadline_ms + TIME_EPS {
        return Err(SchedError::Infeasible {
            reason: format!(
                "no schedule meets the {deadline_ms} ms deadline (best achieved makespan {:.3} ms)",
                phase1.makespan()
            ),
            achieved_makespan_ms: Some(phase1.makespan()),
        });
    }

    let mut assignment: Vec<usize> = (0..ctx.task_count())
        .map(|t| phase1.chosen[t].expect("placed"))
        .collect();
    let mut current = phase1;
    let mut current_total = ctx.energy_of(&current).2;

    // descend until no single reassignment improves total energy
    loop {
        let mut best_move: Option<(usize, usize, PartialSchedule, f64)> = None;
        for task in name_order(ctx) {
            for alt in 0..ctx.options[task].len() {
                if alt == assignment[task] {
                    continue;
                }
                let mut trial_assignment = assignment.clone();
                trial_assignment[task] = alt;
                let Some(trial) = rebuild(ctx, &order, &trial_assignment) else {
                    continue;
                };
                if trial.makespan() > deadline_ms + TIME_EPS {
                    continue;
                }
                let total = ctx.energy_of(&trial).2;
                let improvement = current_total - total;
                let best_so_far = best_move.as_ref().map(|m| current_total - m.3).unwrap_or(0.0);
                if improvement > best_so_far + 1e-12 {
                    best_move = Some((task, alt, trial, total));
                }
            }
        }
        match best_move {
            Some((task, alt, trial, total)) => {
                assignment[task] = alt;
                current = trial;
                current_total = total;
            }
            None => break,
        }
    }
    Ok(ctx.finish_schedule(&current, deadline_ms))
}

fn name_order(ctx: &SchedContext) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ctx.task_count()).collect();
    order.sort_by(|&a, &b| ctx.tasks[a].cmp(&ctx.tasks[b]));
    order
}

fn rebuild(ctx: &SchedContext, order: &[usize], assignment: &[usize]) -> Option<PartialSchedule> {
    ctx.place(order, |_, task, _| assignment[task])
}

/// Exhaustive oracle: every (unit, version, OPP) assignment crossed with
/// every topological order, greedy earliest-start insertion per order.
pub fn schedule_exhaustive(ctx: &SchedContext, deadline_ms: f64) -> Result<Schedule, SchedError> {
    let n = ctx.task_count();
    if n == 0 {
        return Ok(ctx.empty_schedule(deadline_ms));
    }
    if n > ctx.config.exhaustive_cap {
        return Err(SchedError::TooLarge {
            tasks: n,
            cap: ctx.config.exhaustive_cap,
        });
    }
    let energy_mode = !matches!(ctx.graph.objective, crate::ast::Objective::MinimizeMakespan);
    let static_rate = ctx.platform.total_static_power_mw() / 1000.0; // mJ per ms

    let mut best: Option<(f64, PartialSchedule)> = None; // keyed objective value
    let mut best_achieved_makespan = f64::INFINITY;
    let mut assignment = vec![0usize; n];
    enumerate_assignments(ctx, 0, &mut assignment, &mut |ctx, assignment| {
        if ctx.config.ft_distinct_units && !assignment_distinct_ok(ctx, assignment) {
            return;
        }
        let dynamic: f64 = (0..n)
            .map(|t| ctx.options[t][assignment[t]].energy_mj)
            .sum();
        let path_lb = critical_path(ctx, assignment);
        if energy_mode {
            // for a fixed assignment the dynamic part is constant, so the
            // minimum-makespan order is also the minimum-energy order
            if let Some((best_total, _)) = &best {
                if dynamic + static_rate * path_lb >= *best_total - 1e-12 {
                    return;
                }
            }
            if path_lb > deadline_ms + TIME_EPS {
                best_achieved_makespan = best_achieved_makespan.min(path_lb);
                return;
            }
        } else if let Some((best_span, _)) = &best {
            if path_lb >= *best_span - TIME_EPS {
                return;
            }
        }
        let Some(partial) = min_makespan_order(ctx, assignment) else {
            return;
        };
        let makespan = partial.makespan();
        best_achieved_makespan = best_achieved_makespan.min(makespan);
        if energy_mode {
            if makespan > deadline_ms + TIME_EPS {
                return;
            }
            let total = dynamic + static_rate * makespan;
            if best.as_ref().map_or(true, |(b, _)| total < *b - 1e-12) {
                best = Some((total, partial));
            }
        } else if best.as_ref().map_or(true, |(b, _)| makespan < *b - TIME_EPS) {
            best = Some((makespan, partial));
        }
    });

    match best {
        Some((_, partial)) => Ok(ctx.finish_schedule(&partial, deadline_ms)),
        None => Err(SchedError::Infeasible {
            reason: format!(
                "no assignment meets the {deadline_ms} ms deadline (best achieved makespan {:.3} ms)",
                best_achieved_makespan
            ),
            achieved_makespan_ms: if best_achieved_makespan.is_finite() {
                Some(best_achieved_makespan)
            } else {
                None
            },
        }),
    }
}

fn enumerate_assignments(
    ctx: &SchedContext,
    task: usize,
    assignment: &mut Vec<usize>,
    visit: &mut impl FnMut(&SchedContext, &[usize]),
) {
    if task == ctx.task_count() {
        visit(ctx, assignment);
        return;
    }
    for i in 0..ctx.options[task].len() {
        assignment[task] = i;
        enumerate_assignments(ctx, task + 1, assignment, visit);
    }
}

fn assignment_distinct_ok(ctx: &SchedContext, assignment: &[usize]) -> bool {
    for a in 0..assignment.len() {
        let Some(ga) = &ctx.replica_group[a] else {
            continue;
        };
        for b in a + 1..assignment.len() {
            if ctx.replica_group[b].as_deref() == Some(ga.as_str())
                && ctx.options[a][assignment[a]].unit_idx == ctx.options[b][assignment[b]].unit_idx
            {
                return false;
            }
        }
    }
    true
}

/// Longest path using assigned durations, ignoring resource contention.
/// A lower bound on any schedule's makespan for this assignment.
fn critical_path(ctx: &SchedContext, assignment: &[usize]) -> f64 {
    let n = ctx.task_count();
    let mut longest = vec![0.0f64; n];
    for t in (0..n).rev() {
        let tail = ctx.succs[t]
            .iter()
            .map(|&s| ctx.config.comm_cost_ms + longest[s])
            .fold(0.0, f64::max);
        longest[t] = ctx.options[t][assignment[t]].duration_ms + tail;
    }
    longest.iter().copied().fold(0.0, f64::max)
}

/// Minimum makespan over all topological orders for a fixed assignment,
/// via branch-and-bound over order prefixes. Returns the first optimal
/// placement in lexicographic order enumeration.
fn min_makespan_order(ctx: &SchedContext, assignment: &[usize]) -> Option<PartialSchedule> {
    let n = ctx.task_count();
    let mut indegree = vec![0usize; n];
    for t in 0..n {
        for &s in &ctx.succs[t] {
            indegree[s] += 1;
        }
    }
    let mut state = OrderSearch {
        ctx,
        assignment,
        best: None,
        partial: PartialSchedule::new(n, ctx.platform.units.len()),
        indegree: indegree,
        placed: 0,
    };
    state.run();
    state.best
}

struct OrderSearch<'a, 'b> {
    ctx: &'a SchedContext<'b>,
    assignment: &'a [usize],
    best: Option<PartialSchedule>,
    partial: PartialSchedule,
    indegree: Vec<usize>,
    placed: usize,
}

impl OrderSearch<'_, '_> {
    fn run(&mut self) {
        let n = self.ctx.task_count();
        if self.placed == n {
            let makespan = self.partial.makespan();
            let better = self
                .best
                .as_ref()
                .map_or(true, |b| makespan < b.makespan() - TIME_EPS);
            if better {
                self.best = Some(self.partial.clone());
            }
            return;
        }
        if let Some(b) = &self.best {
            if self.partial.makespan() >= b.makespan() - TIME_EPS {
                return; // cannot improve: makespan only grows
            }
        }
        // ready tasks in name order for deterministic enumeration
        let mut ready: Vec<usize> = (0..n)
            .filter(|&t| self.partial.chosen[t].is_none() && self.indegree[t] == 0)
            .collect();
        ready.sort_by(|&a, &b| self.ctx.tasks[a].cmp(&self.ctx.tasks[b]));
        for task in ready {
            let saved = self.partial.clone();
            if self.ctx.place_one(task, self.assignment[task], &mut self.partial) {
                for &s in &self.ctx.succs[task] {
                    self.indegree[s] -= 1;
                }
                self.placed += 1;
                self.run();
                self.placed -= 1;
                for &s in &self.ctx.succs[task] {
                    self.indegree[s] += 1;
                }
            }
            self.partial = saved;
        }
    }
}

/// Re-derive the energy figures for an arbitrary schedule (placements may
/// come from a JSON file, not this solver run).
pub fn predict_energy(
    schedule: &Schedule,
    graph: &AppGraph,
    platform: &Platform,
    contracts: &ContractStore,
    use_average: bool,
) -> Result<(f64, f64, f64), String> {
    let scaling = ScalingModel::cycle_scaling(platform);
    let mut dynamic = 0.0;
    let mut makespan = 0.0f64;
    for p in &schedule.placements {
        let node = graph
            .node(&p.task)
            .ok_or_else(|| format!("unknown task `{}` in schedule", p.task))?;
        let unit = platform
            .unit(&p.unit)
            .ok_or_else(|| format!("unknown unit `{}` in schedule", p.unit))?;
        let opp = unit
            .opp(&p.opp)
            .ok_or_else(|| format!("unit `{}` has no OPP `{}`", p.unit, p.opp))?;
        let figures = contracts
            .lookup(&node.contract_key, &p.version, &unit.unit_type, opp, &scaling)
            .ok_or_else(|| {
                format!(
                    "missing contract for {}/{}/{}/{}",
                    node.contract_key, p.version, unit.unit_type, opp.id
                )
            })?;
        let (_, energy) = pick_case(&figures, use_average);
        dynamic += energy;
        makespan = makespan.max(p.finish_ms);
    }
    let static_mj = platform::static_energy(platform, makespan);
    Ok((dynamic, static_mj, dynamic + static_mj))
}

/// Best starting point for the configured mode; shared by the CLI.
pub fn solve(ctx: &SchedContext, deadline_ms: f64) -> Result<Schedule, SchedError> {
    match ctx.config.mode {
        Mode::EnergyMin => schedule_energy(ctx, deadline_ms),
        Mode::MakespanMin => schedule_makespan(ctx, deadline_ms),
        Mode::Exhaustive => schedule_exhaustive(ctx, deadline_ms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::parse_contracts;
    use crate::ft::expand_ft;
    use crate::graph::build_graph;
    use crate::parser::parse_app;
    use crate::platform::parse_platform;

    fn chain_app() -> AppGraph {
        let src = "app Chain { period 20ms; deadline 20ms; type t;\n\
                   component A { out t o; version v1 on T; }\n\
                   component B { in t o; version v1 on T; }\n\
                   edge A.o -> B.o; }";
        build_graph(&parse_app(src, "chain.coord").unwrap()).unwrap()
    }

    fn chain_platform() -> Platform {
        parse_platform(
            "[unit]\nname = \"u0\"\ntype = \"T\"\nstatic_power_mw = 500\nopp = \"1000MHz@1.00V\"\n",
            "chain.platform",
        )
        .unwrap()
    }

    fn chain_contracts() -> ContractStore {
        parse_contracts(
            "[contract]\ncomponent = \"A\"\nversion = \"v1\"\nunit_type = \"T\"\nopp = \"1000MHz@1.00V\"\n\
             wcet_ms = 5\nacet_ms = 4\nwce_mj = 5\nace_mj = 4\n\
             [contract]\ncomponent = \"B\"\nversion = \"v1\"\nunit_type = \"T\"\nopp = \"1000MHz@1.00V\"\n\
             wcet_ms = 5\nacet_ms = 4\nwce_mj = 8\nace_mj = 6\n",
            "chain.contracts",
        )
        .unwrap()
    }

    fn vision_setup() -> (AppGraph, Platform, ContractStore) {
        let app = parse_app(include_str!("../../../fixtures/vision.coord"), "v.coord").unwrap();
        let graph = expand_ft(&build_graph(&app).unwrap()).unwrap();
        let platform = parse_platform(
            include_str!("../../../fixtures/odroid_like.platform"),
            "p.platform",
        )
        .unwrap();
        let contracts = parse_contracts(
            include_str!("../../../fixtures/vision.contracts"),
            "c.contracts",
        )
        .unwrap();
        (graph, platform, contracts)
    }

    #[test]
    fn chain_on_one_unit_serializes() {
        let graph = chain_app();
        let platform = chain_platform();
        let contracts = chain_contracts();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 20.0).unwrap();
        assert_eq!(s.placements.len(), 2);
        assert_eq!(s.placements[0].task, "A");
        assert_eq!(s.placements[0].start_ms, 0.0);
        assert_eq!(s.placements[0].finish_ms, 5.0);
        assert_eq!(s.placements[1].start_ms, 5.0);
        assert_eq!(s.predicted_makespan_ms, 10.0);
        // 5 + 8 dynamic, 0.5 W x 10 ms = 5 static
        assert_eq!(s.predicted_dynamic_mj, 13.0);
        assert_eq!(s.predicted_static_mj, 5.0);
        assert_eq!(s.predicted_total_mj, 18.0);
        assert!(s.feasible);
    }

    #[test]
    fn predict_energy_matches_solver() {
        let graph = chain_app();
        let platform = chain_platform();
        let contracts = chain_contracts();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 20.0).unwrap();
        let (dyn_mj, stat_mj, total_mj) =
            predict_energy(&s, &graph, &platform, &contracts, false).unwrap();
        assert_eq!((dyn_mj, stat_mj, total_mj), (13.0, 5.0, 18.0));
    }

    #[test]
    fn average_case_uses_acet_and_ace() {
        let graph = chain_app();
        let platform = chain_platform();
        let contracts = chain_contracts();
        let config = SchedulerConfig {
            use_average: true,
            ..SchedulerConfig::default()
        };
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 20.0).unwrap();
        assert_eq!(s.predicted_makespan_ms, 8.0);
        assert_eq!(s.predicted_dynamic_mj, 10.0);
        assert_eq!(s.predicted_static_mj, 4.0);
    }

    #[test]
    fn missing_deadline_is_reported_with_achieved_makespan() {
        let graph = chain_app();
        let platform = chain_platform();
        let contracts = chain_contracts();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let err = schedule_energy(&ctx, 8.0).unwrap_err();
        match err {
            SchedError::Infeasible {
                achieved_makespan_ms,
                ..
            } => assert_eq!(achieved_makespan_ms, Some(10.0)),
            other => panic!("expected Infeasible, got {other:?}"),
        }
        // makespan mode still reports the schedule, flagged infeasible
        let s = schedule_makespan(&ctx, 8.0).unwrap();
        assert!(!s.feasible);
        assert_eq!(s.predicted_makespan_ms, 10.0);
    }

    #[test]
    fn task_without_contracts_is_an_error() {
        let graph = chain_app();
        let platform = chain_platform();
        let contracts = ContractStore::default();
        let config = SchedulerConfig::default();
        let Err(err) = SchedContext::new(&graph, &platform, &contracts, &config) else {
            panic!("expected NoOptions");
        };
        assert!(matches!(err, SchedError::NoOptions { task } if task == "A"));
    }

    #[test]
    fn empty_app_schedules_trivially() {
        let graph = build_graph(
            &parse_app("app E { period 10ms; deadline 10ms; }", "e.coord").unwrap(),
        )
        .unwrap();
        let platform = chain_platform();
        let contracts = ContractStore::default();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        for f in [schedule_energy, schedule_makespan, schedule_exhaustive] {
            let s = f(&ctx, 10.0).unwrap();
            assert!(s.placements.is_empty());
            assert!(s.feasible);
            assert_eq!(s.predicted_total_mj, 0.0);
        }
    }

    #[test]
    fn vision_energy_schedule_is_feasible_and_valid() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 40.0).unwrap();
        assert!(s.feasible);
        assert_eq!(s.placements.len(), 8);
        // precedence holds in the emitted schedule
        let finish: std::collections::HashMap<&str, f64> = s
            .placements
            .iter()
            .map(|p| (p.task.as_str(), p.finish_ms))
            .collect();
        let start: std::collections::HashMap<&str, f64> = s
            .placements
            .iter()
            .map(|p| (p.task.as_str(), p.start_ms))
            .collect();
        for e in &graph.edges {
            assert!(
                finish[e.producer.component.as_str()]
                    <= start[e.consumer.component.as_str()] + TIME_EPS
            );
        }
    }

    #[test]
    fn energy_mode_never_beats_itself_with_makespan_mode_energy() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let e = schedule_energy(&ctx, 40.0).unwrap();
        let m = schedule_makespan(&ctx, 40.0).unwrap();
        assert!(e.predicted_total_mj <= m.predicted_total_mj + 1e-9);
    }

    #[test]
    fn ft_distinct_units_forces_different_units() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig {
            ft_distinct_units: true,
            ..SchedulerConfig::default()
        };
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 40.0).unwrap();
        let mut replica_units = Vec::new();
        for p in &s.placements {
            if p.task.starts_with("DecisionMaking__r") {
                replica_units.push(p.unit.clone());
            }
        }
        assert_eq!(replica_units.len(), 3);
        replica_units.sort();
        replica_units.dedup();
        assert_eq!(replica_units.len(), 3, "replicas must sit on distinct units");
    }

    #[test]
    fn exhaustive_prefers_cheaper_assignment() {
        // one task, two unit types: fast-expensive vs slow-cheap
        let graph = build_graph(
            &parse_app(
                "app S { period 100ms; deadline 100ms; type t;\n\
                 component A { out t o; version v1 on F, S; }\n}",
                "s.coord",
            )
            .unwrap(),
        )
        .unwrap();
        let platform = parse_platform(
            "[unit]\nname = \"f0\"\ntype = \"F\"\nstatic_power_mw = 0\nopp = \"2000MHz@1.20V\"\n\
             [unit]\nname = \"s0\"\ntype = \"S\"\nstatic_power_mw = 0\nopp = \"500MHz@0.80V\"\n",
            "s.platform",
        )
        .unwrap();
        let contracts = parse_contracts(
            "[contract]\ncomponent = \"A\"\nversion = \"v1\"\nunit_type = \"F\"\nopp = \"2000MHz@1.20V\"\n\
             wcet_ms = 2\nacet_ms = 2\nwce_mj = 9\nace_mj = 9\n\
             [contract]\ncomponent = \"A\"\nversion = \"v1\"\nunit_type = \"S\"\nopp = \"500MHz@0.80V\"\n\
             wcet_ms = 8\nacet_ms = 8\nwce_mj = 3\nace_mj = 3\n",
            "s.contracts",
        )
        .unwrap();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_exhaustive(&ctx, 100.0).unwrap();
        assert_eq!(s.placements[0].unit, "s0");
        assert_eq!(s.predicted_total_mj, 3.0);
        // under a tight deadline only the fast unit works
        let s = schedule_exhaustive(&ctx, 5.0).unwrap();
        assert_eq!(s.placements[0].unit, "f0");
        // and an impossible deadline reports the best achieved makespan
        let err = schedule_exhaustive(&ctx, 1.0).unwrap_err();
        assert!(matches!(
            err,
            SchedError::Infeasible {
                achieved_makespan_ms: Some(m),
                ..
            } if (m - 2.0).abs() < 1e-12
        ));
    }

    #[test]
    fn exhaustive_respects_the_task_cap() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig {
            exhaustive_cap: 4,
            ..SchedulerConfig::default()
        };
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        assert!(matches!(
            schedule_exhaustive(&ctx, 40.0),
            Err(SchedError::TooLarge { tasks: 8, cap: 4 })
        ));
    }

    #[test]
    fn schedule_json_round_trips() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let s = schedule_energy(&ctx, 40.0).unwrap();
        let back = Schedule::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn timeline_earliest_gap_fills_holes() {
        let mut tl = Timeline::default();
        tl.insert(0.0, 5.0);
        tl.insert(8.0, 12.0);
        assert_eq!(tl.earliest_gap(0.0, 3.0), 5.0);
        assert_eq!(tl.earliest_gap(0.0, 4.0), 12.0);
        assert_eq!(tl.earliest_gap(6.0, 1.0), 6.0);
        assert_eq!(tl.earliest_gap(20.0, 1.0), 20.0);
    }

    #[test]
    fn solver_output_is_deterministic() {
        let (graph, platform, contracts) = vision_setup();
        let config = SchedulerConfig::default();
        let ctx = SchedContext::new(&graph, &platform, &contracts, &config).unwrap();
        let a = schedule_energy(&ctx, 40.0).unwrap();
        let b = schedule_energy(&ctx, 40.0).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
