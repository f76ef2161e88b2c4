//! Compiles a coordination-language description of a component-based
//! application into an energy-optimal, deadline-feasible schedule on a
//! heterogeneous multi-core platform, and verifies the schedule by
//! discrete-event simulation.
//!
//! Pipeline: parse (`parser`) → validate the streaming network (`graph`) →
//! optional N-modular-redundancy expansion (`ft`) → solve the space/time
//! mapping (`scheduler`) against a platform (`platform`) and a
//! non-functional contract store (`contracts`) → replay and re-account
//! (`simulator`).

pub mod ast;
pub mod contracts;
pub mod diag;
pub mod ft;
pub mod graph;
pub mod manifest;
pub mod parser;
pub mod platform;
mod records;
pub mod scheduler;
pub mod simulator;
pub mod synth;

pub use ast::{AppDecl, Objective};
pub use diag::{render_diagnostics, Diagnostic, Severity, SourceSpan};
pub use graph::{activation_sets, build_graph, classify_node, AppGraph};
pub use parser::parse_app;
pub use scheduler::{Mode, Schedule, SchedulerConfig};
pub use simulator::{gantt, simulate, SimReport};
