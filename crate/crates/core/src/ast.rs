//! Declaration tree produced by the frontend.
//!
//! Structural equality (`PartialEq`) deliberately ignores source spans so
//! that a pretty-printed and re-parsed tree compares equal to the original.

use std::fmt::Write as _;

use crate::diag::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDirection {
    Input,
    Output,
    State,
}

impl PortDirection {
    pub fn keyword(self) -> &'static str {
        match self {
            PortDirection::Input => "in",
            PortDirection::Output => "out",
            PortDirection::State => "state",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PortDecl {
    pub direction: PortDirection,
    pub data_type: String,
    pub name: String,
    pub span: SourceSpan,
}

impl PartialEq for PortDecl {
    fn eq(&self, other: &Self) -> bool {
        self.direction == other.direction
            && self.data_type == other.data_type
            && self.name == other.name
    }
}

#[derive(Debug, Clone)]
pub struct VersionDecl {
    pub name: String,
    /// Unit-type names this implementation can run on; never empty.
    pub compatible_unit_types: Vec<String>,
    pub span: SourceSpan,
}

impl PartialEq for VersionDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.compatible_unit_types == other.compatible_unit_types
    }
}

#[derive(Debug, Clone)]
pub struct FtAnnotation {
    pub replicas: u32,
    pub span: SourceSpan,
}

impl PartialEq for FtAnnotation {
    fn eq(&self, other: &Self) -> bool {
        self.replicas == other.replicas
    }
}

/// Replica counts accepted by the `ft` block. 2 means duplex-compare,
/// odd counts give a voting majority.
pub const ALLOWED_REPLICAS: [u32; 4] = [2, 3, 5, 7];

#[derive(Debug, Clone)]
pub struct ComponentDecl {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub versions: Vec<VersionDecl>,
    pub ft: Option<FtAnnotation>,
    pub span: SourceSpan,
}

impl PartialEq for ComponentDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.ports == other.ports
            && self.versions == other.versions
            && self.ft == other.ft
    }
}

impl ComponentDecl {
    pub fn input_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports
            .iter()
            .filter(|p| p.direction == PortDirection::Input)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports
            .iter()
            .filter(|p| p.direction == PortDirection::Output)
    }

    pub fn state_ports(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports
            .iter()
            .filter(|p| p.direction == PortDirection::State)
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }
}

/// One endpoint of an edge: component instance plus port.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub component: String,
    pub port: String,
}

#[derive(Debug, Clone)]
pub struct EdgeDecl {
    pub producer: Endpoint,
    pub consumer: Endpoint,
    pub span: SourceSpan,
}

impl PartialEq for EdgeDecl {
    fn eq(&self, other: &Self) -> bool {
        self.producer == other.producer && self.consumer == other.consumer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinimizeEnergy,
    MinimizeMakespan,
}

impl Objective {
    pub fn keyword(self) -> &'static str {
        match self {
            Objective::MinimizeEnergy => "minimize_energy",
            Objective::MinimizeMakespan => "minimize_makespan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppDecl {
    pub name: String,
    pub period_ms: f64,
    pub deadline_ms: f64,
    pub objective: Objective,
    pub type_names: Vec<String>,
    pub components: Vec<ComponentDecl>,
    pub edges: Vec<EdgeDecl>,
}

impl AppDecl {
    pub fn component(&self, name: &str) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Canonical source form; re-parsing the result yields a structurally
    /// equal tree.
    pub fn pretty_print(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "app {} {{", self.name);
        let _ = writeln!(
            s,
            "  period {}ms; deadline {}ms; objective {};",
            fmt_ms(self.period_ms),
            fmt_ms(self.deadline_ms),
            self.objective.keyword()
        );
        for t in &self.type_names {
            let _ = writeln!(s, "  type {t};");
        }
        for c in &self.components {
            let _ = write!(s, "  component {} {{", c.name);
            for p in &c.ports {
                let _ = write!(s, " {} {} {};", p.direction.keyword(), p.data_type, p.name);
            }
            for v in &c.versions {
                let _ = write!(
                    s,
                    " version {} on {};",
                    v.name,
                    v.compatible_unit_types.join(", ")
                );
            }
            if let Some(ft) = &c.ft {
                let _ = write!(s, " ft {{ replicas {}; }}", ft.replicas);
            }
            let _ = writeln!(s, " }}");
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  edge {}.{} -> {}.{};",
                e.producer.component, e.producer.port, e.consumer.component, e.consumer.port
            );
        }
        s.push_str("}\n");
        s
    }
}

fn fmt_ms(v: f64) -> String {
    if v == v.trunc() {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
