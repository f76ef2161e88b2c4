//! Typed streaming-network model: DAG construction and static validation.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::json;

use crate::ast::{AppDecl, Endpoint, FtAnnotation, Objective, PortDecl, PortDirection, VersionDecl};
use crate::diag::{Diagnostic, SourceSpan};

/// A component instance in the validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub name: String,
    /// Component name used for contract lookups. Differs from `name` for
    /// fault-tolerance replicas (which keep the original's contracts) and
    /// voters (reserved key `__voter`).
    pub contract_key: String,
    pub ports: Vec<PortDecl>,
    pub versions: Vec<VersionDecl>,
    pub ft: Option<FtAnnotation>,
    /// For fault-tolerance replicas, the name of the node they replicate.
    pub replica_group: Option<String>,
}

impl GraphNode {
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

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphEdge {
    pub producer: Endpoint,
    pub consumer: Endpoint,
    pub data_type: String,
}

#[derive(Debug, Clone)]
pub struct AppGraph {
    pub app_name: String,
    pub period_ms: f64,
    pub deadline_ms: f64,
    pub objective: Objective,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    /// Node names in a deterministic topological order.
    pub topo_order: Vec<String>,
    /// Non-fatal findings from validation (e.g. unconnected output ports).
    pub warnings: Vec<Diagnostic>,
}

impl PartialEq for AppGraph {
    /// Structural equality: warnings and cached order are not part of the
    /// graph's identity.
    fn eq(&self, other: &Self) -> bool {
        self.app_name == other.app_name
            && self.period_ms == other.period_ms
            && self.deadline_ms == other.deadline_ms
            && self.objective == other.objective
            && self.nodes == other.nodes
            && edge_set(&self.edges) == edge_set(&other.edges)
    }
}

fn edge_set(edges: &[GraphEdge]) -> HashSet<&GraphEdge> {
    edges.iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Source,
    Sink,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeKind {
    pub kind: Kind,
    pub stateless: bool,
}

impl AppGraph {
    pub fn node(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn consumers_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a GraphEdge> + 'a {
        self.edges.iter().filter(move |e| e.producer.component == node)
    }

    pub fn producers_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a GraphEdge> + 'a {
        self.edges.iter().filter(move |e| e.consumer.component == node)
    }

    /// Node/edge/wave structure as a JSON document with stable key order.
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "name": n.name,
                    "contract_key": n.contract_key,
                    "ports": n.ports.iter().map(|p| json!({
                        "direction": p.direction.keyword(),
                        "type": p.data_type,
                        "name": p.name,
                    })).collect::<Vec<_>>(),
                    "versions": n.versions.iter().map(|v| json!({
                        "name": v.name,
                        "unit_types": v.compatible_unit_types,
                    })).collect::<Vec<_>>(),
                    "ft_replicas": n.ft.as_ref().map(|f| f.replicas),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                json!({
                    "from": format!("{}.{}", e.producer.component, e.producer.port),
                    "to": format!("{}.{}", e.consumer.component, e.consumer.port),
                    "type": e.data_type,
                })
            })
            .collect();
        json!({
            "app": self.app_name,
            "period_ms": self.period_ms,
            "deadline_ms": self.deadline_ms,
            "objective": self.objective.keyword(),
            "nodes": nodes,
            "edges": edges,
            "waves": activation_sets(self),
        })
    }
}

/// Build and validate the streaming network from a parsed declaration.
/// Every violated rule yields its own diagnostic; there is no early abort.
pub fn build_graph(decl: &AppDecl) -> Result<AppGraph, Vec<Diagnostic>> {
    let nodes: Vec<GraphNode> = decl
        .components
        .iter()
        .map(|c| GraphNode {
            name: c.name.clone(),
            contract_key: c.name.clone(),
            ports: c.ports.clone(),
            versions: c.versions.clone(),
            ft: c.ft.clone(),
            replica_group: None,
        })
        .collect();
    let edges: Vec<(Endpoint, Endpoint, SourceSpan)> = decl
        .edges
        .iter()
        .map(|e| (e.producer.clone(), e.consumer.clone(), e.span.clone()))
        .collect();
    assemble(
        decl.name.clone(),
        decl.period_ms,
        decl.deadline_ms,
        decl.objective,
        nodes,
        edges,
    )
}

/// Shared validation core, also used to re-validate rewritten graphs.
pub(crate) fn assemble(
    app_name: String,
    period_ms: f64,
    deadline_ms: f64,
    objective: Objective,
    nodes: Vec<GraphNode>,
    edges: Vec<(Endpoint, Endpoint, SourceSpan)>,
) -> Result<AppGraph, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut warnings = Vec::new();
    let mut by_name: HashMap<&str, &GraphNode> = HashMap::new();
    for n in &nodes {
        if by_name.insert(n.name.as_str(), n).is_some() {
            diags.push(Diagnostic::error(
                SourceSpan::file_start(""),
                format!("duplicate node `{}`", n.name),
            ));
        }
    }

    let mut typed_edges = Vec::new();
    for (producer, consumer, span) in &edges {
        let p_node = by_name.get(producer.component.as_str());
        let c_node = by_name.get(consumer.component.as_str());
        let p_port = p_node.and_then(|n| n.port(&producer.port));
        let c_port = c_node.and_then(|n| n.port(&consumer.port));
        match (p_node, c_node) {
            (None, _) => {
                diags.push(Diagnostic::error(
                    span.clone(),
                    format!("unknown component {}", producer.component),
                ));
                continue;
            }
            (_, None) => {
                diags.push(Diagnostic::error(
                    span.clone(),
                    format!("unknown component {}", consumer.component),
                ));
                continue;
            }
            _ => {}
        }
        let (Some(p_port), Some(c_port)) = (p_port, c_port) else {
            diags.push(Diagnostic::error(
                span.clone(),
                format!(
                    "edge references an undeclared port ({}.{} -> {}.{})",
                    producer.component, producer.port, consumer.component, consumer.port
                ),
            ));
            continue;
        };
        if p_port.direction != PortDirection::Output {
            diags.push(Diagnostic::error(
                span.clone(),
                format!(
                    "edge producer {}.{} is not an output port",
                    producer.component, producer.port
                ),
            ));
            continue;
        }
        if c_port.direction != PortDirection::Input {
            diags.push(Diagnostic::error(
                span.clone(),
                format!(
                    "edge consumer {}.{} is not an input port",
                    consumer.component, consumer.port
                ),
            ));
            continue;
        }
        if p_port.data_type != c_port.data_type {
            diags.push(Diagnostic::error(
                span.clone(),
                format!(
                    "port type mismatch on edge {}.{} ({}) -> {}.{} ({})",
                    producer.component,
                    producer.port,
                    p_port.data_type,
                    consumer.component,
                    consumer.port,
                    c_port.data_type
                ),
            ));
            continue;
        }
        typed_edges.push(GraphEdge {
            producer: producer.clone(),
            consumer: consumer.clone(),
            data_type: p_port.data_type.clone(),
        });
    }

    // exactly one producer per input port
    let mut producers_per_input: BTreeMap<(String, String), usize> = BTreeMap::new();
    for e in &typed_edges {
        *producers_per_input
            .entry((e.consumer.component.clone(), e.consumer.port.clone()))
            .or_insert(0) += 1;
    }
    for ((comp, port), count) in &producers_per_input {
        if *count > 1 {
            diags.push(Diagnostic::error(
                SourceSpan::file_start(""),
                format!("input port {comp}.{port} has {count} producers (exactly one allowed)"),
            ));
        }
    }
    for n in &nodes {
        for p in n.input_ports() {
            if !producers_per_input.contains_key(&(n.name.clone(), p.name.clone())) {
                diags.push(Diagnostic::error(
                    p.span.clone(),
                    format!("input port {}.{} is unconnected", n.name, p.name),
                ));
            }
        }
        let connected_outputs: HashSet<&str> = typed_edges
            .iter()
            .filter(|e| e.producer.component == n.name)
            .map(|e| e.producer.port.as_str())
            .collect();
        for p in n.output_ports() {
            if !connected_outputs.contains(p.name.as_str()) {
                warnings.push(Diagnostic::warning(
                    p.span.clone(),
                    format!("output port {}.{} has no consumer", n.name, p.name),
                ));
            }
        }
    }

    let topo_order = match topo_sort(&nodes, &typed_edges) {
        Ok(order) => order,
        Err(cycle) => {
            diags.push(Diagnostic::error(
                SourceSpan::file_start(""),
                format!("cycle: {}", cycle.join(" -> ")),
            ));
            Vec::new()
        }
    };

    if diags.is_empty() {
        Ok(AppGraph {
            app_name,
            period_ms,
            deadline_ms,
            objective,
            nodes,
            edges: typed_edges,
            topo_order,
            warnings,
        })
    } else {
        Err(diags)
    }
}

/// Kahn's algorithm with name-ordered tie-breaking; on a cycle, returns one
/// full cycle path (first node repeated at the end).
fn topo_sort(nodes: &[GraphNode], edges: &[GraphEdge]) -> Result<Vec<String>, Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> =
        nodes.iter().map(|n| (n.name.as_str(), 0)).collect();
    let mut succs: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges {
        if e.producer.component == e.consumer.component {
            return Err(vec![
                e.producer.component.clone(),
                e.consumer.component.clone(),
            ]);
        }
        *indegree.get_mut(e.consumer.component.as_str()).unwrap() += 1;
        succs
            .entry(e.producer.component.as_str())
            .or_default()
            .push(e.consumer.component.as_str());
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    ready.sort();
    let mut order = Vec::new();
    while let Some(&name) = ready.first() {
        ready.remove(0);
        order.push(name.to_string());
        if let Some(ss) = succs.get(name) {
            for s in ss {
                let d = indegree.get_mut(s).unwrap();
                *d -= 1;
                if *d == 0 {
                    let idx = ready.partition_point(|r| *r < *s);
                    ready.insert(idx, s);
                }
            }
        }
    }
    if order.len() == nodes.len() {
        return Ok(order);
    }
    // find a concrete cycle among the leftover nodes; first trim leftovers
    // that merely sit downstream of a cycle
    let mut leftover: HashSet<&str> = nodes
        .iter()
        .map(|n| n.name.as_str())
        .filter(|n| !order.contains(&n.to_string()))
        .collect();
    loop {
        let dead: Vec<&str> = leftover
            .iter()
            .copied()
            .filter(|n| {
                !succs
                    .get(n)
                    .into_iter()
                    .flatten()
                    .any(|s| leftover.contains(s))
            })
            .collect();
        if dead.is_empty() {
            break;
        }
        for d in dead {
            leftover.remove(d);
        }
    }
    let start = *leftover.iter().min().unwrap();
    let mut path = vec![start];
    let mut seen: HashMap<&str, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = succs
            .get(cur)
            .into_iter()
            .flatten()
            .copied()
            .filter(|s| leftover.contains(s))
            .min()
            .expect("leftover node in a cycle has a leftover successor");
        if let Some(&i) = seen.get(next) {
            let mut cycle: Vec<String> = path[i..].iter().map(|s| s.to_string()).collect();
            cycle.push(next.to_string());
            return Err(cycle);
        }
        seen.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

/// Classify a node by its port signature.
pub fn classify_node(graph: &AppGraph, node: &str) -> Option<NodeKind> {
    let n = graph.node(node)?;
    let has_inputs = n.input_ports().next().is_some();
    let has_outputs = n.output_ports().next().is_some();
    let kind = if !has_inputs {
        Kind::Source
    } else if !has_outputs {
        Kind::Sink
    } else {
        Kind::Interior
    };
    Some(NodeKind {
        kind,
        stateless: n.state_ports_empty(),
    })
}

impl GraphNode {
    fn state_ports_empty(&self) -> bool {
        !self.ports.iter().any(|p| p.direction == PortDirection::State)
    }
}

/// Partition nodes into activation waves: wave 0 holds the sources, wave k
/// the nodes whose producers all sit in earlier waves. Names within a wave
/// are sorted.
pub fn activation_sets(graph: &AppGraph) -> Vec<Vec<String>> {
    let mut wave_of: HashMap<&str, usize> = HashMap::new();
    let mut waves: Vec<Vec<String>> = Vec::new();
    for name in &graph.topo_order {
        let wave = graph
            .producers_of(name)
            .map(|e| wave_of[e.producer.component.as_str()] + 1)
            .max()
            .unwrap_or(0);
        wave_of.insert(name, wave);
        if waves.len() <= wave {
            waves.resize(wave + 1, Vec::new());
        }
        waves[wave].push(name.clone());
    }
    for w in &mut waves {
        w.sort();
    }
    waves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_app;

    fn vision() -> AppGraph {
        let src = include_str!("../../../fixtures/vision.coord");
        build_graph(&parse_app(src, "vision.coord").unwrap()).unwrap()
    }

    fn graph_from(src: &str) -> Result<AppGraph, Vec<Diagnostic>> {
        build_graph(&parse_app(src, "test.coord").expect("test source parses"))
    }

    #[test]
    fn vision_topology() {
        let g = vision();
        assert_eq!(g.topo_order.len(), 5);
        assert_eq!(g.topo_order[0], "ImageCapture");
        assert_eq!(g.topo_order[4], "DecisionRec");
        let mid: Vec<&str> = g.topo_order[1..3].iter().map(|s| s.as_str()).collect();
        assert!(mid.contains(&"ObjectDetection") && mid.contains(&"OpticalFlow"));
    }

    #[test]
    fn vision_classification() {
        let g = vision();
        let ic = classify_node(&g, "ImageCapture").unwrap();
        assert_eq!(ic.kind, Kind::Source);
        assert!(ic.stateless);
        assert_eq!(classify_node(&g, "DecisionRec").unwrap().kind, Kind::Sink);
        assert_eq!(classify_node(&g, "OpticalFlow").unwrap().kind, Kind::Interior);
        assert!(classify_node(&g, "NoSuch").is_none());
    }

    #[test]
    fn vision_waves() {
        let g = vision();
        assert_eq!(
            activation_sets(&g),
            vec![
                vec!["ImageCapture".to_string()],
                vec!["ObjectDetection".to_string(), "OpticalFlow".to_string()],
                vec!["DecisionMaking".to_string()],
                vec!["DecisionRec".to_string()],
            ]
        );
    }

    #[test]
    fn empty_graph_has_no_waves() {
        let g = graph_from("app A { period 10ms; deadline 10ms; }").unwrap();
        assert!(activation_sets(&g).is_empty());
    }

    #[test]
    fn chain_waves() {
        let g = graph_from(
            "app A { period 10ms; deadline 10ms; type t;\n\
             component A1 { out t p; version v on u; }\n\
             component B1 { in t p; out t q; version v on u; }\n\
             component C1 { in t q; version v on u; }\n\
             edge A1.p -> B1.p; edge B1.q -> C1.q; }",
        )
        .unwrap();
        assert_eq!(
            activation_sets(&g),
            vec![vec!["A1".to_string()], vec!["B1".to_string()], vec!["C1".to_string()]]
        );
    }

    #[test]
    fn two_node_cycle_is_reported_with_path() {
        let diags = graph_from(
            "app A { period 10ms; deadline 10ms; type t;\n\
             component A1 { in t i; out t o; version v on u; }\n\
             component B1 { in t i; out t o; version v on u; }\n\
             edge A1.o -> B1.i; edge B1.o -> A1.i; }",
        )
        .unwrap_err();
        let cycle = diags.iter().find(|d| d.message.starts_with("cycle:")).unwrap();
        assert_eq!(cycle.message, "cycle: A1 -> B1 -> A1");
    }

    #[test]
    fn type_mismatch_is_reported() {
        let diags = graph_from(
            "app A { period 10ms; deadline 10ms; type t; type u1;\n\
             component A1 { out t o; version v on u; }\n\
             component B1 { in u1 i; version v on u; }\n\
             edge A1.o -> B1.i; }",
        )
        .unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("type mismatch")), "{diags:?}");
    }

    #[test]
    fn double_producer_is_reported() {
        let diags = graph_from(
            "app A { period 10ms; deadline 10ms; type t;\n\
             component A1 { out t o; version v on u; }\n\
             component A2 { out t o; version v on u; }\n\
             component B1 { in t i; version v on u; }\n\
             edge A1.o -> B1.i; edge A2.o -> B1.i; }",
        )
        .unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("2 producers")), "{diags:?}");
    }

    #[test]
    fn unconnected_input_is_an_error_unconnected_output_a_warning() {
        let diags = graph_from(
            "app A { period 10ms; deadline 10ms; type t;\n\
             component B1 { in t i; version v on u; }\n}",
        )
        .unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("unconnected")));

        let g = graph_from(
            "app A { period 10ms; deadline 10ms; type t;\n\
             component A1 { out t o; version v on u; }\n}",
        )
        .unwrap();
        assert_eq!(g.warnings.len(), 1);
        assert!(g.warnings[0].message.contains("no consumer"));
    }

    #[test]
    fn all_violations_reported_without_early_abort() {
        // type mismatch and a dangling input in one pass
        let diags = graph_from(
            "app A { period 10ms; deadline 10ms; type t; type u1;\n\
             component A1 { out t o; version v on u; }\n\
             component B1 { in u1 i; in u1 j; version v on u; }\n\
             edge A1.o -> B1.i; }",
        )
        .unwrap_err();
        assert!(diags.len() >= 2, "{diags:?}");
    }

    #[test]
    fn json_dump_is_stable() {
        let g = vision();
        let a = serde_json::to_string(&g.to_json()).unwrap();
        let b = serde_json::to_string(&g.to_json()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"waves\""));
    }
}
