//! N-modular redundancy pass: rewrites each ft-annotated node into N
//! replicas feeding a voter, then re-validates the whole graph.

use crate::ast::{Endpoint, PortDecl, PortDirection, VersionDecl};
use crate::diag::{Diagnostic, SourceSpan};
use crate::graph::{self, AppGraph, GraphEdge, GraphNode};

/// Reserved contract-store component name for voter nodes.
pub const VOTER_CONTRACT_KEY: &str = "__voter";

pub fn replica_name(base: &str, index: u32) -> String {
    format!("{base}__r{index}")
}

pub fn voter_name(base: &str) -> String {
    format!("{base}__voter")
}

/// Expand every ft-annotated node. Graphs without annotations are returned
/// structurally unchanged.
pub fn expand_ft(input: &AppGraph) -> Result<AppGraph, Vec<Diagnostic>> {
    if input.nodes.iter().all(|n| n.ft.is_none()) {
        return Ok(input.clone());
    }

    let mut diags = Vec::new();
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut edges: Vec<GraphEdge> = input.edges.clone();

    for node in &input.nodes {
        let Some(ft) = &node.ft else {
            nodes.push(node.clone());
            continue;
        };
        let outputs: Vec<&PortDecl> = node.output_ports().collect();
        if outputs.len() != 1 {
            diags.push(Diagnostic::error(
                ft.span.clone(),
                format!(
                    "ft component `{}` must have exactly one output port (found {})",
                    node.name,
                    outputs.len()
                ),
            ));
            nodes.push(node.clone());
            continue;
        }
        let out_port = outputs[0];
        let replicas = ft.replicas;

        // replicas keep the original's ports, versions and contracts
        for i in 1..=replicas {
            nodes.push(GraphNode {
                name: replica_name(&node.name, i),
                contract_key: node.contract_key.clone(),
                ports: node.ports.clone(),
                versions: node.versions.clone(),
                ft: None,
                replica_group: Some(node.name.clone()),
            });
        }

        let voter = voter_node(node, out_port, replicas);
        let voter_id = voter.name.clone();
        nodes.push(voter);

        let mut rewired = Vec::new();
        for e in edges.drain(..) {
            if e.consumer.component == node.name {
                for i in 1..=replicas {
                    rewired.push(GraphEdge {
                        producer: e.producer.clone(),
                        consumer: Endpoint {
                            component: replica_name(&node.name, i),
                            port: e.consumer.port.clone(),
                        },
                        data_type: e.data_type.clone(),
                    });
                }
            } else if e.producer.component == node.name {
                rewired.push(GraphEdge {
                    producer: Endpoint {
                        component: voter_id.clone(),
                        port: e.producer.port.clone(),
                    },
                    consumer: e.consumer,
                    data_type: e.data_type,
                });
            } else {
                rewired.push(e);
            }
        }
        for i in 1..=replicas {
            rewired.push(GraphEdge {
                producer: Endpoint {
                    component: replica_name(&node.name, i),
                    port: out_port.name.clone(),
                },
                consumer: Endpoint {
                    component: voter_id.clone(),
                    port: format!("in{i}"),
                },
                data_type: out_port.data_type.clone(),
            });
        }
        edges = rewired;
    }

    if !diags.is_empty() {
        return Err(diags);
    }

    let edge_triples = edges
        .into_iter()
        .map(|e| {
            (
                e.producer,
                e.consumer,
                SourceSpan::file_start(""),
            )
        })
        .collect();
    graph::assemble(
        input.app_name.clone(),
        input.period_ms,
        input.deadline_ms,
        input.objective,
        nodes,
        edge_triples,
    )
}

fn voter_node(original: &GraphNode, out_port: &PortDecl, replicas: u32) -> GraphNode {
    let mut ports: Vec<PortDecl> = (1..=replicas)
        .map(|i| PortDecl {
            direction: PortDirection::Input,
            data_type: out_port.data_type.clone(),
            name: format!("in{i}"),
            span: out_port.span.clone(),
        })
        .collect();
    ports.push(PortDecl {
        direction: PortDirection::Output,
        data_type: out_port.data_type.clone(),
        name: out_port.name.clone(),
        span: out_port.span.clone(),
    });
    // the voter may run wherever any version of the original could
    let mut unit_types: Vec<String> = original
        .versions
        .iter()
        .flat_map(|v| v.compatible_unit_types.iter().cloned())
        .collect();
    unit_types.sort();
    unit_types.dedup();
    GraphNode {
        name: voter_name(&original.name),
        contract_key: VOTER_CONTRACT_KEY.to_string(),
        ports,
        versions: vec![VersionDecl {
            name: "v1".to_string(),
            compatible_unit_types: unit_types,
            span: out_port.span.clone(),
        }],
        ft: None,
        replica_group: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::parser::parse_app;

    fn vision() -> AppGraph {
        let src = include_str!("../../../fixtures/vision.coord");
        build_graph(&parse_app(src, "vision.coord").unwrap()).unwrap()
    }

    #[test]
    fn vision_expansion_counts() {
        let expanded = expand_ft(&vision()).unwrap();
        // 5 nodes - DecisionMaking + 3 replicas + 1 voter = 8
        assert_eq!(expanded.nodes.len(), 8);
        // 2 capture fan-out + 2 inputs x 3 replicas + 3 replica->voter + voter->rec = 12
        assert_eq!(expanded.edges.len(), 12);
        assert_eq!(expanded.topo_order.len(), 8);
        for i in 1..=3 {
            let name = replica_name("DecisionMaking", i);
            let r = expanded.node(&name).unwrap();
            assert_eq!(r.contract_key, "DecisionMaking");
            assert_eq!(r.replica_group.as_deref(), Some("DecisionMaking"));
        }
        let voter = expanded.node("DecisionMaking__voter").unwrap();
        assert_eq!(voter.contract_key, VOTER_CONTRACT_KEY);
        assert_eq!(voter.versions.len(), 1);
        assert_eq!(voter.versions[0].compatible_unit_types, vec!["LITTLE", "big"]);
        assert!(expanded.node("DecisionMaking").is_none());
    }

    #[test]
    fn replicas_share_the_original_inputs() {
        let expanded = expand_ft(&vision()).unwrap();
        for i in 1..=3 {
            let name = replica_name("DecisionMaking", i);
            let producers: Vec<&str> = expanded
                .edges
                .iter()
                .filter(|e| e.consumer.component == name)
                .map(|e| e.producer.component.as_str())
                .collect();
            assert_eq!(producers.len(), 2);
            assert!(producers.contains(&"ObjectDetection"));
            assert!(producers.contains(&"OpticalFlow"));
        }
    }

    #[test]
    fn ft_free_graph_is_unchanged() {
        let src = include_str!("../../../fixtures/wifi_forkjoin.coord");
        let g = build_graph(&parse_app(src, "w.coord").unwrap()).unwrap();
        let expanded = expand_ft(&g).unwrap();
        assert_eq!(g, expanded);
    }

    #[test]
    fn double_redundancy_on_a_source() {
        let src = "app A { period 10ms; deadline 10ms; type t;\n\
                   component S { out t o; version v1 on LITTLE; ft { replicas 2; } }\n\
                   component K { in t i; version v1 on LITTLE; }\n\
                   edge S.o -> K.i; }";
        let g = build_graph(&parse_app(src, "a.coord").unwrap()).unwrap();
        let expanded = expand_ft(&g).unwrap();
        assert_eq!(expanded.nodes.len(), 4); // 2 replicas + voter + K
        assert_eq!(expanded.edges.len(), 3); // r1->voter, r2->voter, voter->K
        assert_eq!(expanded.topo_order.last().unwrap(), "K");
    }

    #[test]
    fn ft_node_needs_exactly_one_output() {
        let src = "app A { period 10ms; deadline 10ms; type t;\n\
                   component S { out t o1; out t o2; version v1 on LITTLE; ft { replicas 2; } }\n\
                   component K { in t i; in t j; version v1 on LITTLE; }\n\
                   edge S.o1 -> K.i; edge S.o2 -> K.j; }";
        let g = build_graph(&parse_app(src, "a.coord").unwrap()).unwrap();
        let diags = expand_ft(&g).unwrap_err();
        assert!(diags[0].message.contains("exactly one output port"));
    }
}
