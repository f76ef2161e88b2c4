//! Seeded synthetic instance generator for tests and benchmarks.
//!
//! Instances are produced by emitting coordination-language, platform and
//! contract *text* and running it through the regular frontends, so every
//! generated instance also exercises the parsers. The same seed always
//! yields the same instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contracts::{parse_contracts, ContractStore};
use crate::graph::{build_graph, AppGraph};
use crate::parser::parse_app;
use crate::platform::{parse_platform, Platform};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_tasks: usize,
    pub max_units: usize,
    pub max_opps_per_unit: usize,
    /// Chance in [0, 1] that a later task consumes from an earlier one.
    pub edge_density: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_tasks: 5,
            max_units: 3,
            max_opps_per_unit: 2,
            edge_density: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub graph: AppGraph,
    pub platform: Platform,
    pub contracts: ContractStore,
    pub deadline_ms: f64,
    pub coord_text: String,
    pub platform_text: String,
    pub contracts_text: String,
}

/// Deterministically generate one instance from a seed.
pub fn instance(seed: u64, config: &SynthConfig) -> SynthInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // --- platform ---
    let n_units = rng.gen_range(1..=config.max_units);
    // unit types partition the units; at least one unit per used type
    let n_types = rng.gen_range(1..=n_units);
    let mut unit_types: Vec<usize> = (0..n_types).collect();
    for _ in n_types..n_units {
        unit_types.push(rng.gen_range(0..n_types));
    }
    let mut platform_text = String::from("[platform]\nname = \"synth\"\n");
    let mut opps_of_type: Vec<Vec<String>> = vec![Vec::new(); n_types];
    for ty in 0..n_types {
        let n_opps = rng.gen_range(1..=config.max_opps_per_unit);
        let mut freqs: Vec<u32> = Vec::new();
        while freqs.len() < n_opps {
            let f = rng.gen_range(2..=20) * 100;
            if !freqs.contains(&f) {
                freqs.push(f);
            }
        }
        freqs.sort();
        for (i, f) in freqs.iter().enumerate() {
            let v = 0.7 + 0.1 * i as f64 + 0.05 * (f % 300) as f64 / 300.0;
            opps_of_type[ty].push(format!("{f}MHz@{v:.2}V"));
        }
    }
    for (u, &ty) in unit_types.iter().enumerate() {
        platform_text.push_str(&format!(
            "\n[unit]\nname = \"u{u}\"\ntype = \"ty{ty}\"\nstatic_power_mw = {}\n",
            rng.gen_range(0..=500)
        ));
        for opp in &opps_of_type[ty] {
            platform_text.push_str(&format!("opp = \"{opp}\"\n"));
        }
    }

    // --- application: layered random DAG ---
    let n_tasks = rng.gen_range(1..=config.max_tasks);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for consumer in 1..n_tasks {
        for producer in 0..consumer {
            if rng.gen_bool(config.edge_density) {
                edges.push((producer, consumer));
            }
        }
    }
    let task_types: Vec<Vec<usize>> = (0..n_tasks)
        .map(|_| {
            let mut compat: Vec<usize> = (0..n_types).filter(|_| rng.gen_bool(0.6)).collect();
            if compat.is_empty() {
                compat.push(rng.gen_range(0..n_types));
            }
            compat
        })
        .collect();

    let deadline_ms = rng.gen_range(20.0..200.0_f64).round();
    let mut coord_text = format!(
        "app Synth {{ period {deadline_ms}ms; deadline {deadline_ms}ms; objective minimize_energy;\n  type tok;\n"
    );
    for t in 0..n_tasks {
        let ins: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.1 == t)
            .map(|(i, _)| i)
            .collect();
        let outs: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.0 == t)
            .map(|(i, _)| i)
            .collect();
        let mut ports = String::new();
        for i in ins {
            ports.push_str(&format!("in tok i{i}; "));
        }
        for o in outs {
            ports.push_str(&format!("out tok o{o}; "));
        }
        let compat = task_types[t]
            .iter()
            .map(|ty| format!("ty{ty}"))
            .collect::<Vec<_>>()
            .join(", ");
        coord_text.push_str(&format!(
            "  component T{t:02} {{ {ports}version v1 on {compat}; }}\n"
        ));
    }
    for (i, (p, c)) in edges.iter().enumerate() {
        coord_text.push_str(&format!("  edge T{p:02}.o{i} -> T{c:02}.i{i};\n"));
    }
    coord_text.push_str("}\n");

    // --- contracts: full coverage, random positive figures ---
    let mut contracts_text = String::new();
    for t in 0..n_tasks {
        for &ty in &task_types[t] {
            for opp in &opps_of_type[ty] {
                let wcet = rng.gen_range(1.0..10.0_f64);
                let wce = rng.gen_range(1.0..20.0_f64);
                contracts_text.push_str(&format!(
                    "[contract]\ncomponent = \"T{t:02}\"\nversion = \"v1\"\nunit_type = \"ty{ty}\"\n\
                     opp = \"{opp}\"\nwcet_ms = {wcet:.3}\nacet_ms = {:.3}\nwce_mj = {wce:.3}\nace_mj = {:.3}\n\n",
                    wcet * 0.8,
                    wce * 0.8,
                ));
            }
        }
    }

    let app = parse_app(&coord_text, "synth.coord").expect("generated app parses");
    let graph = build_graph(&app).expect("generated app forms a DAG");
    let platform = parse_platform(&platform_text, "synth.platform").expect("generated platform parses");
    let contracts = parse_contracts(&contracts_text, "synth.contracts").expect("generated contracts parse");
    SynthInstance {
        graph,
        platform,
        contracts,
        deadline_ms,
        coord_text,
        platform_text,
        contracts_text,
    }
}
