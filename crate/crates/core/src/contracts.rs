//! Non-functional contract store: the (component, version, unit type,
//! operating point) matrix of time and energy figures.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::diag::{Diagnostic, SourceSpan};
use crate::ft::VOTER_CONTRACT_KEY;
use crate::graph::AppGraph;
use crate::platform::{self, Platform, ScalingModel};
use crate::records;

/// Pseudo-OPP marking an entry given at the unit type's reference point,
/// eligible for DVFS-based derivation.
pub const REFERENCE_OPP: &str = "ref";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeContract {
    pub wcet_ms: f64,
    pub acet_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyContract {
    pub wce_mj: f64,
    pub ace_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractKey {
    pub component: String,
    pub version: String,
    pub unit_type: String,
    pub opp: String,
}

impl std::fmt::Display for ContractKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.component, self.version, self.unit_type, self.opp
        )
    }
}

/// Result of a store lookup; `derived` marks values obtained by scaling a
/// reference entry rather than read directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractFigures {
    pub time: TimeContract,
    pub energy: EnergyContract,
    pub derived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractStore {
    pub entries: BTreeMap<ContractKey, (TimeContract, EnergyContract)>,
    /// Fallback for voter nodes when the store has no `__voter` entries.
    pub voter_default: (TimeContract, EnergyContract),
}

pub const DEFAULT_VOTER_WCET_MS: f64 = 0.5;
pub const DEFAULT_VOTER_WCE_MJ: f64 = 0.1;

impl Default for ContractStore {
    fn default() -> Self {
        ContractStore {
            entries: BTreeMap::new(),
            voter_default: (
                TimeContract {
                    wcet_ms: DEFAULT_VOTER_WCET_MS,
                    acet_ms: DEFAULT_VOTER_WCET_MS,
                },
                EnergyContract {
                    wce_mj: DEFAULT_VOTER_WCE_MJ,
                    ace_mj: DEFAULT_VOTER_WCE_MJ,
                },
            ),
        }
    }
}

impl ContractStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact entry, then reference-point derivation, then (for voters) the
    /// built-in default. `None` means genuinely missing; severity is the
    /// caller's call.
    pub fn lookup(
        &self,
        component: &str,
        version: &str,
        unit_type: &str,
        opp: &platform::OperatingPoint,
        scaling: &ScalingModel,
    ) -> Option<ContractFigures> {
        let exact = ContractKey {
            component: component.to_string(),
            version: version.to_string(),
            unit_type: unit_type.to_string(),
            opp: opp.id.clone(),
        };
        if let Some((time, energy)) = self.entries.get(&exact) {
            return Some(ContractFigures {
                time: *time,
                energy: *energy,
                derived: false,
            });
        }
        let reference = ContractKey {
            opp: REFERENCE_OPP.to_string(),
            ..exact
        };
        if let Some((time, energy)) = self.entries.get(&reference) {
            if let Some(ref_opp) = scaling.reference_for(unit_type) {
                let factor_t = |t: f64| platform::scale_time(t, ref_opp, opp);
                let factor_e = |e: f64| platform::scale_energy(e, ref_opp, opp);
                return Some(ContractFigures {
                    time: TimeContract {
                        wcet_ms: factor_t(time.wcet_ms),
                        acet_ms: factor_t(time.acet_ms),
                    },
                    energy: EnergyContract {
                        wce_mj: factor_e(energy.wce_mj),
                        ace_mj: factor_e(energy.ace_mj),
                    },
                    derived: true,
                });
            }
        }
        if component == VOTER_CONTRACT_KEY {
            let (time, energy) = self.voter_default;
            return Some(ContractFigures {
                time,
                energy,
                derived: true,
            });
        }
        None
    }
}

/// Every (node, version, compatible unit type, OPP) tuple the store cannot
/// serve. Empty means fully covered.
pub fn coverage_report(
    store: &ContractStore,
    graph: &AppGraph,
    platform: &Platform,
    scaling: &ScalingModel,
) -> Vec<ContractKey> {
    let mut missing = BTreeSet::new();
    for node in &graph.nodes {
        for version in &node.versions {
            for unit_type in &version.compatible_unit_types {
                for opp in platform.opps_of_type(unit_type) {
                    if store
                        .lookup(&node.contract_key, &version.name, unit_type, &opp, scaling)
                        .is_none()
                    {
                        missing.insert(ContractKey {
                            component: node.contract_key.clone(),
                            version: version.name.clone(),
                            unit_type: unit_type.clone(),
                            opp: opp.id.clone(),
                        });
                    }
                }
            }
        }
    }
    missing.into_iter().collect()
}

pub fn load_contracts(path: &Path) -> Result<ContractStore, Vec<Diagnostic>> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic::error(
            SourceSpan::file_start(&file),
            format!("cannot read contracts file: {e}"),
        )]
    })?;
    parse_contracts(&text, &file)
}

pub fn parse_contracts(text: &str, file: &str) -> Result<ContractStore, Vec<Diagnostic>> {
    let recs = records::parse_records(text, file)?;
    let mut diags = Vec::new();
    let mut store = ContractStore::default();

    for rec in &recs {
        if rec.kind != "contract" {
            diags.push(Diagnostic::error(
                rec.span.clone(),
                format!("unknown record kind `[{}]` in contracts file", rec.kind),
            ));
            continue;
        }
        let component = rec.str_field("component", &mut diags);
        let version = rec.str_field("version", &mut diags);
        let unit_type = rec.str_field("unit_type", &mut diags);
        let opp = rec.str_field("opp", &mut diags);
        let wcet = rec.num_field("wcet_ms", &mut diags);
        let acet = rec.num_field("acet_ms", &mut diags);
        let wce = rec.num_field("wce_mj", &mut diags);
        let ace = rec.num_field("ace_mj", &mut diags);
        let (Some(component), Some(version), Some(unit_type), Some(opp)) =
            (component, version, unit_type, opp)
        else {
            continue;
        };
        let (Some(wcet), Some(acet), Some(wce), Some(ace)) = (wcet, acet, wce, ace) else {
            continue;
        };
        if opp != REFERENCE_OPP {
            if let Err(msg) = platform::OperatingPoint::parse(&opp) {
                diags.push(Diagnostic::error(rec.span.clone(), msg));
                continue;
            }
        }
        let mut bad = false;
        for (label, v) in [
            ("wcet_ms", wcet),
            ("acet_ms", acet),
            ("wce_mj", wce),
            ("ace_mj", ace),
        ] {
            if v <= 0.0 {
                diags.push(Diagnostic::error(
                    rec.span.clone(),
                    format!("{label} must be positive (got {v})"),
                ));
                bad = true;
            }
        }
        if acet > wcet {
            diags.push(Diagnostic::error(
                rec.span.clone(),
                format!("acet_ms ({acet}) exceeds wcet_ms ({wcet})"),
            ));
            bad = true;
        }
        if ace > wce {
            diags.push(Diagnostic::error(
                rec.span.clone(),
                format!("ace_mj ({ace}) exceeds wce_mj ({wce})"),
            ));
            bad = true;
        }
        if bad {
            continue;
        }
        let key = ContractKey {
            component,
            version,
            unit_type,
            opp,
        };
        if store.entries.contains_key(&key) {
            diags.push(Diagnostic::error(
                rec.span.clone(),
                format!("duplicate contract {key}"),
            ));
            continue;
        }
        store.entries.insert(
            key,
            (
                TimeContract {
                    wcet_ms: wcet,
                    acet_ms: acet,
                },
                EnergyContract {
                    wce_mj: wce,
                    ace_mj: ace,
                },
            ),
        );
    }
    if diags.is_empty() {
        Ok(store)
    } else {
        Err(diags)
    }
}

/// Canonical text form; `parse_contracts` on the output yields an equal store.
pub fn serialize_contracts(store: &ContractStore) -> String {
    let mut out = String::new();
    for (key, (time, energy)) in &store.entries {
        out.push_str("[contract]\n");
        out.push_str(&format!("component = \"{}\"\n", key.component));
        out.push_str(&format!("version   = \"{}\"\n", key.version));
        out.push_str(&format!("unit_type = \"{}\"\n", key.unit_type));
        out.push_str(&format!("opp       = \"{}\"\n", key.opp));
        out.push_str(&format!("wcet_ms = {}\n", time.wcet_ms));
        out.push_str(&format!("acet_ms = {}\n", time.acet_ms));
        out.push_str(&format!("wce_mj  = {}\n", energy.wce_mj));
        out.push_str(&format!("ace_mj  = {}\n", energy.ace_mj));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::parser::parse_app;
    use crate::platform::{parse_platform, OperatingPoint};

    fn fixtures() -> (ContractStore, Platform, ScalingModel) {
        let store = parse_contracts(
            include_str!("../../../fixtures/vision.contracts"),
            "vision.contracts",
        )
        .unwrap();
        let platform = parse_platform(
            include_str!("../../../fixtures/odroid_like.platform"),
            "odroid_like.platform",
        )
        .unwrap();
        let scaling = ScalingModel::cycle_scaling(&platform);
        (store, platform, scaling)
    }

    #[test]
    fn loads_vision_store() {
        let (store, _, _) = fixtures();
        assert_eq!(store.len(), 21);
    }

    #[test]
    fn exact_lookup_wins() {
        let (store, _, scaling) = fixtures();
        let opp = OperatingPoint::parse("600MHz@0.80V").unwrap();
        let f = store
            .lookup("ImageCapture", "v1", "LITTLE", &opp, &scaling)
            .unwrap();
        assert!(!f.derived);
        assert_eq!(f.time.wcet_ms, 6.0);
        assert_eq!(f.energy.wce_mj, 1.6);
        assert_eq!(f.time.acet_ms, 4.8);
    }

    #[test]
    fn reference_entries_scale_by_dvfs_model() {
        let text = "[contract]\ncomponent = \"X\"\nversion = \"v1\"\nunit_type = \"big\"\n\
                    opp = \"ref\"\nwcet_ms = 10\nacet_ms = 8\nwce_mj = 8\nace_mj = 6\n";
        let store = parse_contracts(text, "t.contracts").unwrap();
        let (_, platform, _) = fixtures();
        let scaling = ScalingModel::cycle_scaling(&platform);
        // reference for big is 1800MHz@1.10V; derive the 600MHz@0.80V point
        let low = OperatingPoint::parse("600MHz@0.80V").unwrap();
        let f = store.lookup("X", "v1", "big", &low, &scaling).unwrap();
        assert!(f.derived);
        assert!((f.time.wcet_ms - 30.0).abs() < 1e-12);
        assert!((f.energy.wce_mj - 4.231404958677686).abs() < 1e-9);
        // at the reference point itself the figures come back unscaled
        let hi = OperatingPoint::parse("1800MHz@1.10V").unwrap();
        let g = store.lookup("X", "v1", "big", &hi, &scaling).unwrap();
        assert!((g.time.wcet_ms - 10.0).abs() < 1e-12);
        assert!((g.energy.wce_mj - 8.0).abs() < 1e-12);
    }

    #[test]
    fn voter_falls_back_to_default() {
        let (store, _, scaling) = fixtures();
        let opp = OperatingPoint::parse("600MHz@0.80V").unwrap();
        let f = store
            .lookup(crate::ft::VOTER_CONTRACT_KEY, "v1", "LITTLE", &opp, &scaling)
            .unwrap();
        assert!(f.derived);
        assert_eq!(f.time.wcet_ms, DEFAULT_VOTER_WCET_MS);
        assert_eq!(f.energy.wce_mj, DEFAULT_VOTER_WCE_MJ);
        assert!(store.lookup("NoSuch", "v1", "LITTLE", &opp, &scaling).is_none());
    }

    #[test]
    fn vision_fixture_fully_covers_the_expanded_graph() {
        let (store, platform, scaling) = fixtures();
        let app = parse_app(include_str!("../../../fixtures/vision.coord"), "v.coord").unwrap();
        let graph = crate::ft::expand_ft(&build_graph(&app).unwrap()).unwrap();
        assert!(coverage_report(&store, &graph, &platform, &scaling).is_empty());
    }

    #[test]
    fn coverage_lists_every_hole() {
        let (_, platform, scaling) = fixtures();
        let app = parse_app(include_str!("../../../fixtures/vision.coord"), "v.coord").unwrap();
        let graph = build_graph(&app).unwrap();
        let empty = ContractStore::default();
        let missing = coverage_report(&empty, &graph, &platform, &scaling);
        // 4 cpu-only tasks x (LITTLE, big) x 2 OPPs + ObjectDetection gpu x 1
        assert_eq!(missing.len(), 4 * 4 + 4 + 1);
        assert!(missing.iter().all(|k| !k.component.is_empty()));
        let shown = missing[0].to_string();
        assert_eq!(shown.matches('/').count(), 3);
    }

    #[test]
    fn invariant_violations_are_rejected() {
        for (snippet, needle) in [
            ("wcet_ms = 1\nacet_ms = 2\nwce_mj = 1\nace_mj = 1\n", "acet_ms (2) exceeds"),
            ("wcet_ms = 1\nacet_ms = 1\nwce_mj = 1\nace_mj = 2\n", "ace_mj (2) exceeds"),
            ("wcet_ms = 0\nacet_ms = 0\nwce_mj = 1\nace_mj = 1\n", "must be positive"),
        ] {
            let text = format!(
                "[contract]\ncomponent = \"X\"\nversion = \"v\"\nunit_type = \"t\"\nopp = \"ref\"\n{snippet}"
            );
            let diags = parse_contracts(&text, "bad.contracts").unwrap_err();
            assert!(diags.iter().any(|d| d.message.contains(needle)), "{diags:?}");
        }
    }

    #[test]
    fn duplicate_entries_are_rejected() {
        let one = "[contract]\ncomponent = \"X\"\nversion = \"v\"\nunit_type = \"t\"\nopp = \"ref\"\n\
                   wcet_ms = 1\nacet_ms = 1\nwce_mj = 1\nace_mj = 1\n";
        let text = format!("{one}\n{one}");
        let diags = parse_contracts(&text, "dup.contracts").unwrap_err();
        assert!(diags[0].message.contains("duplicate contract X/v/t/ref"));
    }

    #[test]
    fn serialization_round_trips() {
        let (store, _, _) = fixtures();
        let text = serialize_contracts(&store);
        let reparsed = parse_contracts(&text, "rt.contracts").unwrap();
        assert_eq!(store, reparsed);
    }
}
