//! Heterogeneous platform model: processing units, DVFS operating points
//! and the static/dynamic energy formulas.
//!
//! Scaling laws are first-order CMOS: execution time scales with 1/f (fixed
//! cycle count), dynamic energy with V². Static power is per-unit, constant
//! over the whole makespan. Unit algebra: mW · ms = µJ; reports are in mJ.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::diag::{Diagnostic, SourceSpan};
use crate::records;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub id: String,
    pub freq_mhz: f64,
    pub voltage_v: f64,
}

impl OperatingPoint {
    /// Parse an OPP id of the form `800MHz@0.90V`.
    pub fn parse(id: &str) -> Result<OperatingPoint, String> {
        let (freq_part, volt_part) = id
            .split_once('@')
            .ok_or_else(|| format!("malformed OPP id `{id}` (expected fMHz@vV)"))?;
        let freq = freq_part
            .strip_suffix("MHz")
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| format!("malformed frequency in OPP id `{id}`"))?;
        let volt = volt_part
            .strip_suffix('V')
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format!("malformed voltage in OPP id `{id}`"))?;
        if freq <= 0.0 || volt <= 0.0 {
            return Err(format!("OPP `{id}` must have positive frequency and voltage"));
        }
        Ok(OperatingPoint {
            id: id.to_string(),
            freq_mhz: freq,
            voltage_v: volt,
        })
    }
}

impl fmt::Display for OperatingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingUnit {
    pub name: String,
    pub unit_type: String,
    pub opps: Vec<OperatingPoint>,
    pub static_power_mw: f64,
}

impl ProcessingUnit {
    pub fn opp(&self, id: &str) -> Option<&OperatingPoint> {
        self.opps.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Platform {
    pub name: String,
    pub units: Vec<ProcessingUnit>,
}

impl Platform {
    pub fn unit(&self, name: &str) -> Option<&ProcessingUnit> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn unit_types(&self) -> Vec<String> {
        let mut types: Vec<String> = self.units.iter().map(|u| u.unit_type.clone()).collect();
        types.sort();
        types.dedup();
        types
    }

    pub fn units_of_type<'a>(&'a self, unit_type: &'a str) -> impl Iterator<Item = &'a ProcessingUnit> {
        self.units.iter().filter(move |u| u.unit_type == unit_type)
    }

    /// All distinct OPPs available on units of the given type, sorted by id.
    pub fn opps_of_type(&self, unit_type: &str) -> Vec<OperatingPoint> {
        let mut by_id: BTreeMap<String, OperatingPoint> = BTreeMap::new();
        for u in self.units_of_type(unit_type) {
            for o in &u.opps {
                by_id.entry(o.id.clone()).or_insert_with(|| o.clone());
            }
        }
        by_id.into_values().collect()
    }

    pub fn total_static_power_mw(&self) -> f64 {
        self.units.iter().map(|u| u.static_power_mw).sum()
    }
}

/// DVFS derivation model for contract entries given at a reference OPP.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingModel {
    /// Reference OPP per unit type; the highest-frequency (then
    /// highest-voltage) point available on that type.
    pub reference: BTreeMap<String, OperatingPoint>,
}

impl ScalingModel {
    pub fn cycle_scaling(platform: &Platform) -> ScalingModel {
        let mut reference = BTreeMap::new();
        for ty in platform.unit_types() {
            let best = platform
                .opps_of_type(&ty)
                .into_iter()
                .max_by(|a, b| {
                    (a.freq_mhz, a.voltage_v)
                        .partial_cmp(&(b.freq_mhz, b.voltage_v))
                        .unwrap()
                });
            if let Some(opp) = best {
                reference.insert(ty, opp);
            }
        }
        ScalingModel { reference }
    }

    pub fn reference_for(&self, unit_type: &str) -> Option<&OperatingPoint> {
        self.reference.get(unit_type)
    }
}

/// t = t_ref · f_ref / f_target (cycle count is conserved).
pub fn scale_time(t_ref_ms: f64, reference: &OperatingPoint, target: &OperatingPoint) -> f64 {
    t_ref_ms * reference.freq_mhz / target.freq_mhz
}

/// e = e_ref · (V_target / V_ref)².
pub fn scale_energy(e_ref_mj: f64, reference: &OperatingPoint, target: &OperatingPoint) -> f64 {
    let ratio = target.voltage_v / reference.voltage_v;
    e_ref_mj * ratio * ratio
}

/// Whole-platform idle energy over the makespan, in mJ.
pub fn static_energy(platform: &Platform, makespan_ms: f64) -> f64 {
    platform.total_static_power_mw() * makespan_ms / 1000.0
}

pub fn load_platform(path: &Path) -> Result<Platform, Vec<Diagnostic>> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic::error(
            SourceSpan::file_start(&file),
            format!("cannot read platform file: {e}"),
        )]
    })?;
    parse_platform(&text, &file)
}

pub fn parse_platform(text: &str, file: &str) -> Result<Platform, Vec<Diagnostic>> {
    let recs = records::parse_records(text, file)?;
    let mut diags = Vec::new();
    let mut name = String::from("platform");
    let mut units = Vec::new();

    for rec in &recs {
        match rec.kind.as_str() {
            "platform" => {
                if let Some(n) = rec.str_field("name", &mut diags) {
                    name = n;
                }
            }
            "unit" => {
                let uname = rec.str_field("name", &mut diags);
                let utype = rec.str_field("type", &mut diags);
                let power = rec.num_field("static_power_mw", &mut diags);
                let mut opps = Vec::new();
                for f in rec.all("opp") {
                    match f.value.as_str() {
                        None => diags.push(Diagnostic::error(
                            f.span.clone(),
                            "field `opp` must be a quoted string",
                        )),
                        Some(id) => match OperatingPoint::parse(id) {
                            Ok(opp) => {
                                if opps.iter().any(|o: &OperatingPoint| o.id == opp.id) {
                                    diags.push(Diagnostic::error(
                                        f.span.clone(),
                                        format!("duplicate OPP `{id}`"),
                                    ));
                                } else {
                                    opps.push(opp);
                                }
                            }
                            Err(msg) => diags.push(Diagnostic::error(f.span.clone(), msg)),
                        },
                    }
                }
                if opps.is_empty() {
                    diags.push(Diagnostic::error(
                        rec.span.clone(),
                        "unit declares no operating points",
                    ));
                }
                if let Some(p) = power {
                    if p < 0.0 {
                        diags.push(Diagnostic::error(
                            rec.span.clone(),
                            "static_power_mw must be non-negative",
                        ));
                    }
                }
                if let (Some(uname), Some(utype), Some(power)) = (uname, utype, power) {
                    if units.iter().any(|u: &ProcessingUnit| u.name == uname) {
                        diags.push(Diagnostic::error(
                            rec.span.clone(),
                            format!("duplicate unit name `{uname}`"),
                        ));
                    } else {
                        units.push(ProcessingUnit {
                            name: uname,
                            unit_type: utype,
                            opps,
                            static_power_mw: power,
                        });
                    }
                }
            }
            other => diags.push(Diagnostic::error(
                rec.span.clone(),
                format!("unknown record kind `[{other}]` in platform file"),
            )),
        }
    }
    if units.is_empty() {
        diags.push(Diagnostic::error(
            SourceSpan::file_start(file),
            "platform declares no units",
        ));
    }
    if diags.is_empty() {
        Ok(Platform { name, units })
    } else {
        Err(diags)
    }
}

/// Canonical text form; `parse_platform` on the output yields an equal model.
pub fn serialize_platform(platform: &Platform) -> String {
    let mut out = String::new();
    out.push_str("[platform]\n");
    out.push_str(&format!("name = \"{}\"\n", platform.name));
    for u in &platform.units {
        out.push_str("\n[unit]\n");
        out.push_str(&format!("name = \"{}\"\n", u.name));
        out.push_str(&format!("type = \"{}\"\n", u.unit_type));
        out.push_str(&format!("static_power_mw = {}\n", u.static_power_mw));
        for o in &u.opps {
            out.push_str(&format!("opp = \"{}\"\n", o.id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ODROID: &str = include_str!("../../../fixtures/odroid_like.platform");

    fn odroid() -> Platform {
        parse_platform(ODROID, "odroid_like.platform").unwrap()
    }

    #[test]
    fn parses_board_fixture() {
        let p = odroid();
        assert_eq!(p.name, "odroid_like");
        assert_eq!(p.units.len(), 9);
        assert_eq!(p.unit_types(), vec!["GPU", "LITTLE", "big"]);
        assert_eq!(p.units_of_type("LITTLE").count(), 4);
        assert_eq!(p.total_static_power_mw(), 2600.0);
        let big0 = p.unit("big0").unwrap();
        assert_eq!(big0.opps.len(), 2);
        assert_eq!(big0.opp("1800MHz@1.10V").unwrap().voltage_v, 1.10);
    }

    #[test]
    fn opp_id_parsing() {
        let o = OperatingPoint::parse("800MHz@0.90V").unwrap();
        assert_eq!(o.freq_mhz, 800.0);
        assert_eq!(o.voltage_v, 0.90);
        assert!(OperatingPoint::parse("800MHz").is_err());
        assert!(OperatingPoint::parse("800@0.9V").is_err());
        assert!(OperatingPoint::parse("0MHz@0.9V").is_err());
    }

    #[test]
    fn reference_points_take_highest_frequency() {
        let scaling = ScalingModel::cycle_scaling(&odroid());
        assert_eq!(scaling.reference_for("big").unwrap().id, "1800MHz@1.10V");
        assert_eq!(scaling.reference_for("LITTLE").unwrap().id, "1000MHz@0.90V");
        assert_eq!(scaling.reference_for("GPU").unwrap().id, "800MHz@0.90V");
        assert!(scaling.reference_for("DSP").is_none());
    }

    #[test]
    fn time_scaling_conserves_cycles() {
        let hi = OperatingPoint::parse("1800MHz@1.10V").unwrap();
        let lo = OperatingPoint::parse("600MHz@0.80V").unwrap();
        assert_eq!(scale_time(10.0, &hi, &lo), 30.0);
        assert_eq!(scale_time(30.0, &lo, &hi), 10.0);
        assert_eq!(scale_time(10.0, &hi, &hi), 10.0);
    }

    #[test]
    fn energy_scaling_is_quadratic_in_voltage() {
        let hi = OperatingPoint::parse("1800MHz@1.10V").unwrap();
        let lo = OperatingPoint::parse("600MHz@0.80V").unwrap();
        let scaled = scale_energy(8.0, &hi, &lo);
        assert!((scaled - 8.0 * (0.80f64 / 1.10).powi(2)).abs() < 1e-12);
        assert!((scaled - 4.231404958677686).abs() < 1e-9);
    }

    #[test]
    fn static_energy_example() {
        // 0.5 W for 20 ms = 10 mJ
        let p = Platform {
            name: "p".into(),
            units: vec![ProcessingUnit {
                name: "u".into(),
                unit_type: "t".into(),
                opps: vec![OperatingPoint::parse("1000MHz@1.00V").unwrap()],
                static_power_mw: 500.0,
            }],
        };
        assert_eq!(static_energy(&p, 20.0), 10.0);
    }

    #[test]
    fn serialization_round_trips() {
        let p = odroid();
        let text = serialize_platform(&p);
        assert_eq!(parse_platform(&text, "rt.platform").unwrap(), p);
    }

    #[test]
    fn bad_platforms_are_rejected_with_all_errors() {
        let text = "[unit]\nname = \"a\"\ntype = \"t\"\nstatic_power_mw = -1\nopp = \"junk\"\n\
                    [unit]\nname = \"a\"\ntype = \"t\"\nstatic_power_mw = 1\nopp = \"1MHz@1V\"\n";
        let diags = parse_platform(text, "bad.platform").unwrap_err();
        assert!(diags.len() >= 3, "{diags:?}");
        assert!(parse_platform("", "empty.platform").is_err());
    }
}
