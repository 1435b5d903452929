//! Domain types, scenario ingestion and unit normalization.
//!
//! Scenario documents are TOML. Numeric fields accept either a bare number
//! (already in internal units) or a string with a unit suffix, e.g.
//! `pmax = "80 MW"`, `emax = "10 MWh"`, `t_pfr = "6 s"`. Energies are stored in
//! MW·s; `MWh` inputs are multiplied by 3600 on load.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// MW·s per MWh.
pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Which frequency events the inertia service must cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Frequency drop events (positive response first, absorption in recovery).
    #[default]
    Up,
    /// Frequency rise events; every frequency-signed term reversed.
    Down,
    /// Both constraint sets imposed at once.
    UpDown,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Up => write!(f, "up"),
            Direction::Down => write!(f, "down"),
            Direction::UpDown => write!(f, "updown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Nominal frequency (Hz).
    #[serde(deserialize_with = "de_frequency")]
    pub f0: f64,
    /// Maximum allowable |RoCoF| (Hz/s).
    #[serde(deserialize_with = "de_rocof")]
    pub rocof_max: f64,
    /// Maximum allowable deviation at the nadir (Hz).
    #[serde(deserialize_with = "de_frequency")]
    pub dfnad_max: f64,
    /// Maximum allowable quasi-steady-state deviation (Hz).
    #[serde(deserialize_with = "de_frequency")]
    pub dfqss_max: f64,
    /// PFR full-activation time (s).
    #[serde(deserialize_with = "de_time")]
    pub t_pfr: f64,
    /// Dispatch interval length (s).
    #[serde(deserialize_with = "de_time")]
    pub dt: f64,
    /// Pre-contingency demand (MW).
    #[serde(deserialize_with = "de_power")]
    pub demand: f64,
    #[serde(default)]
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncGenerator {
    pub id: String,
    #[serde(deserialize_with = "de_power")]
    pub pmin: f64,
    #[serde(deserialize_with = "de_power")]
    pub pmax: f64,
    /// Governor-controlled transient capacity; defaults to `pmax`.
    #[serde(default, deserialize_with = "de_opt_power", skip_serializing_if = "Option::is_none")]
    pub pgov_max: Option<f64>,
    #[serde(deserialize_with = "de_scalar")]
    pub cost_a: f64,
    #[serde(deserialize_with = "de_scalar")]
    pub cost_b: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub cost_c: f64,
    /// Inertia constant (s).
    #[serde(deserialize_with = "de_time")]
    pub h: f64,
    /// Machine rating (MVA).
    #[serde(deserialize_with = "de_apparent")]
    pub s_mva: f64,
    #[serde(deserialize_with = "de_scalar")]
    pub droop_gain: f64,
}

impl SyncGenerator {
    pub fn pgov(&self) -> f64 {
        self.pgov_max.unwrap_or(self.pmax)
    }

    /// Generation cost of dispatch `p` over one interval ($).
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_a * p * p + self.cost_b * p + self.cost_c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterResource {
    pub id: String,
    #[serde(deserialize_with = "de_power")]
    pub pmin: f64,
    #[serde(deserialize_with = "de_power")]
    pub pmax: f64,
    #[serde(deserialize_with = "de_energy")]
    pub emin: f64,
    #[serde(deserialize_with = "de_energy")]
    pub emax: f64,
    #[serde(deserialize_with = "de_energy")]
    pub e0: f64,
    /// Round-trip efficiency in (0, 1].
    #[serde(deserialize_with = "de_scalar")]
    pub eta: f64,
    /// Maximum inertia proportionality factor, MW/(Hz/s).
    #[serde(deserialize_with = "de_scalar")]
    pub d_max: f64,
    #[serde(default = "one", deserialize_with = "de_scalar")]
    pub alpha: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub beta: f64,
    #[serde(deserialize_with = "de_scalar")]
    pub droop_gain: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub cost_energy: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub cost_inertia: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub cost_pfr_r: f64,
    #[serde(default, deserialize_with = "de_scalar")]
    pub cost_pfr_d: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: SystemParams,
    /// Force alpha = 1, beta = 0 and use the reduced IBR power constraint set.
    #[serde(default)]
    pub conservative_mode: bool,
    /// Drop the recovery-phase (negative response) requirements.
    #[serde(default)]
    pub positive_only: bool,
    #[serde(default)]
    pub sgs: Vec<SyncGenerator>,
    #[serde(default)]
    pub ibrs: Vec<InverterResource>,
}

impl Scenario {
    pub fn resource_count(&self) -> usize {
        self.sgs.len() + self.ibrs.len()
    }

    /// Resource ids in solver order: generators first, then inverters.
    pub fn resource_ids(&self) -> Vec<String> {
        self.sgs
            .iter()
            .map(|g| g.id.clone())
            .chain(self.ibrs.iter().map(|j| j.id.clone()))
            .collect()
    }

    pub fn total_pmax(&self) -> f64 {
        self.sgs.iter().map(|g| g.pmax).sum::<f64>() + self.ibrs.iter().map(|j| j.pmax).sum::<f64>()
    }

    pub fn total_pmin(&self) -> f64 {
        self.sgs.iter().map(|g| g.pmin).sum::<f64>() + self.ibrs.iter().map(|j| j.pmin).sum::<f64>()
    }

    /// Effective (alpha, beta) of an inverter under the scenario's mode.
    pub fn relaxation(&self, ibr: &InverterResource) -> (f64, f64) {
        if self.conservative_mode {
            (1.0, 0.0)
        } else {
            (ibr.alpha, ibr.beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        for (field, v) in [
            ("f0", p.f0),
            ("rocof_max", p.rocof_max),
            ("dfnad_max", p.dfnad_max),
            ("dfqss_max", p.dfqss_max),
            ("t_pfr", p.t_pfr),
            ("dt", p.dt),
            ("demand", p.demand),
        ] {
            positive("params", field, v)?;
        }
        if p.t_pfr > p.dt {
            return Err(Error::validation("params", "t_pfr", format!("{} s exceeds dt = {} s", p.t_pfr, p.dt)));
        }
        if p.dfqss_max > p.dfnad_max {
            return Err(Error::validation(
                "params",
                "dfqss_max",
                format!("{} Hz exceeds dfnad_max = {} Hz", p.dfqss_max, p.dfnad_max),
            ));
        }
        if self.resource_count() == 0 {
            return Err(Error::validation("scenario", "sgs", "at least one resource is required"));
        }

        let mut seen = HashSet::new();
        for id in self.resource_ids() {
            if !seen.insert(id.clone()) {
                return Err(Error::validation(id, "id", "duplicate resource id"));
            }
        }

        for g in &self.sgs {
            let who = format!("generator {}", g.id);
            finite_all(&who, &[g.pmin, g.pmax, g.pgov(), g.cost_a, g.cost_b, g.cost_c, g.h, g.s_mva, g.droop_gain])?;
            if g.pmin > g.pmax {
                return Err(Error::validation(who, "pmin", format!("pmin {} > pmax {}", g.pmin, g.pmax)));
            }
            if g.pgov() < 0.0 {
                return Err(Error::validation(who, "pgov_max", "must be non-negative"));
            }
            nonneg(&who, "h", g.h)?;
            positive(&who, "s_mva", g.s_mva)?;
            nonneg(&who, "cost_a", g.cost_a)?;
            nonneg(&who, "droop_gain", g.droop_gain)?;
        }

        for j in &self.ibrs {
            let who = format!("inverter {}", j.id);
            finite_all(
                &who,
                &[
                    j.pmin,
                    j.pmax,
                    j.emin,
                    j.emax,
                    j.e0,
                    j.eta,
                    j.d_max,
                    j.alpha,
                    j.beta,
                    j.droop_gain,
                    j.cost_energy,
                    j.cost_inertia,
                    j.cost_pfr_r,
                    j.cost_pfr_d,
                ],
            )?;
            if j.pmin > j.pmax {
                return Err(Error::validation(who, "pmin", format!("pmin {} > pmax {}", j.pmin, j.pmax)));
            }
            if j.emin > j.emax {
                return Err(Error::validation(who, "emin", format!("emin {} > emax {}", j.emin, j.emax)));
            }
            if j.e0 < j.emin || j.e0 > j.emax {
                return Err(Error::validation(
                    who,
                    "e0",
                    format!("e0 {} outside [{}, {}] MW·s", j.e0, j.emin, j.emax),
                ));
            }
            if !(j.eta > 0.0 && j.eta <= 1.0) {
                return Err(Error::validation(who, "eta", format!("{} not in (0, 1]", j.eta)));
            }
            nonneg(&who, "d_max", j.d_max)?;
            unit_interval(&who, "alpha", j.alpha)?;
            unit_interval(&who, "beta", j.beta)?;
            nonneg(&who, "droop_gain", j.droop_gain)?;
            nonneg(&who, "cost_energy", j.cost_energy)?;
            nonneg(&who, "cost_inertia", j.cost_inertia)?;
            nonneg(&who, "cost_pfr_r", j.cost_pfr_r)?;
            nonneg(&who, "cost_pfr_d", j.cost_pfr_d)?;
        }
        Ok(())
    }

    /// Serialize in internal units (bare numbers, energies in MW·s).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialization is infallible")
    }
}

fn positive(owner: &str, field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(owner, field, format!("{v} must be positive")))
    }
}

fn nonneg(owner: &str, field: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(owner, field, format!("{v} must be non-negative")))
    }
}

fn unit_interval(owner: &str, field: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(owner, field, format!("{v} not in [0, 1]")))
    }
}

fn finite_all(owner: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(owner, "value", "non-finite number"))
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

/// Inertia proportionality factor and committed inertia quantity of a
/// synchronous machine: `D = 2·H·S/f0`, `P_in = D·rocof_max`.
pub fn sg_inertia_params(h: f64, s_mva: f64, f0: f64, rocof_max: f64) -> (f64, f64) {
    let d = 2.0 * h * s_mva / f0;
    (d, d * rocof_max)
}

/// Maximum ramp and droop PFR capacities of a resource with gain `r`.
pub fn pfr_capability(r: f64, pmax: f64, f0: f64, dfnad: f64, dfqss: f64) -> (f64, f64) {
    let base = r * pmax / f0;
    (base * dfnad, base * dfqss)
}

// --- unit-aware deserialization -------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Power,
    Energy,
    Frequency,
    Rocof,
    Time,
    Apparent,
    Scalar,
}

fn unit_factor(dim: Dim, unit: &str) -> Option<f64> {
    match (dim, unit) {
        (Dim::Power, "MW") => Some(1.0),
        (Dim::Energy, "MWs") | (Dim::Energy, "MW·s") | (Dim::Energy, "MW*s") => Some(1.0),
        (Dim::Energy, "MWh") => Some(SECONDS_PER_HOUR),
        (Dim::Frequency, "Hz") => Some(1.0),
        (Dim::Rocof, "Hz/s") => Some(1.0),
        (Dim::Time, "s") => Some(1.0),
        (Dim::Apparent, "MVA") => Some(1.0),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Float(f64),
    Int(i64),
    Text(String),
}

fn parse_quantity(raw: RawQuantity, dim: Dim) -> std::result::Result<f64, String> {
    match raw {
        RawQuantity::Float(v) => Ok(v),
        RawQuantity::Int(v) => Ok(v as f64),
        RawQuantity::Text(s) => {
            let s = s.trim();
            let split = s
                .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
                .unwrap_or(s.len());
            let (num, unit) = s.split_at(split);
            let value: f64 = num.trim().parse().map_err(|_| format!("bad number in {s:?}"))?;
            let unit = unit.trim();
            if unit.is_empty() {
                return Ok(value);
            }
            unit_factor(dim, unit)
                .map(|f| value * f)
                .ok_or_else(|| format!("unit {unit:?} not valid for a {dim:?} field"))
        }
    }
}

fn de_dim<'de, D: Deserializer<'de>>(d: D, dim: Dim) -> std::result::Result<f64, D::Error> {
    let raw = RawQuantity::deserialize(d)?;
    parse_quantity(raw, dim).map_err(serde::de::Error::custom)
}

fn de_power<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Power)
}

fn de_opt_power<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    de_dim(d, Dim::Power).map(Some)
}

fn de_energy<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Energy)
}

fn de_frequency<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Frequency)
}

fn de_rocof<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Rocof)
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Time)
}

fn de_apparent<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Apparent)
}

fn de_scalar<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    de_dim(d, Dim::Scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) const SIX_GEN: &str = include_str!("../../../scenarios/six_gen.toml");

    #[test]
    fn loads_six_generator_case() {
        let s = load_scenario(SIX_GEN).unwrap();
        assert_eq!(s.sgs.len(), 6);
        assert_eq!(s.ibrs.len(), 1);
        assert_eq!(s.sgs[0].pgov(), 80.0);
        assert_eq!(s.sgs[3].pmin, 16.5);
        assert_eq!(s.sgs[1].cost_c, 0.0);
        // MWh converted to MW·s
        assert_eq!(s.ibrs[0].emax, 20.0 * 3600.0);
        assert_eq!(s.ibrs[0].alpha, 1.0);
        assert_eq!(s.params.direction, Direction::Up);
    }

    #[test]
    fn rejects_pmin_above_pmax() {
        let text = SIX_GEN.replacen("pmin = \"24 MW\"", "pmin = \"90 MW\"", 1);
        match load_scenario(&text) {
            Err(Error::Validation { owner, field, .. }) => {
                assert_eq!(owner, "generator G1");
                assert_eq!(field, "pmin");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_e0_outside_limits() {
        let text = SIX_GEN.replace("e0 = \"10 MWh\"", "e0 = \"25 MWh\"");
        match load_scenario(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "e0"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_units_and_syntax() {
        let text = SIX_GEN.replace("t_pfr = \"6 s\"", "t_pfr = \"6 MW\"");
        assert!(matches!(load_scenario(&text), Err(Error::Parse(_))));
        assert!(matches!(load_scenario("params = [1"), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_activation_after_interval() {
        let text = SIX_GEN.replace("t_pfr = \"6 s\"", "t_pfr = \"400 s\"");
        assert!(matches!(load_scenario(&text), Err(Error::Validation { field: "t_pfr", .. })));
    }

    #[test]
    fn sg_inertia_examples() {
        assert_eq!(sg_inertia_params(5.0, 100.0, 50.0, 1.0), (20.0, 20.0));
        assert_eq!(sg_inertia_params(0.0, 100.0, 50.0, 1.0), (0.0, 0.0));
        let (d, p) = sg_inertia_params(1.0, 80.0, 60.0, 0.5);
        assert_relative_eq!(d, 160.0 / 60.0, max_relative = 1e-12);
        assert_relative_eq!(p, 80.0 / 60.0, max_relative = 1e-12);
        assert!((d - 2.6667).abs() < 1e-4 && (p - 1.3333).abs() < 1e-4);
    }

    #[test]
    fn pfr_capability_examples() {
        let (r, d) = pfr_capability(20.0, 80.0, 50.0, 0.8, 0.5);
        assert_relative_eq!(r, 25.6, max_relative = 1e-12);
        assert_relative_eq!(d, 16.0, max_relative = 1e-12);
        assert_eq!(pfr_capability(0.0, 80.0, 50.0, 0.8, 0.5), (0.0, 0.0));
        let (r, d) = pfr_capability(12.0, 33.0, 60.0, 0.4, 0.4);
        assert_eq!(r, d);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            demand in 1.0f64..200.0,
            h in 0.0f64..10.0,
            eta in 0.05f64..=1.0,
            e0_frac in 0.0f64..=1.0,
            direction in prop_oneof![Just(Direction::Up), Just(Direction::Down), Just(Direction::UpDown)],
            conservative in any::<bool>(),
        ) {
            let mut s = load_scenario(SIX_GEN).unwrap();
            s.params.demand = demand;
            s.params.direction = direction;
            s.conservative_mode = conservative;
            s.sgs[2].h = h;
            s.sgs[4].pgov_max = Some(35.5);
            s.ibrs[0].eta = eta;
            s.ibrs[0].e0 = s.ibrs[0].emin + e0_frac * (s.ibrs[0].emax - s.ibrs[0].emin);
            let back = load_scenario(&s.to_toml()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn sg_inertia_linear(h in 0.0f64..20.0, s in 1.0f64..1000.0, f0 in 40.0f64..70.0, rocof in 0.1f64..3.0) {
            let (d1, p1) = sg_inertia_params(h, s, f0, rocof);
            let (d2, p2) = sg_inertia_params(2.0 * h, s, f0, rocof);
            let (d3, p3) = sg_inertia_params(h, 2.0 * s, f0, rocof);
            prop_assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d1.max(1.0));
            prop_assert!((p2 - 2.0 * p1).abs() <= 1e-9 * p1.max(1.0));
            prop_assert!((d3 - 2.0 * d1).abs() <= 1e-9 * d1.max(1.0));
            prop_assert!((p3 - 2.0 * p1).abs() <= 1e-9 * p1.max(1.0));
        }

        #[test]
        fn pfr_capability_monotone(
            r in 0.0f64..50.0, pmax in 0.0f64..200.0, f0 in 40.0f64..70.0,
            dfnad in 0.01f64..2.0, dfqss in 0.01f64..2.0, bump in 0.0f64..5.0,
        ) {
            let (br, bd) = pfr_capability(r, pmax, f0, dfnad, dfqss);
            for (nr, nd) in [
                pfr_capability(r + bump, pmax, f0, dfnad, dfqss),
                pfr_capability(r, pmax + bump, f0, dfnad, dfqss),
                pfr_capability(r, pmax, f0, dfnad + bump, dfqss),
                pfr_capability(r, pmax, f0, dfnad, dfqss + bump),
            ] {
                prop_assert!(nr >= br - 1e-12 && nd >= bd - 1e-12);
            }
            let (fr, fd) = pfr_capability(r, pmax, f0 + bump, dfnad, dfqss);
            prop_assert!(fr <= br + 1e-12 && fd <= bd + 1e-12);
        }
    }
}
