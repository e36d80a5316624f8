//! Scenario files.
//!
//! A scenario is a TOML document with an explicit `schema_version`. Unknown
//! fields are rejected. Channels are numbered from 1 (`CH1` is `1`); the
//! loader converts to 0-based [`ChannelId`]s.
//!
//! ```toml
//! schema_version = 1
//! name = "example"
//! horizon = 10
//! seed = 0
//! gamma = 1.0
//! feasibility = "literal"        # or "mutual"
//!
//! [channels]
//! total = 7
//! pal = [1, 2, 3]
//! gaa = [4, 5, 6, 7]
//! available = [2, 3, 5, 6]       # grant at slot 0, default: all channels
//!
//! [interference]                 # rows follow GAA ids in ascending order
//! mode = "direct"
//! matrix = [[0.0, 0.5], [0.5, 0.0]]
//! # mode = "power_law", tx_power = 1.0, alpha = 3.5, min_distance = 1.0
//!
//! [[cbsd]]
//! id = 1
//! tier = "pal"                   # or "gaa"
//! position = [0.0, 0.0]          # metres, needed for power_law GAAs
//! arrival = 0
//! departure = 5                  # exclusive, optional
//! demand = 1                     # or [[slot, demand], ...] change points
//!
//! [[event]]
//! slot = 3
//! kind = "availability"          # also: departure, arrival, demand
//! channels = [1, 2]
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interference::{build_interference_matrix, FeasibilityMode, InterferenceMatrix, PropagationModel};
use crate::model::{Cbsd, CbsdId, ChannelId, ChannelPool, ChannelSet, DemandSchedule, Position, Tier, MAX_CHANNELS};
use crate::sim::engine::Scenario;
use crate::sim::event::{Event, EventKind};

pub const SCHEMA_VERSION: u32 = 1;

const FIG2: &str = include_str!("../scenarios/fig2.toml");
const FIG2_CHURN: &str = include_str!("../scenarios/fig2-churn.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub horizon: u32,
    #[serde(default)]
    pub seed: u64,
    pub gamma: f64,
    #[serde(default)]
    pub feasibility: FeasibilityMode,
    pub channels: ChannelsSpec,
    pub interference: InterferenceSpec,
    #[serde(default, rename = "cbsd", skip_serializing_if = "Vec::is_empty")]
    pub cbsds: Vec<CbsdSpec>,
    #[serde(default, rename = "event", skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSpec {
    pub total: usize,
    pub pal: Vec<usize>,
    pub gaa: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub available: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterferenceSpec {
    Direct {
        matrix: Vec<Vec<f64>>,
    },
    PowerLaw {
        tx_power: f64,
        alpha: f64,
        min_distance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbsdSpec {
    pub id: u32,
    pub tier: Tier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    #[serde(default)]
    pub arrival: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure: Option<u32>,
    pub demand: DemandSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Constant(u32),
    Steps(Vec<[u32; 2]>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    Availability { slot: u32, channels: Vec<usize> },
    Departure { slot: u32, cbsd: u32 },
    Arrival { slot: u32, cbsd: u32 },
    Demand { slot: u32, cbsd: u32, demand: u32 },
}

struct Diag<'a> {
    origin: &'a str,
}

impl Diag<'_> {
    fn err(&self, field: impl AsRef<str>, message: impl AsRef<str>) -> Error {
        Error::Scenario {
            path: self.origin.to_string(),
            message: format!("field `{}`: {}", field.as_ref(), message.as_ref()),
        }
    }

    fn channels(&self, field: &str, numbers: &[usize], total: usize) -> Result<ChannelSet> {
        let mut set = ChannelSet::empty();
        for (i, &n) in numbers.iter().enumerate() {
            let s = ChannelId::from_number(n)
                .filter(|s| s.0 < total)
                .ok_or_else(|| self.err(format!("{field}[{i}]"), format!("channel {n} is not in 1..={total}")))?;
            if set.contains(s) {
                return Err(self.err(format!("{field}[{i}]"), format!("channel {n} listed twice")));
            }
            set.insert(s);
        }
        Ok(set)
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    /// Validates every field and reference and builds the runnable scenario.
    pub fn validate(&self, origin: &str) -> Result<Scenario> {
        let d = Diag { origin };
        if self.schema_version != SCHEMA_VERSION {
            return Err(d.err(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.horizon == 0 {
            return Err(d.err("horizon", "must be at least 1"));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(d.err("gamma", format!("must be a non-negative number, got {}", self.gamma)));
        }

        let total = self.channels.total;
        if total == 0 || total > MAX_CHANNELS {
            return Err(d.err("channels.total", format!("must be in 1..={MAX_CHANNELS}, got {total}")));
        }
        let pal = d.channels("channels.pal", &self.channels.pal, total)?;
        let gaa = d.channels("channels.gaa", &self.channels.gaa, total)?;
        let initial_available = match &self.channels.available {
            Some(list) => d.channels("channels.available", list, total)?,
            None => ChannelSet::full(total),
        };
        let pool = ChannelPool::new(total, pal, gaa).map_err(|e| d.err("channels", e.to_string()))?;

        let mut roster = Vec::with_capacity(self.cbsds.len());
        let mut seen = BTreeSet::new();
        for (i, spec) in self.cbsds.iter().enumerate() {
            let field = format!("cbsd[{i}]");
            if !seen.insert(spec.id) {
                return Err(d.err(format!("{field}.id"), format!("duplicate CBSD id {}", spec.id)));
            }
            if let Some(dep) = spec.departure {
                if dep <= spec.arrival {
                    return Err(d.err(
                        format!("{field}.departure"),
                        format!("departure {dep} must come after arrival {}", spec.arrival),
                    ));
                }
            }
            let demand = match &spec.demand {
                DemandSpec::Constant(n) => DemandSchedule::Constant(*n),
                DemandSpec::Steps(steps) => {
                    if steps.windows(2).any(|w| w[0][0] >= w[1][0]) {
                        return Err(d.err(
                            format!("{field}.demand"),
                            "change points must have strictly increasing slots",
                        ));
                    }
                    DemandSchedule::Steps(steps.iter().map(|[s, n]| (*s, *n)).collect())
                }
            };
            if let Some([x, y]) = spec.position {
                if !x.is_finite() || !y.is_finite() {
                    return Err(d.err(format!("{field}.position"), "coordinates must be finite"));
                }
            }
            roster.push(Cbsd {
                id: CbsdId(spec.id),
                tier: spec.tier,
                position: spec.position.map(|[x, y]| Position { x, y }),
                demand,
                arrival: spec.arrival,
                departure: spec.departure,
            });
        }
        roster.sort_by_key(|c| c.id);

        let gaas: Vec<Cbsd> = roster.iter().filter(|c| c.tier == Tier::Gaa).cloned().collect();
        let r = match &self.interference {
            InterferenceSpec::Direct { matrix } => {
                let n = gaas.len();
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    return Err(d.err(
                        "interference.matrix",
                        format!("expected a {n}x{n} matrix, one row per GAA in ascending id order"),
                    ));
                }
                InterferenceMatrix::from_dense(
                    gaas.iter().map(|g| g.id).collect(),
                    matrix.iter().flatten().copied().collect(),
                    self.gamma,
                )
                .map_err(|e| d.err("interference.matrix", e.to_string()))?
            }
            InterferenceSpec::PowerLaw {
                tx_power,
                alpha,
                min_distance,
            } => {
                let model = PropagationModel::PowerLaw {
                    tx_power: *tx_power,
                    exponent: *alpha,
                    min_distance: *min_distance,
                };
                if let Some(i) = self
                    .cbsds
                    .iter()
                    .position(|c| c.tier == Tier::Gaa && c.position.is_none())
                {
                    return Err(d.err(format!("cbsd[{i}].position"), "GAAs need a position for power_law"));
                }
                build_interference_matrix(&gaas, model, self.gamma)
                    .map_err(|e| d.err("interference", e.to_string()))?
            }
        };

        let lookup = |field: String, id: u32| -> Result<&Cbsd> {
            roster
                .binary_search_by_key(&CbsdId(id), |c| c.id)
                .map(|i| &roster[i])
                .map_err(|_| d.err(field, format!("unknown CBSD id {id}")))
        };
        let mut events = Vec::with_capacity(self.events.len());
        for (i, spec) in self.events.iter().enumerate() {
            let field = format!("event[{i}]");
            let event = match spec {
                EventSpec::Availability { slot, channels } => Event::new(
                    *slot,
                    EventKind::AvailabilitySet(d.channels(&format!("{field}.channels"), channels, total)?),
                ),
                EventSpec::Departure { slot, cbsd } => {
                    let c = lookup(format!("{field}.cbsd"), *cbsd)?;
                    Event::new(*slot, EventKind::Departure(c.id))
                }
                EventSpec::Arrival { slot, cbsd } => {
                    let c = lookup(format!("{field}.cbsd"), *cbsd)?;
                    Event::new(*slot, EventKind::Arrival(c.clone()))
                }
                EventSpec::Demand { slot, cbsd, demand } => {
                    let c = lookup(format!("{field}.cbsd"), *cbsd)?;
                    Event::new(
                        *slot,
                        EventKind::DemandSet {
                            cbsd: c.id,
                            demand: *demand,
                        },
                    )
                }
            };
            events.push(event);
        }

        Ok(Scenario {
            name: self.name.clone(),
            pool: Arc::new(pool),
            initial_available,
            r: Arc::new(r),
            mode: self.feasibility,
            roster,
            events,
            horizon: self.horizon,
            seed: self.seed,
        })
    }
}

/// A loaded scenario together with its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub origin: String,
    /// SHA-256 of the source text, lowercase hex.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Text of a bundled scenario (`fig2`, `fig2-churn`).
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "fig2" => Some(FIG2),
        "fig2-churn" => Some(FIG2_CHURN),
        _ => None,
    }
}

pub fn parse_str(text: &str, origin: &str) -> Result<LoadedScenario> {
    let file = ScenarioFile::from_toml(text, origin)?;
    let scenario = file.validate(origin)?;
    Ok(LoadedScenario {
        file,
        scenario,
        origin: origin.to_string(),
        hash: sha256_hex(text.as_bytes()),
    })
}

/// Loads a scenario file. `builtin:<name>` selects a bundled scenario.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    if let Some(name) = origin.strip_prefix("builtin:") {
        let text = bundled(name).ok_or_else(|| Error::Scenario {
            path: origin.clone(),
            message: "no such bundled scenario (available: fig2, fig2-churn)".into(),
        })?;
        return parse_str(text, &origin);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_str(&text, &origin)
}

/// The bundled two-slot golden scenario.
pub fn fig2() -> Scenario {
    parse_str(FIG2, "builtin:fig2")
        .expect("bundled scenario is valid")
        .scenario
}

/// The golden scenario followed by 100 slots of availability churn.
pub fn fig2_churn() -> Scenario {
    parse_str(FIG2_CHURN, "builtin:fig2-churn")
        .expect("bundled scenario is valid")
        .scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedScenario> {
        parse_str(text, "test.toml")
    }

    const MINIMAL: &str = r#"
schema_version = 1
name = "minimal"
horizon = 3
gamma = 1.0

[channels]
total = 2
pal = [1]
gaa = [2]

[interference]
mode = "direct"
matrix = [[0.0, 0.5], [0.5, 0.0]]

[[cbsd]]
id = 1
tier = "gaa"
demand = 1

[[cbsd]]
id = 2
tier = "gaa"
demand = [[0, 1], [2, 0]]
"#;

    fn expect_message(text: &str, needle: &str) {
        match load(text) {
            Err(Error::Scenario { message, .. }) => {
                assert!(message.contains(needle), "`{message}` lacks `{needle}`")
            }
            other => panic!("expected a scenario error, got {other:?}"),
        }
    }

    #[test]
    fn bundled_fig2_layout() {
        let loaded = parse_scenario("builtin:fig2").unwrap();
        let ch = &loaded.file.channels;
        assert_eq!(ch.total, 7);
        assert_eq!(ch.pal, vec![1, 2, 3]);
        assert_eq!(ch.gaa, vec![4, 5, 6, 7]);
        assert_eq!(loaded.scenario.pool.pal_set().to_string(), "{CH1,CH2,CH3}");
        assert_eq!(loaded.scenario.pool.gaa_set().to_string(), "{CH4,CH5,CH6,CH7}");
        let r = &loaded.scenario.r;
        assert_eq!(r.get(CbsdId(101), CbsdId(102)).unwrap(), 2.0);
        assert_eq!(r.get(CbsdId(101), CbsdId(103)).unwrap(), 2.0);
        assert_eq!(r.get(CbsdId(102), CbsdId(103)).unwrap(), 0.5);
        assert_eq!(r.gamma(), 1.0);
    }

    #[test]
    fn bundled_churn_parses() {
        let s = fig2_churn();
        assert_eq!(s.horizon, 102);
        assert!(s.events.len() >= 100);
    }

    #[test]
    fn minimal_parses() {
        let loaded = load(MINIMAL).unwrap();
        assert_eq!(loaded.scenario.roster.len(), 2);
        assert_eq!(loaded.scenario.initial_available, ChannelSet::full(2));
        assert_eq!(loaded.scenario.roster[1].demand.at(3), 0);
        assert_eq!(loaded.hash.len(), 64);
    }

    #[test]
    fn round_trip_is_identical() {
        for text in [MINIMAL, FIG2, FIG2_CHURN] {
            let first = ScenarioFile::from_toml(text, "a").unwrap();
            let again = ScenarioFile::from_toml(&first.to_toml().unwrap(), "b").unwrap();
            assert_eq!(first, again);
        }
    }

    #[test]
    fn asymmetric_matrix() {
        let text = MINIMAL.replace("[[0.0, 0.5], [0.5, 0.0]]", "[[0.0, 0.5], [0.7, 0.0]]");
        expect_message(&text, "asymmetric");
    }

    #[test]
    fn negative_gamma() {
        expect_message(&MINIMAL.replace("gamma = 1.0", "gamma = -1.0"), "field `gamma`");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = MINIMAL.replace("horizon = 3", "horizon = 3\ncolour = \"red\"");
        expect_message(&text, "unknown field `colour`");
        let text = MINIMAL.replace("tier = \"gaa\"\ndemand = 1", "tier = \"gaa\"\ndemand = 1\nspeed = 3");
        expect_message(&text, "unknown field `speed`");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let text = MINIMAL.replace("total = 2", "total = = 2");
        expect_message(&text, "line 8");
    }

    #[test]
    fn dangling_references() {
        let text = format!("{MINIMAL}\n[[event]]\nslot = 1\nkind = \"departure\"\ncbsd = 9\n");
        expect_message(&text, "event[0].cbsd");
        let text = format!("{MINIMAL}\n[[event]]\nslot = 1\nkind = \"availability\"\nchannels = [3]\n");
        expect_message(&text, "event[0].channels[0]");
        expect_message(&MINIMAL.replace("pal = [1]", "pal = [0]"), "channels.pal[0]");
    }

    #[test]
    fn structural_errors() {
        expect_message(&MINIMAL.replace("schema_version = 1", "schema_version = 2"), "schema_version");
        expect_message(&MINIMAL.replace("horizon = 3", "horizon = 0"), "horizon");
        expect_message(&MINIMAL.replace("id = 2", "id = 1"), "duplicate CBSD id 1");
        expect_message(
            &MINIMAL.replace("[[0.0, 0.5], [0.5, 0.0]]", "[[0.0]]"),
            "expected a 2x2 matrix",
        );
        expect_message(
            &MINIMAL.replace("demand = [[0, 1], [2, 0]]", "demand = [[2, 1], [2, 0]]"),
            "strictly increasing",
        );
        expect_message(
            &MINIMAL.replace("id = 2\n", "id = 2\narrival = 4\ndeparture = 4\n"),
            "must come after arrival",
        );
    }

    #[test]
    fn power_law_needs_positions() {
        let text = MINIMAL.replace(
            "mode = \"direct\"\nmatrix = [[0.0, 0.5], [0.5, 0.0]]",
            "mode = \"power_law\"\ntx_power = 1.0\nalpha = 2.0\nmin_distance = 0.1",
        );
        expect_message(&text, "cbsd[0].position");
        let with_pos = text
            .replace("id = 1\n", "id = 1\nposition = [0.0, 0.0]\n")
            .replace("id = 2\n", "id = 2\nposition = [0.0, 2.0]\n");
        let loaded = load(&with_pos).unwrap();
        assert_eq!(loaded.scenario.r.get(CbsdId(1), CbsdId(2)).unwrap(), 0.25);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(parse_scenario("/nonexistent/x.toml"), Err(Error::Io { .. })));
        assert!(parse_scenario("builtin:nope").is_err());
    }
}
