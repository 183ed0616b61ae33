//! TOML scenario files.
//!
//! ```toml
//! name = "example"
//! seed = 0
//! horizon = 300.0
//! segment_duration = 2.0
//!
//! [capacity]
//! breakpoints = [[0.0, 3000.0], [120.0, 1500.0]]
//! # or: trace = "trace.csv"   (relative to this file)
//!
//! [params]          # scenario-wide controller tunables
//! q_low = 5.0
//!
//! [[clients]]
//! id = 1
//! join = 0.0
//! policy = "tfdash"
//!
//! [clients.params]  # per-client overrides
//! alpha = 1.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::{BaselineParams, PolicyKind};
use crate::error::{Error, Result};
use crate::model::{BitrateLadder, PolicyParams, Selection, DEFAULT_LADDER_KBPS, DEFAULT_SEGMENT_SECS};
use crate::netsim::{load_trace, CapacitySchedule, ClientSpec, Scenario};

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    (
        "two-client-3000-1500-4000",
        include_str!("../scenarios/two-client-3000-1500-4000.toml"),
    ),
    ("rmcat", include_str!("../scenarios/rmcat.toml")),
    ("single-client-10000", include_str!("../scenarios/single-client-10000.toml")),
    ("staggered-onoff", include_str!("../scenarios/staggered-onoff.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_segment_duration")]
    pub segment_duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub strict_formulas: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub params: PolicyParams,
    #[serde(default)]
    pub baseline: BaselineParams,
    pub clients: Vec<ClientConfig>,
}

fn default_segment_duration() -> f64 {
    DEFAULT_SEGMENT_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    /// `[time_s, kbps]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    pub id: u32,
    #[serde(default)]
    pub join: f64,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "ParamOverrides::is_empty")]
    pub params: ParamOverrides,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Tfdash
}

/// Per-client replacements for individual [`PolicyParams`] fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max_buffer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_kbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

impl ParamOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: &PolicyParams) -> PolicyParams {
        PolicyParams {
            q_low: self.q_low.unwrap_or(base.q_low),
            q_high: self.q_high.unwrap_or(base.q_high),
            q_max_buffer: self.q_max_buffer.unwrap_or(base.q_max_buffer),
            q_ref: self.q_ref.unwrap_or(base.q_ref),
            alpha: self.alpha.unwrap_or(base.alpha),
            delta_kbps: self.delta_kbps.unwrap_or(base.delta_kbps),
            u0: self.u0.unwrap_or(base.u0),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            n_min: self.n_min.unwrap_or(base.n_min),
            n_max: self.n_max.unwrap_or(base.n_max),
            n0: self.n0.unwrap_or(base.n0),
            selection: self.selection.unwrap_or(base.selection),
        }
    }
}

impl ScenarioConfig {
    /// Parses without validating; `origin` only labels errors.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn bundled(name: &str) -> Option<Result<Self>> {
        bundled(name).map(|text| Self::from_toml_str(text, Path::new(name)))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse {
            path: PathBuf::from("<serialized>"),
            reason: e.to_string(),
        })
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    /// Capacity schedule; a trace path is resolved against `base_dir`.
    pub fn schedule(&self, base_dir: &Path) -> Result<CapacitySchedule> {
        let c = &self.capacity;
        let schedule = match (&c.breakpoints, &c.trace) {
            (Some(points), None) => {
                CapacitySchedule::new(points.iter().map(|p| (p[0], p[1])).collect(), None)?
            }
            (None, Some(trace)) => load_trace(base_dir.join(trace))?,
            _ => {
                return Err(Error::validation(
                    "capacity",
                    "set exactly one of `breakpoints` and `trace`",
                ))
            }
        };
        schedule.with_end(c.end)
    }

    /// Builds and validates the simulation input.
    pub fn to_scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let ladder = match &self.ladder {
            Some(rates) => BitrateLadder::new(rates.clone())?,
            None => BitrateLadder::new(DEFAULT_LADDER_KBPS.to_vec())?,
        };
        self.params.validate()?;
        let clients = self
            .clients
            .iter()
            .map(|c| ClientSpec {
                id: c.id,
                join_time: c.join,
                policy: c.policy,
                segments: c.segments,
                params: c.params.apply(&self.params),
                seed: c.seed,
            })
            .collect();
        let scenario = Scenario {
            ladder,
            segment_secs: self.segment_duration,
            horizon: self.horizon,
            seed: self.seed,
            schedule: self.schedule(base_dir)?,
            clients,
            baseline: self.baseline,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 60.0

[capacity]
breakpoints = [[0.0, 3000.0]]

[[clients]]
id = 1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL, Path::new("t")).unwrap();
        let s = cfg.to_scenario(Path::new(".")).unwrap();
        assert_eq!(s.segment_secs, 2.0);
        assert_eq!(s.ladder, BitrateLadder::default());
        assert_eq!(s.clients[0].policy, PolicyKind::Tfdash);
        assert_eq!(s.clients[0].params, PolicyParams::default());
    }

    #[test]
    fn client_overrides_layer_on_scenario_params() {
        let text = format!("{MINIMAL}\n[clients.params]\nalpha = 1.5\n");
        let text = text.replace("horizon = 60.0", "horizon = 60.0\n[params]\nq_low = 4.0\n");
        let cfg = ScenarioConfig::from_toml_str(&text, Path::new("t")).unwrap();
        let s = cfg.to_scenario(Path::new(".")).unwrap();
        assert_eq!(s.clients[0].params.alpha, 1.5);
        assert_eq!(s.clients[0].params.q_low, 4.0);
    }

    #[test]
    fn alpha_out_of_range_names_field() {
        let text = format!("{MINIMAL}\n[clients.params]\nalpha = 3.0\n");
        let cfg = ScenarioConfig::from_toml_str(&text, Path::new("t")).unwrap();
        match cfg.to_scenario(Path::new(".")) {
            Err(Error::Validation { field, .. }) => assert!(field.contains("alpha")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_policy_are_parse_errors() {
        let bad = MINIMAL.replace("id = 1", "id = 1\ncolour = 3");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&bad, Path::new("t")),
            Err(Error::ConfigParse { .. })
        ));
        let bad = MINIMAL.replace("id = 1", "id = 1\npolicy = \"panda\"");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&bad, Path::new("t")),
            Err(Error::ConfigParse { .. })
        ));
    }

    #[test]
    fn bundled_scenarios_parse_validate_and_round_trip() {
        for (name, _) in BUNDLED {
            let cfg = ScenarioConfig::bundled(name).unwrap().unwrap();
            let scenario = cfg.to_scenario(Path::new(".")).unwrap();
            let text = cfg.to_toml_string().unwrap();
            let again = ScenarioConfig::from_toml_str(&text, Path::new(name)).unwrap();
            assert_eq!(again, cfg, "{name}");
            assert_eq!(again.to_scenario(Path::new(".")).unwrap(), scenario, "{name}");
        }
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn capacity_needs_exactly_one_source() {
        let both = MINIMAL.replace(
            "breakpoints = [[0.0, 3000.0]]",
            "breakpoints = [[0.0, 3000.0]]\ntrace = \"x.csv\"",
        );
        let cfg = ScenarioConfig::from_toml_str(&both, Path::new("t")).unwrap();
        assert!(matches!(cfg.to_scenario(Path::new(".")), Err(Error::Validation { .. })));
    }
}
