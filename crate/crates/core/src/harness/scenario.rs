use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{EavesdropLevel, GuidebookConfig};
use crate::catalog::{Catalog, CatalogError};
use crate::error::EngineError;
use crate::geometry::Point;
use crate::ids::{DeviceId, Millis, WallId};
use crate::protocol::ProtocolConfig;
use crate::simnet::{NetworkConfig, NetworkConfigError};

/// `catalog_ref` value naming the bundled sample catalog.
pub const BUILTIN_SAMPLE: &str = "builtin:sample";

pub const DEVICE_A: &str = "A";
pub const DEVICE_B: &str = "B";

pub fn pair_ids() -> [DeviceId; 2] {
    [DeviceId::new(DEVICE_A), DeviceId::new(DEVICE_B)]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Companion audio arrives over the control channel, at the eavesdrop level.
    #[default]
    Eavesdrop,
    /// No channel; each device hears the other's clip as if through a speaker.
    Openair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Tap { wall_id: WallId, x: f64, y: f64 },
    SetLevel { level: EavesdropLevel },
    SwitchWall { wall_id: WallId },
    StopPersonal,
}

impl Action {
    /// Checks the action's references against `catalog`.
    pub fn check(&self, catalog: &Catalog) -> Result<(), String> {
        match self {
            Action::Tap { wall_id, x, y } => {
                let wall = catalog.wall(wall_id).ok_or_else(|| format!("unknown wall {wall_id}"))?;
                if !wall.in_bounds(Point::new(*x, *y)) {
                    return Err(format!("tap ({x}, {y}) outside wall {wall_id}"));
                }
            }
            Action::SwitchWall { wall_id } => {
                if catalog.wall(wall_id).is_none() {
                    return Err(format!("unknown wall {wall_id}"));
                }
            }
            Action::SetLevel { .. } | Action::StopPersonal => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub at_ms: Millis,
    pub device: DeviceId,
    pub action: Action,
}

impl ScenarioEvent {
    pub fn new(at_ms: Millis, device: &str, action: Action) -> Self {
        Self { at_ms, device: DeviceId::new(device), action }
    }

    pub fn tap(at_ms: Millis, device: &str, wall_id: &str, x: f64, y: f64) -> Self {
        Self::new(at_ms, device, Action::Tap { wall_id: wall_id.into(), x, y })
    }

    pub fn set_level(at_ms: Millis, device: &str, level: EavesdropLevel) -> Self {
        Self::new(at_ms, device, Action::SetLevel { level })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub catalog_ref: String,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub guidebook: GuidebookConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Sorted by `at_ms`; equal times run in file order.
    pub events: Vec<ScenarioEvent>,
    pub end_ms: Millis,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkConfigError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("engine failure: {0}")]
    Engine(#[from] EngineError),
}

fn invalid(reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(reason.into())
}

impl Scenario {
    /// An empty scenario on the ideal channel.
    pub fn new(catalog_ref: impl Into<String>, end_ms: Millis) -> Self {
        Self {
            catalog_ref: catalog_ref.into(),
            network: NetworkConfig::default(),
            protocol: ProtocolConfig::default(),
            guidebook: GuidebookConfig::default(),
            mode: Mode::default(),
            events: Vec::new(),
            end_ms,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), ScenarioError> {
        self.network.validate()?;
        if !self.protocol.is_valid() {
            return Err(invalid("protocol.announce_interval_ms must be positive"));
        }
        if !self.guidebook.is_valid() {
            return Err(invalid(format!("guidebook.quiet_gain {} must lie strictly between 0 and 1", self.guidebook.quiet_gain)));
        }
        if self.end_ms < 0 {
            return Err(invalid("end_ms is negative"));
        }
        let ids = pair_ids();
        let mut last = 0;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.at_ms < last {
                return Err(invalid(format!("events[{i}] at {} ms is out of order", ev.at_ms)));
            }
            last = ev.at_ms;
            if !ids.contains(&ev.device) {
                return Err(invalid(format!("events[{i}]: unknown device {}", ev.device)));
            }
            ev.action.check(catalog).map_err(|e| invalid(format!("events[{i}]: {e}")))?;
        }
        if self.end_ms < last {
            return Err(invalid(format!("end_ms {} precedes the last event at {last}", self.end_ms)));
        }
        Ok(())
    }
}

/// Loads the catalog a scenario refers to. Relative paths resolve against `base_dir`.
pub fn resolve_catalog(catalog_ref: &str, base_dir: &Path) -> Result<Catalog, ScenarioError> {
    if catalog_ref == BUILTIN_SAMPLE {
        return Ok(Catalog::sample());
    }
    let path = base_dir.join(catalog_ref);
    let bytes = std::fs::read(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
    Ok(Catalog::from_json(&bytes)?)
}

/// Reads a scenario file and the catalog it names.
pub fn load_scenario(path: &Path) -> Result<(Scenario, Catalog), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })?;
    let scenario = Scenario::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let catalog = resolve_catalog(&scenario.catalog_ref, base)?;
    scenario.validate(&catalog)?;
    Ok((scenario, catalog))
}
