//! Scenario file: JSON document describing the team, the map and all
//! parameters of a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Vec2};
use crate::localization::AgentKind;
use crate::planner::grid::OccupancyGrid;
use crate::planner::{FovSpec, PlannerConfig};
use crate::pointcloud::lidar::LidarModel;
use crate::sensors::NoiseConfig;
use crate::sim::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    Ugv,
    Mav,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub kind: RobotKind,
    pub position: Vec2<f64>,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: f64,
    pub origin: Vec2<f64>,
    /// Run-length-encoded rows, top row first.
    pub rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Ground transceiver (index into `transceivers`) stops ranging.
    RemoveTransceiver { transceiver: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn default_dt() -> f64 {
    0.1
}
fn default_gain() -> f64 {
    0.3
}
fn default_true() -> bool {
    true
}
fn default_r_mav() -> f64 {
    0.25
}
fn default_flight_altitude() -> f64 {
    1.5
}
fn default_climb_rate() -> f64 {
    0.5
}
fn default_sensor_height() -> f64 {
    0.5
}
fn default_altitude_threshold() -> f64 {
    1.0
}
fn default_dtheta() -> f64 {
    1f64.to_radians()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub robots: Vec<RobotSpec>,
    /// Static ground UWB transceivers.
    #[serde(default)]
    pub transceivers: Vec<Vec2<f64>>,
    /// MAV body radius used for lidar detection.
    #[serde(default = "default_r_mav")]
    pub r_mav: f64,
    #[serde(default)]
    pub noise: NoiseConfig<f64>,
    #[serde(default = "default_gain")]
    pub range_gain: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub lidar: LidarModel<f64>,
    #[serde(default = "default_sensor_height")]
    pub sensor_height: f64,
    #[serde(default = "default_flight_altitude")]
    pub flight_altitude: f64,
    #[serde(default = "default_climb_rate")]
    pub climb_rate: f64,
    #[serde(default = "default_altitude_threshold")]
    pub altitude_threshold: f64,
    /// Orientation sweep step, radians.
    #[serde(default = "default_dtheta")]
    pub orientation_step: f64,
    #[serde(default)]
    pub planner: PlannerConfig<f64>,
    #[serde(default = "default_true")]
    pub planning: bool,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    /// Parses and validates a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scn: Scenario = serde_json::from_str(text).map_err(|e| SimError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    fn invariant(field: &str, message: impl Into<String>) -> SimError {
        SimError::Invariant { field: field.to_string(), message: message.into() }
    }

    pub fn n_ugv(&self) -> usize {
        self.robots.iter().filter(|r| r.kind == RobotKind::Ugv).count()
    }

    pub fn n_mav(&self) -> usize {
        self.robots.iter().filter(|r| r.kind == RobotKind::Mav).count()
    }

    /// Vertex count of the ranging graph: robots plus transceivers.
    pub fn n_vertices(&self) -> usize {
        self.robots.len() + self.transceivers.len()
    }

    /// Robots in vertex order: UGVs, then MAVs, each in file order.
    pub fn ordered_robots(&self) -> Vec<&RobotSpec> {
        let ugvs = self.robots.iter().filter(|r| r.kind == RobotKind::Ugv);
        let mavs = self.robots.iter().filter(|r| r.kind == RobotKind::Mav);
        ugvs.chain(mavs).collect()
    }

    pub fn kinds(&self) -> Vec<AgentKind> {
        let mut out: Vec<AgentKind> = self
            .ordered_robots()
            .iter()
            .map(|r| match r.kind {
                RobotKind::Ugv => AgentKind::Ugv,
                RobotKind::Mav => AgentKind::Mav,
            })
            .collect();
        out.extend(std::iter::repeat_n(AgentKind::Anchor, self.transceivers.len()));
        out
    }

    pub fn build_grid(&self) -> Result<OccupancyGrid<f64>, SimError> {
        OccupancyGrid::from_rle(&self.grid.rows, self.grid.resolution, self.grid.origin)
            .map_err(|e| Self::invariant("grid", e.to_string()))
    }

    /// Horizontal sensing wedge of a UGV's lidar.
    pub fn lidar_fov(&self) -> FovSpec<f64> {
        FovSpec {
            horizontal_fov: self.lidar.horizontal_fov,
            vertical_fov: self.lidar.vertical_fov,
            max_range: self.lidar.max_range,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.dt) {
            return Err(Self::invariant("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !finite_pos(self.duration) {
            return Err(Self::invariant("duration", format!("duration must be positive, got {}", self.duration)));
        }
        let (n_ugv, n_mav) = (self.n_ugv(), self.n_mav());
        if n_ugv == 0 {
            return Err(Self::invariant("robots", "at least one UGV is required (agent 0 is a UGV)"));
        }
        if self.n_vertices() < 2 {
            return Err(Self::invariant("robots", "at least two ranging agents are required"));
        }
        if self.planning && n_mav < n_ugv {
            return Err(Self::invariant(
                "robots",
                format!("planning requires at least as many MAVs as UGVs (assumption (i): M >= N_MAV >= N_UGV); got {n_mav} MAVs, {n_ugv} UGVs"),
            ));
        }
        for (k, r) in self.robots.iter().enumerate() {
            if !r.position.is_finite() || !r.yaw.is_finite() {
                return Err(Self::invariant(&format!("robots[{k}]"), "pose must be finite"));
            }
        }
        if self.transceivers.iter().any(|t| !t.is_finite()) {
            return Err(Self::invariant("transceivers", "positions must be finite"));
        }
        self.noise.validate().map_err(|e| Self::invariant("noise", e.to_string()))?;
        if !(self.range_gain > 0.0 && self.range_gain <= 1.0) {
            return Err(Self::invariant("range_gain", "gain must lie in (0, 1]"));
        }
        for (field, v) in [
            ("r_mav", self.r_mav),
            ("flight_altitude", self.flight_altitude),
            ("climb_rate", self.climb_rate),
            ("altitude_threshold", self.altitude_threshold),
            ("orientation_step", self.orientation_step),
        ] {
            if !finite_pos(v) {
                return Err(Self::invariant(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.sensor_height >= 0.0 && self.sensor_height.is_finite()) {
            return Err(Self::invariant("sensor_height", "must be non-negative"));
        }
        self.planner.validate().map_err(|e| Self::invariant("planner", e.to_string()))?;
        self.lidar_fov().validate().map_err(|e| Self::invariant("lidar", e.to_string()))?;
        let grid = self.build_grid()?;
        let ugvs: Vec<Pose2<f64>> = self
            .ordered_robots()
            .iter()
            .filter(|r| r.kind == RobotKind::Ugv)
            .map(|r| Pose2 { position: r.position, yaw: r.yaw })
            .collect();
        for (k, u) in ugvs.iter().enumerate() {
            if grid.cell_of(u.position).is_none() || grid.is_obstacle_at(u.position) {
                return Err(Self::invariant(&format!("ugv {k}"), "UGV must stand on a free cell of the grid"));
            }
        }
        let fov = self.lidar_fov();
        for (k, r) in self.robots.iter().enumerate().filter(|(_, r)| r.kind == RobotKind::Mav) {
            if !ugvs.iter().any(|u| fov.contains(u, r.position)) {
                return Err(Self::invariant(
                    &format!("robots[{k}]"),
                    "each MAV must start inside some UGV's field of view",
                ));
            }
        }
        for (k, e) in self.events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Self::invariant(&format!("events[{k}]"), "event time must be non-negative"));
            }
            match e.kind {
                EventKind::RemoveTransceiver { transceiver } if transceiver >= self.transceivers.len() => {
                    return Err(Self::invariant(&format!("events[{k}]"), format!("no transceiver {transceiver}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}
