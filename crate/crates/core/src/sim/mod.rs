//! Scenario simulation: deterministic discrete-time execution of the whole
//! pipeline, trace recording and metric emission.
//!
//! The simulator works in `f64` throughout; the generic numerical core is
//! instantiated once here.

mod engine;
mod metrics;
pub mod scenario;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{plan_only, run, PlanOutcome};
pub use metrics::{emit_metrics, Summary};
pub use scenario::{Event, EventKind, GridSpec, RobotKind, RobotSpec, Scenario};

use crate::geometry::{Vec2, Vec3};
use crate::localization::{AgentKind, GateStatus, OrientationEstimate};
use crate::planner::{Neighborhood, Plan};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0}")]
    Io(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario field `{field}`: {message}")]
    Invariant { field: String, message: String },
    #[error("planner: {0}")]
    Planner(#[from] crate::planner::PlannerError),
    #[error("empty trace")]
    EmptyTrace,
}

/// Stage of the mission an agent team is in during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// On the ground, waiting for a rigid ranging graph.
    Gating,
    /// MAVs climbing to flight altitude.
    Climbing,
    /// Airborne, recovering the estimate's orientation.
    Orienting,
    /// Executing the coverage plan.
    Flying,
    /// Plan finished, or no plan to fly: MAVs hover.
    Hovering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Violated precondition, e.g. fewer blind spots than MAVs.
    Invariant,
    /// The planner found no admissible schedule.
    Infeasible,
    /// Any other module error.
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The run ended before the mission did (e.g. orientation never accepted).
    Incomplete { reason: String },
    Failed { stage: String, kind: FailureKind, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeRecord {
    pub i: usize,
    pub j: usize,
    pub raw: f64,
    pub smoothed: f64,
    /// Smoothed range projected onto the ground plane.
    pub planar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec3<f64>,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MavProfile {
    pub mav: usize,
    pub speed: f64,
    pub acceleration: f64,
}

/// Everything observed during one simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub phase: Phase,
    pub gate: GateStatus,
    /// Poses published while the gate is not localizing or the solver did
    /// not converge.
    pub degraded: bool,
    pub lambda2: f64,
    pub rigidity_eigenvalue: f64,
    pub truth: Vec<AgentState>,
    /// Gauge-frame planar estimate (agent 0 at the origin, agent 1 on +y).
    pub planar_estimate: Option<Vec<Vec2<f64>>>,
    /// World-frame estimate, once the orientation is known.
    pub estimate: Option<Vec<AgentState>>,
    /// Planar RMSE of the estimate after best rigid alignment to the truth.
    pub rmse: Option<f64>,
    /// Largest bearing spread of any tracker's MAVs, once a plan exists.
    pub separation: Option<f64>,
    pub mavs: Vec<MavProfile>,
    pub ranges: Vec<RangeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub name: String,
    pub seed: u64,
    pub dt: f64,
    pub kinds: Vec<AgentKind>,
    pub neighborhoods: Vec<Neighborhood<f64>>,
    pub orientation: Option<OrientationEstimate<f64>>,
    pub plan: Option<Plan<f64>>,
    /// Time at which the MAVs started flying the plan.
    pub flight_start: Option<f64>,
    pub records: Vec<StepRecord>,
    pub status: RunStatus,
}

impl Trace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serialises")
    }
}
