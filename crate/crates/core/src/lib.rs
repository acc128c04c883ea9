//! Relative localization and coverage planning for mixed UGV+MAV teams.
//!
//! Ground robots carry a limited-FoV lidar and track aerial robots while the
//! whole team ranges over UWB. The crate covers the graph-rigidity gate that
//! decides when ranging alone fixes the formation, the multilateration and
//! orientation recovery that turn ranges into poses, and a Dubins multiple-TSP
//! planner that keeps every MAV inside its tracker's field of view.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, and [`f32`] repeats them for `f32`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod planner;
pub mod pointcloud;
pub mod rigidity;
pub mod scalar;
pub mod sensors;
pub mod sim;

pub use localization::{AgentKind, GateStatus, LocalizationError};
pub use rigidity::{Graph, RigidityError};

pub type Vec2 = geometry::Vec2<f64>;
pub type Vec3 = geometry::Vec3<f64>;
pub type Pose2 = geometry::Pose2<f64>;
pub type Pose3 = geometry::Pose3<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Framework = rigidity::Framework<f64>;
pub type RigidityReport = rigidity::RigidityReport<f64>;
pub type NoiseConfig = sensors::NoiseConfig<f64>;
pub type RangeMeasurement = sensors::RangeMeasurement<f64>;
pub type VioDelta = sensors::VioDelta<f64>;
pub type AltitudeReading = sensors::AltitudeReading<f64>;
pub type RangeSmoother = sensors::RangeSmoother<f64>;
pub type PointCloud = pointcloud::PointCloud<f64>;
pub type SpatialIndex = pointcloud::SpatialIndex<f64>;
pub type PlanarEstimate = localization::PlanarEstimate<f64>;
pub type LocalizationGate = localization::LocalizationGate<f64>;
pub type FullPose = localization::FullPose<f64>;
pub type OccupancyGrid = planner::grid::OccupancyGrid<f64>;
pub type Neighborhood = planner::Neighborhood<f64>;
pub type FovSpec = planner::FovSpec<f64>;
pub type DubinsPath = planner::dubins::DubinsPath<f64>;
pub type Trajectory = planner::schedule::Trajectory<f64>;

/// Single-precision aliases.
pub mod f32 {
    use crate::{geometry, linalg, localization, planner, pointcloud, rigidity, sensors};

    pub type Vec2 = geometry::Vec2<f32>;
    pub type Vec3 = geometry::Vec3<f32>;
    pub type Pose2 = geometry::Pose2<f32>;
    pub type Pose3 = geometry::Pose3<f32>;
    pub type Matrix = linalg::Matrix<f32>;
    pub type Framework = rigidity::Framework<f32>;
    pub type RigidityReport = rigidity::RigidityReport<f32>;
    pub type NoiseConfig = sensors::NoiseConfig<f32>;
    pub type RangeMeasurement = sensors::RangeMeasurement<f32>;
    pub type PointCloud = pointcloud::PointCloud<f32>;
    pub type SpatialIndex = pointcloud::SpatialIndex<f32>;
    pub type PlanarEstimate = localization::PlanarEstimate<f32>;
    pub type OccupancyGrid = planner::grid::OccupancyGrid<f32>;
    pub type Neighborhood = planner::Neighborhood<f32>;
    pub type DubinsPath = planner::dubins::DubinsPath<f32>;
    pub type Trajectory = planner::schedule::Trajectory<f32>;
}
