//! Coverage planning for MAVs that must stay in view of their tracker UGV.
//!
//! Pipeline: shadows on the occupancy grid become disk neighborhoods; MAVs
//! are assigned to UGVs; each UGV's neighborhoods are split into angular arcs,
//! one per MAV; each arc is solved as a Dubins TSP with neighborhoods; finally
//! the tours are time-parametrised so the MAVs' angular spread stays within
//! the UGV's field of view.

pub mod assign;
pub mod dubins;
pub mod grid;
pub mod schedule;
pub mod shadows;
pub mod tspn;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose2, Vec2};
use crate::scalar::Real;

pub use schedule::InfeasibilityReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible schedule: {0}")]
    Infeasible(InfeasibilityReport),
}

/// Disk a tour must touch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood<T> {
    pub id: usize,
    pub center: Vec2<T>,
    pub radius: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSpec<T> {
    /// Full horizontal opening, radians.
    pub horizontal_fov: T,
    /// Full vertical opening, radians.
    pub vertical_fov: T,
    pub max_range: T,
}

impl<T: Real> Default for FovSpec<T> {
    fn default() -> Self {
        Self { horizontal_fov: T::FRAC_PI_2(), vertical_fov: T::lit(25.1f64.to_radians()), max_range: T::lit(30.0) }
    }
}

impl<T: Real> FovSpec<T> {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let h = self.horizontal_fov;
        if !(h > T::zero() && h <= T::TAU()) {
            return Err(PlannerError::InvalidParameter(format!("horizontal FoV must lie in (0, 2pi], got {h}")));
        }
        if !(self.vertical_fov > T::zero()) || !(self.max_range > T::zero()) {
            return Err(PlannerError::InvalidParameter("vertical FoV and range must be positive".into()));
        }
        Ok(())
    }

    /// Whether `p` lies in the horizontal wedge and range of a sensor at `pose`.
    pub fn contains(&self, pose: &Pose2<T>, p: Vec2<T>) -> bool {
        let local = pose.to_local(p);
        local.norm() <= self.max_range && local.angle().abs() <= self.horizontal_fov * T::lit(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig<T> {
    pub turning_radius: T,
    pub v_max: T,
    pub a_max: T,
    pub yaw_rate_max: T,
    pub sample_dt: T,
    /// FoV that bounds the MAVs' angular spread during flight.
    pub fov: FovSpec<T>,
    /// Unconstrained comparison mode: free 2-opt, no FoV or yaw-rate limits.
    pub baseline: bool,
    /// Partitions tried when the balanced one cannot be scheduled.
    pub max_partitions: usize,
}

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            turning_radius: T::one(),
            v_max: T::lit(2.0),
            a_max: T::one(),
            yaw_rate_max: T::one(),
            sample_dt: T::lit(0.05),
            fov: FovSpec::default(),
            baseline: false,
            max_partitions: 64,
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn schedule_options(&self) -> schedule::ScheduleOptions<T> {
        schedule::ScheduleOptions {
            v_max: self.v_max,
            a_max: self.a_max,
            yaw_rate_max: self.yaw_rate_max,
            sample_dt: self.sample_dt,
            constrained: !self.baseline,
            max_duration: None,
        }
    }

    pub fn tspn_options(&self, tracker: Vec2<T>) -> tspn::TspnOptions<T> {
        tspn::TspnOptions {
            rho: self.turning_radius,
            touch_margin: self.v_max * self.sample_dt,
            reordering: if self.baseline { tspn::Reordering::Free } else { tspn::Reordering::SweepPreserving },
            tracker,
            descent_rounds: 3,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.fov.validate()?;
        let positive = [self.turning_radius, self.v_max, self.a_max, self.yaw_rate_max, self.sample_dt];
        if positive.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(PlannerError::InvalidParameter(
                "turning radius, speed, acceleration, yaw rate and sample step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan<T> {
    /// Tracker UGV per MAV.
    pub assignment: Vec<usize>,
    /// Tour per MAV; visits list neighborhood ids in flight order.
    pub tours: Vec<tspn::Tour<T>>,
    /// Trajectory per MAV.
    pub trajectories: Vec<schedule::Trajectory<T>>,
    /// Largest angular spread of any tracker's MAVs over the schedule.
    pub max_separation: T,
}

impl<T: Real> Plan<T> {
    pub fn total_length(&self) -> T {
        self.tours.iter().map(|t| t.length).sum()
    }
}

/// Runs assignment, partition, TSPN and scheduling for every tracker.
pub fn plan<T: Real>(
    cfg: &PlannerConfig<T>,
    ugvs: &[Pose2<T>],
    mav_starts: &[Pose2<T>],
    nbhs: &[Neighborhood<T>],
) -> Result<Plan<T>, PlannerError> {
    cfg.validate()?;
    if let Some(n) = nbhs.iter().find(|n| !(n.radius >= T::zero()) || !n.center.is_finite()) {
        return Err(PlannerError::InvalidParameter(format!("neighborhood {} is malformed", n.id)));
    }
    let ugv_pos: Vec<Vec2<T>> = ugvs.iter().map(|u| u.position).collect();
    let mav_pos: Vec<Vec2<T>> = mav_starts.iter().map(|m| m.position).collect();
    let assignment = assign::assign_mavs_to_ugvs(&mav_pos, &ugv_pos)?;

    let nearest_ugv = |p: Vec2<T>| {
        (0..ugvs.len())
            .min_by(|&a, &b| p.dist(ugv_pos[a]).partial_cmp(&p.dist(ugv_pos[b])).unwrap_or(Ordering::Equal).then(a.cmp(&b)))
            .unwrap_or(0)
    };
    let mut tours: Vec<Option<tspn::Tour<T>>> = vec![None; mav_starts.len()];
    let mut trajectories: Vec<Option<schedule::Trajectory<T>>> = vec![None; mav_starts.len()];
    let mut max_separation = T::zero();
    for (u, ugv) in ugvs.iter().enumerate() {
        let members: Vec<usize> = (0..mav_starts.len()).filter(|&m| assignment[m] == u).collect();
        let group_nbhs: Vec<Neighborhood<T>> = nbhs.iter().copied().filter(|n| nearest_ugv(n.center) == u).collect();
        let starts: Vec<Pose2<T>> = members.iter().map(|&m| mav_starts[m]).collect();
        let (g_tours, g_trajs) = plan_group(cfg, ugv, &members, &starts, &group_nbhs)?;
        let series = schedule::angular_separation_series(&g_trajs, ugv.position, cfg.sample_dt);
        max_separation = series.iter().map(|x| x.1).fold(max_separation, T::max);
        for ((m, t), tr) in members.iter().zip(g_tours).zip(g_trajs) {
            tours[*m] = Some(t);
            trajectories[*m] = Some(tr);
        }
    }
    Ok(Plan {
        assignment,
        tours: tours.into_iter().map(|t| t.expect("every MAV belongs to a group")).collect(),
        trajectories: trajectories.into_iter().map(|t| t.expect("every MAV belongs to a group")).collect(),
        max_separation,
    })
}

type GroupPlan<T> = (Vec<tspn::Tour<T>>, Vec<schedule::Trajectory<T>>);

/// One tracker: tries the balanced partition first; in constrained mode,
/// falls back to other contiguous partitions (cheapest workload first) until
/// one can be scheduled.
fn plan_group<T: Real>(
    cfg: &PlannerConfig<T>,
    ugv: &Pose2<T>,
    members: &[usize],
    starts: &[Pose2<T>],
    nbhs: &[Neighborhood<T>],
) -> Result<GroupPlan<T>, PlannerError> {
    let start_pos: Vec<Vec2<T>> = starts.iter().map(|s| s.position).collect();
    let order = assign::sweep_order(nbhs, &start_pos, ugv);
    let balanced = assign::balance_bounds(&order, assign::initial_bounds(&order, &start_pos), &start_pos);
    let mut candidates = vec![balanced.clone()];
    if !cfg.baseline && members.len() > 1 {
        let mut rest: Vec<(T, Vec<usize>)> = assign::enumerate_bounds(order.sorted.len(), members.len(), 4096)
            .into_iter()
            .filter(|b| *b != balanced)
            .map(|b| (assign::partition_cost(&order, &b, &start_pos), b))
            .collect();
        rest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));
        candidates.extend(rest.into_iter().map(|x| x.1).take(cfg.max_partitions.saturating_sub(1)));
    }
    let topts = cfg.tspn_options(ugv.position);
    let sopts = cfg.schedule_options();
    let mut first_err = None;
    for bounds in candidates {
        let arcs = assign::arcs_from_bounds(&order, &bounds);
        let tours = arcs
            .iter()
            .zip(starts)
            .map(|(arc, &s)| tspn::solve_tspn(arc, s, &topts))
            .collect::<Result<Vec<_>, _>>()?;
        match schedule::schedule_velocities(&tours, members, ugv, cfg.fov.horizontal_fov, &sopts) {
            Ok(trajs) => return Ok((tours, trajs)),
            Err(e @ PlannerError::Infeasible(_)) => {
                log::debug!("partition {bounds:?} infeasible: {e}");
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(first_err.unwrap_or_else(|| PlannerError::Precondition("no partition candidates".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fov_validation() {
        assert!(FovSpec::<f64>::default().validate().is_ok());
        let bad = FovSpec { horizontal_fov: 0.0, ..FovSpec::<f64>::default() };
        assert!(bad.validate().is_err());
        let wide = FovSpec { horizontal_fov: 7.0, ..FovSpec::<f64>::default() };
        assert!(wide.validate().is_err());
    }

    #[test]
    fn small_plan_covers_everything() {
        let ugv = Pose2::new(0.0, 0.0, 0.0);
        let nbhs: Vec<Neighborhood<f64>> = [(-20.0, 8.0), (0.0, 9.0), (20.0, 8.0), (35.0, 10.0)]
            .iter()
            .enumerate()
            .map(|(id, &(deg, r))| Neighborhood { id, center: Vec2::from_polar(r, f64::to_radians(deg)), radius: 1.0 })
            .collect();
        let mavs = [
            Pose2 { position: Vec2::from_polar(2.5, -0.5), yaw: 0.0 },
            Pose2 { position: Vec2::from_polar(2.5, 0.2), yaw: 0.5 },
        ];
        let plan = plan(&PlannerConfig::default(), &[ugv], &mavs, &nbhs).unwrap();
        let mut seen: Vec<usize> = plan.tours.iter().flat_map(|t| t.visits.iter().map(|v| v.neighborhood)).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert!(plan.max_separation <= std::f64::consts::FRAC_PI_2 + 1e-9);
        for (tour, traj) in plan.tours.iter().zip(&plan.trajectories) {
            for v in &tour.visits {
                let n = nbhs[v.neighborhood];
                assert!(traj.samples.iter().any(|s| s.position.dist(n.center) <= n.radius));
            }
        }
    }
}
