use std::collections::BTreeSet;

use crate::geometry::{Pose2, Pose3, Vec2, Vec3};
use crate::localization::{
    align_to, estimate_graph_orientation, full_poses, rmse, track_triangulation, AgentKind, GateStatus,
    LocalizationGate, OrientationEstimate, OrientationOptions, PlanarEstimate, SensingGraph, SolverOptions,
    UgvObservation,
};
use crate::planner::schedule::{circular_mean, spread};
use crate::planner::shadows::{blind_spot_neighborhoods, drop_inside_hull};
use crate::planner::{plan, Neighborhood, Plan, PlannerError};
use crate::scalar::wrap_pi;
use crate::sensors::{
    fuse_altitude, project_range, simulate_altitude, simulate_uwb, simulate_vio, NoiseConfig, RangeMeasurement,
    RangeSmoother, VioDelta,
};
use crate::sim::scenario::{EventKind, Scenario};
use crate::sim::{AgentState, FailureKind, MavProfile, Phase, RangeRecord, RunStatus, SimError, StepRecord, Trace};

/// MAV bodies appear in lidar returns slightly smaller than the detection
/// radius.
const BODY_SCALE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub neighborhoods: Vec<Neighborhood<f64>>,
    pub plan: Plan<f64>,
}

fn failure(stage: &str, err: &PlannerError) -> RunStatus {
    let kind = match err {
        PlannerError::Infeasible(_) => FailureKind::Infeasible,
        PlannerError::Precondition(_) | PlannerError::InvalidScenario(_) => FailureKind::Invariant,
        _ => FailureKind::Solver,
    };
    RunStatus::Failed { stage: stage.into(), kind, message: err.to_string() }
}

/// Blind spots seen by all UGVs from their start poses, minus those inside
/// the UGVs' convex hull, renumbered from zero.
fn scan_blind_spots(scn: &Scenario, ugvs: &[Pose2<f64>]) -> Result<Vec<Neighborhood<f64>>, PlannerError> {
    let grid = scn.build_grid().map_err(|e| PlannerError::InvalidGrid(e.to_string()))?;
    let fov = scn.lidar_fov();
    let mut all = Vec::new();
    for u in ugvs {
        let found = blind_spot_neighborhoods(&grid, u, &fov, all.len())?;
        all.extend(found);
    }
    let positions: Vec<Vec2<f64>> = ugvs.iter().map(|u| u.position).collect();
    let mut kept = drop_inside_hull(all, &positions);
    for (k, n) in kept.iter_mut().enumerate() {
        n.id = k;
    }
    Ok(kept)
}

fn start_poses(scn: &Scenario) -> (Vec<Pose2<f64>>, Vec<Pose2<f64>>) {
    let robots = scn.ordered_robots();
    let n_ugv = scn.n_ugv();
    let pose = |r: &&crate::sim::RobotSpec| Pose2 { position: r.position, yaw: r.yaw };
    (robots[..n_ugv].iter().map(pose).collect(), robots[n_ugv..].iter().map(pose).collect())
}

/// Blind-spot extraction and planning from the true start poses, without
/// flying.
pub fn plan_only(scn: &Scenario) -> Result<PlanOutcome, SimError> {
    let (ugvs, mavs) = start_poses(scn);
    let neighborhoods = scan_blind_spots(scn, &ugvs)?;
    let plan = plan(&scn.planner, &ugvs, &mavs, &neighborhoods)?;
    Ok(PlanOutcome { neighborhoods, plan })
}

struct World<'a> {
    scn: &'a Scenario,
    kinds: Vec<AgentKind>,
    n_ugv: usize,
    n_robots: usize,
    noise: NoiseConfig<f64>,
    truth: Vec<Pose3<f64>>,
}

impl World<'_> {
    fn mavs(&self) -> std::ops::Range<usize> {
        self.n_ugv..self.n_robots
    }

    fn airborne(&self) -> bool {
        self.mavs().all(|m| self.truth[m].position.z >= self.scn.flight_altitude - 1e-9)
    }
}

/// Runs the scenario to completion. Module errors end the mission but not the
/// run: the trace keeps one record per step and carries a terminal status.
pub fn run(scn: &Scenario) -> Trace {
    let n = scn.n_vertices();
    let n_ugv = scn.n_ugv();
    let n_robots = scn.robots.len();
    let mut truth: Vec<Pose3<f64>> =
        scn.ordered_robots().iter().map(|r| Pose3 { position: r.position.extend(0.0), yaw: r.yaw }).collect();
    truth.extend(scn.transceivers.iter().map(|t| Pose3 { position: t.extend(0.0), yaw: 0.0 }));
    let mut w = World {
        scn,
        kinds: scn.kinds(),
        n_ugv,
        n_robots,
        noise: NoiseConfig { seed: scn.seed, ..scn.noise },
        truth,
    };
    let grid = scn.build_grid().ok();
    let (ugv_starts, _) = start_poses(scn);

    let mut status = RunStatus::Completed;
    let neighborhoods = match scan_blind_spots(scn, &ugv_starts) {
        Ok(nb) => nb,
        Err(e) => {
            status = failure("scan", &e);
            Vec::new()
        }
    };

    let steps = (scn.duration / scn.dt - 1e-9).ceil().max(1.0) as usize;
    let orient_every = ((1.0 / scn.dt).round() as usize).max(1);
    let solver = SolverOptions::default();
    let orient_opts =
        OrientationOptions { r_mav: scn.r_mav, dtheta: scn.orientation_step, ..OrientationOptions::default() };

    let mut smoother = RangeSmoother::new(scn.range_gain).expect("gain validated");
    let mut gate = LocalizationGate::default();
    let mut yaw_est: Vec<f64> = w.truth.iter().map(|p| p.yaw).collect();
    let mut altitudes = vec![0.0; n];
    let mut estimate: Option<PlanarEstimate<f64>> = None;
    let mut orientation: Option<OrientationEstimate<f64>> = None;
    let mut world_est: Option<Vec<AgentState>> = None;
    let mut the_plan: Option<Plan<f64>> = None;
    let mut flight_start: Option<f64> = None;
    let mut flight_offsets: Vec<Vec2<f64>> = Vec::new();
    let mut takeoff = false;
    let mut orient_attempts = 0usize;
    let mut removed: BTreeSet<usize> = BTreeSet::new();
    let mut applied = vec![false; scn.events.len()];
    let mut records = Vec::with_capacity(steps);

    for k in 0..steps {
        let t = k as f64 * scn.dt;
        for (e, done) in scn.events.iter().zip(applied.iter_mut()) {
            if !*done && e.time <= t + 1e-9 {
                *done = true;
                match e.kind {
                    EventKind::RemoveTransceiver { transceiver } => {
                        log::info!("t={t:.2}: transceiver {transceiver} removed");
                        removed.insert(n_robots + transceiver);
                    }
                }
            }
        }

        // Ground-truth motion over the last interval.
        let prev = w.truth.clone();
        if k > 0 {
            advance_truth(&mut w, takeoff, the_plan.as_ref(), flight_start, &flight_offsets, t);
        }

        // Egomotion and altitude.
        let mut vio: Vec<Option<VioDelta<f64>>> = vec![None; n];
        if k > 0 {
            for i in 0..n {
                let d = if i < n_robots {
                    simulate_vio(i, &prev[i], &w.truth[i], scn.dt, &w.noise, k as u64).ok()
                } else {
                    Some(VioDelta { agent: i, yaw_delta: 0.0, translation: Vec3::zero(), dt: scn.dt })
                };
                if let Some(d) = &d {
                    yaw_est[i] = wrap_pi(yaw_est[i] + d.yaw_delta);
                }
                vio[i] = d;
            }
        }
        for m in w.mavs() {
            let r = simulate_altitude(m, w.truth[m].position.z, &w.noise, k as u64);
            altitudes[m] = fuse_altitude(&r, scn.altitude_threshold);
        }

        // Ranging.
        let mut range_records = Vec::new();
        let mut planar = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if removed.contains(&i) || removed.contains(&j) {
                    continue;
                }
                let meas = simulate_uwb((i, j), w.truth[i].position, w.truth[j].position, &w.noise, k as u64, t);
                let rel = world_est.as_ref().map(|e| e[j].position - e[i].position);
                let smoothed = smoother.smooth(&meas, vio[i].as_ref(), vio[j].as_ref(), rel);
                let flat = project_range(smoothed, altitudes[i] - altitudes[j]);
                range_records.push(RangeRecord { i, j, raw: meas.range, smoothed, planar: flat });
                planar.push(RangeMeasurement { edge: (i, j), range: flat, timestamp: t });
            }
        }

        // Gate and multilateration.
        let mut converged = false;
        if matches!(status, RunStatus::Completed) {
            match gate.step(n, &planar, estimate.as_ref()) {
                Ok(gs) => {
                    if gs == GateStatus::Localizing || estimate.is_some() {
                        match track_triangulation(n, &planar, estimate.as_ref(), &solver) {
                            Ok(e) => {
                                converged = e.converged;
                                estimate = Some(e);
                            }
                            Err(err) => log::warn!("t={t:.2}: multilateration skipped: {err}"),
                        }
                    }
                }
                Err(err) => {
                    status = RunStatus::Failed { stage: "gate".into(), kind: FailureKind::Solver, message: err.to_string() };
                }
            }
        }
        if !takeoff && gate.status == GateStatus::Localizing {
            takeoff = true;
        }

        // Orientation recovery once airborne.
        if orientation.is_none() && takeoff && w.airborne() && matches!(status, RunStatus::Completed) {
            if let (Some(est), Some(grid)) = (&estimate, &grid) {
                if orient_attempts.is_multiple_of(orient_every) {
                    orientation = recover_orientation(&w, grid, est, &yaw_est, &altitudes, &orient_opts);
                    if let Some(o) = &orientation {
                        if o.reflection_ambiguous {
                            log::warn!("t={t:.2}: orientation accepted but mirror image scores within margin");
                        }
                    }
                }
                orient_attempts += 1;
            }
        }

        world_est = match (&estimate, &orientation) {
            (Some(est), Some(o)) => Some(world_estimate(&w, est, o, world_est.as_deref(), &vio, &altitudes, &yaw_est)),
            _ => None,
        };

        // Planning, once, from the estimated poses.
        if scn.planning && the_plan.is_none() && matches!(status, RunStatus::Completed) {
            if let Some(est) = &world_est {
                let pose = |i: usize| Pose2 { position: est[i].position.xy(), yaw: est[i].yaw };
                let ugvs: Vec<Pose2<f64>> = (0..n_ugv).map(pose).collect();
                let mavs: Vec<Pose2<f64>> = w.mavs().map(pose).collect();
                match plan(&scn.planner, &ugvs, &mavs, &neighborhoods) {
                    Ok(p) => {
                        flight_offsets =
                            w.mavs().zip(&mavs).map(|(m, s)| w.truth[m].position.xy() - s.position).collect();
                        flight_start = Some(t);
                        the_plan = Some(p);
                    }
                    Err(e) => status = failure("plan", &e),
                }
            }
        }

        let rmse_now = estimate.as_ref().map(|est| {
            let active: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
            let e: Vec<Vec2<f64>> = active.iter().map(|&i| est.positions[i]).collect();
            let tr: Vec<Vec2<f64>> = active.iter().map(|&i| w.truth[i].position.xy()).collect();
            rmse(&align_to(&e, &tr, true), &tr)
        });
        let separation = the_plan.as_ref().map(|p| {
            (0..n_ugv)
                .map(|u| {
                    let b: Vec<f64> = w
                        .mavs()
                        .enumerate()
                        .filter(|(mi, _)| p.assignment[*mi] == u)
                        .map(|(_, m)| (w.truth[m].position.xy() - w.truth[u].position.xy()).angle())
                        .collect();
                    spread(&b)
                })
                .fold(0.0, f64::max)
        });
        let flying = flight_time(&the_plan, flight_start, t);
        let phase = if !takeoff {
            Phase::Gating
        } else if !w.airborne() {
            Phase::Climbing
        } else if orientation.is_none() {
            Phase::Orienting
        } else if flying.is_some() {
            Phase::Flying
        } else {
            Phase::Hovering
        };
        let mavs = w
            .mavs()
            .enumerate()
            .map(|(mi, _)| {
                let sample = the_plan.as_ref().zip(flying).and_then(|(p, tf)| {
                    let tr = &p.trajectories[mi];
                    let idx = tr.samples.partition_point(|s| s.t <= tf + 1e-9).saturating_sub(1);
                    tr.samples.get(idx).copied()
                });
                MavProfile {
                    mav: mi,
                    speed: sample.map_or(0.0, |s| s.speed),
                    acceleration: sample.map_or(0.0, |s| s.acceleration),
                }
            })
            .collect();

        records.push(StepRecord {
            step: k,
            t,
            phase,
            gate: gate.status,
            degraded: estimate.is_some() && (gate.status != GateStatus::Localizing || !converged),
            lambda2: gate.last_report.laplacian_lambda2,
            rigidity_eigenvalue: gate.last_report.rigidity_eigenvalue,
            truth: w.truth.iter().map(|p| AgentState { position: p.position, yaw: p.yaw }).collect(),
            planar_estimate: estimate.as_ref().map(|e| e.positions.clone()),
            estimate: world_est.clone(),
            rmse: rmse_now,
            separation,
            mavs,
            ranges: range_records,
        });
    }

    if matches!(status, RunStatus::Completed) {
        let unfinished = if !takeoff {
            Some("ranging graph never became rigid")
        } else if scn.planning && orientation.is_none() {
            Some("orientation was not recovered")
        } else if scn.planning && the_plan.is_none() {
            Some("no plan was computed")
        } else if let (Some(p), Some(t0)) = (&the_plan, flight_start) {
            let end = p.trajectories.iter().map(|tr| tr.duration()).fold(0.0, f64::max);
            (t0 + end > (steps - 1) as f64 * scn.dt + 1e-9).then_some("coverage plan did not finish within the run")
        } else {
            None
        };
        if let Some(reason) = unfinished {
            status = RunStatus::Incomplete { reason: reason.into() };
        }
    }

    Trace {
        name: scn.name.clone(),
        seed: scn.seed,
        dt: scn.dt,
        kinds: w.kinds,
        neighborhoods,
        orientation,
        plan: the_plan,
        flight_start,
        records,
        status,
    }
}

/// World-frame poses. The first estimate after orientation recovery is
/// placed by the recovered orientation with agent 0 at its known start; later
/// ones follow by a rigid fit onto the previous world estimate propagated by
/// VIO, since the gauge frame turns whenever agent 1 moves.
fn world_estimate(
    w: &World<'_>,
    est: &PlanarEstimate<f64>,
    o: &OrientationEstimate<f64>,
    prev: Option<&[AgentState]>,
    vio: &[Option<VioDelta<f64>>],
    altitudes: &[f64],
    yaw_est: &[f64],
) -> Vec<AgentState> {
    let xy: Vec<Vec2<f64>> = match prev {
        Some(prev) => {
            let predicted: Vec<Vec2<f64>> = prev
                .iter()
                .zip(vio)
                .map(|(s, d)| s.position.xy() + d.map_or(Vec2::zero(), |d| d.translation.xy()))
                .collect();
            let pts: Vec<Vec2<f64>> =
                est.positions.iter().map(|&p| if o.orientation.reflected { p.mirror_x() } else { p }).collect();
            align_to(&pts, &predicted, false)
        }
        None => {
            let alts: Vec<Option<f64>> = altitudes.iter().map(|&h| Some(h)).collect();
            let origin = w.truth[0].position.xy();
            full_poses(est, &o.orientation, &w.kinds, &alts, yaw_est).iter().map(|p| p.position.xy() + origin).collect()
        }
    };
    xy.iter()
        .enumerate()
        .map(|(i, &p)| {
            let z = if w.kinds[i] == AgentKind::Mav { altitudes[i] } else { 0.0 };
            AgentState { position: p.extend(z), yaw: yaw_est[i] }
        })
        .collect()
}

/// Time into the plan while it is still being flown.
fn flight_time(p: &Option<Plan<f64>>, start: Option<f64>, t: f64) -> Option<f64> {
    let (p, t0) = (p.as_ref()?, start?);
    let end = p.trajectories.iter().map(|tr| tr.duration()).fold(0.0, f64::max);
    let tf = t - t0;
    (tf >= 0.0 && tf <= end + 1e-9).then_some(tf)
}

fn advance_truth(
    w: &mut World<'_>,
    takeoff: bool,
    the_plan: Option<&Plan<f64>>,
    flight_start: Option<f64>,
    offsets: &[Vec2<f64>],
    t: f64,
) {
    let scn = w.scn;
    let mavs = w.mavs();
    for (mi, m) in mavs.clone().enumerate() {
        let pose = &mut w.truth[m];
        match (the_plan, flight_start) {
            (Some(p), Some(t0)) => {
                let tr = &p.trajectories[mi];
                let tf = t - t0;
                let xy = tr.position_at(tf) + offsets[mi];
                let idx = tr.samples.partition_point(|s| s.t <= tf + 1e-9).saturating_sub(1);
                if let Some(s) = tr.samples.get(idx) {
                    pose.yaw = wrap_pi(s.heading);
                }
                pose.position = xy.extend(scn.flight_altitude);
            }
            _ if takeoff => {
                pose.position.z = (pose.position.z + scn.climb_rate * scn.dt).min(scn.flight_altitude);
            }
            _ => {}
        }
    }
    // Trackers turn toward the mean bearing of their MAVs at bounded rate.
    if let Some(p) = the_plan {
        let max_turn = scn.planner.yaw_rate_max * scn.dt;
        for u in 0..w.n_ugv {
            let b: Vec<f64> = mavs
                .clone()
                .enumerate()
                .filter(|(mi, _)| p.assignment[*mi] == u)
                .map(|(_, m)| (w.truth[m].position.xy() - w.truth[u].position.xy()).angle())
                .collect();
            if b.is_empty() {
                continue;
            }
            let err = wrap_pi(circular_mean(&b) - w.truth[u].yaw);
            w.truth[u].yaw = wrap_pi(w.truth[u].yaw + err.clamp(-max_turn, max_turn));
        }
    }
}

fn recover_orientation(
    w: &World<'_>,
    grid: &crate::planner::grid::OccupancyGrid<f64>,
    est: &PlanarEstimate<f64>,
    yaw_est: &[f64],
    altitudes: &[f64],
    opts: &OrientationOptions<f64>,
) -> Option<OrientationEstimate<f64>> {
    let scn = w.scn;
    let centers: Vec<Vec3<f64>> = w.mavs().map(|m| w.truth[m].position).collect();
    let mut edges = Vec::new();
    let mut indices = Vec::new();
    for u in 0..w.n_ugv {
        let pose = Pose3 { position: w.truth[u].position.xy().extend(scn.sensor_height), yaw: w.truth[u].yaw };
        for m in w.mavs() {
            if scn.lidar.sees(&pose, grid, w.truth[m].position) {
                edges.push((u, m));
            }
        }
        let cloud = scn.lidar.scan(u, &pose, grid, &centers, BODY_SCALE * scn.r_mav);
        indices.push((u, cloud.build_index()));
    }
    let sensing = SensingGraph::new(&w.kinds, edges).ok()?;
    let observations: Vec<UgvObservation<'_, f64>> = indices
        .iter()
        .map(|(u, idx)| UgvObservation { ugv: *u, index: idx, sensor_yaw: yaw_est[*u], sensor_height: scn.sensor_height })
        .collect();
    match estimate_graph_orientation(est, &observations, &sensing, altitudes, opts) {
        Ok(o) => Some(o),
        Err(e) => {
            log::info!("orientation not accepted yet: {e}");
            None
        }
    }
}
