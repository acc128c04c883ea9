//! Relative localization from planar ranges.
//!
//! The pipeline per time step is: gate on connectivity and infinitesimal
//! rigidity of the measurement graph, solve the gauge-fixed multilateration
//! problem, and (once MAVs are airborne and visible) recover the rotation and
//! reflection that map the gauge frame into the shared orientation frame by
//! sweeping candidate orientations against UGV point clouds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Vec2, Vec3};
use crate::linalg::{solve, symmetric_eigen, Matrix};
use crate::pointcloud::{mav_presence_score, SpatialIndex};
use crate::rigidity::{
    is_connected, normalize_edge, rigidity_report, Edge, Framework, Graph, RigidityError, RigidityReport,
    RigidityTolerances,
};
use crate::scalar::{angle_diff, wrap_2pi, Real};
use crate::sensors::RangeMeasurement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("need at least two agents, got {0}")]
    InsufficientAgents(usize),
    #[error("range between agents 0 and 1 is required to fix the gauge")]
    MissingGaugeRange,
    #[error("range for edge ({0}, {1}) references an unknown agent")]
    UnknownAgent(usize, usize),
    #[error("sensing edge ({0}, {1}) must join a UGV to a MAV")]
    InvalidSensingEdge(usize, usize),
    #[error("sensing graph is empty")]
    EmptySensingGraph,
    #[error("orientation is ambiguous: best score {best}, runner-up {runner_up}")]
    AmbiguousOrientation { best: f64, runner_up: f64 },
    #[error(transparent)]
    Rigidity(#[from] RigidityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ugv,
    Mav,
    /// Static ground UWB transceiver.
    Anchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatus {
    WaitingConnectivity,
    WaitingRigidity,
    Localizing,
}

/// Gauge-fixed planar solution: agent 0 at the origin, agent 1 on `+y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarEstimate<T> {
    pub positions: Vec<Vec2<T>>,
    /// Sum of squared range residuals at the solution.
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub max_iterations: usize,
    /// Converged once the accepted step is shorter than this.
    pub step_tolerance: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { max_iterations: 100, step_tolerance: T::lit(1e-10) }
    }
}

fn range_map<T: Real>(n: usize, ranges: &[RangeMeasurement<T>]) -> Result<BTreeMap<Edge, T>, LocalizationError> {
    let mut map = BTreeMap::new();
    for m in ranges {
        let (i, j) = normalize_edge(m.edge.0, m.edge.1);
        if j >= n || i == j {
            return Err(LocalizationError::UnknownAgent(m.edge.0, m.edge.1));
        }
        map.insert((i, j), m.range);
    }
    Ok(map)
}

/// Graph whose edges are the measured pairs.
pub fn measurement_graph<T: Real>(n: usize, ranges: &[RangeMeasurement<T>]) -> Result<Graph, LocalizationError> {
    Ok(Graph::new(n, range_map(n, ranges)?.into_keys())?)
}

/// Classical multidimensional scaling of the shortest-path-completed distance
/// matrix. Unreachable pairs get twice the largest finite distance.
pub fn mds_embedding<T: Real>(n: usize, ranges: &BTreeMap<Edge, T>) -> Vec<Vec2<T>> {
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] = if i == j { T::zero() } else { inf };
        }
    }
    for (&(i, j), &r) in ranges {
        d[(i, j)] = r;
        d[(j, i)] = r;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[(i, k)] + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
    let max_finite = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|ij| d[ij])
        .filter(|v| v.is_finite())
        .fold(T::zero(), T::max);
    let fill = if max_finite > T::zero() { max_finite + max_finite } else { T::one() };
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = if d[(i, j)].is_finite() { d[(i, j)] } else { fill };
            b[(i, j)] = v * v;
        }
    }
    // Double centring: B = -1/2 J D2 J.
    let nf = T::lit(n as f64);
    let row_mean: Vec<T> = (0..n).map(|i| (0..n).map(|j| b[(i, j)]).sum::<T>() / nf).collect();
    let total_mean = row_mean.iter().copied().sum::<T>() / nf;
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = -T::lit(0.5) * (b[(i, j)] - row_mean[i] - row_mean[j] + total_mean);
        }
    }
    let eig = symmetric_eigen(&g);
    let coord = |k: usize| -> Vec<T> {
        let lambda = eig.values[k].max(T::zero()).sqrt();
        (0..n).map(|i| eig.vectors[(i, k)] * lambda).collect()
    };
    let x = coord(n - 1);
    let y = if n >= 2 { coord(n - 2) } else { vec![T::zero(); n] };
    (0..n).map(|i| Vec2::new(x[i], y[i])).collect()
}

/// Moves agent 0 to the origin and rotates agent 1 onto the `+y` axis.
fn to_gauge<T: Real>(mut pts: Vec<Vec2<T>>) -> Vec<Vec2<T>> {
    if pts.is_empty() {
        return pts;
    }
    let o = pts[0];
    for p in &mut pts {
        *p = *p - o;
    }
    if pts.len() > 1 && pts[1].norm() > T::epsilon() {
        let rot = T::FRAC_PI_2() - pts[1].angle();
        for p in &mut pts {
            *p = p.rotate(rot);
        }
    }
    pts
}

fn cost<T: Real>(pos: &[Vec2<T>], ranges: &BTreeMap<Edge, T>) -> T {
    ranges.iter().map(|(&(i, j), &z)| (pos[i].dist(pos[j]) - z).powi(2)).sum()
}

/// Levenberg-Marquardt on the range residuals; coordinates whose index is in
/// `fixed` (as `2*agent + axis`) are held constant.
fn levenberg_marquardt<T: Real>(
    mut pos: Vec<Vec2<T>>,
    ranges: &BTreeMap<Edge, T>,
    fixed: &BTreeSet<usize>,
    opts: &SolverOptions<T>,
) -> PlanarEstimate<T> {
    let n = pos.len();
    let free: Vec<usize> = (0..2 * n).filter(|c| !fixed.contains(c)).collect();
    let col_of: BTreeMap<usize, usize> = free.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let m = free.len();
    let mut current = cost(&pos, ranges);
    if m == 0 || ranges.is_empty() {
        return PlanarEstimate { positions: pos, residual: current, converged: true, iterations: 0 };
    }
    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let get = |p: &[Vec2<T>], c: usize| if c.is_multiple_of(2) { p[c / 2].x } else { p[c / 2].y };
    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let mut a = Matrix::zeros(m, m);
        let mut g = vec![T::zero(); m];
        for (&(i, j), &z) in ranges {
            let diff = pos[i] - pos[j];
            let d = diff.norm();
            let r = d - z;
            let (ux, uy) = if d > T::epsilon() { (diff.x / d, diff.y / d) } else { (T::zero(), T::zero()) };
            let entries = [(2 * i, ux), (2 * i + 1, uy), (2 * j, -ux), (2 * j + 1, -uy)];
            let cols: Vec<(usize, T)> =
                entries.iter().filter_map(|&(c, v)| col_of.get(&c).map(|&k| (k, v))).collect();
            for &(k, v) in &cols {
                g[k] += v * r;
                for &(l, w) in &cols {
                    a[(k, l)] += v * w;
                }
            }
        }
        let diag_max = (0..m).map(|k| a[(k, k)]).fold(T::zero(), T::max).max(T::one());
        loop {
            let mut damped = a.clone();
            for k in 0..m {
                damped[(k, k)] += lambda * (a[(k, k)] + T::lit(1e-9) * diag_max);
            }
            let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
            let Some(step) = solve(&damped, &rhs) else {
                lambda *= T::lit(10.0);
                if lambda > T::lit(1e16) {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let mut trial = pos.clone();
            for (k, &c) in free.iter().enumerate() {
                let v = get(&trial, c) + step[k];
                if c % 2 == 0 {
                    trial[c / 2].x = v;
                } else {
                    trial[c / 2].y = v;
                }
            }
            let trial_cost = cost(&trial, ranges);
            let step_norm = step.iter().map(|&s| s * s).sum::<T>().sqrt();
            if trial_cost <= current {
                pos = trial;
                current = trial_cost;
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                if step_norm < opts.step_tolerance {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if step_norm < opts.step_tolerance {
                // No further decrease available at working precision.
                converged = true;
                break 'outer;
            }
            lambda *= T::lit(4.0);
            if lambda > T::lit(1e16) {
                converged = true;
                break 'outer;
            }
        }
    }
    PlanarEstimate { positions: pos, residual: current, converged, iterations }
}

/// Free-gauge embedding that best fits the ranges (MDS then refinement),
/// expressed in the gauge frame when agents 0 and 1 are distinct.
pub fn embed_ranges<T: Real>(n: usize, ranges: &[RangeMeasurement<T>]) -> Result<Vec<Vec2<T>>, LocalizationError> {
    let map = range_map(n, ranges)?;
    let init = mds_embedding(n, &map);
    let est = levenberg_marquardt(init, &map, &BTreeSet::new(), &SolverOptions::default());
    Ok(to_gauge(est.positions))
}

/// Least-squares multilateration with `p0 = (0, 0)` and `p1 = (0, z01)`.
///
/// Starts from `init` when it has the right number of agents, else from the
/// MDS embedding. A run that hits the iteration cap returns the best iterate
/// with `converged = false`.
pub fn minimize_triangulation_error<T: Real>(
    n: usize,
    ranges: &[RangeMeasurement<T>],
    init: Option<&PlanarEstimate<T>>,
    opts: &SolverOptions<T>,
) -> Result<PlanarEstimate<T>, LocalizationError> {
    if n < 2 {
        return Err(LocalizationError::InsufficientAgents(n));
    }
    let map = range_map(n, ranges)?;
    let z01 = *map.get(&(0, 1)).ok_or(LocalizationError::MissingGaugeRange)?;
    let mut start = match init {
        Some(p) if p.positions.len() == n && p.positions.iter().all(|q| q.is_finite()) => p.positions.clone(),
        _ => to_gauge(mds_embedding(n, &map)),
    };
    start[0] = Vec2::zero();
    start[1] = Vec2::new(T::zero(), z01);
    let fixed: BTreeSet<usize> = [0, 1, 2, 3].into_iter().collect();
    Ok(levenberg_marquardt(start, &map, &fixed, opts))
}

/// Multilateration that follows a previous estimate.
///
/// Agents moving between steps can leave the warm start in a flip-type local
/// minimum, so a cold start from the range embedding is also solved, mirrored
/// onto the prior's side of the gauge axis, and the lower residual wins.
pub fn track_triangulation<T: Real>(
    n: usize,
    ranges: &[RangeMeasurement<T>],
    prior: Option<&PlanarEstimate<T>>,
    opts: &SolverOptions<T>,
) -> Result<PlanarEstimate<T>, LocalizationError> {
    let Some(prior) = prior.filter(|p| p.positions.len() == n) else {
        return minimize_triangulation_error(n, ranges, None, opts);
    };
    let warm = minimize_triangulation_error(n, ranges, Some(prior), opts)?;
    let mut cold = minimize_triangulation_error(n, ranges, None, opts)?;
    let dist = |pts: &[Vec2<T>]| pts.iter().zip(&prior.positions).map(|(a, b)| a.dist(*b).powi(2)).sum::<T>();
    let mirrored: Vec<Vec2<T>> = cold.positions.iter().map(|p| p.mirror_x()).collect();
    if dist(&mirrored) < dist(&cold.positions) {
        cold.positions = mirrored;
    }
    let better = cold.residual < warm.residual * (T::one() - T::lit(1e-6)) - T::lit(1e-12);
    Ok(if better { cold } else { warm })
}

/// Connectivity/rigidity gate over the measurement graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationGate<T> {
    pub status: GateStatus,
    pub last_report: RigidityReport<T>,
    pub tolerances: RigidityTolerances<T>,
}

impl<T: Real> Default for LocalizationGate<T> {
    fn default() -> Self {
        Self::new(RigidityTolerances::default())
    }
}

impl<T: Real> LocalizationGate<T> {
    pub fn new(tolerances: RigidityTolerances<T>) -> Self {
        Self {
            status: GateStatus::WaitingConnectivity,
            last_report: RigidityReport {
                laplacian_lambda2: T::zero(),
                rigidity_rank: 0,
                rigidity_eigenvalue: T::zero(),
                is_connected: false,
                is_rigid: false,
                degenerate: true,
            },
            tolerances,
        }
    }

    /// Re-evaluates the gate. Rigidity is checked on the framework built from
    /// `prior` when it covers all agents, else on a fresh embedding of the
    /// ranges. The status follows the current conditions, so it regresses
    /// when connectivity or rigidity is lost.
    pub fn step(
        &mut self,
        n: usize,
        ranges: &[RangeMeasurement<T>],
        prior: Option<&PlanarEstimate<T>>,
    ) -> Result<GateStatus, LocalizationError> {
        let graph = measurement_graph(n, ranges)?;
        let conn = is_connected(&graph, self.tolerances.connectivity)?;
        if !conn.connected {
            self.last_report = RigidityReport {
                laplacian_lambda2: conn.lambda2,
                rigidity_rank: 0,
                rigidity_eigenvalue: T::zero(),
                is_connected: false,
                is_rigid: false,
                degenerate: n < 3,
            };
            self.status = GateStatus::WaitingConnectivity;
            return Ok(self.status);
        }
        let positions = match prior {
            Some(p) if p.positions.len() == n => p.positions.clone(),
            _ => embed_ranges(n, ranges)?,
        };
        let report = rigidity_report(&Framework::new(graph, positions)?, &self.tolerances)?;
        self.status = if report.is_rigid && report.eigenvalue_positive(self.tolerances.eigenvalue) {
            GateStatus::Localizing
        } else {
            GateStatus::WaitingRigidity
        };
        self.last_report = report;
        Ok(self.status)
    }
}

/// Bipartite UGV -> MAV visibility relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingGraph {
    edges: Vec<(usize, usize)>,
}

impl SensingGraph {
    pub fn new(kinds: &[AgentKind], edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, LocalizationError> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (u, m) in edges {
            let ok = kinds.get(u) == Some(&AgentKind::Ugv) && kinds.get(m) == Some(&AgentKind::Mav);
            if !ok {
                return Err(LocalizationError::InvalidSensingEdge(u, m));
            }
            if !out.contains(&(u, m)) {
                out.push((u, m));
            }
        }
        out.sort_unstable();
        Ok(Self { edges: out })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn neighbors(&self, ugv: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == ugv).map(|e| e.1)
    }
}

/// Rotation (and optional mirror across the `y` axis, applied first) taking
/// gauge-frame coordinates into the shared orientation frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation<T> {
    pub theta: T,
    pub reflected: bool,
}

impl<T: Real> Orientation<T> {
    pub fn apply(&self, p: Vec2<T>) -> Vec2<T> {
        let q = if self.reflected { p.mirror_x() } else { p };
        q.rotate(self.theta)
    }

    pub fn invert(&self, p: Vec2<T>) -> Vec2<T> {
        let q = p.rotate(-self.theta);
        if self.reflected {
            q.mirror_x()
        } else {
            q
        }
    }
}

/// One UGV's point cloud as seen by the orientation sweep. Only the sensor's
/// yaw and mounting height (`sensor_pose.position.z`) are used; the planar
/// position comes from the estimate.
#[derive(Debug, Clone, Copy)]
pub struct UgvObservation<'a, T> {
    pub ugv: usize,
    pub index: &'a SpatialIndex<T>,
    pub sensor_yaw: T,
    pub sensor_height: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationOptions<T> {
    pub r_mav: T,
    /// Sweep step, radians.
    pub dtheta: T,
    /// Acceptance: total score must reach this much per sensing edge.
    pub min_score_per_edge: T,
    /// Acceptance: best must beat the runner-up by this relative margin.
    pub min_margin: T,
}

impl<T: Real> Default for OrientationOptions<T> {
    fn default() -> Self {
        Self { r_mav: T::lit(0.25), dtheta: T::lit(1f64.to_radians()), min_score_per_edge: T::lit(0.5), min_margin: T::lit(0.1) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationCandidate<T> {
    pub theta: T,
    pub reflected: bool,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate<T> {
    pub orientation: Orientation<T>,
    pub score: T,
    /// The mirrored realisation scores within the acceptance margin.
    pub reflection_ambiguous: bool,
}

/// Scores every `(theta, reflection)` pair on the grid `k * dtheta`.
/// `score(ugv, local)` rates a MAV candidate expressed in that UGV's sensor
/// frame.
pub fn sweep_orientation<T: Real>(
    est: &PlanarEstimate<T>,
    sensing: &SensingGraph,
    altitudes: &[T],
    observations: &[UgvObservation<'_, T>],
    dtheta: T,
    score: impl Fn(usize, Vec3<T>) -> T,
) -> Vec<OrientationCandidate<T>> {
    let steps = (T::TAU() / dtheta).round().to_usize().unwrap_or(0).max(1);
    let mut out = Vec::with_capacity(2 * steps);
    for reflected in [false, true] {
        for k in 0..steps {
            let o = Orientation { theta: T::lit(k as f64) * dtheta, reflected };
            let mut total = T::zero();
            for obs in observations {
                let ugv_pos = o.apply(est.positions[obs.ugv]);
                for mav in sensing.neighbors(obs.ugv) {
                    let rel = (o.apply(est.positions[mav]) - ugv_pos).rotate(-obs.sensor_yaw);
                    let z = altitudes.get(mav).copied().unwrap_or(T::zero()) - obs.sensor_height;
                    total += score(obs.ugv, rel.extend(z));
                }
            }
            out.push(OrientationCandidate { theta: o.theta, reflected, score: total });
        }
    }
    out
}

/// Picks the maximising orientation and applies the acceptance rules.
pub fn select_orientation<T: Real>(
    candidates: &[OrientationCandidate<T>],
    n_edges: usize,
    exclusion: T,
    opts: &OrientationOptions<T>,
) -> Result<OrientationEstimate<T>, LocalizationError> {
    let Some(best) = candidates.iter().copied().reduce(|a, b| if b.score > a.score { b } else { a }) else {
        return Err(LocalizationError::AmbiguousOrientation { best: 0.0, runner_up: 0.0 });
    };
    let tie = T::lit(1e-12);
    // Centre of the plateau of maximal scores around the first maximiser.
    let same: Vec<&OrientationCandidate<T>> = candidates.iter().filter(|c| c.reflected == best.reflected).collect();
    let steps = same.len();
    let start = same.iter().position(|c| c.theta == best.theta).unwrap_or(0);
    let at_max = |k: usize| same[k % steps].score >= best.score - tie;
    let mut lo = 0usize;
    while lo + 1 < steps && at_max(start + steps - lo - 1) {
        lo += 1;
    }
    let mut hi = 0usize;
    while hi + 1 < steps && at_max(start + hi + 1) {
        hi += 1;
    }
    let (mut sx, mut sy) = (T::zero(), T::zero());
    for k in 0..=(lo + hi) {
        let th = same[(start + steps - lo + k) % steps].theta;
        sx += th.cos();
        sy += th.sin();
    }
    let theta = wrap_2pi(sy.atan2(sx));

    let runner_up = same
        .iter()
        .filter(|c| angle_diff(c.theta, theta) > exclusion)
        .map(|c| c.score)
        .fold(T::zero(), T::max);
    let mirrored = candidates.iter().filter(|c| c.reflected != best.reflected).map(|c| c.score).fold(T::zero(), T::max);
    let threshold = opts.min_score_per_edge * T::lit(n_edges as f64);
    let margin = T::one() + opts.min_margin;
    if best.score < threshold || best.score < margin * runner_up || best.score <= T::zero() {
        return Err(LocalizationError::AmbiguousOrientation { best: best.score.as_f64(), runner_up: runner_up.as_f64() });
    }
    Ok(OrientationEstimate {
        orientation: Orientation { theta, reflected: best.reflected },
        score: best.score,
        reflection_ambiguous: best.score < margin * mirrored,
    })
}

/// Recovers the orientation of the estimate by maximising the summed MAV
/// presence score over all UGV -> MAV sensing edges.
pub fn estimate_graph_orientation<T: Real>(
    est: &PlanarEstimate<T>,
    observations: &[UgvObservation<'_, T>],
    sensing: &SensingGraph,
    altitudes: &[T],
    opts: &OrientationOptions<T>,
) -> Result<OrientationEstimate<T>, LocalizationError> {
    if sensing.is_empty() {
        return Err(LocalizationError::EmptySensingGraph);
    }
    let lookup: BTreeMap<usize, &SpatialIndex<T>> = observations.iter().map(|o| (o.ugv, o.index)).collect();
    let observed: Vec<UgvObservation<'_, T>> =
        observations.iter().copied().filter(|o| sensing.neighbors(o.ugv).next().is_some()).collect();
    let n_edges = observed.iter().map(|o| sensing.neighbors(o.ugv).count()).sum::<usize>();
    let candidates = sweep_orientation(est, sensing, altitudes, &observed, opts.dtheta, |ugv, local| {
        lookup.get(&ugv).map_or(T::zero(), |idx| mav_presence_score(idx, local, opts.r_mav))
    });
    let min_dist = sensing
        .edges()
        .iter()
        .filter(|&&(u, m)| u < est.positions.len() && m < est.positions.len())
        .map(|&(u, m)| est.positions[u].dist(est.positions[m]))
        .fold(T::infinity(), T::min);
    let ratio = if min_dist.is_finite() && min_dist > T::zero() { (T::lit(2.0) * opts.r_mav / min_dist).min(T::one()) } else { T::one() };
    let exclusion = T::lit(2.0) * ratio.asin() + T::lit(2.0) * opts.dtheta;
    select_orientation(&candidates, n_edges, exclusion, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullPose<T> {
    pub agent: usize,
    /// Shared-frame position relative to agent 0.
    pub position: Vec3<T>,
    pub yaw: T,
    /// MAV without an altitude estimate: `position.z` is meaningless.
    pub planar_only: bool,
}

/// Lifts the planar estimate into the shared frame. MAVs take their fused
/// altitude; ground agents sit at zero.
pub fn full_poses<T: Real>(
    est: &PlanarEstimate<T>,
    orientation: &Orientation<T>,
    kinds: &[AgentKind],
    altitudes: &[Option<T>],
    yaws: &[T],
) -> Vec<FullPose<T>> {
    est.positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let xy = orientation.apply(p);
            let kind = kinds.get(i).copied().unwrap_or(AgentKind::Ugv);
            let (z, planar_only) = match (kind, altitudes.get(i).copied().flatten()) {
                (AgentKind::Mav, Some(h)) => (h, false),
                (AgentKind::Mav, None) => (T::zero(), true),
                _ => (T::zero(), false),
            };
            FullPose { agent: i, position: xy.extend(z), yaw: yaws.get(i).copied().unwrap_or(T::zero()), planar_only }
        })
        .collect()
}

/// Inverse of [`full_poses`] on the planar part.
pub fn project_to_estimate<T: Real>(poses: &[FullPose<T>], orientation: &Orientation<T>) -> Vec<Vec2<T>> {
    poses.iter().map(|p| orientation.invert(p.position.xy())).collect()
}

/// Best rigid (optionally reflecting) alignment of `est` onto `truth`.
/// Returns the aligned points.
pub fn align_to<T: Real>(est: &[Vec2<T>], truth: &[Vec2<T>], allow_reflection: bool) -> Vec<Vec2<T>> {
    assert_eq!(est.len(), truth.len());
    let n = T::lit(est.len().max(1) as f64);
    let ce = est.iter().fold(Vec2::zero(), |a, &p| a + p) * (T::one() / n);
    let ct = truth.iter().fold(Vec2::zero(), |a, &p| a + p) * (T::one() / n);
    let fit = |mirror: bool| {
        let src: Vec<Vec2<T>> = est.iter().map(|&p| if mirror { (p - ce).mirror_x() } else { p - ce }).collect();
        let (mut s_dot, mut s_cross) = (T::zero(), T::zero());
        for (a, &t) in src.iter().zip(truth) {
            let b = t - ct;
            s_dot += a.dot(b);
            s_cross += a.cross(b);
        }
        let rot = s_cross.atan2(s_dot);
        let out: Vec<Vec2<T>> = src.iter().map(|a| a.rotate(rot) + ct).collect();
        let err: T = out.iter().zip(truth).map(|(a, &b)| (*a - b).norm_sq()).sum();
        (out, err)
    };
    let (plain, e_plain) = fit(false);
    if !allow_reflection {
        return plain;
    }
    let (mirrored, e_mirror) = fit(true);
    if e_mirror < e_plain {
        mirrored
    } else {
        plain
    }
}

/// Root-mean-square distance between paired points.
pub fn rmse<T: Real>(a: &[Vec2<T>], b: &[Vec2<T>]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    let s: T = a.iter().zip(b).map(|(p, q)| (*p - *q).norm_sq()).sum();
    (s / T::lit(a.len() as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranges_from(points: &[Vec2<f64>], graph: &Graph) -> Vec<RangeMeasurement<f64>> {
        graph
            .edges()
            .iter()
            .map(|&(i, j)| RangeMeasurement { edge: (i, j), range: points[i].dist(points[j]), timestamp: 0.0 })
            .collect()
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Vec2<f64>> {
        v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
    }

    #[test]
    fn gate_examples() {
        let truth = pts(&[(0.0, 0.0), (0.0, 4.0), (3.0, 0.0)]);
        let mut gate = LocalizationGate::default();
        let path = ranges_from(&truth, &Graph::new(3, [(0, 1), (1, 2)]).unwrap());
        assert_eq!(gate.step(3, &path, None).unwrap(), GateStatus::WaitingRigidity);
        assert!(gate.last_report.is_connected && gate.last_report.rigidity_rank == 2);
        let split = ranges_from(&truth, &Graph::new(3, [(0, 1)]).unwrap());
        assert_eq!(gate.step(3, &split, None).unwrap(), GateStatus::WaitingConnectivity);
        let k3 = ranges_from(&truth, &Graph::complete(3));
        assert_eq!(gate.step(3, &k3, None).unwrap(), GateStatus::Localizing);
        // Losing an edge regresses the status.
        assert_eq!(gate.step(3, &path, None).unwrap(), GateStatus::WaitingRigidity);
    }

    #[test]
    fn noiseless_triangle_is_exact() {
        let truth = pts(&[(0.0, 0.0), (0.0, 4.0), (3.0, 0.0)]);
        let r = ranges_from(&truth, &Graph::complete(3));
        let est = minimize_triangulation_error(3, &r, None, &SolverOptions::default()).unwrap();
        assert!(est.residual < 1e-12 && est.converged);
        assert_eq!(est.positions[0], Vec2::zero());
        assert_eq!(est.positions[1], Vec2::new(0.0, 4.0));
        assert!((est.positions[2].x.abs() - 3.0).abs() < 1e-9 && est.positions[2].y.abs() < 1e-9);
    }

    #[test]
    fn solver_errors() {
        let r = vec![RangeMeasurement { edge: (1, 2), range: 1.0, timestamp: 0.0 }];
        assert_eq!(
            minimize_triangulation_error(3, &r, None, &SolverOptions::<f64>::default()),
            Err(LocalizationError::MissingGaugeRange)
        );
        assert_eq!(
            minimize_triangulation_error(1, &r, None, &SolverOptions::<f64>::default()),
            Err(LocalizationError::InsufficientAgents(1))
        );
        let bad = vec![RangeMeasurement { edge: (0, 7), range: 1.0, timestamp: 0.0 }];
        assert!(matches!(
            minimize_triangulation_error(3, &bad, None, &SolverOptions::<f64>::default()),
            Err(LocalizationError::UnknownAgent(0, 7))
        ));
    }

    #[test]
    fn iteration_cap_flags_degraded() {
        let truth = pts(&[(0.0, 0.0), (0.0, 4.0), (3.0, 1.0), (-2.0, 5.0)]);
        let r = ranges_from(&truth, &Graph::complete(4));
        let init = PlanarEstimate { positions: pts(&[(0.0, 0.0), (0.0, 4.0), (30.0, -10.0), (20.0, 20.0)]), residual: 0.0, converged: false, iterations: 0 };
        let opts = SolverOptions { max_iterations: 1, step_tolerance: 1e-10 };
        let est = minimize_triangulation_error(4, &r, Some(&init), &opts).unwrap();
        assert!(!est.converged && est.iterations == 1);
    }

    #[test]
    fn full_pose_rotation_and_round_trip() {
        let est = PlanarEstimate { positions: pts(&[(0.0, 0.0), (0.0, 5.0)]), residual: 0.0, converged: true, iterations: 0 };
        let kinds = [AgentKind::Ugv, AgentKind::Mav];
        let o = Orientation { theta: 0.0, reflected: false };
        let poses = full_poses(&est, &o, &kinds, &[None, Some(1.5)], &[0.0, 0.2]);
        assert_eq!(poses[1].position, Vec3::new(0.0, 5.0, 1.5));
        let o = Orientation { theta: std::f64::consts::FRAC_PI_2, reflected: false };
        let poses = full_poses(&est, &o, &kinds, &[None, Some(2.0)], &[0.0, 0.0]);
        assert!((poses[1].position.x + 5.0).abs() < 1e-12 && poses[1].position.y.abs() < 1e-12);
        assert_eq!(poses[1].position.z, 2.0);
        let o = Orientation { theta: 1.234, reflected: true };
        let poses = full_poses(&est, &o, &kinds, &[None, None], &[0.0, 0.0]);
        assert!(poses[1].planar_only && !poses[0].planar_only);
        let back = project_to_estimate(&poses, &o);
        for (a, b) in back.iter().zip(&est.positions) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn sensing_graph_rejects_wrong_kinds() {
        let kinds = [AgentKind::Ugv, AgentKind::Mav, AgentKind::Anchor];
        assert!(SensingGraph::new(&kinds, [(0, 1)]).is_ok());
        assert!(SensingGraph::new(&kinds, [(1, 0)]).is_err());
        assert!(SensingGraph::new(&kinds, [(0, 2)]).is_err());
    }

    #[test]
    fn alignment_recovers_rigid_motion() {
        let truth = pts(&[(1.0, 2.0), (4.0, -1.0), (0.5, 3.0), (-2.0, 0.0)]);
        let moved: Vec<Vec2<f64>> = truth.iter().map(|p| p.mirror_x().rotate(0.7) + Vec2::new(3.0, -8.0)).collect();
        let aligned = align_to(&moved, &truth, true);
        assert!(rmse(&aligned, &truth) < 1e-12);
        assert!(rmse(&align_to(&moved, &truth, false), &truth) > 0.1);
    }
}
