//! Time parametrisation of tours: trapezoidal speed profiles, synchronised
//! so that all MAVs of one tracker stay inside its field of view.
//!
//! The constrained scheduler advances in fixed steps. Each step it proposes
//! the fastest admissible acceleration for every MAV and accepts it when the
//! resulting state is *brake-safe*: if every MAV braked at full deceleration
//! from there, the angular spread would stay within the FoV and the tracker's
//! yaw rate within its limit until all stop. Full braking from a brake-safe
//! state is itself brake-safe, so a safe choice always exists; when the
//! proposal is unsafe the scheduler searches graded decelerations, leaders
//! first.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Vec2};
use crate::planner::dubins::{DubinsPath, PathPoint};
use crate::planner::tspn::Tour;
use crate::planner::PlannerError;
use crate::scalar::{angle_diff, Real};

/// Concatenated legs addressed by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathChain<T> {
    start: Pose2<T>,
    legs: Vec<DubinsPath<T>>,
    /// Arc length at the start of each leg.
    offsets: Vec<T>,
    length: T,
}

impl<T: Real> PathChain<T> {
    pub fn new(start: Pose2<T>, legs: Vec<DubinsPath<T>>) -> Self {
        let mut offsets = Vec::with_capacity(legs.len());
        let mut acc = T::zero();
        for l in &legs {
            offsets.push(acc);
            acc += l.length();
        }
        Self { start, legs, offsets, length: acc }
    }

    pub fn from_tour(tour: &Tour<T>) -> Self {
        Self::new(tour.start, tour.legs.clone())
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn sample(&self, s: T) -> PathPoint<T> {
        if self.legs.is_empty() {
            return PathPoint { pose: self.start, curvature: T::zero() };
        }
        let s = s.max(T::zero()).min(self.length);
        let k = self.offsets.partition_point(|&o| o <= s).saturating_sub(1);
        self.legs[k].sample(s - self.offsets[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample<T> {
    pub t: T,
    pub position: Vec2<T>,
    pub heading: T,
    pub speed: T,
    /// Acceleration applied over the step starting at this sample.
    pub acceleration: T,
    pub curvature: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub mav: usize,
    pub samples: Vec<TrajectorySample<T>>,
    pub length: T,
}

impl<T: Real> Trajectory<T> {
    pub fn duration(&self) -> T {
        self.samples.last().map_or(T::zero(), |s| s.t)
    }

    /// Position at time `t`, linearly interpolated, held after the end.
    pub fn position_at(&self, t: T) -> Vec2<T> {
        let Some(first) = self.samples.first() else { return Vec2::zero() };
        if t <= first.t {
            return first.position;
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        if k >= self.samples.len() {
            return self.samples[self.samples.len() - 1].position;
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let w = (t - a.t) / (b.t - a.t);
        a.position + (b.position - a.position) * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions<T> {
    pub v_max: T,
    pub a_max: T,
    pub yaw_rate_max: T,
    pub sample_dt: T,
    /// Enforce the FoV spread and yaw-rate limits.
    pub constrained: bool,
    /// Give up (infeasible) after this long; `None` picks a generous bound.
    pub max_duration: Option<T>,
}

impl<T: Real> Default for ScheduleOptions<T> {
    fn default() -> Self {
        Self {
            v_max: T::lit(2.0),
            a_max: T::one(),
            yaw_rate_max: T::one(),
            sample_dt: T::lit(0.05),
            constrained: true,
            max_duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    /// Interval during which no admissible motion existed.
    pub t_start: f64,
    pub t_end: f64,
    pub spread: f64,
    pub reason: String,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} during t in [{:.2}, {:.2}] s (spread {:.3} rad)", self.reason, self.t_start, self.t_end, self.spread)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct State<T> {
    s: T,
    v: T,
}

struct Kinematics<T> {
    v_max: T,
    a_max: T,
    dt: T,
}

impl<T: Real> Kinematics<T> {
    fn step(&self, st: State<T>, a: T, len: T) -> State<T> {
        let mut v = (st.v + a * self.dt).max(T::zero()).min(self.v_max);
        let mut s = (st.s + (st.v + v) * T::lit(0.5) * self.dt).min(len);
        let snap = (T::lit(0.5) * self.a_max * self.dt * self.dt).max(T::lit(1e-9));
        if len - s <= snap && st.v <= self.a_max * self.dt {
            s = len;
            v = T::zero();
        }
        State { s, v }
    }

    fn can_stop(&self, st: State<T>, len: T) -> bool {
        st.v * st.v <= T::lit(2.0) * self.a_max * (len - st.s) + T::lit(1e-9)
    }

    /// Largest acceleration whose successor can still stop by the end.
    fn max_accel(&self, st: State<T>, len: T) -> T {
        if st.s >= len {
            return -self.a_max;
        }
        if self.can_stop(self.step(st, self.a_max, len), len) {
            return self.a_max;
        }
        let (mut lo, mut hi) = (-self.a_max, self.a_max);
        if !self.can_stop(self.step(st, lo, len), len) {
            return lo;
        }
        for _ in 0..50 {
            let mid = (lo + hi) * T::lit(0.5);
            if self.can_stop(self.step(st, mid, len), len) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn done(&self, st: State<T>, len: T) -> bool {
        st.s >= len && st.v <= T::zero()
    }
}

/// Coordination diagram over the MAVs' arc-length progress. A grid cell is
/// free when the bearings at those progress values fit inside the FoV, and
/// viable when a monotone chain of free cells leads from it to the goal.
/// Stopping only in viable cells keeps the group out of dead ends where every
/// forward motion would widen the spread.
struct Coordination<T> {
    ds: T,
    dims: Vec<usize>,
    strides: Vec<usize>,
    viable: Vec<bool>,
}

impl<T: Real> Coordination<T> {
    const MAX_CELLS: usize = 4_000_000;

    fn build(paths: &[PathChain<T>], tracker: Vec2<T>, fov: T, ds_min: T) -> Self {
        let lens: Vec<T> = paths.iter().map(PathChain::length).collect();
        let dims_for = |ds: T| -> Vec<usize> {
            lens.iter().map(|&l| (l / ds).ceil().to_usize().unwrap_or(0) + 1).collect()
        };
        let mut ds = ds_min;
        while dims_for(ds).iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none_or(|c| c > Self::MAX_CELLS) {
            ds *= T::lit(1.25);
        }
        let dims = dims_for(ds);
        let bearings: Vec<Vec<T>> = paths
            .iter()
            .zip(&dims)
            .map(|(p, &n)| {
                (0..n)
                    .map(|k| (p.sample((T::lit(k as f64) * ds).min(p.length())).pose.position - tracker).angle())
                    .collect()
            })
            .collect();
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let mut viable = vec![false; total];
        let mut idx = vec![0usize; dims.len()];
        let mut b = vec![T::zero(); dims.len()];
        for lin in (0..total).rev() {
            let mut rem = lin;
            for i in 0..dims.len() {
                idx[i] = rem / strides[i];
                rem %= strides[i];
                b[i] = bearings[i][idx[i]];
            }
            if spread(&b) > fov + T::lit(1e-9) {
                continue;
            }
            if idx.iter().zip(&dims).all(|(&k, &n)| k + 1 == n) {
                viable[lin] = true;
                continue;
            }
            // Any non-empty set of MAVs advancing one cell.
            viable[lin] = (1usize..(1 << dims.len())).any(|mask| {
                let mut next = lin;
                for i in 0..dims.len() {
                    if mask & (1 << i) != 0 {
                        if idx[i] + 1 >= dims[i] {
                            return false;
                        }
                        next += strides[i];
                    }
                }
                viable[next]
            });
        }
        Self { ds, dims, strides, viable }
    }

    fn is_viable(&self, states: &[State<T>]) -> bool {
        let lin = states
            .iter()
            .zip(&self.dims)
            .zip(&self.strides)
            .map(|((st, &n), &stride)| (st.s / self.ds).round().to_usize().unwrap_or(0).min(n - 1) * stride)
            .sum::<usize>();
        self.viable[lin]
    }
}

struct Group<'a, T> {
    paths: &'a [PathChain<T>],
    tracker: Vec2<T>,
    fov: T,
    yaw_step: T,
    kin: Kinematics<T>,
    coord: Option<Coordination<T>>,
}

impl<T: Real> Group<'_, T> {
    fn bearings(&self, states: &[State<T>]) -> Vec<T> {
        states
            .iter()
            .zip(self.paths)
            .map(|(st, p)| (p.sample(st.s).pose.position - self.tracker).angle())
            .collect()
    }

    fn ok_transition(&self, before: &[T], after: &[T]) -> bool {
        let tol = T::lit(1e-9);
        spread(after) <= self.fov + tol && angle_diff(circular_mean(before), circular_mean(after)) <= self.yaw_step + tol
    }

    /// Whether `next` is reachable from `now` within limits and full braking
    /// from `next` keeps the limits until every MAV stops, optionally in a
    /// viable cell of the coordination diagram.
    fn brake_safe(&self, now: &[State<T>], next: &[State<T>], coordinated: bool) -> bool {
        let mut before = self.bearings(now);
        let mut cur = next.to_vec();
        loop {
            let after = self.bearings(&cur);
            if !self.ok_transition(&before, &after) {
                return false;
            }
            if cur.iter().all(|st| st.v <= T::zero()) {
                return !coordinated || self.coord.as_ref().is_none_or(|c| c.is_viable(&cur));
            }
            before = after;
            cur = cur
                .iter()
                .zip(self.paths)
                .map(|(&st, p)| self.kin.step(st, -self.kin.a_max, p.length()))
                .collect();
        }
    }
}

/// Max pairwise wrapped difference.
pub fn spread<T: Real>(bearings: &[T]) -> T {
    let mut m = T::zero();
    for i in 0..bearings.len() {
        for j in i + 1..bearings.len() {
            m = m.max(angle_diff(bearings[i], bearings[j]));
        }
    }
    m
}

pub fn circular_mean<T: Real>(bearings: &[T]) -> T {
    let (s, c) = bearings.iter().fold((T::zero(), T::zero()), |(s, c), &b| (s + b.sin(), c + b.cos()));
    s.atan2(c)
}

fn combos(levels: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for l in levels {
        let mut next = Vec::with_capacity(out.len() * l.len());
        for c in &out {
            for &x in l {
                let mut c2 = c.clone();
                c2.push(x);
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

/// Schedules the tours of the MAVs tracked by one UGV at `tracker`.
/// Trajectories come back in the order of `tours`, tagged with `mav_ids`.
pub fn schedule_velocities<T: Real>(
    tours: &[Tour<T>],
    mav_ids: &[usize],
    tracker: &Pose2<T>,
    horizontal_fov: T,
    opts: &ScheduleOptions<T>,
) -> Result<Vec<Trajectory<T>>, PlannerError> {
    let positive = |v: T| v > T::zero() && v.is_finite();
    if !positive(opts.v_max) || !positive(opts.a_max) || !positive(opts.sample_dt) || !positive(opts.yaw_rate_max) {
        return Err(PlannerError::InvalidParameter("speed, acceleration, yaw-rate and time step limits must be positive".into()));
    }
    let paths: Vec<PathChain<T>> = tours.iter().map(PathChain::from_tour).collect();
    let lens: Vec<T> = paths.iter().map(PathChain::length).collect();
    let dt = opts.sample_dt;
    let kin = Kinematics { v_max: opts.v_max, a_max: opts.a_max, dt };
    let mut group =
        Group { paths: &paths, tracker: tracker.position, fov: horizontal_fov, yaw_step: opts.yaw_rate_max * dt, kin, coord: None };
    if opts.constrained && paths.len() > 1 {
        // Grid points only sample the paths, so plan with some slack when the
        // geometry allows it.
        let start = vec![State { s: T::zero(), v: T::zero() }; paths.len()];
        group.coord = [0.05, 0.02, 0.0].iter().find_map(|&margin| {
            let coord = Coordination::build(&paths, tracker.position, horizontal_fov - T::lit(margin), opts.v_max * dt);
            coord.is_viable(&start).then_some(coord)
        });
        if group.coord.is_none() {
            log::debug!("coordination diagram has no route from the start; scheduling greedily");
        }
    }
    let group = group;
    let kin = &group.kin;

    let total: T = lens.iter().copied().sum();
    let max_duration = opts.max_duration.unwrap_or_else(|| {
        T::lit(10.0) * (total / opts.v_max + T::lit(2.0) * opts.v_max / opts.a_max * T::lit(paths.len() as f64)) + T::lit(60.0)
    });
    let max_steps = (max_duration / dt).ceil().to_usize().unwrap_or(usize::MAX);

    let mut states: Vec<State<T>> = vec![State { s: T::zero(), v: T::zero() }; paths.len()];
    if opts.constrained {
        let b = group.bearings(&states);
        if spread(&b) > horizontal_fov + T::lit(1e-9) {
            return Err(PlannerError::Infeasible(InfeasibilityReport {
                t_start: 0.0,
                t_end: 0.0,
                spread: spread(&b).as_f64(),
                reason: "MAV start positions already exceed the FoV spread".into(),
            }));
        }
    }
    let mut history: Vec<Vec<State<T>>> = vec![states.clone()];
    let mut accels: Vec<Vec<T>> = Vec::new();
    let mut step = 0usize;
    while !states.iter().zip(&lens).all(|(&st, &l)| kin.done(st, l)) {
        if step >= max_steps {
            return Err(PlannerError::Infeasible(InfeasibilityReport {
                t_start: 0.0,
                t_end: (T::lit(step as f64) * dt).as_f64(),
                spread: spread(&group.bearings(&states)).as_f64(),
                reason: "schedule did not finish within the time limit".into(),
            }));
        }
        let proposal: Vec<T> = states.iter().zip(&lens).map(|(&st, &l)| kin.max_accel(st, l)).collect();
        let apply = |acc: &[T]| -> Vec<State<T>> {
            states.iter().zip(acc).zip(&lens).map(|((&st, &a), &l)| kin.step(st, a, l)).collect()
        };
        let chosen: Vec<T> = if !opts.constrained {
            proposal
        } else {
            choose_constrained(&group, &states, &proposal, &lens, &apply)
        };
        let next = apply(&chosen);
        if opts.constrained && next == states {
            let t = (T::lit(step as f64) * dt).as_f64();
            let last_move = history.iter().rposition(|h| *h != states).map_or(0, |k| k + 1);
            return Err(PlannerError::Infeasible(InfeasibilityReport {
                t_start: last_move as f64 * dt.as_f64(),
                t_end: t,
                spread: spread(&group.bearings(&states)).as_f64(),
                reason: "all MAVs stopped and no motion keeps them inside the FoV".into(),
            }));
        }
        accels.push(states.iter().zip(&next).map(|(a, b)| (b.v - a.v) / dt).collect());
        states = next;
        history.push(states.clone());
        step += 1;
    }

    let mut out = Vec::with_capacity(paths.len());
    for (m, path) in paths.iter().enumerate() {
        let finish = history.iter().position(|h| kin.done(h[m], lens[m])).unwrap_or(history.len() - 1);
        let samples = (0..=finish)
            .map(|k| {
                let st = history[k][m];
                let pt = path.sample(st.s);
                TrajectorySample {
                    t: T::lit(k as f64) * dt,
                    position: pt.pose.position,
                    heading: pt.pose.yaw,
                    speed: st.v,
                    acceleration: if k < finish { accels[k][m] } else { T::zero() },
                    curvature: pt.curvature,
                }
            })
            .collect();
        out.push(Trajectory { mav: mav_ids.get(m).copied().unwrap_or(m), samples, length: lens[m] });
    }
    Ok(out)
}

fn choose_constrained<T: Real>(
    group: &Group<'_, T>,
    states: &[State<T>],
    proposal: &[T],
    lens: &[T],
    apply: &dyn Fn(&[T]) -> Vec<State<T>>,
) -> Vec<T> {
    let kin = &group.kin;
    let now_spread = spread(&group.bearings(states));
    let soft_limit = group.fov * T::lit(0.85);
    // Prefer moves that keep slack unless the spread is already shrinking.
    let soft_ok = |next: &[State<T>]| {
        let s = spread(&group.bearings(next));
        s <= soft_limit || s <= now_spread + T::lit(1e-12)
    };
    let first = apply(proposal);
    if group.brake_safe(states, &first, true) && soft_ok(&first) {
        return proposal.to_vec();
    }
    // Graded levels per MAV, fastest first; finished MAVs stay put.
    let a = kin.a_max;
    let half = T::lit(0.5);
    let fine = states.len() <= 3;
    let levels: Vec<Vec<T>> = states
        .iter()
        .zip(proposal)
        .zip(lens)
        .map(|((st, &p), &l)| {
            if kin.done(*st, l) {
                return vec![-a];
            }
            let mut v = if fine { vec![p, p * half, p.min(T::zero()), -a * half, -a] } else { vec![p, p.min(T::zero()), -a] };
            v.dedup_by(|x, y| (*x - *y).abs() <= T::lit(1e-12));
            v
        })
        .collect();
    let idx: Vec<Vec<usize>> = levels.iter().map(|l| (0..l.len()).collect()).collect();
    let all = combos(&idx);
    // Diagram-guided first; its grid is coarse, so fall back to the plain
    // limits when no guided move exists.
    for coordinated in [true, false] {
        let mut best: Option<(bool, T, Vec<T>)> = None;
        for combo in &all {
            let acc: Vec<T> = combo.iter().enumerate().map(|(m, &k)| levels[m][k]).collect();
            let next = apply(&acc);
            if !group.brake_safe(states, &next, coordinated) {
                continue;
            }
            let soft = soft_ok(&next);
            let progress: T = next.iter().map(|st| st.v).sum();
            let better = match &best {
                None => true,
                Some((bs, bp, _)) => (soft && !bs) || (soft == *bs && progress > *bp + T::lit(1e-12)),
            };
            if better {
                best = Some((soft, progress, acc));
            }
        }
        if let Some(b) = best {
            return b.2;
        }
    }
    vec![-a; states.len()]
}

/// Per sample time, the largest pairwise bearing difference between MAVs as
/// seen from `tracker`. Positions are interpolated; finished MAVs hold their
/// last position.
pub fn angular_separation_series<T: Real>(trajs: &[Trajectory<T>], tracker: Vec2<T>, sample_dt: T) -> Vec<(T, T)> {
    let end = trajs.iter().map(Trajectory::duration).fold(T::zero(), T::max);
    let n = (end / sample_dt).ceil().to_usize().unwrap_or(0);
    (0..=n)
        .map(|k| {
            let t = T::lit(k as f64) * sample_dt;
            let b: Vec<T> = trajs.iter().map(|tr| (tr.position_at(t) - tracker).angle()).collect();
            (t, spread(&b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::dubins::dubins_shortest;
    use crate::planner::tspn::Visit;

    fn straight_tour(start: Pose2<f64>, len: f64) -> Tour<f64> {
        let leg = DubinsPath::straight(start, len, 1.0);
        Tour { start, visits: vec![Visit { neighborhood: 0, touch: leg.end() }], legs: vec![leg], length: len }
    }

    #[test]
    fn single_short_leg_is_triangular() {
        let tour = straight_tour(Pose2::new(10.0, 0.0, 0.0), 1.0);
        let opts = ScheduleOptions { constrained: false, ..ScheduleOptions::default() };
        let tr = schedule_velocities(&[tour], &[0], &Pose2::new(0.0, 0.0, 0.0), 1.5, &opts).unwrap();
        let peak = tr[0].samples.iter().map(|s| s.speed).fold(0.0, f64::max);
        // Peak of a triangular profile over 1 m at 1 m/s^2 is 1 m/s.
        assert!((peak - 1.0).abs() < 0.06, "{peak}");
        let last = tr[0].samples.last().unwrap();
        assert!((last.position.x - 11.0).abs() < 1e-6 && last.speed == 0.0);
    }

    #[test]
    fn long_leg_reaches_v_max() {
        let tour = straight_tour(Pose2::new(10.0, 0.0, 0.0), 20.0);
        let tr = schedule_velocities(&[tour], &[3], &Pose2::new(0.0, 0.0, 0.0), 1.5, &ScheduleOptions::default()).unwrap();
        assert_eq!(tr[0].mav, 3);
        let peak = tr[0].samples.iter().map(|s| s.speed).fold(0.0, f64::max);
        assert!((peak - 2.0).abs() < 1e-12);
        for w in tr[0].samples.windows(2) {
            assert!(((w[1].speed - w[0].speed) / 0.05).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn spread_limit_is_enforced() {
        // MAV a first flies radially (constant bearing), then arcs; MAV b arcs
        // straight away and would run far ahead without the constraint.
        use std::f64::consts::FRAC_PI_2;
        let a0 = Pose2::new(5.0, 0.0, 0.0);
        let a1 = Pose2::new(13.0, 0.0, FRAC_PI_2);
        let a = Tour { start: a0, visits: vec![], legs: vec![DubinsPath::straight(a0, 8.0, 1.0), DubinsPath::arc(a1, 13.0, 0.8, true)], length: 0.0 };
        let b0 = Pose2 { position: Vec2::new(5.0, 0.0).rotate(0.2), yaw: 0.2 + FRAC_PI_2 };
        let b = Tour { start: b0, visits: vec![], legs: vec![DubinsPath::arc(b0, 5.0, 1.6, true)], length: 0.0 };
        let tours = [a, b];
        let tracker = Pose2::new(0.0, 0.0, 0.0);
        let free = schedule_velocities(&tours, &[0, 1], &tracker, 1.2, &ScheduleOptions { constrained: false, ..Default::default() }).unwrap();
        let free_max = angular_separation_series(&free, tracker.position, 0.05).iter().map(|x| x.1).fold(0.0, f64::max);
        assert!(free_max > 1.2, "{free_max}");
        let cons = schedule_velocities(&tours, &[0, 1], &tracker, 1.2, &ScheduleOptions::default()).unwrap();
        let cons_max = angular_separation_series(&cons, tracker.position, 0.05).iter().map(|x| x.1).fold(0.0, f64::max);
        assert!(cons_max <= 1.2 + 1e-9, "{cons_max}");
        assert!(cons[1].samples.last().unwrap().position.dist(Vec2::new(5.0, 0.0).rotate(1.8)) < 1e-6);
    }

    #[test]
    fn separation_examples() {
        let mk = |deg: f64| Trajectory {
            mav: 0,
            samples: vec![TrajectorySample {
                t: 0.0,
                position: Vec2::from_polar(5.0, deg.to_radians()),
                heading: 0.0,
                speed: 0.0,
                acceleration: 0.0,
                curvature: 0.0,
            }],
            length: 0.0,
        };
        let s = angular_separation_series(&[mk(10.0), mk(80.0)], Vec2::zero(), 0.05);
        assert!((s[0].1 - 70f64.to_radians()).abs() < 1e-12);
        let s = angular_separation_series(&[mk(350.0), mk(10.0)], Vec2::zero(), 0.05);
        assert!((s[0].1 - 20f64.to_radians()).abs() < 1e-12);
        assert_eq!(angular_separation_series(&[mk(30.0)], Vec2::zero(), 0.05)[0].1, 0.0);
    }

    #[test]
    fn chain_sampling_is_continuous() {
        let q0 = Pose2::new(0.0, 0.0, 0.0);
        let q1 = Pose2::new(4.0, 3.0, 1.0);
        let q2 = Pose2::new(0.0, 6.0, 3.0);
        let l1 = dubins_shortest(q0, q1, 1.0).unwrap();
        let l2 = dubins_shortest(q1, q2, 1.0).unwrap();
        let chain = PathChain::new(q0, vec![l1, l2]);
        let s = l1.length();
        let before = chain.sample(s - 1e-9).pose.position;
        let after = chain.sample(s + 1e-9).pose.position;
        assert!(before.dist(after) < 1e-6);
        assert!(chain.sample(chain.length()).pose.position.dist(q2.position) < 1e-6);
    }
}
