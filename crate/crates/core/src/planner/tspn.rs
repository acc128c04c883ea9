//! Dubins TSP with disk neighborhoods for a single MAV.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Vec2};
use crate::planner::dubins::{dubins_shortest, DubinsPath};
use crate::planner::{Neighborhood, PlannerError};
use crate::scalar::{angle_diff, wrap_2pi, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit<T> {
    pub neighborhood: usize,
    /// Configuration where the tour touches the disk.
    pub touch: Pose2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour<T> {
    pub start: Pose2<T>,
    pub visits: Vec<Visit<T>>,
    /// One leg per visit, from the previous configuration to the touch point.
    pub legs: Vec<DubinsPath<T>>,
    pub length: T,
}

impl<T: Real> Tour<T> {
    pub fn empty(start: Pose2<T>) -> Self {
        Self { start, visits: Vec::new(), legs: Vec::new(), length: T::zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reordering {
    /// Keep the given order.
    Fixed,
    /// 2-opt limited to reversing runs of disks that share a common bearing
    /// from the tracker, so the anticlockwise sweep is preserved.
    SweepPreserving,
    /// Unrestricted length-minimising 2-opt.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TspnOptions<T> {
    pub rho: T,
    /// Touch points are placed this far inside each disk so that a sampled
    /// trajectory still lands inside it.
    pub touch_margin: T,
    pub reordering: Reordering,
    /// Tracker position, used for sweep-preserving reordering.
    pub tracker: Vec2<T>,
    pub descent_rounds: usize,
}

impl<T: Real> Default for TspnOptions<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            touch_margin: T::zero(),
            reordering: Reordering::Fixed,
            tracker: Vec2::zero(),
            descent_rounds: 3,
        }
    }
}

fn effective_radius<T: Real>(n: &Neighborhood<T>, margin: T) -> T {
    (n.radius - margin).max(T::zero())
}

fn touch_at<T: Real>(n: &Neighborhood<T>, margin: T, phi: T) -> Vec2<T> {
    n.center + Vec2::from_polar(effective_radius(n, margin), phi)
}

fn leg_len<T: Real>(a: Pose2<T>, b: Pose2<T>, rho: T) -> T {
    dubins_shortest(a, b, rho).map(|p| p.length()).unwrap_or(T::infinity())
}

/// Greedy touch points: the boundary point facing the previous point, with
/// heading along the chord from the previous to the next point.
fn initial_touches<T: Real>(nbhs: &[Neighborhood<T>], start: Pose2<T>, margin: T) -> Vec<Pose2<T>> {
    let mut pts: Vec<Vec2<T>> = Vec::with_capacity(nbhs.len());
    let mut prev = start.position;
    for n in nbhs {
        let r = effective_radius(n, margin);
        let p = if prev.dist(n.center) <= r {
            prev
        } else {
            touch_at(n, margin, (prev - n.center).angle())
        };
        pts.push(p);
        prev = p;
    }
    (0..pts.len())
        .map(|k| {
            let before = if k == 0 { start.position } else { pts[k - 1] };
            let after = if k + 1 < pts.len() { pts[k + 1] } else { pts[k] + (pts[k] - before) };
            let chord = after - before;
            let yaw = if chord.norm() > T::epsilon() {
                chord.angle()
            } else if k == 0 {
                start.yaw
            } else {
                (pts[k] - pts[k - 1]).angle()
            };
            Pose2 { position: pts[k], yaw: wrap_2pi(yaw) }
        })
        .collect()
}

fn total_length<T: Real>(start: Pose2<T>, touches: &[Pose2<T>], rho: T) -> T {
    let mut prev = start;
    let mut sum = T::zero();
    for &t in touches {
        sum += leg_len(prev, t, rho);
        prev = t;
    }
    sum
}

/// Minimises `f` over a periodic parameter: coarse grid, then golden-section
/// refinement inside the best grid cell.
fn minimize_periodic<T: Real>(f: impl Fn(T) -> T, center: T, span: T, grid: usize) -> (T, T) {
    let lo = center - span * T::lit(0.5);
    let step = span / T::lit(grid as f64);
    let mut best = (center, f(center));
    for k in 0..=grid {
        let x = lo + step * T::lit(k as f64);
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = T::lit(0.618_033_988_749_895);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..24 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if v < best.1 {
        (x, v)
    } else {
        best
    }
}

/// Coordinate descent over each touch point's boundary angle and heading,
/// minimising the two legs adjacent to it.
fn refine<T: Real>(nbhs: &[Neighborhood<T>], start: Pose2<T>, touches: &mut [Pose2<T>], opts: &TspnOptions<T>) {
    let rho = opts.rho;
    for _ in 0..opts.descent_rounds {
        for k in 0..touches.len() {
            let n = &nbhs[k];
            let prev = if k == 0 { start } else { touches[k - 1] };
            let next = touches.get(k + 1).copied();
            let cost = |t: Pose2<T>| leg_len(prev, t, rho) + next.map_or(T::zero(), |nx| leg_len(t, nx, rho));
            let current = cost(touches[k]);
            if effective_radius(n, opts.touch_margin) > T::zero() {
                let phi0 = (touches[k].position - n.center).angle();
                let yaw = touches[k].yaw;
                let (phi, v) = minimize_periodic(
                    |phi| cost(Pose2 { position: touch_at(n, opts.touch_margin, phi), yaw }),
                    phi0,
                    T::TAU(),
                    24,
                );
                if v < current {
                    touches[k].position = touch_at(n, opts.touch_margin, phi);
                }
            }
            let pos = touches[k].position;
            let (yaw, v) =
                minimize_periodic(|yaw| cost(Pose2 { position: pos, yaw }), touches[k].yaw, T::TAU(), 24);
            if v < cost(touches[k]) {
                touches[k].yaw = wrap_2pi(yaw);
            }
        }
    }
}

/// Bearing interval subtended by a disk as seen from the tracker.
fn bearing_interval<T: Real>(n: &Neighborhood<T>, tracker: Vec2<T>) -> (T, T) {
    let d = n.center.dist(tracker);
    let mid = (n.center - tracker).angle();
    let half = if d <= n.radius { T::PI() } else { (n.radius / d).asin() };
    (mid, half)
}

fn shares_bearing<T: Real>(run: &[Neighborhood<T>], tracker: Vec2<T>) -> bool {
    let iv: Vec<(T, T)> = run.iter().map(|n| bearing_interval(n, tracker)).collect();
    iv.iter().enumerate().all(|(i, a)| iv[i + 1..].iter().all(|b| angle_diff(a.0, b.0) <= a.1 + b.1))
}

fn two_opt<T: Real>(nbhs: &mut [Neighborhood<T>], start: Pose2<T>, opts: &TspnOptions<T>) {
    let n = nbhs.len();
    if n < 2 || opts.reordering == Reordering::Fixed {
        return;
    }
    let cost = |order: &[Neighborhood<T>]| {
        total_length(start, &initial_touches(order, start, opts.touch_margin), opts.rho)
    };
    let mut best = cost(nbhs);
    let mut improved = true;
    let mut passes = 0;
    while improved && passes < 20 {
        improved = false;
        passes += 1;
        for i in 0..n - 1 {
            for j in i + 1..n {
                if opts.reordering == Reordering::SweepPreserving && !shares_bearing(&nbhs[i..=j], opts.tracker) {
                    continue;
                }
                nbhs[i..=j].reverse();
                let c = cost(nbhs);
                if c < best - T::lit(1e-9) {
                    best = c;
                    improved = true;
                } else {
                    nbhs[i..=j].reverse();
                }
            }
        }
    }
}

/// Plans a tour from `start` touching every disk of `nbhs` (given in sweep
/// order), optionally improving the order, then refining touch points.
pub fn solve_tspn<T: Real>(
    nbhs: &[Neighborhood<T>],
    start: Pose2<T>,
    opts: &TspnOptions<T>,
) -> Result<Tour<T>, PlannerError> {
    if !(opts.rho > T::zero()) {
        return Err(PlannerError::InvalidParameter(format!("turning radius must be positive, got {}", opts.rho)));
    }
    if nbhs.is_empty() {
        return Ok(Tour::empty(start));
    }
    let mut order = nbhs.to_vec();
    two_opt(&mut order, start, opts);
    let mut touches = initial_touches(&order, start, opts.touch_margin);
    refine(&order, start, &mut touches, opts);
    let mut legs = Vec::with_capacity(order.len());
    let mut prev = start;
    for &t in &touches {
        legs.push(dubins_shortest(prev, t, opts.rho)?);
        prev = t;
    }
    let length = legs.iter().map(|l| l.length()).sum();
    let visits = order.iter().zip(&touches).map(|(n, &t)| Visit { neighborhood: n.id, touch: t }).collect();
    Ok(Tour { start, visits, legs, length })
}
