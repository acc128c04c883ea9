//! MAV-to-UGV assignment and angular partition of neighborhoods among MAVs.

use std::cmp::Ordering;

use crate::geometry::{Pose2, Vec2};
use crate::planner::{Neighborhood, PlannerError};
use crate::scalar::{wrap_2pi, wrap_pi, Real};

/// Maps each MAV to its nearest UGV (ties to the lower index), then makes
/// sure every UGV tracks at least one MAV: each idle UGV takes the MAV
/// farthest from its current UGV among UGVs tracking two or more.
pub fn assign_mavs_to_ugvs<T: Real>(mavs: &[Vec2<T>], ugvs: &[Vec2<T>]) -> Result<Vec<usize>, PlannerError> {
    if ugvs.is_empty() || mavs.len() < ugvs.len() {
        return Err(PlannerError::Precondition(format!(
            "need at least as many MAVs as UGVs and at least one UGV (got {} MAVs, {} UGVs)",
            mavs.len(),
            ugvs.len()
        )));
    }
    let mut out: Vec<usize> = mavs
        .iter()
        .map(|&m| {
            let mut best = 0;
            for (k, &u) in ugvs.iter().enumerate().skip(1) {
                if m.dist(u) < m.dist(ugvs[best]) {
                    best = k;
                }
            }
            best
        })
        .collect();
    for idle in 0..ugvs.len() {
        if out.contains(&idle) {
            continue;
        }
        let count = |u: usize, a: &[usize]| a.iter().filter(|&&x| x == u).count();
        let donor = (0..mavs.len())
            .filter(|&m| count(out[m], &out) >= 2)
            .max_by(|&a, &b| {
                let (da, db) = (mavs[a].dist(ugvs[out[a]]), mavs[b].dist(ugvs[out[b]]));
                da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(b.cmp(&a))
            });
        // A donor always exists while MAVs outnumber served UGVs.
        if let Some(m) = donor {
            out[m] = idle;
        }
    }
    Ok(out)
}

/// Polar frame for one tracker: bearings relative to the UGV heading,
/// unwrapped from a cut placed in the middle of the largest empty gap.
#[derive(Debug, Clone, Copy)]
pub struct SweepFrame<T> {
    pub ugv: Pose2<T>,
    /// Bearing (UGV-local) where the sweep starts.
    pub cut: T,
}

impl<T: Real> SweepFrame<T> {
    pub fn from_points(ugv: Pose2<T>, points: &[Vec2<T>]) -> Self {
        let mut bearings: Vec<T> = points.iter().map(|&p| wrap_2pi(ugv.to_local(p).angle())).collect();
        bearings.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let cut = match bearings.len() {
            0 => T::PI(),
            1 => wrap_2pi(bearings[0] + T::PI()),
            n => {
                let mut best = (bearings[0] + T::TAU() - bearings[n - 1], bearings[n - 1]);
                for k in 1..n {
                    let gap = bearings[k] - bearings[k - 1];
                    if gap > best.0 {
                        best = (gap, bearings[k - 1]);
                    }
                }
                wrap_2pi(best.1 + best.0 * T::lit(0.5))
            }
        };
        Self { ugv, cut }
    }

    /// Unwrapped sweep angle in `[0, 2pi)`.
    pub fn key(&self, p: Vec2<T>) -> T {
        wrap_2pi(self.ugv.to_local(p).angle() - self.cut)
    }

    /// World bearing from the UGV.
    pub fn bearing(&self, p: Vec2<T>) -> T {
        wrap_pi((p - self.ugv.position).angle())
    }
}

/// Euclidean chain length from `start` through the neighborhood centres.
pub fn chain_estimate<T: Real>(start: Vec2<T>, nbhs: &[Neighborhood<T>]) -> T {
    let mut prev = start;
    let mut total = T::zero();
    for n in nbhs {
        total += (prev.dist(n.center) - n.radius).max(T::zero());
        prev = n.center;
    }
    total
}

/// Neighborhood order and MAV order of one tracker's sweep.
#[derive(Debug, Clone)]
pub struct SweepOrder<T> {
    pub frame: SweepFrame<T>,
    /// Neighborhoods sorted anticlockwise, ties by id.
    pub sorted: Vec<Neighborhood<T>>,
    /// MAV indices (into the input slice) in anticlockwise order.
    pub mav_order: Vec<usize>,
}

pub fn sweep_order<T: Real>(nbhs: &[Neighborhood<T>], mav_starts: &[Vec2<T>], ugv: &Pose2<T>) -> SweepOrder<T> {
    let pts: Vec<Vec2<T>> = nbhs.iter().map(|n| n.center).chain(mav_starts.iter().copied()).collect();
    let frame = SweepFrame::from_points(*ugv, &pts);
    let mut sorted = nbhs.to_vec();
    sorted.sort_by(|a, b| {
        frame.key(a.center).partial_cmp(&frame.key(b.center)).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
    });
    let mut mav_order: Vec<usize> = (0..mav_starts.len()).collect();
    mav_order.sort_by(|&a, &b| {
        frame.key(mav_starts[a]).partial_cmp(&frame.key(mav_starts[b])).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    SweepOrder { frame, sorted, mav_order }
}

/// Splits `sorted` into contiguous arcs at `bounds` (`bounds[k]` is the first
/// index of arc `k + 1`), returning arcs indexed by input MAV.
pub fn arcs_from_bounds<T: Real>(order: &SweepOrder<T>, bounds: &[usize]) -> Vec<Vec<Neighborhood<T>>> {
    let k = order.mav_order.len();
    let mut out = vec![Vec::new(); k];
    let mut lo = 0;
    for (slot, &mav) in order.mav_order.iter().enumerate() {
        let hi = if slot + 1 < k { bounds[slot] } else { order.sorted.len() };
        out[mav] = order.sorted[lo..hi].to_vec();
        lo = hi;
    }
    out
}

/// Max over MAVs of the chain estimate for a partition.
pub fn partition_cost<T: Real>(order: &SweepOrder<T>, bounds: &[usize], mav_starts: &[Vec2<T>]) -> T {
    arcs_from_bounds(order, bounds)
        .iter()
        .enumerate()
        .map(|(m, arc)| chain_estimate(mav_starts[m], arc))
        .fold(T::zero(), T::max)
}

/// Initial boundaries: each neighborhood goes to the MAV nearest in sweep angle.
pub fn initial_bounds<T: Real>(order: &SweepOrder<T>, mav_starts: &[Vec2<T>]) -> Vec<usize> {
    let keys: Vec<T> = order.mav_order.iter().map(|&m| order.frame.key(mav_starts[m])).collect();
    let k = keys.len();
    (0..k.saturating_sub(1))
        .map(|slot| {
            let mid = (keys[slot] + keys[slot + 1]) * T::lit(0.5);
            order.sorted.iter().take_while(|n| order.frame.key(n.center) <= mid).count()
        })
        .collect()
}

/// Moves single boundaries by one position while that lowers the maximum
/// per-MAV workload estimate; stops at the first partition no single move
/// improves.
pub fn balance_bounds<T: Real>(order: &SweepOrder<T>, mut bounds: Vec<usize>, mav_starts: &[Vec2<T>]) -> Vec<usize> {
    let n = order.sorted.len();
    let mut cost = partition_cost(order, &bounds, mav_starts);
    loop {
        let mut improved = false;
        for b in 0..bounds.len() {
            for delta in [-1isize, 1] {
                let cand = bounds[b] as isize + delta;
                let lo = if b == 0 { 0 } else { bounds[b - 1] as isize };
                let hi = if b + 1 < bounds.len() { bounds[b + 1] as isize } else { n as isize };
                if cand < lo || cand > hi {
                    continue;
                }
                let mut trial = bounds.clone();
                trial[b] = cand as usize;
                let c = partition_cost(order, &trial, mav_starts);
                if c < cost {
                    bounds = trial;
                    cost = c;
                    improved = true;
                }
            }
        }
        if !improved {
            return bounds;
        }
    }
}

/// Assigns neighborhoods to the MAVs of one tracker UGV: contiguous
/// anticlockwise arcs, one per MAV in the MAVs' own angular order, balanced
/// on the workload estimate. Result is indexed like `mav_starts`, each arc in
/// anticlockwise visiting order.
pub fn assign_neighborhoods<T: Real>(
    nbhs: &[Neighborhood<T>],
    mav_starts: &[Vec2<T>],
    ugv: &Pose2<T>,
) -> Vec<Vec<Neighborhood<T>>> {
    if mav_starts.is_empty() {
        return Vec::new();
    }
    let order = sweep_order(nbhs, mav_starts, ugv);
    let bounds = balance_bounds(&order, initial_bounds(&order, mav_starts), mav_starts);
    arcs_from_bounds(&order, &bounds)
}

/// Every contiguous partition of `n` items into `k` arcs (as boundary
/// vectors), in lexicographic order, up to `cap` of them.
pub fn enumerate_bounds(n: usize, k: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, remaining: usize, lo: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        for b in lo..=n {
            cur.push(b);
            rec(n, remaining - 1, b, cur, out, cap);
            cur.pop();
            if out.len() >= cap {
                return;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, k.saturating_sub(1), 0, &mut Vec::new(), &mut out, cap);
    out
}
