//! Lidar shadows on the occupancy grid, turned into disk neighborhoods.

use std::collections::VecDeque;

use crate::geometry::{Pose2, Vec2};
use crate::planner::grid::{CellState, OccupancyGrid};
use crate::planner::{FovSpec, Neighborhood, PlannerError};
use crate::scalar::Real;

/// Per-cell visibility from one sensor pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seen {
    Unvisited,
    Visible,
    Shadow,
}

/// Occluded regions of the sensed wedge, one neighborhood per 4-connected
/// shadow component. A cell is shadow when some ray reaches it after passing
/// an obstacle and no ray reaches it unobstructed.
///
/// Each disk is the largest circle inscribed in its component (centre at the
/// component cell deepest inside it, ties broken towards the centroid),
/// floored at the grid resolution. Ids are assigned in scan order starting at
/// `first_id`.
pub fn blind_spot_neighborhoods<T: Real>(
    grid: &OccupancyGrid<T>,
    ugv: &Pose2<T>,
    fov: &FovSpec<T>,
    first_id: usize,
) -> Result<Vec<Neighborhood<T>>, PlannerError> {
    if grid.cell_of(ugv.position).is_none() {
        return Err(PlannerError::InvalidScenario("UGV lies outside the grid".into()));
    }
    if grid.is_obstacle_at(ugv.position) {
        return Err(PlannerError::InvalidScenario("UGV lies inside an obstacle cell".into()));
    }
    let (w, h) = (grid.width(), grid.height());
    let mut seen = vec![Seen::Unvisited; w * h];
    let res = grid.resolution();
    // Angular step small enough that adjacent rays are < half a cell apart at max range.
    let step = res / (T::lit(2.0) * fov.max_range);
    let n_rays = (fov.horizontal_fov / step).ceil().to_usize().unwrap_or(1).max(1);
    let half = fov.horizontal_fov * T::lit(0.5);
    for k in 0..=n_rays {
        let bearing = ugv.yaw - half + fov.horizontal_fov * T::lit(k as f64 / n_rays as f64);
        let dir = Vec2::from_polar(T::one(), bearing);
        let mut blocked = false;
        grid.traverse(ugv.position, dir, fov.max_range, |ix, iy, _, _| {
            let idx = iy * w + ix;
            if grid.state(ix, iy) == CellState::Obstacle {
                blocked = true;
            } else if blocked {
                if seen[idx] == Seen::Unvisited {
                    seen[idx] = Seen::Shadow;
                }
            } else {
                seen[idx] = Seen::Visible;
            }
            true
        });
    }

    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] != Seen::Shadow || label[start] != usize::MAX {
            continue;
        }
        let comp_id = out.len();
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        label[start] = comp_id;
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            let (ix, iy) = (c % w, c / w);
            let mut push = |nx: usize, ny: usize| {
                let n = ny * w + nx;
                if seen[n] == Seen::Shadow && label[n] == usize::MAX {
                    label[n] = comp_id;
                    queue.push_back(n);
                }
            };
            if ix > 0 {
                push(ix - 1, iy);
            }
            if ix + 1 < w {
                push(ix + 1, iy);
            }
            if iy > 0 {
                push(ix, iy - 1);
            }
            if iy + 1 < h {
                push(ix, iy + 1);
            }
        }
        out.push(inscribed_disk(grid, &cells, &label, comp_id, first_id + comp_id));
    }
    Ok(out)
}

fn inscribed_disk<T: Real>(
    grid: &OccupancyGrid<T>,
    cells: &[usize],
    label: &[usize],
    comp_id: usize,
    id: usize,
) -> Neighborhood<T> {
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    let res = grid.resolution();
    let center_of = |c: usize| grid.cell_center(c % w as usize, c / w as usize);
    let n = T::lit(cells.len() as f64);
    let centroid = cells.iter().fold(Vec2::zero(), |a, &c| a + center_of(c)) * (T::one() / n);

    // Boundary: cells outside the component that touch it, including
    // virtual cells just beyond the grid edge.
    let mut boundary: Vec<Vec2<T>> = Vec::new();
    for &c in cells {
        let (ix, iy) = ((c % w as usize) as isize, (c / w as usize) as isize);
        for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (ix + dx, iy + dy);
            let outside_grid = nx < 0 || ny < 0 || nx >= w || ny >= h;
            if outside_grid || label[(ny * w + nx) as usize] != comp_id {
                let o = grid.origin();
                let half = T::lit(0.5);
                boundary.push(Vec2::new(
                    o.x + (T::lit(nx as f64) + half) * res,
                    o.y + (T::lit(ny as f64) + half) * res,
                ));
            }
        }
    }
    let mut best = (T::neg_infinity(), T::infinity(), centroid);
    for &c in cells {
        let p = center_of(c);
        let clearance = boundary.iter().map(|&b| p.dist(b)).fold(T::infinity(), T::min) - res * T::lit(0.5);
        let to_centroid = p.dist(centroid);
        if clearance > best.0 || (clearance == best.0 && to_centroid < best.1) {
            best = (clearance, to_centroid, p);
        }
    }
    Neighborhood { id, center: best.2, radius: best.0.max(res) }
}

/// Whether `p` lies in the closed convex hull of `points`.
pub fn in_convex_hull<T: Real>(p: Vec2<T>, points: &[Vec2<T>]) -> bool {
    let tol = T::lit(1e-9);
    match points.len() {
        0 => false,
        1 => p.dist(points[0]) <= tol,
        _ => {
            let hull = convex_hull(points);
            if hull.len() < 3 {
                // Degenerate: segment between the extreme points.
                let (a, b) = (hull[0], *hull.last().unwrap_or(&hull[0]));
                let ab = b - a;
                let len = ab.norm();
                if len <= tol {
                    return p.dist(a) <= tol;
                }
                let t = (p - a).dot(ab) / (len * len);
                return (ab.cross(p - a) / len).abs() <= tol && t >= -tol && t <= T::one() + tol;
            }
            (0..hull.len()).all(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                (b - a).cross(p - a) >= -tol
            })
        }
    }
}

/// Anticlockwise convex hull (monotone chain).
fn convex_hull<T: Real>(points: &[Vec2<T>]) -> Vec<Vec2<T>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2<T>> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= T::zero() {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2<T>> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= T::zero() {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // All collinear: keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    lower
}

/// Drops neighborhoods whose centre falls inside the UGV hull, logging each.
pub fn drop_inside_hull<T: Real>(nbhs: Vec<Neighborhood<T>>, ugv_positions: &[Vec2<T>]) -> Vec<Neighborhood<T>> {
    nbhs.into_iter()
        .filter(|n| {
            let inside = in_convex_hull(n.center, ugv_positions);
            if inside {
                log::warn!("dropping neighborhood {} inside the UGV hull", n.id);
            }
            !inside
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn fov() -> FovSpec<f64> {
        FovSpec { horizontal_fov: FRAC_PI_2, vertical_fov: 0.4, max_range: 10.0 }
    }

    fn grid() -> OccupancyGrid<f64> {
        OccupancyGrid::new(40, 40, 0.5, Vec2::new(-10.0, -10.0)).unwrap()
    }

    #[test]
    fn empty_grid_has_no_shadows() {
        let n = blind_spot_neighborhoods(&grid(), &Pose2::new(0.0, 0.0, 0.0), &fov(), 0).unwrap();
        assert!(n.is_empty());
    }

    #[test]
    fn obstacle_ahead_casts_one_shadow_behind_it() {
        let mut g = grid();
        // 2x2 block centred on (3, 0).
        for (ix, iy) in [(25, 19), (26, 19), (25, 20), (26, 20)] {
            g.set(ix, iy, CellState::Obstacle);
        }
        let n = blind_spot_neighborhoods(&g, &Pose2::new(0.0, 0.0, 0.0), &fov(), 0).unwrap();
        assert_eq!(n.len(), 1);
        assert!(n[0].center.x > 3.5, "{:?}", n[0]);
        assert!(n[0].center.y.abs() <= 0.5, "{:?}", n[0]);
        assert!(n[0].radius >= 0.5);
    }

    #[test]
    fn obstacle_outside_wedge_is_ignored() {
        let mut g = grid();
        g.set(10, 20, CellState::Obstacle);
        let n = blind_spot_neighborhoods(&g, &Pose2::new(0.0, 0.0, 0.0), &fov(), 0).unwrap();
        assert!(n.is_empty());
    }

    #[test]
    fn ugv_in_obstacle_is_rejected() {
        let mut g = grid();
        g.set(20, 20, CellState::Obstacle);
        assert!(blind_spot_neighborhoods(&g, &Pose2::new(0.1, 0.1, 0.0), &fov(), 0).is_err());
    }

    #[test]
    fn hull_membership() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(0.0, 4.0)];
        assert!(in_convex_hull(Vec2::new(1.0, 1.0), &pts));
        assert!(!in_convex_hull(Vec2::new(3.0, 3.0), &pts));
        assert!(in_convex_hull(Vec2::new(2.0, 0.0), &pts[..2]));
        assert!(!in_convex_hull(Vec2::new(2.0, 0.5), &pts[..2]));
        let n = vec![Neighborhood { id: 0, center: Vec2::new(1.0, 1.0), radius: 1.0 }];
        assert!(drop_inside_hull(n, &pts).is_empty());
    }
}
