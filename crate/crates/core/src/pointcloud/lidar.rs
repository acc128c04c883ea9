//! Synthetic limited-FoV lidar: ray casting against extruded occupancy-grid
//! obstacles and spherical MAV bodies.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose3, Vec2, Vec3};
use crate::planner::grid::{CellState, OccupancyGrid};
use crate::pointcloud::PointCloud;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarModel<T> {
    /// Full horizontal field of view, radians.
    pub horizontal_fov: T,
    /// Full vertical field of view, radians.
    pub vertical_fov: T,
    pub horizontal_step: T,
    pub vertical_step: T,
    pub max_range: T,
    /// Obstacle cells are extruded from the ground up to this height.
    pub obstacle_height: T,
}

impl<T: Real> Default for LidarModel<T> {
    /// Livox Horizon-like: 81.7 x 25.1 degrees.
    fn default() -> Self {
        Self {
            horizontal_fov: T::lit(81.7f64.to_radians()),
            vertical_fov: T::lit(25.1f64.to_radians()),
            horizontal_step: T::lit(0.2f64.to_radians()),
            vertical_step: T::lit(0.5f64.to_radians()),
            max_range: T::lit(30.0),
            obstacle_height: T::lit(1.5),
        }
    }
}

impl<T: Real> LidarModel<T> {
    /// Whether a world point lies inside the sensor's FoV frustum and range.
    pub fn in_fov(&self, pose: &Pose3<T>, p: Vec3<T>) -> bool {
        let local = pose.to_local(p);
        let horiz = local.xy().norm();
        let range = local.norm();
        if range > self.max_range || range == T::zero() {
            return false;
        }
        let half = T::lit(0.5);
        local.y.atan2(local.x).abs() <= self.horizontal_fov * half
            && local.z.atan2(horiz).abs() <= self.vertical_fov * half
    }

    /// Whether `p` is in the FoV and no obstacle blocks the segment to it.
    pub fn sees(&self, pose: &Pose3<T>, grid: &OccupancyGrid<T>, p: Vec3<T>) -> bool {
        if !self.in_fov(pose, p) {
            return false;
        }
        let d = p - pose.position;
        match self.cast_obstacles(pose.position, d * (T::one() / d.norm()), grid) {
            Some(t) => t >= d.norm(),
            None => true,
        }
    }

    /// Distance along the unit ray `dir` to the first obstacle surface.
    fn cast_obstacles(&self, origin: Vec3<T>, dir: Vec3<T>, grid: &OccupancyGrid<T>) -> Option<T> {
        let horiz = dir.xy().norm();
        if horiz <= T::epsilon() {
            return None;
        }
        let dir2 = Vec2::new(dir.x / horiz, dir.y / horiz);
        let slope = dir.z / horiz;
        let max_h = self.max_range * horiz;
        let height = self.obstacle_height;
        let mut hit = None;
        grid.traverse(origin.xy(), dir2, max_h, |ix, iy, t_in, t_out| {
            let z_in = origin.z + slope * t_in;
            if z_in < T::zero() {
                return false;
            }
            if grid.state(ix, iy) != CellState::Obstacle {
                return true;
            }
            if z_in <= height {
                hit = Some(t_in);
                return false;
            }
            if slope < T::zero() {
                let t_top = (height - origin.z) / slope;
                if t_top <= t_out {
                    hit = Some(t_top);
                    return false;
                }
            }
            true
        });
        hit.map(|t| t / horiz)
    }

    /// Scans the scene from `pose`. Points are returned in the sensor frame.
    pub fn scan(
        &self,
        agent: usize,
        pose: &Pose3<T>,
        grid: &OccupancyGrid<T>,
        mav_centers: &[Vec3<T>],
        body_radius: T,
    ) -> PointCloud<T> {
        let half = T::lit(0.5);
        let nh = (self.horizontal_fov / self.horizontal_step).floor().to_usize().unwrap_or(0);
        let nv = (self.vertical_fov / self.vertical_step).floor().to_usize().unwrap_or(0);
        let mut points = Vec::new();
        for kv in 0..=nv {
            let el = -self.vertical_fov * half + T::lit(kv as f64) * self.vertical_step;
            for kh in 0..=nh {
                let az = -self.horizontal_fov * half + T::lit(kh as f64) * self.horizontal_step;
                let local_dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let dir = local_dir.rotate_z(pose.yaw);
                let mut best = self.cast_obstacles(pose.position, dir, grid);
                for &c in mav_centers {
                    if let Some(t) = ray_sphere(pose.position, dir, c, body_radius) {
                        if best.is_none_or(|b| t < b) {
                            best = Some(t);
                        }
                    }
                }
                if let Some(t) = best.filter(|&t| t <= self.max_range) {
                    points.push(local_dir * t);
                }
            }
        }
        PointCloud { points, source_agent: agent, sensor_pose: *pose }
    }
}

/// Nearest non-negative intersection distance of a unit ray with a sphere.
fn ray_sphere<T: Real>(origin: Vec3<T>, dir: Vec3<T>, center: Vec3<T>, radius: T) -> Option<T> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < T::zero() {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    let t1 = -b + s;
    if t0 >= T::zero() {
        Some(t0)
    } else if t1 >= T::zero() {
        Some(t1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_grid() -> OccupancyGrid<f64> {
        OccupancyGrid::new(80, 80, 0.25, Vec2::new(-10.0, -10.0)).unwrap()
    }

    #[test]
    fn sphere_points_lie_on_body() {
        let lidar = LidarModel::default();
        let pose = Pose3::new(Vec3::new(0.0, 0.0, 0.5), 0.0);
        let mav = Vec3::new(5.0, 0.5, 1.0);
        let cloud = lidar.scan(0, &pose, &open_grid(), &[mav], 0.2);
        assert!(cloud.len() > 50, "only {} points", cloud.len());
        for p in &cloud.points {
            let w = pose.to_world(*p);
            assert!((w.dist(mav) - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn mav_outside_fov_is_invisible() {
        let lidar = LidarModel::default();
        let pose = Pose3::new(Vec3::new(0.0, 0.0, 0.5), 0.0);
        let behind = Vec3::new(-5.0, 0.0, 1.0);
        assert!(lidar.scan(0, &pose, &open_grid(), &[behind], 0.2).is_empty());
        assert!(!lidar.in_fov(&pose, behind));
        assert!(lidar.in_fov(&pose, Vec3::new(5.0, 0.0, 1.0)));
    }

    #[test]
    fn wall_occludes_and_returns_points() {
        let mut g = open_grid();
        // Wall of cells at x in [3, 3.25).
        for iy in 0..80 {
            g.set(52, iy, CellState::Obstacle);
        }
        let lidar = LidarModel::default();
        let pose = Pose3::new(Vec3::new(0.0, 0.0, 0.5), 0.0);
        let mav = Vec3::new(6.0, 0.0, 1.0);
        assert!(!lidar.sees(&pose, &g, mav));
        let cloud = lidar.scan(0, &pose, &g, &[mav], 0.2);
        assert!(!cloud.is_empty());
        for p in &cloud.points {
            let w = pose.to_world(*p);
            assert!((w.x - 3.0).abs() < 1e-9 && w.z <= 1.5 + 1e-9, "{w:?}");
        }
    }
}
