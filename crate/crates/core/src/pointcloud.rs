//! Point clouds, a k-d tree for closed-ball radius queries, and the MAV
//! presence score used to recover the orientation of a relative-position
//! estimate.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose3, Vec3};
use crate::scalar::Real;

pub mod lidar;

#[derive(Debug, Error)]
pub enum PointCloudError {
    #[error("search radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("non-finite point at index {0}")]
    NonFinitePoint(usize),
    #[error("malformed point data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<T> {
    /// Points in the sensor frame, meters.
    pub points: Vec<Vec3<T>>,
    pub source_agent: usize,
    /// Pose of the sensor in the shared frame at capture time.
    pub sensor_pose: Pose3<T>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vec3<T>>, source_agent: usize, sensor_pose: Pose3<T>) -> Result<Self, PointCloudError> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(PointCloudError::NonFinitePoint(i));
        }
        Ok(Self { points, source_agent, sensor_pose })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn build_index(&self) -> SpatialIndex<T> {
        SpatialIndex::build(&self.points)
    }

    /// Writes one `x,y,z` row per point, with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PointCloudError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "z"])?;
        for p in &self.points {
            wr.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, source_agent: usize, sensor_pose: Pose3<T>) -> Result<Self, PointCloudError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut points = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(PointCloudError::Format(format!("row {}: expected 3 fields", row + 1)));
            }
            let mut xyz = [T::zero(); 3];
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| PointCloudError::Format(format!("row {}: {e}", row + 1)))?;
                xyz[k] = T::lit(v);
            }
            points.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
        }
        Self::new(points, source_agent, sensor_pose)
    }

    /// Flat little-endian `f64` triples.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.points
            .iter()
            .flat_map(|p| [p.x, p.y, p.z])
            .flat_map(|v| v.as_f64().to_le_bytes())
            .collect()
    }

    pub fn from_le_bytes(bytes: &[u8], source_agent: usize, sensor_pose: Pose3<T>) -> Result<Self, PointCloudError> {
        if !bytes.len().is_multiple_of(24) {
            return Err(PointCloudError::Format(format!("{} bytes is not a multiple of 24", bytes.len())));
        }
        let vals: Vec<T> = bytes
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        let points = vals.chunks_exact(3).map(|v| Vec3::new(v[0], v[1], v[2])).collect();
        Self::new(points, source_agent, sensor_pose)
    }
}

/// Balanced k-d tree over a fixed point set (implicit median layout).
#[derive(Debug, Clone)]
pub struct SpatialIndex<T> {
    points: Vec<Vec3<T>>,
    // Permutation of point indices; node for `[lo, hi)` sits at the midpoint.
    order: Vec<usize>,
}

fn coord<T: Real>(p: &Vec3<T>, axis: usize) -> T {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

impl<T: Real> SpatialIndex<T> {
    pub fn build(points: &[Vec3<T>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        Self::partition(points, &mut order, 0);
        Self { points: points.to_vec(), order }
    }

    fn partition(points: &[Vec3<T>], idx: &mut [usize], depth: usize) {
        if idx.len() <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            coord(&points[a], axis).partial_cmp(&coord(&points[b], axis)).unwrap_or(Ordering::Equal)
        });
        let (left, right) = idx.split_at_mut(mid);
        Self::partition(points, left, depth + 1);
        Self::partition(points, &mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec3<T> {
        self.points[i]
    }

    /// Indices of all points in the closed ball, ascending.
    pub fn radius_search(&self, center: Vec3<T>, radius: T) -> Result<Vec<usize>, PointCloudError> {
        if !(radius >= T::zero()) {
            return Err(PointCloudError::NegativeRadius(radius.as_f64()));
        }
        let mut out = Vec::new();
        self.visit(0, self.order.len(), 0, center, radius, &mut |i| out.push(i));
        out.sort_unstable();
        Ok(out)
    }

    pub fn count_within(&self, center: Vec3<T>, radius: T) -> Result<usize, PointCloudError> {
        if !(radius >= T::zero()) {
            return Err(PointCloudError::NegativeRadius(radius.as_f64()));
        }
        let mut n = 0;
        self.visit(0, self.order.len(), 0, center, radius, &mut |_| n += 1);
        Ok(n)
    }

    fn visit(&self, lo: usize, hi: usize, depth: usize, c: Vec3<T>, r: T, f: &mut impl FnMut(usize)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let i = self.order[mid];
        let p = self.points[i];
        if (p - c).norm_sq() <= r * r {
            f(i);
        }
        let axis = depth % 3;
        let delta = coord(&c, axis) - coord(&p, axis);
        // Left subtree holds coordinates <= split, right holds >= split.
        if delta - r <= T::zero() {
            self.visit(lo, mid, depth + 1, c, r, f);
        }
        if delta + r >= T::zero() {
            self.visit(mid + 1, hi, depth + 1, c, r, f);
        }
    }
}

/// `|ball(R)| / (|ball(2R)| + 1)` around `candidate`: close to one when a
/// MAV-sized cluster sits at the candidate with empty surroundings.
pub fn mav_presence_score<T: Real>(index: &SpatialIndex<T>, candidate: Vec3<T>, r_mav: T) -> T {
    let inner = index.count_within(candidate, r_mav).unwrap_or(0);
    let outer = index.count_within(candidate, r_mav + r_mav).unwrap_or(0);
    T::lit(inner as f64) / T::lit(outer as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3<f64>], c: Vec3<f64>, r: f64) -> Vec<usize> {
        (0..points.len()).filter(|&i| (points[i] - c).norm_sq() <= r * r).collect()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3<f64>> {
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn empty_and_single_point() {
        let idx = SpatialIndex::<f64>::build(&[]);
        assert!(idx.radius_search(Vec3::zero(), 10.0).unwrap().is_empty());
        let idx = SpatialIndex::build(&[Vec3::<f64>::zero()]);
        assert_eq!(idx.radius_search(Vec3::zero(), 1.0).unwrap(), vec![0]);
        assert_eq!(idx.radius_search(Vec3::zero(), 0.0).unwrap(), vec![0]);
        assert!(matches!(idx.radius_search(Vec3::zero(), -1.0), Err(PointCloudError::NegativeRadius(_))));
    }

    #[test]
    fn matches_linear_scan_on_ten_thousand_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 10_000);
        let idx = SpatialIndex::build(&pts);
        for _ in 0..50 {
            let c = Vec3::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), rng.random_range(-3.0..3.0));
            let r = rng.random_range(0.0..2.0);
            assert_eq!(idx.radius_search(c, r).unwrap(), brute(&pts, c, r));
        }
    }

    #[test]
    fn integer_lattice_unit_ball_has_seven_points() {
        let mut pts = Vec::new();
        for x in -3..=3 {
            for y in -3..=3 {
                for z in -3..=3 {
                    pts.push(Vec3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let idx = SpatialIndex::build(&pts);
        assert_eq!(idx.radius_search(Vec3::zero(), 1.0).unwrap().len(), 7);
        // Duplicate coordinates on split planes are handled on both sides.
        assert_eq!(idx.count_within(Vec3::new(0.0, 0.0, 0.0), 2f64.sqrt()).unwrap(), 19);
    }

    #[test]
    fn presence_score_examples() {
        let empty = SpatialIndex::<f64>::build(&[]);
        assert_eq!(mav_presence_score(&empty, Vec3::zero(), 0.25), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = 0.25;
        let mut pts: Vec<Vec3<f64>> = (0..50)
            .map(|_| {
                let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                d * (rng.random_range(0.0..0.99) * r / d.norm())
            })
            .collect();
        let idx = SpatialIndex::build(&pts);
        assert!((mav_presence_score(&idx, Vec3::zero(), r) - 50.0 / 51.0).abs() < 1e-12);

        pts.extend((0..50).map(|_| {
            let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            d * (rng.random_range(1.01..1.99) * r / d.norm())
        }));
        let idx = SpatialIndex::build(&pts);
        let inner = brute(&pts, Vec3::zero(), r).len() as f64;
        let outer = brute(&pts, Vec3::zero(), 2.0 * r).len() as f64;
        assert_eq!((inner, outer), (50.0, 100.0));
        assert!((mav_presence_score(&idx, Vec3::zero(), r) - 50.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_binary_io() {
        let pose = Pose3::new(Vec3::new(0.0, 0.0, 0.5), 0.3);
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.25, 1e-3)], 2, pose).unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,y,z\n1,2,3\n"));
        assert_eq!(PointCloud::read_csv(&buf[..], 2, pose).unwrap(), cloud);
        let bytes = cloud.to_le_bytes();
        assert_eq!(bytes.len(), 48);
        assert_eq!(PointCloud::from_le_bytes(&bytes, 2, pose).unwrap(), cloud);
        assert!(PointCloud::<f64>::from_le_bytes(&bytes[..20], 2, pose).is_err());
        assert!(PointCloud::<f64>::read_csv("x,y,z\n1,2\n".as_bytes(), 0, pose).is_err());
        assert!(PointCloud::new(vec![Vec3::new(f64::NAN, 0.0, 0.0)], 0, pose).is_err());
    }
}
