//! Shortest curvature-bounded paths between oriented planar configurations.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, Vec2};
use crate::planner::PlannerError;
use crate::scalar::{wrap_2pi, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    Left,
    Straight,
    Right,
}

impl DubinsWord {
    pub const ALL: [DubinsWord; 6] =
        [DubinsWord::Lsl, DubinsWord::Rsr, DubinsWord::Lsr, DubinsWord::Rsl, DubinsWord::Rlr, DubinsWord::Lrl];

    fn segments(self) -> [Seg; 3] {
        use Seg::*;
        match self {
            DubinsWord::Lsl => [Left, Straight, Left],
            DubinsWord::Rsr => [Right, Straight, Right],
            DubinsWord::Lsr => [Left, Straight, Right],
            DubinsWord::Rsl => [Right, Straight, Left],
            DubinsWord::Rlr => [Right, Left, Right],
            DubinsWord::Lrl => [Left, Right, Left],
        }
    }
}

/// A three-segment path. `params` are segment lengths in units of the
/// turning radius (turn angles for arcs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath<T> {
    pub start: Pose2<T>,
    pub word: DubinsWord,
    pub params: [T; 3],
    pub rho: T,
}

/// Position, heading and signed curvature at a point along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint<T> {
    pub pose: Pose2<T>,
    pub curvature: T,
}

impl<T: Real> DubinsPath<T> {
    /// A single circular arc of `angle` radians (positive) turning left or right.
    pub fn arc(start: Pose2<T>, rho: T, angle: T, left: bool) -> Self {
        let word = if left { DubinsWord::Lsl } else { DubinsWord::Rsr };
        Self { start, word, params: [angle, T::zero(), T::zero()], rho }
    }

    /// A straight segment.
    pub fn straight(start: Pose2<T>, length: T, rho: T) -> Self {
        Self { start, word: DubinsWord::Lsl, params: [T::zero(), length / rho, T::zero()], rho }
    }

    pub fn length(&self) -> T {
        (self.params[0] + self.params[1] + self.params[2]) * self.rho
    }

    pub fn end(&self) -> Pose2<T> {
        self.sample(self.length()).pose
    }

    /// Point at arc length `s`, clamped to `[0, length]`.
    pub fn sample(&self, s: T) -> PathPoint<T> {
        let mut remaining = s.max(T::zero()) / self.rho;
        let mut x = T::zero();
        let mut y = T::zero();
        let mut h = self.start.yaw;
        let mut curvature = T::zero();
        let segs = self.word.segments();
        for (k, seg) in segs.iter().enumerate() {
            let u = remaining.min(self.params[k]);
            let kappa = match seg {
                Seg::Left => T::one(),
                Seg::Right => -T::one(),
                Seg::Straight => T::zero(),
            };
            if self.params[k] > T::zero() {
                curvature = kappa / self.rho;
            }
            match seg {
                Seg::Left => {
                    x += (h + u).sin() - h.sin();
                    y += h.cos() - (h + u).cos();
                    h += u;
                }
                Seg::Right => {
                    x += h.sin() - (h - u).sin();
                    y += (h - u).cos() - h.cos();
                    h -= u;
                }
                Seg::Straight => {
                    x += u * h.cos();
                    y += u * h.sin();
                }
            }
            remaining -= u;
            if remaining <= T::zero() {
                break;
            }
        }
        let p = self.start.position + Vec2::new(x, y) * self.rho;
        PathPoint { pose: Pose2 { position: p, yaw: wrap_2pi(h) }, curvature }
    }
}

fn word_params<T: Real>(word: DubinsWord, alpha: T, beta: T, d: T) -> Option<[T; 3]> {
    let two = T::lit(2.0);
    let (sa, ca, sb, cb) = (alpha.sin(), alpha.cos(), beta.sin(), beta.cos());
    let cab = (alpha - beta).cos();
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0));
    let sqrt_clamped = |v: T| -> Option<T> {
        if v < -tol {
            None
        } else {
            Some(v.max(T::zero()).sqrt())
        }
    };
    let acos_clamped = |v: T| -> Option<T> {
        if v.abs() > T::one() + tol {
            None
        } else {
            Some(v.max(-T::one()).min(T::one()).acos())
        }
    };
    match word {
        DubinsWord::Lsl => {
            let p = sqrt_clamped(two + d * d - two * cab + two * d * (sa - sb))?;
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([wrap_2pi(tmp - alpha), p, wrap_2pi(beta - tmp)])
        }
        DubinsWord::Rsr => {
            let p = sqrt_clamped(two + d * d - two * cab + two * d * (sb - sa))?;
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([wrap_2pi(alpha - tmp), p, wrap_2pi(tmp - beta)])
        }
        DubinsWord::Lsr => {
            let p = sqrt_clamped(-two + d * d + two * cab + two * d * (sa + sb))?;
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-two).atan2(p);
            Some([wrap_2pi(tmp - alpha), p, wrap_2pi(tmp - beta)])
        }
        DubinsWord::Rsl => {
            let p = sqrt_clamped(-two + d * d + two * cab - two * d * (sa + sb))?;
            let tmp = (ca + cb).atan2(d - sa - sb) - two.atan2(p);
            Some([wrap_2pi(alpha - tmp), p, wrap_2pi(beta - tmp)])
        }
        DubinsWord::Rlr => {
            let p = wrap_2pi(T::TAU() - acos_clamped((T::lit(6.0) - d * d + two * cab + two * d * (sa - sb)) / T::lit(8.0))?);
            let t = wrap_2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / two);
            Some([t, p, wrap_2pi(alpha - beta - t + p)])
        }
        DubinsWord::Lrl => {
            let p = wrap_2pi(T::TAU() - acos_clamped((T::lit(6.0) - d * d + two * cab + two * d * (sb - sa)) / T::lit(8.0))?);
            let t = wrap_2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / two);
            Some([t, p, wrap_2pi(beta - alpha - t + p)])
        }
    }
}

/// The path of a given word from `q0` to `q1`, if that word can connect them.
pub fn dubins_word<T: Real>(q0: Pose2<T>, q1: Pose2<T>, rho: T, word: DubinsWord) -> Option<DubinsPath<T>> {
    let delta = q1.position - q0.position;
    let d = delta.norm() / rho;
    let theta = if d > T::zero() { delta.angle() } else { T::zero() };
    let alpha = wrap_2pi(q0.yaw - theta);
    let beta = wrap_2pi(q1.yaw - theta);
    let params = word_params(word, alpha, beta, d)?;
    let path = DubinsPath { start: q0, word, params, rho };
    // Reject numerically inconsistent solutions near word-family boundaries.
    let end = path.end();
    let scale = T::one().max(delta.norm() / rho);
    let tol = T::lit(1e-6).max(T::epsilon() * T::lit(1e3));
    let heading_err = (end.yaw - q1.yaw).sin().abs() + (T::one() - (end.yaw - q1.yaw).cos());
    if end.position.dist(q1.position) > tol * scale * rho || heading_err > tol * scale {
        return None;
    }
    Some(path)
}

/// Shortest of the six Dubins words from `q0` to `q1` with turning radius `rho`.
pub fn dubins_shortest<T: Real>(q0: Pose2<T>, q1: Pose2<T>, rho: T) -> Result<DubinsPath<T>, PlannerError> {
    if !(rho > T::zero()) || !rho.is_finite() {
        return Err(PlannerError::InvalidParameter(format!("turning radius must be positive, got {rho}")));
    }
    let delta = q1.position - q0.position;
    if delta.norm() <= T::epsilon() * rho && (q1.yaw - q0.yaw).cos() >= T::one() - T::epsilon() {
        return Ok(DubinsPath { start: q0, word: DubinsWord::Lsl, params: [T::zero(); 3], rho });
    }
    DubinsWord::ALL
        .iter()
        .filter_map(|&w| dubins_word(q0, q1, rho, w))
        .reduce(|a, b| if b.length() < a.length() { b } else { a })
        .ok_or_else(|| PlannerError::InvalidParameter("no Dubins word connects the configurations".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn lrl_reaches_goal() {
        let rho: f64 = 2.4718536195099237;
        let q0 = Pose2::new(4.476321155488009, 4.336356744012054, 0.7031587468135704);
        let q1 = Pose2::new(2.6689177539497564, 3.6380864177336125, 3.0370547787830984);
        let p = dubins_word(q0, q1, rho, DubinsWord::Lrl).unwrap();
        let end = p.end();
        assert!(end.position.dist(q1.position) < 1e-9);
        assert!((p.length() - 15.98394789).abs() < 1e-6, "{}", p.length());
    }

    #[test]
    fn identity_is_zero_length() {
        let q = Pose2::new(1.0, 2.0, 0.3);
        assert_eq!(dubins_shortest(q, q, 1.0).unwrap().length(), 0.0);
    }

    #[test]
    fn aligned_is_straight() {
        let q0 = Pose2::<f64>::new(0.0, 0.0, 0.5);
        let q1 = Pose2 { position: q0.position + Vec2::from_polar(10.0, 0.5), yaw: 0.5 };
        let p = dubins_shortest(q0, q1, 1.0).unwrap();
        assert!((p.length() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn reversal_in_place() {
        // Turning around in place needs more than a half circle.
        let q0 = Pose2::new(0.0, 0.0, 0.0);
        let q1 = Pose2::new(0.0, 0.0, PI);
        let p = dubins_shortest(q0, q1, 1.0).unwrap();
        assert!(p.end().position.dist(q1.position) < 1e-9);
        assert!(p.length() > PI);
    }

    #[test]
    fn rejects_bad_radius() {
        let q = Pose2::new(0.0, 0.0, 0.0);
        assert!(dubins_shortest(q, q, 0.0).is_err());
        assert!(dubins_shortest(q, q, -1.0).is_err());
    }

    #[test]
    fn samples_stay_on_curvature_bound() {
        let q0 = Pose2::new(0.0, 0.0, 0.0);
        let q1 = Pose2::new(3.0, 1.0, 2.5);
        let p = dubins_shortest(q0, q1, 1.5).unwrap();
        let n = 400;
        for k in 0..=n {
            let pt = p.sample(p.length() * k as f64 / n as f64);
            assert!(pt.curvature.abs() <= 1.0 / 1.5 + 1e-12);
        }
        assert!(p.length() >= q0.position.dist(q1.position));
    }
}
