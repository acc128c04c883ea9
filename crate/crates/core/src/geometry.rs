//! Small fixed-size vector and pose types.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn from_polar(r: T, angle: T) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Bearing of the vector, in `(-pi, pi]`.
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Mirror across the y axis.
    pub fn mirror_x(self) -> Self {
        Self::new(-self.x, self.y)
    }

    pub fn extend(self, z: T) -> Vec3<T> {
        Vec3::new(self.x, self.y, z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn xy(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    /// Rotation about the z axis.
    pub fn rotate_z(self, angle: T) -> Self {
        self.xy().rotate(angle).extend(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

macro_rules! impl_ops {
    ($ty:ident, $($f:ident),+) => {
        impl<T: Real> Add for $ty<T> {
            type Output = Self;
            fn add(self, o: Self) -> Self { Self { $($f: self.$f + o.$f),+ } }
        }
        impl<T: Real> Sub for $ty<T> {
            type Output = Self;
            fn sub(self, o: Self) -> Self { Self { $($f: self.$f - o.$f),+ } }
        }
        impl<T: Real> Mul<T> for $ty<T> {
            type Output = Self;
            fn mul(self, k: T) -> Self { Self { $($f: self.$f * k),+ } }
        }
        impl<T: Real> Neg for $ty<T> {
            type Output = Self;
            fn neg(self) -> Self { Self { $($f: -self.$f),+ } }
        }
    };
}

impl_ops!(Vec2, x, y);
impl_ops!(Vec3, x, y, z);

/// Planar pose: position and heading (yaw, radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub position: Vec2<T>,
    pub yaw: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, yaw: T) -> Self {
        Self { position: Vec2::new(x, y), yaw }
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, p: Vec2<T>) -> Vec2<T> {
        (p - self.position).rotate(-self.yaw)
    }

    pub fn to_world(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.yaw) + self.position
    }
}

/// Pose of a sensor: 3D position plus yaw. Roll and pitch are taken as zero
/// (ground robots on level terrain, gimbal-stabilised payloads).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose3<T> {
    pub position: Vec3<T>,
    pub yaw: T,
}

impl<T: Real> Pose3<T> {
    pub fn new(position: Vec3<T>, yaw: T) -> Self {
        Self { position, yaw }
    }

    pub fn to_local(&self, p: Vec3<T>) -> Vec3<T> {
        (p - self.position).rotate_z(-self.yaw)
    }

    pub fn to_world(&self, p: Vec3<T>) -> Vec3<T> {
        p.rotate_z(self.yaw) + self.position
    }
}
