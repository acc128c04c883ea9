//! Simulated UWB ranging, VIO egomotion and altitude readings, plus the
//! per-edge range smoother.
//!
//! Noise is drawn from counter-addressed ChaCha streams: every edge and every
//! agent owns its own stream, and a draw is located by `(seed, stream, draw
//! index)` alone. Adding robots or reordering calls never perturbs existing
//! streams.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose3, Vec3};
use crate::rigidity::{normalize_edge, Edge};
use crate::scalar::{wrap_pi, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("noise configuration: {0}")]
    InvalidNoise(String),
    #[error("VIO interval must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("smoothing gain must lie in (0, 1], got {0}")]
    InvalidGain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig<T> {
    /// UWB range standard deviation, meters.
    pub sigma_uwb: T,
    /// Per-step VIO translational standard deviation (per axis), meters.
    pub sigma_vio: T,
    /// Per-step VIO yaw standard deviation, radians.
    pub sigma_vio_rot: T,
    pub seed: u64,
}

impl<T: Real> Default for NoiseConfig<T> {
    fn default() -> Self {
        Self { sigma_uwb: T::lit(0.1), sigma_vio: T::lit(0.009), sigma_vio_rot: T::lit(0.002), seed: 0 }
    }
}

impl<T: Real> NoiseConfig<T> {
    pub fn noiseless(seed: u64) -> Self {
        Self { sigma_uwb: T::zero(), sigma_vio: T::zero(), sigma_vio_rot: T::zero(), seed }
    }

    /// Sigmas must be finite and non-negative, and VIO must be at least an
    /// order of magnitude tighter than UWB. A fully noiseless configuration is
    /// accepted.
    pub fn validate(&self) -> Result<(), SensorError> {
        for (name, s) in [("sigma_uwb", self.sigma_uwb), ("sigma_vio", self.sigma_vio), ("sigma_vio_rot", self.sigma_vio_rot)] {
            if !s.is_finite() || s < T::zero() {
                return Err(SensorError::InvalidNoise(format!("{name} must be finite and >= 0")));
            }
        }
        let ok = if self.sigma_uwb == T::zero() {
            self.sigma_vio == T::zero()
        } else {
            self.sigma_vio < self.sigma_uwb / T::lit(10.0)
        };
        if !ok {
            return Err(SensorError::InvalidNoise("sigma_vio must be below sigma_uwb / 10".into()));
        }
        Ok(())
    }
}

/// Which measurement family a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Uwb,
    Vio,
    Altitude,
}

/// Stream identifier for an edge or agent. Edges are normalised so that
/// `(i, j)` and `(j, i)` share a stream.
pub fn stream_id(kind: StreamKind, i: usize, j: usize) -> u64 {
    let (a, b) = match kind {
        StreamKind::Uwb => normalize_edge(i, j),
        _ => (i, j),
    };
    let tag = match kind {
        StreamKind::Uwb => 1u64,
        StreamKind::Vio => 2,
        StreamKind::Altitude => 3,
    };
    (tag << 56) | ((a as u64 & 0xFF_FFFF) << 28) | (b as u64 & 0xFF_FFFF)
}

// ChaCha words reserved per normal variate; the ziggurat sampler needs ~2 per
// attempt and practically never loops more than a handful of times.
const WORDS_PER_NORMAL: u128 = 64;
const NORMALS_PER_DRAW: u128 = 8;

/// Standard normal variate addressed by `(seed, stream, draw, slot)`.
pub fn standard_normal(seed: u64, stream: u64, draw: u64, slot: u32) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((draw as u128 * NORMALS_PER_DRAW + slot as u128) * WORDS_PER_NORMAL);
    rng.sample(StandardNormal)
}

fn gaussian<T: Real>(sigma: T, seed: u64, stream: u64, draw: u64, slot: u32) -> T {
    if sigma == T::zero() {
        return T::zero();
    }
    sigma * T::lit(standard_normal(seed, stream, draw, slot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement<T> {
    pub edge: Edge,
    pub range: T,
    pub timestamp: T,
}

/// Noisy UWB range between two agents, clamped at zero.
pub fn simulate_uwb<T: Real>(
    edge: Edge,
    p_i: Vec3<T>,
    p_j: Vec3<T>,
    cfg: &NoiseConfig<T>,
    draw: u64,
    timestamp: T,
) -> RangeMeasurement<T> {
    let edge = normalize_edge(edge.0, edge.1);
    let noise = gaussian(cfg.sigma_uwb, cfg.seed, stream_id(StreamKind::Uwb, edge.0, edge.1), draw, 0);
    RangeMeasurement { edge, range: (p_i.dist(p_j) + noise).max(T::zero()), timestamp }
}

/// Planar component of a 3D range given the altitude difference.
pub fn project_range<T: Real>(range: T, altitude_diff: T) -> T {
    (range * range - altitude_diff * altitude_diff).max(T::zero()).sqrt()
}

/// Egomotion reported by an agent's VIO over one interval, in the shared
/// orientation frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VioDelta<T> {
    pub agent: usize,
    /// Relative yaw over the interval, radians.
    pub yaw_delta: T,
    pub translation: Vec3<T>,
    pub dt: T,
}

impl<T: Real> VioDelta<T> {
    pub fn translation_norm(&self) -> T {
        self.translation.norm()
    }

    /// Relative rotation as a 2x2 row-major matrix.
    pub fn rotation(&self) -> [[T; 2]; 2] {
        let (s, c) = self.yaw_delta.sin_cos();
        [[c, -s], [s, c]]
    }
}

/// VIO delta between two consecutive true poses: yaw change plus small-angle
/// noise, displacement plus isotropic per-axis noise.
pub fn simulate_vio<T: Real>(
    agent: usize,
    prev: &Pose3<T>,
    now: &Pose3<T>,
    dt: T,
    cfg: &NoiseConfig<T>,
    draw: u64,
) -> Result<VioDelta<T>, SensorError> {
    if !(dt > T::zero()) {
        return Err(SensorError::NonPositiveDt(dt.as_f64()));
    }
    let stream = stream_id(StreamKind::Vio, agent, 0);
    let g = |slot| gaussian(cfg.sigma_vio, cfg.seed, stream, draw, slot);
    let noise = Vec3::new(g(0), g(1), g(2));
    let yaw_noise = gaussian(cfg.sigma_vio_rot, cfg.seed, stream, draw, 3);
    Ok(VioDelta {
        agent,
        yaw_delta: wrap_pi(now.yaw - prev.yaw) + yaw_noise,
        translation: (now.position - prev.position) + noise,
        dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltitudeReading<T> {
    pub agent: usize,
    pub h_lidar: T,
    pub h_uwb: T,
    pub h_vio: T,
}

/// Altitude from the downward lidar (tight), UWB (coarse) and VIO (tight).
pub fn simulate_altitude<T: Real>(agent: usize, true_altitude: T, cfg: &NoiseConfig<T>, draw: u64) -> AltitudeReading<T> {
    let stream = stream_id(StreamKind::Altitude, agent, 0);
    AltitudeReading {
        agent,
        h_lidar: (true_altitude + gaussian(cfg.sigma_vio, cfg.seed, stream, draw, 0)).max(T::zero()),
        h_uwb: true_altitude + gaussian(cfg.sigma_uwb, cfg.seed, stream, draw, 1),
        h_vio: true_altitude + gaussian(cfg.sigma_vio, cfg.seed, stream, draw, 2),
    }
}

/// Sensor mismatch: the largest pairwise absolute difference, meters.
pub fn altitude_mismatch<T: Real>(r: &AltitudeReading<T>) -> T {
    (r.h_lidar - r.h_uwb).abs().max((r.h_lidar - r.h_vio).abs()).max((r.h_uwb - r.h_vio).abs())
}

/// Lidar altitude when all sources agree to within `threshold` (strictly),
/// else the mean of the UWB and VIO altitudes.
pub fn fuse_altitude<T: Real>(r: &AltitudeReading<T>, threshold: T) -> T {
    if altitude_mismatch(r) < threshold {
        r.h_lidar
    } else {
        (r.h_uwb + r.h_vio) / T::lit(2.0)
    }
}

/// Constant-gain predictor-corrector on each edge's range.
///
/// The prediction moves the previous smoothed range by the relative
/// displacement both endpoints report through VIO, projected using the
/// current estimate of the edge vector. Without both VIO deltas or without an
/// edge-vector estimate the raw range passes through and resets the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSmoother<T> {
    gain: T,
    smoothed: BTreeMap<Edge, T>,
}

impl<T: Real> RangeSmoother<T> {
    pub const DEFAULT_GAIN: f64 = 0.3;

    pub fn new(gain: T) -> Result<Self, SensorError> {
        if !(gain > T::zero() && gain <= T::one()) {
            return Err(SensorError::InvalidGain(gain.as_f64()));
        }
        Ok(Self { gain, smoothed: BTreeMap::new() })
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    pub fn state(&self, edge: Edge) -> Option<T> {
        self.smoothed.get(&normalize_edge(edge.0, edge.1)).copied()
    }

    pub fn reset(&mut self, edge: Edge) {
        self.smoothed.remove(&normalize_edge(edge.0, edge.1));
    }

    /// `relative` is the estimated vector from `edge.0` to `edge.1` at the
    /// previous step, in the same frame as the VIO translations.
    pub fn smooth(
        &mut self,
        meas: &RangeMeasurement<T>,
        vio_i: Option<&VioDelta<T>>,
        vio_j: Option<&VioDelta<T>>,
        relative: Option<Vec3<T>>,
    ) -> T {
        let edge = normalize_edge(meas.edge.0, meas.edge.1);
        let raw = meas.range.max(T::zero());
        let prev = self.smoothed.get(&edge).copied();
        let out = match (prev, vio_i, vio_j, relative) {
            (Some(prev), Some(vi), Some(vj), Some(rel)) => {
                let n = rel.norm();
                let dir = if n > T::epsilon() { rel * (T::one() / n) } else { Vec3::zero() };
                let predicted = (dir * prev + vj.translation - vi.translation).norm();
                (predicted + self.gain * (raw - predicted)).max(T::zero())
            }
            _ => raw,
        };
        self.smoothed.insert(edge, out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma_uwb: f64, sigma_vio: f64, seed: u64) -> NoiseConfig<f64> {
        NoiseConfig { sigma_uwb, sigma_vio, sigma_vio_rot: sigma_vio / 5.0, seed }
    }

    fn mean_std(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn noise_config_validation() {
        assert!(NoiseConfig::<f64>::default().validate().is_ok());
        assert!(NoiseConfig::<f64>::noiseless(1).validate().is_ok());
        assert!(cfg(0.1, 0.01, 0).validate().is_err());
        assert!(cfg(0.1, 0.0099, 0).validate().is_ok());
        assert!(cfg(-0.1, 0.0, 0).validate().is_err());
        assert!(cfg(0.0, 0.001, 0).validate().is_err());
    }

    #[test]
    fn uwb_zero_noise_is_exact() {
        let m = simulate_uwb((0, 1), Vec3::zero(), Vec3::new(3.0, 4.0, 0.0), &NoiseConfig::noiseless(3), 0, 0.0);
        assert_eq!(m.range, 5.0);
    }

    #[test]
    fn uwb_monte_carlo_statistics() {
        let c = cfg(0.1, 0.0, 42);
        let p = Vec3::new(3.0, 4.0, 0.0);
        let xs: Vec<f64> = (0..10_000).map(|k| simulate_uwb((0, 1), Vec3::zero(), p, &c, k, 0.0).range).collect();
        let (m, s) = mean_std(&xs);
        assert!((4.99..=5.01).contains(&m), "mean {m}");
        assert!((0.095..=0.105).contains(&s), "std {s}");
    }

    #[test]
    fn uwb_clamped_and_symmetric() {
        let c = cfg(0.1, 0.0, 9);
        let p = Vec3::new(1.0, 2.0, 0.5);
        for k in 0..2000 {
            assert!(simulate_uwb((2, 5), p, p, &c, k, 0.0).range >= 0.0);
            let a = simulate_uwb((2, 5), Vec3::zero(), p, &c, k, 0.0);
            let b = simulate_uwb((5, 2), p, Vec3::zero(), &c, k, 0.0);
            assert_eq!(a.range.to_bits(), b.range.to_bits());
        }
    }

    #[test]
    fn streams_are_independent_of_each_other() {
        // Same draw index, different edges: different noise; same edge: bit-identical.
        let a = standard_normal(1, stream_id(StreamKind::Uwb, 0, 1), 7, 0);
        let b = standard_normal(1, stream_id(StreamKind::Uwb, 0, 2), 7, 0);
        let a2 = standard_normal(1, stream_id(StreamKind::Uwb, 1, 0), 7, 0);
        assert_ne!(a, b);
        assert_eq!(a.to_bits(), a2.to_bits());
    }

    #[test]
    fn vio_noiseless_cases() {
        let c = NoiseConfig::<f64>::noiseless(0);
        let p = Pose3::new(Vec3::new(1.0, 2.0, 0.0), 0.3);
        let d = simulate_vio(0, &p, &p, 0.1, &c, 0).unwrap();
        assert_eq!(d.translation, Vec3::zero());
        assert_eq!(d.yaw_delta, 0.0);
        let q = Pose3::new(Vec3::new(1.1, 2.0, 0.0), 0.3);
        let d = simulate_vio(0, &p, &q, 0.1, &c, 0).unwrap();
        assert!((d.translation_norm() - 0.1).abs() < 1e-12);
        assert_eq!(d.rotation(), [[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(simulate_vio(0, &p, &q, 0.0, &c, 0), Err(SensorError::NonPositiveDt(_))));
    }

    #[test]
    fn vio_drift_grows_like_sqrt_k() {
        // Random-walk oracle: after k steps the accumulated per-axis error has
        // standard deviation sqrt(k) * sigma.
        let sigma = 0.009;
        let c = cfg(0.1, sigma, 5);
        let p0 = Pose3::new(Vec3::zero(), 0.0);
        let p1 = Pose3::new(Vec3::new(0.1, 0.0, 0.0), 0.0);
        for k in [4usize, 25, 100] {
            let errs: Vec<f64> = (0..1000)
                .map(|agent| {
                    (0..k)
                        .map(|step| simulate_vio(agent, &p0, &p1, 0.1, &c, step as u64).unwrap().translation.x - 0.1)
                        .sum()
                })
                .collect();
            let (_, s) = mean_std(&errs);
            let expect = (k as f64).sqrt() * sigma;
            assert!((s / expect - 1.0).abs() < 0.1, "k={k}: std {s} vs {expect}");
        }
    }

    #[test]
    fn altitude_fusion_branches() {
        let r = AltitudeReading::<f64> { agent: 1, h_lidar: 1.50, h_uwb: 1.52, h_vio: 1.49 };
        assert_eq!(fuse_altitude(&r, 1.0), 1.50);
        let r = AltitudeReading { agent: 1, h_lidar: 9.00, h_uwb: 1.52, h_vio: 1.49 };
        assert!((fuse_altitude(&r, 1.0) - 1.505f64).abs() < 1e-12);
        // Mismatch exactly at the threshold takes the fallback.
        let r = AltitudeReading { agent: 1, h_lidar: 2.0, h_uwb: 1.0, h_vio: 1.5 };
        assert_eq!(altitude_mismatch(&r), 1.0);
        assert_eq!(fuse_altitude(&r, 1.0), 1.25);
    }

    #[test]
    fn smoother_gain_one_is_identity() {
        let mut s = RangeSmoother::new(1.0).unwrap();
        let v = VioDelta { agent: 0, yaw_delta: 0.0, translation: Vec3::new(0.1, 0.0, 0.0), dt: 0.1 };
        for (k, z) in [5.0, 5.3, 4.8, 5.1].into_iter().enumerate() {
            let m = RangeMeasurement { edge: (0, 1), range: z, timestamp: k as f64 };
            let out = s.smooth(&m, Some(&v), Some(&v), Some(Vec3::new(5.0, 0.0, 0.0)));
            assert_eq!(out, z);
        }
        assert!(RangeSmoother::new(0.0).is_err());
        assert!(RangeSmoother::new(1.5).is_err());
    }

    #[test]
    fn smoother_tracks_noiseless_moving_pair() {
        let c = NoiseConfig::noiseless(0);
        let mut s = RangeSmoother::new(0.3).unwrap();
        let pos_i = |t: f64| Pose3::new(Vec3::new(0.5 * t, 0.2 * t, 0.0), 0.0);
        let pos_j = |t: f64| Pose3::new(Vec3::new(6.0 - 0.3 * t, 1.0 + 0.4 * t, 0.1 * t), 0.0);
        let dt = 0.1;
        for k in 0..200u64 {
            let t = k as f64 * dt;
            let (pi, pj) = (pos_i(t), pos_j(t));
            let m = simulate_uwb((0, 1), pi.position, pj.position, &c, k, t);
            let (vi, vj, rel) = if k == 0 {
                (None, None, None)
            } else {
                let (qi, qj) = (pos_i(t - dt), pos_j(t - dt));
                (
                    Some(simulate_vio(0, &qi, &pi, dt, &c, k).unwrap()),
                    Some(simulate_vio(1, &qj, &pj, dt, &c, k).unwrap()),
                    Some(qj.position - qi.position),
                )
            };
            let out = s.smooth(&m, vi.as_ref(), vj.as_ref(), rel);
            assert!((out - pi.position.dist(pj.position)).abs() < 1e-9, "step {k}");
        }
    }

    #[test]
    fn smoother_reduces_variance_of_static_pair() {
        let c = cfg(0.1, 0.009, 11);
        let mut s = RangeSmoother::new(0.3).unwrap();
        let p = Pose3::new(Vec3::zero(), 0.0);
        let q = Pose3::new(Vec3::new(5.0, 0.0, 0.0), 0.0);
        let (mut raw, mut out) = (Vec::new(), Vec::new());
        for k in 0..1000u64 {
            let m = simulate_uwb((0, 1), p.position, q.position, &c, k, 0.0);
            let vi = simulate_vio(0, &p, &p, 0.1, &c, k).unwrap();
            let vj = simulate_vio(1, &q, &q, 0.1, &c, k).unwrap();
            raw.push(m.range);
            out.push(s.smooth(&m, Some(&vi), Some(&vj), Some(q.position - p.position)));
        }
        let (_, s_raw) = mean_std(&raw);
        let (m_out, s_out) = mean_std(&out[50..]);
        assert!(s_out < s_raw, "{s_out} !< {s_raw}");
        // Long-run mean within 3 standard errors of the true range. Successive
        // outputs are correlated; the standard error uses the raw sigma and
        // the effective sample size of an AR(1) with coefficient 1 - gain.
        let n_eff = out[50..].len() as f64 * 0.3 / 1.7;
        assert!((m_out - 5.0).abs() < 3.0 * s_out / n_eff.sqrt(), "mean {m_out}");
    }

    #[test]
    fn smoother_passes_through_without_vio() {
        let mut s = RangeSmoother::new(0.3).unwrap();
        let m = RangeMeasurement { edge: (1, 0), range: 4.0, timestamp: 0.0 };
        assert_eq!(s.smooth(&m, None, None, None), 4.0);
        let m = RangeMeasurement { edge: (0, 1), range: 6.0, timestamp: 0.1 };
        assert_eq!(s.smooth(&m, None, None, Some(Vec3::new(1.0, 0.0, 0.0))), 6.0);
        assert_eq!(s.state((1, 0)), Some(6.0));
    }
}
