use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pose::{wrap_angle, Pose, PoseSpace};
use crate::types::ImageVector;

/// A point-like intensity source seen by the panoramic sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub position: [f64; 2],
    pub intensity: f64,
    pub angular_width: f64,
}

/// Hidden parameters of the image-modeling function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub landmarks: Vec<Landmark>,
    pub ambient_level: f64,
    pub seed: u64,
}

impl World {
    pub fn new(landmarks: Vec<Landmark>, ambient_level: f64, seed: u64) -> Result<Self> {
        if landmarks.len() < 3 {
            return Err(Error::invalid(format!(
                "world needs at least 3 landmarks, got {}",
                landmarks.len()
            )));
        }
        if !(0.0..=1.0).contains(&ambient_level) {
            return Err(Error::invalid(format!("ambient level {ambient_level} outside [0, 1]")));
        }
        for (i, l) in landmarks.iter().enumerate() {
            let finite = l.position.iter().all(|v| v.is_finite());
            if !finite || !(l.intensity > 0.0 && l.intensity.is_finite()) {
                return Err(Error::invalid(format!("landmark {i} has invalid position or intensity")));
            }
            if !(l.angular_width > 0.0 && l.angular_width < PI) {
                return Err(Error::invalid(format!(
                    "landmark {i} angular width {} outside (0, π)",
                    l.angular_width
                )));
            }
        }
        Ok(World {
            landmarks,
            ambient_level,
            seed,
        })
    }

    /// Landmarks on a jittered ring around the workspace, outside it.
    pub fn random(seed: u64, space: &PoseSpace, n_landmarks: usize) -> Result<Self> {
        if n_landmarks < 3 {
            return Err(Error::invalid("world needs at least 3 landmarks"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = space.center();
        let half_diag = 0.5 * space.diagonal();
        let slot = TAU / n_landmarks as f64;
        let landmarks = (0..n_landmarks)
            .map(|k| {
                let angle = slot * (k as f64 + rng.random_range(-0.3..0.3));
                let radius = half_diag * rng.random_range(1.4..2.3);
                Landmark {
                    position: [
                        center.x() + radius * angle.cos(),
                        center.y() + radius * angle.sin(),
                    ],
                    intensity: rng.random_range(0.4..0.8),
                    angular_width: rng.random_range(0.5..0.9),
                }
            })
            .collect();
        World::new(landmarks, 0.1, seed)
    }

    /// Stable content hash (hex SHA-256 prefix) over all parameters.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.ambient_level.to_le_bytes());
        for l in &self.landmarks {
            for v in [l.position[0], l.position[1], l.intensity, l.angular_width] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Panoramic 1-D intensity sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub p: usize,
    pub max_range: f64,
    pub falloff: f64,
}

impl SensorSpec {
    pub fn new(p: usize, max_range: f64, falloff: f64) -> Result<Self> {
        if p < 16 {
            return Err(Error::invalid(format!("sensor needs p >= 16, got {p}")));
        }
        if !(max_range > 0.0) || !(falloff > 0.0 && falloff.is_finite()) {
            return Err(Error::invalid("max_range and falloff must be positive"));
        }
        Ok(SensorSpec {
            p,
            max_range,
            falloff,
        })
    }
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            p: 1024,
            max_range: 100.0,
            falloff: 1.0,
        }
    }
}

/// Renders the panoramic image seen from `pose`.
///
/// Ray `j` looks along `heading + 2πj/p`; every landmark adds a Gaussian bump in
/// bearing, attenuated by `1 / (1 + dist^falloff)`, on top of the ambient level.
pub fn render_image(world: &World, sensor: &SensorSpec, space: &PoseSpace, pose: &Pose) -> Result<ImageVector> {
    space.check(pose)?;
    Ok(render_unchecked(world, sensor, pose))
}

pub(crate) fn render_unchecked(world: &World, sensor: &SensorSpec, pose: &Pose) -> ImageVector {
    let p = sensor.p;
    let visible: Vec<(f64, f64, f64)> = world
        .landmarks
        .iter()
        .filter_map(|l| {
            let dx = l.position[0] - pose.x();
            let dy = l.position[1] - pose.y();
            let dist = dx.hypot(dy);
            (dist <= sensor.max_range).then(|| {
                let gain = l.intensity / (1.0 + dist.powf(sensor.falloff));
                let inv_two_w2 = 1.0 / (2.0 * l.angular_width * l.angular_width);
                (dy.atan2(dx), gain, inv_two_w2)
            })
        })
        .collect();
    let values = DVector::from_fn(p, |j, _| {
        let ray = pose.heading() + TAU * j as f64 / p as f64;
        let mut v = world.ambient_level;
        for &(bearing, gain, inv_two_w2) in &visible {
            let db = wrap_angle(bearing - ray);
            v += gain * (-db * db * inv_two_w2).exp();
        }
        v.clamp(0.0, 1.0)
    });
    ImageVector::new(values).expect("rendered pixels are finite")
}
