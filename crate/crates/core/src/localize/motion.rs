use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose;

/// Below this turn rate the straight-line update is used.
pub const ARC_THRESHOLD: f64 = 1e-9;

/// Unicycle control: forward speed (m/s) and turn rate (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const ZERO: Control = Control { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Control { v, omega }
    }
}

/// A run of identical controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub steps: usize,
    pub v: f64,
    pub omega: f64,
}

/// Piecewise-constant control schedule, repeated cyclically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlScript {
    pub segments: Vec<ControlSegment>,
}

impl ControlScript {
    pub fn new(segments: Vec<ControlSegment>) -> Result<Self> {
        if segments.is_empty() || segments.iter().all(|s| s.steps == 0) {
            return Err(Error::invalid("control script needs at least one non-empty segment"));
        }
        if segments.iter().any(|s| !(s.v.is_finite() && s.omega.is_finite())) {
            return Err(Error::invalid("control script has non-finite controls"));
        }
        Ok(ControlScript { segments })
    }

    pub fn constant(v: f64, omega: f64) -> Self {
        ControlScript {
            segments: vec![ControlSegment { steps: 1, v, omega }],
        }
    }

    /// Control applied at step `t` (0-based).
    pub fn at(&self, t: usize) -> Control {
        let period: usize = self.segments.iter().map(|s| s.steps).sum();
        let mut r = t % period;
        for s in &self.segments {
            if r < s.steps {
                return Control::new(s.v, s.omega);
            }
            r -= s.steps;
        }
        unreachable!("period covers every residue")
    }

    /// Parses `steps:v:omega` segments separated by commas.
    pub fn parse(text: &str) -> Result<Self> {
        let segments = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|seg| {
                let parts: Vec<&str> = seg.split(':').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::invalid(format!("control segment {seg:?} is not steps:v:omega")));
                }
                let steps = parts[0]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad step count in {seg:?}")))?;
                let v = parts[1]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad speed in {seg:?}")))?;
                let omega = parts[2]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad turn rate in {seg:?}")))?;
                Ok(ControlSegment { steps, v, omega })
            })
            .collect::<Result<Vec<_>>>()?;
        ControlScript::new(segments)
    }
}

/// Discrete-time unicycle with additive process noise `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub dt: f64,
    pub process_noise: Matrix3<f64>,
}

impl MotionModel {
    pub fn new(dt: f64, process_noise: Matrix3<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let sym = (process_noise - process_noise.transpose()).amax();
        let min_eig = process_noise.symmetric_eigen().eigenvalues.min();
        if sym > 1e-12 || min_eig < -1e-12 {
            return Err(Error::invalid("process noise must be symmetric positive semidefinite"));
        }
        Ok(MotionModel { dt, process_noise })
    }

    /// Noise-free model.
    pub fn unicycle(dt: f64) -> Result<Self> {
        MotionModel::new(dt, Matrix3::zeros())
    }

    /// Process noise from odometry standard deviations on speed and turn rate.
    pub fn with_odometry_noise(dt: f64, sigma_v: f64, sigma_omega: f64) -> Result<Self> {
        let sp = sigma_v * dt;
        let sh = sigma_omega * dt;
        MotionModel::new(dt, Matrix3::from_diagonal(&nalgebra::Vector3::new(sp * sp, sp * sp, sh * sh)))
    }
}

/// Advances `pose` by one step of `control`, using exact arc integration when turning.
pub fn motion_step(model: &MotionModel, pose: &Pose, control: Control) -> Pose {
    let dt = model.dt;
    let h = pose.heading();
    let Control { v, omega } = control;
    if omega.abs() > ARC_THRESHOLD {
        let h1 = h + omega * dt;
        let r = v / omega;
        Pose::new(
            pose.x() + r * (h1.sin() - h.sin()),
            pose.y() - r * (h1.cos() - h.cos()),
            h1,
        )
    } else {
        Pose::new(pose.x() + v * h.cos() * dt, pose.y() + v * h.sin() * dt, h + omega * dt)
    }
}

/// Jacobian of [`motion_step`] with respect to the pose.
pub fn motion_jacobian(model: &MotionModel, pose: &Pose, control: Control) -> Matrix3<f64> {
    let dt = model.dt;
    let h = pose.heading();
    let Control { v, omega } = control;
    let (dxdh, dydh) = if omega.abs() > ARC_THRESHOLD {
        let h1 = h + omega * dt;
        let r = v / omega;
        (r * (h1.cos() - h.cos()), r * (h1.sin() - h.sin()))
    } else {
        (-v * h.sin() * dt, v * h.cos() * dt)
    };
    Matrix3::new(1.0, 0.0, dxdh, 0.0, 1.0, dydh, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn zero_control_keeps_pose() {
        let m = MotionModel::unicycle(0.5).unwrap();
        let p = Pose::new(1.0, 2.0, 0.3);
        assert_eq!(motion_step(&m, &p, Control::ZERO), p);
    }

    #[test]
    fn straight_unit_step() {
        let m = MotionModel::unicycle(1.0).unwrap();
        let p = motion_step(&m, &Pose::new(1.0, 2.0, 0.0), Control::new(1.0, 0.0));
        assert_eq!((p.x(), p.y(), p.heading()), (2.0, 2.0, 0.0));
    }

    #[test]
    fn full_circle_returns_to_start() {
        let m = MotionModel::unicycle(0.1).unwrap();
        let steps = 100;
        let omega = TAU / (steps as f64 * m.dt);
        let start = Pose::new(0.3, -0.2, 1.1);
        let mut p = start;
        for _ in 0..steps {
            p = motion_step(&m, &p, Control::new(0.7, omega));
        }
        assert!(p.position_distance(&start) < 1e-9);
        assert!(p.difference(&start)[2].abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = MotionModel::unicycle(0.5).unwrap();
        for control in [Control::new(0.8, 0.0), Control::new(0.8, 0.6)] {
            let p = Pose::new(1.0, 1.0, 0.4);
            let j = motion_jacobian(&m, &p, control);
            let eps = 1e-6;
            let plus = motion_step(&m, &p.offset(&nalgebra::Vector3::new(0.0, 0.0, eps)), control);
            let minus = motion_step(&m, &p.offset(&nalgebra::Vector3::new(0.0, 0.0, -eps)), control);
            let fd = plus.difference(&minus) / (2.0 * eps);
            assert!((fd - j.column(2)).amax() < 1e-8);
        }
    }

    #[test]
    fn script_cycles_and_parses() {
        let s = ControlScript::parse("2:1.0:0.0, 1:-1.0:0.5").unwrap();
        assert_eq!(s.at(0), Control::new(1.0, 0.0));
        assert_eq!(s.at(2), Control::new(-1.0, 0.5));
        assert_eq!(s.at(3), Control::new(1.0, 0.0));
        assert!(ControlScript::parse("2:1.0").is_err());
        assert!(ControlScript::parse("").is_err());
    }
}
