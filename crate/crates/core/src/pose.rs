//! Robot poses and the pose space they are drawn from.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * ((a + PI) / two_pi).floor();
    if w >= PI {
        w -= two_pi;
    }
    if w < -PI {
        w += two_pi;
    }
    w
}

/// Planar robot pose: position in meters, heading in radians.
///
/// The heading is kept in `[-π, π)`; every constructor and arithmetic helper re-wraps it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    x: f64,
    y: f64,
    heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && heading.is_finite());
        Pose {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn try_new(x: f64, y: f64, heading: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && heading.is_finite()) {
            return Err(Error::invalid(format!(
                "pose ({x}, {y}, {heading}) has non-finite components"
            )));
        }
        Ok(Pose::new(x, y, heading))
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.heading)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Pose::new(v[0], v[1], v[2])
    }

    /// `self − other` with the heading component wrapped.
    pub fn difference(&self, other: &Pose) -> Vector3<f64> {
        Vector3::new(
            self.x - other.x,
            self.y - other.y,
            wrap_angle(self.heading - other.heading),
        )
    }

    pub fn offset(&self, delta: &Vector3<f64>) -> Pose {
        Pose::new(self.x + delta[0], self.y + delta[1], self.heading + delta[2])
    }

    pub fn position_distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance with the wrapped heading difference weighted by `heading_weight` (m/rad).
    pub fn weighted_distance(&self, other: &Pose, heading_weight: f64) -> f64 {
        let d = self.difference(other);
        (d[0] * d[0] + d[1] * d[1] + (heading_weight * d[2]).powi(2)).sqrt()
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.heading)
    }
}

/// Which headings the robot may take.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadingDomain {
    /// Orientation is not a free parameter.
    Fixed { value: f64 },
    /// Closed sub-interval of `[-π, π)` not crossing the seam.
    Interval { lo: f64, hi: f64 },
    FullCircle,
}

/// Box of admissible poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSpace {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub heading: HeadingDomain,
}

const DOMAIN_SLACK: f64 = 1e-9;

impl PoseSpace {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), heading: HeadingDomain) -> Result<Self> {
        for (name, (lo, hi)) in [("x_range", x_range), ("y_range", y_range)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("{name} [{lo}, {hi}] is degenerate")));
            }
        }
        match heading {
            HeadingDomain::Fixed { value } if !value.is_finite() => {
                return Err(Error::invalid("fixed heading must be finite"));
            }
            HeadingDomain::Interval { lo, hi } => {
                if !(lo >= -PI && hi < PI && hi > lo) {
                    return Err(Error::invalid(format!(
                        "heading interval [{lo}, {hi}] must be non-degenerate inside [-π, π)"
                    )));
                }
            }
            _ => {}
        }
        Ok(PoseSpace {
            x_range,
            y_range,
            heading,
        })
    }

    pub fn include_heading(&self) -> bool {
        !matches!(self.heading, HeadingDomain::Fixed { .. })
    }

    /// Intrinsic dimension of the pose manifold: 3, or 2 when heading is fixed.
    pub fn intrinsic_dim(&self) -> usize {
        if self.include_heading() {
            3
        } else {
            2
        }
    }

    /// Diagonal of the position workspace in meters.
    pub fn diagonal(&self) -> f64 {
        (self.x_range.1 - self.x_range.0).hypot(self.y_range.1 - self.y_range.0)
    }

    pub fn center(&self) -> Pose {
        let heading = match self.heading {
            HeadingDomain::Fixed { value } => value,
            HeadingDomain::Interval { lo, hi } => 0.5 * (lo + hi),
            HeadingDomain::FullCircle => 0.0,
        };
        Pose::new(
            0.5 * (self.x_range.0 + self.x_range.1),
            0.5 * (self.y_range.0 + self.y_range.1),
            heading,
        )
    }

    pub fn contains(&self, pose: &Pose) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo - DOMAIN_SLACK && v <= hi + DOMAIN_SLACK;
        if !inside(pose.x, self.x_range) || !inside(pose.y, self.y_range) {
            return false;
        }
        match self.heading {
            HeadingDomain::Fixed { value } => wrap_angle(pose.heading - value).abs() <= DOMAIN_SLACK,
            HeadingDomain::Interval { lo, hi } => inside(pose.heading, (lo, hi)),
            HeadingDomain::FullCircle => true,
        }
    }

    pub fn check(&self, pose: &Pose) -> Result<()> {
        if self.contains(pose) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(format!("pose {pose} lies outside the pose space")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_lands_in_half_open_interval() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.25) - (-PI + 0.25)).abs() < 1e-12);
        for k in -50..50 {
            let a = 0.37 * k as f64;
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            let turns = (a - w) / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn difference_wraps_across_seam() {
        let a = Pose::new(0.0, 0.0, PI - 0.1);
        let b = Pose::new(0.0, 0.0, -PI + 0.1);
        assert!((a.difference(&b)[2] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn pose_space_rejects_degenerate_ranges() {
        assert!(PoseSpace::new((1.0, 1.0), (0.0, 1.0), HeadingDomain::FullCircle).is_err());
        assert!(PoseSpace::new((0.0, 1.0), (0.0, 1.0), HeadingDomain::Interval { lo: 0.5, hi: 0.5 }).is_err());
        let s = PoseSpace::new((0.0, 1.0), (0.0, 2.0), HeadingDomain::Fixed { value: 0.0 }).unwrap();
        assert_eq!(s.intrinsic_dim(), 2);
        assert!(s.check(&Pose::new(0.5, 0.5, 0.1)).is_err());
        assert!(s.check(&Pose::new(0.5, 0.5, 0.0)).is_ok());
    }
}
