use std::fmt::Write as _;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::filter::{kalman_update, FilterState, MeasurementModel};
use super::motion::{motion_step, Control, ControlScript, ControlSegment, MotionModel};
use crate::appearance::Oracle;
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::report::sig6;
use crate::types::ImageVector;

/// A simulated drive: the robot follows `controls` exactly while odometry reports them
/// corrupted by zero-mean Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub start: Pose,
    pub controls: ControlScript,
    pub steps: usize,
    pub dt: f64,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    /// Standard deviations of the initial filter covariance.
    pub initial_sigma: [f64; 3],
    pub seed: u64,
}

/// Four legs of `leg` steps: forward turning left, forward turning right, then both
/// undone in reverse. The true path is periodic with period `4·leg`.
pub fn shuttle_controls(leg: usize, v: f64, omega: f64) -> ControlScript {
    let seg = |v, omega| ControlSegment { steps: leg, v, omega };
    ControlScript {
        segments: vec![seg(v, omega), seg(v, -omega), seg(-v, omega), seg(-v, -omega)],
    }
}

impl Default for Scenario {
    /// 200 steps of a shuttle inside the default benchmark workspace.
    fn default() -> Self {
        Scenario {
            start: Pose::new(1.0, 2.0, 0.0),
            controls: shuttle_controls(10, 0.3, 0.06),
            steps: 200,
            dt: 0.5,
            sigma_v: 0.1,
            sigma_omega: 0.05,
            initial_sigma: [0.05, 0.05, 0.02],
            seed: 0,
        }
    }
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("scenario needs at least one step"));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_omega >= 0.0) {
            return Err(Error::invalid("odometry noise must be non-negative"));
        }
        if self.initial_sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("initial sigma must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn motion_model(&self) -> Result<MotionModel> {
        MotionModel::with_odometry_noise(self.dt, self.sigma_v, self.sigma_omega)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub step: usize,
    pub truth: Pose,
    pub dead_reckoned: Pose,
    pub filtered: Pose,
    pub covariance: Matrix3<f64>,
    pub innovation_norm: Option<f64>,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub steps: Vec<TrackStep>,
    /// Position RMSE over steps `1..`.
    pub rmse_filtered: f64,
    pub rmse_dead_reckoning: f64,
    pub skipped_updates: usize,
    /// Why the run stopped before the requested number of steps.
    pub truncated: Option<String>,
}

fn position_rmse(steps: &[TrackStep], pick: impl Fn(&TrackStep) -> Pose) -> f64 {
    let tail = &steps[1.min(steps.len())..];
    if tail.is_empty() {
        return 0.0;
    }
    let sq: f64 = tail.iter().map(|s| pick(s).position_distance(&s.truth).powi(2)).sum();
    (sq / tail.len() as f64).sqrt()
}

impl TrackReport {
    fn from_steps(steps: Vec<TrackStep>, truncated: Option<String>) -> Self {
        TrackReport {
            rmse_filtered: position_rmse(&steps, |s| s.filtered),
            rmse_dead_reckoning: position_rmse(&steps, |s| s.dead_reckoned),
            skipped_updates: steps.iter().filter(|s| s.skipped).count(),
            steps,
            truncated,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "step,true_x,true_y,true_heading,dr_x,dr_y,dr_heading,filt_x,filt_y,filt_heading,innovation_norm,skipped\n",
        );
        for s in &self.steps {
            let nu = s.innovation_norm.map(sig6).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                s.step,
                sig6(s.truth.x()),
                sig6(s.truth.y()),
                sig6(s.truth.heading()),
                sig6(s.dead_reckoned.x()),
                sig6(s.dead_reckoned.y()),
                sig6(s.dead_reckoned.heading()),
                sig6(s.filtered.x()),
                sig6(s.filtered.y()),
                sig6(s.filtered.heading()),
                nu,
                s.skipped
            );
        }
        out
    }

    /// Summary without the per-step rows.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "steps": self.steps.len().saturating_sub(1),
            "rmse_filtered": self.rmse_filtered,
            "rmse_dead_reckoning": self.rmse_dead_reckoning,
            "skipped_updates": self.skipped_updates,
            "truncated": self.truncated,
        })
    }
}

/// Runs the filter alongside dead reckoning. Observations are rendered at the true pose.
///
/// Stops early, with `truncated` set, if the true path leaves the pose space.
pub fn track_trajectory<M>(oracle: &Oracle, measurement: &M, scenario: &Scenario) -> Result<TrackReport>
where
    M: MeasurementModel<Observation = ImageVector> + ?Sized,
{
    scenario.validate()?;
    oracle.pose_space.check(&scenario.start)?;
    let motion = scenario.motion_model()?;
    let exact = MotionModel::unicycle(scenario.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let nv = Normal::new(0.0, scenario.sigma_v).map_err(|e| Error::invalid(e.to_string()))?;
    let nw = Normal::new(0.0, scenario.sigma_omega).map_err(|e| Error::invalid(e.to_string()))?;
    let s0 = scenario.initial_sigma;
    let p0 = Matrix3::from_diagonal(&nalgebra::Vector3::new(s0[0] * s0[0], s0[1] * s0[1], s0[2] * s0[2]));
    let mut state = FilterState::new(scenario.start, p0)?;
    let mut truth = scenario.start;
    let mut dead = scenario.start;
    let mut steps = vec![TrackStep {
        step: 0,
        truth,
        dead_reckoned: dead,
        filtered: state.pose,
        covariance: state.covariance,
        innovation_norm: None,
        skipped: false,
    }];
    for t in 0..scenario.steps {
        let u = scenario.controls.at(t);
        let next = motion_step(&exact, &truth, u);
        if !oracle.pose_space.contains(&next) {
            let reason = format!("true pose {next} at step {} leaves the pose space", t + 1);
            return Ok(TrackReport::from_steps(steps, Some(reason)));
        }
        truth = next;
        let odo = Control::new(u.v + nv.sample(&mut rng), u.omega + nw.sample(&mut rng));
        dead = motion_step(&exact, &dead, odo);
        let image = oracle.render(&truth)?;
        let out = kalman_update(&state, &motion, odo, &image, measurement)?;
        state = out.state;
        steps.push(TrackStep {
            step: t + 1,
            truth,
            dead_reckoned: dead,
            filtered: state.pose,
            covariance: state.covariance,
            innovation_norm: out.innovation_norm,
            skipped: out.skipped.is_some(),
        });
    }
    Ok(TrackReport::from_steps(steps, None))
}
