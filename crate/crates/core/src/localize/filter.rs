use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::motion::{motion_jacobian, motion_step, Control, MotionModel};
use super::{FeatureModelEstimator, LocalizationEstimator};
use crate::error::{Error, Result};
use crate::numeric::floor_spd;
use crate::pose::{wrap_angle, Pose};
use crate::types::ImageVector;

/// Eigenvalue floor for estimated covariances.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

/// Largest innovation-covariance condition number accepted by the update.
const MAX_INNOVATION_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub pose: Pose,
    pub covariance: Matrix3<f64>,
    pub t: usize,
}

impl FilterState {
    pub fn new(pose: Pose, covariance: Matrix3<f64>) -> Result<Self> {
        let sym = (covariance - covariance.transpose()).amax();
        if sym > 1e-12 || covariance.symmetric_eigen().eigenvalues.min() < -1e-12 {
            return Err(Error::invalid("initial covariance must be symmetric positive semidefinite"));
        }
        Ok(FilterState { pose, covariance, t: 0 })
    }
}

/// What the filter compares: embedding coordinates, raw features or poses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVariant {
    Embedding,
    Feature,
    Pose,
}

impl std::str::FromStr for FilterVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(FilterVariant::Embedding),
            "feature" => Ok(FilterVariant::Feature),
            "pose" => Ok(FilterVariant::Pose),
            other => Err(Error::invalid(format!("unknown filter variant {other:?}"))),
        }
    }
}

/// Observation model `z = h(θ) + v`, `v ~ N(0, R)`.
pub trait MeasurementModel {
    type Observation;

    /// Measurement vector extracted from a raw observation.
    fn observe(&self, obs: &Self::Observation) -> Result<DVector<f64>>;

    /// Predicted measurement at `pose`.
    fn predict(&self, pose: &Pose) -> Result<DVector<f64>>;

    fn noise(&self) -> &DMatrix<f64>;

    /// `z − ẑ`.
    fn innovation(&self, z: &DVector<f64>, zhat: &DVector<f64>) -> DVector<f64> {
        z - zhat
    }

    /// Central-difference step per pose coordinate.
    fn jacobian_step(&self) -> f64 {
        1e-4
    }

    /// `∂ predict / ∂ θ`.
    fn jacobian(&self, pose: &Pose) -> Result<DMatrix<f64>> {
        let h = self.jacobian_step();
        let mut cols = Vec::with_capacity(3);
        for c in 0..3 {
            let mut d = Vector3::zeros();
            d[c] = h;
            let plus = self.predict(&pose.offset(&d))?;
            let minus = self.predict(&pose.offset(&-d))?;
            cols.push(self.innovation(&plus, &minus) / (2.0 * h));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Known linear observation `z = H θ + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMeasurement {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl MeasurementModel for LinearMeasurement {
    type Observation = DVector<f64>;

    fn observe(&self, obs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(obs.clone())
    }

    fn predict(&self, pose: &Pose) -> Result<DVector<f64>> {
        Ok(&self.h * DVector::from_column_slice(pose.to_vector().as_slice()))
    }

    fn noise(&self) -> &DMatrix<f64> {
        &self.r
    }

    fn jacobian(&self, _pose: &Pose) -> Result<DMatrix<f64>> {
        Ok(self.h.clone())
    }
}

/// Measurements built from the learned maps.
#[derive(Clone, Debug)]
pub struct LearnedMeasurement<'a> {
    pub variant: FilterVariant,
    pub localization: LocalizationEstimator<'a>,
    pub feature_model: FeatureModelEstimator<'a>,
    pub noise: DMatrix<f64>,
    pub step: f64,
}

impl<'a> LearnedMeasurement<'a> {
    pub fn new(
        variant: FilterVariant,
        localization: LocalizationEstimator<'a>,
        feature_model: FeatureModelEstimator<'a>,
        noise: DMatrix<f64>,
        step: f64,
    ) -> Result<Self> {
        let dim = match variant {
            FilterVariant::Embedding => localization.model.intrinsic_dim(),
            FilterVariant::Feature => localization.model.feature_dim(),
            FilterVariant::Pose => 3,
        };
        if noise.shape() != (dim, dim) {
            return Err(Error::invalid(format!("measurement noise must be {dim}x{dim} for this variant")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("jacobian step must be positive"));
        }
        Ok(LearnedMeasurement {
            variant,
            localization,
            feature_model,
            noise,
            step,
        })
    }

    /// Measurement from already-extracted features.
    pub fn observe_features(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        match self.variant {
            FilterVariant::Embedding => self.localization.embed_features(w),
            FilterVariant::Feature => Ok(w.clone()),
            FilterVariant::Pose => Ok(pose_vector(&self.localization.pose_from_features(w)?)),
        }
    }
}

fn pose_vector(p: &Pose) -> DVector<f64> {
    DVector::from_column_slice(p.to_vector().as_slice())
}

impl MeasurementModel for LearnedMeasurement<'_> {
    type Observation = ImageVector;

    fn observe(&self, image: &ImageVector) -> Result<DVector<f64>> {
        let w = self.localization.extractor().extract(image)?;
        self.observe_features(w.values())
    }

    fn predict(&self, pose: &Pose) -> Result<DVector<f64>> {
        let w = self.feature_model.predict_features(pose)?;
        self.observe_features(w.values())
    }

    fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    fn innovation(&self, z: &DVector<f64>, zhat: &DVector<f64>) -> DVector<f64> {
        let mut d = z - zhat;
        if self.variant == FilterVariant::Pose {
            d[2] = wrap_angle(d[2]);
        }
        d
    }

    fn jacobian_step(&self) -> f64 {
        self.step
    }
}

/// Result of one predict/update cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateOutcome {
    pub state: FilterState,
    pub innovation_norm: Option<f64>,
    /// Set when the measurement was unusable and only the prediction was applied.
    pub skipped: Option<String>,
}

fn symmetrize3(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

/// One EKF cycle: unicycle prediction with `control`, then the measurement update.
pub fn kalman_update<M: MeasurementModel + ?Sized>(
    state: &FilterState,
    motion: &MotionModel,
    control: Control,
    observation: &M::Observation,
    measurement: &M,
) -> Result<UpdateOutcome> {
    let prior_pose = motion_step(motion, &state.pose, control);
    let fj = motion_jacobian(motion, &state.pose, control);
    let prior_cov = symmetrize3(&(fj * state.covariance * fj.transpose() + motion.process_noise));
    let prior = FilterState {
        pose: prior_pose,
        covariance: prior_cov,
        t: state.t + 1,
    };
    let skip = |e: Error| -> Result<UpdateOutcome> {
        match e {
            Error::Extrapolation { .. } | Error::OutOfSupport { .. } => Ok(UpdateOutcome {
                state: prior,
                innovation_norm: None,
                skipped: Some(e.to_string()),
            }),
            other => Err(other),
        }
    };
    let z = match measurement.observe(observation) {
        Ok(z) => z,
        Err(e) => return skip(e),
    };
    let zhat = match measurement.predict(&prior_pose) {
        Ok(v) => v,
        Err(e) => return skip(e),
    };
    let h = match measurement.jacobian(&prior_pose) {
        Ok(h) => h,
        Err(e) => return skip(e),
    };
    let nu = measurement.innovation(&z, &zhat);
    let r = measurement.noise();
    if nu.len() != r.nrows() || h.shape() != (nu.len(), 3) {
        return Err(Error::invalid("measurement, Jacobian and noise dimensions disagree"));
    }
    let innovation_norm = Some(nu.norm());
    if r.iter().any(|v| !v.is_finite()) {
        // unbounded measurement noise: zero gain
        return Ok(UpdateOutcome {
            state: prior,
            innovation_norm,
            skipped: None,
        });
    }
    let p = DMatrix::from_column_slice(3, 3, prior_cov.as_slice());
    let s = &h * &p * h.transpose() + r;
    let s = (&s + s.transpose()) * 0.5;
    let cond = crate::numeric::condition_number(&s);
    let s_inv = match s.clone().try_inverse() {
        Some(inv) if cond < MAX_INNOVATION_CONDITION => inv,
        _ => {
            return Err(Error::Conditioning {
                context: "innovation covariance".into(),
                condition: cond,
            })
        }
    };
    let gain = &p * h.transpose() * s_inv;
    let dx = &gain * &nu;
    let pose = prior_pose.offset(&Vector3::new(dx[0], dx[1], dx[2]));
    let post = (DMatrix::identity(3, 3) - &gain * &h) * &p;
    let covariance = symmetrize3(&Matrix3::from_column_slice(post.as_slice()));
    Ok(UpdateOutcome {
        state: FilterState {
            pose,
            covariance,
            t: state.t + 1,
        },
        innovation_norm,
        skipped: None,
    })
}

/// Centered sample covariance of residual rows, symmetrized and eigenvalue-floored.
pub fn covariance_from_residuals(residuals: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let n = residuals.len();
    if n < 4 {
        return Err(Error::InsufficientSample { got: n, need: 4 });
    }
    let d = residuals[0].len();
    if residuals.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("residuals differ in dimension"));
    }
    let mean = residuals.iter().fold(DVector::zeros(d), |a, r| a + r) / n as f64;
    let mut c = DMatrix::zeros(d, d);
    for r in residuals {
        let e = r - &mean;
        c += &e * e.transpose();
    }
    c /= (n - 1) as f64;
    Ok(floor_spd(&c, COVARIANCE_FLOOR))
}

/// `R_meas` from residuals `observe(X_i) − predict(θ_i)` over `(image, pose)` pairs,
/// and `Q` from the motion model, both floored.
pub fn estimate_covariances<'s, M, I>(samples: I, measurement: &M, motion: &MotionModel) -> Result<(DMatrix<f64>, Matrix3<f64>)>
where
    M: MeasurementModel<Observation = ImageVector> + ?Sized,
    I: IntoIterator<Item = (&'s ImageVector, &'s Pose)>,
{
    let residuals = samples
        .into_iter()
        .map(|(x, pose)| Ok(measurement.innovation(&measurement.observe(x)?, &measurement.predict(pose)?)))
        .collect::<Result<Vec<_>>>()?;
    let rmeas = covariance_from_residuals(&residuals)?;
    let q = floor_spd(&DMatrix::from_column_slice(3, 3, motion.process_noise.as_slice()), COVARIANCE_FLOOR);
    Ok((rmeas, Matrix3::from_column_slice(q.as_slice())))
}
