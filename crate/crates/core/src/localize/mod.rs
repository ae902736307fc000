//! Final estimators `ψ*(X) = g_v(r*(ω(X)))` and `Φ*(θ) = g_u(R*(θ))`, the unicycle
//! motion model and the extended Kalman tracking loop.

mod filter;
pub mod motion;
mod track;

use nalgebra::DVector;

pub use filter::{
    covariance_from_residuals, estimate_covariances, kalman_update, FilterState, FilterVariant, LearnedMeasurement,
    LinearMeasurement, MeasurementModel, UpdateOutcome, COVARIANCE_FLOOR,
};
pub use motion::{motion_jacobian, motion_step, Control, ControlScript, ControlSegment, MotionModel};
pub use track::{shuttle_controls, track_trajectory, Scenario, TrackReport, TrackStep};

use crate::appearance::FeatureExtractor;
use crate::error::{Error, Result};
use crate::jacreg::{InputKind, JacobianRegressor};
use crate::pose::Pose;
use crate::tbml::TangentBundleModel;
use crate::types::{FeatureVector, ImageVector};

/// `ψ*`: image → features → embedding → pose block of the recovery.
#[derive(Clone, Copy, Debug)]
pub struct LocalizationEstimator<'a> {
    extractor: &'a FeatureExtractor,
    regressor: &'a JacobianRegressor,
    model: &'a TangentBundleModel,
}

impl<'a> LocalizationEstimator<'a> {
    pub fn new(extractor: &'a FeatureExtractor, regressor: &'a JacobianRegressor, model: &'a TangentBundleModel) -> Result<Self> {
        if regressor.kind() != InputKind::Feature {
            return Err(Error::invalid("localization needs a feature-space regressor"));
        }
        let m = model.feature_dim();
        if extractor.output_dim() != m || regressor.input_dim() != m || regressor.output_dim() != model.intrinsic_dim() {
            return Err(Error::invalid("extractor, regressor and model dimensions disagree"));
        }
        Ok(LocalizationEstimator { extractor, regressor, model })
    }

    pub fn extractor(&self) -> &'a FeatureExtractor {
        self.extractor
    }

    /// `r*(w)`.
    pub fn embed_features(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.regressor.predict(w)
    }

    pub fn pose_from_features(&self, w: &DVector<f64>) -> Result<Pose> {
        let y = self.embed_features(w)?;
        Ok(self.model.recover(&y)?.pose)
    }

    pub fn estimate_pose(&self, image: &ImageVector) -> Result<Pose> {
        let w = self.extractor.extract(image)?;
        self.pose_from_features(w.values())
    }
}

/// `Φ*`: pose → embedding → feature block of the recovery.
#[derive(Clone, Copy, Debug)]
pub struct FeatureModelEstimator<'a> {
    regressor: &'a JacobianRegressor,
    model: &'a TangentBundleModel,
}

impl<'a> FeatureModelEstimator<'a> {
    pub fn new(regressor: &'a JacobianRegressor, model: &'a TangentBundleModel) -> Result<Self> {
        if regressor.kind() != InputKind::Pose || regressor.output_dim() != model.intrinsic_dim() {
            return Err(Error::invalid("feature modeling needs a pose-space regressor matching the model"));
        }
        Ok(FeatureModelEstimator { regressor, model })
    }

    /// `R*(θ)`.
    pub fn embed_pose(&self, pose: &Pose) -> Result<DVector<f64>> {
        self.regressor.predict(&DVector::from_column_slice(pose.to_vector().as_slice()))
    }

    pub fn predict_features(&self, pose: &Pose) -> Result<FeatureVector> {
        Ok(self.model.recover(&self.embed_pose(pose)?)?.features)
    }
}
