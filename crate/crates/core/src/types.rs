//! Vector newtypes and the labeled dataset shared across modules.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose;

fn check_finite(values: &DVector<f64>, what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} entry {i} is not finite")));
    }
    Ok(())
}

/// A captured image flattened to `p` intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVector(DVector<f64>);

impl ImageVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("image vector must be non-empty"));
        }
        check_finite(&values, "image")?;
        Ok(ImageVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Feature vector `w = ω(X)` of length `m ≥ 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::invalid(format!(
                "feature vector needs length >= 3, got {}",
                values.len()
            )));
        }
        check_finite(&values, "feature")?;
        Ok(FeatureVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Stacked point `Z = (w, θ)` on the regression manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionPoint {
    pub features: FeatureVector,
    pub pose: Pose,
}

impl RegressionPoint {
    pub fn new(features: FeatureVector, pose: Pose) -> Self {
        RegressionPoint { features, pose }
    }

    pub fn feature_dim(&self) -> usize {
        self.features.len()
    }

    /// Concatenates `(scale · w, x, y, heading)`; the split index is `m`.
    pub fn stacked(&self, feature_scale: f64) -> DVector<f64> {
        let m = self.features.len();
        let mut z = DVector::zeros(m + 3);
        z.rows_mut(0, m).copy_from(&(self.features.values() * feature_scale));
        z[m] = self.pose.x();
        z[m + 1] = self.pose.y();
        z[m + 2] = self.pose.heading();
        z
    }

    /// Inverse of [`RegressionPoint::stacked`]; the heading is re-wrapped.
    pub fn from_stacked(z: &DVector<f64>, m: usize, feature_scale: f64) -> Result<Self> {
        if z.len() != m + 3 {
            return Err(Error::invalid(format!(
                "stacked vector has length {}, expected {}",
                z.len(),
                m + 3
            )));
        }
        let features = FeatureVector::new(z.rows(0, m) / feature_scale)?;
        let pose = Pose::try_new(z[m], z[m + 1], z[m + 2])?;
        Ok(RegressionPoint { features, pose })
    }
}

/// One labeled capture: image, its features and the pose it was taken at.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: ImageVector,
    pub features: FeatureVector,
    pub pose: Pose,
}

impl Sample {
    pub fn regression_point(&self) -> RegressionPoint {
        RegressionPoint::new(self.features.clone(), self.pose)
    }
}

/// Ordered pose-labeled samples plus free-form generation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<M = ()> {
    samples: Vec<Sample>,
    pub meta: M,
}

impl<M> LabeledDataset<M> {
    pub fn new(samples: Vec<Sample>, meta: M) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSample {
                got: samples.len(),
                need: 2,
            });
        }
        let p = samples[0].image.len();
        let m = samples[0].features.len();
        for (i, s) in samples.iter().enumerate() {
            if s.image.len() != p || s.features.len() != m {
                return Err(Error::invalid(format!(
                    "sample {i} has dims (p={}, m={}), expected (p={p}, m={m})",
                    s.image.len(),
                    s.features.len()
                )));
            }
        }
        Ok(LabeledDataset { samples, meta })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        self.samples[0].image.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples[0].features.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.samples.iter().map(|s| s.pose).collect()
    }

    pub fn feature_points(&self) -> Vec<DVector<f64>> {
        self.samples.iter().map(|s| s.features.values().clone()).collect()
    }

    pub fn image_points(&self) -> Vec<DVector<f64>> {
        self.samples.iter().map(|s| s.image.values().clone()).collect()
    }

    /// Subset in the given index order; metadata is cloned.
    pub fn subset(&self, indices: &[usize]) -> Result<Self>
    where
        M: Clone,
    {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, self.meta.clone())
    }
}

/// Kernel bandwidths: a spatial factor and an optional Grassmann factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub spatial_bandwidth: f64,
    pub grassmann_bandwidth: Option<f64>,
}

impl KernelSpec {
    pub fn new(spatial_bandwidth: f64, grassmann_bandwidth: Option<f64>) -> Result<Self> {
        let ok = |b: f64| b.is_finite() && b > 0.0;
        if !ok(spatial_bandwidth) || grassmann_bandwidth.is_some_and(|b| !ok(b)) {
            return Err(Error::invalid(format!(
                "kernel bandwidths must be positive, got {spatial_bandwidth} / {grassmann_bandwidth:?}"
            )));
        }
        Ok(KernelSpec {
            spatial_bandwidth,
            grassmann_bandwidth,
        })
    }
}

/// Orthonormal basis of an estimated tangent space.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub basepoint: Option<usize>,
    basis: DMatrix<f64>,
}

impl TangentFrame {
    pub const ORTHONORMAL_TOL: f64 = 1e-10;

    pub fn new(basepoint: Option<usize>, basis: DMatrix<f64>) -> Result<Self> {
        let q = basis.ncols();
        if q == 0 || basis.nrows() < q {
            return Err(Error::invalid(format!(
                "tangent basis shape {}x{q} is invalid",
                basis.nrows()
            )));
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::identity(q, q)).amax();
        if dev > Self::ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "tangent basis is not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(TangentFrame { basepoint, basis })
    }

    pub(crate) fn from_trusted(basepoint: Option<usize>, basis: DMatrix<f64>) -> Self {
        TangentFrame { basepoint, basis }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacked_split_index_is_feature_dim() {
        let w = FeatureVector::new(DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let z = RegressionPoint::new(w, Pose::new(5.0, 6.0, 0.5));
        let s = z.stacked(0.5);
        assert_eq!(s.len(), 7);
        assert_eq!(s[3], 2.0);
        assert_eq!(s[4], 5.0);
        let back = RegressionPoint::from_stacked(&s, 4, 0.5).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn vectors_reject_non_finite_and_short() {
        assert!(ImageVector::new(DVector::zeros(0)).is_err());
        assert!(ImageVector::new(DVector::from_vec(vec![f64::NAN])).is_err());
        assert!(FeatureVector::new(DVector::from_vec(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn kernel_spec_requires_positive_bandwidths() {
        assert!(KernelSpec::new(0.0, None).is_err());
        assert!(KernelSpec::new(1.0, Some(-1.0)).is_err());
        assert!(KernelSpec::new(1.0, Some(0.5)).is_ok());
    }
}
