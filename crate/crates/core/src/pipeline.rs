//! A trained localization system and its on-disk container.
//!
//! Container layout: 8-byte magic, little-endian `u64` header length, JSON header,
//! then `f32` little-endian arrays in header order. The model is quantized to `f32`
//! before the regressors are built, so a loaded container behaves bit-for-bit like
//! the pipeline that wrote it.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::appearance::io::write_atomic;
use crate::appearance::{Dataset, DatasetMeta, FeatureExtractor, Oracle};
use crate::error::{Error, Result};
use crate::jacreg::{build_feature_regressor, build_pose_regressor, JacobianRegressor, RegressorParams};
use crate::localize::{
    covariance_from_residuals, FeatureModelEstimator, FilterVariant, LearnedMeasurement, LocalizationEstimator,
    MeasurementModel,
};
use crate::neighbors::median;
use crate::numeric::{column_space, principal_angles};
use crate::tbml::{fit_tangent_bundle, FitParams, ModelParts, RegressionManifoldSample, TangentBundleModel};
use crate::types::RegressionPoint;

const MAGIC: &[u8; 8] = b"APLOCMD1";
const CONTAINER_VERSION: u32 = 1;

/// Measurement-noise covariances for each filter variant.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSet {
    pub embedding: DMatrix<f64>,
    pub feature: DMatrix<f64>,
    pub pose: DMatrix<f64>,
}

impl NoiseSet {
    pub fn get(&self, variant: FilterVariant) -> &DMatrix<f64> {
        match variant {
            FilterVariant::Embedding => &self.embedding,
            FilterVariant::Feature => &self.feature,
            FilterVariant::Pose => &self.pose,
        }
    }
}

/// Fitted model, both regressors, measurement covariances and the dataset description.
#[derive(Clone, Debug)]
pub struct Pipeline {
    meta: DatasetMeta,
    regressor_params: RegressorParams,
    model: TangentBundleModel,
    extractor: FeatureExtractor,
    feature_regressor: JacobianRegressor,
    pose_regressor: JacobianRegressor,
    noise: NoiseSet,
}

/// Fit quality on the training sample itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub n: usize,
    pub reconstruction_median: f64,
    pub tangent_angle_median_deg: f64,
}

fn round_f32(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v as f32 as f64)
}

impl Pipeline {
    fn assemble(meta: DatasetMeta, regressor_params: RegressorParams, model: TangentBundleModel, noise: Option<NoiseSet>) -> Result<Self> {
        let extractor = FeatureExtractor::new(meta.extractor, meta.sensor.p)?;
        if extractor.output_dim() != model.feature_dim() {
            return Err(Error::invalid("model feature dimension does not match the extractor"));
        }
        let feature_regressor = build_feature_regressor(&model, &regressor_params)?;
        let pose_regressor = build_pose_regressor(&model, &regressor_params)?;
        let q = model.intrinsic_dim();
        let m = model.feature_dim();
        let noise = noise.unwrap_or_else(|| NoiseSet {
            embedding: DMatrix::identity(q, q),
            feature: DMatrix::identity(m, m),
            pose: DMatrix::identity(3, 3),
        });
        Ok(Pipeline {
            meta,
            regressor_params,
            model,
            extractor,
            feature_regressor,
            pose_regressor,
            noise,
        })
    }

    /// Fits every stage on `train`. Measurement covariances come from residuals on `train`.
    pub fn train(train: &Dataset, fit: &FitParams, regressor_params: &RegressorParams) -> Result<Self> {
        let sample = RegressionManifoldSample::from_dataset(train)?;
        let model = fit_tangent_bundle(&sample, fit)?.quantized()?;
        let mut p = Pipeline::assemble(train.meta.clone(), regressor_params.clone(), model, None)?;
        let estimate = |variant| -> Result<DMatrix<f64>> {
            let meas = p.default_measurement(variant)?;
            let residuals = train
                .samples()
                .iter()
                .map(|s| Ok(meas.innovation(&meas.observe_features(s.features.values())?, &meas.predict(&s.pose)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(round_f32(&covariance_from_residuals(&residuals)?))
        };
        let noise = NoiseSet {
            embedding: estimate(FilterVariant::Embedding)?,
            feature: estimate(FilterVariant::Feature)?,
            pose: estimate(FilterVariant::Pose)?,
        };
        p.noise = noise;
        Ok(p)
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn model(&self) -> &TangentBundleModel {
        &self.model
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn feature_regressor(&self) -> &JacobianRegressor {
        &self.feature_regressor
    }

    pub fn pose_regressor(&self) -> &JacobianRegressor {
        &self.pose_regressor
    }

    pub fn noise(&self) -> &NoiseSet {
        &self.noise
    }

    pub fn oracle(&self) -> Result<Oracle> {
        Oracle::from_meta(&self.meta)
    }

    pub fn localization(&self) -> LocalizationEstimator<'_> {
        LocalizationEstimator::new(&self.extractor, &self.feature_regressor, &self.model)
            .expect("dimensions checked at assembly")
    }

    pub fn feature_model(&self) -> FeatureModelEstimator<'_> {
        FeatureModelEstimator::new(&self.pose_regressor, &self.model).expect("dimensions checked at assembly")
    }

    /// Learned measurement for `variant` with the stored covariance.
    pub fn default_measurement(&self, variant: FilterVariant) -> Result<LearnedMeasurement<'_>> {
        self.measurement(variant, self.noise.get(variant).clone())
    }

    /// Learned measurement with caller-supplied noise.
    pub fn measurement(&self, variant: FilterVariant, noise: DMatrix<f64>) -> Result<LearnedMeasurement<'_>> {
        LearnedMeasurement::new(
            variant,
            self.localization(),
            self.feature_model(),
            noise,
            1e-4 * self.meta.pose_space.diagonal(),
        )
    }

    /// Median reconstruction error and median largest principal angle (degrees)
    /// between `Span(G)` and the oracle chart tangents.
    pub fn diagnostics(&self, points: &[RegressionPoint]) -> Result<TrainDiagnostics> {
        let oracle = self.oracle()?;
        let (rec, ang) = fit_quality(&self.model, &oracle, points)?;
        Ok(TrainDiagnostics {
            n: points.len(),
            reconstruction_median: median(&rec),
            tangent_angle_median_deg: median(&ang),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Pipeline::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let parts = self.model.parts();
        let n = parts.z.len();
        let header = Header {
            version: CONTAINER_VERSION,
            n,
            m: parts.m,
            q: self.model.intrinsic_dim(),
            params: parts.params.clone(),
            feature_scale: parts.feature_scale,
            cutoffs: parts.cutoffs,
            regressor: self.regressor_params.clone(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::format("header", e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut push = |vals: &mut dyn Iterator<Item = f64>| {
            for v in vals {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        };
        push(&mut parts.z.iter().flat_map(|v| v.iter().copied()));
        push(&mut parts.y.iter().flat_map(|v| v.iter().copied()));
        push(&mut parts.frames.iter().flat_map(|a| a.iter().copied()));
        push(&mut parts.jac.iter().flat_map(|a| a.iter().copied()));
        for h in [&parts.h_y, &parts.h_z, &parts.h_w, &parts.h_pose] {
            push(&mut h.iter().copied());
        }
        for r in [&self.noise.embedding, &self.noise.feature, &self.noise.pose] {
            push(&mut r.iter().copied());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::format("magic", "not a model container"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body_start = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::format("header", "header length exceeds file size"))?;
        let header: Header =
            serde_json::from_slice(&bytes[16..body_start]).map_err(|e| Error::format("header", e.to_string()))?;
        if header.version != CONTAINER_VERSION {
            return Err(Error::format("version", format!("unsupported container version {}", header.version)));
        }
        let (n, m, q) = (header.n, header.m, header.q);
        let d = m + 3;
        let floats = n * (d + q + 2 * d * q + 4) + q * q + m * m + 9;
        let body = &bytes[body_start..];
        if body.len() != 4 * floats {
            return Err(Error::format(
                "arrays",
                format!("expected {} bytes of f32 data, found {}", 4 * floats, body.len()),
            ));
        }
        let mut it = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let mut take = |len: usize| -> Vec<f64> { it.by_ref().take(len).collect() };
        let z = (0..n).map(|_| DVector::from_vec(take(d))).collect();
        let y = (0..n).map(|_| DVector::from_vec(take(q))).collect();
        let frames = (0..n).map(|_| DMatrix::from_vec(d, q, take(d * q))).collect();
        let jac = (0..n).map(|_| DMatrix::from_vec(d, q, take(d * q))).collect();
        let (h_y, h_z, h_w, h_pose) = (take(n), take(n), take(n), take(n));
        let noise = NoiseSet {
            embedding: DMatrix::from_vec(q, q, take(q * q)),
            feature: DMatrix::from_vec(m, m, take(m * m)),
            pose: DMatrix::from_vec(3, 3, take(9)),
        };
        let model = TangentBundleModel::from_parts(ModelParts {
            m,
            params: header.params,
            feature_scale: header.feature_scale,
            z,
            y,
            frames,
            jac,
            h_y,
            h_z,
            h_w,
            h_pose,
            cutoffs: header.cutoffs,
        })?;
        Pipeline::assemble(header.meta, header.regressor, model, Some(noise))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    n: usize,
    m: usize,
    q: usize,
    params: FitParams,
    feature_scale: f64,
    cutoffs: [f64; 4],
    regressor: RegressorParams,
    meta: DatasetMeta,
}

/// Per-point reconstruction errors `‖g(h(Z)) − Z‖/‖Z‖` and largest principal angles
/// (degrees) between `Span(G(h(Z)))` and the oracle chart tangent at each point.
pub fn fit_quality(model: &TangentBundleModel, oracle: &Oracle, points: &[RegressionPoint]) -> Result<(Vec<f64>, Vec<f64>)> {
    use rayon::prelude::*;
    let s = model.feature_scale();
    let rows: Vec<(f64, f64)> = points
        .par_iter()
        .map(|pt| {
            let rec = model.relative_reconstruction_error(pt)?;
            let y = model.embed(pt)?;
            let g = model.recovery_jacobian_stacked(&y)?;
            let truth = oracle.chart_jacobian(&pt.pose, s, 1e-5);
            let basis = |m: &DMatrix<f64>| {
                column_space(m).ok_or_else(|| Error::Conditioning {
                    context: "tangent basis".into(),
                    condition: f64::INFINITY,
                })
            };
            let largest = principal_angles(&basis(&g)?, &basis(&truth)?)?.into_iter().fold(0.0, f64::max);
            Ok((rec, largest.to_degrees()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().unzip())
}
