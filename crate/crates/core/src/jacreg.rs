//! First-order kernel regression with per-anchor Jacobians:
//! `ŷ(x) = Σ K(x, x_i) (y_i + G_i (x − x_i)) / Σ K(x, x_i)`.
//!
//! The kernel is a spatial Gaussian with a per-anchor bandwidth, optionally times a
//! Gaussian in the Grassmann distance between the query's estimated tangent frame
//! and the anchor's frame.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{median, Neighbor};
use crate::numeric::{condition_number, gaussian, grassmann_distance, mean_subspace, pseudo_inverse, NEGLIGIBLE_WEIGHT};
use crate::pose::wrap_angle;
use crate::tbml::{TangentBundleModel, HEADING_WEIGHT};
use crate::types::{FeatureVector, KernelSpec, TangentFrame};

/// Largest accepted condition number of the pose block `G_v`.
pub const MAX_POSE_BLOCK_CONDITION: f64 = 1e8;

/// Below this total kernel mass a query is out of support.
pub const MIN_KERNEL_MASS: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Inputs are feature vectors, `d_in = m`.
    Feature,
    /// Inputs are poses `(x, y, heading)`; heading differences wrap.
    Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub input: DVector<f64>,
    pub y: DVector<f64>,
    /// `q × d_in`.
    pub jacobian: DMatrix<f64>,
    pub frame: Option<TangentFrame>,
    pub bandwidth: f64,
}

/// Bandwidth rule used when building regressors from a fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    /// Per-anchor bandwidth as a multiple of the median distance to its nearest anchors.
    pub bandwidth_scale: f64,
    pub bandwidth_neighbors: usize,
    /// `None` disables the Grassmann factor.
    pub grassmann_bandwidth: Option<f64>,
}

impl Default for RegressorParams {
    fn default() -> Self {
        RegressorParams {
            bandwidth_scale: 0.3,
            bandwidth_neighbors: 6,
            grassmann_bandwidth: Some(FRAC_PI_4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianRegressor {
    kind: InputKind,
    anchors: Vec<Anchor>,
    grassmann_bandwidth: Option<f64>,
}

/// Spatial-times-Grassmann kernel between two inputs with optional frames.
pub fn kernel_eval(
    spec: &KernelSpec,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    frame1: Option<&TangentFrame>,
    frame2: Option<&TangentFrame>,
) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::invalid("kernel inputs differ in dimension"));
    }
    let spatial = gaussian((x1 - x2).norm(), spec.spatial_bandwidth);
    let grassmann = match (frame1, frame2, spec.grassmann_bandwidth) {
        (Some(a), Some(b), Some(bw)) => gaussian(grassmann_distance(a.basis(), b.basis())?, bw),
        _ => 1.0,
    };
    Ok(spatial * grassmann)
}

impl JacobianRegressor {
    pub fn new(kind: InputKind, anchors: Vec<Anchor>, grassmann_bandwidth: Option<f64>) -> Result<Self> {
        let first = anchors.first().ok_or_else(|| Error::invalid("regressor needs at least one anchor"))?;
        let (d_in, q) = (first.input.len(), first.y.len());
        if kind == InputKind::Pose && d_in != 3 {
            return Err(Error::invalid("pose-space anchors must have 3 inputs"));
        }
        for (i, a) in anchors.iter().enumerate() {
            if a.input.len() != d_in || a.y.len() != q || a.jacobian.shape() != (q, d_in) {
                return Err(Error::invalid(format!("anchor {i} has inconsistent dimensions")));
            }
            if !(a.bandwidth > 0.0 && a.bandwidth.is_finite()) {
                return Err(Error::invalid(format!("anchor {i} bandwidth must be positive")));
            }
        }
        let frame_dims: Vec<_> = anchors.iter().map(|a| a.frame.as_ref().map(|f| (f.ambient_dim(), f.dim()))).collect();
        if frame_dims.iter().any(|d| d.is_some()) && frame_dims.windows(2).any(|w| w[0] != w[1] || w[0].is_none()) {
            return Err(Error::invalid("either every anchor or none carries a frame of one shape"));
        }
        if let Some(bw) = grassmann_bandwidth {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(Error::invalid("grassmann bandwidth must be positive"));
            }
        }
        Ok(JacobianRegressor {
            kind,
            anchors,
            grassmann_bandwidth,
        })
    }

    pub fn kind(&self) -> InputKind {
        self.kind
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn grassmann_bandwidth(&self) -> Option<f64> {
        self.grassmann_bandwidth
    }

    pub fn input_dim(&self) -> usize {
        self.anchors[0].input.len()
    }

    pub fn output_dim(&self) -> usize {
        self.anchors[0].y.len()
    }

    fn uses_frames(&self) -> bool {
        self.grassmann_bandwidth.is_some() && self.anchors[0].frame.is_some()
    }

    /// `x − x_i`, heading wrapped for pose inputs.
    fn delta(&self, x: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        let mut d = x - xi;
        if self.kind == InputKind::Pose {
            d[2] = wrap_angle(d[2]);
        }
        d
    }

    fn distance(&self, delta: &DVector<f64>) -> f64 {
        match self.kind {
            InputKind::Feature => delta.norm(),
            InputKind::Pose => (delta[0] * delta[0] + delta[1] * delta[1] + (HEADING_WEIGHT * delta[2]).powi(2)).sqrt(),
        }
    }

    /// Prediction together with the normalized kernel weights of every anchor.
    pub fn predict_with_weights(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!("query has length {}, expected {}", x.len(), self.input_dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query has non-finite entries"));
        }
        let deltas: Vec<DVector<f64>> = self.anchors.iter().map(|a| self.delta(x, &a.input)).collect();
        let dists: Vec<f64> = deltas.iter().map(|d| self.distance(d)).collect();
        let nearest = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let mut k: Vec<f64> = dists.iter().zip(&self.anchors).map(|(&d, a)| gaussian(d, a.bandwidth)).collect();
        let spatial_mass: f64 = k.iter().sum();
        if !(spatial_mass > MIN_KERNEL_MASS) {
            return Err(Error::OutOfSupport { nearest });
        }
        if self.uses_frames() {
            let bw = self.grassmann_bandwidth.expect("checked by uses_frames");
            let bases: Vec<&DMatrix<f64>> = self
                .anchors
                .iter()
                .map(|a| a.frame.as_ref().expect("all anchors carry frames").basis())
                .collect();
            let spatial: Vec<f64> = k.iter().map(|v| v / spatial_mass).collect();
            let q = bases[0].ncols();
            let query = mean_subspace(bases.iter().copied(), &spatial, q)?;
            for ((ki, b), &s) in k.iter_mut().zip(&bases).zip(&spatial) {
                // mean_subspace ignored this anchor too
                if s > NEGLIGIBLE_WEIGHT {
                    *ki *= gaussian(grassmann_distance(&query, b)?, bw);
                } else {
                    *ki = 0.0;
                }
            }
        }
        let mass: f64 = k.iter().sum();
        if !(mass > MIN_KERNEL_MASS) {
            return Err(Error::OutOfSupport { nearest });
        }
        let weights: Vec<f64> = k.iter().map(|v| v / mass).collect();
        let mut y = DVector::zeros(self.output_dim());
        for ((a, d), &w) in self.anchors.iter().zip(&deltas).zip(&weights) {
            if w > 0.0 {
                y += (&a.y + &a.jacobian * d) * w;
            }
        }
        Ok((y, weights))
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.predict_with_weights(x).map(|(y, _)| y)
    }
}

/// `scale ×` median distance from each input to its `count` nearest other inputs.
fn adaptive_bandwidths(inputs: &[DVector<f64>], kind: InputKind, params: &RegressorParams) -> Result<Vec<f64>> {
    if !(params.bandwidth_scale > 0.0 && params.bandwidth_scale.is_finite()) || params.bandwidth_neighbors == 0 {
        return Err(Error::invalid("bandwidth_scale and bandwidth_neighbors must be positive"));
    }
    let probe = JacobianRegressor {
        kind,
        anchors: Vec::new(),
        grassmann_bandwidth: None,
    };
    inputs
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut d: Vec<Neighbor> = inputs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, xj)| Neighbor {
                    index: j,
                    distance: probe.distance(&probe.delta(xi, xj)),
                })
                .collect();
            d.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
            d.truncate(params.bandwidth_neighbors);
            let h = params.bandwidth_scale * median(&d.iter().map(|n| n.distance).collect::<Vec<_>>());
            if !(h > 0.0) {
                return Err(Error::DegenerateDistance { i, j: d[0].index });
            }
            Ok(h)
        })
        .collect()
}

/// Anchors `(w_i, y_i, G_u(y_i)⁺ π(w_i))` over the model's training samples.
pub fn build_feature_regressor(model: &TangentBundleModel, params: &RegressorParams) -> Result<JacobianRegressor> {
    let m = model.feature_dim();
    let inputs = model.training_features().to_vec();
    let bandwidths = adaptive_bandwidths(&inputs, InputKind::Feature, params)?;
    let anchors = (0..model.len())
        .map(|i| {
            let y = model.embeddings()[i].clone();
            let g_u = model.recovery_jacobian(&y)?.rows(0, m).into_owned();
            let pi = model.tangent_projection(&FeatureVector::new(inputs[i].clone())?)?;
            Ok(Anchor {
                input: inputs[i].clone(),
                jacobian: pseudo_inverse(&g_u)? * pi,
                y,
                frame: Some(model.frames()[i].clone()),
                bandwidth: bandwidths[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    JacobianRegressor::new(InputKind::Feature, anchors, params.grassmann_bandwidth)
}

/// Anchors `(θ_i, y_i, G_v(y_i)⁻¹)`; a pseudo-inverse when heading is not modeled.
pub fn build_pose_regressor(model: &TangentBundleModel, params: &RegressorParams) -> Result<JacobianRegressor> {
    let m = model.feature_dim();
    let inputs: Vec<DVector<f64>> = model
        .training_poses()
        .iter()
        .map(|p| DVector::from_column_slice(p.to_vector().as_slice()))
        .collect();
    let bandwidths = adaptive_bandwidths(&inputs, InputKind::Pose, params)?;
    let anchors = (0..model.len())
        .map(|i| {
            let y = model.embeddings()[i].clone();
            let g_v = model.recovery_jacobian(&y)?.rows(m, 3).into_owned();
            let active = g_v.rows(0, model.intrinsic_dim()).into_owned();
            let cond = condition_number(&active);
            if !(cond < MAX_POSE_BLOCK_CONDITION) {
                return Err(Error::Conditioning {
                    context: format!("pose block of the recovery Jacobian at anchor {i}"),
                    condition: cond,
                });
            }
            let jacobian = if model.intrinsic_dim() == 3 {
                g_v.try_inverse().ok_or(Error::Conditioning {
                    context: format!("pose block of the recovery Jacobian at anchor {i}"),
                    condition: f64::INFINITY,
                })?
            } else {
                pseudo_inverse(&g_v)?
            };
            Ok(Anchor {
                input: inputs[i].clone(),
                y,
                jacobian,
                frame: Some(model.frames()[i].clone()),
                bandwidth: bandwidths[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    JacobianRegressor::new(InputKind::Pose, anchors, params.grassmann_bandwidth)
}
