//! Tangent-bundle learning on the regression manifold of stacked `(w, θ)` points.
//!
//! The learner produces an embedding `h` into `R^q`, a recovery `g` back to the
//! manifold and an estimate `G` of the recovery Jacobian:
//!
//! 1. local PCA frames on the k-NN graph of the stacked points;
//! 2. frames aligned by orthogonal Procrustes along a breadth-first spanning tree;
//! 3. embedding coordinates `y_i` from the LTSA alignment matrix, affinely gauged so
//!    that `y ≈ θ` on the active pose coordinates;
//! 4. recovery `g(y) = Σ w_i(y) (Z_i + J_i (y − y_i))` with Gaussian weights and
//!    per-sample linear maps `J_i` fitted by weighted least squares, and its exact
//!    derivative;
//! 5. embedding `h(Z) = Σ K_i(Z) (y_i + J_i⁺ (Z − Z_i)) / Σ K_i(Z)`.
//!
//! Internally the feature block is multiplied by `feature_scale`; the public
//! `recover*` and `recovery_jacobian` results are in raw feature units.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neighbors::{euclidean, k_nearest, knn_graph, median};
use crate::numeric::{
    column_space, condition_number, gaussian, local_pca, mean_subspace, orthonormal_polar, procrustes_rotation,
    pseudo_inverse, sorted_svd,
};
use crate::pose::{wrap_angle, Pose};
use crate::types::{FeatureVector, LabeledDataset, RegressionPoint, TangentFrame};

/// Heading weight (m/rad) used for pose-space distances.
pub const HEADING_WEIGHT: f64 = 1.0;

/// Condition number above which the embedding gauge is rejected.
const GAUGE_MAX_CONDITION: f64 = 1e8;

pub fn default_feature_scale(m: usize) -> f64 {
    1.0 / (m as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitParams {
    /// Neighborhood size for local frames and Jacobian fits.
    pub k: usize,
    /// Intrinsic dimension: 3, or 2 for fixed-heading data.
    pub q: usize,
    /// Kernel bandwidth as a multiple of the median distance to the nearest samples.
    pub bandwidth_scale: f64,
    /// How many nearest samples enter each per-sample bandwidth.
    pub bandwidth_neighbors: usize,
    /// Queries farther than this multiple of the median nearest-neighbor distance are refused.
    pub cutoff_factor: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            k: 12,
            q: 3,
            bandwidth_scale: 0.5,
            bandwidth_neighbors: 6,
            cutoff_factor: 3.0,
        }
    }
}

impl FitParams {
    /// Checks the values that do not depend on the sample size.
    pub fn check(&self) -> Result<()> {
        if !(self.q == 2 || self.q == 3) {
            return Err(Error::invalid(format!("q must be 2 or 3, got {}", self.q)));
        }
        if self.k < self.q + 1 {
            return Err(Error::invalid(format!("k = {} must be at least q + 1 = {}", self.k, self.q + 1)));
        }
        if self.bandwidth_neighbors == 0 {
            return Err(Error::invalid("bandwidth_neighbors must be positive"));
        }
        if !(self.bandwidth_scale > 0.0 && self.bandwidth_scale.is_finite()) {
            return Err(Error::invalid("bandwidth_scale must be positive"));
        }
        if !(self.cutoff_factor > 0.0 && self.cutoff_factor.is_finite()) {
            return Err(Error::invalid("cutoff_factor must be positive"));
        }
        Ok(())
    }

    fn validate(&self, n: usize) -> Result<()> {
        self.check()?;
        if n <= self.k {
            return Err(Error::InsufficientSample { got: n, need: self.k + 1 });
        }
        if self.bandwidth_neighbors >= n {
            return Err(Error::invalid("bandwidth_neighbors must be below the sample size"));
        }
        Ok(())
    }
}

/// Samples `Z_i = (w_i, θ_i)` of the regression manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionManifoldSample {
    points: Vec<RegressionPoint>,
    feature_scale: f64,
}

impl RegressionManifoldSample {
    pub fn new(points: Vec<RegressionPoint>, feature_scale: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientSample { got: points.len(), need: 2 });
        }
        let m = points[0].feature_dim();
        if points.iter().any(|p| p.feature_dim() != m) {
            return Err(Error::invalid("regression points differ in feature dimension"));
        }
        if !(feature_scale > 0.0 && feature_scale.is_finite()) {
            return Err(Error::invalid(format!("feature_scale must be positive, got {feature_scale}")));
        }
        Ok(RegressionManifoldSample { points, feature_scale })
    }

    /// Uses the default scale `1/√m`.
    pub fn from_dataset<M>(ds: &LabeledDataset<M>) -> Result<Self> {
        let points = ds.samples().iter().map(|s| s.regression_point()).collect();
        Self::new(points, default_feature_scale(ds.feature_dim()))
    }

    pub fn points(&self) -> &[RegressionPoint] {
        &self.points
    }

    pub fn feature_scale(&self) -> f64 {
        self.feature_scale
    }

    pub fn feature_dim(&self) -> usize {
        self.points[0].feature_dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn stacked(&self) -> Vec<DVector<f64>> {
        self.points.iter().map(|p| p.stacked(self.feature_scale)).collect()
    }
}

/// Primary arrays of a fitted model; everything else is derived from these.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParts {
    pub m: usize,
    pub params: FitParams,
    pub feature_scale: f64,
    /// Stacked training points in scaled coordinates.
    pub z: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// Aligned tangent bases, `(m+3) × q`.
    pub frames: Vec<DMatrix<f64>>,
    /// Local recovery maps `J_i`, `(m+3) × q`, scaled coordinates.
    pub jac: Vec<DMatrix<f64>>,
    pub h_y: Vec<f64>,
    pub h_z: Vec<f64>,
    pub h_w: Vec<f64>,
    pub h_pose: Vec<f64>,
    /// Cutoff radii in embedding, stacked, feature and pose space.
    pub cutoffs: [f64; 4],
}

impl ModelParts {
    /// Rounds every stored real to the nearest `f32`.
    pub fn quantize(&mut self) {
        let r = |v: &mut f64| *v = *v as f32 as f64;
        r(&mut self.feature_scale);
        r(&mut self.params.bandwidth_scale);
        r(&mut self.params.cutoff_factor);
        for v in self.z.iter_mut().chain(self.y.iter_mut()) {
            v.iter_mut().for_each(r);
        }
        for a in self.frames.iter_mut().chain(self.jac.iter_mut()) {
            a.iter_mut().for_each(r);
        }
        for v in [&mut self.h_y, &mut self.h_z, &mut self.h_w, &mut self.h_pose] {
            v.iter_mut().for_each(r);
        }
        self.cutoffs.iter_mut().for_each(r);
    }
}

/// Fitted `(h, g, G)` with training embeddings.
#[derive(Clone, Debug)]
pub struct TangentBundleModel {
    parts: ModelParts,
    frames: Vec<TangentFrame>,
    jac_pinv: Vec<DMatrix<f64>>,
    features: Vec<DVector<f64>>,
    poses: Vec<Pose>,
    feature_bases: Vec<DMatrix<f64>>,
}

fn with_point(err: Error, i: usize) -> Error {
    match err {
        Error::DegenerateNeighborhood { rank, required, .. } => Error::DegenerateNeighborhood {
            point: Some(i),
            rank,
            required,
        },
        other => other,
    }
}

fn nearest_distances(points: &[DVector<f64>], i: usize, count: usize) -> Vec<f64> {
    k_nearest(points, &points[i], count, Some(i)).iter().map(|n| n.distance).collect()
}

fn pose_distances(poses: &[Pose], i: usize, count: usize) -> Vec<f64> {
    let mut d: Vec<f64> = poses
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| poses[i].weighted_distance(p, HEADING_WEIGHT))
        .collect();
    d.sort_by(f64::total_cmp);
    d.truncate(count);
    d
}

/// Per-sample bandwidths and the cutoff radius for one space, given a function that
/// lists sorted distances from sample `i` to its nearest others.
fn bandwidths<F>(n: usize, params: &FitParams, dist: F) -> (Vec<f64>, f64)
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    let lists: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| dist(i, params.bandwidth_neighbors)).collect();
    let h = lists.iter().map(|d| params.bandwidth_scale * median(d)).collect();
    let nn: Vec<f64> = lists.iter().map(|d| d[0]).collect();
    (h, params.cutoff_factor * median(&nn))
}

/// Normalized Gaussian weights `K_i / Σ K` computed with a max shift.
fn normalized_weights(dist: &[f64], h: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = dist.iter().zip(h).map(|(d, h)| -0.5 * (d / h).powi(2)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Fits the tangent-bundle model.
pub fn fit_tangent_bundle(sample: &RegressionManifoldSample, params: &FitParams) -> Result<TangentBundleModel> {
    let n = sample.len();
    params.validate(n)?;
    let (q, k, m) = (params.q, params.k, sample.feature_dim());
    let z = sample.stacked();
    let graph = knn_graph(&z, k)?;
    graph.ensure_connected()?;

    // local frames and LTSA blocks
    let locals = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb: Vec<usize> = std::iter::once(i).chain(graph.nearest(i).iter().map(|x| x.index)).collect();
            let pts: Vec<DVector<f64>> = nb.iter().map(|&j| z[j].clone()).collect();
            let mean = pts.iter().fold(DVector::zeros(m + 3), |a, p| a + p) / pts.len() as f64;
            let frame = local_pca(&pts, &mean, &vec![1.0; pts.len()], q).map_err(|e| with_point(e, i))?;
            let coords = DMatrix::from_fn(pts.len(), q, |r, c| frame.basis().column(c).dot(&(&pts[r] - &mean)));
            let v = column_space(&coords).ok_or(Error::DegenerateNeighborhood {
                point: Some(i),
                rank: 0,
                required: q,
            })?;
            let mut g = DMatrix::zeros(pts.len(), q + 1);
            g.column_mut(0).fill(1.0 / (pts.len() as f64).sqrt());
            g.columns_mut(1, q).copy_from(&v);
            Ok((frame.basis().clone(), g, nb))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut b = DMatrix::<f64>::zeros(n, n);
    for (_, g, nb) in &locals {
        let w = DMatrix::identity(nb.len(), nb.len()) - g * g.transpose();
        for (r, &jr) in nb.iter().enumerate() {
            for (c, &jc) in nb.iter().enumerate() {
                b[(jr, jc)] += w[(r, c)];
            }
        }
    }
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]).then(a.cmp(&c)));
    let mut null = DMatrix::from_fn(n, q + 1, |r, c| eig.eigenvectors[(r, order[c])]);
    for mut col in null.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let coords = sorted_svd(&null).u.columns(0, q).into_owned();

    // affine gauge: y ≈ active pose coordinates
    let mut design = DMatrix::from_element(n, q + 1, 1.0);
    design.columns_mut(0, q).copy_from(&coords);
    let target = DMatrix::from_fn(n, q, |i, c| z[i][m + c]);
    let gauge = pseudo_inverse(&design)? * &target;
    let cond = condition_number(&gauge.rows(0, q).into_owned());
    if !(cond < GAUGE_MAX_CONDITION) {
        return Err(Error::Conditioning {
            context: "embedding gauge".into(),
            condition: cond,
        });
    }
    let ymat = &design * &gauge;
    let y: Vec<DVector<f64>> = (0..n).map(|i| ymat.row(i).transpose()).collect();

    // per-sample bandwidths and cutoffs
    let (h_y, cut_y) = bandwidths(n, params, |i, c| nearest_distances(&y, i, c));
    let (h_z, cut_z) = bandwidths(n, params, |i, c| nearest_distances(&z, i, c));
    let w_raw: Vec<DVector<f64>> = sample.points().iter().map(|p| p.features.values().clone()).collect();
    let (h_w, cut_w) = bandwidths(n, params, |i, c| nearest_distances(&w_raw, i, c));
    let poses: Vec<Pose> = sample.points().iter().map(|p| p.pose).collect();
    let (h_pose, cut_pose) = bandwidths(n, params, |i, c| pose_distances(&poses, i, c));

    // local recovery maps over embedding-space neighbors
    let jac = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = k_nearest(&y, &y[i], k, Some(i));
            let mut a = DMatrix::zeros(q, q);
            let mut c = DMatrix::zeros(m + 3, q);
            for x in &nb {
                let wt = gaussian(x.distance, h_y[i]);
                let dy = &y[x.index] - &y[i];
                let dz = &z[x.index] - &z[i];
                a += &dy * dy.transpose() * wt;
                c += &dz * dy.transpose() * wt;
            }
            let cond = condition_number(&a);
            if !(cond < 1e12) {
                return Err(Error::DegenerateNeighborhood {
                    point: Some(i),
                    rank: sorted_svd(&a).s.iter().filter(|&&s| s > 1e-12 * a.amax()).count(),
                    required: q,
                });
            }
            Ok(c * pseudo_inverse(&a)?)
        })
        .collect::<Result<Vec<_>>>()?;

    // frame alignment along a spanning tree
    let mut frames: Vec<DMatrix<f64>> = locals.into_iter().map(|(f, _, _)| f).collect();
    let (parent, visit) = graph.bfs_tree(0);
    for &node in visit.iter().skip(1) {
        let p = parent[node].expect("tree covers a connected graph");
        let rot = procrustes_rotation(&frames[node], &frames[p]);
        frames[node] = &frames[node] * rot;
    }

    TangentBundleModel::from_parts(ModelParts {
        m,
        params: *params,
        feature_scale: sample.feature_scale(),
        z,
        y,
        frames,
        jac,
        h_y,
        h_z,
        h_w,
        h_pose,
        cutoffs: [cut_y, cut_z, cut_w, cut_pose],
    })
}

impl TangentBundleModel {
    /// Rebuilds a model from its primary arrays, recomputing every derived quantity.
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let n = parts.z.len();
        let (m, q) = (parts.m, parts.params.q);
        parts.params.validate(n)?;
        let consistent = parts.y.len() == n
            && parts.frames.len() == n
            && parts.jac.len() == n
            && [&parts.h_y, &parts.h_z, &parts.h_w, &parts.h_pose].iter().all(|v| v.len() == n)
            && parts.z.iter().all(|v| v.len() == m + 3)
            && parts.y.iter().all(|v| v.len() == q)
            && parts.frames.iter().chain(&parts.jac).all(|a| a.shape() == (m + 3, q));
        if !consistent {
            return Err(Error::format("model", "array shapes are inconsistent"));
        }
        let frames = parts
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                orthonormal_polar(f)
                    .map(|b| TangentFrame::from_trusted(Some(i), b))
                    .ok_or(Error::DegenerateNeighborhood { point: Some(i), rank: 0, required: q })
            })
            .collect::<Result<Vec<_>>>()?;
        let jac_pinv = parts.jac.iter().map(pseudo_inverse).collect::<Result<Vec<_>>>()?;
        let s = parts.feature_scale;
        let features: Vec<DVector<f64>> = parts.z.iter().map(|z| z.rows(0, m) / s).collect();
        let poses: Vec<Pose> = parts.z.iter().map(|z| Pose::try_new(z[m], z[m + 1], z[m + 2])).collect::<Result<_>>()?;
        let feature_bases = frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                column_space(&f.basis().rows(0, m).into_owned())
                    .ok_or(Error::DegenerateNeighborhood { point: Some(i), rank: 0, required: q })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TangentBundleModel {
            parts,
            frames,
            jac_pinv,
            features,
            poses,
            feature_bases,
        })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    /// The same model with every stored real rounded to `f32`.
    pub fn quantized(&self) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.quantize();
        Self::from_parts(parts)
    }

    pub fn len(&self) -> usize {
        self.parts.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.z.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.parts.m
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.parts.params.q
    }

    pub fn feature_scale(&self) -> f64 {
        self.parts.feature_scale
    }

    pub fn params(&self) -> &FitParams {
        &self.parts.params
    }

    pub fn embeddings(&self) -> &[DVector<f64>] {
        &self.parts.y
    }

    pub fn frames(&self) -> &[TangentFrame] {
        &self.frames
    }

    pub fn training_features(&self) -> &[DVector<f64>] {
        &self.features
    }

    pub fn training_poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Scaled stacked training points.
    pub fn stacked_points(&self) -> &[DVector<f64>] {
        &self.parts.z
    }

    fn nearest(dists: &[f64]) -> f64 {
        dists.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_cutoff(dists: &[f64], cutoff: f64) -> Result<()> {
        let d = Self::nearest(dists);
        if d > cutoff {
            return Err(Error::Extrapolation { distance: d, cutoff });
        }
        Ok(())
    }

    fn y_weights(&self, y: &DVector<f64>) -> Result<Vec<f64>> {
        if y.len() != self.intrinsic_dim() {
            return Err(Error::invalid(format!("embedding has length {}, expected {}", y.len(), self.intrinsic_dim())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite entries"));
        }
        let dists: Vec<f64> = self.parts.y.iter().map(|yi| euclidean(y, yi)).collect();
        Self::check_cutoff(&dists, self.parts.cutoffs[0])?;
        Ok(normalized_weights(&dists, &self.parts.h_y))
    }

    /// `h` on a stacked point in scaled coordinates.
    pub fn embed_stacked(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.parts.m + 3 {
            return Err(Error::invalid(format!("stacked point has length {}, expected {}", z.len(), self.parts.m + 3)));
        }
        let dists: Vec<f64> = self.parts.z.iter().map(|zi| euclidean(z, zi)).collect();
        Self::check_cutoff(&dists, self.parts.cutoffs[1])?;
        let (best, dmin) = dists
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        if dmin <= 1e-12 * (1.0 + z.norm()) {
            return Ok(self.parts.y[best].clone());
        }
        let w = normalized_weights(&dists, &self.parts.h_z);
        let mut y = DVector::zeros(self.intrinsic_dim());
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                y += (&self.parts.y[i] + &self.jac_pinv[i] * (z - &self.parts.z[i])) * wi;
            }
        }
        Ok(y)
    }

    /// Embedding `h(Z)`.
    pub fn embed(&self, point: &RegressionPoint) -> Result<DVector<f64>> {
        if point.feature_dim() != self.parts.m {
            return Err(Error::invalid("feature dimension does not match the model"));
        }
        self.embed_stacked(&point.stacked(self.parts.feature_scale))
    }

    /// `g(y)` in scaled coordinates, heading not re-wrapped.
    pub fn recover_stacked(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let w = self.y_weights(y)?;
        let mut z = DVector::zeros(self.parts.m + 3);
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                z += (&self.parts.z[i] + &self.parts.jac[i] * (y - &self.parts.y[i])) * wi;
            }
        }
        Ok(z)
    }

    /// Analytic derivative of [`recover_stacked`](Self::recover_stacked).
    pub fn recovery_jacobian_stacked(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let w = self.y_weights(y)?;
        let q = self.intrinsic_dim();
        // d log K_i / dy = a_i
        let a: Vec<DVector<f64>> = self
            .parts
            .y
            .iter()
            .zip(&self.parts.h_y)
            .map(|(yi, h)| -(y - yi) / (h * h))
            .collect();
        let abar = a
            .iter()
            .zip(&w)
            .fold(DVector::zeros(q), |acc, (ai, &wi)| acc + ai * wi);
        let mut g = DMatrix::zeros(self.parts.m + 3, q);
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                let mi = &self.parts.z[i] + &self.parts.jac[i] * (y - &self.parts.y[i]);
                let dwi = (&a[i] - &abar) * wi;
                g += &self.parts.jac[i] * wi + mi * dwi.transpose();
            }
        }
        Ok(g)
    }

    fn unscale_rows(&self, mut v: DMatrix<f64>) -> DMatrix<f64> {
        let s = self.parts.feature_scale;
        v.rows_mut(0, self.parts.m).iter_mut().for_each(|x| *x /= s);
        v
    }

    /// `g(y)` in raw units as a vector `(w, x, y, heading)`, heading wrapped.
    pub fn recover_raw(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.recover_stacked(y)?;
        let mut out = self.unscale_rows(DMatrix::from_column_slice(z.len(), 1, z.as_slice())).column(0).into_owned();
        let m = self.parts.m;
        out[m + 2] = wrap_angle(out[m + 2]);
        Ok(out)
    }

    /// `g(y)` split into the feature block `g_u` and the pose block `g_v`.
    pub fn recover(&self, y: &DVector<f64>) -> Result<RegressionPoint> {
        RegressionPoint::from_stacked(&self.recover_stacked(y)?, self.parts.m, self.parts.feature_scale)
    }

    /// `G(y)`, `(m+3) × q`, feature rows in raw units.
    pub fn recovery_jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.unscale_rows(self.recovery_jacobian_stacked(y)?))
    }

    /// Weights of the training samples around raw features `w`.
    pub(crate) fn feature_weights(&self, w: &DVector<f64>) -> Result<Vec<f64>> {
        if w.len() != self.parts.m {
            return Err(Error::invalid(format!("features have length {}, expected {}", w.len(), self.parts.m)));
        }
        let dists: Vec<f64> = self.features.iter().map(|wi| euclidean(w, wi)).collect();
        Self::check_cutoff(&dists, self.parts.cutoffs[2])?;
        Ok(normalized_weights(&dists, &self.parts.h_w))
    }

    pub(crate) fn pose_weights(&self, pose: &Pose) -> Result<Vec<f64>> {
        let dists: Vec<f64> = self.poses.iter().map(|p| pose.weighted_distance(p, HEADING_WEIGHT)).collect();
        Self::check_cutoff(&dists, self.parts.cutoffs[3])?;
        Ok(normalized_weights(&dists, &self.parts.h_pose))
    }

    /// Orthogonal projector onto the estimated feature-space tangent at `w`.
    pub fn tangent_projection(&self, w: &FeatureVector) -> Result<DMatrix<f64>> {
        let weights = self.feature_weights(w.values())?;
        let q = mean_subspace(&self.feature_bases, &weights, self.intrinsic_dim())?;
        Ok(&q * q.transpose())
    }

    fn frame_from_weights(&self, weights: &[f64]) -> Result<TangentFrame> {
        let bases: Vec<DMatrix<f64>> = self.frames.iter().map(|f| f.basis().clone()).collect();
        Ok(TangentFrame::from_trusted(None, mean_subspace(&bases, weights, self.intrinsic_dim())?))
    }

    /// Tangent frame of the regression manifold estimated near features `w`.
    pub fn frame_at_features(&self, w: &DVector<f64>) -> Result<TangentFrame> {
        self.frame_from_weights(&self.feature_weights(w)?)
    }

    /// Tangent frame of the regression manifold estimated near `pose`.
    pub fn frame_at_pose(&self, pose: &Pose) -> Result<TangentFrame> {
        self.frame_from_weights(&self.pose_weights(pose)?)
    }

    /// `‖g(h(Z)) − Z‖ / ‖Z‖` in raw units, heading difference wrapped.
    pub fn relative_reconstruction_error(&self, point: &RegressionPoint) -> Result<f64> {
        let y = self.embed(point)?;
        let rec = self.recover_raw(&y)?;
        let z = point.stacked(1.0);
        let m = self.parts.m;
        let mut diff = &rec - &z;
        diff[m + 2] = wrap_angle(diff[m + 2]);
        Ok(diff.norm() / z.norm())
    }
}

/// Exact Hausdorff distance between two finite point sets.
pub fn hausdorff_estimate(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Hausdorff distance needs non-empty sets"));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != dim) {
        return Err(Error::invalid("point sets differ in ambient dimension"));
    }
    let directed = |from: &[DVector<f64>], to: &[DVector<f64>]| {
        from.par_iter()
            .map(|p| to.iter().map(|t| euclidean(p, t)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
