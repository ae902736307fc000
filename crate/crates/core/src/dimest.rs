//! Intrinsic-dimension estimators: global (IsoMap residual variance), local
//! (correlation dimension) and pointwise (maximum likelihood).

use nalgebra::DMatrix;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{euclidean, k_nearest, knn_graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimMethod {
    Global,
    Local,
    Pointwise,
}

impl std::str::FromStr for DimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(DimMethod::Global),
            "local" => Ok(DimMethod::Local),
            "pointwise" => Ok(DimMethod::Pointwise),
            other => Err(Error::invalid(format!("unknown dimension method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimDiagnostics {
    /// `curve[d-1]` is the residual variance of a `d`-dimensional embedding.
    ResidualVariance { curve: Vec<f64>, threshold: f64 },
    /// Grid of `(r, C(r))` and the radii bounding the fitted range.
    CorrelationFit { grid: Vec<(f64, f64)>, r_lo: f64, r_hi: f64, points_used: usize },
    PerPoint { k: usize, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub method: DimMethod,
    pub value: f64,
    pub rounded: usize,
    pub diagnostics: DimDiagnostics,
}

impl DimEstimate {
    fn new(method: DimMethod, value: f64, diagnostics: DimDiagnostics) -> Self {
        DimEstimate {
            method,
            value,
            rounded: (value.round() as usize).max(1),
            diagnostics,
        }
    }
}

/// Longest residual-variance curve reported in diagnostics.
const MAX_CURVE: usize = 10;

/// Smallest `d` whose classical-MDS residual variance on kNN-graph geodesics
/// drops below `threshold`.
pub fn global_isomap_dim(points: &[DVector<f64>], k: usize, threshold: f64) -> Result<DimEstimate> {
    let n = points.len();
    if n < 20 {
        return Err(Error::InsufficientSample { got: n, need: 20 });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    let graph = knn_graph(points, k)?;
    graph.ensure_connected()?;
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| graph.shortest_paths(s)).collect();
    // squared, symmetrized geodesics, then double centering
    let mut b = DMatrix::from_fn(n, n, |i, j| {
        let d = 0.5 * (rows[i][j] + rows[j][i]);
        d * d
    });
    let row_mean: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (b[(i, j)] - row_mean[i] - row_mean[j] + total);
        }
    }
    let mut eig: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let positive: f64 = eig.iter().filter(|&&v| v > 0.0).sum();
    if !(positive > 0.0) {
        return Err(Error::DegenerateDenominator("all MDS eigenvalues are non-positive".into()));
    }
    let mut curve = Vec::new();
    let mut cum = 0.0;
    let mut chosen = None;
    for (d, &lam) in eig.iter().enumerate().take_while(|(_, &l)| l > 0.0) {
        cum += lam;
        let residual = (1.0 - cum / positive).max(0.0);
        if curve.len() < MAX_CURVE {
            curve.push(residual);
        }
        if chosen.is_none() && residual < threshold {
            chosen = Some(d + 1);
        }
        if chosen.is_some() && curve.len() >= MAX_CURVE {
            break;
        }
    }
    let d = chosen.expect("residual reaches zero once every positive eigenvalue is used");
    Ok(DimEstimate::new(
        DimMethod::Global,
        d as f64,
        DimDiagnostics::ResidualVariance { curve, threshold },
    ))
}

/// Settings for [`correlation_dim`]: a log grid of `grid_points` radii spanning the
/// observed pairwise distances, fitted where `c_lo ≤ C(r) ≤ c_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub grid_points: usize,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams {
            grid_points: 50,
            c_lo: 0.05,
            c_hi: 0.5,
        }
    }
}

fn pairwise_sorted(points: &[DVector<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| euclidean(&points[i], &points[j])))
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `log C(r)` against `log r` over the configured `C` range.
pub fn correlation_dim(points: &[DVector<f64>], params: &CorrelationParams) -> Result<DimEstimate> {
    let n = points.len();
    if n < 50 {
        return Err(Error::InsufficientSample { got: n, need: 50 });
    }
    if params.grid_points < 3 || !(0.0 < params.c_lo && params.c_lo < params.c_hi && params.c_hi <= 1.0) {
        return Err(Error::invalid("correlation grid needs >= 3 points and 0 < c_lo < c_hi <= 1"));
    }
    let dists = pairwise_sorted(points);
    let pairs = dists.len() as f64;
    let r_min = dists.iter().copied().find(|&d| d > 0.0).ok_or(Error::InsufficientScale { usable: 0 })?;
    let r_max = *dists.last().expect("n >= 50");
    let (l0, l1) = (r_min.ln(), r_max.ln());
    let steps = params.grid_points - 1;
    let grid: Vec<(f64, f64)> = (0..params.grid_points)
        .map(|i| {
            let r = (l0 + (l1 - l0) * i as f64 / steps as f64).exp();
            let below = dists.partition_point(|&d| d < r);
            (r, below as f64 / pairs)
        })
        .collect();
    let used: Vec<(f64, f64)> = grid
        .iter()
        .copied()
        .filter(|&(_, c)| c >= params.c_lo && c <= params.c_hi)
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientScale { usable: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, c)| c.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    Ok(DimEstimate::new(
        DimMethod::Local,
        slope,
        DimDiagnostics::CorrelationFit {
            r_lo: used[0].0,
            r_hi: used[used.len() - 1].0,
            points_used: used.len(),
            grid,
        },
    ))
}

/// Mean over points of the per-point maximum-likelihood dimension from `k` neighbors.
pub fn mle_dim(points: &[DVector<f64>], k: usize) -> Result<DimEstimate> {
    let n = points.len();
    if k < 3 {
        return Err(Error::invalid(format!("mle_dim needs k >= 3, got {k}")));
    }
    if n <= k {
        return Err(Error::InsufficientSample { got: n, need: k + 1 });
    }
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = k_nearest(points, &points[i], k, Some(i));
            if nb[0].distance == 0.0 {
                return Err(Error::DegenerateDistance { i, j: nb[0].index });
            }
            let tk = nb[k - 1].distance;
            let s: f64 = nb[..k - 1].iter().map(|t| (tk / t.distance).ln()).sum::<f64>() / (k - 1) as f64;
            if !(s > 0.0) {
                return Err(Error::DegenerateDistance { i, j: nb[k - 1].index });
            }
            Ok(1.0 / s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / n as f64;
    Ok(DimEstimate::new(DimMethod::Pointwise, mean, DimDiagnostics::PerPoint { k, values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(seed: u64, n: usize, d: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(0.0..1.0))).collect()
    }

    #[test]
    fn plane_in_r50_is_two_dimensional() {
        // lattice geodesics are octagonal, not Euclidean, unless the graph is dense
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(50, 2, |_, _| rng.random_range(-1.0..1.0));
        let pts: Vec<DVector<f64>> = (0..15)
            .flat_map(|i| (0..15).map(move |j| nalgebra::Vector2::new(i as f64, j as f64)))
            .map(|uv| &a * DVector::from_column_slice(uv.as_slice()))
            .collect();
        let est = global_isomap_dim(&pts, 50, 0.05).unwrap();
        assert_eq!(est.rounded, 2, "{:?}", est.diagnostics);
    }

    #[test]
    fn helix_is_one_dimensional() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let pts: Vec<DVector<f64>> = (0..500)
            .map(|i| {
                let t = 4.0 * std::f64::consts::PI * i as f64 / 500.0;
                &a * DVector::from_vec(vec![t.cos(), t.sin(), 0.3 * t])
            })
            .collect();
        assert_eq!(global_isomap_dim(&pts, 6, 0.05).unwrap().rounded, 1);
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let mut pts = uniform(1, 20, 2);
        pts.extend(uniform(2, 20, 2).into_iter().map(|p| p.add_scalar(100.0)));
        assert!(matches!(global_isomap_dim(&pts, 3, 0.05), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn correlation_dim_of_segment_and_square() {
        let seg: Vec<DVector<f64>> = uniform(5, 1000, 1);
        let d1 = correlation_dim(&seg, &CorrelationParams::default()).unwrap().value;
        assert!((d1 - 1.0).abs() <= 0.2, "{d1}");
        let sq = uniform(6, 1000, 2);
        let d2 = correlation_dim(&sq, &CorrelationParams::default()).unwrap().value;
        assert!((d2 - 2.0).abs() <= 0.3, "{d2}");
    }

    #[test]
    fn mle_dim_of_segment_and_square() {
        let d1 = mle_dim(&uniform(7, 1000, 1), 10).unwrap().value;
        assert!((d1 - 1.0).abs() <= 0.2, "{d1}");
        let d2 = mle_dim(&uniform(8, 1000, 2), 10).unwrap().value;
        assert!((d2 - 2.0).abs() <= 0.3, "{d2}");
    }

    #[test]
    fn duplicates_are_degenerate() {
        let mut pts = uniform(9, 30, 2);
        pts[4] = pts[17].clone();
        match mle_dim(&pts, 5) {
            Err(Error::DegenerateDistance { i, j }) => assert!([i, j].contains(&4) && [i, j].contains(&17)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn estimators_ignore_rigid_motion() {
        let pts = uniform(10, 200, 3);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let moved: Vec<DVector<f64>> = pts
            .iter()
            .map(|p| {
                let v = rot * nalgebra::Vector3::new(p[0], p[1], p[2]) + nalgebra::Vector3::new(5.0, -2.0, 1.0);
                DVector::from_column_slice(v.as_slice())
            })
            .collect();
        let a = mle_dim(&pts, 8).unwrap().value;
        let b = mle_dim(&moved, 8).unwrap().value;
        assert!((a - b).abs() < 1e-9);
        let a = correlation_dim(&pts, &CorrelationParams::default()).unwrap().value;
        let b = correlation_dim(&moved, &CorrelationParams::default()).unwrap().value;
        assert!((a - b).abs() < 1e-9);
        let a = global_isomap_dim(&pts, 8, 0.05).unwrap().rounded;
        let b = global_isomap_dim(&moved, 8, 0.05).unwrap().rounded;
        assert_eq!(a, b);
    }
}
