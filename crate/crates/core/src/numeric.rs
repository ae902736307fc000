//! Dense linear-algebra primitives: pseudo-inverse, local PCA, principal angles, kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::TangentFrame;

/// Relative singular-value cutoff used by [`pseudo_inverse`].
pub const PINV_RTOL: f64 = 1e-10;

/// Normalized weights at or below this are treated as zero when averaging subspaces.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-14;

fn require_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Singular values (descending) with matching left/right singular vectors.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD with singular values descending.
///
/// Uses faer: nalgebra's SVD returns inaccurate factors for many rank-deficient inputs.
/// A failed decomposition is reported as all-zero, which callers treat as rank zero.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = m.shape();
    let k = r.min(c);
    let zero = || SortedSvd {
        u: DMatrix::zeros(r, k),
        s: vec![0.0; k],
        v: DMatrix::zeros(c, k),
    };
    if k == 0 {
        return zero();
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let Ok(svd) = fm.thin_svd() else {
        return zero();
    };
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    SortedSvd {
        u: DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| s[i]).collect(),
        v: DMatrix::from_fn(c, k, |i, j| v[(i, j)]),
    }
}

/// Moore–Penrose pseudo-inverse via SVD, dropping singular values below
/// `1e-10 · σ_max`.
pub fn pseudo_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_finite(h, "matrix")?;
    let (r, c) = h.shape();
    if r == 0 || c == 0 {
        return Ok(DMatrix::zeros(c, r));
    }
    let svd = sorted_svd(h);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(c, r);
    if smax == 0.0 {
        return Ok(out);
    }
    let tol = PINV_RTOL * smax;
    for (k, &s) in svd.s.iter().enumerate() {
        if s > tol {
            out += (svd.v.column(k) / s) * svd.u.column(k).transpose();
        }
    }
    Ok(out)
}

/// Ratio of extreme singular values; infinite for singular matrices.
pub fn condition_number(h: &DMatrix<f64>) -> f64 {
    let svd = sorted_svd(h);
    match (svd.s.first(), svd.s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Flips each column so that its first entry with `|v| > 1e-10` is positive.
pub(crate) fn fix_column_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-10) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Top-`q` principal directions of `points` around `center`, weighted.
///
/// Computed from the thin SVD of the weighted, centered data matrix, which avoids
/// forming the `D × D` covariance for large ambient dimensions.
pub fn local_pca(
    points: &[DVector<f64>],
    center: &DVector<f64>,
    weights: &[f64],
    q: usize,
) -> Result<TangentFrame> {
    if points.len() != weights.len() {
        return Err(Error::invalid("points and weights differ in length"));
    }
    if q == 0 {
        return Err(Error::invalid("q must be positive"));
    }
    let dim = center.len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("points differ in dimension from center"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let active: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < q || dim < q {
        return Err(Error::DegenerateNeighborhood {
            point: None,
            rank: active.len().min(dim),
            required: q,
        });
    }
    let mut data = DMatrix::zeros(dim, active.len());
    for (c, &i) in active.iter().enumerate() {
        let col = (&points[i] - center) * weights[i].sqrt();
        data.set_column(c, &col);
    }
    require_finite(&data, "neighborhood")?;
    let svd = sorted_svd(&data);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let rank = svd.s.iter().filter(|&&s| smax > 0.0 && s > PINV_RTOL * smax).count();
    if rank < q {
        return Err(Error::DegenerateNeighborhood {
            point: None,
            rank,
            required: q,
        });
    }
    let mut basis = svd.u.columns(0, q).into_owned();
    fix_column_signs(&mut basis);
    Ok(TangentFrame::from_trusted(None, basis))
}

/// Pairs `cos²` from `MᵀM` with `sin²` from the residual `B − A M` so that both small
/// and large angles keep full precision. Small `q × q` eigenproblems keep queries cheap.
fn angles_one_way(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.tr_mul(b);
    let r = b - a * &m;
    let mut cos2: Vec<f64> = m.tr_mul(&m).symmetric_eigenvalues().iter().copied().collect();
    let mut sin2: Vec<f64> = r.tr_mul(&r).symmetric_eigenvalues().iter().copied().collect();
    cos2.sort_by(|x, y| y.total_cmp(x));
    sin2.sort_by(f64::total_cmp);
    let mut angles: Vec<f64> = cos2
        .iter()
        .zip(&sin2)
        .map(|(c, s)| s.max(0.0).sqrt().atan2(c.max(0.0).sqrt()))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Principal angles between the column spans of two orthonormal bases, ascending,
/// in radians. The result is exactly symmetric in its arguments.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "frames have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let ab = angles_one_way(a, b);
    let ba = angles_one_way(b, a);
    Ok(ab.iter().zip(&ba).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// Geodesic Grassmann distance `sqrt(Σ θ_k²)`.
pub fn grassmann_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(a, b)?.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Projection-Frobenius distance `‖AAᵀ − BBᵀ‖_F / √2 = sqrt(Σ sin² θ_k)`.
pub fn projection_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(a, b)?
        .iter()
        .map(|t| t.sin().powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Gaussian kernel weight `exp(−d² / (2 h²))`.
pub fn gaussian_weight(distance: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if distance.is_nan() || distance < 0.0 {
        return Err(Error::invalid(format!("distance must be non-negative, got {distance}")));
    }
    Ok(gaussian(distance, bandwidth))
}

#[inline]
pub(crate) fn gaussian(distance: f64, bandwidth: f64) -> f64 {
    let r = distance / bandwidth;
    (-0.5 * r * r).exp()
}

/// Nearest matrix with orthonormal columns (polar factor `U Vᵀ`), or `None` when
/// `m` has rank below its column count.
pub(crate) fn orthonormal_polar(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = sorted_svd(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 || svd.s.iter().any(|&s| s <= PINV_RTOL * smax) {
        return None;
    }
    let k = m.ncols();
    Some(svd.u.columns(0, k) * svd.v.columns(0, k).transpose())
}

/// Orthonormal basis of `span(m)` (left singular vectors), or `None` if rank-deficient.
pub(crate) fn column_space(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = sorted_svd(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let k = m.ncols();
    if smax == 0.0 || svd.s.len() < k || svd.s[k - 1] <= PINV_RTOL * smax {
        return None;
    }
    Some(svd.u.columns(0, k).into_owned())
}

/// Rotation `O` minimizing `‖from · O − to‖_F` (orthogonal Procrustes).
pub(crate) fn procrustes_rotation(from: &DMatrix<f64>, to: &DMatrix<f64>) -> DMatrix<f64> {
    let m = from.transpose() * to;
    let svd = sorted_svd(&m);
    &svd.u * svd.v.transpose()
}

/// Symmetrizes and floors eigenvalues of a square matrix at `floor`.
pub(crate) fn floor_spd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| if v.is_finite() { v.max(floor) } else { v });
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Top-`q` eigenvectors of a weighted mean of projectors onto the columns of `bases`.
/// Weights at or below [`NEGLIGIBLE_WEIGHT`] are skipped.
pub(crate) fn mean_subspace<'a, I>(bases: I, weights: &[f64], q: usize) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a DMatrix<f64>>,
{
    let mut bases = bases.into_iter().peekable();
    let dim = bases.peek().ok_or_else(|| Error::invalid("no bases to average"))?.nrows();
    // lower triangle only; the symmetric eigensolver never reads the upper one
    let mut acc = DMatrix::zeros(dim, dim);
    for (b, &w) in bases.zip(weights) {
        if w > NEGLIGIBLE_WEIGHT {
            for c in b.column_iter() {
                acc.syger(w, &c, &c, 1.0);
            }
        }
    }
    let eig = acc.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > 1e-10 * top).count();
    if !(top > 0.0) || rank < q {
        return Err(Error::DegenerateNeighborhood { point: None, rank, required: q });
    }
    let mut basis = DMatrix::from_fn(dim, q, |r, c| eig.eigenvectors[(r, order[c])]);
    fix_column_signs(&mut basis);
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_frame(rng: &mut ChaCha8Rng, d: usize, q: usize) -> DMatrix<f64> {
        column_space(&random_matrix(rng, d, q)).unwrap()
    }

    #[test]
    fn pinv_of_identity_and_orthonormal_columns() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pseudo_inverse(&i3).unwrap() - &i3).amax() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_frame(&mut rng, 6, 2);
        assert!((pseudo_inverse(&q).unwrap() - q.transpose()).amax() < 1e-12);
    }

    #[test]
    fn pinv_penrose_conditions_random_5x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_matrix(&mut rng, 5, 2);
        let hp = pseudo_inverse(&h).unwrap();
        assert!((&h * &hp * &h - &h).amax() < 1e-8);
        assert!((&hp * &h * &hp - &hp).amax() < 1e-8);
    }

    #[test]
    fn svd_reconstructs_low_rank_products() {
        // several of these seeds break nalgebra's own SVD
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let (r, c, k) = (rng.random_range(3..20), rng.random_range(3..20), rng.random_range(1..4));
            let a = DMatrix::from_fn(r, k, |_, _| rng.random_range(-1.0..1.0)) * DMatrix::from_fn(k, c, |_, _| rng.random_range(-1.0..1.0));
            let svd = sorted_svd(&a);
            let rec = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.s.clone())) * svd.v.transpose();
            assert!((rec - &a).amax() < 1e-12 * a.amax().max(1.0));
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn pinv_rank_deficient_and_non_finite() {
        let mut h = DMatrix::zeros(4, 3);
        h[(0, 0)] = 2.0;
        h[(1, 0)] = 2.0;
        let hp = pseudo_inverse(&h).unwrap();
        assert!((&h * &hp * &h - &h).amax() < 1e-12);
        h[(2, 2)] = f64::INFINITY;
        assert!(matches!(pseudo_inverse(&h), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn local_pca_axis_and_sign() {
        let pts: Vec<DVector<f64>> = (0..5)
            .map(|i| {
                let mut v = DVector::zeros(5);
                v[3] = i as f64 - 2.0;
                v
            })
            .collect();
        let frame = local_pca(&pts, &DVector::zeros(5), &[1.0; 5], 1).unwrap();
        let mut e3 = DVector::zeros(5);
        e3[3] = 1.0;
        assert!((frame.basis().column(0) - e3).amax() < 1e-12);
    }

    #[test]
    fn local_pca_degenerate_reports_rank() {
        let pts: Vec<DVector<f64>> = (0..6).map(|i| DVector::from_vec(vec![i as f64, 0.0, 0.0])).collect();
        let err = local_pca(&pts, &DVector::zeros(3), &[1.0; 6], 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateNeighborhood { rank: 1, required: 2, .. }));
    }

    #[test]
    fn local_pca_arc_tangent_within_five_degrees() {
        // unit circle arc around angle 0.3, tangent (-sin, cos)
        let t0: f64 = 0.3;
        let pts: Vec<DVector<f64>> = (-5..=5)
            .map(|k| {
                let t = t0 + 0.02 * k as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
        let center = DVector::from_vec(vec![t0.cos(), t0.sin()]);
        let frame = local_pca(&pts, &center, &[1.0; 11], 1).unwrap();
        let tangent = DMatrix::from_column_slice(2, 1, &[-t0.sin(), t0.cos()]);
        let ang = principal_angles(frame.basis(), &tangent).unwrap()[0];
        assert!(ang.to_degrees() < 5.0, "{}", ang.to_degrees());
    }

    #[test]
    fn principal_angles_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_frame(&mut rng, 7, 3);
        assert!(principal_angles(&a, &a).unwrap().iter().all(|&t| t < 1e-7));

        let e = DMatrix::<f64>::identity(4, 4);
        let ang = principal_angles(&e.columns(0, 2).into_owned(), &e.columns(2, 2).into_owned()).unwrap();
        for t in ang {
            assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }

        // oracle: singular values from the eigenvalues of (AᵀB)(AᵀB)ᵀ
        let b = random_frame(&mut rng, 7, 3);
        let m = a.transpose() * &b;
        let eig = (&m * m.transpose()).symmetric_eigen();
        let mut oracle: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt().clamp(0.0, 1.0).acos())
            .collect();
        oracle.sort_by(f64::total_cmp);
        let got = principal_angles(&a, &b).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-10, "{g} vs {o}");
        }
        assert_eq!(got, principal_angles(&b, &a).unwrap());
        assert!(principal_angles(&a, &random_frame(&mut rng, 6, 3)).is_err());
    }

    #[test]
    fn gaussian_weight_values_and_monotone() {
        assert_eq!(gaussian_weight(0.0, 2.0).unwrap(), 1.0);
        assert!((gaussian_weight(2.0, 2.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!(gaussian_weight(1.0, 0.0).is_err());
        let grid: Vec<f64> = (0..200).map(|i| gaussian_weight(i as f64 * 0.05, 1.3).unwrap()).collect();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                assert!(grid[j] <= grid[i]);
            }
            assert!(grid[i] > 0.0 && grid[i] <= 1.0);
        }
    }

    #[test]
    fn floor_spd_floors_zero_matrix() {
        let f = floor_spd(&DMatrix::zeros(3, 3), 1e-12);
        assert!((f - DMatrix::identity(3, 3) * 1e-12).amax() < 1e-24);
    }
}
