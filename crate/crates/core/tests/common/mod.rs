#![allow(dead_code)]

use appearloc::pose::Pose;
use appearloc::tbml::{default_feature_scale, RegressionManifoldSample};
use appearloc::types::{FeatureVector, RegressionPoint};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points `w = A θ + b` over a jittered `n_side³` lattice of poses.
pub struct AffineData {
    pub sample: RegressionManifoldSample,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineData {
    pub fn new(seed: u64, m: usize, n_side: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(1.0..2.0));
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                for l in 0..n_side {
                    let pose = Pose::new(
                        i as f64 * 0.5 + rng.random_range(-0.05..0.05),
                        j as f64 * 0.5 + rng.random_range(-0.05..0.05),
                        -0.5 + l as f64 * 0.25 + rng.random_range(-0.02..0.02),
                    );
                    pts.push(RegressionPoint::new(FeatureVector::new(Self::map(&a, &b, &pose)).unwrap(), pose));
                }
            }
        }
        let sample = RegressionManifoldSample::new(pts, default_feature_scale(m)).unwrap();
        AffineData { sample, a, b }
    }

    fn map(a: &DMatrix<f64>, b: &DVector<f64>, pose: &Pose) -> DVector<f64> {
        a * DVector::from_column_slice(pose.to_vector().as_slice()) + b
    }

    pub fn features(&self, pose: &Pose) -> DVector<f64> {
        Self::map(&self.a, &self.b, pose)
    }

    /// Stacked raw `(w, x, y, heading)`.
    pub fn stacked(&self, pose: &Pose) -> DVector<f64> {
        let w = self.features(pose);
        let mut z = DVector::zeros(w.len() + 3);
        z.rows_mut(0, w.len()).copy_from(&w);
        z.rows_mut(w.len(), 3).copy_from(&DVector::from_column_slice(pose.to_vector().as_slice()));
        z
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
