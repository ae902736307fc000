//! Invariants checked on random inputs.

use std::f64::consts::PI;

use appearloc::evalx::{knr_predict, rrmse};
use appearloc::numeric::{grassmann_distance, principal_angles, projection_distance, pseudo_inverse};
use appearloc::pose::{wrap_angle, Pose};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn pose() -> impl Strategy<Value = Pose> {
    (-10.0..10.0f64, -10.0..10.0f64, -PI..PI).prop_map(|(x, y, h)| Pose::new(x, y, h))
}

/// Product of an `r×k` and a `k×c` factor, so rank is at most `k`.
fn low_rank(r: usize, c: usize, k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (
        prop::collection::vec(-1.0..1.0f64, r * k),
        prop::collection::vec(-1.0..1.0f64, k * c),
    )
        .prop_map(move |(a, b)| DMatrix::from_vec(r, k, a) * DMatrix::from_vec(k, c, b))
}

fn orthonormal(n: usize, d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * d).prop_map(move |v| DMatrix::from_vec(n, d, v).qr().q())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wrap_angle_lands_in_half_open_range(a in -1e4..1e4f64) {
        let w = wrap_angle(a);
        prop_assert!((-PI..PI).contains(&w));
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn rrmse_ignores_common_translation(
        pairs in prop::collection::vec((pose(), pose()), 2..30),
        dx in -50.0..50.0f64,
        dy in -50.0..50.0f64,
    ) {
        let (pred, truth): (Vec<Pose>, Vec<Pose>) = pairs.into_iter().unzip();
        prop_assume!(rrmse(&pred, &truth).is_ok());
        let shift = |ps: &[Pose]| ps.iter().map(|p| Pose::new(p.x() + dx, p.y() + dy, p.heading())).collect::<Vec<_>>();
        let a = rrmse(&pred, &truth).unwrap();
        let b = rrmse(&shift(&pred), &shift(&truth)).unwrap();
        prop_assert!(close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn pseudo_inverse_meets_penrose_conditions(
        (h, k) in (1usize..7, 1usize..7, 1usize..4)
            .prop_flat_map(|(r, c, k)| (low_rank(r, c, k), Just(k)))
    ) {
        let p = pseudo_inverse(&h).unwrap();
        let scale = 1.0 + h.norm() * p.norm();
        prop_assert!((&h * &p * &h - &h).norm() <= 1e-8 * scale * h.norm().max(1.0));
        prop_assert!((&p * &h * &p - &p).norm() <= 1e-8 * scale * p.norm().max(1.0));
        let hp = &h * &p;
        let ph = &p * &h;
        prop_assert!((&hp - hp.transpose()).norm() <= 1e-8 * scale);
        prop_assert!((&ph - ph.transpose()).norm() <= 1e-8 * scale);
        // H·H⁺ projects onto the range of H
        prop_assert!((&hp * &hp - &hp).norm() <= 1e-8 * scale);
        prop_assert!(hp.trace().round() as usize <= k);
    }

    #[test]
    fn principal_angles_are_symmetric_and_bounded(
        (a, b) in (2usize..9, 1usize..4)
            .prop_filter("d < n", |(n, d)| d < n)
            .prop_flat_map(|(n, d)| (orthonormal(n, d), orthonormal(n, d)))
    ) {
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert!(ab.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(ab.iter().all(|t| (0.0..=PI / 2.0 + 1e-12).contains(t)));
        // independent oracle: the projector gap equals sqrt(Σ sin²θ)·√2
        let gap = (&a * a.transpose() - &b * b.transpose()).norm() / 2f64.sqrt();
        prop_assert!((projection_distance(&a, &b).unwrap() - gap).abs() < 1e-7);
        prop_assert!(grassmann_distance(&a, &a).unwrap() < 1e-7);
    }

    #[test]
    fn knr_commutes_with_heading_rotation(
        poses in prop::collection::vec(pose(), 3..15),
        alpha in -PI..PI,
        query in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let inputs: Vec<DVector<f64>> = poses.iter().map(|p| DVector::from_vec(vec![p.x() / 10.0, p.y() / 10.0])).collect();
        let x = DVector::from_vec(query);
        let rotated: Vec<Pose> = poses.iter().map(|p| Pose::new(p.x(), p.y(), p.heading() + alpha)).collect();
        let a = knr_predict(&inputs, &poses, &x, 0.5);
        let b = knr_predict(&inputs, &rotated, &x, 0.5);
        prop_assume!(a.is_ok() && b.is_ok());
        let (a, b) = (a.unwrap(), b.unwrap());
        prop_assert!(close(a.x(), b.x(), 1e-12) && close(a.y(), b.y(), 1e-12));
        // the circular mean is undefined when the weighted headings cancel
        let (s, c) = poses.iter().zip(&inputs).fold((0.0, 0.0), |(s, c), (p, w)| {
            let k = (-0.5 * (w - &x).norm_squared() / 0.25).exp();
            (s + k * p.heading().sin(), c + k * p.heading().cos())
        });
        prop_assume!(s.hypot(c) > 1e-6);
        prop_assert!(wrap_angle(b.heading() - a.heading() - alpha).abs() < 1e-9);
    }
}
