//! Jacobian-corrected kernel regression against plain kernel averaging, first on a
//! scalar toy function and then on the embedding of a trained model.
//!
//! cargo run --release --example jacobian_regression

use appearloc::evalx::{split_dataset, BenchmarkConfig};
use appearloc::jacreg::{Anchor, InputKind, JacobianRegressor};
use appearloc::pipeline::Pipeline;
use nalgebra::{DMatrix, DVector};

fn anchors(xs: &[f64], with_jacobian: bool) -> Vec<Anchor> {
    xs.iter()
        .map(|&x| Anchor {
            input: DVector::from_element(1, x),
            y: DVector::from_element(1, x.sin()),
            jacobian: DMatrix::from_element(1, 1, if with_jacobian { x.cos() } else { 0.0 }),
            frame: None,
            bandwidth: 0.4,
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.9).collect();
    let jac = JacobianRegressor::new(InputKind::Feature, anchors(&xs, true), None)?;
    let nw = JacobianRegressor::new(InputKind::Feature, anchors(&xs, false), None)?;
    println!("sin(x) from 8 anchors spaced 0.9 apart");
    println!("{:>6} {:>9} {:>9} {:>9}", "x", "truth", "jacobian", "average");
    for i in 0..=12 {
        let x = i as f64 * 0.5;
        let q = DVector::from_element(1, x);
        println!("{x:6.2} {:9.4} {:9.4} {:9.4}", x.sin(), jac.predict(&q)?[0], nw.predict(&q)?[0]);
    }
    let rmse = |r: &JacobianRegressor| -> Result<f64, appearloc::error::Error> {
        let mut sq = 0.0;
        for i in 0..=630 {
            let x = i as f64 * 0.01;
            sq += (r.predict(&DVector::from_element(1, x))?[0] - x.sin()).powi(2);
        }
        Ok((sq / 631.0).sqrt())
    };
    println!("rmse on [0, 6.3]: jacobian {:.4}, average {:.4}", rmse(&jac)?, rmse(&nw)?);

    let cfg = BenchmarkConfig::default();
    let (train, test) = split_dataset(&cfg.dataset()?, cfg.train_fraction, cfg.split_seed)?;
    let pipeline = Pipeline::train(&train, &cfg.fit, &cfg.regressor)?;
    let model = pipeline.model();
    let reg = pipeline.pose_regressor();
    let mut errs: Vec<f64> = test
        .samples()
        .iter()
        .map(|s| {
            let truth = model.embed(&s.regression_point())?;
            let pred = reg.predict(&DVector::from_column_slice(s.pose.to_vector().as_slice()))?;
            Ok((pred - &truth).norm() / truth.norm())
        })
        .collect::<Result<_, appearloc::error::Error>>()?;
    errs.sort_by(f64::total_cmp);
    println!(
        "pose -> embedding on {} held-out poses: median relative error {:.4}, p90 {:.4}",
        errs.len(),
        errs[errs.len() / 2],
        errs[errs.len() * 9 / 10]
    );
    Ok(())
}
