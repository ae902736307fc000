//! Fits the tangent-bundle model on the benchmark grid, then checks it against
//! the oracle on held-out poses: reconstruction, tangent alignment and the recovery
//! Jacobian against finite differences.
//!
//! cargo run --release --example tangent_bundle

use appearloc::evalx::{split_dataset, BenchmarkConfig};
use appearloc::pipeline::{fit_quality, Pipeline};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchmarkConfig::default();
    let ds = cfg.dataset()?;
    let (train, test) = split_dataset(&ds, cfg.train_fraction, cfg.split_seed)?;
    let pipeline = Pipeline::train(&train, &cfg.fit, &cfg.regressor)?;
    let model = pipeline.model();
    println!("fitted n={} m={} q={}", train.len(), model.feature_dim(), model.intrinsic_dim());

    let oracle = pipeline.oracle()?;
    let held: Vec<_> = test.samples().iter().map(|s| s.regression_point()).collect();
    let (rec, ang) = fit_quality(model, &oracle, &held)?;
    println!("held-out reconstruction median {:.4}  max {:.4}", median(rec.clone()), rec.iter().fold(0.0f64, |a, &b| a.max(b)));
    println!("held-out tangent angle median {:.2} deg", median(ang));

    // recovery Jacobian of a held-out point against central differences of recover()
    let y = model.embed(&held[0])?;
    let g = model.recovery_jacobian(&y)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for j in 0..model.intrinsic_dim() {
        let mut e = y.clone();
        e[j] += h;
        let plus = model.recover_raw(&e)?;
        e[j] -= 2.0 * h;
        let minus = model.recover_raw(&e)?;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((fd - g.column(j)).norm() / g.column(j).norm());
    }
    println!("recovery Jacobian vs finite differences: worst column error {worst:.2e}");
    Ok(())
}
