//! Intrinsic dimension of three synthetic datasets with all three estimators:
//! a robot route (a curve), a fixed-heading grid (a plane) and the full benchmark grid.
//!
//! Global IsoMap needs geodesics that embed isometrically in a flat space. Image
//! manifolds with two or more dimensions are curved enough that the 5% residual
//! threshold overshoots, while the local estimators stay close to the truth.
//!
//! cargo run --release --example dimension_estimates

use appearloc::cli::{dimension_report, RunConfig};
use appearloc::dimest::DimMethod;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let route = RunConfig {
        scheme: "trajectory".into(),
        ..RunConfig::default()
    };
    let plane = RunConfig {
        heading: "fixed".into(),
        q: 2,
        grid_nx: 15,
        grid_ny: 15,
        grid_headings: 1,
        dimest_k: 50,
        ..RunConfig::default()
    };
    let volume = RunConfig {
        dimest_k: 50,
        ..RunConfig::default()
    };
    let methods = [DimMethod::Global, DimMethod::Local, DimMethod::Pointwise];
    for (name, cfg) in [("route", route), ("plane", plane), ("volume", volume)] {
        let ds = cfg.settings()?.benchmark.dataset()?;
        print!("{name:>7} (n={}):", ds.len());
        for est in dimension_report(&ds.feature_points(), &cfg, &methods)? {
            print!("  {:?} {:.2} -> {}", est.method, est.value, est.rounded);
        }
        println!();
    }
    Ok(())
}
