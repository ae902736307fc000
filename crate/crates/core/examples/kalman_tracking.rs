//! Tracks a noisy-odometry robot with the embedding-space filter and compares the
//! result with dead reckoning over ten seeds.
//!
//! cargo run --release --example kalman_tracking

use appearloc::evalx::BenchmarkConfig;
use appearloc::localize::{track_trajectory, FilterVariant, Scenario};
use appearloc::pipeline::Pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchmarkConfig::default();
    let ds = cfg.dataset()?;
    let pipeline = Pipeline::train(&ds, &cfg.fit, &cfg.regressor)?;
    let oracle = pipeline.oracle()?;
    for variant in [FilterVariant::Embedding, FilterVariant::Feature, FilterVariant::Pose] {
        let meas = pipeline.default_measurement(variant)?;
        println!("{variant:?}");
        for seed in 0..10 {
            let scenario = Scenario { seed, ..Scenario::default() };
            let r = track_trajectory(&oracle, &meas, &scenario)?;
            println!(
                "  seed {seed}: filtered {:.4} m, dead reckoning {:.4} m, skipped {}{}",
                r.rmse_filtered,
                r.rmse_dead_reckoning,
                r.skipped_updates,
                r.truncated.as_deref().map(|t| format!(", truncated: {t}")).unwrap_or_default()
            );
        }
    }
    Ok(())
}
