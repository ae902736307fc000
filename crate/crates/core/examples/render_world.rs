//! Renders panoramas from the default benchmark world and shows what the feature
//! extractor keeps.
//!
//! cargo run --release --example render_world

use appearloc::appearance::Oracle;
use appearloc::evalx::BenchmarkConfig;
use appearloc::pose::Pose;

const BARS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

fn sparkline(values: &[f64], width: usize) -> String {
    let chunk = values.len() / width;
    let means: Vec<f64> = values.chunks(chunk).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let (lo, hi) = means.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    means
        .iter()
        .map(|v| BARS[(((v - lo) / (hi - lo).max(1e-12)) * 7.0).round() as usize])
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchmarkConfig::default();
    let world = cfg.world()?;
    println!("world {} with {} landmarks", world.hash(), world.landmarks.len());
    for l in &world.landmarks {
        println!(
            "  at ({:6.2}, {:6.2})  intensity {:.2}  width {:.2} rad",
            l.position[0], l.position[1], l.intensity, l.angular_width
        );
    }
    let oracle = Oracle::new(world, cfg.sensor, cfg.pose_space, cfg.extractor)?;
    for pose in [Pose::new(1.0, 1.0, 0.0), Pose::new(1.0, 1.0, 0.4), Pose::new(4.0, 3.0, 0.0)] {
        let s = oracle.sample(&pose)?;
        println!("{pose}  {}", sparkline(s.image.values().as_slice(), 64));
        println!("{:>26}  |w| = {:.4}", "", s.features.values().norm());
    }
    match oracle.render(&Pose::new(6.0, 1.0, 0.0)) {
        Ok(_) => println!("unexpected: rendered outside the workspace"),
        Err(e) => println!("outside the workspace: {e}"),
    }
    Ok(())
}
