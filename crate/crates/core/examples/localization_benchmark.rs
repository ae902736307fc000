//! Pipeline versus KNR on the default benchmark over several split seeds.
//!
//! cargo run --release --example localization_benchmark -- [seeds]

use appearloc::evalx::{run_benchmark, BenchmarkConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    println!("seed  gse_rrmse  knr_rrmse  recon_median  angle_median_deg");
    for seed in 0..seeds {
        let cfg = BenchmarkConfig {
            split_seed: seed,
            ..BenchmarkConfig::default()
        };
        let r = run_benchmark(&cfg)?;
        println!(
            "{seed:>4}  {:>9.4}  {:>9.4}  {:>12.4}  {:>16.2}",
            r.score("gse").unwrap_or(f64::NAN),
            r.score("knr").unwrap_or(f64::NAN),
            r.reconstruction.median,
            r.tangent_angle_deg.median
        );
    }
    Ok(())
}
