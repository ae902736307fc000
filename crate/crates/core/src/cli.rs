//! Command-line front end: flat TOML configuration with `--set key=value` overrides and
//! the `generate | dimest | train | eval | track` subcommands.
//!
//! Exit codes: 0 success, 1 filter worse than dead reckoning, 2 validation,
//! 3 numerical failure or truncated track, 4 I/O.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::appearance::io::{read_dataset, write_atomic, write_dataset};
use crate::appearance::{ExtractorKind, FeatureExtractorSpec, SamplingScheme, SensorSpec};
use crate::dimest::{correlation_dim, global_isomap_dim, mle_dim, CorrelationParams, DimEstimate, DimMethod};
use crate::error::{Error, Result};
use crate::evalx::{evaluate, split_dataset, BenchmarkConfig, KnrInput};
use crate::jacreg::RegressorParams;
use crate::localize::{track_trajectory, ControlScript, FilterVariant, Scenario, TrackReport};
use crate::neighbors::median;
use crate::pipeline::Pipeline;
use crate::pose::{HeadingDomain, Pose, PoseSpace};
use crate::report::{sig6, Rounded};
use crate::tbml::FitParams;

/// Every configuration key. Files and `--set` use these names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world_seed: u64,
    pub n_landmarks: usize,
    pub p: usize,
    pub max_range: f64,
    pub falloff: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// `interval`, `full` or `fixed`.
    pub heading: String,
    pub heading_lo: f64,
    pub heading_hi: f64,
    pub heading_value: f64,
    /// `random_projection`, `block_average` or `identity`.
    pub extractor: String,
    pub m: usize,
    pub extractor_seed: u64,
    /// `grid` or `trajectory`.
    pub scheme: String,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub grid_headings: usize,
    pub n: usize,
    pub traj_start_x: f64,
    pub traj_start_y: f64,
    pub traj_start_heading: f64,
    pub traj_dt: f64,
    /// Comma-separated `steps:v:omega` segments, repeated cyclically.
    pub traj_controls: String,
    pub traj_sigma_v: f64,
    pub traj_sigma_omega: f64,
    pub traj_seed: u64,
    pub k: usize,
    pub q: usize,
    pub bandwidth_scale: f64,
    pub bandwidth_neighbors: usize,
    pub cutoff_factor: f64,
    pub regressor_bandwidth_scale: f64,
    pub grassmann: bool,
    pub grassmann_bandwidth: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// `features` or `pixels`.
    pub knr_input: String,
    /// `all`, `global`, `local` or `pointwise`.
    pub dimest_method: String,
    /// `features` or `pixels`.
    pub dimest_input: String,
    pub dimest_k: usize,
    pub dimest_threshold: f64,
    pub mle_k: usize,
    /// `embedding`, `feature` or `pose`.
    pub filter_variant: String,
    /// Scenario TOML file; empty means the built-in shuttle.
    pub scenario: String,
    pub track_seeds: u64,
    pub dataset: String,
    pub model: String,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        let fit = FitParams::default();
        let reg = RegressorParams::default();
        RunConfig {
            world_seed: b.world_seed,
            n_landmarks: b.n_landmarks,
            p: b.sensor.p,
            max_range: b.sensor.max_range,
            falloff: b.sensor.falloff,
            x_min: b.pose_space.x_range.0,
            x_max: b.pose_space.x_range.1,
            y_min: b.pose_space.y_range.0,
            y_max: b.pose_space.y_range.1,
            heading: "interval".into(),
            heading_lo: -0.5,
            heading_hi: 0.5,
            heading_value: 0.0,
            extractor: "random_projection".into(),
            m: b.extractor.m,
            extractor_seed: b.extractor.seed,
            scheme: "grid".into(),
            grid_nx: 10,
            grid_ny: 10,
            grid_headings: 5,
            n: 500,
            traj_start_x: 0.5,
            traj_start_y: 2.5,
            traj_start_heading: 0.3,
            traj_dt: 0.5,
            traj_controls: "1:0.016:-0.0024".into(),
            traj_sigma_v: 0.002,
            traj_sigma_omega: 0.002,
            traj_seed: 0,
            k: fit.k,
            q: fit.q,
            bandwidth_scale: fit.bandwidth_scale,
            bandwidth_neighbors: fit.bandwidth_neighbors,
            cutoff_factor: fit.cutoff_factor,
            regressor_bandwidth_scale: reg.bandwidth_scale,
            grassmann: reg.grassmann_bandwidth.is_some(),
            grassmann_bandwidth: reg.grassmann_bandwidth.unwrap_or(std::f64::consts::FRAC_PI_4),
            train_fraction: b.train_fraction,
            split_seed: b.split_seed,
            knr_input: "features".into(),
            dimest_method: "all".into(),
            dimest_input: "features".into(),
            dimest_k: 10,
            dimest_threshold: 0.05,
            mle_k: 10,
            filter_variant: "embedding".into(),
            scenario: String::new(),
            track_seeds: 1,
            dataset: "out/dataset".into(),
            model: "out/model.bin".into(),
            out: "out".into(),
        }
    }
}

/// Validated view of a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Settings {
    pub benchmark: BenchmarkConfig,
    pub dimest_methods: Vec<DimMethod>,
    pub dimest_pixels: bool,
    pub filter_variant: FilterVariant,
}

impl RunConfig {
    /// Parses TOML text, rejecting unknown keys.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads `file` (if any) over the defaults, then applies `key=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let key = key.trim();
            let value = format!("v = {}", raw.trim())
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            table.insert(key.to_string(), value);
        }
        toml::Table::try_into(table).map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Checks every value and builds the domain objects.
    pub fn settings(&self) -> Result<Settings> {
        let heading = match self.heading.as_str() {
            "interval" => HeadingDomain::Interval {
                lo: self.heading_lo,
                hi: self.heading_hi,
            },
            "full" => HeadingDomain::FullCircle,
            "fixed" => HeadingDomain::Fixed {
                value: self.heading_value,
            },
            other => return Err(Error::Config(format!("heading must be interval, full or fixed, got {other:?}"))),
        };
        let pose_space = PoseSpace::new((self.x_min, self.x_max), (self.y_min, self.y_max), heading)?;
        let sensor = SensorSpec::new(self.p, self.max_range, self.falloff)?;
        let kind = match self.extractor.as_str() {
            "random_projection" => ExtractorKind::RandomProjection,
            "block_average" => ExtractorKind::BlockAverage,
            "identity" => ExtractorKind::Identity,
            other => return Err(Error::Config(format!("unknown extractor {other:?}"))),
        };
        let extractor = FeatureExtractorSpec {
            kind,
            m: self.m,
            seed: self.extractor_seed,
        };
        let scheme = match self.scheme.as_str() {
            "grid" => SamplingScheme::Grid {
                nx: self.grid_nx,
                ny: self.grid_ny,
                n_headings: self.grid_headings,
            },
            "trajectory" => SamplingScheme::Trajectory {
                n: self.n,
                start: Pose::try_new(self.traj_start_x, self.traj_start_y, self.traj_start_heading)?,
                dt: self.traj_dt,
                controls: ControlScript::parse(&self.traj_controls)?.segments,
                sigma_v: self.traj_sigma_v,
                sigma_omega: self.traj_sigma_omega,
                seed: self.traj_seed,
            },
            other => return Err(Error::Config(format!("scheme must be grid or trajectory, got {other:?}"))),
        };
        if self.q != pose_space.intrinsic_dim() {
            return Err(Error::Config(format!(
                "q = {} but the pose space has intrinsic dimension {}",
                self.q,
                pose_space.intrinsic_dim()
            )));
        }
        let fit = FitParams {
            k: self.k,
            q: self.q,
            bandwidth_scale: self.bandwidth_scale,
            bandwidth_neighbors: self.bandwidth_neighbors,
            cutoff_factor: self.cutoff_factor,
        };
        fit.check()?;
        if !(self.regressor_bandwidth_scale > 0.0) || !(self.grassmann_bandwidth > 0.0) {
            return Err(Error::Config("regressor bandwidths must be positive".into()));
        }
        let regressor = RegressorParams {
            bandwidth_scale: self.regressor_bandwidth_scale,
            bandwidth_neighbors: self.bandwidth_neighbors,
            grassmann_bandwidth: self.grassmann.then_some(self.grassmann_bandwidth),
        };
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        let knr_input: KnrInput = self.knr_input.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
        let dimest_methods = match self.dimest_method.as_str() {
            "all" => vec![DimMethod::Global, DimMethod::Local, DimMethod::Pointwise],
            one => vec![one.parse().map_err(|e: Error| Error::Config(e.to_string()))?],
        };
        let dimest_pixels = match self.dimest_input.as_str() {
            "features" => false,
            "pixels" => true,
            other => return Err(Error::Config(format!("dimest_input must be features or pixels, got {other:?}"))),
        };
        if self.dimest_k == 0 || !(self.dimest_threshold > 0.0 && self.dimest_threshold < 1.0) || self.mle_k < 3 {
            return Err(Error::Config("dimest_k > 0, dimest_threshold in (0, 1) and mle_k >= 3 are required".into()));
        }
        let filter_variant = self
            .filter_variant
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        if self.track_seeds == 0 {
            return Err(Error::Config("track_seeds must be at least 1".into()));
        }
        Ok(Settings {
            benchmark: BenchmarkConfig {
                world_seed: self.world_seed,
                n_landmarks: self.n_landmarks,
                sensor,
                pose_space,
                extractor,
                scheme,
                fit,
                regressor,
                train_fraction: self.train_fraction,
                split_seed: self.split_seed,
                knr_input,
            },
            dimest_methods,
            dimest_pixels,
            filter_variant,
        })
    }
}

/// Scenario file for `track`. Missing keys take the built-in shuttle values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    /// `[x, y, heading]`.
    pub start: [f64; 3],
    /// Comma-separated `steps:v:omega` segments.
    pub controls: String,
    pub steps: usize,
    pub dt: f64,
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub initial_sigma: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let s = Scenario::default();
        let controls = s
            .controls
            .segments
            .iter()
            .map(|c| format!("{}:{}:{}", c.steps, c.v, c.omega))
            .collect::<Vec<_>>()
            .join(",");
        ScenarioFile {
            start: [s.start.x(), s.start.y(), s.start.heading()],
            controls,
            steps: s.steps,
            dt: s.dt,
            sigma_v: s.sigma_v,
            sigma_omega: s.sigma_omega,
            initial_sigma: s.initial_sigma,
            seed: s.seed,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Scenario> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        Ok(Scenario {
            start: Pose::try_new(f.start[0], f.start[1], f.start[2])?,
            controls: ControlScript::parse(&f.controls)?,
            steps: f.steps,
            dt: f.dt,
            sigma_v: f.sigma_v,
            sigma_omega: f.sigma_omega,
            initial_sigma: f.initial_sigma,
            seed: f.seed,
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "appearloc", version, about = "Appearance-based localization on a learned tangent bundle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML file of configuration keys.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a dataset and write it to `dataset`.
    Generate(Common),
    /// Estimate the intrinsic dimension of the dataset at `dataset`.
    Dimest(Common),
    /// Fit the pipeline on the training split of `dataset` and write `model`.
    Train(Common),
    /// Score `model` and the KNR baseline on the held-out split; writes into `out`.
    Eval(Common),
    /// Run the filter on `scenario` with `model`; writes into `out`.
    Track(Common),
}

fn config_help() -> String {
    let value = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
    let mut s = String::from("Configuration keys (defaults shown):\n");
    if let toml::Value::Table(t) = value {
        for (k, v) in t {
            s.push_str(&format!("  {k} = {v}\n"));
        }
    }
    s
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 4,
        Error::InvalidArgument(_)
        | Error::OutOfDomain(_)
        | Error::Format { .. }
        | Error::Config(_)
        | Error::InsufficientSample { .. } => 2,
        _ => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let help = config_help();
    let command = Cli::command()
        .after_help(help.clone())
        .mut_subcommands(|s| s.after_help(help.clone()));
    let cli = match command.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let (Command::Generate(common)
    | Command::Dimest(common)
    | Command::Train(common)
    | Command::Eval(common)
    | Command::Track(common)) = &cli.command;
    let config = RunConfig::load(common.config.as_deref(), &common.set)?;
    let settings = config.settings()?;
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Generate(_) => cmd_generate(&config, &settings),
        Command::Dimest(_) => cmd_dimest(&config, &settings),
        Command::Train(_) => cmd_train(&config, &settings),
        Command::Eval(_) => cmd_eval(&config, &settings),
        Command::Track(_) => cmd_track(&config, &settings),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_atomic(path, text.as_bytes())
}

fn rounded_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(&Rounded(v)).expect("serializable") + "\n"
}

pub fn cmd_generate(config: &RunConfig, settings: &Settings) -> Result<i32> {
    let ds = settings.benchmark.dataset()?;
    write_dataset(Path::new(&config.dataset), &ds)?;
    println!(
        "generated n={} p={} m={} seed={} -> {}",
        ds.len(),
        ds.image_dim(),
        ds.feature_dim(),
        config.world_seed,
        config.dataset
    );
    Ok(0)
}

/// Runs each requested estimator on `points`.
pub fn dimension_report(points: &[DVector<f64>], config: &RunConfig, methods: &[DimMethod]) -> Result<Vec<DimEstimate>> {
    methods
        .iter()
        .map(|m| match m {
            DimMethod::Global => global_isomap_dim(points, config.dimest_k, config.dimest_threshold),
            DimMethod::Local => correlation_dim(points, &CorrelationParams::default()),
            DimMethod::Pointwise => mle_dim(points, config.mle_k),
        })
        .collect()
}

pub fn cmd_dimest(config: &RunConfig, settings: &Settings) -> Result<i32> {
    let ds = read_dataset(Path::new(&config.dataset))?;
    let points = if settings.dimest_pixels {
        ds.image_points()
    } else {
        ds.feature_points()
    };
    let report = dimension_report(&points, config, &settings.dimest_methods)?;
    let text = rounded_json(&report);
    write_text(&Path::new(&config.out).join("dimest.json"), &text)?;
    print!("{text}");
    Ok(0)
}

pub fn cmd_train(config: &RunConfig, settings: &Settings) -> Result<i32> {
    let ds = read_dataset(Path::new(&config.dataset))?;
    let b = &settings.benchmark;
    let (train, _) = split_dataset(&ds, b.train_fraction, b.split_seed)?;
    if train.len() < b.fit.k + 1 {
        return Err(Error::InsufficientSample {
            got: train.len(),
            need: b.fit.k + 1,
        });
    }
    let pipeline = Pipeline::train(&train, &b.fit, &b.regressor)?;
    let points: Vec<_> = train.samples().iter().map(|s| s.regression_point()).collect();
    let diag = pipeline.diagnostics(&points)?;
    let model_path = Path::new(&config.model);
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    pipeline.save(model_path)?;
    write_text(&Path::new(&config.out).join("train.json"), &rounded_json(&diag))?;
    println!(
        "trained n={} reconstruction_median={} tangent_angle_median_deg={} -> {}",
        diag.n,
        sig6(diag.reconstruction_median),
        sig6(diag.tangent_angle_median_deg),
        config.model
    );
    Ok(0)
}

pub fn cmd_eval(config: &RunConfig, settings: &Settings) -> Result<i32> {
    let pipeline = Pipeline::load(Path::new(&config.model))?;
    let ds = read_dataset(Path::new(&config.dataset))?;
    if ds.feature_dim() != pipeline.model().feature_dim() || ds.image_dim() != pipeline.extractor().input_dim() {
        return Err(Error::invalid(format!(
            "model expects p={} m={}, dataset has p={} m={}",
            pipeline.extractor().input_dim(),
            pipeline.model().feature_dim(),
            ds.image_dim(),
            ds.feature_dim()
        )));
    }
    let b = &settings.benchmark;
    let (train, test) = split_dataset(&ds, b.train_fraction, b.split_seed)?;
    let report = evaluate(&pipeline, &train, &test, b.knr_input, b.split_seed)?;
    let out = Path::new(&config.out);
    write_text(&out.join("report.json"), &report.to_json())?;
    let csv = report.to_csv();
    write_text(&out.join("report.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}

#[derive(Serialize)]
struct TrackSummary {
    variant: FilterVariant,
    runs: Vec<serde_json::Value>,
    median_rmse_filtered: f64,
    median_rmse_dead_reckoning: f64,
    median_improvement: f64,
}

pub fn cmd_track(config: &RunConfig, settings: &Settings) -> Result<i32> {
    let pipeline = Pipeline::load(Path::new(&config.model))?;
    let base = if config.scenario.is_empty() {
        Scenario::default()
    } else {
        let path = Path::new(&config.scenario);
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioFile::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?
    };
    let oracle = pipeline.oracle()?;
    let meas = pipeline.default_measurement(settings.filter_variant)?;
    let out = Path::new(&config.out);
    let mut reports: Vec<(u64, TrackReport)> = Vec::new();
    for seed in base.seed..base.seed + config.track_seeds {
        let scenario = Scenario { seed, ..base.clone() };
        let r = track_trajectory(&oracle, &meas, &scenario)?;
        write_text(&out.join(format!("track_seed{seed}.csv")), &r.to_csv())?;
        reports.push((seed, r));
    }
    let filt: Vec<f64> = reports.iter().map(|(_, r)| r.rmse_filtered).collect();
    let dead: Vec<f64> = reports.iter().map(|(_, r)| r.rmse_dead_reckoning).collect();
    let ratio: Vec<f64> = reports
        .iter()
        .map(|(_, r)| r.rmse_dead_reckoning / r.rmse_filtered.max(f64::MIN_POSITIVE))
        .collect();
    let summary = TrackSummary {
        variant: settings.filter_variant,
        runs: reports
            .iter()
            .map(|(seed, r)| {
                let mut v = r.summary_json();
                v["seed"] = (*seed).into();
                v
            })
            .collect(),
        median_rmse_filtered: median(&filt),
        median_rmse_dead_reckoning: median(&dead),
        median_improvement: median(&ratio),
    };
    write_text(&out.join("track_summary.json"), &rounded_json(&summary))?;
    println!(
        "tracked seeds={} rmse_filtered={} rmse_dead_reckoning={} improvement={}",
        reports.len(),
        sig6(summary.median_rmse_filtered),
        sig6(summary.median_rmse_dead_reckoning),
        sig6(summary.median_improvement)
    );
    if let Some((seed, reason)) = reports.iter().find_map(|(s, r)| r.truncated.as_ref().map(|t| (s, t))) {
        eprintln!("error: seed {seed} truncated: {reason}");
        return Ok(3);
    }
    Ok(if summary.median_rmse_filtered <= summary.median_rmse_dead_reckoning {
        0
    } else {
        1
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
        RunConfig::default().settings().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::load(None, &["bogus=1".into()]), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_parse_as_toml_or_fall_back_to_strings() {
        let c = RunConfig::load(None, &["k=9".into(), "scheme=trajectory".into(), "train_fraction = 0.6".into()]).unwrap();
        assert_eq!((c.k, c.scheme.as_str(), c.train_fraction), (9, "trajectory", 0.6));
        assert!(RunConfig::load(None, &["k=nine".into()]).is_err());
        assert!(RunConfig::load(None, &["k".into()]).is_err());
    }

    #[test]
    fn settings_validate_values() {
        let bad = |f: fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            c.settings().unwrap_err()
        };
        assert!(matches!(bad(|c| c.heading = "sideways".into()), Error::Config(_)));
        assert!(matches!(bad(|c| c.q = 2), Error::Config(_)));
        assert!(matches!(bad(|c| c.train_fraction = 1.0), Error::Config(_)));
        assert!(matches!(bad(|c| c.filter_variant = "magic".into()), Error::Config(_)));
        assert!(matches!(bad(|c| c.x_max = c.x_min), Error::InvalidArgument(_)));
    }

    #[test]
    fn help_lists_every_key() {
        let help = config_help();
        let value = toml::Value::try_from(RunConfig::default()).unwrap();
        for key in value.as_table().unwrap().keys() {
            assert!(help.contains(&format!("  {key} = ")), "{key}");
        }
    }

    #[test]
    fn scenario_errors_name_the_line() {
        let err = ScenarioFile::parse("steps = 10\ndt = \n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let s = ScenarioFile::parse("steps = 7\ncontrols = \"3:0.1:0.0\"").unwrap();
        assert_eq!(s.steps, 7);
        assert_eq!(s.controls.segments.len(), 1);
    }
}
