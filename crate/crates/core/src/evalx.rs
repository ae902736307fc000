//! Benchmark harness: dataset splitting, the kernel nonparametric regression (KNR)
//! baseline with leave-one-out bandwidth selection, RRMSE, and the pipeline-vs-KNR report.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appearance::{
    generate_dataset, Dataset, ExtractorKind, FeatureExtractorSpec, Oracle, SamplingScheme, SensorSpec, World,
};
use crate::error::{Error, Result};
use crate::jacreg::RegressorParams;
use crate::neighbors::{euclidean, median};
use crate::pipeline::{fit_quality, Pipeline};
use crate::pose::{wrap_angle, HeadingDomain, Pose, PoseSpace};
use crate::report::{sig6, Rounded};
use crate::tbml::FitParams;
use crate::types::LabeledDataset;

/// Input space of the KNR baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnrInput {
    Features,
    Pixels,
}

impl std::str::FromStr for KnrInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "features" => Ok(KnrInput::Features),
            "pixels" => Ok(KnrInput::Pixels),
            other => Err(Error::invalid(format!("unknown knr input {other:?}"))),
        }
    }
}

/// Seeded partition into `floor(fraction·n)` training and the remaining test samples.
/// Both halves keep the original sample order.
pub fn split_dataset<M: Clone>(ds: &LabeledDataset<M>, fraction: f64, seed: u64) -> Result<(LabeledDataset<M>, LabeledDataset<M>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let n = ds.len();
    if n < 5 {
        return Err(Error::InsufficientSample { got: n, need: 5 });
    }
    let n_train = (fraction * n as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Nadaraya–Watson pose estimate. Heading is averaged through its sine and cosine.
pub fn knr_predict(inputs: &[DVector<f64>], poses: &[Pose], x: &DVector<f64>, bandwidth: f64) -> Result<Pose> {
    knr_core(inputs, poses, x, bandwidth, None)
}

fn knr_core(inputs: &[DVector<f64>], poses: &[Pose], x: &DVector<f64>, bandwidth: f64, skip: Option<usize>) -> Result<Pose> {
    if !(bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if inputs.len() != poses.len() || inputs.is_empty() {
        return Err(Error::invalid("knr needs matching, non-empty inputs and poses"));
    }
    let (mut sw, mut sx, mut sy, mut sc, mut ss) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut nearest = f64::INFINITY;
    for (i, (w, p)) in inputs.iter().zip(poses).enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = euclidean(w, x);
        nearest = nearest.min(d);
        let k = (-0.5 * (d / bandwidth).powi(2)).exp();
        sw += k;
        sx += k * p.x();
        sy += k * p.y();
        sc += k * p.heading().cos();
        ss += k * p.heading().sin();
    }
    if !(sw > 0.0) {
        return Err(Error::OutOfSupport { nearest });
    }
    Ok(Pose::new(sx / sw, sy / sw, ss.atan2(sc)))
}

/// Candidate minimizing mean squared leave-one-out error over all pose coordinates
/// (heading difference wrapped). Ties go to the smaller bandwidth.
pub fn loo_cv_bandwidth(inputs: &[DVector<f64>], poses: &[Pose], candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::invalid("bandwidth grid is empty"));
    }
    if inputs.len() < 3 {
        return Err(Error::InsufficientSample { got: inputs.len(), need: 3 });
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&h| loo_score(inputs, poses, h))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (j, s) in scores.iter().enumerate() {
        let (b, c) = (scores[best], candidates[best]);
        if *s < b || (*s == b && candidates[j] < c) {
            best = j;
        }
    }
    Ok(candidates[best])
}

fn loo_score(inputs: &[DVector<f64>], poses: &[Pose], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let mut total = 0.0;
    for i in 0..inputs.len() {
        total += match knr_core(inputs, poses, &inputs[i], h, Some(i)) {
            Ok(p) => p.difference(&poses[i]).norm_squared(),
            Err(Error::OutOfSupport { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
    }
    Ok(total / inputs.len() as f64)
}

/// 15 log-spaced candidates over `[0.1, 10]` times the median pairwise distance.
pub fn bandwidth_grid(inputs: &[DVector<f64>]) -> Result<Vec<f64>> {
    let n = inputs.len();
    let pairs: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| euclidean(&inputs[i], &inputs[j]))
        .collect();
    let scale = median(&pairs);
    if !(scale > 0.0) {
        return Err(Error::DegenerateDenominator("median pairwise distance is zero".into()));
    }
    Ok((0..15).map(|k| scale * 10f64.powf(-1.0 + 2.0 * k as f64 / 14.0)).collect())
}

/// Position RRMSE: `sqrt(mean‖θ̂−θ‖²) / sqrt(mean‖θ−θ̄‖²)` over x and y.
pub fn rrmse(predicted: &[Pose], truth: &[Pose]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("rrmse needs equal, non-empty prediction and truth lists"));
    }
    let n = truth.len() as f64;
    let (mx, my) = truth.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x(), b + p.y()));
    let (mx, my) = (mx / n, my / n);
    let den: f64 = truth.iter().map(|p| (p.x() - mx).powi(2) + (p.y() - my).powi(2)).sum::<f64>() / n;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator("truth positions have zero variance".into()));
    }
    let num: f64 = predicted.iter().zip(truth).map(|(a, b)| a.position_distance(b).powi(2)).sum::<f64>() / n;
    Ok((num / den).sqrt())
}

fn heading_rmse(predicted: &[Pose], truth: &[Pose]) -> f64 {
    let sq: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(a, b)| wrap_angle(a.heading() - b.heading()).powi(2))
        .sum();
    (sq / truth.len() as f64).sqrt()
}

/// Everything that defines one benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub world_seed: u64,
    pub n_landmarks: usize,
    pub sensor: SensorSpec,
    pub pose_space: PoseSpace,
    pub extractor: FeatureExtractorSpec,
    pub scheme: SamplingScheme,
    pub fit: FitParams,
    pub regressor: RegressorParams,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub knr_input: KnrInput,
}

impl Default for BenchmarkConfig {
    /// 10×10 positions on `[0, 5]²` times 5 headings in `[-0.5, 0.5]`, 1024-pixel
    /// panoramas, 64 random-projection features.
    fn default() -> Self {
        BenchmarkConfig {
            world_seed: 7,
            n_landmarks: 8,
            sensor: SensorSpec::default(),
            pose_space: PoseSpace {
                x_range: (0.0, 5.0),
                y_range: (0.0, 5.0),
                heading: HeadingDomain::Interval { lo: -0.5, hi: 0.5 },
            },
            extractor: FeatureExtractorSpec {
                kind: ExtractorKind::RandomProjection,
                m: 64,
                seed: 1,
            },
            scheme: SamplingScheme::Grid {
                nx: 10,
                ny: 10,
                n_headings: 5,
            },
            fit: FitParams::default(),
            regressor: RegressorParams::default(),
            train_fraction: 0.7,
            split_seed: 0,
            knr_input: KnrInput::Features,
        }
    }
}

impl BenchmarkConfig {
    pub fn world(&self) -> Result<World> {
        World::random(self.world_seed, &self.pose_space, self.n_landmarks)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let space = PoseSpace::new(self.pose_space.x_range, self.pose_space.y_range, self.pose_space.heading)?;
        generate_dataset(&self.world()?, &self.sensor, &space, &self.extractor, &self.scheme)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub rrmse: f64,
    pub heading_rmse: f64,
}

/// Median, 90th percentile and maximum of a diagnostic distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let p90 = v[((0.9 * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Spread {
            median: median(values),
            p90,
            max: *v.last().expect("non-empty"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rrmse_definition: String,
    pub dataset: String,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub methods: Vec<MethodScore>,
    pub knr_input: KnrInput,
    pub knr_bandwidth: f64,
    /// Held-out `‖g(h(Z)) − Z‖/‖Z‖`.
    pub reconstruction: Spread,
    /// Largest principal angle between `Span(G)` and the oracle tangent, degrees.
    pub tangent_angle_deg: Spread,
}

impl BenchmarkReport {
    pub fn score(&self, method: &str) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.rrmse)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Rounded(self)).expect("report serializes") + "\n"
    }

    /// One row per method in the layout `method,sensor,rrmse,heading_rmse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,sensor,rrmse,heading_rmse\n");
        for m in &self.methods {
            let _ = writeln!(out, "{},{},{},{}", m.method, self.dataset, sig6(m.rrmse), sig6(m.heading_rmse));
        }
        out
    }
}

fn dataset_label(ds: &Dataset) -> String {
    let m = &ds.meta;
    format!("{:?}-p{}-m{}-world{}", m.extractor.kind, m.sensor.p, m.extractor.m, m.world_hash).to_lowercase()
}

/// Scores a trained pipeline and a KNR baseline fitted on `train` against `test`.
pub fn evaluate(pipeline: &Pipeline, train: &Dataset, test: &Dataset, knr_input: KnrInput, split_seed: u64) -> Result<BenchmarkReport> {
    if train.feature_dim() != pipeline.model().feature_dim() || test.feature_dim() != train.feature_dim() {
        return Err(Error::invalid("model and dataset feature dimensions differ"));
    }
    if test.image_dim() != pipeline.extractor().input_dim() {
        return Err(Error::invalid("model and dataset image dimensions differ"));
    }
    let truth = test.poses();
    let loc = pipeline.localization();
    let gse: Vec<Pose> = test
        .samples()
        .par_iter()
        .map(|s| loc.pose_from_features(s.features.values()))
        .collect::<Result<Vec<_>>>()?;

    let pick = |ds: &Dataset| match knr_input {
        KnrInput::Features => ds.feature_points(),
        KnrInput::Pixels => ds.image_points(),
    };
    let (tr_in, te_in) = (pick(train), pick(test));
    let tr_pose = train.poses();
    let bandwidth = loo_cv_bandwidth(&tr_in, &tr_pose, &bandwidth_grid(&tr_in)?)?;
    let knr: Vec<Pose> = te_in
        .par_iter()
        .map(|x| knr_predict(&tr_in, &tr_pose, x, bandwidth))
        .collect::<Result<Vec<_>>>()?;

    let oracle = Oracle::from_meta(&test.meta)?;
    let points: Vec<_> = test.samples().iter().map(|s| s.regression_point()).collect();
    let (rec, ang) = fit_quality(pipeline.model(), &oracle, &points)?;
    Ok(BenchmarkReport {
        rrmse_definition: "sqrt(mean |p_hat - p|^2) / sqrt(mean |p - mean(p)|^2), positions only".into(),
        dataset: dataset_label(test),
        split_seed,
        n_train: train.len(),
        n_test: test.len(),
        methods: vec![
            MethodScore {
                method: "gse".into(),
                rrmse: rrmse(&gse, &truth)?,
                heading_rmse: heading_rmse(&gse, &truth),
            },
            MethodScore {
                method: "knr".into(),
                rrmse: rrmse(&knr, &truth)?,
                heading_rmse: heading_rmse(&knr, &truth),
            },
        ],
        knr_input,
        knr_bandwidth: bandwidth,
        reconstruction: Spread::of(&rec),
        tangent_angle_deg: Spread::of(&ang),
    })
}

/// Generates the dataset, splits it, trains the pipeline and scores both methods.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let ds = config.dataset()?;
    let (train, test) = split_dataset(&ds, config.train_fraction, config.split_seed)?;
    let pipeline = Pipeline::train(&train, &config.fit, &config.regressor)?;
    evaluate(&pipeline, &train, &test, config.knr_input, config.split_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureVector, ImageVector, Sample};

    fn toy(n: usize) -> LabeledDataset<()> {
        let samples = (0..n)
            .map(|i| {
                let v = DVector::from_vec(vec![i as f64, 1.0, 0.0]);
                Sample {
                    image: ImageVector::new(v.clone()).unwrap(),
                    features: FeatureVector::new(v).unwrap(),
                    pose: Pose::new(i as f64, 0.0, 0.0),
                }
            })
            .collect();
        LabeledDataset::new(samples, ()).unwrap()
    }

    #[test]
    fn split_partitions_deterministically() {
        let ds = toy(10);
        let (a, b) = split_dataset(&ds, 0.7, 5).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let (a2, _) = split_dataset(&ds, 0.7, 5).unwrap();
        assert_eq!(a.poses(), a2.poses());
        let mut xs: Vec<f64> = a.poses().iter().chain(b.poses().iter()).map(|p| p.x()).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        assert!(split_dataset(&ds, 1.0, 0).is_err());
        assert!(split_dataset(&ds, 0.0, 0).is_err());
    }

    #[test]
    fn rrmse_hand_cases() {
        let t = [Pose::new(0.0, 0.0, 0.0), Pose::new(2.0, 0.0, 0.0), Pose::new(4.0, 0.0, 0.0)];
        let p = [Pose::new(0.0, 0.0, 0.0), Pose::new(2.0, 0.0, 0.0), Pose::new(4.0, 1.0, 0.0)];
        assert!((rrmse(&p, &t).unwrap() - (1.0f64 / 3.0).sqrt() / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(rrmse(&t, &t).unwrap(), 0.0);
        let mean = [Pose::new(2.0, 0.0, 0.0); 3];
        assert!((rrmse(&mean, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(rrmse(&mean, &mean), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn knr_limits_and_direct_sum() {
        let ds = toy(10);
        let (inp, poses) = (ds.feature_points(), ds.poses());
        assert_eq!(knr_predict(&inp, &poses, &inp[4], 1e-3).unwrap(), poses[4]);
        let wide = knr_predict(&inp, &poses, &inp[0], 1e9).unwrap();
        assert!((wide.x() - 4.5).abs() < 1e-9);

        let x = DVector::from_vec(vec![3.3, 0.2, -0.4]);
        let h = 1.7;
        let w: Vec<f64> = inp
            .iter()
            .map(|v| (-((v - &x).norm_squared()) / (2.0 * h * h)).exp())
            .collect();
        let ex = w.iter().zip(&poses).map(|(w, p)| w * p.x()).sum::<f64>() / w.iter().sum::<f64>();
        assert!((knr_predict(&inp, &poses, &x, h).unwrap().x() - ex).abs() < 1e-12);
        assert!(matches!(
            knr_predict(&inp, &poses, &DVector::from_vec(vec![1e6, 0.0, 0.0]), 1e-3),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn knr_heading_rotates_with_training_headings() {
        let inp: Vec<DVector<f64>> = (0..6).map(|i| DVector::from_vec(vec![i as f64])).collect();
        let poses: Vec<Pose> = (0..6).map(|i| Pose::new(0.0, 0.0, 3.0 + 0.1 * i as f64)).collect();
        let x = DVector::from_vec(vec![2.4]);
        let base = knr_predict(&inp, &poses, &x, 1.5).unwrap().heading();
        let d = 1.1;
        let rotated: Vec<Pose> = poses.iter().map(|p| Pose::new(0.0, 0.0, p.heading() + d)).collect();
        let r = knr_predict(&inp, &rotated, &x, 1.5).unwrap().heading();
        assert!(wrap_angle(r - base - d).abs() < 1e-12);
    }

    #[test]
    fn loo_matches_exhaustive_recomputation() {
        let inp: Vec<DVector<f64>> = (0..12).map(|i| DVector::from_vec(vec![(i as f64 * 0.7).sin() + i as f64])).collect();
        let poses: Vec<Pose> = (0..12).map(|i| Pose::new((i as f64).sqrt(), 0.3 * i as f64, 0.0)).collect();
        let grid = [0.2, 0.5, 1.0, 2.0, 5.0];
        let mut best = (f64::INFINITY, 0.0);
        for &h in &grid {
            let mut e = 0.0;
            for i in 0..12 {
                let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
                for j in (0..12).filter(|&j| j != i) {
                    let k = (-((inp[j][0] - inp[i][0]).powi(2)) / (2.0 * h * h)).exp();
                    sw += k;
                    sx += k * poses[j].x();
                    sy += k * poses[j].y();
                }
                e += (sx / sw - poses[i].x()).powi(2) + (sy / sw - poses[i].y()).powi(2);
            }
            if e < best.0 {
                best = (e, h);
            }
        }
        assert_eq!(loo_cv_bandwidth(&inp, &poses, &grid).unwrap(), best.1);
        assert_eq!(loo_cv_bandwidth(&inp, &poses, &[0.9]).unwrap(), 0.9);
        assert!(loo_cv_bandwidth(&inp, &poses, &[]).is_err());
    }
}
