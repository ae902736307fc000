//! Synthetic appearance space: a known image-modeling function, the feature
//! extractor standing in for a learned network, and dataset generation.

mod extractor;
pub mod io;
mod world;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extractor::{extract_features, ExtractorKind, FeatureExtractor, FeatureExtractorSpec};
pub use world::{render_image, Landmark, SensorSpec, World};

use crate::error::{Error, Result};
use crate::localize::motion::{motion_step, Control, ControlSegment, ControlScript, MotionModel};
use crate::pose::{HeadingDomain, Pose, PoseSpace};
use crate::types::{FeatureVector, ImageVector, LabeledDataset, RegressionPoint, Sample};

/// How training poses are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Regular lattice in position times equispaced headings.
    Grid { nx: usize, ny: usize, n_headings: usize },
    /// Poses visited by integrating a control script with noisy odometry.
    Trajectory {
        n: usize,
        start: Pose,
        dt: f64,
        controls: Vec<ControlSegment>,
        sigma_v: f64,
        sigma_omega: f64,
        seed: u64,
    },
}

/// Everything needed to regenerate or re-render a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub world: World,
    pub world_hash: String,
    pub sensor: SensorSpec,
    pub pose_space: PoseSpace,
    pub extractor: FeatureExtractorSpec,
    pub scheme: SamplingScheme,
}

pub type Dataset = LabeledDataset<DatasetMeta>;

/// The ground-truth chart `θ ↦ (ω(φ(θ)), θ)` and its pieces.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub world: World,
    pub sensor: SensorSpec,
    pub pose_space: PoseSpace,
    extractor: FeatureExtractor,
}

impl Oracle {
    pub fn new(world: World, sensor: SensorSpec, pose_space: PoseSpace, extractor: FeatureExtractorSpec) -> Result<Self> {
        let extractor = FeatureExtractor::new(extractor, sensor.p)?;
        Ok(Oracle {
            world,
            sensor,
            pose_space,
            extractor,
        })
    }

    pub fn from_meta(meta: &DatasetMeta) -> Result<Self> {
        if meta.world.hash() != meta.world_hash {
            return Err(Error::format("world_hash", "does not match the stored world"));
        }
        Oracle::new(meta.world.clone(), meta.sensor, meta.pose_space, meta.extractor)
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn render(&self, pose: &Pose) -> Result<ImageVector> {
        render_image(&self.world, &self.sensor, &self.pose_space, pose)
    }

    pub fn sample(&self, pose: &Pose) -> Result<Sample> {
        let image = self.render(pose)?;
        let features = self.extractor.extract(&image)?;
        Ok(Sample {
            image,
            features,
            pose: *pose,
        })
    }

    /// Feature-modeling function `Φ(θ) = ω(φ(θ))`, without the domain check.
    pub fn features_unchecked(&self, pose: &Pose) -> DVector<f64> {
        let image = world::render_unchecked(&self.world, &self.sensor, pose);
        self.extractor
            .extract_raw(image.values())
            .expect("extractor built for this sensor")
    }

    pub fn regression_point(&self, pose: &Pose) -> Result<RegressionPoint> {
        let s = self.sample(pose)?;
        Ok(RegressionPoint::new(s.features, *pose))
    }

    /// Central-difference Jacobian of the chart `θ ↦ (scale·Φ(θ), θ)` over the active
    /// pose coordinates: `(m+3) × q`, lower block the identity.
    pub fn chart_jacobian(&self, pose: &Pose, feature_scale: f64, step: f64) -> DMatrix<f64> {
        let q = self.pose_space.intrinsic_dim();
        let m = self.extractor.output_dim();
        let mut jac = DMatrix::zeros(m + 3, q);
        for c in 0..q {
            let mut delta = nalgebra::Vector3::zeros();
            delta[c] = step;
            let plus = self.features_unchecked(&pose.offset(&delta));
            let minus = self.features_unchecked(&pose.offset(&-delta));
            let col = (plus - minus) * (feature_scale / (2.0 * step));
            jac.view_mut((0, c), (m, 1)).copy_from(&col);
            jac[(m + c, c)] = 1.0;
        }
        jac
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Poses prescribed by a sampling scheme, in dataset order.
pub fn scheme_poses(space: &PoseSpace, scheme: &SamplingScheme) -> Result<Vec<Pose>> {
    match scheme {
        SamplingScheme::Grid { nx, ny, n_headings } => {
            if *nx == 0 || *ny == 0 || *n_headings == 0 {
                return Err(Error::invalid("grid dimensions must be positive"));
            }
            let headings = match space.heading {
                HeadingDomain::Fixed { value } => {
                    if *n_headings != 1 {
                        return Err(Error::invalid("a fixed-heading space takes exactly one grid heading"));
                    }
                    vec![value]
                }
                HeadingDomain::Interval { lo, hi } => linspace(lo, hi, *n_headings),
                HeadingDomain::FullCircle => (0..*n_headings)
                    .map(|k| -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / *n_headings as f64)
                    .collect(),
            };
            let xs = linspace(space.x_range.0, space.x_range.1, *nx);
            let ys = linspace(space.y_range.0, space.y_range.1, *ny);
            let mut poses = Vec::with_capacity(nx * ny * n_headings);
            for &x in &xs {
                for &y in &ys {
                    for &h in &headings {
                        poses.push(Pose::new(x, y, h));
                    }
                }
            }
            Ok(poses)
        }
        SamplingScheme::Trajectory {
            n,
            start,
            dt,
            controls,
            sigma_v,
            sigma_omega,
            seed,
        } => {
            if *n == 0 {
                return Err(Error::invalid("trajectory length must be positive"));
            }
            if !(*sigma_v >= 0.0 && *sigma_omega >= 0.0) {
                return Err(Error::invalid("odometry noise must be non-negative"));
            }
            let script = ControlScript::new(controls.clone())?;
            let model = MotionModel::unicycle(*dt)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let nv = Normal::new(0.0, *sigma_v).map_err(|e| Error::invalid(e.to_string()))?;
            let nw = Normal::new(0.0, *sigma_omega).map_err(|e| Error::invalid(e.to_string()))?;
            let mut poses = Vec::with_capacity(*n);
            let mut pose = *start;
            for t in 0..*n {
                if !space.contains(&pose) {
                    return Err(Error::OutOfDomain(format!(
                        "trajectory step {t} reaches pose {pose} outside the pose space"
                    )));
                }
                poses.push(pose);
                let u = script.at(t);
                let noisy = Control::new(u.v + nv.sample(&mut rng), u.omega + nw.sample(&mut rng));
                pose = motion_step(&model, &pose, noisy);
            }
            Ok(poses)
        }
    }
}

/// Renders and featurizes every pose of `scheme`.
pub fn generate_dataset(
    world: &World,
    sensor: &SensorSpec,
    pose_space: &PoseSpace,
    extractor: &FeatureExtractorSpec,
    scheme: &SamplingScheme,
) -> Result<Dataset> {
    let oracle = Oracle::new(world.clone(), *sensor, *pose_space, *extractor)?;
    let poses = scheme_poses(pose_space, scheme)?;
    let samples = poses
        .par_iter()
        .map(|pose| oracle.sample(pose))
        .collect::<Result<Vec<_>>>()?;
    let meta = DatasetMeta {
        world: world.clone(),
        world_hash: world.hash(),
        sensor: *sensor,
        pose_space: *pose_space,
        extractor: *extractor,
        scheme: scheme.clone(),
    };
    LabeledDataset::new(samples, meta)
}

/// Builds a sample from already-known image and features (used by readers).
pub(crate) fn sample_from_parts(image: DVector<f64>, features: DVector<f64>, pose: Pose) -> Result<Sample> {
    Ok(Sample {
        image: ImageVector::new(image)?,
        features: FeatureVector::new(features)?,
        pose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (World, SensorSpec, PoseSpace, FeatureExtractorSpec) {
        let space = PoseSpace::new((0.0, 5.0), (0.0, 5.0), HeadingDomain::Interval { lo: -0.5, hi: 0.5 }).unwrap();
        let world = World::random(3, &space, 6).unwrap();
        let sensor = SensorSpec::new(128, 100.0, 1.0).unwrap();
        let ex = FeatureExtractorSpec {
            kind: ExtractorKind::RandomProjection,
            m: 16,
            seed: 1,
        };
        (world, sensor, space, ex)
    }

    #[test]
    fn grid_counts_entries() {
        let (w, s, sp, ex) = setup();
        let ds = generate_dataset(&w, &s, &sp, &ex, &SamplingScheme::Grid { nx: 5, ny: 5, n_headings: 4 }).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.feature_dim(), 16);
        assert_eq!(ds.image_dim(), 128);
    }

    #[test]
    fn trajectory_is_reproducible_and_checked() {
        let (w, s, sp, ex) = setup();
        let scheme = SamplingScheme::Trajectory {
            n: 30,
            start: Pose::new(1.0, 1.0, 0.0),
            dt: 0.5,
            controls: vec![ControlSegment { steps: 10, v: 0.2, omega: 0.05 }, ControlSegment { steps: 10, v: 0.2, omega: -0.05 }],
            sigma_v: 0.01,
            sigma_omega: 0.01,
            seed: 4,
        };
        let a = generate_dataset(&w, &s, &sp, &ex, &scheme).unwrap();
        let b = generate_dataset(&w, &s, &sp, &ex, &scheme).unwrap();
        assert_eq!(a, b);
        let runaway = SamplingScheme::Trajectory {
            n: 500,
            start: Pose::new(1.0, 1.0, 0.0),
            dt: 1.0,
            controls: vec![ControlSegment { steps: 1, v: 1.0, omega: 0.0 }],
            sigma_v: 0.0,
            sigma_omega: 0.0,
            seed: 0,
        };
        let err = generate_dataset(&w, &s, &sp, &ex, &runaway).unwrap_err();
        assert!(err.to_string().contains("step 5"), "{err}");
    }

    #[test]
    fn chart_jacobian_lower_block_is_identity() {
        let (w, s, sp, ex) = setup();
        let oracle = Oracle::new(w, s, sp, ex).unwrap();
        let j = oracle.chart_jacobian(&Pose::new(2.0, 2.0, 0.1), 1.0, 1e-5);
        assert_eq!(j.shape(), (19, 3));
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(j[(16 + r, c)], if r == c { 1.0 } else { 0.0 });
            }
        }
    }
}
