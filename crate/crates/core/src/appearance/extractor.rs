use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FeatureVector, ImageVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Identity,
    RandomProjection,
    BlockAverage,
}

impl std::str::FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ExtractorKind::Identity),
            "random_projection" => Ok(ExtractorKind::RandomProjection),
            "block_average" => Ok(ExtractorKind::BlockAverage),
            other => Err(Error::invalid(format!("unknown extractor kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractorSpec {
    pub kind: ExtractorKind,
    pub m: usize,
    pub seed: u64,
}

/// Deterministic stand-in for a learned image feature map.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    spec: FeatureExtractorSpec,
    p: usize,
    projection: Option<DMatrix<f64>>,
}

impl FeatureExtractor {
    pub fn new(spec: FeatureExtractorSpec, p: usize) -> Result<Self> {
        if spec.m < 3 || spec.m > p {
            return Err(Error::invalid(format!(
                "feature dim m = {} must satisfy 3 <= m <= p = {p}",
                spec.m
            )));
        }
        let projection = match spec.kind {
            ExtractorKind::Identity if spec.m != p => {
                return Err(Error::invalid(format!("identity extractor needs m = p = {p}, got {}", spec.m)));
            }
            ExtractorKind::BlockAverage if p % spec.m != 0 => {
                return Err(Error::invalid(format!(
                    "block_average needs m | p, got m = {}, p = {p}",
                    spec.m
                )));
            }
            ExtractorKind::RandomProjection => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let scale = 1.0 / (spec.m as f64).sqrt();
                // row-major fill so the matrix does not depend on storage order
                let mut r = DMatrix::zeros(spec.m, p);
                for i in 0..spec.m {
                    for j in 0..p {
                        r[(i, j)] = if rng.random_bool(0.5) { scale } else { -scale };
                    }
                }
                Some(r)
            }
            _ => None,
        };
        Ok(FeatureExtractor { spec, p, projection })
    }

    pub fn spec(&self) -> &FeatureExtractorSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.p
    }

    pub fn output_dim(&self) -> usize {
        self.spec.m
    }

    pub fn extract(&self, image: &ImageVector) -> Result<FeatureVector> {
        self.extract_raw(image.values())
            .and_then(FeatureVector::new)
    }

    pub(crate) fn extract_raw(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.p {
            return Err(Error::invalid(format!(
                "image has length {}, extractor expects {}",
                x.len(),
                self.p
            )));
        }
        Ok(match self.spec.kind {
            ExtractorKind::Identity => x.clone(),
            ExtractorKind::RandomProjection => self.projection.as_ref().expect("built in new") * x,
            ExtractorKind::BlockAverage => {
                let block = self.p / self.spec.m;
                DVector::from_fn(self.spec.m, |i, _| {
                    x.rows(i * block, block).iter().sum::<f64>() / block as f64
                })
            }
        })
    }
}

/// One-shot form of [`FeatureExtractor::extract`].
pub fn extract_features(spec: &FeatureExtractorSpec, image: &ImageVector) -> Result<FeatureVector> {
    FeatureExtractor::new(*spec, image.len())?.extract(image)
}
