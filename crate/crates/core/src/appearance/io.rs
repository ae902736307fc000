//! On-disk dataset layout: `manifest.json`, `images.f32`, `features.f32`, `poses.csv`.
//!
//! Binary files are row-major little-endian `f32` (`n × p` and `n × m`).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{sample_from_parts, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::types::LabeledDataset;

pub const MANIFEST: &str = "manifest.json";
pub const IMAGES: &str = "images.f32";
pub const FEATURES: &str = "features.f32";
pub const POSES: &str = "poses.csv";
pub const POSES_HEADER: &str = "id,x,y,heading";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    n: usize,
    p: usize,
    m: usize,
    seed: u64,
    world_hash: String,
    meta: DatasetMeta,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn f32_bytes<'a>(rows: impl Iterator<Item = &'a DVector<f64>>) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        for v in row.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n: ds.len(),
        p: ds.image_dim(),
        m: ds.feature_dim(),
        seed: ds.meta.world.seed,
        world_hash: ds.meta.world_hash.clone(),
        meta: ds.meta.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::format("manifest", e.to_string()))?;
    write_atomic(&dir.join(IMAGES), &f32_bytes(ds.samples().iter().map(|s| s.image.values())))?;
    write_atomic(&dir.join(FEATURES), &f32_bytes(ds.samples().iter().map(|s| s.features.values())))?;
    let mut csv = String::from(POSES_HEADER);
    csv.push('\n');
    for (i, s) in ds.samples().iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", s.pose.x(), s.pose.y(), s.pose.heading()));
    }
    write_atomic(&dir.join(POSES), csv.as_bytes())?;
    write_atomic(&dir.join(MANIFEST), &json)
}

fn read_f32_rows(path: &Path, field: &str, n: usize, width: usize) -> Result<Vec<DVector<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let want = n * width * 4;
    if bytes.len() != want {
        return Err(Error::format(
            field,
            format!("{} holds {} bytes, manifest implies {want}", path.display(), bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(width * 4)
        .map(|row| {
            DVector::from_iterator(
                width,
                row.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64),
            )
        })
        .collect())
}

fn read_poses(path: &Path, n: usize) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(POSES_HEADER) {
        return Err(Error::format("poses", format!("header must be {POSES_HEADER:?}")));
    }
    let mut poses = Vec::with_capacity(n);
    for (row, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::format("poses", format!("line {}: bad number {s:?}", row + 2)))
        };
        if cols.len() != 4 || cols[0].trim() != row.to_string() {
            return Err(Error::format("poses", format!("line {}: expected id,x,y,heading", row + 2)));
        }
        poses.push(Pose::try_new(parse(cols[1])?, parse(cols[2])?, parse(cols[3])?)?);
    }
    if poses.len() != n {
        return Err(Error::format("poses", format!("{} rows, manifest says n = {n}", poses.len())));
    }
    Ok(poses)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format("format_version", format!("unsupported version {}", manifest.format_version)));
    }
    if manifest.world_hash != manifest.meta.world.hash() || manifest.world_hash != manifest.meta.world_hash {
        return Err(Error::format("world_hash", "does not match the stored world"));
    }
    if manifest.p != manifest.meta.sensor.p {
        return Err(Error::format("p", "disagrees with the sensor spec"));
    }
    if manifest.m != manifest.meta.extractor.m {
        return Err(Error::format("m", "disagrees with the extractor spec"));
    }
    if manifest.seed != manifest.meta.world.seed {
        return Err(Error::format("seed", "disagrees with the world seed"));
    }
    let images = read_f32_rows(&dir.join(IMAGES), "images", manifest.n, manifest.p)?;
    let features = read_f32_rows(&dir.join(FEATURES), "features", manifest.n, manifest.m)?;
    let poses = read_poses(&dir.join(POSES), manifest.n)?;
    let samples = images
        .into_iter()
        .zip(features)
        .zip(poses)
        .map(|((x, w), pose)| sample_from_parts(x, w, pose))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(samples, manifest.meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::*;
    use crate::pose::{HeadingDomain, PoseSpace};

    fn small() -> Dataset {
        let space = PoseSpace::new((0.0, 2.0), (0.0, 2.0), HeadingDomain::Interval { lo: -0.3, hi: 0.3 }).unwrap();
        let world = World::random(1, &space, 5).unwrap();
        let sensor = SensorSpec::new(32, 100.0, 1.0).unwrap();
        let ex = FeatureExtractorSpec {
            kind: ExtractorKind::BlockAverage,
            m: 8,
            seed: 0,
        };
        generate_dataset(&world, &sensor, &space, &ex, &SamplingScheme::Grid { nx: 3, ny: 2, n_headings: 2 }).unwrap()
    }

    #[test]
    fn round_trip_matches_f32_rounding() {
        let ds = small();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.meta, ds.meta);
        for (a, b) in ds.samples().iter().zip(back.samples()) {
            assert_eq!(a.pose, b.pose);
            let rounded = a.image.values().map(|v| v as f32 as f64);
            assert_eq!(&rounded, b.image.values());
        }
    }

    #[test]
    fn truncated_binary_names_field() {
        let ds = small();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let path = dir.path().join(FEATURES);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        let err = read_dataset(dir.path()).unwrap_err();
        assert!(matches!(&err, Error::Format { field, .. } if field == "features"), "{err}");
    }
}
