//! World-frame point clouds, ASCII PLY export, and voxel downsampling.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// Write the cloud as ASCII PLY (one `x y z` vertex per line).
pub fn write_ply<P: AsRef<Path>>(cloud: &PointCloud, path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "ply")?;
    writeln!(f, "format ascii 1.0")?;
    writeln!(f, "element vertex {}", cloud.len())?;
    writeln!(f, "property float x")?;
    writeln!(f, "property float y")?;
    writeln!(f, "property float z")?;
    writeln!(f, "end_header")?;
    for p in &cloud.points {
        writeln!(f, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Read an ASCII PLY vertex cloud written by [`write_ply`].
pub fn read_ply<P: AsRef<Path>>(path: P) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
    let reader = std::io::BufReader::new(file);
    let mut points = Vec::new();
    let mut in_body = false;
    let mut n_vertices = 0usize;
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if !in_body {
            if line.starts_with("element vertex") {
                n_vertices = line
                    .split_whitespace()
                    .nth(2)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: ln + 1,
                        msg: "bad vertex count".into(),
                    })?;
            } else if line == "end_header" {
                in_body = true;
            }
            continue;
        }
        if points.len() >= n_vertices {
            break;
        }
        let c: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .filter_map(|s| s.parse().ok())
            .collect();
        if c.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                msg: "vertex needs 3 coordinates".into(),
            });
        }
        points.push(Point3::new(c[0], c[1], c[2]));
    }
    Ok(PointCloud::new(points))
}

fn voxel_key(p: &Point3<f64>, voxel: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    )
}

/// One centroid per occupied voxel.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    assert!(voxel > 0.0, "voxel size must be positive");
    let mut acc = VoxelAccumulator::new(voxel);
    acc.add_cloud(cloud);
    acc.centroids()
}

/// Streaming voxel-centroid accumulator. Adding every frame's points and then
/// taking centroids is exactly voxel_downsample over the concatenated cloud.
#[derive(Debug, Clone)]
pub struct VoxelAccumulator {
    voxel: f64,
    cells: HashMap<(i64, i64, i64), (Vector3<f64>, u64)>,
    total_points: u64,
}

impl VoxelAccumulator {
    pub fn new(voxel: f64) -> Self {
        assert!(voxel > 0.0);
        Self {
            voxel,
            cells: HashMap::new(),
            total_points: 0,
        }
    }

    pub fn add_point(&mut self, p: &Point3<f64>) {
        let entry = self
            .cells
            .entry(voxel_key(p, self.voxel))
            .or_insert((Vector3::zeros(), 0));
        entry.0 += p.coords;
        entry.1 += 1;
        self.total_points += 1;
    }

    pub fn add_cloud(&mut self, cloud: &PointCloud) {
        for p in &cloud.points {
            self.add_point(p);
        }
    }

    pub fn total_points(&self) -> u64 {
        self.total_points
    }

    pub fn occupied_voxels(&self) -> usize {
        self.cells.len()
    }

    pub fn centroids(&self) -> PointCloud {
        let mut keys: Vec<_> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        let points = keys
            .iter()
            .map(|k| {
                let (sum, n) = &self.cells[k];
                Point3::from(sum / *n as f64)
            })
            .collect();
        PointCloud::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn downsample_merges_voxel_mates() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.001, 0.001, 0.001),
            Point3::new(0.003, 0.003, 0.003),
        ]);
        let out = voxel_downsample(&cloud, 0.005);
        assert_eq!(out.len(), 1);
        assert!((out.points[0].x - 0.002).abs() < 1e-12);
    }

    #[test]
    fn downsample_identity_on_distinct_voxels() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(0.0, 0.1, 0.0),
        ]);
        let out = voxel_downsample(&cloud, 0.005);
        assert_eq!(out.len(), 3);
        let mut a: Vec<_> = cloud.points.iter().map(|p| (p.x, p.y, p.z)).collect();
        let mut b: Vec<_> = out.points.iter().map(|p| (p.x, p.y, p.z)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x.0 - y.0).abs() < 1e-12);
        }
    }

    #[test]
    fn downsample_count_matches_hash_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point3<f64>> = (0..100_000)
            .map(|_| {
                Point3::new(
                    rng.gen_range(0.0..0.25),
                    rng.gen_range(0.0..0.25),
                    rng.gen_range(0.0..0.25f64),
                )
            })
            .collect();
        let cloud = PointCloud::new(points);
        let voxel = 0.005;
        let mut distinct = std::collections::HashSet::new();
        for p in &cloud.points {
            distinct.insert(voxel_key(p, voxel));
        }
        let out = voxel_downsample(&cloud, voxel);
        assert_eq!(out.len(), distinct.len());
    }

    #[test]
    fn ply_round_trip() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.5, -0.25, 1.0),
            Point3::new(0.0, 0.0, 0.0),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        write_ply(&cloud, &path).unwrap();
        let back = read_ply(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back.points[0] - cloud.points[0]).norm() < 1e-12);
    }

    #[test]
    fn streaming_accumulator_equals_batch_downsample() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Point3<f64>> = (0..5000)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2f64),
                )
            })
            .collect();
        let cloud = PointCloud::new(points);
        let batch = voxel_downsample(&cloud, 0.01);
        let mut acc = VoxelAccumulator::new(0.01);
        for chunk in cloud.points.chunks(137) {
            acc.add_cloud(&PointCloud::new(chunk.to_vec()));
        }
        let streamed = acc.centroids();
        assert_eq!(batch.len(), streamed.len());
        for (a, b) in batch.points.iter().zip(streamed.points.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
