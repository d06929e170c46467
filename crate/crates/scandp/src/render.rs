//! Pinhole depth rendering by BVH ray casting, back-projection to world-frame
//! point clouds, per-ray range noise, and the flat depth binary format.

use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::mesh::TriangleMesh;

/// Default maximum sensing range in meters.
pub const DEFAULT_MAX_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, degrees.
    pub fov_x: f64,
    /// Vertical field of view, degrees.
    pub fov_y: f64,
    pub max_range: f64,
}

impl CameraModel {
    pub fn new(width: u32, height: u32, fov_x: f64, fov_y: f64, max_range: f64) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(Error::InvalidArgument("camera needs >=1 pixel".into()));
        }
        if !(0.0..180.0).contains(&fov_x) || fov_x <= 0.0 || !(0.0..180.0).contains(&fov_y) || fov_y <= 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "fov must be in (0,180), got {fov_x} x {fov_y}"
            )));
        }
        if max_range <= 0.0 {
            return Err(Error::InvalidArgument("max_range must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            fov_x,
            fov_y,
            max_range,
        })
    }

    /// 224x224 at 45 x 45 degrees, the default sensor.
    pub fn default_sensor() -> Self {
        Self::new(224, 224, 45.0, 45.0, DEFAULT_MAX_RANGE).unwrap()
    }

    /// Camera-frame ray direction through pixel center (u, v), unnormalized z=1.
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vector3<f64> {
        let tan_x = (self.fov_x.to_radians() / 2.0).tan();
        let tan_y = (self.fov_y.to_radians() / 2.0).tan();
        let x = ((u as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * tan_x;
        let y = ((v as f64 + 0.5) / self.height as f64 * 2.0 - 1.0) * tan_y;
        Vector3::new(x, y, 1.0)
    }
}

/// Row-major range image. Invalid rays are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl DepthMap {
    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![f32::NAN; (width * height) as usize],
        }
    }

    #[inline]
    pub fn at(&self, u: u32, v: u32) -> f32 {
        self.values[(v * self.width + u) as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, d: f32) {
        self.values[(v * self.width + u) as usize] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| d.is_finite()).count()
    }
}

/// Ray-cast a depth map of `mesh` from `pose`.
///
/// Each pixel holds the distance along its ray to the nearest triangle, or
/// NaN when nothing is hit within `cam.max_range`. Note the value is ray
/// length (range), not z-depth.
pub fn render_depth(mesh: &TriangleMesh, pose: &Pose, cam: &CameraModel) -> DepthMap {
    let mut depth = DepthMap::invalid(cam.width, cam.height);
    let orig = pose.translation;
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir_cam = cam.pixel_ray(u, v).normalize();
            let dir = pose.rotation * dir_cam;
            if let Some((t, _)) = mesh.raycast(&orig, &dir, cam.max_range) {
                depth.set(u, v, t as f32);
            }
        }
    }
    depth
}

/// Lift every valid depth sample into a world-frame 3D point.
pub fn backproject(depth: &DepthMap, pose: &Pose, cam: &CameraModel) -> Result<PointCloud> {
    if depth.width != cam.width || depth.height != cam.height {
        return Err(Error::DimensionMismatch(format!(
            "depth {}x{} vs camera {}x{}",
            depth.width, depth.height, cam.width, cam.height
        )));
    }
    let mut points = Vec::with_capacity(depth.valid_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            let d = depth.at(u, v);
            if !d.is_finite() {
                continue;
            }
            let dir_cam = cam.pixel_ray(u, v).normalize();
            let p_cam = Point3::from(dir_cam * d as f64);
            points.push(pose.transform_point(&p_cam));
        }
    }
    Ok(PointCloud::new(points))
}

/// Perturb each valid range sample with zero-mean Gaussian noise along the
/// ray. Samples pushed to zero or below become invalid. Deterministic per seed.
pub fn add_depth_noise(depth: &DepthMap, std: f64, seed: u64) -> DepthMap {
    assert!(std >= 0.0, "noise std must be nonnegative");
    if std == 0.0 {
        return depth.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("valid std");
    let mut out = depth.clone();
    for d in &mut out.values {
        if d.is_finite() {
            let noisy = *d as f64 + normal.sample(&mut rng);
            *d = if noisy > 0.0 { noisy as f32 } else { f32::NAN };
        }
    }
    out
}

/// Write the flat depth binary: u32 width, u32 height, then row-major f32
/// samples, all little-endian. Invalid samples are NaN.
pub fn write_depth_binary<P: AsRef<Path>>(depth: &DepthMap, path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_u32::<LittleEndian>(depth.width)?;
    f.write_u32::<LittleEndian>(depth.height)?;
    for d in &depth.values {
        f.write_f32::<LittleEndian>(*d)?;
    }
    Ok(())
}

pub fn read_depth_binary<P: AsRef<Path>>(path: P) -> Result<DepthMap> {
    let path = path.as_ref();
    let mut f = std::io::BufReader::new(
        std::fs::File::open(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?,
    );
    let width = f.read_u32::<LittleEndian>()?;
    let height = f.read_u32::<LittleEndian>()?;
    let n = width as usize * height as usize;
    let mut values = vec![0f32; n];
    let mut buf = vec![0u8; n * 4];
    f.read_exact(&mut buf)
        .map_err(|_| Error::Malformed("truncated depth binary".into()))?;
    for (i, chunk) in buf.chunks_exact(4).enumerate() {
        values[i] = f32::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(DepthMap {
        width,
        height,
        values,
    })
}
