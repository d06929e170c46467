//! Scripted scanning expert: a jittered spiral orbit over the object's
//! bounding sphere with look-at orientation, rendered into depth maps.
//! Stands in for human demonstrations.

use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::{look_at, Pose};
use crate::mesh::TriangleMesh;
use crate::render::{read_depth_binary, write_depth_binary, CameraModel, DepthMap};
use crate::{Error, Result};

pub const MOTION_BOUND: f64 = 0.05;
pub const ORBIT_RADIUS_FACTOR: f64 = 1.4;
/// Elevation of the two orbit bands (radians, ~50 deg keeps poles visible).
const BAND_ELEVATION: f64 = 0.875;
const JITTER_STD: f64 = 2.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone)]
pub struct Demonstration {
    pub steps: Vec<(Pose, DepthMap)>,
    pub cam: CameraModel,
    pub object_id: String,
    pub seed: u64,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.steps.iter().map(|(p, _)| p.clone()).collect()
    }
}

/// Orbit radius: 1.4x the bounding radius, raised when necessary so every
/// orbit point stays outside the bounding box inflated by 0.1 m.
pub fn orbit_radius(mesh: &TriangleMesh) -> f64 {
    let r = ORBIT_RADIUS_FACTOR * mesh.bounds().bounding_radius();
    let max_half = 0.5
        * mesh
            .bounds()
            .extents()
            .iter()
            .fold(0.0f64, |m, v| m.max(*v));
    // A sphere of radius R has points of max-norm as low as R/sqrt(3).
    r.max(1.02 * 3f64.sqrt() * (max_half + 0.1))
}

fn spherical(center: Point3<f64>, radius: f64, azimuth: f64, elevation: f64) -> Point3<f64> {
    center
        + Vector3::new(
            radius * elevation.cos() * azimuth.cos(),
            radius * elevation.cos() * azimuth.sin(),
            radius * elevation.sin(),
        )
}

fn pose_at(center: Point3<f64>, radius: f64, azimuth: f64, elevation: f64) -> Result<Pose> {
    let eye = spherical(center, radius, azimuth, elevation);
    // Near-vertical viewing directions need a different up reference.
    let up = if elevation.cos().abs() < 0.2 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    look_at(eye, center, up)
}

/// Scripted spiral trajectory with per-step angular jitter; consecutive
/// translations respect the motion bound.
pub fn expert_poses(mesh: &TriangleMesh, seed: u64, t_steps: usize) -> Result<Vec<Pose>> {
    let center = mesh.bounds().center();
    let radius = orbit_radius(mesh);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Azimuth step sized so a full band orbit moves just under the bound.
    let base_daz = 0.9 * MOTION_BOUND / (radius * BAND_ELEVATION.cos());
    // One slow elevation cycle between the +/- bands per ~150 steps.
    let elev_period = 150.0;
    let mut poses = Vec::with_capacity(t_steps);
    let mut azimuth = 0.0;
    for t in 0..t_steps {
        let jitter_az: f64 = rng.sample::<f64, _>(StandardNormal) * JITTER_STD;
        let jitter_el: f64 = rng.sample::<f64, _>(StandardNormal) * JITTER_STD;
        azimuth += base_daz;
        let elevation = BAND_ELEVATION
            * (2.0 * std::f64::consts::PI * t as f64 / elev_period).sin()
            + jitter_el;
        let elevation = elevation.clamp(-BAND_ELEVATION, BAND_ELEVATION);
        let mut pose = pose_at(center, radius, azimuth + jitter_az, elevation)?;
        if let Some(prev) = poses.last() {
            let prev: &Pose = prev;
            let delta = pose.translation - prev.translation;
            let dist = delta.norm();
            if dist > MOTION_BOUND {
                // Clamp on the orbit sphere: rotate from the previous
                // position toward the target by the angle whose chord is the
                // motion bound. Chord clamping would drift inward.
                let u0 = (prev.translation - center) / radius;
                let u1 = (pose.translation - center) / radius;
                let max_angle = 2.0 * (MOTION_BOUND / (2.0 * radius)).asin();
                let clamped = match nalgebra::Unit::try_new(u0.cross(&u1), 1e-12) {
                    Some(axis) => {
                        let rot = nalgebra::Rotation3::from_axis_angle(&axis, max_angle);
                        center + rot * u0 * radius
                    }
                    // Parallel or antipodal directions: hold position.
                    None => prev.translation,
                };
                pose = look_at(
                    clamped,
                    center,
                    if (clamped.z - center.z).abs() / radius > 0.98 {
                        Vector3::x()
                    } else {
                        Vector3::z()
                    },
                )?;
            }
        }
        poses.push(pose);
    }
    Ok(poses)
}

pub fn generate_expert_demo(
    mesh: &TriangleMesh,
    cam: &CameraModel,
    seed: u64,
    t_steps: usize,
    object_id: &str,
) -> Result<Demonstration> {
    let poses = expert_poses(mesh, seed, t_steps)?;
    let steps = poses
        .into_iter()
        .map(|p| {
            let d = crate::render::render_depth(mesh, &p, cam);
            (p, d)
        })
        .collect();
    Ok(Demonstration { steps, cam: *cam, object_id: object_id.to_string(), seed })
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    t: [f64; 3],
    q: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct DemoManifest {
    object_id: String,
    seed: u64,
    steps: usize,
    cam: CameraModel,
    poses: Vec<PoseRecord>,
}

/// Directory layout: poses.json plus depth_NNNN.bin per step.
pub fn save_demo<P: AsRef<Path>>(demo: &Demonstration, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = DemoManifest {
        object_id: demo.object_id.clone(),
        seed: demo.seed,
        steps: demo.steps.len(),
        cam: demo.cam,
        poses: demo
            .steps
            .iter()
            .map(|(p, _)| PoseRecord {
                t: [p.translation.x, p.translation.y, p.translation.z],
                q: [p.rotation.w, p.rotation.i, p.rotation.j, p.rotation.k],
            })
            .collect(),
    };
    fs::write(dir.join("poses.json"), serde_json::to_vec_pretty(&manifest)?)?;
    for (i, (_, depth)) in demo.steps.iter().enumerate() {
        write_depth_binary(depth, dir.join(format!("depth_{i:04}.bin")))?;
    }
    Ok(())
}

pub fn load_demo<P: AsRef<Path>>(dir: P) -> Result<Demonstration> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("poses.json");
    if !manifest_path.is_file() {
        return Err(Error::FileNotFound(manifest_path));
    }
    let manifest: DemoManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.poses.len() != manifest.steps {
        return Err(Error::Malformed(format!(
            "manifest lists {} steps but {} poses",
            manifest.steps,
            manifest.poses.len()
        )));
    }
    let mut steps = Vec::with_capacity(manifest.steps);
    for (i, r) in manifest.poses.iter().enumerate() {
        let pose = Pose {
            translation: Point3::new(r.t[0], r.t[1], r.t[2]),
            rotation: nalgebra::Unit::new_normalize(nalgebra::Quaternion::new(
                r.q[0], r.q[1], r.q[2], r.q[3],
            )),
        };
        let depth = read_depth_binary(dir.join(format!("depth_{i:04}.bin")))?;
        steps.push((pose, depth));
    }
    Ok(Demonstration {
        steps,
        cam: manifest.cam,
        object_id: manifest.object_id,
        seed: manifest.seed,
    })
}
