//! Scenario runner: episode loop, coverage metric, and the batch suite
//! driver that fans scenarios out over seeds and initial poses.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, ViewpointSet};
use crate::cloud::{voxel_downsample, write_ply, PointCloud, VoxelAccumulator};
use crate::diffusion::{sample_actions, Policy};
use crate::encoder::{grid_to_sparse, OBSERVATION_HORIZON};
use crate::error::{Error, Result};
use crate::expert::{self, MOTION_BOUND};
use crate::geom::{look_at, Pose, PoseHorizon};
use crate::grid::{OccupancyGrid, DEFAULT_KAPPA_OCC};
use crate::mesh::{self, Aabb, TriangleMesh};
use crate::optimizer::{self, polyline_length, DEFAULT_ETA, DEFAULT_R_MIN};
use crate::render::{add_depth_noise, backproject, render_depth, CameraModel};
use crate::sample::poisson_disk_sample;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_VOXEL: f64 = 0.005;
pub const DEFAULT_GT_RADIUS: f64 = 0.004;
pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_VIEWPOINTS: usize = 60;
pub const COVERAGE_CHECKPOINT_INTERVAL: usize = 25;
/// Learned policies execute at most this many environment steps of a plan
/// before sampling a fresh one (receding-horizon control).
pub const MAX_PLAN_EXECUTION_STEPS: usize = 25;
/// Seed for the ground-truth surface sampling, fixed so every run of a
/// scenario scores against the same reference cloud.
pub const GT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Scandp,
    ScandpNoOpt,
    Random,
    RandomHemisphere,
    UniformHemisphere,
    ExpertReplay,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Scandp => "scandp",
            PolicyKind::ScandpNoOpt => "scandp-no-opt",
            PolicyKind::Random => "random",
            PolicyKind::RandomHemisphere => "random-hemisphere",
            PolicyKind::UniformHemisphere => "uniform-hemisphere",
            PolicyKind::ExpertReplay => "expert-replay",
        }
    }

    pub fn needs_checkpoint(&self) -> bool {
        matches!(self, PolicyKind::Scandp | PolicyKind::ScandpNoOpt)
    }
}

fn one() -> f64 {
    1.0
}
fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_voxel() -> f64 {
    DEFAULT_VOXEL
}
fn default_gt_radius() -> f64 {
    DEFAULT_GT_RADIUS
}
fn default_grid_extent() -> f64 {
    0.8
}
fn default_grid_cell() -> f64 {
    0.02
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_init_poses() -> usize {
    1
}
fn default_viewpoints() -> usize {
    DEFAULT_VIEWPOINTS
}
fn default_camera() -> CameraModel {
    CameraModel::default_sensor()
}

/// One scenario: an object, a sensor, a policy, and the sweep axes
/// (seeds x initial poses) the suite expands it over.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Mesh path, or `builtin:sphere`, `builtin:cube`, `builtin:l-shape`.
    pub mesh: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "default_camera")]
    pub camera: CameraModel,
    pub policy: PolicyKind,
    /// Policy checkpoint path; required for the learned policy kinds.
    #[serde(default)]
    pub checkpoint: Option<String>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "default_grid_extent")]
    pub grid_extent: f64,
    #[serde(default = "default_grid_cell")]
    pub grid_cell: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_voxel")]
    pub voxel: f64,
    #[serde(default = "default_gt_radius")]
    pub gt_radius: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_init_poses")]
    pub init_poses: usize,
    #[serde(default = "default_viewpoints")]
    pub viewpoints: usize,
    #[serde(default)]
    pub object_id: Option<String>,
}

impl ScenarioConfig {
    pub fn minimal(mesh: &str, policy: PolicyKind) -> Self {
        Self {
            mesh: mesh.into(),
            scale: 1.0,
            camera: CameraModel::default_sensor(),
            policy,
            checkpoint: None,
            steps: DEFAULT_STEPS,
            noise_std: 0.0,
            grid_extent: default_grid_extent(),
            grid_cell: default_grid_cell(),
            epsilon: DEFAULT_EPSILON,
            voxel: DEFAULT_VOXEL,
            gt_radius: DEFAULT_GT_RADIUS,
            seeds: vec![0],
            init_poses: 1,
            viewpoints: DEFAULT_VIEWPOINTS,
            object_id: None,
        }
    }

    pub fn object_label(&self) -> String {
        if let Some(id) = &self.object_id {
            return id.clone();
        }
        match self.mesh.strip_prefix("builtin:") {
            Some(name) => name.to_string(),
            None => Path::new(&self.mesh)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.mesh.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if self.seeds.is_empty() || self.init_poses == 0 {
            return Err(Error::InvalidArgument(
                "need at least one seed and one initial pose".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.voxel > 0.0 && self.gt_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "epsilon, voxel and gt_radius must be positive".into(),
            ));
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// Field validation plus the checkpoint requirement; used where the
    /// policy weights must come from disk (CLI, suites).
    pub fn validate_for_load(&self) -> Result<()> {
        self.validate()?;
        if self.policy.needs_checkpoint() && self.checkpoint.is_none() {
            return Err(Error::InvalidArgument(format!(
                "policy {} requires a checkpoint",
                self.policy.label()
            )));
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)?;
        cfg.validate_for_load()?;
        Ok(cfg)
    }
}

/// Resolve the scenario mesh, applying the uniform scale about the origin.
pub fn load_scenario_mesh(cfg: &ScenarioConfig) -> Result<TriangleMesh> {
    let mut m = match cfg.mesh.strip_prefix("builtin:") {
        Some("sphere") => mesh::make_uv_sphere(0.12, 32, 64),
        Some("cube") => mesh::make_cube(0.25),
        Some("l-shape") => mesh::make_l_shape(0.3),
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "unknown builtin mesh '{other}'"
            )))
        }
        None => return mesh::load_mesh(&cfg.mesh, cfg.scale),
    };
    if cfg.scale != 1.0 {
        for v in &mut m.vertices {
            *v = Point3::from(v.coords * cfg.scale);
        }
    }
    Ok(m)
}

/// Deterministic initial poses: evenly spaced azimuths on the expert orbit
/// sphere at a fixed mid elevation, aimed at the object center.
pub fn initial_pose(mesh: &TriangleMesh, id: usize, count: usize) -> Result<Pose> {
    assert!(id < count.max(1));
    let center = mesh.bounds().center();
    let radius = expert::orbit_radius(mesh);
    let elev = 0.35f64;
    let az = 2.0 * std::f64::consts::PI * id as f64 / count.max(1) as f64;
    let eye = center
        + Vector3::new(
            radius * elev.cos() * az.cos(),
            radius * elev.cos() * az.sin(),
            radius * elev.sin(),
        );
    look_at(eye, center, Vector3::z())
}

/// Ground-truth surface samples for the coverage metric.
pub fn ground_truth_cloud(mesh: &TriangleMesh, gt_radius: f64) -> Result<PointCloud> {
    poisson_disk_sample(mesh, gt_radius, GT_SEED, 5000)
}

/// Fraction of ground-truth points with a scan point within `eps`
/// (inclusive). Exact: the spatial hash uses cell size `eps`, so any match
/// lies in the 27-cell neighborhood. Empty clouds score zero.
pub fn coverage(gt: &PointCloud, scan: &PointCloud, eps: f64) -> f64 {
    assert!(eps > 0.0);
    if gt.is_empty() || scan.is_empty() {
        return 0.0;
    }
    let key = |p: &Point3<f64>| {
        (
            (p.x / eps).floor() as i64,
            (p.y / eps).floor() as i64,
            (p.z / eps).floor() as i64,
        )
    };
    let mut hash: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in scan.points.iter().enumerate() {
        hash.entry(key(p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let mut covered = 0usize;
    for g in &gt.points {
        let (ki, kj, kk) = key(g);
        'probe: for di in -1..=1i64 {
            for dj in -1..=1i64 {
                for dk in -1..=1i64 {
                    if let Some(ids) = hash.get(&(ki + di, kj + dj, kk + dk)) {
                        for &i in ids {
                            if (scan.points[i] - g).norm_squared() <= eps2 {
                                covered += 1;
                                break 'probe;
                            }
                        }
                    }
                }
            }
        }
    }
    covered as f64 / gt.points.len() as f64
}

/// Quadratic reference implementation of [`coverage`].
pub fn coverage_brute(gt: &PointCloud, scan: &PointCloud, eps: f64) -> f64 {
    assert!(eps > 0.0);
    if gt.is_empty() || scan.is_empty() {
        return 0.0;
    }
    let eps2 = eps * eps;
    let covered = gt
        .points
        .iter()
        .filter(|g| scan.points.iter().any(|s| (s - **g).norm_squared() <= eps2))
        .count();
    covered as f64 / gt.points.len() as f64
}

/// Total translation distance along an executed pose sequence.
pub fn path_length(poses: &[Pose]) -> f64 {
    poses
        .windows(2)
        .map(|w| (w[1].translation - w[0].translation).norm())
        .sum()
}

/// Voxel map that keeps the first point observed in each voxel. Used for
/// coverage so the representative of a voxel never moves once set, which
/// keeps coverage monotone as scans accumulate (a running centroid would
/// drift). The exported PLY still uses centroid downsampling.
struct FirstPointVoxels {
    voxel: f64,
    map: HashMap<(i64, i64, i64), Point3<f64>>,
}

impl FirstPointVoxels {
    fn new(voxel: f64) -> Self {
        assert!(voxel > 0.0);
        Self {
            voxel,
            map: HashMap::new(),
        }
    }

    fn add_cloud(&mut self, cloud: &PointCloud) {
        for p in &cloud.points {
            let k = (
                (p.x / self.voxel).floor() as i64,
                (p.y / self.voxel).floor() as i64,
                (p.z / self.voxel).floor() as i64,
            );
            self.map.entry(k).or_insert(*p);
        }
    }

    fn len(&self) -> usize {
        self.map.len()
    }

    fn cloud(&self) -> PointCloud {
        let mut pts: Vec<Point3<f64>> = self.map.values().copied().collect();
        pts.sort_by(|a, b| {
            (a.x, a.y, a.z)
                .partial_cmp(&(b.x, b.y, b.z))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        PointCloud::new(pts)
    }
}

/// Per-replan diagnostics for the learned policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanLog {
    pub step: usize,
    /// Poses sampled from the policy.
    pub raw_len: usize,
    /// Poses surviving the bubble filter.
    pub kept_len: usize,
    /// Poses after viewpoint extraction.
    pub opt_len: usize,
    pub raw_path: f64,
    pub opt_path: f64,
    pub loss: f64,
    pub all_unsafe: bool,
}

/// Everything recorded during one episode; serializable for `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: String,
    pub object: String,
    pub scale: f64,
    pub noise_std: f64,
    pub fov_x: f64,
    pub fov_y: f64,
    pub seed: u64,
    pub init_pose_id: usize,
    pub steps: usize,
    /// Pose the sensor observed from at each step.
    pub poses: Vec<Pose>,
    /// Accumulated voxelized cloud size after each step.
    pub cloud_sizes: Vec<usize>,
    pub path_length_m: f64,
    /// (step, coverage) sampled every [`COVERAGE_CHECKPOINT_INTERVAL`]
    /// steps, plus the final step.
    pub coverage_checkpoints: Vec<(usize, f64)>,
    pub coverage_final: f64,
    pub plans: Vec<PlanLog>,
    /// Poses executed after optimization across all plans (0 for baselines).
    pub poses_after_opt: usize,
    /// Target poses clamped back into the workspace.
    pub clamp_warnings: usize,
    pub runtime_s: f64,
}

impl RunRecord {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = fs::File::create(path)?;
        serde_json::to_writer(&mut f, self)?;
        f.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Outputs kept in memory alongside the record for callers that need them.
pub struct EpisodeOutput {
    pub record: RunRecord,
    /// Centroid-downsampled accumulated cloud (what gets written to PLY).
    pub cloud: PointCloud,
    pub grid: OccupancyGrid,
}

/// Insert intermediate poses so no executed segment exceeds the motion
/// bound. The returned sequence excludes `start` and ends exactly on each
/// input waypoint.
pub fn densify_from(start: &Pose, waypoints: &PoseHorizon, bound: f64) -> Vec<Pose> {
    assert!(bound > 0.0);
    let mut out = Vec::new();
    let mut prev = *start;
    for wp in waypoints {
        let d = (wp.translation - prev.translation).norm();
        let segs = (d / bound).ceil().max(1.0) as usize;
        for i in 1..=segs {
            let f = i as f64 / segs as f64;
            let t = prev.translation + (wp.translation - prev.translation) * f;
            let q = prev
                .rotation
                .try_slerp(&wp.rotation, f, 1e-9)
                .unwrap_or(wp.rotation);
            out.push(Pose::new(t, q));
        }
        prev = *wp;
    }
    out
}

fn baseline_tour(
    cfg: &ScenarioConfig,
    mesh: &TriangleMesh,
    start: &Pose,
    seed: u64,
) -> Result<Vec<Pose>> {
    let object_box = mesh.bounds();
    let center = object_box.center();
    let radius = baselines::OBJECT_MARGIN.max(1.4 * object_box.bounding_radius());
    let set: ViewpointSet = match cfg.policy {
        PolicyKind::Random => {
            let half = cfg.grid_extent / 2.0;
            let bounds = Aabb {
                min: Point3::new(-half, -half, -half),
                max: Point3::new(half, half, half),
            };
            baselines::random_poses(cfg.viewpoints, &bounds, &object_box, seed)?
        }
        PolicyKind::RandomHemisphere => {
            baselines::random_hemisphere(cfg.viewpoints, center, radius, seed)?
        }
        PolicyKind::UniformHemisphere => {
            baselines::fibonacci_hemisphere(cfg.viewpoints, center, radius)?
        }
        _ => unreachable!("baseline_tour called for non-baseline policy"),
    };
    let tour = baselines::tsp_order(&set, start);
    Ok(densify_from(start, &tour, MOTION_BOUND))
}

/// Run one episode of `cfg.steps` observations. Each step renders a depth
/// map at the current pose (with optional Gaussian noise), integrates it
/// into the grid and the accumulated cloud, then advances to the next
/// target pose. The learned policies replan whenever their execution queue
/// drains; baselines follow a precomputed tour and hold the final pose
/// once it is exhausted.
pub fn run_episode(
    cfg: &ScenarioConfig,
    mesh: &TriangleMesh,
    policy: Option<&Policy>,
    seed: u64,
    init_pose_id: usize,
) -> Result<EpisodeOutput> {
    cfg.validate()?;
    let start_time = Instant::now();
    if cfg.policy.needs_checkpoint() && policy.is_none() {
        return Err(Error::InvalidArgument(
            "learned policy requested without a loaded checkpoint".into(),
        ));
    }

    let gt = ground_truth_cloud(mesh, cfg.gt_radius)?;
    let half = cfg.grid_extent / 2.0;
    let mut grid = OccupancyGrid::new(
        Point3::new(-half, -half, -half),
        cfg.grid_extent,
        cfg.grid_cell,
    )?;
    let mut centroid_acc = VoxelAccumulator::new(cfg.voxel);
    let mut stable = FirstPointVoxels::new(cfg.voxel);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5ca4_d901);

    // Pose plan: expert replay fixes the whole trajectory, baselines fix a
    // densified tour, learned policies start with an empty queue.
    let mut current;
    let mut queue: Vec<Pose>;
    match cfg.policy {
        PolicyKind::ExpertReplay => {
            let traj = expert::expert_poses(mesh, seed, cfg.steps)?;
            current = traj[0];
            queue = traj[1..].to_vec();
        }
        PolicyKind::Scandp | PolicyKind::ScandpNoOpt => {
            current = initial_pose(mesh, init_pose_id, cfg.init_poses)?;
            queue = Vec::new();
        }
        _ => {
            current = initial_pose(mesh, init_pose_id, cfg.init_poses)?;
            queue = baseline_tour(cfg, mesh, &current, seed)?;
        }
    }
    queue.reverse(); // consume via pop()

    let mut executed: Vec<Pose> = Vec::with_capacity(cfg.steps);
    let mut cloud_sizes = Vec::with_capacity(cfg.steps);
    let mut checkpoints = Vec::new();
    let mut plans = Vec::new();
    let mut total_path = 0.0;
    let mut clamp_warnings = 0usize;
    let mut poses_after_opt = 0usize;

    let clamp_margin = cfg.grid_cell / 2.0;
    let lo = -half + clamp_margin;
    let hi = half - clamp_margin;

    for t in 0..cfg.steps {
        let mut depth = render_depth(mesh, &current, &cfg.camera);
        if cfg.noise_std > 0.0 {
            depth = add_depth_noise(&depth, cfg.noise_std, rng.gen());
        }
        let scan = backproject(&depth, &current, &cfg.camera)?;
        grid.integrate_scan(&current.translation, &scan);
        centroid_acc.add_cloud(&scan);
        stable.add_cloud(&scan);

        executed.push(current);
        cloud_sizes.push(stable.len());
        if (t + 1) % COVERAGE_CHECKPOINT_INTERVAL == 0 || t + 1 == cfg.steps {
            checkpoints.push((t + 1, coverage(&gt, &stable.cloud(), cfg.epsilon)));
        }
        if t + 1 == cfg.steps {
            break;
        }

        if queue.is_empty() && cfg.policy.needs_checkpoint() {
            let policy = policy.unwrap();
            let history: Vec<Pose> = {
                let h = OBSERVATION_HORIZON.min(executed.len());
                executed[executed.len() - h..].to_vec()
            };
            let sparse = grid_to_sparse(&grid);
            let sampled = sample_actions(policy, &history, &sparse, &mut rng)?;
            let raw_path = polyline_length(&sampled);
            match cfg.policy {
                PolicyKind::Scandp => {
                    let (kept, _) =
                        optimizer::bubble_filter(&sampled, &grid, DEFAULT_KAPPA_OCC, DEFAULT_R_MIN);
                    let opt = optimizer::optimize(
                        &sampled,
                        &grid,
                        DEFAULT_KAPPA_OCC,
                        DEFAULT_R_MIN,
                        DEFAULT_ETA,
                    );
                    plans.push(PlanLog {
                        step: t,
                        raw_len: sampled.len(),
                        kept_len: kept.len(),
                        opt_len: opt.poses.len(),
                        raw_path,
                        opt_path: polyline_length(&opt.poses),
                        loss: opt.loss,
                        all_unsafe: opt.all_unsafe,
                    });
                    if opt.all_unsafe {
                        log::warn!("step {t}: every sampled pose unsafe; holding pose");
                    } else {
                        poses_after_opt += opt.poses.len();
                        queue = densify_from(&current, &opt.poses, MOTION_BOUND);
                        // Receding horizon: execute only the head of the plan,
                        // then replan with the refreshed grid and history.
                        queue.truncate(MAX_PLAN_EXECUTION_STEPS);
                        queue.reverse();
                    }
                }
                PolicyKind::ScandpNoOpt => {
                    plans.push(PlanLog {
                        step: t,
                        raw_len: sampled.len(),
                        kept_len: sampled.len(),
                        opt_len: sampled.len(),
                        raw_path,
                        opt_path: raw_path,
                        loss: 0.0,
                        all_unsafe: false,
                    });
                    queue = sampled;
                    queue.truncate(MAX_PLAN_EXECUTION_STEPS);
                    queue.reverse();
                }
                _ => unreachable!(),
            }
        }

        // Empty queue after planning (all-unsafe plan or exhausted tour):
        // hold the current pose for this step.
        let mut next = queue.pop().unwrap_or(current);
        let t0 = next.translation;
        let clamped = Point3::new(
            t0.x.clamp(lo, hi),
            t0.y.clamp(lo, hi),
            t0.z.clamp(lo, hi),
        );
        if clamped != t0 {
            clamp_warnings += 1;
            log::warn!("step {t}: target pose {t0:?} outside workspace, clamped");
            next = Pose::new(clamped, next.rotation);
        }
        total_path += (next.translation - current.translation).norm();
        current = next;
    }

    let final_cloud = voxel_downsample(&centroid_acc.centroids(), cfg.voxel);
    let coverage_final = checkpoints.last().map(|c| c.1).unwrap_or(0.0);
    let record = RunRecord {
        policy: cfg.policy.label().into(),
        object: cfg.object_label(),
        scale: cfg.scale,
        noise_std: cfg.noise_std,
        fov_x: cfg.camera.fov_x,
        fov_y: cfg.camera.fov_y,
        seed,
        init_pose_id,
        steps: cfg.steps,
        poses: executed,
        cloud_sizes,
        path_length_m: total_path,
        coverage_checkpoints: checkpoints,
        coverage_final,
        plans,
        poses_after_opt,
        clamp_warnings,
        runtime_s: start_time.elapsed().as_secs_f64(),
    };
    Ok(EpisodeOutput {
        record,
        cloud: final_cloud,
        grid,
    })
}

pub const SUITE_CSV_HEADER: &str = "policy,object,scale,noise_std,fov_x,fov_y,seed,init_pose_id,steps,coverage_final,path_length_m,poses_after_opt,runtime_s";

/// One CSV row of the suite summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteRow {
    pub policy: String,
    pub object: String,
    pub scale: f64,
    pub noise_std: f64,
    pub fov_x: f64,
    pub fov_y: f64,
    pub seed: u64,
    pub init_pose_id: usize,
    pub steps: usize,
    pub coverage_final: f64,
    pub path_length_m: f64,
    pub poses_after_opt: usize,
    pub runtime_s: f64,
}

impl SuiteRow {
    fn from_record(r: &RunRecord) -> Self {
        Self {
            policy: r.policy.clone(),
            object: r.object.clone(),
            scale: r.scale,
            noise_std: r.noise_std,
            fov_x: r.fov_x,
            fov_y: r.fov_y,
            seed: r.seed,
            init_pose_id: r.init_pose_id,
            steps: r.steps,
            coverage_final: r.coverage_final,
            path_length_m: r.path_length_m,
            poses_after_opt: r.poses_after_opt,
            runtime_s: r.runtime_s,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{:.3}",
            self.policy,
            self.object,
            self.scale,
            self.noise_std,
            self.fov_x,
            self.fov_y,
            self.seed,
            self.init_pose_id,
            self.steps,
            self.coverage_final,
            self.path_length_m,
            self.poses_after_opt,
            self.runtime_s
        )
    }

    fn sort_key(&self) -> (String, String, u64, u64, u64, usize) {
        (
            self.policy.clone(),
            self.object.clone(),
            self.noise_std.to_bits(),
            self.scale.to_bits(),
            self.seed,
            self.init_pose_id,
        )
    }
}

pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
    pub failures: usize,
}

/// Expand each scenario over its seeds and initial poses, run every
/// episode, and write per-run artifacts (record JSON, final cloud PLY,
/// occupancy grid) plus a sorted `runs.csv` into `out_dir`. A failing run
/// is logged and skipped; it does not abort the suite.
pub fn run_suite<P: AsRef<Path>>(configs: &[ScenarioConfig], out_dir: P) -> Result<SuiteSummary> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for cfg in configs {
        cfg.validate_for_load()?;
        let mesh = load_scenario_mesh(cfg)?;
        let policy = match &cfg.checkpoint {
            Some(path) if cfg.policy.needs_checkpoint() => {
                Some(crate::checkpoint::load_policy(path)?.0)
            }
            _ => None,
        };
        for &seed in &cfg.seeds {
            for init in 0..cfg.init_poses {
                let stem = format!(
                    "{}_{}_s{}_i{}",
                    cfg.policy.label(),
                    cfg.object_label(),
                    seed,
                    init
                );
                match run_episode(cfg, &mesh, policy.as_ref(), seed, init) {
                    Ok(out) => {
                        out.record.save(out_dir.join(format!("{stem}.json")))?;
                        write_ply(&out.cloud, out_dir.join(format!("{stem}.ply")))?;
                        out.grid.save(out_dir.join(format!("{stem}.ogm")))?;
                        rows.push(SuiteRow::from_record(&out.record));
                    }
                    Err(e) => {
                        failures += 1;
                        log::error!("run {stem} failed: {e}");
                    }
                }
            }
        }
    }
    rows.sort_by_key(|r| r.sort_key());
    let mut csv = String::from(SUITE_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    fs::write(out_dir.join("runs.csv"), csv)?;
    Ok(SuiteSummary { rows, failures })
}
