//! C ABI for the scanning core: opaque handles, integer error codes, and a
//! thread-local last-error message. The matching header lives in
//! `include/scandp.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use scandp::cloud::PointCloud;
use scandp::diffusion::Policy;
use scandp::encoder::grid_to_sparse;
use scandp::error::Error;
use scandp::geom::Pose;
use scandp::grid::{CellIndex, OccupancyGrid};
use scandp::harness::coverage;
use scandp::optimizer;

pub const SCANDP_OK: c_int = 0;
pub const SCANDP_ERR_INVALID_ARGUMENT: c_int = 1;
pub const SCANDP_ERR_IO: c_int = 2;
pub const SCANDP_ERR_MALFORMED: c_int = 3;
pub const SCANDP_ERR_NULL_POINTER: c_int = 4;
pub const SCANDP_ERR_BUFFER_TOO_SMALL: c_int = 5;
pub const SCANDP_ERR_INTERNAL: c_int = 6;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let safe = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(safe).unwrap());
}

fn code_for(err: &Error) -> c_int {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) | Error::DimensionMismatch(_) => {
            SCANDP_ERR_INVALID_ARGUMENT
        }
        Error::Io(_) | Error::FileNotFound(_) => SCANDP_ERR_IO,
        Error::Malformed(_) | Error::Version(_) | Error::Parse { .. } | Error::Json(_) => {
            SCANDP_ERR_MALFORMED
        }
        _ => SCANDP_ERR_INTERNAL,
    }
}

fn fail(err: Error) -> c_int {
    let code = code_for(&err);
    set_error(&err.to_string());
    code
}

/// Wrapper so a panic never unwinds across the ABI boundary.
fn guarded(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            SCANDP_ERR_INTERNAL
        }
    }
}

unsafe fn path_from(ptr_: *const c_char) -> Result<String, c_int> {
    if ptr_.is_null() {
        set_error("null path");
        return Err(SCANDP_ERR_NULL_POINTER);
    }
    match CStr::from_ptr(ptr_).to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SCANDP_ERR_INVALID_ARGUMENT)
        }
    }
}

/// Message for the most recent error on this thread; empty string if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scandp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

pub struct ScandpGrid(OccupancyGrid);
pub struct ScandpPolicy(Policy);

/// New occupancy grid over a centered cube. Returns null on invalid
/// parameters (extent/cell_size must be positive with integral ratio).
#[no_mangle]
pub extern "C" fn scandp_grid_new(extent: f64, cell_size: f64) -> *mut ScandpGrid {
    let half = extent / 2.0;
    match OccupancyGrid::new(Point3::new(-half, -half, -half), extent, cell_size) {
        Ok(g) => Box::into_raw(Box::new(ScandpGrid(g))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Grid with the default workspace (0.8 m cube, 0.02 m cells).
#[no_mangle]
pub extern "C" fn scandp_grid_default() -> *mut ScandpGrid {
    Box::into_raw(Box::new(ScandpGrid(OccupancyGrid::default_workspace())))
}

/// # Safety
/// `grid` must come from a `scandp_grid_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_free(grid: *mut ScandpGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Integrate one scan: `points` is `n_points * 3` doubles (x y z), `camera`
/// is the sensor origin as 3 doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_integrate(
    grid: *mut ScandpGrid,
    camera: *const f64,
    points: *const f64,
    n_points: usize,
) -> c_int {
    guarded(|| {
        if grid.is_null() || camera.is_null() || (points.is_null() && n_points > 0) {
            set_error("null pointer");
            return SCANDP_ERR_NULL_POINTER;
        }
        let cam = std::slice::from_raw_parts(camera, 3);
        let pts = std::slice::from_raw_parts(points, n_points * 3);
        let cloud = PointCloud::new(
            pts.chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
        );
        (*grid)
            .0
            .integrate_scan(&Point3::new(cam[0], cam[1], cam[2]), &cloud);
        SCANDP_OK
    })
}

/// Occupancy probability of cell (i, j, k); unobserved cells yield 0.5.
///
/// # Safety
/// `grid` and `out_probability` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_probability(
    grid: *const ScandpGrid,
    i: i32,
    j: i32,
    k: i32,
    out_probability: *mut f64,
) -> c_int {
    guarded(|| {
        if grid.is_null() || out_probability.is_null() {
            set_error("null pointer");
            return SCANDP_ERR_NULL_POINTER;
        }
        *out_probability = (*grid).0.probability_of(CellIndex::new(i, j, k));
        SCANDP_OK
    })
}

/// Number of cells with a non-zero log-odds update.
///
/// # Safety
/// `grid` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_active_count(grid: *const ScandpGrid) -> usize {
    if grid.is_null() {
        return 0;
    }
    (*grid).0.active_cell_count()
}

/// # Safety
/// `grid` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_save(grid: *const ScandpGrid, path: *const c_char) -> c_int {
    guarded(|| {
        if grid.is_null() {
            set_error("null grid");
            return SCANDP_ERR_NULL_POINTER;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(c) => return c,
        };
        match (*grid).0.save(&path) {
            Ok(()) => SCANDP_OK,
            Err(e) => fail(e),
        }
    })
}

/// Load a grid from disk; null on failure.
///
/// # Safety
/// `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn scandp_grid_load(path: *const c_char) -> *mut ScandpGrid {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    match OccupancyGrid::load(&path) {
        Ok(g) => Box::into_raw(Box::new(ScandpGrid(g))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Load a policy checkpoint; null on failure.
///
/// # Safety
/// `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn scandp_policy_load(path: *const c_char) -> *mut ScandpPolicy {
    let path = match path_from(path) {
        Ok(p) => p,
        Err(_) => return ptr::null_mut(),
    };
    match scandp::checkpoint::load_policy(&path) {
        Ok((p, _)) => Box::into_raw(Box::new(ScandpPolicy(p))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `policy` must come from `scandp_policy_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scandp_policy_free(policy: *mut ScandpPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Action horizon length of a loaded policy.
///
/// # Safety
/// `policy` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scandp_policy_action_horizon(policy: *const ScandpPolicy) -> usize {
    if policy.is_null() {
        return 0;
    }
    (*policy).0.action_horizon
}

fn poses_from(flat: &[f64]) -> Vec<Pose> {
    flat.chunks_exact(9)
        .map(|c| {
            let mut v = [0.0; 9];
            v.copy_from_slice(c);
            Pose::from_vec9(&v)
        })
        .collect()
}

fn poses_to(poses: &[Pose], out: &mut [f64]) {
    for (p, slot) in poses.iter().zip(out.chunks_exact_mut(9)) {
        slot.copy_from_slice(&p.to_vec9());
    }
}

/// Sample an action horizon. `history` is `history_len` poses of 9 doubles
/// each (translation + first two rotation matrix columns); `out_poses` must
/// hold `capacity >= action_horizon` poses. Writes the number of poses to
/// `out_len`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn scandp_policy_sample(
    policy: *const ScandpPolicy,
    grid: *const ScandpGrid,
    history: *const f64,
    history_len: usize,
    seed: u64,
    out_poses: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> c_int {
    guarded(|| {
        if policy.is_null() || grid.is_null() || history.is_null() || out_poses.is_null()
            || out_len.is_null()
        {
            set_error("null pointer");
            return SCANDP_ERR_NULL_POINTER;
        }
        let policy = &(*policy).0;
        if capacity < policy.action_horizon {
            set_error("output capacity below the policy action horizon");
            return SCANDP_ERR_BUFFER_TOO_SMALL;
        }
        let hist = poses_from(std::slice::from_raw_parts(history, history_len * 9));
        let sparse = grid_to_sparse(&(*grid).0);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match scandp::diffusion::sample_actions(policy, &hist, &sparse, &mut rng) {
            Ok(poses) => {
                let out = std::slice::from_raw_parts_mut(out_poses, capacity * 9);
                poses_to(&poses, out);
                *out_len = poses.len();
                SCANDP_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Bubble-filter then viewpoint-extract a horizon of `n_poses` poses
/// against the grid. Writes at most `n_poses` poses back.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn scandp_optimize_horizon(
    grid: *const ScandpGrid,
    poses: *const f64,
    n_poses: usize,
    kappa_occ: f64,
    r_min: f64,
    eta: f64,
    out_poses: *mut f64,
    out_len: *mut usize,
) -> c_int {
    guarded(|| {
        if grid.is_null() || poses.is_null() || out_poses.is_null() || out_len.is_null() {
            set_error("null pointer");
            return SCANDP_ERR_NULL_POINTER;
        }
        if n_poses == 0 {
            set_error("empty horizon");
            return SCANDP_ERR_INVALID_ARGUMENT;
        }
        let horizon = poses_from(std::slice::from_raw_parts(poses, n_poses * 9));
        let opt = optimizer::optimize(&horizon, &(*grid).0, kappa_occ, r_min, eta);
        let out = std::slice::from_raw_parts_mut(out_poses, n_poses * 9);
        poses_to(&opt.poses, out);
        *out_len = opt.poses.len();
        SCANDP_OK
    })
}

/// Coverage of `gt` by `scan` at tolerance `epsilon`; both clouds are
/// `n * 3` doubles. Empty clouds score 0.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn scandp_coverage(
    gt: *const f64,
    n_gt: usize,
    scan: *const f64,
    n_scan: usize,
    epsilon: f64,
    out_coverage: *mut f64,
) -> c_int {
    guarded(|| {
        if (gt.is_null() && n_gt > 0) || (scan.is_null() && n_scan > 0) || out_coverage.is_null() {
            set_error("null pointer");
            return SCANDP_ERR_NULL_POINTER;
        }
        if epsilon <= 0.0 {
            set_error("epsilon must be positive");
            return SCANDP_ERR_INVALID_ARGUMENT;
        }
        let to_cloud = |p: *const f64, n: usize| {
            let s = if n == 0 {
                &[][..]
            } else {
                std::slice::from_raw_parts(p, n * 3)
            };
            PointCloud::new(s.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect())
        };
        *out_coverage = coverage(&to_cloud(gt, n_gt), &to_cloud(scan, n_scan), epsilon);
        SCANDP_OK
    })
}
