//! Sliding-window training samples from demonstrations: conditioning = last h
//! poses plus the occupancy grid after integrating all scans so far; target =
//! the next N poses.

use ndarray::Array1;

use crate::diffusion::{ActionStats, TrainSample};
use crate::encoder::grid_to_sparse;
use crate::expert::Demonstration;
use crate::grid::OccupancyGrid;
use crate::render::backproject;
use crate::{Error, Result};

/// Windows per demo of length `t_len`.
pub fn window_count(t_len: usize, n: usize, h: usize) -> usize {
    (t_len + 1).saturating_sub(n + h)
}

/// Normalization statistics over every pose that appears in a target window.
pub fn target_stats(demos: &[Demonstration], n: usize, h: usize) -> Result<ActionStats> {
    let mut targets = Vec::new();
    for demo in demos {
        if demo.len() >= n + h {
            for (p, _) in &demo.steps[h..] {
                targets.push(p.clone());
            }
        }
    }
    ActionStats::from_poses(targets.iter())
}

/// Builds every window eagerly. Grids are integrated incrementally per demo,
/// with a sparse snapshot taken per window — identical to what inference sees
/// after the same scans.
pub fn build_dataset(
    demos: &[Demonstration],
    n: usize,
    h: usize,
) -> Result<(Vec<TrainSample>, ActionStats)> {
    if n < 1 || h < 1 {
        return Err(Error::InvalidArgument("horizons must be >= 1".into()));
    }
    for demo in demos {
        if demo.len() < n + h {
            return Err(Error::InvalidArgument(format!(
                "demo '{}' has {} steps, needs at least {}",
                demo.object_id,
                demo.len(),
                n + h
            )));
        }
    }
    let stats = target_stats(demos, n, h)?;
    let mut samples = Vec::new();
    for demo in demos {
        let t_len = demo.len();
        let mut grid = OccupancyGrid::default_workspace();
        for (t0, (pose, depth)) in demo.steps.iter().enumerate() {
            let cloud = backproject(depth, pose, &demo.cam)?;
            grid.integrate_scan(&pose.translation, &cloud);
            // Window anchored at t0: history ends here, target starts next.
            if t0 + 1 < h || t0 + n >= t_len {
                continue;
            }
            let pose_history: Vec<_> = demo.steps[t0 + 1 - h..=t0]
                .iter()
                .map(|(p, _)| p.clone())
                .collect();
            let target_poses: Vec<_> = demo.steps[t0 + 1..=t0 + n]
                .iter()
                .map(|(p, _)| p.clone())
                .collect();
            samples.push(TrainSample {
                pose_history,
                grid: grid_to_sparse(&grid),
                target: stats.horizon_to_array(&target_poses),
            });
        }
    }
    Ok((samples, stats))
}

/// Sanity bound used by training code: every normalized target is in [-1, 1].
pub fn targets_in_range(samples: &[TrainSample]) -> bool {
    samples.iter().all(|s| s.target.iter().all(|v| (-1.0..=1.0).contains(v)))
}

/// Mean absolute target value per dimension — cheap diagnostics for logs.
pub fn target_mean_abs(samples: &[TrainSample]) -> Array1<f64> {
    if samples.is_empty() {
        return Array1::zeros(0);
    }
    let dim = samples[0].target.len();
    let mut acc = Array1::zeros(dim);
    for s in samples {
        acc += &s.target.mapv(f64::abs);
    }
    acc / samples.len() as f64
}
