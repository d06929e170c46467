//! Path optimization: bubble-based collision filtering against the occupancy
//! grid, then minimal viewpoint extraction under a reconstruction-loss budget
//! via dynamic programming.

use nalgebra::Point3;

use crate::geom::{Pose, PoseHorizon};
use crate::grid::OccupancyGrid;

/// Default minimum bubble radius in meters.
pub const DEFAULT_R_MIN: f64 = 0.1;
/// Default reconstruction-loss budget in meters (one grid cell).
pub const DEFAULT_ETA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleReport {
    /// Distance to the nearest occupied cell center; +inf when none exist.
    pub radius: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizedHorizon {
    /// Indices into the input horizon, strictly increasing.
    pub indices: Vec<usize>,
    pub poses: PoseHorizon,
    /// Reconstruction loss of the result against the input, meters.
    pub loss: f64,
    /// Set when the bubble filter removed every pose.
    pub all_unsafe: bool,
}

/// Drop poses whose distance to the nearest occupied cell center falls below
/// `r_min`. With no occupied cells every pose is kept (radius +inf).
pub fn bubble_filter(
    horizon: &PoseHorizon,
    grid: &OccupancyGrid,
    kappa_occ: f64,
    r_min: f64,
) -> (PoseHorizon, Vec<BubbleReport>) {
    let centers: Vec<Point3<f64>> = grid
        .occupied_cells(kappa_occ)
        .into_iter()
        .map(|idx| grid.cell_center(idx))
        .collect();
    let mut kept = Vec::new();
    let mut reports = Vec::with_capacity(horizon.len());
    for pose in horizon {
        let radius = centers
            .iter()
            .map(|c| (c - pose.translation).norm())
            .fold(f64::INFINITY, f64::min);
        let keep = radius >= r_min;
        reports.push(BubbleReport {
            radius,
            kept: keep,
        });
        if keep {
            kept.push(*pose);
        }
    }
    (kept, reports)
}

fn segment_lengths(horizon: &PoseHorizon) -> Vec<f64> {
    horizon
        .windows(2)
        .map(|w| (w[1].translation - w[0].translation).norm())
        .collect()
}

pub fn polyline_length(horizon: &PoseHorizon) -> f64 {
    segment_lengths(horizon).iter().sum()
}

/// Arc-length parameterized interpolation: translations piecewise linear,
/// orientations slerped per segment. s=0 is the first pose, s=1 the last.
pub fn interpolate(horizon: &PoseHorizon, s: f64) -> Pose {
    assert!(!horizon.is_empty(), "horizon must be nonempty");
    if horizon.len() == 1 {
        return horizon[0];
    }
    let s = s.clamp(0.0, 1.0);
    let lengths = segment_lengths(horizon);
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        // All poses coincide in translation; slerp across the whole chain.
        let t = s * (horizon.len() - 1) as f64;
        let i = (t.floor() as usize).min(horizon.len() - 2);
        let f = t - i as f64;
        return Pose::new(
            horizon[i].translation,
            horizon[i].rotation.slerp(&horizon[i + 1].rotation, f),
        );
    }
    let target = s * total;
    let mut acc = 0.0;
    for (i, len) in lengths.iter().enumerate() {
        if acc + len >= target || i == lengths.len() - 1 {
            let f = if *len > 0.0 {
                ((target - acc) / len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t = horizon[i].translation + (horizon[i + 1].translation - horizon[i].translation) * f;
            let q = horizon[i]
                .rotation
                .try_slerp(&horizon[i + 1].rotation, f, 1e-9)
                .unwrap_or(horizon[i].rotation);
            return Pose::new(t, q);
        }
        acc += len;
    }
    *horizon.last().unwrap()
}

fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let seg = b - a;
    let len2 = seg.norm_squared();
    if len2 <= 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&seg) / len2).clamp(0.0, 1.0);
    (p - (a + seg * t)).norm()
}

/// Maximum over original translations of the distance to the approximating
/// polyline (exact point-to-segment distances, translations only).
pub fn reconstruction_loss(approx: &PoseHorizon, original: &PoseHorizon) -> f64 {
    assert!(!approx.is_empty() && !original.is_empty());
    original
        .iter()
        .map(|pose| {
            let p = pose.translation;
            if approx.len() == 1 {
                (p - approx[0].translation).norm()
            } else {
                approx
                    .windows(2)
                    .map(|w| point_segment_distance(&p, &w[0].translation, &w[1].translation))
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimum-cardinality increasing index chain from the first to last pose
/// such that every skipped pose lies within `eta` of the bridging segment.
/// Ties broken toward the lexicographically smallest index sequence.
pub fn extract_viewpoints(horizon: &PoseHorizon, eta: f64) -> OptimizedHorizon {
    assert!(!horizon.is_empty(), "horizon must be nonempty");
    assert!(eta >= 0.0);
    let n = horizon.len();
    if n == 1 {
        return OptimizedHorizon {
            indices: vec![0],
            poses: horizon.clone(),
            loss: 0.0,
            all_unsafe: false,
        };
    }
    let feasible = |i: usize, j: usize| -> bool {
        let a = horizon[i].translation;
        let b = horizon[j].translation;
        horizon[i + 1..j]
            .iter()
            .all(|p| point_segment_distance(&p.translation, &a, &b) <= eta + 1e-12)
    };
    // dist[i] = min number of edges from i to n-1.
    let mut dist = vec![usize::MAX; n];
    dist[n - 1] = 0;
    for i in (0..n - 1).rev() {
        for j in i + 1..n {
            if dist[j] != usize::MAX && feasible(i, j) {
                dist[i] = dist[i].min(dist[j] + 1);
            }
        }
    }
    // Greedy reconstruction picks the smallest next index that preserves the
    // optimal remaining edge count, yielding the lexicographically smallest
    // minimal chain.
    let mut indices = vec![0usize];
    let mut cur = 0usize;
    while cur != n - 1 {
        let next = (cur + 1..n)
            .find(|&j| dist[j] != usize::MAX && dist[j] + 1 == dist[cur] && feasible(cur, j))
            .expect("full chain is always feasible");
        indices.push(next);
        cur = next;
    }
    let poses: PoseHorizon = indices.iter().map(|&i| horizon[i]).collect();
    let loss = reconstruction_loss(&poses, horizon);
    debug_assert!(loss <= eta + 1e-9, "DP result violates loss budget");
    OptimizedHorizon {
        indices,
        poses,
        loss,
        all_unsafe: false,
    }
}

/// Bubble filter then viewpoint extraction. An empty post-filter horizon
/// yields an empty result with `all_unsafe` set.
pub fn optimize(
    horizon: &PoseHorizon,
    grid: &OccupancyGrid,
    kappa_occ: f64,
    r_min: f64,
    eta: f64,
) -> OptimizedHorizon {
    let (free, _) = bubble_filter(horizon, grid, kappa_occ, r_min);
    if free.is_empty() {
        return OptimizedHorizon {
            indices: Vec::new(),
            poses: Vec::new(),
            loss: 0.0,
            all_unsafe: true,
        };
    }
    extract_viewpoints(&free, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::geom::look_at;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pose_at(x: f64, y: f64, z: f64) -> Pose {
        Pose::new(Point3::new(x, y, z), nalgebra::UnitQuaternion::identity())
    }

    fn occupied_grid_at(points: &[Point3<f64>]) -> OccupancyGrid {
        let mut grid = OccupancyGrid::default_workspace();
        let cam = Point3::new(-0.39, -0.39, -0.39);
        for _ in 0..3 {
            grid.integrate_scan(&cam, &PointCloud::new(points.to_vec()));
        }
        grid
    }

    #[test]
    fn empty_occupied_set_keeps_all() {
        let grid = OccupancyGrid::default_workspace();
        let horizon: PoseHorizon = (0..16).map(|i| pose_at(i as f64 * 0.01, 0.0, 0.0)).collect();
        let (kept, reports) = bubble_filter(&horizon, &grid, 0.9, 0.1);
        assert_eq!(kept.len(), 16);
        assert!(reports.iter().all(|r| r.kept && r.radius.is_infinite()));
    }

    #[test]
    fn close_pose_dropped() {
        let obstacle = Point3::new(0.11, 0.11, 0.11);
        let grid = occupied_grid_at(&[obstacle]);
        assert!(!grid.occupied_cells(0.9).is_empty());
        let center = grid.cell_center(grid.world_to_cell(&obstacle));
        let near = Pose::new(center + Vector3::new(0.05, 0.0, 0.0), Default::default());
        let far = Pose::new(center + Vector3::new(0.2, 0.0, 0.0), Default::default());
        let (kept, reports) = bubble_filter(&vec![near, far], &grid, 0.9, 0.1);
        assert_eq!(kept.len(), 1);
        assert!(!reports[0].kept && reports[1].kept);
        assert!((reports[0].radius - 0.05).abs() < 1e-9);
    }

    #[test]
    fn bubble_filter_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let obstacles: Vec<Point3<f64>> = (0..rng.gen_range(1..6))
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2f64),
                    )
                })
                .collect();
            let grid = occupied_grid_at(&obstacles);
            let horizon: PoseHorizon = (0..12)
                .map(|_| {
                    pose_at(
                        rng.gen_range(-0.35..0.35),
                        rng.gen_range(-0.35..0.35),
                        rng.gen_range(-0.35..0.35),
                    )
                })
                .collect();
            let (kept, reports) = bubble_filter(&horizon, &grid, 0.9, 0.1);
            // Oracle: scan every stored cell.
            let occ = grid.occupied_cells(0.9);
            let mut oracle_kept = Vec::new();
            for pose in &horizon {
                let r = occ
                    .iter()
                    .map(|&idx| (grid.cell_center(idx) - pose.translation).norm())
                    .fold(f64::INFINITY, f64::min);
                if r >= 0.1 {
                    oracle_kept.push(*pose);
                }
            }
            assert_eq!(kept.len(), oracle_kept.len());
            for (a, b) in kept.iter().zip(oracle_kept.iter()) {
                assert_eq!(a.translation, b.translation);
            }
            for r in &reports {
                if r.kept {
                    assert!(r.radius >= 0.1);
                }
            }
        }
    }

    #[test]
    fn interpolate_midpoint_and_degenerate() {
        let a = pose_at(0.0, 0.0, 0.0);
        let b = pose_at(1.0, 0.0, 0.0);
        let mid = interpolate(&vec![a, b], 0.5);
        assert!((mid.translation - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-12);

        let single = interpolate(&vec![a], 0.7);
        assert_eq!(single.translation, a.translation);
    }

    #[test]
    fn interpolate_arc_length_parameterized() {
        let horizon = vec![pose_at(0.0, 0.0, 0.0), pose_at(1.0, 0.0, 0.0), pose_at(2.0, 0.0, 0.0)];
        let q = interpolate(&horizon, 0.25);
        assert!((q.translation - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn interpolate_slerps_orientation() {
        let a = look_at(Point3::new(0.0, 0.0, 1.0), Point3::origin(), Vector3::y()).unwrap();
        let b = look_at(Point3::new(1.0, 0.0, 0.0), Point3::origin(), Vector3::y()).unwrap();
        let mid = interpolate(&vec![a, b], 0.5);
        let half = a.rotation.angle_to(&mid.rotation);
        let full = a.rotation.angle_to(&b.rotation);
        assert!((half - full / 2.0).abs() < 1e-9);
    }

    #[test]
    fn loss_identity_and_collinear() {
        let horizon = vec![pose_at(0.0, 0.0, 0.0), pose_at(1.0, 0.0, 0.0), pose_at(2.0, 0.0, 0.0)];
        assert_eq!(reconstruction_loss(&horizon, &horizon), 0.0);
        let endpoints = vec![horizon[0], horizon[2]];
        assert!(reconstruction_loss(&endpoints, &horizon) < 1e-12);
    }

    #[test]
    fn loss_right_angle_elbow() {
        let horizon = vec![pose_at(0.0, 0.0, 0.0), pose_at(1.0, 0.0, 0.0), pose_at(1.0, 1.0, 0.0)];
        let endpoints = vec![horizon[0], horizon[2]];
        let loss = reconstruction_loss(&endpoints, &horizon);
        assert!((loss - 2.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn extract_zero_budget_keeps_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let horizon: PoseHorizon = (0..10)
            .map(|_| {
                pose_at(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let out = extract_viewpoints(&horizon, 0.0);
        assert_eq!(out.indices, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn extract_collinear_keeps_endpoints() {
        let horizon: PoseHorizon = (0..10).map(|i| pose_at(i as f64 * 0.1, 0.0, 0.0)).collect();
        let out = extract_viewpoints(&horizon, 0.01);
        assert_eq!(out.indices, vec![0, 9]);
        assert!(out.loss <= 0.01);
    }

    /// Brute-force minimum subset oracle over all index subsets containing
    /// both endpoints.
    fn brute_force_min_cardinality(horizon: &PoseHorizon, eta: f64) -> usize {
        let n = horizon.len();
        let interior = n - 2;
        let mut best = n;
        for mask in 0..(1u32 << interior) {
            let mut idx = vec![0usize];
            for b in 0..interior {
                if mask & (1 << b) != 0 {
                    idx.push(b + 1);
                }
            }
            idx.push(n - 1);
            let subset: PoseHorizon = idx.iter().map(|&i| horizon[i]).collect();
            if reconstruction_loss(&subset, horizon) <= eta + 1e-12 {
                best = best.min(idx.len());
            }
        }
        best
    }

    #[test]
    fn dp_minimality_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(8..=12);
            // Jittered near-line horizons so eta=0.02 sometimes allows skips.
            let mut horizon = Vec::with_capacity(n);
            for i in 0..n {
                horizon.push(pose_at(
                    i as f64 * 0.03 + rng.gen_range(-0.01..0.01),
                    rng.gen_range(-0.015..0.015),
                    rng.gen_range(-0.015..0.015),
                ));
            }
            let out = extract_viewpoints(&horizon, 0.02);
            let oracle = brute_force_min_cardinality(&horizon, 0.02);
            assert!(out.loss <= 0.02 + 1e-12);
            assert_eq!(out.indices.len(), oracle);
            // Output is a subsequence including both endpoints.
            assert_eq!(out.indices[0], 0);
            assert_eq!(*out.indices.last().unwrap(), n - 1);
            assert!(out.indices.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn eta_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..30 {
            let horizon: PoseHorizon = (0..12)
                .map(|i| {
                    pose_at(
                        i as f64 * 0.02 + rng.gen_range(-0.005..0.005),
                        rng.gen_range(-0.01..0.01),
                        0.0,
                    )
                })
                .collect();
            let small = extract_viewpoints(&horizon, 0.005);
            let large = extract_viewpoints(&horizon, 0.05);
            assert!(small.indices.len() >= large.indices.len());
        }
    }

    #[test]
    fn optimize_composition() {
        // Obstacle-free straight line collapses to endpoints.
        let grid = OccupancyGrid::default_workspace();
        let horizon: PoseHorizon = (0..16).map(|i| pose_at(i as f64 * 0.01, 0.1, 0.1)).collect();
        let out = optimize(&horizon, &grid, 0.9, 0.1, 0.02);
        assert_eq!(out.poses.len(), 2);
        assert!(!out.all_unsafe);

        // An obstacle close to every pose empties the horizon.
        let grid = occupied_grid_at(&[Point3::new(0.05, 0.1, 0.1)]);
        let near: PoseHorizon = (0..16)
            .map(|i| pose_at(0.05 + (i as f64) * 1e-4, 0.1, 0.1))
            .collect();
        let out = optimize(&near, &grid, 0.9, 0.1, 0.02);
        assert!(out.all_unsafe);
        assert!(out.poses.is_empty());
    }

    #[test]
    fn optimize_never_lengthens_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let grid = OccupancyGrid::default_workspace();
        for _ in 0..50 {
            let horizon: PoseHorizon = (0..16)
                .map(|i| {
                    pose_at(
                        i as f64 * 0.02 + rng.gen_range(-0.008..0.008),
                        rng.gen_range(-0.008..0.008),
                        rng.gen_range(-0.008..0.008),
                    )
                })
                .collect();
            let out = optimize(&horizon, &grid, 0.9, 0.1, 0.02);
            assert!(polyline_length(&out.poses) <= polyline_length(&horizon) + 1e-12);
        }
    }
}
