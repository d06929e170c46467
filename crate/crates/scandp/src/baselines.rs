//! Non-learned comparison planners: random free-space poses, random and
//! Fibonacci-lattice hemisphere viewpoints, ordered by a nearest-neighbor +
//! 2-opt TSP heuristic.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{look_at, Pose, PoseHorizon};
use crate::mesh::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewpointKind {
    Random,
    RandomHemisphere,
    UniformHemisphere,
}

#[derive(Debug, Clone)]
pub struct ViewpointSet {
    pub poses: Vec<Pose>,
    pub kind: ViewpointKind,
    pub seed: u64,
}

/// Margin added around the object bounding box when rejecting free-space
/// samples.
pub const OBJECT_MARGIN: f64 = 0.05;

/// Uniform random poses in `bounds`, rejecting anything inside the inflated
/// object box, oriented to look at the object center.
pub fn random_poses(
    count: usize,
    bounds: &Aabb,
    object_box: &Aabb,
    seed: u64,
) -> Result<ViewpointSet> {
    assert!(count >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let center = object_box.center();
    let forbidden = object_box.inflated(OBJECT_MARGIN);
    let mut poses = Vec::with_capacity(count);
    while poses.len() < count {
        let p = Point3::new(
            rng.gen_range(bounds.min.x..bounds.max.x),
            rng.gen_range(bounds.min.y..bounds.max.y),
            rng.gen_range(bounds.min.z..bounds.max.z),
        );
        if forbidden.contains(&p) {
            continue;
        }
        match look_at(p, center, Vector3::z()) {
            Ok(pose) => poses.push(pose),
            Err(_) => continue,
        }
    }
    Ok(ViewpointSet {
        poses,
        kind: ViewpointKind::Random,
        seed,
    })
}

/// Golden-angle lattice on the upper hemisphere (z >= center z), all points
/// at `radius` from `center`, looking at the center.
pub fn fibonacci_hemisphere(count: usize, center: Point3<f64>, radius: f64) -> Result<ViewpointSet> {
    assert!(count >= 1 && radius > 0.0);
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut poses = Vec::with_capacity(count);
    for i in 0..count {
        // Half-offset lattice over z in (0,1]; a single point sits at the pole.
        let z = if count == 1 {
            1.0
        } else {
            1.0 - (i as f64 + 0.5) / count as f64
        };
        let r_xy = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        let p = center + Vector3::new(r_xy * phi.cos(), r_xy * phi.sin(), z) * radius;
        let up = if z > 0.999 { Vector3::x() } else { Vector3::z() };
        poses.push(look_at(p, center, up)?);
    }
    Ok(ViewpointSet {
        poses,
        kind: ViewpointKind::UniformHemisphere,
        seed: 0,
    })
}

/// Area-uniform random points on the upper hemisphere (z uniform in
/// [0, radius], azimuth uniform), looking at the center.
pub fn random_hemisphere(
    count: usize,
    center: Point3<f64>,
    radius: f64,
    seed: u64,
) -> Result<ViewpointSet> {
    assert!(count >= 1 && radius > 0.0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut poses = Vec::with_capacity(count);
    while poses.len() < count {
        let z: f64 = rng.gen_range(0.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r_xy = (1.0 - z * z).max(0.0).sqrt();
        let p = center + Vector3::new(r_xy * phi.cos(), r_xy * phi.sin(), z) * radius;
        let up = if z > 0.999 { Vector3::x() } else { Vector3::z() };
        match look_at(p, center, up) {
            Ok(pose) => poses.push(pose),
            Err(_) => continue,
        }
    }
    Ok(ViewpointSet {
        poses,
        kind: ViewpointKind::RandomHemisphere,
        seed,
    })
}

fn tour_length(points: &[Point3<f64>], order: &[usize], start: &Point3<f64>) -> f64 {
    let mut len = 0.0;
    let mut prev = *start;
    for &i in order {
        len += (points[i] - prev).norm();
        prev = points[i];
    }
    len
}

/// Open tour from `start` through every viewpoint exactly once.
///
/// Nearest-neighbor construction (multi-start over forced first nodes for
/// small sets) improved by first-improvement 2-opt and segment-relocation
/// sweeps until no move improves, at most 50 passes per start.
pub fn tsp_order(set: &ViewpointSet, start: &Pose) -> PoseHorizon {
    assert!(!set.poses.is_empty());
    let points: Vec<Point3<f64>> = set.poses.iter().map(|p| p.translation).collect();
    let n = points.len();
    let s = start.translation;

    let nn_order = |forced_first: Option<usize>| -> Vec<usize> {
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut cur = s;
        if let Some(first) = forced_first {
            remaining.retain(|&i| i != first);
            order.push(first);
            cur = points[first];
        }
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .map(|(pos, &i)| (pos, (points[i] - cur).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let i = remaining.swap_remove(pos);
            cur = points[i];
            order.push(i);
        }
        order
    };

    let improve = |mut order: Vec<usize>| -> Vec<usize> {
        let mut passes = 0;
        loop {
            let mut improved = false;
            // 2-opt: reverse order[i..=j]; for an open path only the edges
            // (i-1, i) and (j, j+1) change.
            for i in 0..n.saturating_sub(1) {
                for j in i + 1..n {
                    let before = if i == 0 { s } else { points[order[i - 1]] };
                    let old = (points[order[i]] - before).norm()
                        + if j + 1 < n {
                            (points[order[j + 1]] - points[order[j]]).norm()
                        } else {
                            0.0
                        };
                    let new = (points[order[j]] - before).norm()
                        + if j + 1 < n {
                            (points[order[j + 1]] - points[order[i]]).norm()
                        } else {
                            0.0
                        };
                    if new + 1e-12 < old {
                        order[i..=j].reverse();
                        improved = true;
                    }
                }
            }
            // Or-opt: relocate segments of length 1..=3.
            for seg_len in 1..=3usize.min(n) {
                for from in 0..=(n - seg_len) {
                    let seg: Vec<usize> = order[from..from + seg_len].to_vec();
                    let mut rest: Vec<usize> = Vec::with_capacity(n - seg_len);
                    rest.extend_from_slice(&order[..from]);
                    rest.extend_from_slice(&order[from + seg_len..]);
                    let cur_len = tour_length(&points, &order, &s);
                    let mut best_len = cur_len;
                    let mut best = None;
                    for to in 0..=rest.len() {
                        let mut cand = rest.clone();
                        for (k, &v) in seg.iter().enumerate() {
                            cand.insert(to + k, v);
                        }
                        let len = tour_length(&points, &cand, &s);
                        if len + 1e-12 < best_len {
                            best_len = len;
                            best = Some(cand);
                        }
                    }
                    if let Some(cand) = best {
                        order = cand;
                        improved = true;
                    }
                }
            }
            passes += 1;
            if !improved || passes >= 50 {
                break;
            }
        }
        order
    };

    // Multi-start: plain nearest neighbor plus forcing each of the first few
    // nodes as the initial visit; small sets explore every start.
    let mut starts: Vec<Option<usize>> = vec![None];
    let max_starts = if n <= 16 { n } else { 8 };
    starts.extend((0..max_starts.min(n)).map(Some));
    let mut best_order: Option<Vec<usize>> = None;
    let mut best_len = f64::INFINITY;
    for forced in starts {
        let order = improve(nn_order(forced));
        let len = tour_length(&points, &order, &s);
        if len < best_len {
            best_len = len;
            best_order = Some(order);
        }
    }
    let order = best_order.unwrap();

    let mut horizon = vec![*start];
    horizon.extend(order.iter().map(|&i| set.poses[i]));
    horizon
}

/// Plain tour length helper exposed for evaluation code.
pub fn open_tour_length(set: &ViewpointSet, order: &[usize], start: &Pose) -> f64 {
    let points: Vec<Point3<f64>> = set.poses.iter().map(|p| p.translation).collect();
    tour_length(&points, order, &start.translation)
}
