//! Poisson disk sampling on mesh surfaces (dart throwing with a spatial hash).

use std::collections::HashMap;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Default minimum pairwise distance for ground-truth surface sampling.
pub const DEFAULT_GT_RADIUS: f64 = 0.004;

/// Default consecutive-rejection budget before sampling stops.
pub const DEFAULT_FAILURE_BUDGET: usize = 2000;

/// Area-weighted uniform random point on the surface.
fn sample_surface_point(
    mesh: &TriangleMesh,
    cdf: &[f64],
    rng: &mut impl Rng,
) -> Point3<f64> {
    let total = *cdf.last().unwrap();
    let x = rng.gen_range(0.0..total);
    let tri = cdf.partition_point(|&c| c < x).min(mesh.triangles.len() - 1);
    let [i0, i1, i2] = mesh.triangles[tri];
    let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    let a = mesh.vertices[i0];
    let b = mesh.vertices[i1];
    let c = mesh.vertices[i2];
    a + (b - a) * u + (c - a) * v
}

/// Poisson disk sampling by dart throwing: candidates are drawn uniformly on
/// the surface and rejected when closer than `radius` to an accepted point.
/// Stops after `failure_budget` consecutive rejections.
pub fn poisson_disk_sample(
    mesh: &TriangleMesh,
    radius: f64,
    seed: u64,
    failure_budget: usize,
) -> Result<PointCloud> {
    if radius <= 0.0 {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }

    // Spatial hash at cell size = radius; neighbors within radius lie in the
    // 27-cell neighborhood plus one extra ring (cell diagonal > radius).
    let cell = radius;
    let key = |p: &Point3<f64>| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut accepted: Vec<Point3<f64>> = Vec::new();
    let mut failures = 0usize;
    while failures < failure_budget {
        let p = sample_surface_point(mesh, &cdf, &mut rng);
        let (ki, kj, kk) = key(&p);
        let mut ok = true;
        'scan: for di in -2..=2i64 {
            for dj in -2..=2i64 {
                for dk in -2..=2i64 {
                    if let Some(bucket) = grid.get(&(ki + di, kj + dj, kk + dk)) {
                        for &idx in bucket {
                            if (accepted[idx] - p).norm() < radius {
                                ok = false;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        if ok {
            grid.entry((ki, kj, kk)).or_default().push(accepted.len());
            accepted.push(p);
            failures = 0;
        } else {
            failures += 1;
        }
    }
    Ok(PointCloud::new(accepted))
}
