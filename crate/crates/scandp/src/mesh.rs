//! Triangle meshes: ASCII OBJ/PLY loading, uniform rescaling, a median-split
//! BVH for ray casting, and a few built-in test shapes.

use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Side length of the cube the x1.0 mesh configuration is scaled to fit.
pub const TARGET_CUBE_SIDE: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    fn merge(&mut self, other: &Aabb) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(other.min[a]);
            self.max[a] = self.max[a].max(other.max[a]);
        }
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.diagonal() / 2.0
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Slab test; returns entry distance if the ray hits within [0, t_max].
    fn intersect_ray(&self, orig: &Point3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.min[a] - orig[a]) * inv_dir[a];
            let tb = (self.max[a] - orig[a]) * inv_dir[a];
            let (near, far) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: (first, count) into the triangle order; interior: child indices.
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { first: usize, count: usize },
    Interior { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    nodes: Vec<BvhNode>,
    /// Triangle indices reordered by BVH construction.
    order: Vec<usize>,
    bounds: Aabb,
}

const LEAF_SIZE: usize = 4;

impl TriangleMesh {
    /// Build a mesh from raw geometry. Degenerate (zero-area) triangles and
    /// out-of-range indices are rejected; the BVH is built immediately.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for v in &vertices {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("mesh vertex".into()));
            }
        }
        let mut kept = Vec::with_capacity(triangles.len());
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Malformed(format!(
                    "triangle index out of range: {:?}",
                    t
                )));
            }
            let e1 = vertices[t[1]] - vertices[t[0]];
            let e2 = vertices[t[2]] - vertices[t[0]];
            if e1.cross(&e2).norm() > 1e-16 {
                kept.push(*t);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut mesh = Self {
            vertices,
            triangles: kept,
            nodes: Vec::new(),
            order: Vec::new(),
            bounds: Aabb::empty(),
        };
        mesh.rebuild();
        Ok(mesh)
    }

    fn rebuild(&mut self) {
        self.bounds = Aabb::empty();
        for v in &self.vertices {
            self.bounds.grow(v);
        }
        let tri_bounds: Vec<Aabb> = self
            .triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&self.vertices[i]);
                }
                b
            })
            .collect();
        let centroids: Vec<Point3<f64>> = tri_bounds.iter().map(|b| b.center()).collect();
        self.order = (0..self.triangles.len()).collect();
        self.nodes.clear();
        let n = self.order.len();
        self.build_node(0, n, &tri_bounds, &centroids);
    }

    fn build_node(
        &mut self,
        first: usize,
        count: usize,
        tri_bounds: &[Aabb],
        centroids: &[Point3<f64>],
    ) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &self.order[first..first + count] {
            bounds.merge(&tri_bounds[t]);
        }
        let idx = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf { first, count },
        });
        if count <= LEAF_SIZE {
            return idx;
        }
        // Median split along the widest centroid axis.
        let mut cb = Aabb::empty();
        for &t in &self.order[first..first + count] {
            cb.grow(&centroids[t]);
        }
        let ext = cb.extents();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        if ext[axis] < 1e-15 {
            return idx; // all centroids coincide, keep as leaf
        }
        let mid = first + count / 2;
        self.order[first..first + count].select_nth_unstable_by(count / 2, |&a, &b| {
            centroids[a][axis]
                .partial_cmp(&centroids[b][axis])
                .unwrap()
        });
        let left = self.build_node(first, mid - first, tri_bounds, centroids);
        let right = self.build_node(mid, first + count - mid, tri_bounds, centroids);
        self.nodes[idx].kind = NodeKind::Interior { left, right };
        idx
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Uniform scale about the bounding-box center.
    pub fn scale_about_center(&mut self, factor: f64) {
        let c = self.bounds.center();
        for v in &mut self.vertices {
            *v = c + (*v - c) * factor;
        }
        self.rebuild();
    }

    /// Translate so the bounding-box center lands at `center`.
    pub fn recenter(&mut self, center: Point3<f64>) {
        let d = center - self.bounds.center();
        for v in &mut self.vertices {
            *v += d;
        }
        self.rebuild();
    }

    /// Nearest ray-triangle intersection within `t_max`, as (distance, triangle id).
    pub fn raycast(
        &self,
        orig: &Point3<f64>,
        dir: &Vector3<f64>,
        t_max: f64,
    ) -> Option<(f64, usize)> {
        let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let t_lim = best.map_or(t_max, |(t, _)| t);
            if node.bounds.intersect_ray(orig, &inv_dir, t_lim).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { first, count } => {
                    for &t in &self.order[first..first + count] {
                        if let Some(d) = self.intersect_triangle(t, orig, dir) {
                            if d <= t_lim && best.map_or(true, |(bt, _)| d < bt) {
                                best = Some((d, t));
                            }
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        best
    }

    /// Moller-Trumbore, returning the ray parameter for hits with t > epsilon.
    fn intersect_triangle(
        &self,
        tri: usize,
        orig: &Point3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<f64> {
        let [i0, i1, i2] = self.triangles[tri];
        let v0 = self.vertices[i0];
        let e1 = self.vertices[i1] - v0;
        let e2 = self.vertices[i2] - v0;
        let p = dir.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv_det = 1.0 / det;
        let s = orig - v0;
        let u = s.dot(&p) * inv_det;
        if !(-1e-12..=1.0 + 1e-12).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv_det;
        if v < -1e-12 || u + v > 1.0 + 1e-12 {
            return None;
        }
        let t = e2.dot(&q) * inv_det;
        if t > 1e-9 {
            Some(t)
        } else {
            None
        }
    }

    /// Brute-force nearest intersection over every triangle. Test oracle for
    /// the BVH path; kept here so callers can cross-check.
    pub fn raycast_brute(
        &self,
        orig: &Point3<f64>,
        dir: &Vector3<f64>,
        t_max: f64,
    ) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for tri in 0..self.triangles.len() {
            if let Some(d) = self.intersect_triangle(tri, orig, dir) {
                if d <= t_max && best.map_or(true, |(bt, _)| d < bt) {
                    best = Some((d, tri));
                }
            }
        }
        best
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [i0, i1, i2] = self.triangles[tri];
        let e1 = self.vertices[i1] - self.vertices[i0];
        let e2 = self.vertices[i2] - self.vertices[i0];
        e1.cross(&e2).norm() / 2.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Unsigned distance from a point to the mesh surface (exact over all
    /// triangles; intended for validation, not hot paths).
    pub fn distance_to_surface(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [i0, i1, i2] = self.triangles[t];
            let d = point_triangle_distance(p, &self.vertices[i0], &self.vertices[i1], &self.vertices[i2]);
            best = best.min(d);
        }
        best
    }
}

/// Exact point-to-triangle distance (region-based projection).
pub fn point_triangle_distance(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm();
    }
    let n = ab.cross(&ac);
    (ap.dot(&n) / n.norm()).abs()
}

/// Load an ASCII OBJ or PLY mesh, normalize the x1.0 configuration to fit a
/// cube of side [`TARGET_CUBE_SIDE`] centered at the origin, then apply `scale`.
pub fn load_mesh<P: AsRef<Path>>(path: P, scale: f64) -> Result<TriangleMesh> {
    let path = path.as_ref();
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let (vertices, triangles) = match ext.as_str() {
        "obj" => parse_obj(&text, path)?,
        "ply" => parse_ply(&text, path)?,
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("unsupported mesh format '{other}' (expected obj or ply)"),
            })
        }
    };
    let mut mesh = TriangleMesh::new(vertices, triangles)?;
    // Fit the largest bbox edge to the target cube, centered at the origin.
    let ext = mesh.bounds().extents();
    let longest = ext.x.max(ext.y).max(ext.z);
    if longest > 0.0 {
        mesh.scale_about_center(TARGET_CUBE_SIDE / longest);
    }
    mesh.recenter(Point3::origin());
    if (scale - 1.0).abs() > 1e-12 {
        mesh.scale_about_center(scale);
    }
    Ok(mesh)
}

fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = ln + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: Vec<f64> = it
                    .take(3)
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line: lineno,
                            msg: format!("bad vertex coordinate '{s}'"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        msg: "vertex needs 3 coordinates".into(),
                    });
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line: lineno,
                            msg: format!("bad face index '{tok}'"),
                        })?;
                        let n = vertices.len() as i64;
                        let zero_based = if i < 0 { n + i } else { i - 1 };
                        if zero_based < 0 || zero_based >= n {
                            return Err(Error::Parse {
                                path: path.to_path_buf(),
                                line: lineno,
                                msg: format!("face index {i} out of range"),
                            });
                        }
                        Ok(zero_based as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno,
                        msg: "face needs at least 3 indices".into(),
                    });
                }
                // Fan-triangulate polygons.
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {} // vn, vt, usemtl, o, g, s...
        }
    }
    Ok((vertices, triangles))
}

fn parse_ply(text: &str, path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(1, "missing 'ply' magic".into())),
    }
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut elements: Vec<(String, usize)> = Vec::new();
    let mut header_end = 0usize;
    for (ln, raw) in &mut lines {
        let line = raw.trim();
        let lineno = ln + 1;
        if line.starts_with("format") {
            if !line.contains("ascii") {
                return Err(err(lineno, "only ascii PLY is supported".into()));
            }
        } else if line.starts_with("element") {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(err(lineno, "malformed element line".into()));
            }
            let count: usize = parts[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad element count '{}'", parts[2])))?;
            elements.push((parts[1].to_string(), count));
            match parts[1] {
                "vertex" => n_vertices = count,
                "face" => n_faces = count,
                _ => {}
            }
        } else if line == "end_header" {
            header_end = lineno;
            break;
        }
    }
    if header_end == 0 {
        return Err(err(1, "missing end_header".into()));
    }
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut triangles = Vec::with_capacity(n_faces);
    for (name, count) in &elements {
        for _ in 0..*count {
            let (ln, raw) = lines
                .next()
                .ok_or_else(|| err(header_end, "unexpected end of file".into()))?;
            let lineno = ln + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            match name.as_str() {
                "vertex" => {
                    if toks.len() < 3 {
                        return Err(err(lineno, "vertex needs 3 coordinates".into()));
                    }
                    let mut c = [0.0f64; 3];
                    for (i, v) in c.iter_mut().enumerate() {
                        *v = toks[i]
                            .parse()
                            .map_err(|_| err(lineno, format!("bad coordinate '{}'", toks[i])))?;
                    }
                    vertices.push(Point3::new(c[0], c[1], c[2]));
                }
                "face" => {
                    if toks.is_empty() {
                        return Err(err(lineno, "empty face line".into()));
                    }
                    let n: usize = toks[0]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad face count '{}'", toks[0])))?;
                    if toks.len() < n + 1 || n < 3 {
                        return Err(err(lineno, "malformed face list".into()));
                    }
                    let idx: Vec<usize> = toks[1..=n]
                        .iter()
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|_| err(lineno, format!("bad face index '{s}'")))
                        })
                        .collect::<Result<_>>()?;
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {} // skip unknown element rows
            }
        }
    }
    Ok((vertices, triangles))
}

/// Write a mesh as ASCII OBJ.
pub fn write_obj<P: AsRef<Path>>(mesh: &TriangleMesh, path: P) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(f, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(f, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// UV sphere centered at the origin.
pub fn make_uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let bottom = vertices.len() - 1;
    let mut triangles = Vec::new();
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + (s % segments);
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let a = ring(r, s);
            let b = ring(r, s + 1);
            let c = ring(r + 1, s);
            let d = ring(r + 1, s + 1);
            triangles.push([a, c, b]);
            triangles.push([b, c, d]);
        }
    }
    for s in 0..segments {
        triangles.push([bottom, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriangleMesh::new(vertices, triangles).expect("sphere construction")
}

/// Axis-aligned box centered at `center`.
pub fn make_box(center: Point3<f64>, half_extents: Vector3<f64>) -> TriangleMesh {
    let h = half_extents;
    let corners: Vec<Point3<f64>> = (0..8)
        .map(|i| {
            Point3::new(
                center.x + if i & 1 == 0 { -h.x } else { h.x },
                center.y + if i & 2 == 0 { -h.y } else { h.y },
                center.z + if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    // Each face wound outward.
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut triangles = Vec::new();
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::new(corners, triangles).expect("box construction")
}

/// Unit cube centered at the origin (12 triangles, 8 vertices), scaled by `side`.
pub fn make_cube(side: f64) -> TriangleMesh {
    make_box(Point3::origin(), Vector3::repeat(side / 2.0))
}

/// Concave L-shaped solid made of two boxes (used for round-trip tests).
pub fn make_l_shape(size: f64) -> TriangleMesh {
    let a = make_box(
        Point3::new(0.0, 0.0, -size / 4.0),
        Vector3::new(size / 2.0, size / 4.0, size / 4.0),
    );
    let b = make_box(
        Point3::new(-size / 4.0, 0.0, size / 4.0),
        Vector3::new(size / 4.0, size / 4.0, size / 4.0),
    );
    let mut vertices = a.vertices.clone();
    let offset = vertices.len();
    vertices.extend(b.vertices.iter().cloned());
    let mut triangles = a.triangles.clone();
    triangles.extend(b.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
    TriangleMesh::new(vertices, triangles).expect("l-shape construction")
}
