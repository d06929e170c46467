//! Probabilistic occupancy grid: sparse log-odds storage, Bresenham ray
//! traversal, Bayesian scan fusion, and the OGM1 binary format.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Log-odds increment for a cell containing a measured point.
pub const L_HIT: f64 = 0.85;
/// Log-odds increment for a cell traversed by a ray.
pub const L_MISS: f64 = -0.4;
/// Clamp bounds on stored log-odds (OctoMap convention).
pub const L_MIN: f64 = -2.0;
pub const L_MAX: f64 = 3.5;

/// Occupancy threshold used for obstacle extraction.
pub const DEFAULT_KAPPA_OCC: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl CellIndex {
    pub fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub origin: Point3<f64>,
    pub extent: f64,
    pub cell_size: f64,
    cells_per_axis: i32,
    cells: HashMap<CellIndex, f64>,
}

impl OccupancyGrid {
    /// Empty grid over a cube of side `extent` with minimum corner `origin`.
    pub fn new(origin: Point3<f64>, extent: f64, cell_size: f64) -> Result<Self> {
        if extent <= 0.0 || cell_size <= 0.0 {
            return Err(Error::InvalidArgument(
                "extent and cell_size must be positive".into(),
            ));
        }
        let ratio = extent / cell_size;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "extent/cell_size must be integral, got {ratio}"
            )));
        }
        Ok(Self {
            origin,
            extent,
            cell_size,
            cells_per_axis: ratio.round() as i32,
            cells: HashMap::new(),
        })
    }

    /// Default working volume: 0.8 m cube at 0.02 m resolution centered on
    /// the origin.
    pub fn default_workspace() -> Self {
        Self::new(Point3::new(-0.4, -0.4, -0.4), 0.8, 0.02).unwrap()
    }

    pub fn cells_per_axis(&self) -> i32 {
        self.cells_per_axis
    }

    pub fn active_cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn in_bounds(&self, idx: CellIndex) -> bool {
        let n = self.cells_per_axis;
        (0..n).contains(&idx.i) && (0..n).contains(&idx.j) && (0..n).contains(&idx.k)
    }

    /// Floor-based binning with half-open cells: a point exactly on a
    /// boundary belongs to the higher cell.
    pub fn world_to_cell(&self, p: &Point3<f64>) -> CellIndex {
        CellIndex::new(
            ((p.x - self.origin.x) / self.cell_size).floor() as i32,
            ((p.y - self.origin.y) / self.cell_size).floor() as i32,
            ((p.z - self.origin.z) / self.cell_size).floor() as i32,
        )
    }

    pub fn cell_center(&self, idx: CellIndex) -> Point3<f64> {
        Point3::new(
            self.origin.x + (idx.i as f64 + 0.5) * self.cell_size,
            self.origin.y + (idx.j as f64 + 0.5) * self.cell_size,
            self.origin.z + (idx.k as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn log_odds(&self, idx: CellIndex) -> f64 {
        self.cells.get(&idx).copied().unwrap_or(0.0)
    }

    /// Occupancy probability p = 1 / (1 + exp(-L)); absent cells are 0.5.
    pub fn probability_of(&self, idx: CellIndex) -> f64 {
        logistic(self.log_odds(idx))
    }

    /// All in-bounds cells with probability >= kappa_occ.
    pub fn occupied_cells(&self, kappa_occ: f64) -> HashSet<CellIndex> {
        assert!(kappa_occ > 0.0 && kappa_occ < 1.0);
        let threshold = logit(kappa_occ);
        self.cells
            .iter()
            .filter(|(_, &l)| l >= threshold)
            .map(|(&idx, _)| idx)
            .collect()
    }

    /// Overwrites a cell's log-odds directly (clamped; zero clears the cell).
    pub fn set_log_odds(&mut self, idx: CellIndex, value: f64) {
        let v = value.clamp(L_MIN, L_MAX);
        if v == 0.0 {
            self.cells.remove(&idx);
        } else {
            self.cells.insert(idx, v);
        }
    }

    /// Active (nonzero log-odds) cells with their log-odds, in storage order.
    pub fn active_cells(&self) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
        self.cells.iter().map(|(&i, &l)| (i, l))
    }

    fn apply_increment(&mut self, idx: CellIndex, delta: f64) {
        let entry = self.cells.entry(idx).or_insert(0.0);
        *entry = (*entry + delta).clamp(L_MIN, L_MAX);
        if *entry == 0.0 {
            self.cells.remove(&idx);
        }
    }

    /// Fuse one scan: every measured point marks its cell as a hit and the
    /// cells strictly between the camera cell and it as misses. Within a
    /// single scan each cell is updated at most once, and a hit wins over a
    /// miss. Out-of-bounds cells are skipped.
    pub fn integrate_scan(
        &mut self,
        camera_center: &Point3<f64>,
        cloud: &PointCloud,
    ) -> UpdateSummary {
        let mut hit_cells: HashSet<CellIndex> = HashSet::new();
        let mut miss_cells: HashSet<CellIndex> = HashSet::new();
        let cam_cell = self.world_to_cell(camera_center);
        // Rays to points that share an already-traced hit cell are redundant
        // within the scan (dedup makes their updates identical), so trace one
        // ray per distinct hit cell.
        for p in &cloud.points {
            let hit = self.world_to_cell(p);
            if !hit_cells.insert(hit) {
                continue;
            }
            let chain = bresenham3d_cells(cam_cell, hit);
            if chain.len() > 2 {
                for cell in &chain[1..chain.len() - 1] {
                    miss_cells.insert(*cell);
                }
            }
        }
        let mut summary = UpdateSummary::default();
        for idx in &hit_cells {
            if self.in_bounds(*idx) {
                self.apply_increment(*idx, L_HIT);
                summary.hits += 1;
            }
        }
        for idx in &miss_cells {
            if !hit_cells.contains(idx) && self.in_bounds(*idx) {
                self.apply_increment(*idx, L_MISS);
                summary.misses += 1;
            }
        }
        summary
    }

    /// Cells traversed between two world points, endpoints included.
    pub fn bresenham3d(&self, a: &Point3<f64>, b: &Point3<f64>) -> Vec<CellIndex> {
        bresenham3d_cells(self.world_to_cell(a), self.world_to_cell(b))
    }

    /// OGM1 binary serialization, lexicographically ordered records.
    pub fn serialize<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"OGM1")?;
        for c in [self.origin.x, self.origin.y, self.origin.z] {
            w.write_f64::<LittleEndian>(c)?;
        }
        w.write_f64::<LittleEndian>(self.extent)?;
        w.write_f64::<LittleEndian>(self.cell_size)?;
        w.write_u64::<LittleEndian>(self.cells.len() as u64)?;
        let mut keys: Vec<CellIndex> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        for idx in keys {
            w.write_i32::<LittleEndian>(idx.i)?;
            w.write_i32::<LittleEndian>(idx.j)?;
            w.write_i32::<LittleEndian>(idx.k)?;
            w.write_f32::<LittleEndian>(self.cells[&idx] as f32)?;
        }
        Ok(())
    }

    pub fn deserialize<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Malformed("truncated OGM header".into()))?;
        if &magic != b"OGM1" {
            return Err(Error::Version(format!(
                "bad magic {:?}, expected OGM1",
                String::from_utf8_lossy(&magic)
            )));
        }
        let ox = r.read_f64::<LittleEndian>()?;
        let oy = r.read_f64::<LittleEndian>()?;
        let oz = r.read_f64::<LittleEndian>()?;
        let extent = r.read_f64::<LittleEndian>()?;
        let cell_size = r.read_f64::<LittleEndian>()?;
        let count = r.read_u64::<LittleEndian>()?;
        let mut grid = Self::new(Point3::new(ox, oy, oz), extent, cell_size)
            .map_err(|e| Error::Malformed(format!("bad OGM header: {e}")))?;
        for _ in 0..count {
            let i = r.read_i32::<LittleEndian>()?;
            let j = r.read_i32::<LittleEndian>()?;
            let k = r.read_i32::<LittleEndian>()?;
            let l = r.read_f32::<LittleEndian>()? as f64;
            grid.cells.insert(CellIndex::new(i, j, k), l);
        }
        Ok(grid)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.serialize(f)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let f = std::io::BufReader::new(
            std::fs::File::open(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?,
        );
        Self::deserialize(f)
    }
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// 3D Bresenham between integer cells: steps the dominant axis every
/// iteration and the other axes on error overflow, yielding a 26-connected
/// chain of length max-delta + 1 with no repeats.
pub fn bresenham3d_cells(a: CellIndex, b: CellIndex) -> Vec<CellIndex> {
    let (mut x, mut y, mut z) = (a.i as i64, a.j as i64, a.k as i64);
    let (x1, y1, z1) = (b.i as i64, b.j as i64, b.k as i64);
    let dx = (x1 - x).abs();
    let dy = (y1 - y).abs();
    let dz = (z1 - z).abs();
    let sx = (x1 - x).signum();
    let sy = (y1 - y).signum();
    let sz = (z1 - z).signum();
    let n = dx.max(dy).max(dz);
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(a);
    if n == 0 {
        return out;
    }
    if dx >= dy && dx >= dz {
        let (mut e_y, mut e_z) = (2 * dy - dx, 2 * dz - dx);
        for _ in 0..dx {
            x += sx;
            if e_y >= 0 {
                y += sy;
                e_y -= 2 * dx;
            }
            if e_z >= 0 {
                z += sz;
                e_z -= 2 * dx;
            }
            e_y += 2 * dy;
            e_z += 2 * dz;
            out.push(CellIndex::new(x as i32, y as i32, z as i32));
        }
    } else if dy >= dx && dy >= dz {
        let (mut e_x, mut e_z) = (2 * dx - dy, 2 * dz - dy);
        for _ in 0..dy {
            y += sy;
            if e_x >= 0 {
                x += sx;
                e_x -= 2 * dy;
            }
            if e_z >= 0 {
                z += sz;
                e_z -= 2 * dy;
            }
            e_x += 2 * dx;
            e_z += 2 * dz;
            out.push(CellIndex::new(x as i32, y as i32, z as i32));
        }
    } else {
        let (mut e_x, mut e_y) = (2 * dx - dz, 2 * dy - dz);
        for _ in 0..dz {
            z += sz;
            if e_x >= 0 {
                x += sx;
                e_x -= 2 * dz;
            }
            if e_y >= 0 {
                y += sy;
                e_y -= 2 * dz;
            }
            e_x += 2 * dx;
            e_y += 2 * dy;
            out.push(CellIndex::new(x as i32, y as i32, z as i32));
        }
    }
    out
}
