//! Conditioning feature extraction: a generalized sparse 3D conv encoder over
//! active occupancy cells plus a pose-history MLP. Output = e_cam ++ e_ogm.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha12Rng;

use crate::geom::Pose;
use crate::grid::{CellIndex, OccupancyGrid};
use crate::nn::{Linear, LinearGrad, Mlp};
use crate::{Error, Result};

pub const OGM_FEATURE_DIM: usize = 64;
pub const POSE_FEATURE_DIM: usize = 32;
pub const CONDITION_DIM: usize = POSE_FEATURE_DIM + OGM_FEATURE_DIM;
pub const OBSERVATION_HORIZON: usize = 2;
const POSE_HIDDEN: usize = 64;
const CONV_CHANNELS: [usize; 4] = [1, 16, 32, 64];

/// Coordinate list with one feature row per coordinate.
#[derive(Debug, Clone)]
pub struct SparseTensor {
    pub coords: Vec<CellIndex>,
    /// (n_sites, channels)
    pub feats: Array2<f64>,
    pub stride: i32,
}

impl SparseTensor {
    pub fn empty(channels: usize) -> Self {
        Self {
            coords: Vec::new(),
            feats: Array2::zeros((0, channels)),
            stride: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// One coordinate per touched cell, feature = raw occupancy probability.
pub fn grid_to_sparse(grid: &OccupancyGrid) -> SparseTensor {
    let mut coords: Vec<CellIndex> = grid.active_cells().map(|(c, _)| c).collect();
    coords.sort();
    let feats =
        Array2::from_shape_fn((coords.len(), 1), |(i, _)| grid.probability_of(coords[i]));
    SparseTensor { coords, feats, stride: 1 }
}

/// Ablation variant: features collapsed to {0, 0.5, 1} around kappa_occ.
pub fn grid_to_sparse_thresholded(grid: &OccupancyGrid, kappa_occ: f64) -> SparseTensor {
    let mut t = grid_to_sparse(grid);
    for f in t.feats.iter_mut() {
        *f = if *f >= kappa_occ {
            1.0
        } else if *f < 0.5 {
            0.0
        } else {
            0.5
        };
    }
    t
}

/// 3x3x3 kernel offsets in fixed lexicographic order.
fn kernel_offsets() -> [[i32; 3]; 27] {
    let mut out = [[0i32; 3]; 27];
    let mut idx = 0;
    for kx in -1..=1 {
        for ky in -1..=1 {
            for kz in -1..=1 {
                out[idx] = [kx, ky, kz];
                idx += 1;
            }
        }
    }
    out
}

/// One stride-2 generalized sparse conv layer: outputs at every site o with
/// some active input at 2o + k, k in {-1,0,1}^3.
#[derive(Debug, Clone)]
pub struct SparseConvLayer {
    /// 27 matrices of shape (out_channels, in_channels), indexed by offset.
    pub weights: Vec<Array2<f64>>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct SparseConvGrad {
    pub weights: Vec<Array2<f64>>,
    pub bias: Array1<f64>,
}

/// Forward-pass state needed for backprop through one layer.
pub struct ConvCache {
    input: SparseTensor,
    /// (input_site, output_site, offset_index)
    kernel_map: Vec<(usize, usize, usize)>,
    pre: Array2<f64>,
    out_coords: Vec<CellIndex>,
}

impl SparseConvLayer {
    pub fn init(in_ch: usize, out_ch: usize, rng: &mut ChaCha12Rng) -> Self {
        use rand::Rng;
        let bound = 1.0 / ((in_ch * 27) as f64).sqrt();
        let weights = (0..27)
            .map(|_| Array2::from_shape_fn((out_ch, in_ch), |_| rng.gen_range(-bound..bound)))
            .collect();
        let bias = Array1::from_shape_fn(out_ch, |_| rng.gen_range(-bound..bound));
        Self { weights, bias }
    }

    pub fn out_channels(&self) -> usize {
        self.bias.len()
    }

    /// Returns (cache, post-ReLU output). Output coordinates are sorted, so
    /// the result is independent of input coordinate order.
    pub fn forward(&self, input: &SparseTensor) -> (ConvCache, SparseTensor) {
        let offsets = kernel_offsets();
        let in_index: HashMap<CellIndex, usize> = input
            .coords
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();

        let mut out_set: Vec<CellIndex> = Vec::new();
        for &c in &input.coords {
            for k in &offsets {
                let n = [c.i - k[0], c.j - k[1], c.k - k[2]];
                if n.iter().all(|v| v % 2 == 0) {
                    out_set.push(CellIndex { i: n[0] / 2, j: n[1] / 2, k: n[2] / 2 });
                }
            }
        }
        out_set.sort();
        out_set.dedup();

        let out_ch = self.out_channels();
        let mut pre = Array2::zeros((out_set.len(), out_ch));
        for mut r in pre.rows_mut() {
            r.assign(&self.bias);
        }
        let mut kernel_map = Vec::new();
        for (oi, o) in out_set.iter().enumerate() {
            for (ki, k) in offsets.iter().enumerate() {
                let c = CellIndex { i: 2 * o.i + k[0], j: 2 * o.j + k[1], k: 2 * o.k + k[2] };
                if let Some(&ii) = in_index.get(&c) {
                    kernel_map.push((ii, oi, ki));
                }
            }
        }
        // Per-offset gather -> matmul -> scatter keeps this a dense GEMM.
        let in_ch = input.feats.ncols();
        for ki in 0..27 {
            let pairs: Vec<(usize, usize)> = kernel_map
                .iter()
                .filter(|&&(_, _, k)| k == ki)
                .map(|&(ii, oi, _)| (ii, oi))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let mut x = Array2::zeros((pairs.len(), in_ch));
            for (r, &(ii, _)) in pairs.iter().enumerate() {
                x.row_mut(r).assign(&input.feats.row(ii));
            }
            let y = x.dot(&self.weights[ki].t());
            for (r, &(_, oi)) in pairs.iter().enumerate() {
                let mut row = pre.row_mut(oi);
                row += &y.row(r);
            }
        }

        let post = pre.mapv(|v| v.max(0.0));
        let out = SparseTensor {
            coords: out_set.clone(),
            feats: post,
            stride: input.stride * 2,
        };
        let cache = ConvCache {
            input: input.clone(),
            kernel_map,
            pre,
            out_coords: out_set,
        };
        (cache, out)
    }

    /// Backprop post-ReLU output grads; returns input-feature grads.
    pub fn backward(
        &self,
        cache: &ConvCache,
        d_out: &Array2<f64>,
        grad: &mut SparseConvGrad,
    ) -> Array2<f64> {
        let mut d_pre = Array2::zeros(d_out.raw_dim());
        for ((dp, &p), &d) in d_pre.iter_mut().zip(cache.pre.iter()).zip(d_out.iter()) {
            *dp = if p > 0.0 { d } else { 0.0 };
        }
        for oi in 0..cache.out_coords.len() {
            grad.bias += &d_pre.row(oi);
        }
        let in_ch = cache.input.feats.ncols();
        let mut d_in = Array2::zeros(cache.input.feats.raw_dim());
        for ki in 0..27 {
            let pairs: Vec<(usize, usize)> = cache
                .kernel_map
                .iter()
                .filter(|&&(_, _, k)| k == ki)
                .map(|&(ii, oi, _)| (ii, oi))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let mut x = Array2::zeros((pairs.len(), in_ch));
            let mut dy = Array2::zeros((pairs.len(), d_pre.ncols()));
            for (r, &(ii, oi)) in pairs.iter().enumerate() {
                x.row_mut(r).assign(&cache.input.feats.row(ii));
                dy.row_mut(r).assign(&d_pre.row(oi));
            }
            grad.weights[ki] += &dy.t().dot(&x);
            let dx = dy.dot(&self.weights[ki]);
            for (r, &(ii, _)) in pairs.iter().enumerate() {
                let mut row = d_in.row_mut(ii);
                row += &dx.row(r);
            }
        }
        d_in
    }

    pub fn grad_zeros(&self) -> SparseConvGrad {
        SparseConvGrad {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn sgd_step(&mut self, grad: &SparseConvGrad, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            w.scaled_add(-lr, g);
        }
        self.bias.scaled_add(-lr, &grad.bias);
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.bias.len()
    }
}

/// Three stride-2 sparse conv layers, global average pool, FC to 64 dims.
#[derive(Debug, Clone)]
pub struct GridEncoder {
    pub convs: Vec<SparseConvLayer>,
    pub fc: Linear,
}

#[derive(Debug, Clone)]
pub struct GridEncoderGrad {
    pub convs: Vec<SparseConvGrad>,
    pub fc: LinearGrad,
}

impl SparseConvGrad {
    pub fn add(&mut self, other: &SparseConvGrad) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
        self.bias += &other.bias;
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            *w *= s;
        }
        self.bias *= s;
    }
}

impl GridEncoderGrad {
    pub fn add(&mut self, other: &GridEncoderGrad) {
        for (c, o) in self.convs.iter_mut().zip(&other.convs) {
            c.add(o);
        }
        self.fc.weight += &other.fc.weight;
        self.fc.bias += &other.fc.bias;
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.convs {
            c.scale(s);
        }
        self.fc.weight *= s;
        self.fc.bias *= s;
    }
}

pub struct GridEncoderCache {
    conv_caches: Vec<ConvCache>,
    pooled: Array1<f64>,
    last_sites: usize,
}

impl GridEncoder {
    pub fn init(rng: &mut ChaCha12Rng) -> Self {
        let convs = CONV_CHANNELS
            .windows(2)
            .map(|w| SparseConvLayer::init(w[0], w[1], rng))
            .collect();
        let fc = Linear::init(OGM_FEATURE_DIM, OGM_FEATURE_DIM, rng);
        Self { convs, fc }
    }

    pub fn forward(&self, tensor: &SparseTensor) -> Array1<f64> {
        self.forward_cached(tensor).1
    }

    pub fn forward_cached(&self, tensor: &SparseTensor) -> (GridEncoderCache, Array1<f64>) {
        let mut caches = Vec::with_capacity(self.convs.len());
        let mut cur = tensor.clone();
        for conv in &self.convs {
            let (cache, out) = conv.forward(&cur);
            caches.push(cache);
            cur = out;
        }
        let last_ch = CONV_CHANNELS[CONV_CHANNELS.len() - 1];
        let n = cur.len();
        let pooled = if n == 0 {
            Array1::zeros(last_ch)
        } else {
            let mut sum = Array1::zeros(last_ch);
            for r in cur.feats.rows() {
                sum += &r;
            }
            sum / n as f64
        };
        let out = self.fc.forward(&pooled);
        (
            GridEncoderCache { conv_caches: caches, pooled, last_sites: n },
            out,
        )
    }

    pub fn backward(&self, cache: &GridEncoderCache, dy: &Array1<f64>, grad: &mut GridEncoderGrad) {
        let d_pooled = self.fc.backward(&cache.pooled, dy, &mut grad.fc);
        if cache.last_sites == 0 {
            return;
        }
        let scale = 1.0 / cache.last_sites as f64;
        let mut d_feats = Array2::zeros((cache.last_sites, d_pooled.len()));
        for mut r in d_feats.rows_mut() {
            r.assign(&(&d_pooled * scale));
        }
        for idx in (0..self.convs.len()).rev() {
            d_feats =
                self.convs[idx].backward(&cache.conv_caches[idx], &d_feats, &mut grad.convs[idx]);
        }
    }

    pub fn grad_zeros(&self) -> GridEncoderGrad {
        GridEncoderGrad {
            convs: self.convs.iter().map(|c| c.grad_zeros()).collect(),
            fc: self.fc.grad_zeros(),
        }
    }

    pub fn sgd_step(&mut self, grad: &GridEncoderGrad, lr: f64) {
        for (c, g) in self.convs.iter_mut().zip(&grad.convs) {
            c.sgd_step(g, lr);
        }
        self.fc.sgd_step(&grad.fc, lr);
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(|c| c.param_count()).sum::<usize>() + self.fc.param_count()
    }
}

/// Two-layer MLP over the flattened h-step pose history (h * 9 inputs).
#[derive(Debug, Clone)]
pub struct PoseEncoder {
    pub mlp: Mlp,
    pub horizon: usize,
    /// Grid extent used to normalize translations.
    pub extent: f64,
}

impl PoseEncoder {
    pub fn init(horizon: usize, extent: f64, rng: &mut ChaCha12Rng) -> Self {
        let mlp = Mlp::init(&[horizon * 9, POSE_HIDDEN, POSE_FEATURE_DIM], rng);
        Self { mlp, horizon, extent }
    }

    /// Flattens `poses` (most recent last) into the MLP input, left-padding by
    /// repeating the first pose when fewer than `horizon` are given.
    pub fn input_vector(&self, poses: &[Pose]) -> Result<Array1<f64>> {
        if poses.is_empty() {
            return Err(Error::InvalidArgument("pose history is empty".into()));
        }
        if poses.len() > self.horizon {
            return Err(Error::InvalidArgument(format!(
                "pose history has {} entries, expected at most {}",
                poses.len(),
                self.horizon
            )));
        }
        let pad = self.horizon - poses.len();
        let mut out = Array1::zeros(self.horizon * 9);
        for slot in 0..self.horizon {
            let pose = if slot < pad { &poses[0] } else { &poses[slot - pad] };
            let v = pose.to_vec9();
            for d in 0..9 {
                let val = if d < 3 { v[d] / self.extent } else { v[d] };
                out[slot * 9 + d] = val;
            }
        }
        Ok(out)
    }

    pub fn forward(&self, poses: &[Pose]) -> Result<Array1<f64>> {
        Ok(self.mlp.forward(&self.input_vector(poses)?))
    }
}

/// e = e_cam ++ e_ogm, camera features first.
pub fn condition(e_cam: &Array1<f64>, e_ogm: &Array1<f64>) -> Result<Array1<f64>> {
    if e_cam.len() != POSE_FEATURE_DIM || e_ogm.len() != OGM_FEATURE_DIM {
        return Err(Error::DimensionMismatch(format!(
            "condition expects ({POSE_FEATURE_DIM}, {OGM_FEATURE_DIM}), got ({}, {})",
            e_cam.len(),
            e_ogm.len()
        )));
    }
    let mut out = Array1::zeros(CONDITION_DIM);
    out.slice_mut(ndarray::s![..POSE_FEATURE_DIM]).assign(e_cam);
    out.slice_mut(ndarray::s![POSE_FEATURE_DIM..]).assign(e_ogm);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, UnitQuaternion, Vector3};
    use rand::{Rng, SeedableRng};

    fn tensor_from(coords: Vec<(i32, i32, i32)>, feats: Vec<Vec<f64>>) -> SparseTensor {
        let ch = feats[0].len();
        let f = Array2::from_shape_fn((coords.len(), ch), |(i, j)| feats[i][j]);
        SparseTensor {
            coords: coords
                .into_iter()
                .map(|(i, j, k)| CellIndex { i, j, k })
                .collect(),
            feats: f,
            stride: 1,
        }
    }

    #[test]
    fn grid_to_sparse_probability_features() {
        let mut grid = OccupancyGrid::default_workspace();
        assert!(grid_to_sparse(&grid).is_empty());
        let c = CellIndex { i: 20, j: 20, k: 20 };
        grid.set_log_odds(c, 0.85);
        let t = grid_to_sparse(&grid);
        assert_eq!(t.coords, vec![c]);
        assert!((t.feats[(0, 0)] - 0.70057).abs() < 1e-5);
    }

    #[test]
    fn thresholded_mode_is_ternary() {
        let mut grid = OccupancyGrid::default_workspace();
        grid.set_log_odds(CellIndex { i: 0, j: 0, k: 0 }, 3.5);
        grid.set_log_odds(CellIndex { i: 1, j: 0, k: 0 }, -2.0);
        grid.set_log_odds(CellIndex { i: 2, j: 0, k: 0 }, 0.85);
        let t = grid_to_sparse_thresholded(&grid, 0.9);
        let mut vals: Vec<f64> = t.feats.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
    }

    /// Dense stride-2 conv reference over a bounded coordinate box.
    fn dense_conv_oracle(
        layer: &SparseConvLayer,
        input: &SparseTensor,
        out_coord: CellIndex,
    ) -> Array1<f64> {
        let offsets = kernel_offsets();
        let lookup: HashMap<CellIndex, usize> = input
            .coords
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        let mut acc = layer.bias.clone();
        for (ki, k) in offsets.iter().enumerate() {
            let c = CellIndex {
                i: 2 * out_coord.i + k[0],
                j: 2 * out_coord.j + k[1],
                k: 2 * out_coord.k + k[2],
            };
            if let Some(&ii) = lookup.get(&c) {
                acc += &layer.weights[ki].dot(&input.feats.row(ii).to_owned());
            }
        }
        acc.mapv(|v| v.max(0.0))
    }

    #[test]
    fn sparse_conv_matches_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let layer = SparseConvLayer::init(2, 5, &mut rng);
        let mut coords = Vec::new();
        let mut feats = Vec::new();
        for _ in 0..40 {
            let c = (
                rng.gen_range(0..8),
                rng.gen_range(0..8),
                rng.gen_range(0..8),
            );
            if coords.contains(&c) {
                continue;
            }
            coords.push(c);
            feats.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        }
        let input = tensor_from(coords, feats);
        let (_, out) = layer.forward(&input);
        assert!(!out.is_empty());
        for (oi, &oc) in out.coords.iter().enumerate() {
            let expect = dense_conv_oracle(&layer, &input, oc);
            for ch in 0..5 {
                assert!((out.feats[(oi, ch)] - expect[ch]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn encode_grid_permutation_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let enc = GridEncoder::init(&mut rng);
        let mut coords = Vec::new();
        let mut feats = Vec::new();
        for i in 0..30 {
            coords.push((i % 6, (i / 6) % 6, i / 36));
            feats.push(vec![rng.gen_range(0.0..1.0)]);
        }
        let t1 = tensor_from(coords.clone(), feats.clone());
        let mut perm: Vec<usize> = (0..coords.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let t2 = tensor_from(
            perm.iter().map(|&i| coords[i]).collect(),
            perm.iter().map(|&i| feats[i].clone()).collect(),
        );
        let y1 = enc.forward(&t1);
        let y2 = enc.forward(&t2);
        for (a, b) in y1.iter().zip(y2.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_tensor_uses_zero_pool() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let enc = GridEncoder::init(&mut rng);
        let y = enc.forward(&SparseTensor::empty(1));
        let expect = enc.fc.forward(&Array1::zeros(OGM_FEATURE_DIM));
        assert_eq!(y.len(), OGM_FEATURE_DIM);
        for (a, b) in y.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn interior_pattern_translation_equivariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let enc = GridEncoder::init(&mut rng);
        let mut coords = Vec::new();
        let mut feats = Vec::new();
        for i in 2..6 {
            for j in 2..6 {
                coords.push((i, j, 3));
                feats.push(vec![rng.gen_range(0.2..0.9)]);
            }
        }
        let shifted: Vec<(i32, i32, i32)> =
            coords.iter().map(|&(i, j, k)| (i + 8, j + 8, k + 8)).collect();
        let y1 = enc.forward(&tensor_from(coords, feats.clone()));
        let y2 = enc.forward(&tensor_from(shifted, feats));
        for (a, b) in y1.iter().zip(y2.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn encoder_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let mut enc = GridEncoder::init(&mut rng);
        let mut coords = Vec::new();
        let mut feats = Vec::new();
        for i in 0..12 {
            coords.push((i % 3, (i / 3) % 3, i / 9));
            feats.push(vec![rng.gen_range(0.1..0.9)]);
        }
        let input = tensor_from(coords, feats);
        let target = Array1::from_shape_fn(OGM_FEATURE_DIM, |_| rng.gen_range(-0.5..0.5));
        let loss = |e: &GridEncoder| -> f64 {
            let y = e.forward(&input);
            (&y - &target).mapv(|v| v * v).sum()
        };
        let (cache, y) = enc.forward_cached(&input);
        let dy = (&y - &target) * 2.0;
        let mut grad = enc.grad_zeros();
        enc.backward(&cache, &dy, &mut grad);
        let h = 1e-6;
        for li in 0..enc.convs.len() {
            for &ki in &[0usize, 13, 26] {
                let orig = enc.convs[li].weights[ki][(0, 0)];
                enc.convs[li].weights[ki][(0, 0)] = orig + h;
                let up = loss(&enc);
                enc.convs[li].weights[ki][(0, 0)] = orig - h;
                let down = loss(&enc);
                enc.convs[li].weights[ki][(0, 0)] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grad.convs[li].weights[ki][(0, 0)];
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!(
                    ((fd - an) / denom).abs() < 1e-4,
                    "conv {li} offset {ki}: fd {fd} vs analytic {an}"
                );
            }
        }
        let orig = enc.fc.weight[(3, 3)];
        enc.fc.weight[(3, 3)] = orig + h;
        let up = loss(&enc);
        enc.fc.weight[(3, 3)] = orig - h;
        let down = loss(&enc);
        enc.fc.weight[(3, 3)] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = grad.fc.weight[(3, 3)];
        assert!(((fd - an) / fd.abs().max(1e-6)).abs() < 1e-4);
    }

    #[test]
    fn pose_history_padding_rule() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let enc = PoseEncoder::init(2, 0.8, &mut rng);
        let pose = Pose {
            translation: Point3::new(0.1, -0.2, 0.3),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.4),
        };
        let a = enc.forward(&[pose.clone()]).unwrap();
        let b = enc.forward(&[pose.clone(), pose]).unwrap();
        assert_eq!(a.len(), POSE_FEATURE_DIM);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(enc.forward(&[]).is_err());
    }

    #[test]
    fn pose_encoder_matches_matmul_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let enc = PoseEncoder::init(2, 0.8, &mut rng);
        let p1 = Pose {
            translation: Point3::new(0.3, 0.1, -0.2),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.7),
        };
        let p2 = Pose {
            translation: Point3::new(-0.1, 0.2, 0.25),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -0.3),
        };
        let x = enc.input_vector(&[p1.clone(), p2.clone()]).unwrap();
        assert_eq!(x.len(), 18);
        assert!((x[0] - p1.translation.x / 0.8).abs() < 1e-12);
        let mut h = Array1::zeros(POSE_HIDDEN);
        for o in 0..POSE_HIDDEN {
            let mut acc = enc.mlp.layers[0].bias[o];
            for i in 0..18 {
                acc += enc.mlp.layers[0].weight[(o, i)] * x[i];
            }
            h[o] = acc.max(0.0);
        }
        let mut y = Array1::zeros(POSE_FEATURE_DIM);
        for o in 0..POSE_FEATURE_DIM {
            let mut acc = enc.mlp.layers[1].bias[o];
            for i in 0..POSE_HIDDEN {
                acc += enc.mlp.layers[1].weight[(o, i)] * h[i];
            }
            y[o] = acc;
        }
        let got = enc.forward(&[p1, p2]).unwrap();
        for (a, b) in got.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn condition_concatenates_camera_first() {
        let z = condition(&Array1::zeros(32), &Array1::zeros(64)).unwrap();
        assert_eq!(z.len(), 96);
        assert!(z.iter().all(|&v| v == 0.0));
        let cam = Array1::from_shape_fn(32, |i| i as f64);
        let ogm = Array1::from_shape_fn(64, |i| 100.0 + i as f64);
        let e = condition(&cam, &ogm).unwrap();
        assert_eq!(e[0], cam[0]);
        for i in 0..32 {
            assert_eq!(e[i], cam[i]);
        }
        for i in 0..64 {
            assert_eq!(e[32 + i], ogm[i]);
        }
        assert!(condition(&Array1::zeros(31), &Array1::zeros(64)).is_err());
    }
}
