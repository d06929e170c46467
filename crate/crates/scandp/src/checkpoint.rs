//! Policy checkpoint file: magic "SDP1", little-endian u32 JSON-header
//! length, JSON header (shapes, schedule, normalization, config echo), then
//! named little-endian f32 weight blobs in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::diffusion::{ActionStats, DiffusionSchedule, NoisePredictor, Policy};
use crate::encoder::{GridEncoder, PoseEncoder, SparseConvLayer};
use crate::nn::{Linear, Mlp};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SDP1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlobInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: u32,
    action_horizon: usize,
    observation_horizon: usize,
    extent: f64,
    init_seed: u64,
    predictor_embed_dim: usize,
    predictor_cond_dim: usize,
    schedule: DiffusionSchedule,
    stats: ActionStats,
    config: serde_json::Value,
    blobs: Vec<BlobInfo>,
}

struct BlobWriter {
    infos: Vec<BlobInfo>,
    data: Vec<f32>,
}

impl BlobWriter {
    fn new() -> Self {
        Self { infos: Vec::new(), data: Vec::new() }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, values: impl Iterator<Item = f64>) {
        self.infos.push(BlobInfo { name: name.to_string(), shape });
        self.data.extend(values.map(|v| v as f32));
    }

    fn push_linear(&mut self, name: &str, l: &Linear) {
        self.push(
            &format!("{name}.weight"),
            vec![l.weight.nrows(), l.weight.ncols()],
            l.weight.iter().copied(),
        );
        self.push(&format!("{name}.bias"), vec![l.bias.len()], l.bias.iter().copied());
    }

    fn push_mlp(&mut self, name: &str, m: &Mlp) {
        for (i, l) in m.layers.iter().enumerate() {
            self.push_linear(&format!("{name}.l{i}"), l);
        }
    }

    fn push_conv(&mut self, name: &str, c: &SparseConvLayer) {
        let out = c.out_channels();
        let inp = c.weights[0].ncols();
        self.push(
            &format!("{name}.weight"),
            vec![27, out, inp],
            c.weights.iter().flat_map(|w| w.iter().copied().collect::<Vec<_>>()),
        );
        self.push(&format!("{name}.bias"), vec![out], c.bias.iter().copied());
    }
}

struct BlobReader {
    infos: Vec<BlobInfo>,
    data: Vec<f32>,
    next: usize,
    offset: usize,
}

impl BlobReader {
    fn take(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let info = self
            .infos
            .get(self.next)
            .ok_or_else(|| Error::Malformed(format!("missing blob '{name}'")))?
            .clone();
        if info.name != name {
            return Err(Error::Malformed(format!(
                "expected blob '{name}', found '{}'",
                info.name
            )));
        }
        let count: usize = info.shape.iter().product();
        if self.offset + count > self.data.len() {
            return Err(Error::Malformed(format!("blob '{name}' truncated")));
        }
        let vals = self.data[self.offset..self.offset + count]
            .iter()
            .map(|&v| v as f64)
            .collect();
        self.offset += count;
        self.next += 1;
        Ok((info.shape, vals))
    }

    fn take_linear(&mut self, name: &str) -> Result<Linear> {
        let (wshape, wvals) = self.take(&format!("{name}.weight"))?;
        let (bshape, bvals) = self.take(&format!("{name}.bias"))?;
        if wshape.len() != 2 || bshape.len() != 1 || bshape[0] != wshape[0] {
            return Err(Error::Malformed(format!("blob '{name}' has inconsistent shapes")));
        }
        Ok(Linear {
            weight: Array2::from_shape_vec((wshape[0], wshape[1]), wvals)
                .map_err(|e| Error::Malformed(e.to_string()))?,
            bias: Array1::from_vec(bvals),
        })
    }

    fn take_mlp(&mut self, name: &str, layer_count: usize) -> Result<Mlp> {
        let layers = (0..layer_count)
            .map(|i| self.take_linear(&format!("{name}.l{i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    fn take_conv(&mut self, name: &str) -> Result<SparseConvLayer> {
        let (wshape, wvals) = self.take(&format!("{name}.weight"))?;
        let (bshape, bvals) = self.take(&format!("{name}.bias"))?;
        if wshape.len() != 3 || wshape[0] != 27 || bshape != vec![wshape[1]] {
            return Err(Error::Malformed(format!("conv blob '{name}' has bad shape")));
        }
        let (out, inp) = (wshape[1], wshape[2]);
        let per = out * inp;
        let weights = (0..27)
            .map(|k| {
                Array2::from_shape_vec((out, inp), wvals[k * per..(k + 1) * per].to_vec())
                    .map_err(|e| Error::Malformed(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseConvLayer { weights, bias: Array1::from_vec(bvals) })
    }
}

pub fn save_policy<P: AsRef<Path>>(
    policy: &Policy,
    config: &serde_json::Value,
    path: P,
) -> Result<()> {
    let mut blobs = BlobWriter::new();
    for (i, c) in policy.grid_encoder.convs.iter().enumerate() {
        blobs.push_conv(&format!("grid.conv{i}"), c);
    }
    blobs.push_linear("grid.fc", &policy.grid_encoder.fc);
    blobs.push_mlp("pose", &policy.pose_encoder.mlp);
    blobs.push_mlp("predictor", &policy.predictor.mlp);
    let header = Header {
        version: 1,
        action_horizon: policy.action_horizon,
        observation_horizon: policy.observation_horizon,
        extent: policy.pose_encoder.extent,
        init_seed: policy.init_seed,
        predictor_embed_dim: policy.predictor.embed_dim,
        predictor_cond_dim: policy.predictor.cond_dim,
        schedule: policy.schedule.clone(),
        stats: policy.stats.clone(),
        config: config.clone(),
        blobs: blobs.infos.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(header_bytes.len() as u32)?;
    w.write_all(&header_bytes)?;
    for v in &blobs.data {
        w.write_f32::<LittleEndian>(*v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_policy<P: AsRef<Path>>(path: P) -> Result<(Policy, serde_json::Value)> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Malformed("bad checkpoint magic".into()));
    }
    let header_len = r.read_u32::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.version != 1 {
        return Err(Error::Version(format!("unsupported checkpoint version {}", header.version)));
    }
    let total: usize = header.blobs.iter().map(|b| b.shape.iter().product::<usize>()).sum();
    let mut data = vec![0f32; total];
    r.read_f32_into::<LittleEndian>(&mut data)?;
    let mut reader = BlobReader { infos: header.blobs.clone(), data, next: 0, offset: 0 };

    let convs = (0..3)
        .map(|i| reader.take_conv(&format!("grid.conv{i}")))
        .collect::<Result<Vec<_>>>()?;
    let fc = reader.take_linear("grid.fc")?;
    let pose_mlp = reader.take_mlp("pose", 2)?;
    let pred_layer_count = header
        .blobs
        .iter()
        .filter(|b| b.name.starts_with("predictor.") && b.name.ends_with(".weight"))
        .count();
    let pred_mlp = reader.take_mlp("predictor", pred_layer_count)?;

    let action_dim = pred_mlp.layers.last().unwrap().bias.len();
    if action_dim != header.action_horizon * crate::diffusion::ACTION_DIMS {
        return Err(Error::Malformed(format!(
            "predictor output dim {action_dim} inconsistent with horizon {}",
            header.action_horizon
        )));
    }
    let policy = Policy {
        grid_encoder: GridEncoder { convs, fc },
        pose_encoder: PoseEncoder {
            mlp: pose_mlp,
            horizon: header.observation_horizon,
            extent: header.extent,
        },
        predictor: NoisePredictor {
            mlp: pred_mlp,
            action_dim,
            embed_dim: header.predictor_embed_dim,
            cond_dim: header.predictor_cond_dim,
        },
        schedule: header.schedule,
        stats: header.stats,
        action_horizon: header.action_horizon,
        observation_horizon: header.observation_horizon,
        init_seed: header.init_seed,
    };
    Ok((policy, header.config))
}
