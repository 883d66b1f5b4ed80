//! Self-describing binary checkpoints.
//!
//! Layout: `b"TECA"`, a little-endian u32 format version, a little-endian
//! u64 byte length followed by that many bytes of JSON metadata, then every
//! block listed in the metadata as raw little-endian f64 values in order.
//! The first two blocks are the normalization mean and std; model
//! parameters follow in [`Model::params`] order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dsp::{NormStats, StftConfig};
use crate::error::{Error, Result};
use crate::network::{Dereverberator, Model, ModelKind, ModelSpec};

pub const MAGIC: &[u8; 4] = b"TECA";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: ModelKind,
    pub rt60_head: bool,
    pub context: usize,
    pub subbands: usize,
    pub edges: Vec<usize>,
    pub n_bins: usize,
    pub spec: ModelSpec,
    pub stft: StftConfig,
    pub power_floor: f64,
    pub config_hash: String,
    pub blocks: Vec<BlockInfo>,
}

fn metadata(d: &Dereverberator) -> Metadata {
    let f = d.stats.n_bins();
    let mut blocks = vec![
        BlockInfo {
            name: "norm.mean".into(),
            shape: [1, f],
        },
        BlockInfo {
            name: "norm.std".into(),
            shape: [1, f],
        },
    ];
    blocks.extend(d.model.params().into_iter().map(|(name, p)| BlockInfo {
        name,
        shape: [p.nrows(), p.ncols()],
    }));
    Metadata {
        kind: d.model.spec.kind,
        rt60_head: d.model.spec.rt60_head,
        context: d.model.spec.context,
        subbands: d.model.partition.n_bands(),
        edges: d.model.partition.edges().to_vec(),
        n_bins: d.model.n_bins,
        spec: d.model.spec.clone(),
        stft: d.stft,
        power_floor: d.power_floor,
        config_hash: d.config_hash.clone(),
        blocks,
    }
}

pub fn to_bytes(d: &Dereverberator) -> Result<Vec<u8>> {
    d.validate()?;
    let meta = serde_json::to_vec(&metadata(d))?;
    let mut out = Vec::with_capacity(16 + meta.len() + 8 * d.model.n_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    let mut put = |vals: &mut dyn Iterator<Item = &f64>| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    put(&mut d.stats.mean.iter());
    put(&mut d.stats.std.iter());
    for (_, p) in d.model.params() {
        put(&mut p.iter());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("block too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Dereverberator> {
    let mut r = Reader { buf, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let len = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let meta: Metadata = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;

    let mut model = Model::new(meta.spec.clone(), meta.n_bins, 0)
        .map_err(|e| Error::Checkpoint(format!("model description: {e}")))?;
    if model.partition.edges() != meta.edges.as_slice() {
        return Err(Error::Checkpoint(format!(
            "band edges {:?} do not match the model description",
            meta.edges
        )));
    }
    let expected: Vec<BlockInfo> = {
        let stats = NormStats::identity(meta.n_bins);
        metadata(&Dereverberator {
            model: model.clone(),
            stats,
            stft: meta.stft,
            power_floor: meta.power_floor,
            config_hash: String::new(),
        })
        .blocks
    };
    if expected != meta.blocks {
        return Err(Error::Checkpoint(
            "parameter blocks do not match the model description".into(),
        ));
    }
    let f = meta.n_bins;
    let stats = NormStats {
        mean: r.f64s(f)?,
        std: r.f64s(f)?,
    };
    for (dst, info) in model.params_mut().into_iter().zip(&meta.blocks[2..]) {
        let vals = r.f64s(info.shape[0] * info.shape[1])?;
        *dst = Array2::from_shape_vec((info.shape[0], info.shape[1]), vals)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    if r.at != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - r.at
        )));
    }
    let d = Dereverberator {
        model,
        stats,
        stft: meta.stft,
        power_floor: meta.power_floor,
        config_hash: meta.config_hash,
    };
    d.validate()?;
    Ok(d)
}

pub fn save(path: impl AsRef<Path>, d: &Dereverberator) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(d)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Dereverberator> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
