//! "FDDN v1" checkpoints, little-endian:
//!
//! ```text
//! "FDDN" | u32 version=1
//! NetConfig: u32 hidden_size | u32 n_layers | u32 z_embed_dim | u8 cell (0 bilstm, 1 bigru)
//!            u8 precision (0 f32, 1 f64) | u64 init_seed | u8 has_init_scale | f64 init_scale
//!            f64 z_ref_km | f64 field_scale | u64 max_seq_len
//! u32 n_tensors, then per tensor: u32 name_len | name | u32 ndims | u64 dims[ndims] | f64 values (row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{CellKind, NetConfig, Precision, SurrogateNet};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FDDN";
const VERSION: u32 = 1;

fn write_config<W: Write>(out: &mut W, cfg: &NetConfig) -> Result<()> {
    out.write_u32::<LittleEndian>(cfg.hidden_size as u32)?;
    out.write_u32::<LittleEndian>(cfg.n_layers as u32)?;
    out.write_u32::<LittleEndian>(cfg.z_embed_dim as u32)?;
    out.write_u8(match cfg.cell {
        CellKind::BiLstm => 0,
        CellKind::BiGru => 1,
    })?;
    out.write_u8(match cfg.precision {
        Precision::F32 => 0,
        Precision::F64 => 1,
    })?;
    out.write_u64::<LittleEndian>(cfg.init_seed)?;
    out.write_u8(cfg.init_scale.is_some() as u8)?;
    out.write_f64::<LittleEndian>(cfg.init_scale.unwrap_or(0.0))?;
    out.write_f64::<LittleEndian>(cfg.z_ref_km)?;
    out.write_f64::<LittleEndian>(cfg.field_scale)?;
    out.write_u64::<LittleEndian>(cfg.max_seq_len as u64)?;
    Ok(())
}

fn read_config<R: Read>(inp: &mut R) -> Result<NetConfig> {
    let hidden_size = inp.read_u32::<LittleEndian>()? as usize;
    let n_layers = inp.read_u32::<LittleEndian>()? as usize;
    let z_embed_dim = inp.read_u32::<LittleEndian>()? as usize;
    let cell = match inp.read_u8()? {
        0 => CellKind::BiLstm,
        1 => CellKind::BiGru,
        c => return Err(Error::Format(format!("unknown cell tag {c}"))),
    };
    let precision = match inp.read_u8()? {
        0 => Precision::F32,
        1 => Precision::F64,
        p => return Err(Error::Format(format!("unknown precision tag {p}"))),
    };
    let init_seed = inp.read_u64::<LittleEndian>()?;
    let has_scale = inp.read_u8()? != 0;
    let scale = inp.read_f64::<LittleEndian>()?;
    let z_ref_km = inp.read_f64::<LittleEndian>()?;
    let field_scale = inp.read_f64::<LittleEndian>()?;
    let max_seq_len = inp.read_u64::<LittleEndian>()? as usize;
    Ok(NetConfig {
        hidden_size,
        n_layers,
        z_embed_dim,
        cell,
        precision,
        init_seed,
        init_scale: has_scale.then_some(scale),
        z_ref_km,
        field_scale,
        max_seq_len,
    })
}

pub fn write_checkpoint<W: Write>(mut out: W, net: &SurrogateNet) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    write_config(&mut out, net.config())?;
    out.write_u32::<LittleEndian>(net.tensors().len() as u32)?;
    for t in net.tensors() {
        out.write_u32::<LittleEndian>(t.name.len() as u32)?;
        out.write_all(t.name.as_bytes())?;
        out.write_u32::<LittleEndian>(t.dims.len() as u32)?;
        for &d in &t.dims {
            out.write_u64::<LittleEndian>(d as u64)?;
        }
        for &v in &net.params()[t.range.clone()] {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

/// Reads a checkpoint. With `expected`, any difference in the stored
/// configuration is rejected.
pub fn read_checkpoint<R: Read>(mut inp: R, expected: Option<&NetConfig>) -> Result<SurrogateNet> {
    let mut magic = [0u8; 4];
    inp.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an FDDN checkpoint".into()));
    }
    let version = inp.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FDDN version {version}")));
    }
    let cfg = read_config(&mut inp)?;
    if let Some(want) = expected {
        if *want != cfg {
            return Err(Error::Format(format!("checkpoint config {cfg:?} does not match {want:?}")));
        }
    }
    let mut net = SurrogateNet::zeroed(cfg)?;
    let n = inp.read_u32::<LittleEndian>()? as usize;
    if n != net.tensors().len() {
        return Err(Error::Format(format!("{n} tensors, expected {}", net.tensors().len())));
    }
    let specs = net.tensors().to_vec();
    for spec in specs {
        let len = inp.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        inp.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if name != spec.name {
            return Err(Error::Format(format!("tensor `{name}` where `{}` was expected", spec.name)));
        }
        let ndims = inp.read_u32::<LittleEndian>()? as usize;
        let dims = (0..ndims).map(|_| inp.read_u64::<LittleEndian>().map(|d| d as usize)).collect::<std::io::Result<Vec<_>>>()?;
        if dims != spec.dims {
            return Err(Error::Format(format!("tensor `{name}` has dims {dims:?}, expected {:?}", spec.dims)));
        }
        for v in &mut net.params_mut()[spec.range.clone()] {
            *v = inp.read_f64::<LittleEndian>()?;
        }
    }
    Ok(net)
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &SurrogateNet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut out, net)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&NetConfig>) -> Result<SurrogateNet> {
    read_checkpoint(BufReader::new(File::open(path)?), expected)
}
