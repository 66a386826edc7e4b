//! Binary weight container.
//!
//! All integers are little-endian `u32` and all reals little-endian IEEE-754
//! `f64`. Layout, in order:
//!
//! ```text
//! magic        4 bytes  "NCOX"
//! version      u32      1
//! activation   u32      0 identity, 1 relu, 2 leaky_relu, 3 selu
//! batch_norm   u32      0 or 1
//! dropout      f64
//! offset       f64      subtracted from outputs
//! p            u32      input features
//! per feature: name_len u32, name UTF-8 bytes, center f64, scale f64
//! depth        u32      hidden layers
//! widths       u32 x depth
//! per hidden layer (fan_in x width, row-major):
//!   weight f64 x fan_in*width, bias f64 x width,
//!   if batch_norm: gamma, beta, running_mean, running_var (f64 x width each)
//! output       f64 x last width (p when depth = 0)
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::net::{Activation, BatchNorm, Block, NeuralCoxNet};
use super::NeuralCoxModel;
use crate::cohort::{ColumnTransform, Standardization};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NCOX";
pub const VERSION: u32 = 1;
const MAX_LEN: u32 = 1 << 24;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("weight container: {e}"))
}

fn write_f64s<W: Write>(w: &mut W, v: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    v.into_iter().try_for_each(|x| w.write_f64::<LittleEndian>(x))
}

pub fn write_model<W: Write>(w: &mut W, model: &NeuralCoxModel) -> Result<()> {
    let net = &model.net;
    let run = |w: &mut W| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(u32::from(net.activation.code()))?;
        w.write_u32::<LittleEndian>(u32::from(net.batch_norm()))?;
        w.write_f64::<LittleEndian>(net.dropout)?;
        w.write_f64::<LittleEndian>(net.offset)?;
        w.write_u32::<LittleEndian>(model.feature_names.len() as u32)?;
        for (name, t) in model.feature_names.iter().zip(&model.standardization.columns) {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            write_f64s(w, [t.center, t.scale])?;
        }
        w.write_u32::<LittleEndian>(net.blocks.len() as u32)?;
        for b in &net.blocks {
            w.write_u32::<LittleEndian>(b.weight.ncols() as u32)?;
        }
        for b in &net.blocks {
            write_f64s(w, b.weight.iter().copied())?;
            write_f64s(w, b.bias.iter().copied())?;
            if let Some(n) = &b.norm {
                for a in [&n.gamma, &n.beta, &n.running_mean, &n.running_var] {
                    write_f64s(w, a.iter().copied())?;
                }
            }
        }
        write_f64s(w, net.output.iter().copied())
    };
    run(w).map_err(io_err)
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u32::<LittleEndian>().map_err(io_err)?;
    if v > MAX_LEN {
        return Err(Error::Format(format!("implausible length {v} in weight container")));
    }
    Ok(v as usize)
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LittleEndian>().map_err(io_err)).collect()
}

pub fn read_model<R: Read>(r: &mut R) -> Result<NeuralCoxModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a neural Cox weight container".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weight container version {version}")));
    }
    let code = r.read_u32::<LittleEndian>().map_err(io_err)?;
    let activation = u8::try_from(code)
        .ok()
        .and_then(Activation::from_code)
        .ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
    let batch_norm = match r.read_u32::<LittleEndian>().map_err(io_err)? {
        0 => false,
        1 => true,
        v => return Err(Error::Format(format!("batch norm flag must be 0 or 1, got {v}"))),
    };
    let dropout = r.read_f64::<LittleEndian>().map_err(io_err)?;
    let offset = r.read_f64::<LittleEndian>().map_err(io_err)?;
    let p = read_len(r)?;
    let mut feature_names = Vec::with_capacity(p);
    let mut columns = Vec::with_capacity(p);
    for _ in 0..p {
        let len = read_len(r)?;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(io_err)?;
        feature_names.push(String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?);
        let v = read_f64s(r, 2)?;
        columns.push(ColumnTransform { center: v[0], scale: v[1] });
    }
    let depth = read_len(r)?;
    let widths: Vec<usize> = (0..depth).map(|_| read_len(r)).collect::<Result<_>>()?;
    let mut blocks = Vec::with_capacity(depth);
    let mut fan_in = p;
    for &width in &widths {
        let weight = Array2::from_shape_vec((fan_in, width), read_f64s(r, fan_in * width)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias = Array1::from(read_f64s(r, width)?);
        let norm = if batch_norm {
            let mut take = || read_f64s(r, width).map(Array1::from);
            Some(BatchNorm { gamma: take()?, beta: take()?, running_mean: take()?, running_var: take()? })
        } else {
            None
        };
        blocks.push(Block { weight, bias, norm });
        fan_in = width;
    }
    let output = Array1::from(read_f64s(r, fan_in)?);
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io_err)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after weight container", rest.len())));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Format(format!("dropout {dropout} out of range")));
    }
    Ok(NeuralCoxModel {
        feature_names,
        standardization: Standardization { columns },
        net: NeuralCoxNet { activation, dropout, blocks, output, offset },
    })
}
