//! Binary model checkpoints.
//!
//! Layout: one ASCII header line `LCFN1 M N K L PHI PSI\n` followed by the
//! parameters as little-endian f64 in row-major order: `u0`, `v0`, then for
//! each layer `k_user`, `k_item`, `transform`.

use std::io::{BufRead, Read, Write};

use ndarray::{Array1, Array2};

use super::{LayerParams, ModelParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "LCFN1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub num_users: usize,
    pub num_items: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub phi: usize,
    pub psi: usize,
}

fn write_block<'a, W: Write>(out: &mut W, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &ModelParams) -> Result<()> {
    let (phi, psi) = params.passband();
    writeln!(
        out,
        "{CHECKPOINT_MAGIC} {} {} {} {} {phi} {psi}",
        params.num_users(),
        params.num_items(),
        params.embed_dim(),
        params.num_layers()
    )?;
    write_block(&mut out, params.u0.iter())?;
    write_block(&mut out, params.v0.iter())?;
    for layer in &params.layers {
        write_block(&mut out, layer.k_user.iter())?;
        write_block(&mut out, layer.k_item.iter())?;
        write_block(&mut out, layer.transform.iter())?;
    }
    out.flush()?;
    Ok(())
}

fn read_values<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint payload: {e}")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn read_matrix<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>> {
    Ok(Array2::from_shape_vec((rows, cols), read_values(input, rows * cols)?).expect("shape"))
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<(CheckpointHeader, ModelParams)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let mut fields = line.trim_end_matches('\n').split(' ');
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Format(format!("missing {CHECKPOINT_MAGIC} header")));
    }
    let nums: Vec<usize> = fields
        .map(|f| f.parse::<usize>().map_err(|_| Error::Format(format!("bad header field {f:?}"))))
        .collect::<Result<_>>()?;
    let [num_users, num_items, embed_dim, num_layers, phi, psi] = nums[..] else {
        return Err(Error::Format(format!("header needs 6 fields, got {}", nums.len())));
    };
    let header = CheckpointHeader { num_users, num_items, embed_dim, num_layers, phi, psi };

    let u0 = read_matrix(&mut input, num_users, embed_dim)?;
    let v0 = read_matrix(&mut input, num_items, embed_dim)?;
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let k_user = Array1::from(read_values(&mut input, phi)?);
        let k_item = Array1::from(read_values(&mut input, psi)?);
        let transform = read_matrix(&mut input, embed_dim, embed_dim)?;
        layers.push(LayerParams { k_user, k_item, transform });
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", rest.len())));
    }
    Ok((header, ModelParams { u0, v0, layers }))
}
