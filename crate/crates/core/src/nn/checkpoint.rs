//! Parameter checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VLNN"  u16 version
//! repeated until EOF:
//!   u16 name length, name bytes (UTF-8)
//!   u8 rank, rank × u32 extents
//!   product(extents) × f32 values
//! ```
//!
//! Values are narrowed to `f32` on write; reading widens them back.

use std::io::{self, Read, Write};

use super::{NnError, Result, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VLNN";
pub const CHECKPOINT_VERSION: u16 = 1;

fn io_err(e: io::Error) -> NnError {
    NnError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<'a, W, I>(mut w: W, blocks: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    for (name, tensor) in blocks {
        let name_len = u16::try_from(name.len())
            .map_err(|_| NnError::Checkpoint(format!("block name too long: {name}")))?;
        let rank = u8::try_from(tensor.rank())
            .map_err(|_| NnError::Checkpoint(format!("rank too large for {name}")))?;
        let mut buf = Vec::with_capacity(4 + name.len() + 4 * tensor.rank() + 4 * tensor.len());
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(rank);
        for &extent in tensor.shape() {
            let e = u32::try_from(extent)
                .map_err(|_| NnError::Checkpoint(format!("extent too large for {name}")))?;
            buf.extend_from_slice(&e.to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(NnError::Checkpoint("truncated block header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(io_err(e)),
        }
    }
    Ok(true)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut header = [0u8; 6];
    r.read_exact(&mut header)
        .map_err(|_| NnError::Checkpoint("file too short for header".into()))?;
    if &header[..4] != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let truncated = |_| NnError::Checkpoint("truncated block".into());
    let mut blocks = Vec::new();
    loop {
        let mut len = [0u8; 2];
        if !read_exact_or_eof(&mut r, &mut len)? {
            break;
        }
        let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| NnError::Checkpoint("block name is not UTF-8".into()))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank).map_err(truncated)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            let mut e = [0u8; 4];
            r.read_exact(&mut e).map_err(truncated)?;
            shape.push(u32::from_le_bytes(e) as usize);
        }
        let count: usize = shape.iter().product();
        let mut raw = vec![0u8; count * 4];
        r.read_exact(&mut raw).map_err(truncated)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        blocks.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(blocks)
}
