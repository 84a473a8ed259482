//! Binary weight files.
//!
//! Layout (little endian): magic `UNRW1`, eight `u32` fields (blocks,
//! convs per block, kernel, encoder channels, decoder channels, decoder
//! output channels, residual flag, activation code), a `u64` parameter count,
//! then the parameters as `f32` in layer order, weights before bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::spec::{Activation, NetSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"UNRW1";

fn malformed(msg: impl Into<String>) -> Error {
    Error::Malformed(msg.into())
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| malformed(format!("truncated {what}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r, what)?))
}

pub fn write_weights<W: Write>(w: &mut W, spec: &NetSpec, params: &[f64]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    let fields = [
        spec.blocks as u32,
        spec.convs_per_block as u32,
        spec.kernel as u32,
        spec.channels_enc as u32,
        spec.channels_dec as u32,
        spec.channels_dec_out as u32,
        spec.residual_skip as u32,
        match spec.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        },
    ];
    for f in fields {
        w.write_all(&f.to_le_bytes())?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for &p in params {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<(NetSpec, Vec<f64>)> {
    let mut magic = [0u8; 5];
    read_exact(r, &mut magic, "weights header")?;
    if &magic != MAGIC {
        return Err(malformed("not a weights file (bad magic)"));
    }
    let mut f = [0usize; 8];
    for v in f.iter_mut() {
        *v = read_u32(r, "weights header")? as usize;
    }
    let activation = match f[7] {
        0 => Activation::Relu,
        1 => Activation::Identity,
        other => return Err(malformed(format!("unknown activation code {other}"))),
    };
    if f[6] > 1 {
        return Err(malformed(format!("bad residual flag {}", f[6])));
    }
    let spec = NetSpec {
        blocks: f[0],
        convs_per_block: f[1],
        kernel: f[2],
        channels_enc: f[3],
        channels_dec: f[4],
        channels_dec_out: f[5],
        residual_skip: f[6] == 1,
        activation,
    };
    spec.validate().map_err(|e| malformed(e.to_string()))?;
    let count = read_u64(r, "weights header")?;
    if count != spec.param_count() as u64 {
        return Err(malformed(format!(
            "parameter count {count} does not match architecture ({})",
            spec.param_count()
        )));
    }
    let mut bytes = vec![0u8; count as usize * 4];
    read_exact(r, &mut bytes, "weights data")?;
    let params = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect::<Vec<_>>();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(malformed("non-finite weight"));
    }
    Ok((spec, params))
}

pub fn save_weights(path: &Path, spec: &NetSpec, params: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_weights(&mut w, spec, params)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads a weights file; trailing data (e.g. a checkpoint section) is ignored.
pub fn load_weights(path: &Path) -> Result<(NetSpec, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights(&mut BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn round_trip_is_f32_exact() {
        let spec = NetSpec::tiny();
        let params = init_params(&spec, &mut Rng::new(4));
        let mut buf = Vec::new();
        write_weights(&mut buf, &spec, &params).unwrap();
        assert_eq!(buf.len(), 5 + 32 + 8 + 4 * params.len());
        let (s2, p2) = read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(s2, spec);
        for (a, b) in params.iter().zip(&p2) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn rejects_corruption() {
        let spec = NetSpec::tiny();
        let params = vec![0.5; spec.param_count()];
        let mut buf = Vec::new();
        write_weights(&mut buf, &spec, &params).unwrap();
        assert!(read_weights(&mut &buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_weights(&mut bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[5] = 0; // zero blocks
        assert!(matches!(
            read_weights(&mut bad.as_slice()),
            Err(Error::Malformed(_))
        ));
    }
}
