//! Checkpoint files: a weights file followed by a `UNRT1` section with the
//! stage count, `delta1`, the stage pairs, `eta`, the `Ā` step and the
//! network input scale (all `f64`), and optionally a `UNRA1` section with the
//! optimizer step and full-precision parameters and moments for exact resume.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::adam::AdamState;
use super::net::{NetParams, StageDenoiser, UnrolledNet};
use super::train::TrainState;
use crate::denoisers::cnn::{read_f64, read_u32, read_u64, read_weights, write_weights};
use crate::error::{Error, Result};

const STAGES_MAGIC: &[u8; 5] = b"UNRT1";
const ADAM_MAGIC: &[u8; 5] = b"UNRA1";

/// Contents of a checkpoint file.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: UnrolledNet,
    pub params: NetParams,
    /// Present when the file carries optimizer state.
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn train_state(&self) -> Option<TrainState> {
        self.adam.as_ref().map(|adam| TrainState {
            params: self.params.clone(),
            adam: adam.clone(),
        })
    }
}

fn put_f64s<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(
    w: &mut W,
    net: &UnrolledNet,
    params: &NetParams,
    adam: Option<&AdamState>,
) -> Result<()> {
    let (spec, scale) = match &net.denoiser {
        StageDenoiser::Learned { spec, input_scale } => (spec, *input_scale),
        StageDenoiser::Fixed(_) => {
            return Err(Error::InvalidArgument(
                "only networks with a learned denoiser can be checkpointed".into(),
            ))
        }
    };
    let io = |e: std::io::Error| Error::Malformed(format!("cannot write checkpoint: {e}"));
    write_weights(w, spec, &params.theta).map_err(io)?;
    w.write_all(STAGES_MAGIC).map_err(io)?;
    w.write_all(&(net.stages as u32).to_le_bytes())
        .map_err(io)?;
    let mut head = vec![params.delta1];
    for &(a, b) in &params.stage_weights {
        head.push(a);
        head.push(b);
    }
    head.extend_from_slice(&[net.eta, net.abar_delta, scale]);
    put_f64s(w, &head).map_err(io)?;
    if let Some(adam) = adam {
        w.write_all(ADAM_MAGIC).map_err(io)?;
        w.write_all(&adam.t.to_le_bytes()).map_err(io)?;
        w.write_all(&(params.len() as u64).to_le_bytes())
            .map_err(io)?;
        put_f64s(w, &params.to_flat()).map_err(io)?;
        put_f64s(w, &adam.m).map_err(io)?;
        put_f64s(w, &adam.v).map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let (spec, theta) = read_weights(r)?;
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Malformed("weights file has no stage section".into()))?;
    if &magic != STAGES_MAGIC {
        return Err(Error::Malformed("bad stage section magic".into()));
    }
    let stages = read_u32(r, "stage section")? as usize;
    if stages == 0 || stages > 1000 {
        return Err(Error::Malformed(format!(
            "implausible stage count {stages}"
        )));
    }
    let delta1 = read_f64(r, "stage section")?;
    let mut stage_weights = Vec::with_capacity(stages);
    for _ in 0..stages {
        stage_weights.push((read_f64(r, "stage section")?, read_f64(r, "stage section")?));
    }
    let eta = read_f64(r, "stage section")?;
    let abar_delta = read_f64(r, "stage section")?;
    let input_scale = read_f64(r, "stage section")?;
    let net = UnrolledNet {
        stages,
        eta,
        abar_delta,
        denoiser: StageDenoiser::Learned { spec, input_scale },
    };
    let mut params = NetParams {
        delta1,
        stage_weights,
        theta,
    };
    let mut adam = None;
    let mut more = [0u8; 5];
    match r.read(&mut more[..1]) {
        Ok(0) => {}
        Ok(_) => {
            r.read_exact(&mut more[1..])
                .map_err(|_| Error::Malformed("truncated optimizer section".into()))?;
            if &more != ADAM_MAGIC {
                return Err(Error::Malformed(
                    "unexpected trailing data in checkpoint".into(),
                ));
            }
            let t = read_u64(r, "optimizer section")?;
            let n = read_u64(r, "optimizer section")? as usize;
            if n != params.len() {
                return Err(Error::Malformed(format!(
                    "optimizer section holds {n} parameters, expected {}",
                    params.len()
                )));
            }
            let mut read_vec = || -> Result<Vec<f64>> {
                (0..n).map(|_| read_f64(r, "optimizer section")).collect()
            };
            let flat = read_vec()?;
            let m = read_vec()?;
            let v = read_vec()?;
            params = NetParams::from_flat(stages, &flat)?;
            adam = Some(AdamState { t, m, v });
        }
        Err(e) => return Err(Error::Malformed(format!("cannot read checkpoint: {e}"))),
    }
    net.validate(&params)
        .map_err(|e| Error::Malformed(format!("inconsistent checkpoint: {e}")))?;
    Ok(Checkpoint { net, params, adam })
}

pub fn save_checkpoint(
    path: &Path,
    net: &UnrolledNet,
    params: &NetParams,
    adam: Option<&AdamState>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, net, params, adam)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&buf)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut BufReader::new(file))
}
