//! Forward and reverse passes of the encoder/decoder network.

use super::layers::FeatureMap;
use super::spec::{Activation, Layer, LayerKind, NetSpec};
use crate::error::{Error, Result};
use crate::imaging::Image;

/// Intermediate values recorded by [`forward_taped`], consumed by [`backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    spec: NetSpec,
    height: usize,
    width: usize,
    fingerprint: u64,
    inputs: Vec<FeatureMap>,
    masks: Vec<Option<Vec<bool>>>,
}

impl Tape {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Cheap identity check so a tape is never replayed against other parameters.
pub(crate) fn fingerprint(params: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ params.len() as u64;
    for p in params {
        h ^= p.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3).rotate_left(17);
    }
    h
}

fn check(spec: &NetSpec, params: &[f64], h: usize, w: usize) -> Result<()> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::InvalidArgument(format!(
            "network expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    let d = spec.divisor();
    if h == 0 || w == 0 || h % d != 0 || w % d != 0 {
        return Err(Error::InvalidArgument(format!(
            "network input {h}x{w} must be a positive multiple of {d} in both dimensions"
        )));
    }
    Ok(())
}

struct Recorder {
    inputs: Vec<FeatureMap>,
    masks: Vec<Option<Vec<bool>>>,
}

fn run_layer(
    layer: &Layer,
    params: &[f64],
    x: FeatureMap,
    activation: Option<Activation>,
    rec: &mut Option<Recorder>,
) -> FeatureMap {
    let weight = &params[layer.weight_offset..layer.bias_offset];
    let bias = &params[layer.bias_offset..layer.bias_offset + layer.bias_len];
    let mut y = match layer.kind {
        LayerKind::Conv(g) => g.forward(&x, weight, bias),
        LayerKind::Deconv(g) => g.forward(&x, weight, bias),
    };
    let mask = match activation {
        Some(Activation::Relu) => {
            let m: Vec<bool> = y.data.iter().map(|&v| v > 0.0).collect();
            for (v, &keep) in y.data.iter_mut().zip(&m) {
                if !keep {
                    *v = 0.0;
                }
            }
            Some(m)
        }
        _ => None,
    };
    if let Some(r) = rec {
        r.inputs.push(x);
        r.masks.push(mask);
    }
    y
}

fn run(spec: &NetSpec, params: &[f64], x: &Image, rec: &mut Option<Recorder>) -> Vec<f64> {
    let layers = spec.layers();
    let (l, cpb) = (spec.blocks, spec.convs_per_block);
    let act = Some(spec.activation);
    let (h, w) = x.shape();
    let mut fm = FeatureMap {
        channels: 1,
        height: h,
        width: w,
        data: x.data().to_vec(),
    };
    let mut skips = Vec::with_capacity(l);
    for i in 0..l {
        for j in 0..cpb {
            fm = run_layer(&layers[i * cpb + j], params, fm, act, rec);
        }
        skips.push(fm.clone());
        fm = run_layer(&layers[l * cpb + i], params, fm, None, rec);
    }
    let dec0 = l * cpb + l;
    let deconv0 = dec0 + l * cpb;
    for j in 0..l {
        for m in 0..cpb {
            fm = run_layer(&layers[dec0 + j * cpb + m], params, fm, act, rec);
        }
        fm = run_layer(&layers[deconv0 + j], params, fm, None, rec);
        fm = fm.concat(&skips[l - 1 - j]);
    }
    let out = run_layer(&layers[layers.len() - 1], params, fm, None, rec);
    let mut data = out.data;
    if spec.residual_skip {
        for (o, &xi) in data.iter_mut().zip(x.data()) {
            *o += xi;
        }
    }
    data
}

/// Applies the network to a single-channel image.
pub fn forward(spec: &NetSpec, params: &[f64], x: &Image) -> Result<Image> {
    let (h, w) = x.shape();
    check(spec, params, h, w)?;
    let data = run(spec, params, x, &mut None);
    Ok(Image::from_parts(h, w, data, x.peak()))
}

/// Like [`forward`], also returning the tape needed for [`backward`].
pub fn forward_taped(spec: &NetSpec, params: &[f64], x: &Image) -> Result<(Image, Tape)> {
    let (h, w) = x.shape();
    check(spec, params, h, w)?;
    let mut rec = Some(Recorder {
        inputs: Vec::new(),
        masks: Vec::new(),
    });
    let data = run(spec, params, x, &mut rec);
    let rec = rec.expect("recorder present");
    let tape = Tape {
        spec: *spec,
        height: h,
        width: w,
        fingerprint: fingerprint(params),
        inputs: rec.inputs,
        masks: rec.masks,
    };
    Ok((Image::from_parts(h, w, data, x.peak()), tape))
}

fn back_layer(
    layer: &Layer,
    params: &[f64],
    input: &FeatureMap,
    mask: &Option<Vec<bool>>,
    mut g: FeatureMap,
    grad: &mut [f64],
) -> FeatureMap {
    if let Some(m) = mask {
        for (gv, &keep) in g.data.iter_mut().zip(m) {
            if !keep {
                *gv = 0.0;
            }
        }
    }
    let weight = &params[layer.weight_offset..layer.bias_offset];
    let (gw, gb) = grad[layer.weight_offset..layer.bias_offset + layer.bias_len]
        .split_at_mut(layer.weight_len);
    match layer.kind {
        LayerKind::Conv(geom) => geom.backward(input, weight, &g, gw, gb),
        LayerKind::Deconv(geom) => geom.backward(input, weight, &g, gw, gb),
    }
}

/// Reverse pass: accumulates d(loss)/d(params) into `grad_params` and
/// returns d(loss)/d(input), given `grad_out` = d(loss)/d(output).
pub fn backward(
    spec: &NetSpec,
    params: &[f64],
    tape: &Tape,
    grad_out: &Image,
    grad_params: &mut [f64],
) -> Result<Image> {
    if tape.spec != *spec || tape.fingerprint != fingerprint(params) {
        return Err(Error::StaleTape);
    }
    grad_out.check_shape((tape.height, tape.width))?;
    if grad_params.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "gradient buffer has {} entries, expected {}",
            grad_params.len(),
            params.len()
        )));
    }
    let layers = spec.layers();
    let (l, cpb) = (spec.blocks, spec.convs_per_block);
    let (h, w) = (tape.height, tape.width);
    // Tape entries follow execution order: per encoder block its convs then
    // its pool, per decoder block its convs then its deconv, then output.
    let enc_step = |i: usize, j: usize| i * (cpb + 1) + j;
    let pool_step = |i: usize| i * (cpb + 1) + cpb;
    let dec_base = l * (cpb + 1);
    let dec_step = |j: usize, m: usize| dec_base + j * (cpb + 1) + m;
    let deconv_step = |j: usize| dec_base + j * (cpb + 1) + cpb;
    let out_step = dec_base + l * (cpb + 1);
    let dec0 = l * cpb + l;
    let deconv0 = dec0 + l * cpb;

    let mut back = |layer_idx: usize, step: usize, g: FeatureMap| {
        back_layer(
            &layers[layer_idx],
            params,
            &tape.inputs[step],
            &tape.masks[step],
            g,
            grad_params,
        )
    };

    let g0 = FeatureMap {
        channels: 1,
        height: h,
        width: w,
        data: grad_out.data().to_vec(),
    };
    let mut g = back(layers.len() - 1, out_step, g0);
    let mut skip_grads: Vec<Option<FeatureMap>> = vec![None; l];
    let cd = spec.channels_dec;
    for j in (0..l).rev() {
        let (up, skip) = g.split(cd);
        skip_grads[l - 1 - j] = Some(skip);
        g = back(deconv0 + j, deconv_step(j), up);
        for m in (0..cpb).rev() {
            g = back(dec0 + j * cpb + m, dec_step(j, m), g);
        }
    }
    for i in (0..l).rev() {
        g = back(l * cpb + i, pool_step(i), g);
        let skip = skip_grads[i].take().expect("skip gradient recorded");
        for (a, b) in g.data.iter_mut().zip(&skip.data) {
            *a += b;
        }
        for j in (0..cpb).rev() {
            g = back(i * cpb + j, enc_step(i, j), g);
        }
    }
    debug_assert_eq!(g.channels, 1);
    let mut gx = g.data;
    if spec.residual_skip {
        for (a, b) in gx.iter_mut().zip(grad_out.data()) {
            *a += b;
        }
    }
    Ok(Image::from_parts(h, w, gx, grad_out.peak()))
}
