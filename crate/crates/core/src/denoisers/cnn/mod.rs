//! Learned convolutional denoiser: an encoder/decoder with skip fusion.

mod layers;
mod net;
mod spec;
mod weights;

pub use layers::{ConvGeom, DeconvGeom, FeatureMap};
pub(crate) use net::fingerprint;
pub use net::{backward, forward, forward_taped, Tape};
pub use spec::{Activation, Layer, LayerKind, NetSpec, Role};
pub use weights::{load_weights, read_weights, save_weights, write_weights};

pub(crate) use weights::{read_f64, read_u32, read_u64};

use crate::rng::Rng;

/// He-normal weights (variance 2 / fan-in) and zero biases.
pub fn init_params(spec: &NetSpec, rng: &mut Rng) -> Vec<f64> {
    let mut params = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let std = (2.0 / layer.fan_in() as f64).sqrt();
        for p in &mut params[layer.weight_offset..layer.bias_offset] {
            *p = std * rng.normal();
        }
    }
    params
}
