use super::layers::{ConvGeom, DeconvGeom};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// No nonlinearity; makes the network affine, used for gradient checks.
    Identity,
}

/// Shape of the encoder/decoder denoiser.
///
/// Encoder block `i` runs `convs_per_block` 3x3 convolutions (the last one
/// doubling to `2 * channels_enc`), keeps its output for the skip fusion, and
/// is followed by a 2x2 stride-2 convolution. Decoder block `j` runs the same
/// number of 3x3 convolutions (`channels_dec` wide, the last producing
/// `channels_dec_out`) followed by a 2x2 stride-2 transposed convolution to
/// `channels_dec`; the upsampled map is concatenated with the encoder map of
/// equal resolution and fed to the next decoder block, or, after the last
/// block, to a 3x3 output convolution producing one channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetSpec {
    pub blocks: usize,
    pub convs_per_block: usize,
    pub kernel: usize,
    pub channels_enc: usize,
    pub channels_dec: usize,
    pub channels_dec_out: usize,
    pub residual_skip: bool,
    pub activation: Activation,
}

impl Default for NetSpec {
    /// Desk-scale network.
    fn default() -> Self {
        NetSpec {
            blocks: 2,
            convs_per_block: 2,
            kernel: 3,
            channels_enc: 16,
            channels_dec: 32,
            channels_dec_out: 32,
            residual_skip: true,
            activation: Activation::Relu,
        }
    }
}

impl NetSpec {
    /// Four blocks of four convolutions, 64/128/512 channels.
    pub fn full_scale() -> Self {
        NetSpec {
            blocks: 4,
            convs_per_block: 4,
            kernel: 3,
            channels_enc: 64,
            channels_dec: 128,
            channels_dec_out: 512,
            residual_skip: true,
            activation: Activation::Relu,
        }
    }

    /// Small network for gradient checks and quick tests.
    pub fn tiny() -> Self {
        NetSpec {
            blocks: 1,
            convs_per_block: 2,
            kernel: 3,
            channels_enc: 4,
            channels_dec: 4,
            channels_dec_out: 4,
            residual_skip: true,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("net spec: {msg}")));
        if self.blocks == 0 {
            return bad("at least one block required");
        }
        if self.convs_per_block == 0 {
            return bad("at least one convolution per block required");
        }
        if self.kernel != 3 {
            return bad("kernel must be 3");
        }
        if self.channels_enc == 0 || self.channels_dec == 0 || self.channels_dec_out == 0 {
            return bad("channel counts must be positive");
        }
        Ok(())
    }

    /// Spatial dimensions must be divisible by this.
    pub fn divisor(&self) -> usize {
        1 << self.blocks
    }

    pub fn layers(&self) -> Vec<Layer> {
        let l = self.blocks;
        let cpb = self.convs_per_block;
        let ce = self.channels_enc;
        let (cd, cdo) = (self.channels_dec, self.channels_dec_out);
        let conv3 = |cin, cout| {
            LayerKind::Conv(ConvGeom {
                cin,
                cout,
                k: 3,
                stride: 1,
                pad: 1,
            })
        };
        let mut kinds = Vec::new();
        for i in 0..l {
            for j in 0..cpb {
                let cin = match (i, j) {
                    (0, 0) => 1,
                    (_, 0) => 2 * ce,
                    _ => ce,
                };
                let cout = if j + 1 == cpb { 2 * ce } else { ce };
                kinds.push((Role::Encoder, conv3(cin, cout)));
            }
        }
        for _ in 0..l {
            kinds.push((
                Role::Pool,
                LayerKind::Conv(ConvGeom {
                    cin: 2 * ce,
                    cout: 2 * ce,
                    k: 2,
                    stride: 2,
                    pad: 0,
                }),
            ));
        }
        for j in 0..l {
            for m in 0..cpb {
                let cin = match (j, m) {
                    (0, 0) => 2 * ce,
                    (_, 0) => cd + 2 * ce,
                    _ => cd,
                };
                let cout = if m + 1 == cpb { cdo } else { cd };
                kinds.push((Role::Decoder, conv3(cin, cout)));
            }
        }
        for _ in 0..l {
            kinds.push((
                Role::Deconv,
                LayerKind::Deconv(DeconvGeom { cin: cdo, cout: cd }),
            ));
        }
        kinds.push((Role::Output, conv3(cd + 2 * ce, 1)));

        let mut offset = 0;
        kinds
            .into_iter()
            .map(|(role, kind)| {
                let (wlen, blen) = match kind {
                    LayerKind::Conv(g) => (g.weight_len(), g.cout),
                    LayerKind::Deconv(g) => (g.weight_len(), g.cout),
                };
                let layer = Layer {
                    role,
                    kind,
                    weight_offset: offset,
                    weight_len: wlen,
                    bias_offset: offset + wlen,
                    bias_len: blen,
                };
                offset += wlen + blen;
                layer
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .last()
            .map_or(0, |l| l.bias_offset + l.bias_len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Encoder,
    Pool,
    Decoder,
    Deconv,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv(ConvGeom),
    Deconv(DeconvGeom),
}

/// A layer and the location of its weights and bias in the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub role: Role,
    pub kind: LayerKind,
    pub weight_offset: usize,
    pub weight_len: usize,
    pub bias_offset: usize,
    pub bias_len: usize,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv(g) => g.cin * g.k * g.k,
            LayerKind::Deconv(g) => g.cin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_param_count_by_hand() {
        // enc: 1->4 (36+4), 4->8 (288+8); pool 8->8 2x2 (256+8);
        // dec: 8->4 (288+4), 4->4 (144+4); deconv 4->4 (64+4); out 12->1 (108+1)
        let expected = 40 + 296 + 264 + 292 + 148 + 68 + 109;
        assert_eq!(NetSpec::tiny().param_count(), expected);
    }

    #[test]
    fn layers_are_contiguous() {
        for spec in [NetSpec::default(), NetSpec::full_scale(), NetSpec::tiny()] {
            let mut next = 0;
            for l in spec.layers() {
                assert_eq!(l.weight_offset, next);
                next = l.bias_offset + l.bias_len;
            }
            assert_eq!(next, spec.param_count());
        }
    }

    #[test]
    fn validation() {
        assert!(NetSpec::default().validate().is_ok());
        assert!(NetSpec {
            blocks: 0,
            ..NetSpec::default()
        }
        .validate()
        .is_err());
        assert!(NetSpec {
            kernel: 5,
            ..NetSpec::default()
        }
        .validate()
        .is_err());
    }
}
