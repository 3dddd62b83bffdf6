//! The stereo-flow network: a small encoder-decoder with one skip
//! connection per scale and coarse-to-fine residual flow heads.
//!
//! The input is pooled once before the first convolution and twice more
//! inside the encoder (three downsampling stages, bottleneck at 1/8
//! resolution). Every flow head predicts horizontal displacement in
//! full-resolution pixel units; coarser predictions are upsampled and
//! refined residually, and the half-resolution result is bilinearly
//! upsampled so the output grid matches the input grid exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::imagecore::{FlowField, Image};

use super::graph::{Graph, NodeId, TensorData};
use super::{NetError, Result};

/// Input dimensions must be divisible by this.
pub const DOWNSAMPLE_FACTOR: usize = 8;

/// Channel widths of the encoder stages (1/2, 1/4, 1/8 resolution).
const ENC_WIDTHS: [usize; 3] = [12, 16, 24];
/// Channel widths of the decoder stages (1/4, 1/2 resolution).
const DEC_WIDTHS: [usize; 2] = [16, 12];
const LEAKY_SLOPE: f32 = 0.1;

/// One 3x3 convolution layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    /// `[C_out, C_in, 3, 3]`
    pub weight: TensorData,
    /// `[C_out]`
    pub bias: TensorData,
}

/// A flow-prediction network. The architecture is fixed; only the input
/// channel count (1 or 3) varies.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    in_channels: usize,
    layers: Vec<ConvLayer>,
}

/// Layer names in parameter order; pruning tie-breaks follow this order.
fn layer_specs(in_channels: usize) -> Vec<(&'static str, usize, usize)> {
    let [e1, e2, e3] = ENC_WIDTHS;
    let [d2, d1] = DEC_WIDTHS;
    vec![
        ("enc1", in_channels, e1),
        ("enc2", e1, e2),
        ("enc3", e2, e3),
        ("head3", e3, 1),
        ("dec2", e3 + e2 + 1, d2),
        ("head2", d2, 1),
        ("dec1", d2 + e1 + 1, d1),
        ("head1", d1, 1),
    ]
}

impl FlowNetwork {
    /// Fresh network with He-uniform weight init and zero biases;
    /// deterministic for a fixed seed. Flow heads start near zero.
    pub fn new(in_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_specs(in_channels)
            .into_iter()
            .map(|(name, cin, cout)| {
                let fan_in = (cin * 9) as f32;
                let mut bound = (6.0 / fan_in).sqrt();
                if name.starts_with("head") {
                    bound *= 0.1;
                }
                let weight = TensorData::from_vec(
                    &[cout, cin, 3, 3],
                    (0..cout * cin * 9)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                );
                ConvLayer {
                    name: name.to_string(),
                    weight,
                    bias: TensorData::zeros(&[cout]),
                }
            })
            .collect();
        Self {
            in_channels,
            layers,
        }
    }

    /// Rebuild from explicit parameters (checkpoint loading).
    pub fn from_layers(in_channels: usize, layers: Vec<ConvLayer>) -> Result<Self> {
        let specs = layer_specs(in_channels);
        if layers.len() != specs.len() {
            return Err(NetError::StateMismatch {
                expected: specs.len(),
                got: layers.len(),
            });
        }
        for (layer, (name, cin, cout)) in layers.iter().zip(&specs) {
            if layer.name != *name
                || layer.weight.shape() != [*cout, *cin, 3, 3]
                || layer.bias.shape() != [*cout]
            {
                return Err(NetError::ShapeMismatch {
                    op: "from_layers",
                    lhs: layer.weight.shape().to_vec(),
                    rhs: vec![*cout, *cin, 3, 3],
                });
            }
        }
        Ok(Self {
            in_channels,
            layers,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    /// Flat view of all trainable tensors, `[w0, b0, w1, b1, ...]`.
    pub fn param_tensors(&self) -> Vec<&TensorData> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut TensorData> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .flat_map(|l| [format!("{}.weight", l.name), format!("{}.bias", l.name)])
            .collect()
    }

    /// Set every parameter to zero (useful for contract tests).
    pub fn zero_params(&mut self) {
        for t in self.param_tensors_mut() {
            t.data_mut().fill(0.0);
        }
    }

    fn check_divisible(&self, h: usize, w: usize) -> Result<()> {
        if h % DOWNSAMPLE_FACTOR != 0 || w % DOWNSAMPLE_FACTOR != 0 {
            let round_up = |v: usize| v.div_ceil(DOWNSAMPLE_FACTOR) * DOWNSAMPLE_FACTOR;
            return Err(NetError::IndivisibleInput {
                h,
                w,
                factor: DOWNSAMPLE_FACTOR,
                need_h: round_up(h),
                need_w: round_up(w),
            });
        }
        Ok(())
    }

    /// Build the forward graph. `flows[0]` is the full-resolution output;
    /// `flows[1..]` are the half/quarter/eighth-scale predictions, all in
    /// full-resolution pixel units.
    pub fn forward_pass(&self, input: TensorData) -> Result<ForwardPass> {
        if input.shape().len() != 3 || input.shape()[0] != self.in_channels {
            return Err(NetError::ShapeMismatch {
                op: "forward",
                lhs: input.shape().to_vec(),
                rhs: vec![self.in_channels, 0, 0],
            });
        }
        let (h, w) = (input.shape()[1], input.shape()[2]);
        self.check_divisible(h, w)?;

        let mut g = Graph::new();
        let mut param_ids = Vec::with_capacity(self.layers.len() * 2);
        let mut ids = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let wid = g.leaf(layer.weight.clone());
            let bid = g.leaf(layer.bias.clone());
            param_ids.push(wid);
            param_ids.push(bid);
            ids.push((wid, bid));
        }
        let input_id = g.leaf(input);

        let conv = |g: &mut Graph, idx: usize, x: NodeId| -> Result<NodeId> {
            let (wid, bid) = ids[idx];
            g.conv3x3(x, wid, bid)
        };

        // encoder
        let p0 = g.avg_pool2(input_id)?; // H/2
        let e1 = conv(&mut g, 0, p0)?;
        let e1 = g.leaky_relu(e1, LEAKY_SLOPE);
        let p1 = g.avg_pool2(e1)?; // H/4
        let e2 = conv(&mut g, 1, p1)?;
        let e2 = g.leaky_relu(e2, LEAKY_SLOPE);
        let p2 = g.avg_pool2(e2)?; // H/8
        let e3 = conv(&mut g, 2, p2)?;
        let e3 = g.leaky_relu(e3, LEAKY_SLOPE);

        // coarsest flow
        let f3 = conv(&mut g, 3, e3)?;

        // decoder, quarter scale
        let e3_up = g.upsample_nearest2(e3)?;
        let f3_up = g.upsample_nearest2(f3)?;
        let cat2 = g.concat_channels(&[e3_up, e2, f3_up])?;
        let d2 = conv(&mut g, 4, cat2)?;
        let d2 = g.leaky_relu(d2, LEAKY_SLOPE);
        let r2 = conv(&mut g, 5, d2)?;
        let f2 = g.add(r2, f3_up)?;

        // decoder, half scale
        let d2_up = g.upsample_nearest2(d2)?;
        let f2_up = g.upsample_nearest2(f2)?;
        let cat1 = g.concat_channels(&[d2_up, e1, f2_up])?;
        let d1 = conv(&mut g, 6, cat1)?;
        let d1 = g.leaky_relu(d1, LEAKY_SLOPE);
        let r1 = conv(&mut g, 7, d1)?;
        let f1 = g.add(r1, f2_up)?;

        let full = g.upsample_bilinear2(f1)?;

        Ok(ForwardPass {
            graph: g,
            input: input_id,
            param_ids,
            flows: [full, f1, f2, f3],
        })
    }

    /// Predict the horizontal flow field for an image. Deterministic given
    /// the parameters; differentiable end to end through [`forward_pass`].
    pub fn forward(&self, img: &Image) -> Result<FlowField> {
        let pass = self.forward_pass(tensor_from_image(img))?;
        let t = pass.graph.value(pass.flows[0]);
        let (h, w) = (t.shape()[1], t.shape()[2]);
        Ok(FlowField::from_vec(h, w, t.data().to_vec()).expect("shape verified"))
    }
}

/// A built forward graph plus the node ids needed to train or inspect it.
pub struct ForwardPass {
    pub graph: Graph,
    pub input: NodeId,
    /// Aligned with [`FlowNetwork::param_tensors`].
    pub param_ids: Vec<NodeId>,
    /// `[full, half, quarter, eighth]`-scale flows in full-res pixel units.
    pub flows: [NodeId; 4],
}

/// `[C, H, W]` tensor view of an image.
pub fn tensor_from_image(img: &Image) -> TensorData {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![0.0f32; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[ch * h * w + y * w + x] = img.get(y, x, ch);
            }
        }
    }
    TensorData::from_vec(&[c, h, w], data)
}

/// Plain (non-graph) 2x2 average pooling used to build image pyramids.
pub fn pool2_tensor(t: &TensorData) -> TensorData {
    let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let (oh, ow) = (h / 2, w / 2);
    let x = t.data();
    let mut out = vec![0.0f32; c * oh * ow];
    for ci in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let base = ci * h * w + 2 * y * w + 2 * xo;
                out[ci * oh * ow + y * ow + xo] =
                    0.25 * (x[base] + x[base + 1] + x[base + w] + x[base + w + 1]);
            }
        }
    }
    TensorData::from_vec(&[c, oh, ow], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_flow_equals_final_head_bias() {
        let mut net = FlowNetwork::new(3, 1);
        net.zero_params();
        let beta = 0.37f32;
        // head1 is the final prediction layer
        let head1 = net
            .layers_mut()
            .iter_mut()
            .find(|l| l.name == "head1")
            .unwrap();
        head1.bias.data_mut()[0] = beta;
        let img = Image::from_fn(16, 24, 3, |y, x, c| ((y + x + c) % 5) as f32 / 4.0).unwrap();
        let flow = net.forward(&img).unwrap();
        for &v in flow.dx() {
            assert!((v - beta).abs() < 1e-6, "flow {v} vs bias {beta}");
        }
    }

    #[test]
    fn forward_is_deterministic_and_shape_preserving() {
        let net = FlowNetwork::new(3, 42);
        let img = Image::from_fn(16, 32, 3, |y, x, c| ((y * 3 + x * 7 + c) % 11) as f32 / 10.0)
            .unwrap();
        let f1 = net.forward(&img).unwrap();
        let f2 = net.forward(&img).unwrap();
        assert_eq!(f1.dx(), f2.dx());
        assert_eq!((f1.height(), f1.width()), (16, 32));
        let net_again = FlowNetwork::new(3, 42);
        let f3 = net_again.forward(&img).unwrap();
        assert_eq!(f1.dx(), f3.dx());
    }

    #[test]
    fn indivisible_input_rejected_with_padding_hint() {
        let net = FlowNetwork::new(1, 0);
        let img = Image::new(10, 17, 1).unwrap();
        match net.forward(&img) {
            Err(NetError::IndivisibleInput {
                need_h, need_w, ..
            }) => {
                assert_eq!((need_h, need_w), (16, 24));
            }
            other => panic!("expected divisibility error, got {other:?}"),
        }
    }
}
