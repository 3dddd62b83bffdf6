//! Tape-based reverse-mode differentiation over dense f32 tensors.

use super::{NetError, Result};

/// A dense tensor: shape plus row-major values. Spatial tensors are
/// `[channels, height, width]`; scalars are `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorData {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorData {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f32) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length must match shape"
        );
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interpret as `[C, H, W]`.
    fn chw(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        if self.shape.len() != 3 {
            return Err(NetError::NotSpatial {
                op,
                shape: self.shape.clone(),
            });
        }
        Ok((self.shape[0], self.shape[1], self.shape[2]))
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f32),
    LeakyRelu(NodeId, f32),
    Conv3x3 {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    AvgPool2(NodeId),
    UpNearest2(NodeId),
    UpBilinear2(NodeId),
    ConcatChannels(Vec<NodeId>),
    WarpHorizontal {
        image: NodeId,
        flow: NodeId,
    },
    /// Channel-summed mean absolute error: sum_c mean_{y,x} |a - b|.
    L1Loss(NodeId, NodeId),
    Sum(NodeId),
    Detach(NodeId),
}

struct Node {
    value: TensorData,
    op: Op,
}

/// A single-use computation tape. Build the forward pass, call
/// [`Graph::backward`] on a scalar loss, then read gradients by node id.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: TensorData, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Insert an input or parameter tensor.
    pub fn leaf(&mut self, value: TensorData) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &TensorData {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward pass, if the node was reached.
    pub fn grad(&self, id: NodeId) -> Option<&[f32]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    fn binary_shapes(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.nodes[a.0].value.shape != self.nodes[b.0].value.shape {
            return Err(NetError::ShapeMismatch {
                op,
                lhs: self.nodes[a.0].value.shape.clone(),
                rhs: self.nodes[b.0].value.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shapes("add", a, b)?;
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.nodes[a.0].value.shape.clone();
        Ok(self.push(TensorData::from_vec(&shape, data), Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shapes("sub", a, b)?;
        let data = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.nodes[a.0].value.shape.clone();
        Ok(self.push(TensorData::from_vec(&shape, data), Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, k: f32) -> NodeId {
        let src = &self.nodes[a.0].value;
        let data = src.data.iter().map(|x| x * k).collect();
        let shape = src.shape.clone();
        self.push(TensorData::from_vec(&shape, data), Op::Scale(a, k))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f32) -> NodeId {
        let src = &self.nodes[a.0].value;
        let data = src
            .data
            .iter()
            .map(|&x| if x >= 0.0 { x } else { slope * x })
            .collect();
        let shape = src.shape.clone();
        self.push(TensorData::from_vec(&shape, data), Op::LeakyRelu(a, slope))
    }

    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.clone();
        self.push(v, Op::Detach(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.nodes[a.0].value.data.iter().map(|&v| v as f64).sum();
        self.push(TensorData::scalar(s as f32), Op::Sum(a))
    }

    /// 3x3 convolution, stride 1, zero padding 1 (same spatial size).
    /// `weight` is `[C_out, C_in, 3, 3]`, `bias` is `[C_out]`.
    pub fn conv3x3(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let (cin, h, w) = self.nodes[input.0].value.chw("conv3x3")?;
        let wshape = self.nodes[weight.0].value.shape.clone();
        if wshape.len() != 4 || wshape[1] != cin || wshape[2] != 3 || wshape[3] != 3 {
            return Err(NetError::ShapeMismatch {
                op: "conv3x3.weight",
                lhs: wshape,
                rhs: vec![0, cin, 3, 3],
            });
        }
        let cout = wshape[0];
        if self.nodes[bias.0].value.shape != [cout] {
            return Err(NetError::ShapeMismatch {
                op: "conv3x3.bias",
                lhs: self.nodes[bias.0].value.shape.clone(),
                rhs: vec![cout],
            });
        }
        let x = &self.nodes[input.0].value.data;
        let wdat = &self.nodes[weight.0].value.data;
        let bdat = &self.nodes[bias.0].value.data;
        let mut out = vec![0.0f32; cout * h * w];
        for co in 0..cout {
            let plane = &mut out[co * h * w..(co + 1) * h * w];
            plane.fill(bdat[co]);
            for ci in 0..cin {
                let src = &x[ci * h * w..(ci + 1) * h * w];
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let wv = wdat[((co * cin + ci) * 3 + ky) * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        shifted_saxpy(plane, src, h, w, ky as i64 - 1, kx as i64 - 1, wv);
                    }
                }
            }
        }
        Ok(self.push(
            TensorData::from_vec(&[cout, h, w], out),
            Op::Conv3x3 {
                input,
                weight,
                bias,
            },
        ))
    }

    /// 2x2 average pooling with stride 2.
    pub fn avg_pool2(&mut self, a: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.nodes[a.0].value.chw("avg_pool2")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NetError::OddSpatial {
                op: "avg_pool2",
                h,
                w,
            });
        }
        let (oh, ow) = (h / 2, w / 2);
        let x = &self.nodes[a.0].value.data;
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
        Ok(self.push(TensorData::from_vec(&[c, oh, ow], out), Op::AvgPool2(a)))
    }

    /// 2x nearest-neighbor upsampling.
    pub fn upsample_nearest2(&mut self, a: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.nodes[a.0].value.chw("upsample_nearest2")?;
        let (oh, ow) = (h * 2, w * 2);
        let x = &self.nodes[a.0].value.data;
        let mut out = vec![0.0f32; c * oh * ow];
        for ci in 0..c {
            for y in 0..oh {
                for xo in 0..ow {
                    out[ci * oh * ow + y * ow + xo] = x[ci * h * w + (y / 2) * w + xo / 2];
                }
            }
        }
        Ok(self.push(TensorData::from_vec(&[c, oh, ow], out), Op::UpNearest2(a)))
    }

    /// 2x bilinear upsampling with half-pixel centers and border clamping.
    pub fn upsample_bilinear2(&mut self, a: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.nodes[a.0].value.chw("upsample_bilinear2")?;
        let (oh, ow) = (h * 2, w * 2);
        let x = &self.nodes[a.0].value.data;
        let mut out = vec![0.0f32; c * oh * ow];
        for y in 0..oh {
            let (y0, y1, fy) = up2_taps(y, h);
            for xo in 0..ow {
                let (x0, x1, fx) = up2_taps(xo, w);
                for ci in 0..c {
                    let p = ci * h * w;
                    let v00 = x[p + y0 * w + x0];
                    let v10 = x[p + y0 * w + x1];
                    let v01 = x[p + y1 * w + x0];
                    let v11 = x[p + y1 * w + x1];
                    out[ci * oh * ow + y * ow + xo] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10)
                        + fy * ((1.0 - fx) * v01 + fx * v11);
                }
            }
        }
        Ok(self.push(TensorData::from_vec(&[c, oh, ow], out), Op::UpBilinear2(a)))
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        assert!(!parts.is_empty());
        let (_, h, w) = self.nodes[parts[0].0].value.chw("concat_channels")?;
        let mut ctotal = 0;
        for &p in parts {
            let (c, ph, pw) = self.nodes[p.0].value.chw("concat_channels")?;
            if ph != h || pw != w {
                return Err(NetError::ShapeMismatch {
                    op: "concat_channels",
                    lhs: vec![c, ph, pw],
                    rhs: vec![0, h, w],
                });
            }
            ctotal += c;
        }
        let mut out = Vec::with_capacity(ctotal * h * w);
        for &p in parts {
            out.extend_from_slice(&self.nodes[p.0].value.data);
        }
        Ok(self.push(
            TensorData::from_vec(&[ctotal, h, w], out),
            Op::ConcatChannels(parts.to_vec()),
        ))
    }

    /// Backward horizontal warp, differentiable in both operands:
    /// `out[c](x, y) = image[c](x + flow(x, y), y)` with 1-D bilinear
    /// interpolation along x and border clamping. Gradients with respect to
    /// the flow vanish where the sample clamps.
    pub fn warp_horizontal(&mut self, image: NodeId, flow: NodeId) -> Result<NodeId> {
        let (c, h, w) = self.nodes[image.0].value.chw("warp_horizontal")?;
        let fshape = self.nodes[flow.0].value.shape.clone();
        if fshape != [1, h, w] {
            return Err(NetError::ShapeMismatch {
                op: "warp_horizontal",
                lhs: fshape,
                rhs: vec![1, h, w],
            });
        }
        let img = &self.nodes[image.0].value.data;
        let f = &self.nodes[flow.0].value.data;
        let mut out = vec![0.0f32; c * h * w];
        for y in 0..h {
            for xo in 0..w {
                let xs = xo as f32 + f[y * w + xo];
                let (x0, x1, a) = warp_taps(xs, w);
                for ci in 0..c {
                    let row = ci * h * w + y * w;
                    out[row + xo] = (1.0 - a) * img[row + x0] + a * img[row + x1];
                }
            }
        }
        Ok(self.push(
            TensorData::from_vec(&[c, h, w], out),
            Op::WarpHorizontal { image, flow },
        ))
    }

    /// Channel-summed mean absolute error between two `[C, H, W]` tensors:
    /// `sum_c (1 / (H W)) sum_{y,x} |a - b|`. Returns a scalar node.
    pub fn l1_loss(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shapes("l1_loss", a, b)?;
        let (_, h, w) = self.nodes[a.0].value.chw("l1_loss")?;
        let norm = 1.0 / (h * w) as f64;
        let acc: f64 = self.nodes[a.0]
            .value
            .data
            .iter()
            .zip(&self.nodes[b.0].value.data)
            .map(|(x, y)| (x - y).abs() as f64)
            .sum();
        Ok(self.push(TensorData::scalar((acc * norm) as f32), Op::L1Loss(a, b)))
    }

    /// Reverse sweep from a scalar loss; gradients accumulate densely into
    /// every reachable node and stay readable until the next backward call.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.data.len() != 1 {
            return Err(NetError::NonScalarLoss(
                self.nodes[loss.0].value.shape.clone(),
            ));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.accumulate_parents(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn accumulate_parents(
        &self,
        id: usize,
        g: &[f32],
        grads: &mut [Option<Vec<f32>>],
    ) -> Result<()> {
        let mut bump = |node: NodeId, f: &mut dyn FnMut(&mut [f32])| {
            let slot = &mut grads[node.0];
            let buf = slot.get_or_insert_with(|| vec![0.0; self.nodes[node.0].value.data.len()]);
            f(buf);
        };
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                bump(*a, &mut |buf| {
                    for (o, gi) in buf.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
                bump(*b, &mut |buf| {
                    for (o, gi) in buf.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
            }
            Op::Sub(a, b) => {
                bump(*a, &mut |buf| {
                    for (o, gi) in buf.iter_mut().zip(g) {
                        *o += gi;
                    }
                });
                bump(*b, &mut |buf| {
                    for (o, gi) in buf.iter_mut().zip(g) {
                        *o -= gi;
                    }
                });
            }
            Op::Scale(a, k) => {
                let k = *k;
                bump(*a, &mut |buf| {
                    for (o, gi) in buf.iter_mut().zip(g) {
                        *o += k * gi;
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let slope = *slope;
                let x = &self.nodes[a.0].value.data;
                bump(*a, &mut |buf| {
                    for i in 0..buf.len() {
                        buf[i] += if x[i] >= 0.0 { g[i] } else { slope * g[i] };
                    }
                });
            }
            Op::Detach(_) => {}
            Op::Sum(a) => {
                bump(*a, &mut |buf| {
                    for o in buf.iter_mut() {
                        *o += g[0];
                    }
                });
            }
            Op::Conv3x3 {
                input,
                weight,
                bias,
            } => self.conv_backward(*input, *weight, *bias, id, g, grads),
            Op::AvgPool2(a) => {
                let (c, h, w) = self.nodes[a.0].value.chw("avg_pool2").unwrap();
                let (oh, ow) = (h / 2, w / 2);
                bump(*a, &mut |buf| {
                    for ci in 0..c {
                        for y in 0..oh {
                            for xo in 0..ow {
                                let gv = 0.25 * g[ci * oh * ow + y * ow + xo];
                                let base = ci * h * w + 2 * y * w + 2 * xo;
                                buf[base] += gv;
                                buf[base + 1] += gv;
                                buf[base + w] += gv;
                                buf[base + w + 1] += gv;
                            }
                        }
                    }
                });
            }
            Op::UpNearest2(a) => {
                let (c, h, w) = self.nodes[a.0].value.chw("upsample_nearest2").unwrap();
                let (oh, ow) = (h * 2, w * 2);
                bump(*a, &mut |buf| {
                    for ci in 0..c {
                        for y in 0..oh {
                            for xo in 0..ow {
                                buf[ci * h * w + (y / 2) * w + xo / 2] +=
                                    g[ci * oh * ow + y * ow + xo];
                            }
                        }
                    }
                });
            }
            Op::UpBilinear2(a) => {
                let (c, h, w) = self.nodes[a.0].value.chw("upsample_bilinear2").unwrap();
                let (oh, ow) = (h * 2, w * 2);
                bump(*a, &mut |buf| {
                    for y in 0..oh {
                        let (y0, y1, fy) = up2_taps(y, h);
                        for xo in 0..ow {
                            let (x0, x1, fx) = up2_taps(xo, w);
                            for ci in 0..c {
                                let gv = g[ci * oh * ow + y * ow + xo];
                                let p = ci * h * w;
                                buf[p + y0 * w + x0] += (1.0 - fy) * (1.0 - fx) * gv;
                                buf[p + y0 * w + x1] += (1.0 - fy) * fx * gv;
                                buf[p + y1 * w + x0] += fy * (1.0 - fx) * gv;
                                buf[p + y1 * w + x1] += fy * fx * gv;
                            }
                        }
                    }
                });
            }
            Op::ConcatChannels(parts) => {
                let mut offset = 0usize;
                for &p in parts {
                    let len = self.nodes[p.0].value.data.len();
                    let gslice = &g[offset..offset + len];
                    bump(p, &mut |buf| {
                        for (o, gi) in buf.iter_mut().zip(gslice) {
                            *o += gi;
                        }
                    });
                    offset += len;
                }
            }
            Op::WarpHorizontal { image, flow } => {
                let (c, h, w) = self.nodes[image.0].value.chw("warp_horizontal").unwrap();
                let img = &self.nodes[image.0].value.data;
                let f = &self.nodes[flow.0].value.data;
                // image gradient
                bump(*image, &mut |buf| {
                    for y in 0..h {
                        for xo in 0..w {
                            let xs = xo as f32 + f[y * w + xo];
                            let (x0, x1, a) = warp_taps(xs, w);
                            for ci in 0..c {
                                let row = ci * h * w + y * w;
                                let gv = g[row + xo];
                                buf[row + x0] += (1.0 - a) * gv;
                                buf[row + x1] += a * gv;
                            }
                        }
                    }
                });
                // flow gradient: d out / d flow = I[x1] - I[x0], zero when clamped
                bump(*flow, &mut |buf| {
                    for y in 0..h {
                        for xo in 0..w {
                            let xs = xo as f32 + f[y * w + xo];
                            if xs <= 0.0 || xs >= (w - 1) as f32 {
                                continue;
                            }
                            let (x0, x1, _) = warp_taps(xs, w);
                            let mut acc = 0.0f32;
                            for ci in 0..c {
                                let row = ci * h * w + y * w;
                                acc += g[row + xo] * (img[row + x1] - img[row + x0]);
                            }
                            buf[y * w + xo] += acc;
                        }
                    }
                });
            }
            Op::L1Loss(a, b) => {
                let (_, h, w) = self.nodes[a.0].value.chw("l1_loss").unwrap();
                let norm = g[0] / (h * w) as f32;
                let xa = &self.nodes[a.0].value.data;
                let xb = &self.nodes[b.0].value.data;
                bump(*a, &mut |buf| {
                    for i in 0..buf.len() {
                        buf[i] += norm * (xa[i] - xb[i]).signum_zero();
                    }
                });
                bump(*b, &mut |buf| {
                    for i in 0..buf.len() {
                        buf[i] -= norm * (xa[i] - xb[i]).signum_zero();
                    }
                });
            }
        }
        Ok(())
    }

    fn conv_backward(
        &self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        out_id: usize,
        g: &[f32],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let (cin, h, w) = self.nodes[input.0].value.chw("conv3x3").unwrap();
        let cout = self.nodes[weight.0].value.shape[0];
        let x = &self.nodes[input.0].value.data;
        let wdat = &self.nodes[weight.0].value.data;
        let _ = &self.nodes[out_id];

        // d bias
        {
            let slot = &mut grads[bias.0];
            let buf = slot.get_or_insert_with(|| vec![0.0; cout]);
            for co in 0..cout {
                let gp = &g[co * h * w..(co + 1) * h * w];
                buf[co] += gp.iter().sum::<f32>();
            }
        }
        // d weight: correlation of input with the output gradient
        {
            let slot = &mut grads[weight.0];
            let buf = slot.get_or_insert_with(|| vec![0.0; cout * cin * 9]);
            for co in 0..cout {
                let gp = &g[co * h * w..(co + 1) * h * w];
                for ci in 0..cin {
                    let src = &x[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            buf[((co * cin + ci) * 3 + ky) * 3 + kx] +=
                                shifted_dot(gp, src, h, w, ky as i64 - 1, kx as i64 - 1);
                        }
                    }
                }
            }
        }
        // d input: convolution of the output gradient with the flipped kernel
        {
            let slot = &mut grads[input.0];
            let buf = slot.get_or_insert_with(|| vec![0.0; cin * h * w]);
            for co in 0..cout {
                let gp = &g[co * h * w..(co + 1) * h * w];
                for ci in 0..cin {
                    let dst = &mut buf[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let wv = wdat[((co * cin + ci) * 3 + ky) * 3 + kx];
                            if wv == 0.0 {
                                continue;
                            }
                            shifted_saxpy(dst, gp, h, w, 1 - ky as i64, 1 - kx as i64, wv);
                        }
                    }
                }
            }
        }
    }
}

trait SignumZero {
    fn signum_zero(self) -> f32;
}

impl SignumZero for f32 {
    /// signum with `signum_zero(0) = 0` (the L1 subgradient choice).
    fn signum_zero(self) -> f32 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// `dst[y][x] += k * src[y + dy][x + dx]` over the in-bounds region.
fn shifted_saxpy(dst: &mut [f32], src: &[f32], h: usize, w: usize, dy: i64, dx: i64, k: f32) {
    let y_lo = (-dy).max(0) as usize;
    let y_hi = (h as i64 - dy).min(h as i64) as usize;
    let x_lo = (-dx).max(0) as usize;
    let x_hi = (w as i64 - dx).min(w as i64) as usize;
    for y in y_lo..y_hi {
        let sy = (y as i64 + dy) as usize;
        let d = &mut dst[y * w + x_lo..y * w + x_hi];
        let s = &src[sy * w + (x_lo as i64 + dx) as usize..sy * w + (x_hi as i64 + dx) as usize];
        for (o, v) in d.iter_mut().zip(s) {
            *o += k * v;
        }
    }
}

/// `sum_{y,x} a[y][x] * b[y + dy][x + dx]` over the in-bounds region.
fn shifted_dot(a: &[f32], b: &[f32], h: usize, w: usize, dy: i64, dx: i64) -> f32 {
    let y_lo = (-dy).max(0) as usize;
    let y_hi = (h as i64 - dy).min(h as i64) as usize;
    let x_lo = (-dx).max(0) as usize;
    let x_hi = (w as i64 - dx).min(w as i64) as usize;
    let mut acc = 0.0f32;
    for y in y_lo..y_hi {
        let sy = (y as i64 + dy) as usize;
        let pa = &a[y * w + x_lo..y * w + x_hi];
        let pb = &b[sy * w + (x_lo as i64 + dx) as usize..sy * w + (x_hi as i64 + dx) as usize];
        acc += pa.iter().zip(pb).map(|(x, y)| x * y).sum::<f32>();
    }
    acc
}

/// Source taps for 2x bilinear upsampling with half-pixel centers.
fn up2_taps(o: usize, src_len: usize) -> (usize, usize, f32) {
    let s = (o as f32 + 0.5) / 2.0 - 0.5;
    let sc = s.clamp(0.0, (src_len - 1) as f32);
    let i0 = sc.floor() as usize;
    let f = sc - i0 as f32;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, f)
}

/// Clamped 1-D bilinear taps for horizontal warping.
fn warp_taps(xs: f32, w: usize) -> (usize, usize, f32) {
    let xc = xs.clamp(0.0, (w - 1) as f32);
    let x0 = xc.floor() as usize;
    let a = xc - x0 as f32;
    let x1 = (x0 + 1).min(w - 1);
    (x0, x1, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_leaf_gives_unit_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(TensorData::from_vec(&[1, 2, 3], vec![0.5; 6]));
        let s = g.sum(a);
        g.backward(s).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn detached_branch_contributes_zero_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(TensorData::from_vec(&[1, 1, 4], vec![1.0, -2.0, 3.0, -4.0]));
        let d = g.detach(a);
        let direct = g.sum(a);
        let stopped = g.sum(d);
        let both = g.add(direct, stopped).unwrap();
        g.backward(both).unwrap();
        // only the direct path contributes
        assert_eq!(g.grad(a).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let a = g.leaf(TensorData::from_vec(&[1, 1, 2], vec![1.0, 2.0]));
        assert!(matches!(g.backward(a), Err(NetError::NonScalarLoss(_))));
    }

    #[test]
    fn warp_zero_flow_identity_and_shift_matches() {
        let mut g = Graph::new();
        let img = g.leaf(TensorData::from_vec(
            &[1, 1, 5],
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
        ));
        let flow = g.leaf(TensorData::from_vec(&[1, 1, 5], vec![0.5; 5]));
        let out = g.warp_horizontal(img, flow).unwrap();
        let got = g.value(out).data();
        for (i, e) in [0.125, 0.375, 0.625, 0.875, 1.0].iter().enumerate() {
            assert!((got[i] - e).abs() < 1e-6);
        }
    }

    #[test]
    fn l1_loss_matches_channel_summed_mean() {
        let mut g = Graph::new();
        let a = g.leaf(TensorData::from_vec(&[2, 1, 2], vec![0.0, 1.0, 2.0, 3.0]));
        let b = g.leaf(TensorData::from_vec(&[2, 1, 2], vec![1.0, 1.0, 0.0, 0.0]));
        let l = g.l1_loss(a, b).unwrap();
        // channel 0: (1 + 0)/2 = 0.5; channel 1: (2 + 3)/2 = 2.5; sum = 3.0
        assert!((g.value(l).data()[0] - 3.0).abs() < 1e-6);
    }
}
