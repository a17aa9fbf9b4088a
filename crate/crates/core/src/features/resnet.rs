//! ResNet-18 inference graph with normalization folded into convolution
//! biases: conv7x7/2, maxpool3x3/2, then four stages of two basic blocks.
//!
//! Tensor names: `conv1.{weight,bias}`,
//! `layer{1..4}.{0,1}.conv{1,2}.{weight,bias}` and
//! `layer{2..4}.0.downsample.{weight,bias}`. Weights are
//! `[out, in, k, k]`, biases `[out]`.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xorshift::XorShiftRng;

use super::weights::{Tensor, TensorMap};
use crate::error::{Result, VistaError};

pub const STAGE_WIDTHS: [usize; 4] = [64, 128, 256, 512];
pub const INPUT_CHANNELS: usize = 3;

/// Activation map in channel-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone)]
struct Conv {
    out_c: usize,
    in_c: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    /// `out_c × (in_c·k·k)` row-major.
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Conv {
    fn forward(&self, x: &Activation) -> Activation {
        let k = self.kernel;
        let oh = (x.height + 2 * self.pad - k) / self.stride + 1;
        let ow = (x.width + 2 * self.pad - k) / self.stride + 1;
        let cols_k = self.in_c * k * k;
        let cols_n = oh * ow;

        let mut cols = vec![0.0f32; cols_k * cols_n];
        for c in 0..self.in_c {
            let plane = &x.data[c * x.height * x.width..(c + 1) * x.height * x.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * cols_n..][..cols_n];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= x.height as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < x.width as isize {
                                row[oy * ow + ox] = plane[iy as usize * x.width + ix as usize];
                            }
                        }
                    }
                }
            }
        }

        let mut out = vec![0.0f32; self.out_c * cols_n];
        for (o, b) in self.bias.iter().enumerate() {
            out[o * cols_n..(o + 1) * cols_n].fill(*b);
        }
        // SAFETY: slices are sized m×k, k×n and m×n with the given row-major strides.
        unsafe {
            matrixmultiply::sgemm(
                self.out_c,
                cols_k,
                cols_n,
                1.0,
                self.weight.as_ptr(),
                cols_k as isize,
                1,
                cols.as_ptr(),
                cols_n as isize,
                1,
                1.0,
                out.as_mut_ptr(),
                cols_n as isize,
                1,
            );
        }
        Activation {
            channels: self.out_c,
            height: oh,
            width: ow,
            data: out,
        }
    }
}

fn relu(mut a: Activation) -> Activation {
    a.data.iter_mut().for_each(|v| *v = v.max(0.0));
    a
}

fn max_pool(x: &Activation) -> Activation {
    let (k, stride, pad) = (3usize, 2usize, 1usize);
    let oh = (x.height + 2 * pad - k) / stride + 1;
    let ow = (x.width + 2 * pad - k) / stride + 1;
    let mut data = Vec::with_capacity(x.channels * oh * ow);
    for c in 0..x.channels {
        let plane = &x.data[c * x.height * x.width..];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= x.height as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < x.width as isize {
                            m = m.max(plane[iy as usize * x.width + ix as usize]);
                        }
                    }
                }
                data.push(m);
            }
        }
    }
    Activation {
        channels: x.channels,
        height: oh,
        width: ow,
        data,
    }
}

#[derive(Debug, Clone)]
struct BasicBlock {
    conv1: Conv,
    conv2: Conv,
    downsample: Option<Conv>,
}

impl BasicBlock {
    fn forward(&self, x: &Activation) -> Activation {
        let h = relu(self.conv1.forward(x));
        let mut out = self.conv2.forward(&h);
        match &self.downsample {
            Some(ds) => {
                let skip = ds.forward(x);
                out.data.iter_mut().zip(&skip.data).for_each(|(o, s)| *o += s);
            }
            None => out.data.iter_mut().zip(&x.data).for_each(|(o, s)| *o += s),
        }
        relu(out)
    }
}

/// Declared layout of one convolution in the fixed graph.
#[derive(Debug, Clone)]
pub(crate) struct ConvSlot {
    pub name: String,
    pub out_c: usize,
    pub in_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Every convolution of the graph in canonical order.
pub(crate) fn conv_slots() -> Vec<ConvSlot> {
    let slot = |name: String, out_c, in_c, kernel, stride, pad| ConvSlot {
        name,
        out_c,
        in_c,
        kernel,
        stride,
        pad,
    };
    let mut slots = vec![slot("conv1".into(), 64, INPUT_CHANNELS, 7, 2, 3)];
    let mut in_c = 64;
    for (s, &width) in STAGE_WIDTHS.iter().enumerate() {
        for b in 0..2 {
            let stride = if s > 0 && b == 0 { 2 } else { 1 };
            let prefix = format!("layer{}.{b}", s + 1);
            slots.push(slot(format!("{prefix}.conv1"), width, in_c, 3, stride, 1));
            slots.push(slot(format!("{prefix}.conv2"), width, width, 3, 1, 1));
            if stride != 1 || in_c != width {
                slots.push(slot(format!("{prefix}.downsample"), width, in_c, 1, stride, 0));
            }
            in_c = width;
        }
    }
    slots
}

#[derive(Debug, Clone)]
pub struct ResNet18 {
    stem: Conv,
    stages: Vec<[BasicBlock; 2]>,
}

impl ResNet18 {
    fn assemble(mut convs: std::collections::HashMap<String, Conv>) -> Self {
        let mut take = |name: &str| convs.remove(name).expect("conv slot missing");
        let stem = take("conv1");
        let stages = (1..=4)
            .map(|s| {
                [0, 1].map(|b| {
                    let prefix = format!("layer{s}.{b}");
                    let conv1 = take(&format!("{prefix}.conv1"));
                    let conv2 = take(&format!("{prefix}.conv2"));
                    let downsample = (s > 1 && b == 0).then(|| take(&format!("{prefix}.downsample")));
                    BasicBlock { conv1, conv2, downsample }
                })
            })
            .collect();
        ResNet18 { stem, stages }
    }

    /// He-normal weights, `N(0, sqrt(2 / fan_in))`, zero biases, drawn in
    /// canonical slot order from a xorshift generator seeded with `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = XorShiftRng::seed_from_u64(seed);
        let convs = conv_slots()
            .into_iter()
            .map(|s| {
                let fan_in = s.in_c * s.kernel * s.kernel;
                let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("valid std");
                let weight = (0..s.out_c * fan_in).map(|_| normal.sample(&mut rng)).collect();
                let conv = Conv {
                    out_c: s.out_c,
                    in_c: s.in_c,
                    kernel: s.kernel,
                    stride: s.stride,
                    pad: s.pad,
                    weight,
                    bias: vec![0.0; s.out_c],
                };
                (s.name, conv)
            })
            .collect();
        Self::assemble(convs)
    }

    /// Builds the graph from named tensors, checking every shape against the
    /// declared layout.
    pub fn from_tensors(tensors: &TensorMap) -> Result<Self> {
        let slots = conv_slots();
        let mut expected: std::collections::HashSet<String> = std::collections::HashSet::new();
        let mut convs = std::collections::HashMap::new();
        for s in slots {
            let wname = format!("{}.weight", s.name);
            let bname = format!("{}.bias", s.name);
            let w = tensors.get(&wname).ok_or_else(|| VistaError::Weights {
                tensor: wname.clone(),
                message: "missing tensor".into(),
            })?;
            let want = vec![s.out_c, s.in_c, s.kernel, s.kernel];
            if w.dims != want {
                return Err(VistaError::Weights {
                    tensor: wname,
                    message: format!("geometry mismatch: expected {want:?}, found {:?}", w.dims),
                });
            }
            let b = tensors.get(&bname).ok_or_else(|| VistaError::Weights {
                tensor: bname.clone(),
                message: "missing tensor".into(),
            })?;
            if b.dims != [s.out_c] {
                return Err(VistaError::Weights {
                    tensor: bname,
                    message: format!("geometry mismatch: expected [{}], found {:?}", s.out_c, b.dims),
                });
            }
            if let Some(i) = w.data.iter().chain(&b.data).position(|v| !v.is_finite()) {
                return Err(VistaError::Weights {
                    tensor: if i < w.data.len() { wname } else { bname },
                    message: "non-finite value".into(),
                });
            }
            expected.insert(wname);
            expected.insert(bname);
            convs.insert(
                s.name,
                Conv {
                    out_c: s.out_c,
                    in_c: s.in_c,
                    kernel: s.kernel,
                    stride: s.stride,
                    pad: s.pad,
                    weight: w.data.clone(),
                    bias: b.data.clone(),
                },
            );
        }
        if let Some(extra) = tensors.keys().find(|k| !expected.contains(*k)) {
            return Err(VistaError::Weights {
                tensor: extra.clone(),
                message: "tensor is not part of the graph".into(),
            });
        }
        Ok(Self::assemble(convs))
    }

    /// Named tensors in canonical order, suitable for writing a weight file.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push = |name: &str, c: &Conv| {
            out.push((
                format!("{name}.weight"),
                Tensor {
                    dims: vec![c.out_c, c.in_c, c.kernel, c.kernel],
                    data: c.weight.clone(),
                },
            ));
            out.push((format!("{name}.bias"), Tensor { dims: vec![c.out_c], data: c.bias.clone() }));
        };
        push("conv1", &self.stem);
        for (s, blocks) in self.stages.iter().enumerate() {
            for (b, block) in blocks.iter().enumerate() {
                let prefix = format!("layer{}.{b}", s + 1);
                push(&format!("{prefix}.conv1"), &block.conv1);
                push(&format!("{prefix}.conv2"), &block.conv2);
                if let Some(ds) = &block.downsample {
                    push(&format!("{prefix}.downsample"), ds);
                }
            }
        }
        out
    }

    /// Runs the stem and stages `1..=deepest`, returning each stage's output.
    pub fn forward(&self, input: Activation, deepest: usize) -> Vec<Activation> {
        let mut x = max_pool(&relu(self.stem.forward(&input)));
        let mut outs = Vec::with_capacity(deepest);
        for blocks in self.stages.iter().take(deepest) {
            for block in blocks {
                x = block.forward(&x);
            }
            outs.push(x.clone());
        }
        outs
    }
}
