//! Dense golden model of one layer: convolution with bias, requantization,
//! ReLU and 2x2 max pooling, all in exact fixed-point arithmetic.

use crate::fxp::{mac, relu16, requantize, Fx16, Fx32, QFormat};
use crate::netmodel::{Dims, FeatureMapTensor, FcDescriptor, KernelSet, LayerDescriptor};
use crate::{Error, Result};

/// Accumulator-precision map, laid out like [`FeatureMapTensor`]
/// (channel fastest, then column, then row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccMap {
    pub dims: Dims,
    pub values: Vec<Fx32>,
}

impl AccMap {
    #[inline]
    pub fn get(&self, j: usize, x: usize, y: usize) -> Fx32 {
        self.values[(y * self.dims.width + x) * self.dims.channels + j]
    }
}

/// Zero-padded stride-1 convolution. Each output starts from its bias and
/// accumulates over input channels, then kernel rows, then kernel columns.
pub fn conv2d(input: &FeatureMapTensor, k: &KernelSet, pad: usize) -> Result<AccMap> {
    if input.channels() != k.n_in {
        return Err(Error::Dimension(format!(
            "input has {} channels, kernels expect {}",
            input.channels(),
            k.n_in
        )));
    }
    let (h, w) = (input.height(), input.width());
    let ho = (h + 2 * pad + 1).saturating_sub(k.k);
    let wo = (w + 2 * pad + 1).saturating_sub(k.k);
    if ho == 0 || wo == 0 {
        return Err(Error::Dimension(format!(
            "{h}x{w} input with k={} pad={pad} has no output",
            k.k
        )));
    }
    let dims = Dims::new(k.n_out, ho, wo);
    let mut values = Vec::with_capacity(dims.len());
    for oy in 0..ho {
        for ox in 0..wo {
            for j in 0..k.n_out {
                let mut acc = k.bias[j];
                for i in 0..k.n_in {
                    for ky in 0..k.k {
                        let Some(y) = (oy + ky).checked_sub(pad).filter(|&y| y < h) else {
                            continue;
                        };
                        for kx in 0..k.k {
                            let Some(x) = (ox + kx).checked_sub(pad).filter(|&x| x < w) else {
                                continue;
                            };
                            acc = mac(acc, input.get(i, x, y), k.weight(j, i, ky, kx));
                        }
                    }
                }
                values.push(acc);
            }
        }
    }
    Ok(AccMap { dims, values })
}

pub fn apply_relu(t: &FeatureMapTensor) -> FeatureMapTensor {
    let mut out = t.clone();
    for v in out.values_mut() {
        *v = relu16(*v);
    }
    out
}

/// Non-overlapping 2x2 max pooling; an odd trailing row or column is dropped.
pub fn maxpool2x2(t: &FeatureMapTensor) -> Result<FeatureMapTensor> {
    let dims = Dims::new(t.channels(), t.height() / 2, t.width() / 2);
    FeatureMapTensor::from_fn(dims, t.qformat(), |i, x, y| {
        let (x0, y0) = (2 * x, 2 * y);
        t.get(i, x0, y0)
            .max(t.get(i, x0 + 1, y0))
            .max(t.get(i, x0, y0 + 1))
            .max(t.get(i, x0 + 1, y0 + 1))
    })
}

pub fn requantize_map(acc: &AccMap, in_frac: u32, q: QFormat) -> Result<FeatureMapTensor> {
    let values = acc.values.iter().map(|&a| requantize(a, in_frac, q)).collect();
    FeatureMapTensor::from_stream_order(acc.dims, q, values)
}

pub fn layer_forward(
    input: &FeatureMapTensor,
    layer: &LayerDescriptor,
    k: &KernelSet,
) -> Result<FeatureMapTensor> {
    layer.validate()?;
    layer.check_input(input)?;
    layer.check_kernels(k)?;
    let acc = conv2d(input, k, layer.pad)?;
    let mut out = requantize_map(&acc, layer.acc_frac(), layer.q_out())?;
    if layer.relu {
        out = apply_relu(&out);
    }
    if layer.pool {
        out = maxpool2x2(&out)?;
    }
    Ok(out)
}

/// Fully-connected weights, row-major `[out][in]`, biases at accumulator precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseWeights {
    pub n_out: usize,
    pub n_in: usize,
    pub weights: Vec<Fx16>,
    pub bias: Vec<Fx32>,
}

impl DenseWeights {
    pub fn new(n_out: usize, n_in: usize, weights: Vec<Fx16>, bias: Vec<Fx32>) -> Result<Self> {
        if weights.len() != n_out * n_in || bias.len() != n_out {
            return Err(Error::Dimension(format!(
                "{} weights / {} biases for a {n_out}x{n_in} dense layer",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            n_out,
            n_in,
            weights,
            bias,
        })
    }

    /// Reads an fc weight matrix stored as a 1x1-kernel weight file.
    pub fn from_kernels(k: KernelSet) -> Result<Self> {
        if k.k != 1 {
            return Err(Error::Dimension(format!(
                "dense weights must be stored with k=1, found k={}",
                k.k
            )));
        }
        Self::new(k.n_out, k.n_in, k.weights, k.bias)
    }
}

pub fn dense_forward(
    x: &[Fx16],
    w: &DenseWeights,
    in_frac: u32,
    out_q: QFormat,
    relu: bool,
) -> Result<Vec<Fx16>> {
    if x.len() != w.n_in {
        return Err(Error::Dimension(format!(
            "dense input has {} values, weights expect {}",
            x.len(),
            w.n_in
        )));
    }
    Ok((0..w.n_out)
        .map(|o| {
            let row = &w.weights[o * w.n_in..(o + 1) * w.n_in];
            let acc = row
                .iter()
                .zip(x)
                .fold(w.bias[o], |acc, (&wv, &xv)| mac(acc, xv, wv));
            let v = requantize(acc, in_frac, out_q);
            if relu {
                relu16(v)
            } else {
                v
            }
        })
        .collect())
}

/// Applies an fc tail descriptor to a flattened input vector.
pub fn fc_forward(x: &[Fx16], fc: &FcDescriptor, w: &DenseWeights) -> Result<Vec<Fx16>> {
    if w.n_in != fc.n_in || w.n_out != fc.n_out {
        return Err(Error::Dimension(format!(
            "dense weights {}x{} do not fit fc layer {}->{}",
            w.n_out, w.n_in, fc.n_in, fc.n_out
        )));
    }
    let q = QFormat::new(fc.frac_out)?;
    dense_forward(x, w, fc.frac_in as u32 + fc.frac_w as u32, q, fc.relu)
}
