//! Tensors, kernels, layer/network descriptors and their file formats.
//!
//! Pixels are addressed as `p(i, x, y)`: channel `i`, column `x`, row `y`. The
//! canonical stream order walks channels fastest, then columns, then rows from
//! the top, and [`FeatureMapTensor`] stores its values in exactly that order.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fxp::{Fx16, Fx32, QFormat};
use crate::{Error, Result};

pub const MAX_CHANNELS: usize = 1024;
pub const MAX_ROWS: usize = 512;
pub const MAX_COLS: usize = 512;
pub const MAX_KERNEL: usize = 7;
pub const MAX_PAD: usize = 3;

const TENSOR_MAGIC: &[u8; 4] = b"NHT1";
const WEIGHTS_MAGIC: &[u8; 4] = b"NHW1";

/// Channel count and spatial extent of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels in one image row across all channels.
    pub fn row_len(&self) -> usize {
        self.channels * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.channels > MAX_CHANNELS {
            return Err(Error::Limit(format!(
                "{} channels outside 1..={MAX_CHANNELS}",
                self.channels
            )));
        }
        if self.height == 0 || self.height > MAX_ROWS {
            return Err(Error::Limit(format!(
                "height {} outside 1..={MAX_ROWS}",
                self.height
            )));
        }
        if self.width == 0 || self.width > MAX_COLS {
            return Err(Error::Limit(format!(
                "width {} outside 1..={MAX_COLS}",
                self.width
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMapTensor {
    dims: Dims,
    q: QFormat,
    values: Vec<Fx16>,
}

impl FeatureMapTensor {
    pub fn zeros(dims: Dims, q: QFormat) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims,
            q,
            values: vec![Fx16::ZERO; dims.len()],
        })
    }

    /// Builds a tensor from values already in canonical stream order.
    pub fn from_stream_order(dims: Dims, q: QFormat, values: Vec<Fx16>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {dims} tensor",
                values.len()
            )));
        }
        Ok(Self { dims, q, values })
    }

    pub fn from_fn(
        dims: Dims,
        q: QFormat,
        mut f: impl FnMut(usize, usize, usize) -> Fx16,
    ) -> Result<Self> {
        let mut t = Self::zeros(dims, q)?;
        for y in 0..dims.height {
            for x in 0..dims.width {
                for i in 0..dims.channels {
                    let idx = t.index(i, x, y);
                    t.values[idx] = f(i, x, y);
                }
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn qformat(&self) -> QFormat {
        self.q
    }

    pub fn channels(&self) -> usize {
        self.dims.channels
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    #[inline]
    pub fn index(&self, i: usize, x: usize, y: usize) -> usize {
        (y * self.dims.width + x) * self.dims.channels + i
    }

    #[inline]
    pub fn get(&self, i: usize, x: usize, y: usize) -> Fx16 {
        self.values[self.index(i, x, y)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, x: usize, y: usize, v: Fx16) {
        let idx = self.index(i, x, y);
        self.values[idx] = v;
    }

    /// Values in canonical stream order.
    pub fn values(&self) -> &[Fx16] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Fx16] {
        &mut self.values
    }

    /// One image row (all columns, all channels) in stream order.
    pub fn row(&self, y: usize) -> &[Fx16] {
        let n = self.dims.row_len();
        &self.values[y * n..(y + 1) * n]
    }

    pub fn stream_order_iter(&self) -> StreamOrderIter<'_> {
        StreamOrderIter { t: self, pos: 0 }
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_zero()).count()
    }

    /// Fraction of zero-valued pixels.
    pub fn sparsity(&self) -> f64 {
        let total = self.values.len();
        (total - self.nonzero_count()) as f64 / total as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut bytes.as_slice())
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        write_dims_header(w, self.dims, self.q)?;
        let mut buf = Vec::with_capacity(self.values.len() * 2);
        for v in &self.values {
            buf.extend_from_slice(&v.0.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, TENSOR_MAGIC, "tensor file", "NHT1")?;
        let (dims, q) = read_dims_header(r)?;
        let mut buf = vec![0u8; dims.len() * 2];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Parse("tensor file truncated".into()))?;
        let values = buf
            .chunks_exact(2)
            .map(|c| Fx16(i16::from_le_bytes([c[0], c[1]])))
            .collect();
        Self::from_stream_order(dims, q, values)
    }
}

pub(crate) fn write_dims_header(w: &mut impl Write, dims: Dims, q: QFormat) -> std::io::Result<()> {
    w.write_all(&(dims.channels as u16).to_le_bytes())?;
    w.write_all(&(dims.height as u16).to_le_bytes())?;
    w.write_all(&(dims.width as u16).to_le_bytes())?;
    w.write_all(&[q.frac_bits()])
}

pub(crate) fn read_dims_header(r: &mut impl Read) -> Result<(Dims, QFormat)> {
    let mut hdr = [0u8; 7];
    r.read_exact(&mut hdr)
        .map_err(|_| Error::Parse("header truncated".into()))?;
    let c = u16::from_le_bytes([hdr[0], hdr[1]]) as usize;
    let h = u16::from_le_bytes([hdr[2], hdr[3]]) as usize;
    let w = u16::from_le_bytes([hdr[4], hdr[5]]) as usize;
    let dims = Dims::new(c, h, w);
    dims.validate()?;
    Ok((dims, QFormat::new(hdr[6])?))
}

pub(crate) fn expect_magic(
    r: &mut impl Read,
    magic: &[u8; 4],
    what: &'static str,
    expected: &'static str,
) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)
        .map_err(|_| Error::BadMagic { what, expected })?;
    if &m != magic {
        return Err(Error::BadMagic { what, expected });
    }
    Ok(())
}

/// A pixel with its coordinates, as produced by [`StreamOrderIter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pixel {
    pub channel: usize,
    pub x: usize,
    pub y: usize,
    pub value: Fx16,
}

pub struct StreamOrderIter<'a> {
    t: &'a FeatureMapTensor,
    pos: usize,
}

impl Iterator for StreamOrderIter<'_> {
    type Item = Pixel;

    fn next(&mut self) -> Option<Pixel> {
        let value = *self.t.values.get(self.pos)?;
        let d = self.t.dims;
        let channel = self.pos % d.channels;
        let col = self.pos / d.channels;
        let p = Pixel {
            channel,
            x: col % d.width,
            y: col / d.width,
            value,
        };
        self.pos += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.t.values.len() - self.pos;
        (n, Some(n))
    }
}

impl ExactSizeIterator for StreamOrderIter<'_> {}

/// Convolution kernels of one layer plus the per-output-channel bias.
///
/// Biases are stored in accumulator precision, i.e. with
/// `frac_in + frac_w` fractional bits of the layer that uses them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSet {
    pub n_out: usize,
    pub n_in: usize,
    pub k: usize,
    pub q: QFormat,
    /// Laid out `[j][i][row][col]`.
    pub weights: Vec<Fx16>,
    pub bias: Vec<Fx32>,
}

impl KernelSet {
    pub fn new(
        n_out: usize,
        n_in: usize,
        k: usize,
        q: QFormat,
        weights: Vec<Fx16>,
        bias: Vec<Fx32>,
    ) -> Result<Self> {
        if k == 0 || k > MAX_KERNEL {
            return Err(Error::Limit(format!("kernel size {k} outside 1..={MAX_KERNEL}")));
        }
        if n_out == 0 || n_in == 0 || n_out > MAX_CHANNELS || n_in > MAX_CHANNELS {
            return Err(Error::Limit(format!("kernel set {n_out}x{n_in} out of range")));
        }
        if weights.len() != n_out * n_in * k * k {
            return Err(Error::Dimension(format!(
                "{} weights for {n_out}x{n_in}x{k}x{k}",
                weights.len()
            )));
        }
        if bias.len() != n_out {
            return Err(Error::Dimension(format!(
                "{} biases for {n_out} output channels",
                bias.len()
            )));
        }
        Ok(Self {
            n_out,
            n_in,
            k,
            q,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn weight(&self, j: usize, i: usize, ky: usize, kx: usize) -> Fx16 {
        self.weights[((j * self.n_in + i) * self.k + ky) * self.k + kx]
    }

    /// Kernel values feeding one output channel.
    pub fn footprint(&self) -> usize {
        self.n_in * self.k * self.k
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(WEIGHTS_MAGIC)?;
        for v in [self.n_out, self.n_in, self.k] {
            w.write_all(&(v as u16).to_le_bytes())?;
        }
        w.write_all(&[self.q.frac_bits()])?;
        let mut buf = Vec::with_capacity(self.weights.len() * 2 + self.bias.len() * 4);
        for v in &self.weights {
            buf.extend_from_slice(&v.0.to_le_bytes());
        }
        for b in &self.bias {
            buf.extend_from_slice(&b.0.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, WEIGHTS_MAGIC, "weight file", "NHW1")?;
        let mut hdr = [0u8; 7];
        r.read_exact(&mut hdr)
            .map_err(|_| Error::Parse("weight header truncated".into()))?;
        let n_out = u16::from_le_bytes([hdr[0], hdr[1]]) as usize;
        let n_in = u16::from_le_bytes([hdr[2], hdr[3]]) as usize;
        let k = u16::from_le_bytes([hdr[4], hdr[5]]) as usize;
        let q = QFormat::new(hdr[6])?;
        let mut wbuf = vec![0u8; n_out * n_in * k * k * 2];
        r.read_exact(&mut wbuf)
            .map_err(|_| Error::Parse("weight values truncated".into()))?;
        let mut bbuf = vec![0u8; n_out * 4];
        r.read_exact(&mut bbuf)
            .map_err(|_| Error::Parse("bias values truncated".into()))?;
        let weights = wbuf
            .chunks_exact(2)
            .map(|c| Fx16(i16::from_le_bytes([c[0], c[1]])))
            .collect();
        let bias = bbuf
            .chunks_exact(4)
            .map(|c| Fx32(i32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Self::new(n_out, n_in, k, q, weights, bias)
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<KernelSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    KernelSet::read_from(&mut bytes.as_slice())
}

fn default_true() -> bool {
    true
}

fn default_frac() -> u8 {
    8
}

/// Shape and flags of one convolutional stage. Stride is always 1; pooling,
/// when enabled, is 2x2 with stride 2 and drops a trailing odd row/column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub n_in: usize,
    pub n_out: usize,
    pub k: usize,
    pub h: usize,
    pub w: usize,
    #[serde(default)]
    pub pad: usize,
    #[serde(default = "default_true")]
    pub relu: bool,
    #[serde(default)]
    pub pool: bool,
    #[serde(default = "default_true")]
    pub encode: bool,
    #[serde(default = "default_frac")]
    pub frac_in: u8,
    #[serde(default = "default_frac")]
    pub frac_w: u8,
    #[serde(default = "default_frac")]
    pub frac_out: u8,
}

impl LayerDescriptor {
    /// A layer with ReLU and encoding on, no pooling, no padding and Q8 everywhere.
    pub fn new(n_in: usize, n_out: usize, k: usize, h: usize, w: usize) -> Self {
        Self {
            n_in,
            n_out,
            k,
            h,
            w,
            pad: 0,
            relu: true,
            pool: false,
            encode: true,
            frac_in: 8,
            frac_w: 8,
            frac_out: 8,
        }
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }

    pub fn with_pool(mut self, pool: bool) -> Self {
        self.pool = pool;
        self
    }

    pub fn with_relu(mut self, relu: bool) -> Self {
        self.relu = relu;
        self
    }

    pub fn with_encode(mut self, encode: bool) -> Self {
        self.encode = encode;
        self
    }

    pub fn with_fracs(mut self, frac_in: u8, frac_w: u8, frac_out: u8) -> Self {
        self.frac_in = frac_in;
        self.frac_w = frac_w;
        self.frac_out = frac_out;
        self
    }

    pub fn input_dims(&self) -> Dims {
        Dims::new(self.n_in, self.h, self.w)
    }

    /// Convolution output rows/columns before pooling.
    pub fn conv_out_hw(&self) -> (usize, usize) {
        let span = |d: usize| (d + 2 * self.pad + 1).saturating_sub(self.k);
        (span(self.h), span(self.w))
    }

    pub fn output_dims(&self) -> Dims {
        let (h, w) = self.conv_out_hw();
        if self.pool {
            Dims::new(self.n_out, h / 2, w / 2)
        } else {
            Dims::new(self.n_out, h, w)
        }
    }

    pub fn q_in(&self) -> QFormat {
        QFormat::new(self.frac_in).expect("validated")
    }

    pub fn q_w(&self) -> QFormat {
        QFormat::new(self.frac_w).expect("validated")
    }

    pub fn q_out(&self) -> QFormat {
        QFormat::new(self.frac_out).expect("validated")
    }

    /// Fractional bits of the accumulators (and of the stored biases).
    pub fn acc_frac(&self) -> u32 {
        self.frac_in as u32 + self.frac_w as u32
    }

    /// Multiply-accumulates of the dense workload (zeros and padding taps included).
    pub fn dense_macs(&self) -> u64 {
        let (h, w) = self.conv_out_hw();
        (h * w) as u64 * (self.n_in * self.n_out * self.k * self.k) as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.input_dims().validate()?;
        if self.n_out == 0 || self.n_out > MAX_CHANNELS {
            return Err(Error::Limit(format!(
                "{} output channels outside 1..={MAX_CHANNELS}",
                self.n_out
            )));
        }
        if self.k == 0 || self.k > MAX_KERNEL {
            return Err(Error::Limit(format!(
                "kernel size {} outside 1..={MAX_KERNEL}",
                self.k
            )));
        }
        if self.pad > MAX_PAD {
            return Err(Error::Limit(format!(
                "padding {} exceeds {MAX_PAD}",
                self.pad
            )));
        }
        for f in [self.frac_in, self.frac_w, self.frac_out] {
            QFormat::new(f)?;
        }
        let (h, w) = self.conv_out_hw();
        if h == 0 || w == 0 {
            return Err(Error::Dimension(format!(
                "{}x{} input with k={} pad={} has no output",
                self.h, self.w, self.k, self.pad
            )));
        }
        if self.pool && (h < 2 || w < 2) {
            return Err(Error::Dimension(format!(
                "pooling a {h}x{w} convolution output leaves nothing"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_kernels(&self, k: &KernelSet) -> Result<()> {
        if k.n_in != self.n_in || k.n_out != self.n_out || k.k != self.k {
            return Err(Error::Dimension(format!(
                "kernels {}x{}x{k}x{k} do not fit layer {}->{} k={}",
                k.n_out,
                k.n_in,
                self.n_in,
                self.n_out,
                self.k,
                k = k.k
            )));
        }
        if k.q.frac_bits() != self.frac_w {
            return Err(Error::Dimension(format!(
                "kernel Q{} differs from layer weight Q{}",
                k.q.frac_bits(),
                self.frac_w
            )));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, t: &FeatureMapTensor) -> Result<()> {
        if t.dims() != self.input_dims() {
            return Err(Error::Dimension(format!(
                "input {} does not match layer input {}",
                t.dims(),
                self.input_dims()
            )));
        }
        if t.qformat().frac_bits() != self.frac_in {
            return Err(Error::Dimension(format!(
                "input Q{} differs from layer input Q{}",
                t.qformat().frac_bits(),
                self.frac_in
            )));
        }
        Ok(())
    }
}

/// Fully-connected tail layer. Evaluated functionally only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcDescriptor {
    pub n_in: usize,
    pub n_out: usize,
    #[serde(default)]
    pub relu: bool,
    #[serde(default = "default_frac")]
    pub frac_in: u8,
    #[serde(default = "default_frac")]
    pub frac_w: u8,
    #[serde(default = "default_frac")]
    pub frac_out: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkLayer {
    #[serde(flatten)]
    pub layer: LayerDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub layers: Vec<NetworkLayer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fc: Vec<FcDescriptor>,
}

impl NetworkDescriptor {
    pub fn from_layers(name: &str, layers: impl IntoIterator<Item = LayerDescriptor>) -> Self {
        Self {
            name: Some(name.to_string()),
            layers: layers
                .into_iter()
                .map(|layer| NetworkLayer {
                    layer,
                    weights: None,
                })
                .collect(),
            fc: Vec::new(),
        }
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &LayerDescriptor> {
        self.layers.iter().map(|l| &l.layer)
    }

    /// Checks every layer against the hardware limits and the
    /// output-to-input chaining between consecutive layers.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Parse("network has no convolutional layers".into()));
        }
        for (idx, l) in self.layers.iter().enumerate() {
            l.layer.validate().map_err(|e| Error::LayerMismatch {
                layer: idx,
                msg: e.to_string(),
            })?;
        }
        for (idx, pair) in self.layers.windows(2).enumerate() {
            let (a, b) = (&pair[0].layer, &pair[1].layer);
            if a.output_dims() != b.input_dims() {
                return Err(Error::LayerMismatch {
                    layer: idx + 1,
                    msg: format!(
                        "input {} does not match previous output {}",
                        b.input_dims(),
                        a.output_dims()
                    ),
                });
            }
            if a.frac_out != b.frac_in {
                return Err(Error::LayerMismatch {
                    layer: idx + 1,
                    msg: format!("input Q{} differs from previous output Q{}", b.frac_in, a.frac_out),
                });
            }
        }
        let last = &self.layers.last().unwrap().layer;
        let mut prev_len = last.output_dims().len();
        let mut prev_frac = last.frac_out;
        for (idx, fc) in self.fc.iter().enumerate() {
            let layer = self.layers.len() + idx;
            if fc.n_in != prev_len {
                return Err(Error::LayerMismatch {
                    layer,
                    msg: format!("fc input {} does not match previous output {prev_len}", fc.n_in),
                });
            }
            if fc.frac_in != prev_frac {
                return Err(Error::LayerMismatch {
                    layer,
                    msg: format!("fc input Q{} differs from previous Q{prev_frac}", fc.frac_in),
                });
            }
            for f in [fc.frac_in, fc.frac_w, fc.frac_out] {
                QFormat::new(f)?;
            }
            if fc.n_out == 0 {
                return Err(Error::LayerMismatch {
                    layer,
                    msg: "fc layer has no outputs".into(),
                });
            }
            prev_len = fc.n_out;
            prev_frac = fc.frac_out;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: NetworkDescriptor =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    /// Dense operation count (1 MAC = 2 Op) of the convolutional layers.
    pub fn dense_ops(&self) -> u64 {
        self.conv_layers().map(|l| 2 * l.dense_macs()).sum()
    }
}

/// Reads a network config; relative weight paths resolve against its directory.
pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkDescriptor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut net = NetworkDescriptor::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(w) = p.as_mut() {
            if w.is_relative() {
                *w = base.join(&*w);
            }
        }
    };
    for l in &mut net.layers {
        resolve(&mut l.weights);
    }
    for fc in &mut net.fc {
        resolve(&mut fc.weights);
    }
    Ok(net)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &FeatureMapTensor) -> Result<()> {
    t.save(path)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureMapTensor> {
    FeatureMapTensor::load(path)
}

/// Random tensor where each pixel is zero with probability `sparsity`.
/// Non-zero raw values are drawn uniformly from `1..=max_abs`, negated half
/// the time unless `non_negative`.
pub fn random_tensor(
    rng: &mut impl Rng,
    dims: Dims,
    q: QFormat,
    sparsity: f64,
    max_abs: i16,
    non_negative: bool,
) -> Result<FeatureMapTensor> {
    let max_abs = max_abs.max(1);
    let values = (0..dims.len())
        .map(|_| {
            if rng.gen::<f64>() < sparsity {
                Fx16::ZERO
            } else {
                let m = rng.gen_range(1..=max_abs);
                if !non_negative && rng.gen::<bool>() {
                    Fx16(-m)
                } else {
                    Fx16(m)
                }
            }
        })
        .collect();
    FeatureMapTensor::from_stream_order(dims, q, values)
}

/// Random kernels with raw weights in `-max_abs..=max_abs` and biases in
/// `-bias_abs..=bias_abs`.
pub fn random_kernels(
    rng: &mut impl Rng,
    layer: &LayerDescriptor,
    max_abs: i16,
    bias_abs: i32,
) -> Result<KernelSet> {
    let n = layer.n_out * layer.n_in * layer.k * layer.k;
    let weights = (0..n)
        .map(|_| Fx16(rng.gen_range(-max_abs..=max_abs)))
        .collect();
    let bias = (0..layer.n_out)
        .map(|_| Fx32(rng.gen_range(-bias_abs..=bias_abs)))
        .collect();
    KernelSet::new(layer.n_out, layer.n_in, layer.k, layer.q_w(), weights, bias)
}
