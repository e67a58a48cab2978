//! Sparsity-map (SM) compressed feature-map streams.
//!
//! A stream is a sequence of 16-bit fields packed two per 32-bit word, low
//! field first. Pixels are taken in canonical stream order and grouped into
//! segments of up to 16: each segment is a 16-bit map whose bit `b` flags the
//! `b`-th pixel of the group as non-zero, followed by the non-zero values in
//! order. Every image row opens a fresh segment, so a row's first field is
//! always a map and the rows can be located independently. If the total field
//! count is odd the stream ends with one zero padding field.
//!
//! The run-length baseline ([`rl_encode`]) and the size analytics
//! ([`cis_bits`], [`compare_codecs`]) live here as well.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::fxp::{Fx16, QFormat};
use crate::netmodel::{expect_magic, read_dims_header, write_dims_header, Dims, FeatureMapTensor};
use crate::{Error, Result};

pub const SEGMENT_PIXELS: usize = 16;

const STREAM_MAGIC: &[u8; 4] = b"NHC1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedStream {
    dims: Dims,
    q: QFormat,
    words: Vec<u32>,
    padded: bool,
    row_starts: Vec<usize>,
}

impl CompressedStream {
    /// Wraps raw words, checking that they form a well-formed stream for `dims`.
    pub fn from_words(dims: Dims, q: QFormat, words: Vec<u32>, padded: bool) -> Result<Self> {
        dims.validate()?;
        let mut s = Self {
            dims,
            q,
            words,
            padded,
            row_starts: Vec::new(),
        };
        s.row_starts = scan_rows(&s)?;
        Ok(s)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn qformat(&self) -> QFormat {
        self.q
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Whether the last word carries a padding field in its high half.
    pub fn padded(&self) -> bool {
        self.padded
    }

    pub fn bits(&self) -> u64 {
        self.words.len() as u64 * 32
    }

    pub fn bytes(&self) -> u64 {
        self.words.len() as u64 * 4
    }

    /// Number of meaningful 16-bit fields (padding excluded).
    pub fn field_count(&self) -> usize {
        self.words.len() * 2 - usize::from(self.padded)
    }

    #[inline]
    pub fn field(&self, idx: usize) -> u16 {
        let w = self.words[idx / 2];
        if idx % 2 == 0 {
            w as u16
        } else {
            (w >> 16) as u16
        }
    }

    /// Field offset of the map opening each image row.
    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    /// Segment reader positioned at the start of row `y`.
    pub fn row_cursor(&self, y: usize) -> RowCursor<'_> {
        RowCursor {
            s: self,
            field: self.row_starts[y],
            pixel: 0,
            row_len: self.dims.row_len(),
            row: y,
        }
    }

    /// Segment-by-segment reader over the whole stream.
    pub fn segments(&self) -> Segments<'_> {
        Segments {
            s: self,
            cur: RowCursor {
                s: self,
                field: 0,
                pixel: 0,
                row_len: self.dims.row_len(),
                row: 0,
            },
            done: false,
        }
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
        w.write_all(STREAM_MAGIC)?;
        write_dims_header(w, self.dims, self.q)?;
        w.write_all(&(self.words.len() as u32).to_le_bytes())?;
        w.write_all(&[u8::from(self.padded)])?;
        let mut buf = Vec::with_capacity(self.words.len() * 4);
        for v in &self.words {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, STREAM_MAGIC, "compressed stream", "NHC1")?;
        let (dims, q) = read_dims_header(r)?;
        let mut hdr = [0u8; 5];
        r.read_exact(&mut hdr)
            .map_err(|_| Error::Parse("stream header truncated".into()))?;
        let n = u32::from_le_bytes([hdr[0], hdr[1], hdr[2], hdr[3]]) as usize;
        let padded = match hdr[4] {
            0 => false,
            1 => true,
            f => return Err(Error::Parse(format!("padding flag {f} is not 0 or 1"))),
        };
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < n * 4 {
            return Err(Error::Truncated {
                word_offset: buf.len() / 4,
            });
        }
        if buf.len() > n * 4 {
            return Err(Error::Overrun { word_offset: n });
        }
        let words = buf
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_words(dims, q, words, padded)
    }
}

/// One decoded map segment. `values` holds the field offset of its first
/// non-zero value; the values occupy consecutive fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub row: usize,
    /// Index within the row (stream order) of the segment's first pixel.
    pub first_pixel: usize,
    /// Pixels covered; 16 except possibly at the end of a row.
    pub len: usize,
    pub map: u16,
    pub map_field: usize,
    pub values: usize,
}

impl Segment {
    pub fn nonzero(&self) -> usize {
        self.map.count_ones() as usize
    }

    /// Field just past this segment.
    pub fn end_field(&self) -> usize {
        self.values + self.nonzero()
    }
}

/// Reads the segments of one image row.
#[derive(Debug, Clone)]
pub struct RowCursor<'a> {
    s: &'a CompressedStream,
    field: usize,
    pixel: usize,
    row_len: usize,
    row: usize,
}

impl RowCursor<'_> {
    pub fn field(&self) -> usize {
        self.field
    }

    /// Row index (stream order) of the next unread pixel.
    pub fn pixel(&self) -> usize {
        self.pixel
    }

    pub fn at_row_end(&self) -> bool {
        self.pixel >= self.row_len
    }

    /// Next segment of the row, or `None` once the row is exhausted.
    pub fn next_segment(&mut self) -> Result<Option<Segment>> {
        if self.at_row_end() {
            return Ok(None);
        }
        let fields = self.s.field_count();
        if self.field >= fields {
            return Err(Error::Truncated {
                word_offset: self.field / 2,
            });
        }
        let map = self.s.field(self.field);
        let len = SEGMENT_PIXELS.min(self.row_len - self.pixel);
        if len < SEGMENT_PIXELS && map >> len != 0 {
            return Err(Error::CountMismatch {
                word_offset: self.field / 2,
            });
        }
        let seg = Segment {
            row: self.row,
            first_pixel: self.pixel,
            len,
            map,
            map_field: self.field,
            values: self.field + 1,
        };
        let end = seg.end_field();
        if end > fields {
            return Err(Error::Truncated {
                word_offset: fields / 2,
            });
        }
        for f in seg.values..end {
            if self.s.field(f) == 0 {
                return Err(Error::CountMismatch { word_offset: f / 2 });
            }
        }
        self.field = end;
        self.pixel += len;
        Ok(Some(seg))
    }
}

/// Iterator over every segment of a stream in order.
pub struct Segments<'a> {
    s: &'a CompressedStream,
    cur: RowCursor<'a>,
    done: bool,
}

impl Iterator for Segments<'_> {
    type Item = Result<Segment>;

    fn next(&mut self) -> Option<Result<Segment>> {
        if self.done {
            return None;
        }
        loop {
            match self.cur.next_segment() {
                Ok(Some(seg)) => return Some(Ok(seg)),
                Ok(None) => {
                    if self.cur.row + 1 >= self.s.dims.height {
                        self.done = true;
                        return None;
                    }
                    self.cur.row += 1;
                    self.cur.pixel = 0;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

fn scan_rows(s: &CompressedStream) -> Result<Vec<usize>> {
    if s.words.is_empty() {
        return Err(Error::Truncated { word_offset: 0 });
    }
    let mut starts = Vec::with_capacity(s.dims.height);
    let mut cur = RowCursor {
        s,
        field: 0,
        pixel: 0,
        row_len: s.dims.row_len(),
        row: 0,
    };
    for y in 0..s.dims.height {
        cur.row = y;
        cur.pixel = 0;
        starts.push(cur.field);
        while cur.next_segment()?.is_some() {}
    }
    check_tail(s, cur.field)?;
    Ok(starts)
}

fn check_tail(s: &CompressedStream, end: usize) -> Result<()> {
    let fields = s.field_count();
    if end < fields {
        return Err(Error::Overrun {
            word_offset: end / 2,
        });
    }
    if s.padded && s.field(fields) != 0 {
        return Err(Error::CountMismatch {
            word_offset: fields / 2,
        });
    }
    if (end + usize::from(s.padded)) % 2 != 0 {
        return Err(Error::Parse("padding flag disagrees with field count".into()));
    }
    Ok(())
}

struct FieldWriter {
    words: Vec<u32>,
    pending: Option<u16>,
}

impl FieldWriter {
    fn push(&mut self, f: u16) {
        match self.pending.take() {
            None => self.pending = Some(f),
            Some(lo) => self.words.push(lo as u32 | (f as u32) << 16),
        }
    }

    fn fields(&self) -> usize {
        self.words.len() * 2 + usize::from(self.pending.is_some())
    }
}

pub fn encode(t: &FeatureMapTensor) -> CompressedStream {
    let dims = t.dims();
    let mut out = FieldWriter {
        words: Vec::with_capacity(dims.len() / 16 + 1),
        pending: None,
    };
    let mut row_starts = Vec::with_capacity(dims.height);
    for y in 0..dims.height {
        row_starts.push(out.fields());
        for group in t.row(y).chunks(SEGMENT_PIXELS) {
            let mut map = 0u16;
            for (b, v) in group.iter().enumerate() {
                if !v.is_zero() {
                    map |= 1 << b;
                }
            }
            out.push(map);
            for v in group.iter().filter(|v| !v.is_zero()) {
                out.push(v.0 as u16);
            }
        }
    }
    let padded = out.pending.is_some();
    if padded {
        out.push(0);
    }
    CompressedStream {
        dims,
        q: t.qformat(),
        words: out.words,
        padded,
        row_starts,
    }
}

/// Streams `s` segment by segment, handing each non-zero pixel to `sink`
/// as `(row, index within row, value)`.
pub fn decode_with(s: &CompressedStream, mut sink: impl FnMut(usize, usize, Fx16)) -> Result<()> {
    for seg in s.segments() {
        let seg = seg?;
        let mut f = seg.values;
        let mut map = seg.map;
        while map != 0 {
            let b = map.trailing_zeros() as usize;
            sink(seg.row, seg.first_pixel + b, Fx16(s.field(f) as i16));
            f += 1;
            map &= map - 1;
        }
    }
    Ok(())
}

pub fn decode(s: &CompressedStream) -> Result<FeatureMapTensor> {
    let dims = s.dims();
    let mut t = FeatureMapTensor::zeros(dims, s.qformat())?;
    let row_len = dims.row_len();
    let values = t.values_mut();
    decode_with(s, |row, idx, v| values[row * row_len + idx] = v)?;
    Ok(t)
}

/// Decodes raw words for the given shape, validating them first.
pub fn decode_words(dims: Dims, q: QFormat, words: &[u32], padded: bool) -> Result<FeatureMapTensor> {
    decode(&CompressedStream::from_words(dims, q, words.to_vec(), padded)?)
}

/// Predicted compressed size `E * (1 + N * (1 - S))` with a 1-bit map per
/// pixel, rounded up to whole bits.
pub fn cis_bits(e: u64, n: u32, sparsity: f64) -> u64 {
    let bits = e as f64 * (1.0 + n as f64 * (1.0 - sparsity));
    // Guard against values like 272.00000000000006 from the float product.
    (bits - 1e-9 * bits.max(1.0)).ceil().max(0.0) as u64
}

/// [`cis_bits`] evaluated exactly from a non-zero count.
pub fn cis_bits_exact(e: u64, n: u32, nonzero: u64) -> u64 {
    e + n as u64 * nonzero
}

/// Minimum sparsity at which the map scheme stops expanding the data.
pub fn threshold_sparsity(n: u32) -> f64 {
    1.0 / n as f64
}

/// Size of the map encoding at a generic precision `n`: `n`-pixel map
/// segments, `n`-bit values, a fresh segment per row and the stream end
/// padded to a `2n`-bit word. For `n = 16` this is exactly `encode(t).bits()`.
pub fn sm_bits(t: &FeatureMapTensor, n: u32) -> u64 {
    let n = n as u64;
    let dims = t.dims();
    let segs_per_row = (dims.row_len() as u64).div_ceil(n);
    let fields = segs_per_row * dims.height as u64 + t.nonzero_count() as u64;
    fields.div_ceil(2) * 2 * n
}

pub const RL_RUN_BITS: u32 = 5;
pub const RL_MAX_RUN: u8 = 31;

/// Run-length baseline: each pair is a zero-run (at most 31) followed by one
/// literal value. A zero arriving when the run is already 31 becomes the
/// literal of a `(31, 0)` pair, and a trailing run of `r` zeros is closed by
/// `(r - 1, 0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RlEncoding {
    pub pairs: Vec<(u8, Fx16)>,
}

impl RlEncoding {
    pub fn bits(&self, n: u32) -> u64 {
        self.pairs.len() as u64 * (RL_RUN_BITS + n) as u64
    }

    /// Expands the pairs back into `len` pixels.
    pub fn decode(&self, len: usize) -> Result<Vec<Fx16>> {
        let mut out = Vec::with_capacity(len);
        for (idx, &(run, v)) in self.pairs.iter().enumerate() {
            if out.len() + run as usize + 1 > len {
                return Err(Error::Overrun { word_offset: idx });
            }
            out.extend(std::iter::repeat(Fx16::ZERO).take(run as usize));
            out.push(v);
        }
        if out.len() != len {
            return Err(Error::Truncated {
                word_offset: self.pairs.len(),
            });
        }
        Ok(out)
    }
}

pub fn rl_encode_values(values: &[Fx16]) -> RlEncoding {
    let mut pairs = Vec::new();
    let mut run = 0u8;
    for &v in values {
        if !v.is_zero() {
            pairs.push((run, v));
            run = 0;
        } else if run == RL_MAX_RUN {
            pairs.push((RL_MAX_RUN, Fx16::ZERO));
            run = 0;
        } else {
            run += 1;
        }
    }
    if run > 0 {
        pairs.push((run - 1, Fx16::ZERO));
    }
    RlEncoding { pairs }
}

pub fn rl_encode(t: &FeatureMapTensor) -> RlEncoding {
    rl_encode_values(t.values())
}

/// Pair count of [`rl_encode`] without materialising the pairs.
pub fn rl_pairs(values: &[Fx16]) -> u64 {
    let mut pairs = 0;
    let mut run = 0u8;
    for v in values {
        if !v.is_zero() {
            pairs += 1;
            run = 0;
        } else if run == RL_MAX_RUN {
            pairs += 1;
            run = 0;
        } else {
            run += 1;
        }
    }
    pairs + u64::from(run > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CompressionReport {
    pub raw_bits: u64,
    pub sm_bits: u64,
    pub cis_bits: u64,
    pub rl_bits: u64,
    pub sparsity: f64,
}

impl CompressionReport {
    pub fn sm_ratio(&self) -> f64 {
        self.sm_bits as f64 / self.raw_bits as f64
    }

    pub fn rl_ratio(&self) -> f64 {
        self.rl_bits as f64 / self.raw_bits as f64
    }
}

pub fn compression_report(t: &FeatureMapTensor, n: u32) -> CompressionReport {
    let e = t.dims().len() as u64;
    CompressionReport {
        raw_bits: e * n as u64,
        sm_bits: sm_bits(t, n),
        cis_bits: cis_bits_exact(e, n, t.nonzero_count() as u64),
        rl_bits: rl_pairs(t.values()) * (RL_RUN_BITS + n) as u64,
        sparsity: t.sparsity(),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CodecComparison {
    pub precision: u32,
    pub reports: Vec<CompressionReport>,
    pub mean_raw_bits: f64,
    pub mean_sm_bits: f64,
    pub mean_cis_bits: f64,
    pub mean_rl_bits: f64,
    pub mean_sparsity: f64,
}

impl CodecComparison {
    pub fn sm_ratio(&self) -> f64 {
        self.mean_sm_bits / self.mean_raw_bits
    }

    pub fn rl_ratio(&self) -> f64 {
        self.mean_rl_bits / self.mean_raw_bits
    }

    pub fn cis_ratio(&self) -> f64 {
        self.mean_cis_bits / self.mean_raw_bits
    }
}

pub fn compare_codecs(corpus: &[FeatureMapTensor], n: u32) -> Result<CodecComparison> {
    if corpus.is_empty() {
        return Err(Error::Parse("codec comparison needs at least one tensor".into()));
    }
    let reports: Vec<_> = corpus.iter().map(|t| compression_report(t, n)).collect();
    Ok(summarize(n, reports))
}

pub(crate) fn summarize(n: u32, reports: Vec<CompressionReport>) -> CodecComparison {
    let count = reports.len() as f64;
    let mean = |f: fn(&CompressionReport) -> f64| reports.iter().map(f).sum::<f64>() / count;
    CodecComparison {
        precision: n,
        mean_raw_bits: mean(|r| r.raw_bits as f64),
        mean_sm_bits: mean(|r| r.sm_bits as f64),
        mean_cis_bits: mean(|r| r.cis_bits as f64),
        mean_rl_bits: mean(|r| r.rl_bits as f64),
        mean_sparsity: mean(|r| r.sparsity),
        reports,
    }
}
