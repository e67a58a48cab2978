//! Input data processing: walks the compressed rows of one stripe and hands
//! out non-zero pixels in column-major order.

use crate::codec::{CompressedStream, RowCursor, Segment};
use crate::fxp::Fx16;
use crate::Result;

/// A non-zero input pixel in padded coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripePixel {
    pub channel: usize,
    pub px: usize,
    pub py: usize,
    pub value: Fx16,
}

/// Output rows produced by one stripe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stripe {
    pub index: usize,
    pub oy0: usize,
    pub oy1: Option<usize>,
}

impl Stripe {
    pub fn for_output_rows(ho: usize) -> impl Iterator<Item = Stripe> {
        (0..ho.div_ceil(2)).map(move |r| Stripe {
            index: r,
            oy0: 2 * r,
            oy1: (2 * r + 1 < ho).then_some(2 * r + 1),
        })
    }

    pub fn rows(&self) -> usize {
        1 + usize::from(self.oy1.is_some())
    }

    /// Padded input rows feeding this stripe (inclusive).
    pub fn padded_rows(&self, k: usize) -> (usize, usize) {
        (self.oy0, self.oy1.unwrap_or(self.oy0) + k - 1)
    }
}

/// Multiplications one MAC performs for a pixel at padded `(px, py)`: the
/// kernel taps that land on an output pixel of this stripe's row pair.
pub fn weight_ops_for_pixel(px: usize, py: usize, k: usize, out_w: usize, stripe: &Stripe) -> usize {
    let rows = std::iter::once(stripe.oy0)
        .chain(stripe.oy1)
        .filter(|&oy| py >= oy && py - oy < k)
        .count();
    let lo = (px + 1).saturating_sub(k);
    let hi = px.min(out_w.saturating_sub(1));
    let cols = if out_w == 0 || lo > hi { 0 } else { hi - lo + 1 };
    rows * cols
}

struct RowFsm<'a> {
    cursor: RowCursor<'a>,
    py: usize,
    seg: Option<Segment>,
    rest: u16,
    next_value: usize,
}

impl RowFsm<'_> {
    fn pending(&self) -> bool {
        self.rest != 0
    }

    /// Column of the next thing this row has to do, `None` once drained.
    fn frontier(&self, channels: usize) -> Option<usize> {
        if let Some(seg) = self.seg.filter(|_| self.pending()) {
            Some((seg.first_pixel + self.rest.trailing_zeros() as usize) / channels)
        } else if self.cursor.at_row_end() {
            None
        } else {
            Some(self.cursor.pixel() / channels)
        }
    }
}

/// Per-cycle record of a stripe walk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StripeWalk {
    pub cycles: u64,
    pub pixels: u64,
    pub map_reads: u64,
    /// Pixels emitted in each cycle; filled only when requested.
    pub emitted_per_cycle: Vec<u8>,
}

/// Decodes one stripe.
///
/// One row state machine is enabled per real input row of the stripe
/// (`k + 1` in the interior). Each cycle every machine either reads its next
/// map segment or emits its next non-zero pixel, but pixels are only emitted
/// for the lowest column any machine is still working on, so the stripe is
/// traversed column by column, rows top to bottom, channel fastest.
/// `on_cycle` receives the pixels of every cycle that emitted some.
/// `col_offset` is the padding added to real columns (normally `pad`).
pub fn idp_decode_stripe(
    input: &CompressedStream,
    stripe: &Stripe,
    k: usize,
    pad: usize,
    col_offset: usize,
    record_cycles: bool,
    mut on_cycle: impl FnMut(&[StripePixel]),
) -> Result<StripeWalk> {
    let dims = input.dims();
    let channels = dims.channels;
    let (top, bottom) = stripe.padded_rows(k);
    let mut fsms: Vec<RowFsm<'_>> = (top..=bottom)
        .filter_map(|py| {
            let y = py.checked_sub(pad)?;
            (y < dims.height).then(|| RowFsm {
                cursor: input.row_cursor(y),
                py,
                seg: None,
                rest: 0,
                next_value: 0,
            })
        })
        .collect();
    let mut walk = StripeWalk::default();
    let mut batch = Vec::with_capacity(fsms.len());
    loop {
        let Some(col) = fsms.iter().filter_map(|f| f.frontier(channels)).min() else {
            break;
        };
        batch.clear();
        for f in &mut fsms {
            if !f.pending() {
                if let Some(seg) = f.cursor.next_segment()? {
                    f.seg = Some(seg);
                    f.rest = seg.map;
                    f.next_value = seg.values;
                    walk.map_reads += 1;
                }
                continue;
            }
            let seg = f.seg.expect("pending pixel implies a segment");
            let idx = seg.first_pixel + f.rest.trailing_zeros() as usize;
            if idx / channels != col {
                continue;
            }
            batch.push(StripePixel {
                channel: idx % channels,
                px: idx / channels + col_offset,
                py: f.py,
                value: Fx16(input.field(f.next_value) as i16),
            });
            f.next_value += 1;
            f.rest &= f.rest - 1;
        }
        walk.cycles += 1;
        walk.pixels += batch.len() as u64;
        if record_cycles {
            walk.emitted_per_cycle.push(batch.len() as u8);
        }
        if !batch.is_empty() {
            on_cycle(&batch);
        }
    }
    Ok(walk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode;
    use crate::netmodel::{random_tensor, Dims, FeatureMapTensor};
    use crate::QFormat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q8() -> QFormat {
        QFormat::new(8).unwrap()
    }

    fn interior() -> Stripe {
        Stripe {
            index: 1,
            oy0: 2,
            oy1: Some(3),
        }
    }

    #[test]
    fn ops_examples() {
        assert_eq!(weight_ops_for_pixel(5, 4, 3, 10, &interior()), 6);
        // leftmost padded column feeding output column 0 only
        assert_eq!(weight_ops_for_pixel(1, 4, 3, 10, &interior()), 4);
        assert_eq!(weight_ops_for_pixel(0, 4, 3, 10, &interior()), 2);
        // top row of the stripe only reaches the upper output row
        assert_eq!(weight_ops_for_pixel(5, 2, 3, 10, &interior()), 3);
        assert_eq!(weight_ops_for_pixel(5, 2, 1, 10, &interior()), 1);
        assert_eq!(weight_ops_for_pixel(5, 3, 1, 10, &interior()), 1);
    }

    #[test]
    fn all_zero_stripe_only_reads_maps() {
        let t = FeatureMapTensor::zeros(Dims::new(20, 6, 6), q8()).unwrap();
        let s = encode(&t);
        let st = Stripe {
            index: 0,
            oy0: 0,
            oy1: Some(1),
        };
        let walk = idp_decode_stripe(&s, &st, 3, 0, 0, false, |_| panic!("no pixels")).unwrap();
        assert_eq!(walk.pixels, 0);
        // each of the 4 rows holds 120 pixels = 8 segments, read in parallel
        assert_eq!(walk.map_reads, 32);
        assert_eq!(walk.cycles, 8);
    }

    #[test]
    fn dense_stripe_emits_one_pixel_per_row_per_cycle() {
        let t = FeatureMapTensor::from_fn(Dims::new(1, 8, 16), q8(), |_, _, _| Fx16(1)).unwrap();
        let s = encode(&t);
        let mut counts = Vec::new();
        let walk = idp_decode_stripe(&s, &interior(), 3, 0, 0, true, |b| counts.push(b.len())).unwrap();
        assert_eq!(walk.pixels, 64);
        assert!(counts.iter().all(|&c| c == 4));
        assert_eq!(walk.cycles, 17);
    }

    #[test]
    fn emitted_set_matches_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for pad in 0..=2 {
            let t = random_tensor(&mut rng, Dims::new(1, 6, 6), q8(), 0.6, 50, false).unwrap();
            let s = encode(&t);
            let ho = 6 + 2 * pad - 3 + 1;
            for st in Stripe::for_output_rows(ho) {
                let mut got = Vec::new();
                let mut last_col = 0;
                idp_decode_stripe(&s, &st, 3, pad, pad, false, |b| {
                    for p in b {
                        assert!(p.px >= last_col);
                        last_col = p.px;
                        got.push((p.channel, p.px, p.py, p.value));
                    }
                })
                .unwrap();
                got.sort();
                let (top, bottom) = st.padded_rows(3);
                let mut want = Vec::new();
                for p in t.stream_order_iter() {
                    let (px, py) = (p.x + pad, p.y + pad);
                    if !p.value.is_zero() && py >= top && py <= bottom {
                        want.push((p.channel, px, py, p.value));
                    }
                }
                want.sort();
                assert_eq!(got, want, "pad {pad} stripe {st:?}");
            }
        }
    }
}
