//! MAC clusters, PRE and the per-pass timeline.

use std::io::Write;
use std::ops::Range;

use super::idp::{idp_decode_stripe, weight_ops_for_pixel, Stripe, StripePixel};
use super::schedule::{LayerSchedule, PassPlan};
use super::stats::LayerStats;
use super::{Fault, HardwareConfig, SimOptions};
use crate::codec::{CompressedStream, SEGMENT_PIXELS};
use crate::fxp::{mac, requantize, Fx16, Fx32, QFormat};
use crate::netmodel::{FeatureMapTensor, KernelSet, LayerDescriptor};
use crate::{Error, Result};

/// One MAC: two output rows times `k` in-flight columns of accumulators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacState {
    pub accumulators: Vec<Fx32>,
    pub channel: usize,
    /// Cluster member whose bank (and input channels) this MAC uses.
    pub bank: usize,
}

impl MacState {
    fn new(k: usize, channel: usize, bank: usize, init: Fx32) -> Self {
        Self {
            accumulators: vec![init; 2 * k],
            channel,
            bank,
        }
    }
}

fn tree_sum(vals: &mut [Fx32]) -> Fx32 {
    let mut n = vals.len();
    while n > 1 {
        let half = n / 2;
        for p in 0..half {
            vals[p] = vals[2 * p].saturating_add(vals[2 * p + 1]);
        }
        if n % 2 == 1 {
            vals[half] = vals[n - 1];
        }
        n = half + n % 2;
    }
    vals[0]
}

struct PassEngine<'a> {
    layer: &'a LayerDescriptor,
    kernels: &'a KernelSet,
    channels: Range<usize>,
    v: usize,
    wo: usize,
    macs: Vec<MacState>,
    next_flush: usize,
    conv: [Vec<Fx16>; 2],
    scratch: Vec<Fx32>,
    q_out: QFormat,
}

impl<'a> PassEngine<'a> {
    fn new(layer: &'a LayerDescriptor, kernels: &'a KernelSet, pass: &PassPlan, wo: usize) -> Self {
        let c = pass.channel_count();
        let mut macs = Vec::with_capacity(c * pass.cluster_size);
        for m in 0..pass.cluster_size {
            for j in pass.channels.clone() {
                let init = if m == 0 { kernels.bias[j] } else { Fx32::ZERO };
                macs.push(MacState::new(layer.k, j, m, init));
            }
        }
        Self {
            layer,
            kernels,
            channels: pass.channels.clone(),
            v: pass.cluster_size,
            wo,
            macs,
            next_flush: 0,
            conv: [vec![Fx16::ZERO; wo * c], vec![Fx16::ZERO; wo * c]],
            scratch: Vec::with_capacity(pass.cluster_size),
            q_out: layer.q_out(),
        }
    }

    fn c(&self) -> usize {
        self.channels.len()
    }

    fn pixel(&mut self, p: &StripePixel, stripe: &Stripe) {
        let k = self.layer.k;
        let c = self.c();
        let member = p.channel % self.v;
        let lo = (p.px + 1).saturating_sub(k);
        let hi = p.px.min(self.wo - 1);
        if lo > hi {
            return;
        }
        for (slot, oy) in std::iter::once(stripe.oy0).chain(stripe.oy1).enumerate() {
            if p.py < oy || p.py - oy >= k {
                continue;
            }
            let ky = p.py - oy;
            for mac_state in &mut self.macs[member * c..(member + 1) * c] {
                let j = mac_state.channel;
                for ox in lo..=hi {
                    let w = self.kernels.weight(j, p.channel, ky, p.px - ox);
                    let a = &mut mac_state.accumulators[slot * k + ox % k];
                    *a = mac(*a, p.value, w);
                }
            }
        }
    }

    /// Shifts out every column that can no longer receive contributions
    /// once pixels of padded column `px` arrive.
    fn advance_to(&mut self, px: usize) {
        let target = (px + 1).saturating_sub(self.layer.k).min(self.wo);
        while self.next_flush < target {
            self.shift_out(self.next_flush);
            self.next_flush += 1;
        }
    }

    fn shift_out(&mut self, ox: usize) {
        let k = self.layer.k;
        let c = self.c();
        let acc_frac = self.layer.acc_frac();
        for slot in 0..2 {
            let idx = slot * k + ox % k;
            for jj in 0..c {
                self.scratch.clear();
                for m in 0..self.v {
                    let st = &mut self.macs[m * c + jj];
                    self.scratch.push(st.accumulators[idx]);
                    st.accumulators[idx] = if m == 0 {
                        self.kernels.bias[st.channel]
                    } else {
                        Fx32::ZERO
                    };
                }
                let sum = tree_sum(&mut self.scratch);
                self.conv[slot][ox * c + jj] = requantize(sum, acc_frac, self.q_out);
            }
        }
    }

    /// Flushes the remaining columns and writes the stripe's outputs.
    fn finish_stripe(&mut self, stripe: &Stripe, out: &mut FeatureMapTensor) {
        self.advance_to(usize::MAX / 2);
        self.next_flush = 0;
        let c = self.c();
        let floor = if self.layer.relu { Fx16::ZERO } else { Fx16(i16::MIN) };
        let j0 = self.channels.start;
        if self.layer.pool {
            if stripe.oy1.is_none() {
                return;
            }
            for x in 0..self.wo / 2 {
                for jj in 0..c {
                    let v = [
                        self.conv[0][2 * x * c + jj],
                        self.conv[0][(2 * x + 1) * c + jj],
                        self.conv[1][2 * x * c + jj],
                        self.conv[1][(2 * x + 1) * c + jj],
                    ]
                    .into_iter()
                    .fold(floor, Fx16::max);
                    out.set(j0 + jj, x, stripe.index, v);
                }
            }
        } else {
            for (slot, oy) in std::iter::once(stripe.oy0).chain(stripe.oy1).enumerate() {
                for x in 0..self.wo {
                    for jj in 0..c {
                        out.set(j0 + jj, x, oy, self.conv[slot][x * c + jj].max(floor));
                    }
                }
            }
        }
    }
}

/// What the compute phase of one stripe looked like.
struct StripeCompute {
    cycles: u64,
    idp: Vec<u8>,
}

fn encoder_cycles(out: &FeatureMapTensor, x: usize, y: usize, channels: &Range<usize>, encode: bool) -> u64 {
    if !encode {
        return channels.len().div_ceil(2) as u64;
    }
    let mut cycles = 0;
    let mut j = channels.start;
    while j < channels.end {
        let end = (j + SEGMENT_PIXELS).min(channels.end);
        let n = (j..end).filter(|&jj| !out.get(jj, x, y).is_zero()).count() as u64;
        cycles += if n == 0 { 1 } else { 1 + (n - 1).div_ceil(2) };
        j = end;
    }
    cycles
}

fn nonzero_in(out: &FeatureMapTensor, x: usize, y: usize, channels: &Range<usize>) -> u64 {
    channels.clone().filter(|&j| !out.get(j, x, y).is_zero()).count() as u64
}

/// Output drain of one stripe for one pass: encoder cycles plus, for clusters,
/// the partial-sum reduction of every shifted-out column.
fn drain_cycles(
    layer: &LayerDescriptor,
    out: &FeatureMapTensor,
    stripe: &Stripe,
    pass: &PassPlan,
    wo: usize,
) -> (u64, u64) {
    let mut cycles = 0;
    let mut nonzero = 0;
    let rows: Vec<usize> = if layer.pool {
        stripe.oy1.map(|_| stripe.index).into_iter().collect()
    } else {
        std::iter::once(stripe.oy0).chain(stripe.oy1).collect()
    };
    for y in rows {
        for x in 0..out.width() {
            cycles += encoder_cycles(out, x, y, &pass.channels, layer.encode);
            nonzero += nonzero_in(out, x, y, &pass.channels);
        }
    }
    if pass.cluster_size > 1 {
        let depth = usize::BITS - (pass.cluster_size - 1).leading_zeros();
        cycles += (depth as u64 + 1) * wo as u64;
    }
    (cycles, nonzero)
}

fn prefill_words(input: &CompressedStream, k: usize) -> u64 {
    let rows = k.min(input.dims().height);
    if rows == input.dims().height {
        input.word_count() as u64
    } else {
        input.row_starts()[rows].div_ceil(2) as u64
    }
}

struct Tracer<'w> {
    out: &'w mut dyn Write,
    cycle: u64,
}

impl Tracer<'_> {
    fn line(&mut self, phase: &str, consumed: u64, emitted: u64, words_in: u64) -> Result<()> {
        writeln!(self.out, "{} {phase} {consumed} {emitted} {words_in}", self.cycle)?;
        self.cycle += 1;
        Ok(())
    }
}

/// Runs one layer through the pipeline. Without `kernels` only the timing is
/// modelled and `output` must supply the layer's result.
pub(crate) fn run_layer(
    input: &CompressedStream,
    layer: &LayerDescriptor,
    kernels: Option<&KernelSet>,
    schedule: &LayerSchedule,
    hw: &HardwareConfig,
    output: Option<&FeatureMapTensor>,
    opts: &mut SimOptions<'_>,
) -> Result<(FeatureMapTensor, LayerStats)> {
    let (ho, wo) = layer.conv_out_hw();
    let col_offset = match opts.fault {
        Some(Fault::PaddingOffByOne) => layer.pad.saturating_sub(1),
        None => layer.pad,
    };
    let record = opts.trace.is_some();
    let mut out = match (kernels, output) {
        (Some(_), _) => FeatureMapTensor::zeros(layer.output_dims(), layer.q_out())?,
        (None, Some(t)) => {
            if t.dims() != layer.output_dims() {
                return Err(Error::Dimension(format!(
                    "supplied output {} does not match layer output {}",
                    t.dims(),
                    layer.output_dims()
                )));
            }
            t.clone()
        }
        (None, None) => {
            return Err(Error::Schedule("timing-only run needs an output tensor".into()));
        }
    };

    let mut stats = LayerStats {
        passes: schedule.pass_count(),
        input_reloaded: schedule.reloads_input(),
        dense_macs: layer.dense_macs(),
        ..Default::default()
    };
    let stripes: Vec<Stripe> = Stripe::for_output_rows(ho).collect();
    let mut computes: Vec<Vec<StripeCompute>> = Vec::with_capacity(schedule.pass_count());

    for pass in &schedule.passes {
        let mut engine = kernels.map(|k| PassEngine::new(layer, k, pass, wo));
        let c = pass.channel_count() as u64;
        let mut per_stripe = Vec::with_capacity(stripes.len());
        for stripe in &stripes {
            let mut member_ops = vec![0u64; pass.cluster_size];
            let walk = idp_decode_stripe(input, stripe, layer.k, layer.pad, col_offset, record, |batch| {
                if let Some(e) = engine.as_mut() {
                    e.advance_to(batch[0].px);
                }
                for p in batch {
                    let ops = weight_ops_for_pixel(p.px, p.py, layer.k, wo, stripe) as u64;
                    member_ops[p.channel % pass.cluster_size] += ops;
                    if let Some(e) = engine.as_mut() {
                        e.pixel(p, stripe);
                    }
                }
            })?;
            if let Some(e) = engine.as_mut() {
                e.finish_stripe(stripe, &mut out);
            }
            let ops: u64 = member_ops.iter().sum();
            stats.mult_ops += ops * c;
            let busiest = member_ops.iter().copied().max().unwrap_or(0);
            per_stripe.push(StripeCompute {
                cycles: busiest.max(walk.cycles),
                idp: walk.emitted_per_cycle,
            });
        }
        computes.push(per_stripe);
    }
    stats.mac_busy_cycles = stats.mult_ops;

    let words = input.word_count() as u64;
    let prefill = prefill_words(input, layer.k);
    let mut tracer = opts.trace.as_mut().map(|w| Tracer {
        out: &mut **w,
        cycle: 0,
    });
    if let Some(t) = tracer.as_mut() {
        writeln!(t.out, "# cycle phase consumed emitted words_in")?;
    }
    for (p, pass) in schedule.passes.iter().enumerate() {
        let kernel_values = pass.kernel_values(layer) as u64;
        let c = pass.channel_count() as u64;
        let kload = kernel_values.div_ceil(2) + c;
        stats.cycles_kernel_load += kload;
        stats.bytes_kernels += 2 * kernel_values + 4 * c;
        let streamed = p == 0 || pass.reload_input;
        let (pre, rest) = if streamed {
            stats.cycles_input_stream += words;
            stats.bytes_in += 4 * words;
            (prefill, words - prefill)
        } else {
            (0, 0)
        };
        stats.cycles_prefill += pre;

        let mut body = 0u64;
        let mut stripe_times = Vec::with_capacity(stripes.len());
        for (stripe, sc) in stripes.iter().zip(&computes[p]) {
            let (drain, nonzero) = drain_cycles(layer, &out, stripe, pass, wo);
            stats.cycles_compute += sc.cycles;
            stats.cycles_output_drain += drain;
            let t = sc.cycles.max(drain);
            body += t;
            stripe_times.push((t, nonzero));
        }
        let pass_total = kload + pre + body.max(rest);
        stats.cycles_total += pass_total;

        if let Some(tr) = tracer.as_mut() {
            for _ in 0..kload {
                tr.line("kernel_load", 0, 0, 1)?;
            }
            for _ in 0..pre {
                tr.line("prefill", 0, 0, 1)?;
            }
            let mut stream_left = rest;
            for ((t, nonzero), sc) in stripe_times.iter().zip(&computes[p]) {
                let mut left = *nonzero;
                for cyc in 0..*t {
                    let consumed = sc.idp.get(cyc as usize).copied().unwrap_or(0) as u64;
                    let emitted = left.min(hw.output_pixels_per_cycle as u64);
                    left -= emitted;
                    let w = u64::from(stream_left > 0);
                    stream_left -= w;
                    tr.line("compute", consumed, emitted, w)?;
                }
            }
            while stream_left > 0 {
                stream_left -= 1;
                tr.line("stream", 0, 0, 1)?;
            }
        }
    }
    stats.input_sparsity = 1.0 - pixel_density(input);
    stats.output_sparsity = out.sparsity();
    Ok((out, stats))
}

fn pixel_density(s: &CompressedStream) -> f64 {
    let maps: usize = s.dims().height * s.dims().row_len().div_ceil(SEGMENT_PIXELS);
    (s.field_count() - maps) as f64 / s.dims().len() as f64
}
