//! Pipeline simulator.
//!
//! [`plan_layer`] splits a layer into passes and MAC clusters.
//! [`simulate_layer`] then streams the compressed input through the IDP
//! stripe decoder ([`idp`]), the MAC clusters and the PRE (partial-sum
//! reduction, ReLU, 2x2 pooling, re-encoding), producing the layer output
//! and a [`LayerStats`] record of cycles, MAC activity and DRAM traffic.
//!
//! Timing is transaction level. Per pass:
//!
//! ```text
//! total = kernel_load + prefill + max(sum over stripes of max(compute, drain), remaining input words)
//! ```
//!
//! where `compute` is the busiest cluster member's multiplication count (or
//! the IDP cycles if larger) and `drain` the encoder cycles of the stripe's
//! output plus `ceil(log2 v) + 1` reduction cycles per shifted-out column when
//! `v > 1` MACs share an output channel.

mod engine;
pub mod idp;
pub mod schedule;
pub mod stats;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::codec::{self, CompressedStream};
use crate::netmodel::{FeatureMapTensor, KernelSet, LayerDescriptor};
use crate::{Error, Result};

pub use engine::MacState;
pub use idp::{idp_decode_stripe, weight_ops_for_pixel, Stripe, StripePixel, StripeWalk};
pub use schedule::{plan_layer, LayerSchedule, PassPlan};
pub use stats::{dram_energy_for_bytes, dram_power, estimate_dram_energy, LayerStats, DRAM_JOULES_PER_BIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub macs: usize,
    pub controllers: usize,
    pub bus_bits: usize,
    pub pixel_mem_bytes: usize,
    pub kernel_bank_values: usize,
    pub max_kernel: usize,
    pub clock_hz: f64,
    pub output_pixels_per_cycle: usize,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            macs: 128,
            controllers: 8,
            bus_bits: 32,
            pixel_mem_bytes: 524_288,
            kernel_bank_values: 4096,
            max_kernel: 7,
            clock_hz: 5e8,
            output_pixels_per_cycle: 2,
        }
    }
}

impl HardwareConfig {
    pub fn with_clock_mhz(mut self, mhz: f64) -> Self {
        self.clock_hz = mhz * 1e6;
        self
    }

    /// Peak throughput in Op/s, counting a MAC as two operations.
    pub fn peak_ops(&self) -> f64 {
        self.macs as f64 * self.clock_hz * 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.macs == 0 || self.controllers == 0 || self.macs % self.controllers != 0 {
            return Err(Error::Limit(format!(
                "{} controllers must divide {} MACs",
                self.controllers, self.macs
            )));
        }
        if self.bus_bits != 32 {
            return Err(Error::Limit("only 32-bit buses are modelled".into()));
        }
        if !(self.clock_hz > 0.0) {
            return Err(Error::Limit("clock must be positive".into()));
        }
        Ok(())
    }
}

/// Deliberate faults for mutation-testing the equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The IDP places pixels one column too far left when padding is on.
    PaddingOffByOne,
}

#[derive(Default)]
pub struct SimOptions<'a> {
    pub fault: Option<Fault>,
    /// Receives one line per simulated cycle: `cycle phase consumed emitted words_in`.
    pub trace: Option<&'a mut dyn Write>,
}

/// Layer result as it leaves the accelerator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerOutput {
    Encoded(CompressedStream),
    /// Encoding disabled: raw pixels in stream order, two per bus word.
    Raw(FeatureMapTensor),
}

impl LayerOutput {
    pub fn words(&self) -> u64 {
        match self {
            LayerOutput::Encoded(s) => s.word_count() as u64,
            LayerOutput::Raw(t) => t.dims().len().div_ceil(2) as u64,
        }
    }

    pub fn to_tensor(&self) -> Result<FeatureMapTensor> {
        match self {
            LayerOutput::Encoded(s) => codec::decode(s),
            LayerOutput::Raw(t) => Ok(t.clone()),
        }
    }

    /// The stream the next layer's IDP would read.
    pub fn to_stream(&self) -> CompressedStream {
        match self {
            LayerOutput::Encoded(s) => s.clone(),
            LayerOutput::Raw(t) => codec::encode(t),
        }
    }
}

fn check_schedule(layer: &LayerDescriptor, schedule: &LayerSchedule, hw: &HardwareConfig) -> Result<LayerSchedule> {
    hw.validate()?;
    layer.validate()?;
    if schedule.layer != *layer {
        return Err(Error::Schedule(
            "schedule was planned for a different layer".into(),
        ));
    }
    schedule.validate(hw)?;
    Ok(schedule.clone())
}

fn check_input(layer: &LayerDescriptor, input: &CompressedStream) -> Result<()> {
    if input.dims() != layer.input_dims() {
        return Err(Error::Dimension(format!(
            "input stream {} does not match layer input {}",
            input.dims(),
            layer.input_dims()
        )));
    }
    if input.qformat().frac_bits() != layer.frac_in {
        return Err(Error::Dimension(format!(
            "input stream Q{} differs from layer input Q{}",
            input.qformat().frac_bits(),
            layer.frac_in
        )));
    }
    Ok(())
}

fn finish_output(layer: &LayerDescriptor, out: FeatureMapTensor, stats: &mut LayerStats, hw: &HardwareConfig) -> LayerOutput {
    let output = if layer.encode {
        LayerOutput::Encoded(codec::encode(&out))
    } else {
        LayerOutput::Raw(out)
    };
    stats.bytes_out = 4 * output.words();
    stats.finish(hw.macs);
    output
}

pub fn simulate_layer(
    input: &CompressedStream,
    kernels: &KernelSet,
    layer: &LayerDescriptor,
    schedule: &LayerSchedule,
    hw: &HardwareConfig,
) -> Result<(LayerOutput, LayerStats)> {
    simulate_layer_with(input, kernels, layer, schedule, hw, &mut SimOptions::default())
}

pub fn simulate_layer_with(
    input: &CompressedStream,
    kernels: &KernelSet,
    layer: &LayerDescriptor,
    schedule: &LayerSchedule,
    hw: &HardwareConfig,
    opts: &mut SimOptions<'_>,
) -> Result<(LayerOutput, LayerStats)> {
    let mut schedule = check_schedule(layer, schedule, hw)?;
    check_input(layer, input)?;
    layer.check_kernels(kernels)?;
    schedule.set_input_bytes(input.bytes(), hw);
    let (out, mut stats) = engine::run_layer(input, layer, Some(kernels), &schedule, hw, None, opts)?;
    let output = finish_output(layer, out, &mut stats, hw);
    Ok((output, stats))
}

/// Timing-only run: the MAC arithmetic is skipped and `output` stands in for
/// the layer result when charging the output drain.
pub fn estimate_layer(
    input: &CompressedStream,
    layer: &LayerDescriptor,
    schedule: &LayerSchedule,
    hw: &HardwareConfig,
    output: &FeatureMapTensor,
    opts: &mut SimOptions<'_>,
) -> Result<(LayerOutput, LayerStats)> {
    let mut schedule = check_schedule(layer, schedule, hw)?;
    check_input(layer, input)?;
    schedule.set_input_bytes(input.bytes(), hw);
    let (out, mut stats) = engine::run_layer(input, layer, None, &schedule, hw, Some(output), opts)?;
    let output = finish_output(layer, out, &mut stats, hw);
    Ok((output, stats))
}

/// Encodes `input`, plans the layer and simulates it.
pub fn simulate_tensor(
    input: &FeatureMapTensor,
    kernels: &KernelSet,
    layer: &LayerDescriptor,
    hw: &HardwareConfig,
) -> Result<(LayerOutput, LayerStats)> {
    layer.check_input(input)?;
    let schedule = plan_layer(layer, hw)?;
    simulate_layer(&codec::encode(input), kernels, layer, &schedule, hw)
}
