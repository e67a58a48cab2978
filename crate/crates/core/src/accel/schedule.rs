use std::ops::Range;

use serde::Serialize;

use super::HardwareConfig;
use crate::netmodel::LayerDescriptor;
use crate::{Error, Result};

/// One traversal of the input producing a contiguous range of output channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassPlan {
    pub channels: Range<usize>,
    /// MACs (and bank members) cooperating on each output channel. Input
    /// channel `i` is handled by member `i % cluster_size`, whose bank holds
    /// the kernel slices of exactly those input channels.
    pub cluster_size: usize,
    pub active_controllers: usize,
    /// Largest number of kernel values held by one bank in this pass.
    pub bank_values: usize,
    pub reload_input: bool,
}

impl PassPlan {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn macs_used(&self) -> usize {
        self.channel_count() * self.cluster_size
    }

    /// Kernel values streamed in before the pass starts.
    pub fn kernel_values(&self, layer: &LayerDescriptor) -> usize {
        self.channel_count() * layer.n_in * layer.k * layer.k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerSchedule {
    pub layer: LayerDescriptor,
    /// Banks that must be pooled to hold one output channel's kernels.
    pub bank_group: usize,
    pub passes: Vec<PassPlan>,
}

impl LayerSchedule {
    pub fn pass_count(&self) -> usize {
        self.passes.len()
    }

    /// Marks every pass as re-streaming the input when it does not fit the
    /// pixel memory and more than one pass is needed.
    pub fn set_input_bytes(&mut self, bytes: u64, hw: &HardwareConfig) {
        let reload = self.passes.len() > 1 && bytes > hw.pixel_mem_bytes as u64;
        for p in &mut self.passes {
            p.reload_input = reload;
        }
    }

    pub fn reloads_input(&self) -> bool {
        self.passes.iter().any(|p| p.reload_input)
    }

    pub fn validate(&self, hw: &HardwareConfig) -> Result<()> {
        let mut next = 0;
        for p in &self.passes {
            if p.channels.start != next || p.channels.is_empty() {
                return Err(Error::Schedule(format!(
                    "pass channels {:?} do not continue at {next}",
                    p.channels
                )));
            }
            next = p.channels.end;
            if p.macs_used() > hw.macs {
                return Err(Error::Schedule(format!(
                    "{} channels x cluster {} exceeds {} MACs",
                    p.channel_count(),
                    p.cluster_size,
                    hw.macs
                )));
            }
            if p.bank_values > hw.kernel_bank_values {
                return Err(Error::Schedule(format!(
                    "{} kernel values per bank exceed {}",
                    p.bank_values, hw.kernel_bank_values
                )));
            }
        }
        if next != self.layer.n_out {
            return Err(Error::Schedule(format!(
                "passes cover {next} of {} output channels",
                self.layer.n_out
            )));
        }
        Ok(())
    }
}

fn bank_values(layer: &LayerDescriptor, members: usize) -> usize {
    layer.n_in.div_ceil(members) * layer.k * layer.k
}

/// Splits a layer into passes and MAC clusters.
///
/// Banks are grouped until a group holds one output channel's kernels, which
/// caps the channels per pass at `macs / group`. Channels are spread evenly
/// over the fewest passes; within a pass, spare MACs cooperate on each channel
/// (up to one per controller, never fewer than the bank group).
pub fn plan_layer(layer: &LayerDescriptor, hw: &HardwareConfig) -> Result<LayerSchedule> {
    layer.validate()?;
    if layer.k > hw.max_kernel {
        return Err(Error::Limit(format!(
            "kernel size {} exceeds hardware maximum {}",
            layer.k, hw.max_kernel
        )));
    }
    let group = (1..=layer.n_in)
        .find(|&g| bank_values(layer, g) <= hw.kernel_bank_values)
        .ok_or_else(|| {
            Error::Limit(format!(
                "a single {}x{} kernel slice exceeds a {}-value bank",
                layer.k, layer.k, hw.kernel_bank_values
            ))
        })?;
    if group > hw.macs {
        return Err(Error::Limit(format!(
            "one output channel needs {group} banks, only {} exist",
            hw.macs
        )));
    }
    let cap = hw.macs / group;
    let n_passes = layer.n_out.div_ceil(cap);
    let base = layer.n_out / n_passes;
    let extra = layer.n_out % n_passes;
    let mut passes = Vec::with_capacity(n_passes);
    let mut start = 0;
    for p in 0..n_passes {
        let count = base + usize::from(p < extra);
        let v = (hw.macs / count).min(hw.controllers).max(group);
        passes.push(PassPlan {
            channels: start..start + count,
            cluster_size: v,
            active_controllers: v.min(hw.controllers),
            bank_values: bank_values(layer, v),
            reload_input: false,
        });
        start += count;
    }
    let schedule = LayerSchedule {
        layer: *layer,
        bank_group: group,
        passes,
    };
    schedule.validate(hw)?;
    Ok(schedule)
}
