use serde::{Deserialize, Serialize};

/// DRAM access energy per bit.
pub const DRAM_JOULES_PER_BIT: f64 = 21e-12;

/// Cycle, MAC and traffic counts of one layer (or a sum of layers).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub passes: usize,
    pub input_reloaded: bool,
    pub cycles_kernel_load: u64,
    /// Input words streamed before the controllers start (part of the total).
    pub cycles_prefill: u64,
    pub cycles_input_stream: u64,
    pub cycles_compute: u64,
    pub cycles_output_drain: u64,
    pub cycles_total: u64,
    pub mac_busy_cycles: u64,
    /// Multiplications actually performed (non-zero activations only).
    pub mult_ops: u64,
    /// Multiply-accumulates of the equivalent dense layer.
    pub dense_macs: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub bytes_kernels: u64,
    pub input_sparsity: f64,
    pub output_sparsity: f64,
    pub utilization: f64,
    pub utilization_excl_load: f64,
}

impl LayerStats {
    pub fn bytes_total(&self) -> u64 {
        self.bytes_in + self.bytes_out + self.bytes_kernels
    }

    pub(crate) fn finish(&mut self, macs: usize) {
        let m = macs as f64;
        let busy = self.mac_busy_cycles as f64;
        self.utilization = if self.cycles_total == 0 {
            0.0
        } else {
            busy / (m * self.cycles_total as f64)
        };
        let active = self.cycles_total - self.cycles_kernel_load;
        self.utilization_excl_load = if active == 0 {
            0.0
        } else {
            busy / (m * active as f64)
        };
    }

    /// Adds counters of another layer; utilization is recomputed for the sum.
    /// Sparsities are left at zero as they do not add up.
    pub fn sum<'a>(layers: impl IntoIterator<Item = &'a LayerStats>, macs: usize) -> LayerStats {
        let mut t = LayerStats::default();
        for s in layers {
            t.passes += s.passes;
            t.input_reloaded |= s.input_reloaded;
            t.cycles_kernel_load += s.cycles_kernel_load;
            t.cycles_prefill += s.cycles_prefill;
            t.cycles_input_stream += s.cycles_input_stream;
            t.cycles_compute += s.cycles_compute;
            t.cycles_output_drain += s.cycles_output_drain;
            t.cycles_total += s.cycles_total;
            t.mac_busy_cycles += s.mac_busy_cycles;
            t.mult_ops += s.mult_ops;
            t.dense_macs += s.dense_macs;
            t.bytes_in += s.bytes_in;
            t.bytes_out += s.bytes_out;
            t.bytes_kernels += s.bytes_kernels;
        }
        t.finish(macs);
        t
    }
}

/// Energy of the DRAM transfers counted in `stats`, in joules.
pub fn estimate_dram_energy(stats: &LayerStats) -> f64 {
    dram_energy_for_bytes(stats.bytes_total())
}

pub fn dram_energy_for_bytes(bytes: u64) -> f64 {
    bytes as f64 * 8.0 * DRAM_JOULES_PER_BIT
}

/// Average DRAM power in watts when moving `joules_per_frame` at `fps`.
pub fn dram_power(joules_per_frame: f64, fps: f64) -> f64 {
    joules_per_frame * fps
}
