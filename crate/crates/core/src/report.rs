//! Whole-network runs and codec sweeps.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{
    dram_energy_for_bytes, dram_power, estimate_layer, plan_layer, simulate_layer_with, HardwareConfig,
    LayerStats, SimOptions,
};
use crate::codec::{self, compression_report, CompressedStream, CompressionReport};
use crate::fxp::Fx16;
use crate::netmodel::{load_weights, random_tensor, Dims, FeatureMapTensor, NetworkDescriptor};
use crate::refmodel::{fc_forward, DenseWeights};
use crate::{Error, QFormat, Result};

/// Default activation sparsity of synthetic runs.
pub const DEFAULT_SYNTHETIC_SPARSITY: f64 = 0.82;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Every layer computed with its weights.
    Functional,
    /// Timing only; each layer's output is a random tensor at the target sparsity.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub k: usize,
    pub h: usize,
    pub w: usize,
    pub pad: usize,
    pub pool: bool,
    pub cluster_sizes: Vec<usize>,
    pub stats: LayerStats,
    pub gop: f64,
    pub dram_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub network: String,
    pub mode: RunMode,
    pub synthetic_sparsity: Option<f64>,
    pub clock_hz: f64,
    pub macs: usize,
    pub layers: Vec<LayerReport>,
    pub totals: LayerStats,
    pub gop_per_frame: f64,
    pub ms_per_frame: f64,
    pub frames_per_s: f64,
    pub gop_per_s: f64,
    pub efficiency: f64,
    pub bytes_per_frame: u64,
    pub dram_energy_j_per_frame: f64,
    pub dram_power_w: f64,
}

impl RunReport {
    fn build(
        network: String,
        mode: RunMode,
        synthetic_sparsity: Option<f64>,
        hw: &HardwareConfig,
        layers: Vec<LayerReport>,
    ) -> Self {
        let totals = LayerStats::sum(layers.iter().map(|l| &l.stats), hw.macs);
        let gop_per_frame = 2.0 * totals.dense_macs as f64 / 1e9;
        let seconds = totals.cycles_total as f64 / hw.clock_hz;
        let frames_per_s = if seconds > 0.0 { 1.0 / seconds } else { 0.0 };
        let gop_per_s = gop_per_frame * frames_per_s;
        let bytes = totals.bytes_total();
        let energy = dram_energy_for_bytes(bytes);
        Self {
            network,
            mode,
            synthetic_sparsity,
            clock_hz: hw.clock_hz,
            macs: hw.macs,
            layers,
            gop_per_frame,
            ms_per_frame: seconds * 1e3,
            frames_per_s,
            gop_per_s,
            efficiency: gop_per_s * 1e9 / hw.peak_ops(),
            bytes_per_frame: bytes,
            dram_energy_j_per_frame: energy,
            dram_power_w: dram_power(energy, frames_per_s),
            totals,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable table carrying the same numbers as [`Self::to_json`].
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} ({:?}, {} MACs @ {} MHz)",
            self.network,
            self.mode,
            self.macs,
            self.clock_hz / 1e6
        );
        let _ = writeln!(
            s,
            "{:>3} {:>5} {:>5} {:>2} {:>4} {:>4} {:>3} {:>6} {:>12} {:>12} {:>8} {:>8} {:>12}",
            "#", "n_in", "n_out", "k", "h", "w", "pad", "passes", "cycles", "mult_ops", "util", "util_nl", "bytes"
        );
        for l in &self.layers {
            let st = &l.stats;
            let _ = writeln!(
                s,
                "{:>3} {:>5} {:>5} {:>2} {:>4} {:>4} {:>3} {:>6} {:>12} {:>12} {:>8.4} {:>8.4} {:>12}",
                l.index,
                l.n_in,
                l.n_out,
                l.k,
                l.h,
                l.w,
                l.pad,
                st.passes,
                st.cycles_total,
                st.mult_ops,
                st.utilization,
                st.utilization_excl_load,
                st.bytes_total()
            );
        }
        let t = &self.totals;
        let _ = writeln!(s, "cycles_total          {}", t.cycles_total);
        let _ = writeln!(s, "utilization           {:.4}", t.utilization);
        let _ = writeln!(s, "utilization_excl_load {:.4}", t.utilization_excl_load);
        let _ = writeln!(s, "gop_per_frame         {:.4}", self.gop_per_frame);
        let _ = writeln!(s, "ms_per_frame          {:.4}", self.ms_per_frame);
        let _ = writeln!(s, "frames_per_s          {:.2}", self.frames_per_s);
        let _ = writeln!(s, "gop_per_s             {:.2}", self.gop_per_s);
        let _ = writeln!(s, "efficiency            {:.4}", self.efficiency);
        let _ = writeln!(s, "bytes_per_frame       {}", self.bytes_per_frame);
        let _ = writeln!(s, "dram_energy_j         {:.6e}", self.dram_energy_j_per_frame);
        let _ = writeln!(s, "dram_power_w          {:.6}", self.dram_power_w);
        s
    }
}

pub struct RunOptions<'a> {
    /// Forces synthetic mode at this sparsity. Synthetic mode is also used,
    /// at [`DEFAULT_SYNTHETIC_SPARSITY`], when any layer lacks weights.
    pub synthetic_sparsity: Option<f64>,
    pub seed: u64,
    pub trace: Option<&'a mut dyn Write>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            synthetic_sparsity: None,
            seed: 1,
            trace: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub report: RunReport,
    /// Output of the last convolutional layer.
    pub output: FeatureMapTensor,
    /// Result of the fully-connected tail, when it was evaluated.
    pub fc_output: Option<Vec<Fx16>>,
}

/// Dense random image at the first layer's input shape.
pub fn synthetic_input(net: &NetworkDescriptor, seed: u64) -> Result<FeatureMapTensor> {
    let first = &net.layers[0].layer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tensor(&mut rng, first.input_dims(), first.q_in(), 0.0, 256, true)
}

/// Runs the convolutional layers one after another, each layer's encoded
/// output feeding the next. The fully-connected tail, if present and with
/// weights, is evaluated functionally on the flattened (stream order) output
/// and takes no cycles.
pub fn run_network(
    net: &NetworkDescriptor,
    input: &FeatureMapTensor,
    hw: &HardwareConfig,
    opts: RunOptions<'_>,
) -> Result<NetworkRun> {
    net.validate()?;
    hw.validate()?;
    let first = &net.layers[0].layer;
    first.check_input(input)?;
    let has_weights = net.layers.iter().all(|l| l.weights.is_some());
    let synthetic = match opts.synthetic_sparsity {
        Some(s) => Some(s),
        None if has_weights => None,
        None => Some(DEFAULT_SYNTHETIC_SPARSITY),
    };
    if let Some(s) = synthetic {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Limit(format!("synthetic sparsity {s} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace = opts.trace;
    let mut stream = codec::encode(input);
    let mut last = input.clone();
    let mut layers = Vec::with_capacity(net.layers.len());
    for (idx, nl) in net.layers.iter().enumerate() {
        let layer = &nl.layer;
        let schedule = plan_layer(layer, hw).map_err(|e| Error::LayerMismatch {
            layer: idx,
            msg: e.to_string(),
        })?;
        if let Some(t) = trace.as_mut() {
            writeln!(t, "# layer {idx}")?;
        }
        let mut sim = SimOptions {
            fault: None,
            trace: trace.as_mut().map(|t| &mut **t as &mut dyn Write),
        };
        let (out, stats) = match synthetic {
            None => {
                let path = nl.weights.as_ref().expect("checked above");
                let kernels = load_weights(path)?;
                simulate_layer_with(&stream, &kernels, layer, &schedule, hw, &mut sim)
            }
            Some(s) => {
                let target = random_tensor(&mut rng, layer.output_dims(), layer.q_out(), s, 256, layer.relu)?;
                estimate_layer(&stream, layer, &schedule, hw, &target, &mut sim)
            }
        }
        .map_err(|e| match e {
            Error::Io { .. } | Error::LayerMismatch { .. } => e,
            other => Error::LayerMismatch {
                layer: idx,
                msg: other.to_string(),
            },
        })?;
        last = out.to_tensor()?;
        stream = out.to_stream();
        layers.push(LayerReport {
            index: idx,
            n_in: layer.n_in,
            n_out: layer.n_out,
            k: layer.k,
            h: layer.h,
            w: layer.w,
            pad: layer.pad,
            pool: layer.pool,
            cluster_sizes: schedule.passes.iter().map(|p| p.cluster_size).collect(),
            gop: 2.0 * layer.dense_macs() as f64 / 1e9,
            dram_energy_j: dram_energy_for_bytes(stats.bytes_total()),
            stats,
        });
    }
    let fc_output = if synthetic.is_none() && !net.fc.is_empty() && net.fc.iter().all(|f| f.weights.is_some()) {
        let mut x = last.values().to_vec();
        for fc in &net.fc {
            let w = DenseWeights::from_kernels(load_weights(fc.weights.as_ref().unwrap())?)?;
            x = fc_forward(&x, fc, &w)?;
        }
        Some(x)
    } else {
        None
    };
    let name = net.name.clone().unwrap_or_else(|| "network".into());
    let mode = if synthetic.is_some() {
        RunMode::Synthetic
    } else {
        RunMode::Functional
    };
    Ok(NetworkRun {
        report: RunReport::build(name, mode, synthetic, hw, layers),
        output: last,
        fc_output,
    })
}

/// Mean sizes of one sparsity point of a codec sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub target_sparsity: f64,
    pub measured_sparsity: f64,
    pub trials: usize,
    pub mean_raw_bits: f64,
    pub mean_sm_bits: f64,
    pub mean_cis_bits: f64,
    pub mean_rl_bits: f64,
    pub sm_ratio: f64,
    pub rl_ratio: f64,
    pub cis_ratio: f64,
}

impl SweepPoint {
    fn from_reports(target: f64, reports: &[CompressionReport]) -> Self {
        let n = reports.len() as f64;
        let mean = |f: fn(&CompressionReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let raw = mean(|r| r.raw_bits as f64);
        let sm = mean(|r| r.sm_bits as f64);
        let cis = mean(|r| r.cis_bits as f64);
        let rl = mean(|r| r.rl_bits as f64);
        Self {
            target_sparsity: target,
            measured_sparsity: mean(|r| r.sparsity),
            trials: reports.len(),
            mean_raw_bits: raw,
            mean_sm_bits: sm,
            mean_cis_bits: cis,
            mean_rl_bits: rl,
            sm_ratio: sm / raw,
            rl_ratio: rl / raw,
            cis_ratio: cis / raw,
        }
    }
}

/// Shape of the tensors in synthetic codec corpora.
pub const SWEEP_DIMS: Dims = Dims {
    channels: 16,
    height: 16,
    width: 16,
};

/// Encodes `trials` random tensors per sparsity point with both codecs.
/// Pixels are zero independently with the point's probability.
pub fn codec_sweep(sparsities: &[f64], precision: u32, trials: usize, dims: Dims, seed: u64) -> Result<Vec<SweepPoint>> {
    if trials == 0 {
        return Err(Error::Parse("codec sweep needs at least one trial".into()));
    }
    dims.validate()?;
    sparsities
        .iter()
        .enumerate()
        .map(|(p, &s)| {
            let reports = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((p as u64) << 32) ^ t as u64);
                    let tensor = random_tensor(&mut rng, dims, QFormat::default(), s, i16::MAX, false)?;
                    Ok(compression_report(&tensor, precision))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint::from_reports(s, &reports))
        })
        .collect()
}

/// Parses `start:end:step` into the list of points, end inclusive.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("sweep {text:?}: {e}")))?;
    let [start, end, step] = parts[..] else {
        return Err(Error::Parse(format!("sweep {text:?} is not start:end:step")));
    };
    if !(step > 0.0) || end < start || !(0.0..=1.0).contains(&start) || end > 1.0 {
        return Err(Error::Parse(format!("sweep {text:?} is not an increasing range in [0, 1]")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Codec comparison over every `.nht` tensor in a directory.
pub fn corpus_comparison(dir: &Path, precision: u32) -> Result<codec::CodecComparison> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "nht"))
        .collect();
    paths.sort();
    let corpus = paths
        .iter()
        .map(FeatureMapTensor::load)
        .collect::<Result<Vec<_>>>()?;
    codec::compare_codecs(&corpus, precision)
}

/// Loads either a `.nht` tensor or a `.nhc` stream as a tensor.
pub fn load_any_tensor(path: &Path) -> Result<FeatureMapTensor> {
    if path.extension().is_some_and(|x| x == "nhc") {
        codec::decode(&CompressedStream::load(path)?)
    } else {
        FeatureMapTensor::load(path)
    }
}
