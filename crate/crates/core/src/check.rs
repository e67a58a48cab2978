//! Randomised equivalence checks between the pipeline and the golden model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::accel::{plan_layer, simulate_layer_with, Fault, HardwareConfig, SimOptions};
use crate::codec;
use crate::netmodel::{random_kernels, random_tensor, Dims, FeatureMapTensor, KernelSet, LayerDescriptor};
use crate::refmodel::layer_forward;
use crate::{QFormat, Result};

/// Largest dense MAC count of a generated layer.
pub const DEFAULT_MAC_BUDGET: u64 = 4_000_000;

/// Raw magnitude bounds of generated operands. With at most 128 x 49 products
/// of |a| <= 256, |w| <= 128 per output, no accumulator can saturate, so the
/// result does not depend on accumulation order.
pub const ACTIVATION_RANGE: i16 = 256;
pub const WEIGHT_RANGE: i16 = 128;
pub const BIAS_RANGE: i32 = 1 << 16;

#[derive(Debug, Clone)]
pub struct LayerCase {
    pub seed: u64,
    pub layer: LayerDescriptor,
    pub input: FeatureMapTensor,
    pub kernels: KernelSet,
    pub input_sparsity: f64,
}

/// Draws a layer spanning k in {1,3,5,7}, 1..=128 inputs, 5..=256 outputs,
/// padding 0..=3 and every flag combination, with spatial size at most 32 and
/// a dense cost below `mac_budget`.
pub fn random_case(seed: u64, mac_budget: u64) -> Result<LayerCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = loop {
        let k = [1, 3, 5, 7][rng.gen_range(0..4)];
        let pad = rng.gen_range(0..=3);
        let n_in = rng.gen_range(1..=128);
        let n_out = rng.gen_range(5..=256);
        let pool = rng.gen::<bool>();
        let min_out = if pool { 2 } else { 1 };
        let per_pixel = (n_in * n_out * k * k) as u64;
        let max_pixels = mac_budget / per_pixel;
        if max_pixels < (min_out * min_out) as u64 {
            continue;
        }
        let side = ((max_pixels as f64).sqrt() as usize).clamp(min_out, 32);
        let ho = rng.gen_range(min_out..=side);
        let wo = rng.gen_range(min_out..=side);
        let h = (ho + k - 1).saturating_sub(2 * pad).clamp(1, 32);
        let w = (wo + k - 1).saturating_sub(2 * pad).clamp(1, 32);
        let frac_in = rng.gen_range(4..=10);
        let frac_w = rng.gen_range(4..=10);
        let frac_out = rng.gen_range(2..=12);
        let l = LayerDescriptor::new(n_in, n_out, k, h, w)
            .with_pad(pad)
            .with_pool(pool)
            .with_relu(rng.gen())
            .with_encode(rng.gen())
            .with_fracs(frac_in, frac_w, frac_out);
        if l.validate().is_ok() && l.dense_macs() <= mac_budget {
            break l;
        }
    };
    let input_sparsity = rng.gen_range(0.0..0.95);
    let non_negative = rng.gen::<bool>();
    let input = random_tensor(
        &mut rng,
        layer.input_dims(),
        QFormat::new(layer.frac_in)?,
        input_sparsity,
        ACTIVATION_RANGE,
        non_negative,
    )?;
    let kernels = random_kernels(&mut rng, &layer, WEIGHT_RANGE, BIAS_RANGE)?;
    Ok(LayerCase {
        seed,
        layer,
        input,
        kernels,
        input_sparsity,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseOutcome {
    pub seed: u64,
    pub layer: LayerDescriptor,
    pub mismatched_pixels: usize,
    pub error: Option<String>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.mismatched_pixels == 0 && self.error.is_none()
    }
}

/// Simulates a case and counts output pixels differing from the golden model.
pub fn check_case(case: &LayerCase, hw: &HardwareConfig, fault: Option<Fault>) -> CaseOutcome {
    let run = || -> Result<usize> {
        let expected = layer_forward(&case.input, &case.layer, &case.kernels)?;
        let schedule = plan_layer(&case.layer, hw)?;
        let stream = codec::encode(&case.input);
        let mut opts = SimOptions { fault, trace: None };
        let (out, _) = simulate_layer_with(&stream, &case.kernels, &case.layer, &schedule, hw, &mut opts)?;
        let got = out.to_tensor()?;
        Ok(got
            .values()
            .iter()
            .zip(expected.values())
            .filter(|(a, b)| a != b)
            .count())
    };
    match run() {
        Ok(mismatched_pixels) => CaseOutcome {
            seed: case.seed,
            layer: case.layer,
            mismatched_pixels,
            error: None,
        },
        Err(e) => CaseOutcome {
            seed: case.seed,
            layer: case.layer,
            mismatched_pixels: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Encodes and decodes a random tensor, checking identity and the size bound
/// `cis <= bits <= cis + 16 * rows + 32`.
pub fn check_codec(seed: u64) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::new(rng.gen_range(1..=64), rng.gen_range(1..=32), rng.gen_range(1..=32));
    let s = rng.gen_range(0.0..=1.0);
    let t = random_tensor(&mut rng, dims, QFormat::default(), s, i16::MAX, false)
        .map_err(|e| e.to_string())?;
    let stream = codec::encode(&t);
    let back = codec::decode(&stream).map_err(|e| e.to_string())?;
    if back != t {
        return Err(format!("roundtrip mismatch for {dims} at sparsity {s:.3}"));
    }
    let cis = codec::cis_bits_exact(dims.len() as u64, 16, t.nonzero_count() as u64);
    let bits = stream.bits();
    if bits < cis || bits > cis + 16 * dims.height as u64 + 32 {
        return Err(format!("{bits} stream bits outside [{cis}, {cis} + 16*rows + 32] for {dims}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheckSummary {
    pub seed: u64,
    pub trials: usize,
    pub layer_failures: usize,
    pub codec_failures: usize,
    pub first_layer_failure: Option<CaseOutcome>,
    pub first_codec_failure: Option<String>,
}

impl SelfCheckSummary {
    pub fn passed(&self) -> bool {
        self.layer_failures == 0 && self.codec_failures == 0
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(trial as u64)
}

/// Runs `trials` layer-equivalence and codec-roundtrip cases in parallel.
pub fn selfcheck(seed: u64, trials: usize, fault: Option<Fault>) -> SelfCheckSummary {
    let hw = HardwareConfig::default();
    let layers: Vec<CaseOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            match random_case(s, DEFAULT_MAC_BUDGET) {
                Ok(case) => check_case(&case, &hw, fault),
                Err(e) => CaseOutcome {
                    seed: s,
                    layer: LayerDescriptor::new(1, 1, 1, 1, 1),
                    mismatched_pixels: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let codecs: Vec<std::result::Result<(), String>> = (0..trials)
        .into_par_iter()
        .map(|t| check_codec(trial_seed(seed ^ 0xc0dec, t)))
        .collect();
    SelfCheckSummary {
        seed,
        trials,
        layer_failures: layers.iter().filter(|o| !o.passed()).count(),
        codec_failures: codecs.iter().filter(|r| r.is_err()).count(),
        first_layer_failure: layers.into_iter().find(|o| !o.passed()),
        first_codec_failure: codecs.into_iter().find_map(|r| r.err()),
    }
}
