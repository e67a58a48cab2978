use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nullhop::accel::schedule::plan_layer;
use nullhop::accel::{simulate_layer_with, simulate_tensor, HardwareConfig, SimOptions};
use nullhop::codec::encode;
use nullhop::netmodel::{random_kernels, random_tensor, FeatureMapTensor, KernelSet, LayerDescriptor, NetworkDescriptor};
use nullhop::refmodel::{apply_relu, layer_forward};
use nullhop::report::{run_network, synthetic_input, RunOptions};
use nullhop::{zoo, Fx16, Fx32};

struct TraceLine {
    phase: String,
    consumed: u64,
    emitted: u64,
    words_in: u64,
}

fn parse_trace(text: &str) -> Vec<TraceLine> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 5, "{l}");
            TraceLine {
                phase: f[1].to_string(),
                consumed: f[2].parse().unwrap(),
                emitted: f[3].parse().unwrap(),
                words_in: f[4].parse().unwrap(),
            }
        })
        .collect()
}

/// Products with a non-zero activation, counted over every conv output
/// position of every output channel.
fn nonzero_products(input: &FeatureMapTensor, l: &LayerDescriptor) -> u64 {
    let (ho, wo) = l.conv_out_hw();
    let mut n = 0u64;
    for oy in 0..ho {
        for ox in 0..wo {
            for ky in 0..l.k {
                for kx in 0..l.k {
                    let (py, px) = (oy + ky, ox + kx);
                    if py < l.pad || px < l.pad || py - l.pad >= l.h || px - l.pad >= l.w {
                        continue;
                    }
                    for i in 0..l.n_in {
                        if input.get(i, px - l.pad, py - l.pad).0 != 0 {
                            n += 1;
                        }
                    }
                }
            }
        }
    }
    n * l.n_out as u64
}

fn random_setup(seed: u64) -> (LayerDescriptor, FeatureMapTensor, KernelSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = [1, 3, 5][rng.gen_range(0..3)];
    let l = loop {
        let l = LayerDescriptor::new(rng.gen_range(1..=20), rng.gen_range(1..=40), k, rng.gen_range(k..=14), rng.gen_range(k..=14))
            .with_pad(rng.gen_range(0..=k / 2))
            .with_pool(rng.gen())
            .with_encode(rng.gen());
        if l.validate().is_ok() {
            break l;
        }
    };
    let s = rng.gen_range(0.0..0.95);
    let t = random_tensor(&mut rng, l.input_dims(), l.q_in(), s, 256, true).unwrap();
    let kernels = random_kernels(&mut rng, &l, 128, 1 << 14).unwrap();
    (l, t, kernels)
}

#[test]
fn mult_ops_count_only_nonzero_activations() {
    let hw = HardwareConfig::default();
    for seed in 0..40 {
        let (l, t, k) = random_setup(seed);
        let (_, stats) = simulate_tensor(&t, &k, &l, &hw).unwrap();
        assert_eq!(stats.mult_ops, nonzero_products(&t, &l), "seed {seed}");
        assert_eq!(stats.mac_busy_cycles, stats.mult_ops);
        assert!(stats.mult_ops <= stats.dense_macs);
        assert!(stats.utilization <= stats.utilization_excl_load + 1e-12);
        assert!(stats.utilization_excl_load <= 1.0);
    }
}

#[test]
fn trace_respects_bus_widths_and_conserves_pixels() {
    let hw = HardwareConfig::default();
    for seed in 100..130 {
        let (l, t, k) = random_setup(seed);
        let schedule = plan_layer(&l, &hw).unwrap();
        let mut buf = Vec::new();
        let (out, stats) = simulate_layer_with(
            &encode(&t),
            &k,
            &l,
            &schedule,
            &hw,
            &mut SimOptions {
                fault: None,
                trace: Some(&mut buf),
            },
        )
        .unwrap();
        let lines = parse_trace(std::str::from_utf8(&buf).unwrap());
        assert_eq!(lines.len() as u64, stats.cycles_total, "seed {seed}");
        assert!(lines.iter().all(|x| x.emitted <= hw.output_pixels_per_cycle as u64));
        assert!(lines.iter().all(|x| x.words_in <= 1));
        assert!(lines.iter().all(|x| x.consumed <= l.k as u64 + 1));

        let words_in: u64 = lines.iter().map(|x| x.words_in).sum();
        let kload = lines.iter().filter(|x| x.phase == "kernel_load").count() as u64;
        let prefill = lines.iter().filter(|x| x.phase == "prefill").count() as u64;
        assert_eq!(kload, stats.cycles_kernel_load);
        assert_eq!(prefill, stats.cycles_prefill);
        assert_eq!(words_in - kload, stats.bytes_in / 4);

        let emitted: u64 = lines.iter().map(|x| x.emitted).sum();
        let nz = out.to_tensor().unwrap().nonzero_count() as u64;
        assert_eq!(emitted, nz * stats.passes as u64);

        let consumed: u64 = lines.iter().map(|x| x.consumed).sum();
        let (ho, _) = l.conv_out_hw();
        let mut expect = 0u64;
        for r in 0..ho.div_ceil(2) {
            let top = 2 * r;
            let bottom = (2 * r + 1).min(ho - 1) + l.k - 1;
            for py in top..=bottom {
                if py >= l.pad && py - l.pad < l.h {
                    let y = py - l.pad;
                    expect += t.row(y).iter().filter(|v| v.0 != 0).count() as u64;
                }
            }
        }
        assert_eq!(consumed, expect * stats.passes as u64, "seed {seed}");
    }
}

#[test]
fn plan_is_deterministic() {
    let hw = HardwareConfig::default();
    for l in zoo::vgg19().conv_layers() {
        assert_eq!(plan_layer(l, &hw).unwrap(), plan_layer(l, &hw).unwrap());
    }
}

#[test]
fn identity_layer_passes_input_through() {
    let c = 16;
    let l = LayerDescriptor::new(c, c, 1, 12, 12);
    let one = Fx16(1 << l.frac_w);
    let mut w = vec![Fx16(0); c * c];
    for j in 0..c {
        w[j * c + j] = one;
    }
    let k = KernelSet::new(c, c, 1, l.q_w(), w, vec![Fx32(0); c]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_tensor(&mut rng, l.input_dims(), l.q_in(), 0.5, 1000, false).unwrap();
    let (out, stats) = simulate_tensor(&t, &k, &l, &HardwareConfig::default()).unwrap();
    assert_eq!(out.to_tensor().unwrap(), apply_relu(&t));

    let net = NetworkDescriptor::from_layers("identity", [l.clone()]);
    let run = run_network(&net, &t, &HardwareConfig::default(), RunOptions {
        synthetic_sparsity: Some(0.5),
        seed: 1,
        trace: None,
    })
    .unwrap();
    assert!(run.report.efficiency <= 1.0);
    assert!(stats.utilization <= 1.0);
}

fn small_functional_net(dir: &std::path::Path) -> (NetworkDescriptor, Vec<KernelSet>) {
    let layers = [
        LayerDescriptor::new(3, 16, 3, 16, 16).with_pad(1).with_pool(true),
        LayerDescriptor::new(16, 24, 3, 8, 8).with_pad(1),
        LayerDescriptor::new(24, 8, 1, 8, 8).with_pool(true).with_encode(false),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut net = NetworkDescriptor::from_layers("small", layers.iter().cloned());
    let mut kernels = Vec::new();
    for (i, (nl, l)) in net.layers.iter_mut().zip(&layers).enumerate() {
        let k = random_kernels(&mut rng, l, 64, 1 << 12).unwrap();
        let p = dir.join(format!("l{i}.nhw"));
        k.save(&p).unwrap();
        nl.weights = Some(p);
        kernels.push(k);
    }
    (net, kernels)
}

#[test]
fn functional_run_chains_layers_and_sums_totals() {
    let dir = tempfile::tempdir().unwrap();
    let (net, kernels) = small_functional_net(dir.path());
    let hw = HardwareConfig::default().with_clock_mhz(250.0);
    let input = synthetic_input(&net, 3).unwrap();
    let mut trace = Vec::new();
    let run = run_network(&net, &input, &hw, RunOptions {
        synthetic_sparsity: None,
        seed: 0,
        trace: Some(&mut trace),
    })
    .unwrap();

    let mut x = input.clone();
    for (nl, k) in net.layers.iter().zip(&kernels) {
        x = layer_forward(&x, &nl.layer, k).unwrap();
    }
    assert_eq!(run.output, x);

    let r = &run.report;
    let cycles: u64 = r.layers.iter().map(|l| l.stats.cycles_total).sum();
    let mults: u64 = r.layers.iter().map(|l| l.stats.mult_ops).sum();
    let bytes: u64 = r.layers.iter().map(|l| l.stats.bytes_total()).sum();
    assert_eq!(r.totals.cycles_total, cycles);
    assert_eq!(r.totals.mult_ops, mults);
    assert_eq!(r.bytes_per_frame, bytes);
    assert!((r.ms_per_frame - cycles as f64 / 250e6 * 1e3).abs() < 1e-9);
    assert!((r.gop_per_frame - net.dense_ops() as f64 / 1e9).abs() < 1e-12);
    assert_eq!(parse_trace(std::str::from_utf8(&trace).unwrap()).len() as u64, cycles);

    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["totals"]["cycles_total"].as_u64(), Some(cycles));
    assert_eq!(json["layers"].as_array().unwrap().len(), 3);
    let table = r.to_table();
    assert!(table.contains(&format!("cycles_total          {cycles}")));
    assert!(table.contains(&format!("ms_per_frame          {:.4}", r.ms_per_frame)));
}

#[test]
fn synthetic_runs_are_seed_deterministic() {
    let net = zoo::roshambo_net();
    let hw = HardwareConfig::default();
    let input = synthetic_input(&net, 1).unwrap();
    let go = |seed| {
        run_network(&net, &input, &hw, RunOptions {
            synthetic_sparsity: Some(0.8),
            seed,
            trace: None,
        })
        .unwrap()
        .report
    };
    let (a, b) = (go(4), go(4));
    assert_eq!(a.totals, b.totals);
    assert!((a.gop_per_frame - 0.018).abs() < 0.001);
}
