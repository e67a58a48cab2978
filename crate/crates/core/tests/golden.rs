//! Golden model and pipeline against an independently written layer oracle.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nullhop::accel::{simulate_tensor, HardwareConfig};
use nullhop::netmodel::{random_kernels, random_tensor, Dims, FeatureMapTensor, KernelSet, LayerDescriptor};
use nullhop::refmodel::{apply_relu, conv2d, layer_forward, maxpool2x2};
use nullhop::{Fx16, QFormat};

/// Copies the input into an explicitly zero-padded [c][y][x] array, convolves
/// with wide integers, and only then rounds and saturates. Valid whenever no
/// partial sum leaves the 32-bit range.
fn naive_layer(input: &FeatureMapTensor, l: &LayerDescriptor, k: &KernelSet) -> Vec<Vec<Vec<i64>>> {
    let (hp, wp) = (l.h + 2 * l.pad, l.w + 2 * l.pad);
    let mut padded = vec![vec![vec![0i64; wp]; hp]; l.n_in];
    for p in input.stream_order_iter() {
        padded[p.channel][p.y + l.pad][p.x + l.pad] = p.value.0 as i64;
    }
    let (ho, wo) = (hp - l.k + 1, wp - l.k + 1);
    let shift = l.frac_in as i64 + l.frac_w as i64 - l.frac_out as i64;
    let mut out = vec![vec![vec![0i64; wo]; ho]; l.n_out];
    for j in 0..l.n_out {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut s = k.bias[j].0 as i64;
                for (i, plane) in padded.iter().enumerate() {
                    for ky in 0..l.k {
                        for kx in 0..l.k {
                            s += plane[oy + ky][ox + kx] * k.weight(j, i, ky, kx).0 as i64;
                        }
                    }
                }
                let v = if shift >= 0 {
                    let d = 1i64 << shift;
                    let q = s.div_euclid(d);
                    let r = s.rem_euclid(d);
                    if 2 * r > d || (2 * r == d && q % 2 != 0) {
                        q + 1
                    } else {
                        q
                    }
                } else {
                    s << -shift
                };
                let mut v = v.clamp(i16::MIN as i64, i16::MAX as i64);
                if l.relu {
                    v = v.max(0);
                }
                out[j][oy][ox] = v;
            }
        }
    }
    if !l.pool {
        return out;
    }
    out.iter()
        .map(|plane| {
            (0..ho / 2)
                .map(|y| {
                    (0..wo / 2)
                        .map(|x| {
                            plane[2 * y][2 * x]
                                .max(plane[2 * y][2 * x + 1])
                                .max(plane[2 * y + 1][2 * x])
                                .max(plane[2 * y + 1][2 * x + 1])
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn assert_matches_naive(t: &FeatureMapTensor, naive: &[Vec<Vec<i64>>]) {
    assert_eq!(t.channels(), naive.len());
    assert_eq!(t.height(), naive[0].len());
    assert_eq!(t.width(), naive[0][0].len());
    for p in t.stream_order_iter() {
        assert_eq!(p.value.0 as i64, naive[p.channel][p.y][p.x], "pixel {p:?}");
    }
}

fn random_layer(rng: &mut impl Rng) -> LayerDescriptor {
    let k = [1, 3, 5, 7][rng.gen_range(0..4)];
    let pad = rng.gen_range(0..=3);
    let pool = rng.gen();
    loop {
        let h = rng.gen_range(1..=10);
        let w = rng.gen_range(1..=10);
        let l = LayerDescriptor::new(rng.gen_range(1..=6), rng.gen_range(1..=9), k, h, w)
            .with_pad(pad)
            .with_pool(pool)
            .with_relu(rng.gen())
            .with_encode(rng.gen())
            .with_fracs(rng.gen_range(4..=9), rng.gen_range(4..=9), rng.gen_range(3..=12));
        if l.validate().is_ok() {
            return l;
        }
    }
}

#[test]
fn refmodel_three_channel_layer_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let l = LayerDescriptor::new(3, 4, 3, 8, 8).with_pad(1);
    let t = random_tensor(&mut rng, l.input_dims(), l.q_in(), 0.3, 256, false).unwrap();
    let k = random_kernels(&mut rng, &l, 128, 5000).unwrap();
    assert_matches_naive(&layer_forward(&t, &l, &k).unwrap(), &naive_layer(&t, &l, &k));
}

#[test]
fn relu_and_pool_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let d = Dims::new(rng.gen_range(1..5), rng.gen_range(2..9), rng.gen_range(2..9));
        let t = random_tensor(&mut rng, d, QFormat::default(), 0.2, i16::MAX, false).unwrap();
        let a = maxpool2x2(&apply_relu(&t)).unwrap();
        let b = apply_relu(&maxpool2x2(&t).unwrap());
        assert_eq!(a, b);
    }
}

#[test]
fn pooling_disabled_keeps_convolution_extent() {
    let l = LayerDescriptor::new(2, 3, 5, 12, 9).with_pad(2);
    let t = FeatureMapTensor::zeros(l.input_dims(), l.q_in()).unwrap();
    let k = KernelSet::new(3, 2, 5, l.q_w(), vec![Fx16(1); 150], vec![Default::default(); 3]).unwrap();
    let out = layer_forward(&t, &l, &k).unwrap();
    assert_eq!((out.height(), out.width()), (12 + 4 - 5 + 1, 9 + 4 - 5 + 1));
}

#[test]
fn conv2d_rejects_channel_mismatch() {
    let t = FeatureMapTensor::zeros(Dims::new(2, 4, 4), QFormat::default()).unwrap();
    let k = KernelSet::new(1, 3, 1, QFormat::default(), vec![Fx16(1); 3], vec![Default::default()]).unwrap();
    assert!(conv2d(&t, &k, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn refmodel_and_pipeline_match_naive_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_layer(&mut rng);
        let s = rng.gen_range(0.0..0.9);
        let t = random_tensor(&mut rng, l.input_dims(), l.q_in(), s, 256, false).unwrap();
        let k = random_kernels(&mut rng, &l, 128, 1 << 14).unwrap();
        let naive = naive_layer(&t, &l, &k);
        assert_matches_naive(&layer_forward(&t, &l, &k).unwrap(), &naive);
        let (out, stats) = simulate_tensor(&t, &k, &l, &HardwareConfig::default()).unwrap();
        assert_matches_naive(&out.to_tensor().unwrap(), &naive);
        prop_assert!(stats.utilization <= stats.utilization_excl_load);
        prop_assert!(stats.utilization_excl_load <= 1.0);
    }
}
