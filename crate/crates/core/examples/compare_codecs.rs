//! Sparsity-map versus run-length size over a sparsity sweep.
use nullhop::codec::threshold_sparsity;
use nullhop::report::{codec_sweep, SWEEP_DIMS};

fn main() -> nullhop::Result<()> {
    let sweep: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let points = codec_sweep(&sweep, 16, 200, SWEEP_DIMS, 1)?;
    println!("{:>8} {:>8} {:>8} {:>8}", "sparsity", "sm", "rl", "ideal");
    for p in &points {
        println!(
            "{:>8.2} {:>8.4} {:>8.4} {:>8.4}",
            p.measured_sparsity, p.sm_ratio, p.rl_ratio, p.cis_ratio
        );
    }
    for n in [8, 12, 16, 24, 32] {
        println!("{n:>2}-bit values: map pays off above sparsity {:.4}", threshold_sparsity(n));
    }
    Ok(())
}
