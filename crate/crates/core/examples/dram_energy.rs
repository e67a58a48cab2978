//! Off-chip traffic and energy per frame for the bundled networks.
use nullhop::accel::stats::dram_energy_for_bytes;
use nullhop::accel::HardwareConfig;
use nullhop::report::{run_network, synthetic_input, RunOptions};
use nullhop::zoo;

fn main() -> nullhop::Result<()> {
    let hw = HardwareConfig::default();
    println!("{:>14} {:>10} {:>10} {:>10} {:>8}", "network", "MB/frame", "mJ/frame", "frames/s", "mW");
    for net in zoo::all() {
        let input = synthetic_input(&net, 1)?;
        let r = run_network(&net, &input, &hw, RunOptions {
            synthetic_sparsity: Some(0.82),
            seed: 1,
            trace: None,
        })?
        .report;
        let j = dram_energy_for_bytes(r.bytes_per_frame);
        println!(
            "{:>14} {:>10.2} {:>10.3} {:>10.1} {:>8.1}",
            r.network,
            r.bytes_per_frame as f64 / 1e6,
            j * 1e3,
            r.frames_per_s,
            r.dram_power_w * 1e3
        );
    }
    Ok(())
}
