//! Whole-network timing run. Pass a network JSON, or VGG16 is used.
//!
//!     cargo run --release --example run_network -- crates/core/nets/giga1net.json 0.8
use nullhop::accel::HardwareConfig;
use nullhop::netmodel::load_network;
use nullhop::report::{run_network, synthetic_input, RunOptions};
use nullhop::zoo;

fn main() -> nullhop::Result<()> {
    let mut args = std::env::args().skip(1);
    let net = match args.next() {
        Some(p) => load_network(p)?,
        None => zoo::vgg16(),
    };
    let sparsity = args.next().map(|s| s.parse().expect("sparsity")).unwrap_or(0.82);

    let input = synthetic_input(&net, 1)?;
    let run = run_network(
        &net,
        &input,
        &HardwareConfig::default(),
        RunOptions {
            synthetic_sparsity: Some(sparsity),
            seed: 1,
            trace: None,
        },
    )?;
    print!("{}", run.report.to_table());
    Ok(())
}
