//! Kernel-memory grouping, passes and cluster sizes for every VGG19 layer.
use nullhop::accel::schedule::plan_layer;
use nullhop::accel::HardwareConfig;
use nullhop::zoo;

fn main() -> nullhop::Result<()> {
    let hw = HardwareConfig::default();
    println!("{:>3} {:>18} {:>5} {:>6} {:>8} {:>11}", "#", "layer", "group", "passes", "cluster", "controllers");
    for (i, l) in zoo::vgg19().conv_layers().enumerate() {
        let s = plan_layer(l, &hw)?;
        let p = &s.passes[0];
        println!(
            "{i:>3} {:>18} {:>5} {:>6} {:>8} {:>11}",
            format!("{}x{} {}->{}", l.h, l.w, l.n_in, l.n_out),
            s.bank_group,
            s.pass_count(),
            p.cluster_size,
            p.active_controllers
        );
    }
    Ok(())
}
