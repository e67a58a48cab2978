//! One layer through the pipeline, checked against the golden model.
use nullhop::accel::{simulate_tensor, HardwareConfig};
use nullhop::netmodel::{random_kernels, random_tensor, LayerDescriptor};
use nullhop::refmodel::layer_forward;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nullhop::Result<()> {
    let layer = LayerDescriptor::new(32, 64, 3, 28, 28).with_pad(1).with_pool(true);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let input = random_tensor(&mut rng, layer.input_dims(), layer.q_in(), 0.6, 256, true)?;
    let kernels = random_kernels(&mut rng, &layer, 128, 1 << 12)?;

    let hw = HardwareConfig::default();
    let (out, st) = simulate_tensor(&input, &kernels, &layer, &hw)?;
    let golden = layer_forward(&input, &layer, &kernels)?;
    assert_eq!(out.to_tensor()?, golden);

    println!("output {} sparsity {:.3}, matches golden model", golden.dims(), golden.sparsity());
    println!("passes         {}", st.passes);
    println!("cycles         {}", st.cycles_total);
    println!("  kernel load  {}", st.cycles_kernel_load);
    println!("  compute      {}", st.cycles_compute);
    println!("  drain        {}", st.cycles_output_drain);
    println!("mult ops       {} of {} dense", st.mult_ops, st.dense_macs);
    println!("utilization    {:.3} ({:.3} without load)", st.utilization, st.utilization_excl_load);
    Ok(())
}
