//! Q8.8 quantization, a saturating MAC and requantization back to 16 bits.
use nullhop::fxp::{mac, quantize, relu16, requantize, Fx32, QFormat};

fn main() -> nullhop::Result<()> {
    let q = QFormat::new(8)?;
    for x in [0.3, -1.25, 2.5 / 256.0, 127.999, 1000.0, -1000.0] {
        let v = quantize(x, q)?;
        println!("{x:>10} -> raw {:>6} -> {:.6}", v.raw(), v.to_f64(q));
    }

    let a = quantize(1.5, q)?;
    let w = quantize(-0.75, q)?;
    let mut acc = Fx32(0);
    for _ in 0..4 {
        acc = mac(acc, a, w);
    }
    // products carry 16 fractional bits
    let out = requantize(acc, 16, q);
    println!("4 x (1.5 * -0.75) = {:.4}, relu {:.4}", out.to_f64(q), relu16(out).to_f64(q));

    let big = mac(Fx32(i32::MAX - 10), quantize(100.0, q)?, quantize(100.0, q)?);
    println!("saturated accumulator: {}", big.raw());
    Ok(())
}
