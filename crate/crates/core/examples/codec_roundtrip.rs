//! Compress a sparse feature map, walk its segments and decode it again.
use nullhop::codec::{compression_report, decode, encode};
use nullhop::netmodel::{random_tensor, Dims};
use nullhop::QFormat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nullhop::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = random_tensor(&mut rng, Dims::new(32, 28, 28), QFormat::default(), 0.75, 2000, true)?;
    let s = encode(&t);

    println!("tensor  {} sparsity {:.3}", t.dims(), t.sparsity());
    println!("stream  {} words, {} bits", s.word_count(), s.bits());
    for seg in s.segments().take(3) {
        let seg = seg?;
        println!(
            "  row {} pixel {:>3}: map {:016b} ({} non-zero)",
            seg.row,
            seg.first_pixel,
            seg.map,
            seg.nonzero()
        );
    }

    let back = decode(&s)?;
    assert_eq!(back, t);
    let r = compression_report(&t, 16);
    println!("sm {:.4}  rl {:.4}  of raw size", r.sm_ratio(), r.rl_ratio());
    Ok(())
}
