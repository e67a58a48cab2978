//! Walk the first stripe of a small padded input the way the row state
//! machines do and show which pixels come out each cycle.
use nullhop::accel::idp::{idp_decode_stripe, Stripe};
use nullhop::codec::encode;
use nullhop::netmodel::{random_tensor, Dims};
use nullhop::QFormat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nullhop::Result<()> {
    let (k, pad) = (3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_tensor(&mut rng, Dims::new(2, 6, 5), QFormat::default(), 0.5, 100, true)?;
    let s = encode(&t);
    let stripe = Stripe::for_output_rows(6).next().unwrap();

    let mut cycle = 0;
    let walk = idp_decode_stripe(&s, &stripe, k, pad, pad, true, |px| {
        let pretty: Vec<String> = px.iter().map(|p| format!("c{}@({},{})", p.channel, p.px, p.py)).collect();
        println!("cycle {cycle:>2}: {}", pretty.join(" "));
        cycle += 1;
    })?;
    println!(
        "{} pixels, {} map reads, {} cycles",
        walk.pixels, walk.map_reads, walk.cycles
    );
    Ok(())
}
