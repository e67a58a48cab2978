//! Random layers through pipeline and golden model, then the same with an
//! injected padding bug to show it gets caught.
use nullhop::accel::Fault;
use nullhop::check::selfcheck;

fn main() {
    let clean = selfcheck(1, 50, None);
    println!("clean:  {} layer, {} codec failures", clean.layer_failures, clean.codec_failures);

    let faulty = selfcheck(1, 50, Some(Fault::PaddingOffByOne));
    println!("faulty: {} layer failures", faulty.layer_failures);
    if let Some(f) = faulty.first_layer_failure {
        let l = &f.layer;
        println!(
            "  first: seed {} k={} pad={} {}x{}x{} -> {} mismatched pixels",
            f.seed, l.k, l.pad, l.n_in, l.h, l.w, f.mismatched_pixels
        );
    }
}
