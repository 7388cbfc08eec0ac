//! Run-length acceleration: a constant-noise run of m steps has the
//! closed form X + 2^-m (x - X), so orbits and their Birkhoff sums over
//! 1e15 steps cost microseconds while staying exact (integer counting
//! plus a 60-step settling prefix per block).
//!
//! ```bash
//! cargo run --release -p nds --example long_horizon
//! ```

use nds::analytics::birkhoff_at_blocks;
use nds::bowen::{block_stream, schedules, BowenParams};
use nds::circle::{CirclePoint, ObservableSpec};
use nds::cocycle::{iterate_blocks, BlockEvalOptions, NdsInstance};
use std::time::Instant;

fn main() {
    let nds = NdsInstance::with_default_map(0.1).unwrap();
    let obs = ObservableSpec::for_noise(0.1, 1.0, -1.0).unwrap();
    let x0 = CirclePoint::project(0.5).unwrap();
    let params = BowenParams::default();

    // small horizon: stepping and acceleration side by side
    let n: u128 = 100_000;
    let t = Instant::now();
    let mut driver = nds::bowen::BowenDriver::new(params).unwrap();
    let mut x = x0;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += obs.phi0(x);
        x = nds.step(&mut driver, x);
    }
    let naive_time = t.elapsed();

    let t = Instant::now();
    let blocks = block_stream(&params, 5, 0.05, 10).unwrap();
    let mut total = 0u128;
    let clipped: Vec<_> = blocks
        .into_iter()
        .map_while(|b| {
            if total >= n {
                return None;
            }
            let take = b.len.min(n - total);
            total += take;
            Some(nds::blocks::ItineraryBlock::new(b.label, b.kappa, take))
        })
        .collect();
    let (xb, acc) = iterate_blocks(&nds, &obs, clipped, x0, BlockEvalOptions::default()).unwrap();
    let block_time = t.elapsed();

    println!("horizon {n} steps:");
    println!("  naive stepping   {naive_time:10.2?}   final {:.15}  sum {:.6}", x.value(), sum);
    println!(
        "  run-length       {block_time:10.2?}   final {:.15}  sum {:.6}",
        xb.value(),
        acc.ones as f64 + acc.partial
    );
    println!(
        "  final points differ by {:.2e}",
        (x.value() - xb.value()).abs()
    );

    // the horizon stepping can never reach
    let (n1, n2) = schedules(&params, 25).unwrap();
    let horizon = *n2.last().unwrap();
    let t = Instant::now();
    let blocks = block_stream(&params, 5, 0.05, 25).unwrap();
    let accs = birkhoff_at_blocks(&nds, &obs, blocks, x0, &[*n1.last().unwrap(), horizon]).unwrap();
    let long_time = t.elapsed();
    println!("\nhorizon {horizon} steps (~{:.1e}):", horizon as f64);
    println!("  run-length       {long_time:10.2?}");
    println!("  average at n1(25) = {:.9}", accs[0].average());
    println!("  average at n2(25) = {:.9}", accs[1].average());
    println!("  naive stepping at 3e8 steps/s would need ~{:.0} days", horizon as f64 / 3e8 / 86_400.0);
}
