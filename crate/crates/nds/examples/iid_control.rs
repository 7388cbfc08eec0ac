//! The averaging control: under i.i.d. noise every orbit's time average
//! settles down. One seed in detail, then the 100-seed convergence
//! summary, plus the one-step reachability of the noisy images.
//!
//! ```bash
//! cargo run --release -p nds --example iid_control
//! ```

use nds::circle::{CirclePoint, ObservableSpec, UnperturbedMap};
use nds::cocycle::NdsInstance;
use nds::config::ExperimentConfig;
use nds::driver::{reachability_check, IidDriver};
use nds::scenario;

fn main() {
    let nds = NdsInstance::with_default_map(0.1).unwrap();
    let obs = ObservableSpec::for_noise(0.1, 1.0, -1.0).unwrap();

    println!("one orbit under i.i.d. noise (seed 42):");
    let mut d = IidDriver::new(42);
    let mut x = CirclePoint::project(0.5).unwrap();
    let mut sum = 0.0;
    let mut n = 0u64;
    for target in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        while n < target {
            sum += obs.phi0(x);
            x = nds.step(&mut d, x);
            n += 1;
        }
        println!("  avg({n:>8}) = {:.6}", sum / n as f64);
    }

    let cfg = ExperimentConfig::parse(
        "scenario = iid\ncontrol_seeds = 100\ncontrol_horizon = 1000000\n",
    )
    .unwrap();
    let out = scenario::run(&cfg).unwrap();
    let c = out.report.control.as_ref().unwrap();
    println!("\n100 seeds, |avg(5e5) - avg(1e6)|:");
    println!("  converged (<= {}) : {} of {}", c.convergence_tolerance, c.converged_seeds, c.seeds);
    println!("  p95 shift          : {:.2e}", c.p95_avg_shift);
    println!("  max shift          : {:.2e}", c.max_avg_shift);
    println!("  two-scale certificate: {}", out.report.no_certificate_reason.as_ref().unwrap());

    println!("\none-step reachability: the noisy images of x fill the eps-arc around f0(x):");
    let map = UnperturbedMap::default();
    for x in [0.1, 0.3, 0.8] {
        let r = reachability_check(&map, 0.1, CirclePoint::project(x).unwrap(), 1).unwrap();
        println!(
            "  x = {x:3.1}: arc center {:.3}, covered = {}, contained = {}, max gap {:.1e}",
            r.center.value(),
            r.covered,
            r.contained,
            r.max_gap
        );
    }
}
