//! The circle map, its noisy fibers, their fixed points and the test
//! observable.
//!
//! ```bash
//! cargo run --release -p nds --example circle_maps
//! ```

use nds::circle::{circle_dist, CirclePoint, FiberMap, ObservableSpec, UnperturbedMap};
use nds::cocycle::{contraction_bound_check, NdsInstance};
use nds::driver::IidDriver;

fn main() {
    let map = UnperturbedMap::default();

    println!("unperturbed map: affine x/2 + 1/4 on I0 = [1/4, 3/4], C^1 blends outside");
    for x in [0.0, 0.125, 0.25, 0.5, 0.75, 0.875] {
        let p = CirclePoint::project(x).unwrap();
        println!("  f0({x:5.3}) = {:.6}   Df0 = {:.4}", map.eval(p).value(), map.deriv(p));
    }

    println!("\nfiber maps f0 + eps*kappa with eps = 0.1 and their fixed points:");
    for kappa in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let f = FiberMap::new(0.1, kappa).unwrap();
        let fp = f.fixed_point();
        let residual = circle_dist(f.apply(&map, fp), fp);
        println!("  kappa {kappa:5.2}: X = {:.4}, residual {residual:.2e}", fp.value());
    }

    let obs = ObservableSpec::for_noise(0.1, 1.0, -1.0).unwrap();
    println!(
        "\nobservable: 1 on the {:.2}-ball around {:.1}, 0 around {:.1}, linear ramp between",
        obs.rho0,
        obs.x_p.value(),
        obs.x_phat.value()
    );
    for x in [0.7, 0.62, 0.5, 0.38, 0.3, 0.0] {
        println!("  phi0({x:4.2}) = {:.3}", obs.phi0(CirclePoint::project(x).unwrap()));
    }
    println!("smallest trapping depth nu0 with 2^-nu0 <= rho0/3: {}", obs.nu0());

    // the one-step contraction estimate in action
    let nds = NdsInstance::with_default_map(0.1).unwrap();
    println!("\ncontraction estimate d(f^n(x), X') <= 2^-n + 6 eps max|kappa - kappa'|:");
    for n in [0u32, 5, 20, 60] {
        let mut d = IidDriver::new(11);
        let r = contraction_bound_check(&nds, &mut d, CirclePoint::project(0.3).unwrap(), 1.0, n)
            .unwrap();
        println!("  n = {n:2}: lhs {:.6} <= rhs {:.6}  ({})", r.lhs, r.rhs, r.ok);
    }
}
