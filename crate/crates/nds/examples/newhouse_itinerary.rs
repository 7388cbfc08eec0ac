//! The symbolic driver: blocks spend `z_k k^2` steps near p and `k^2`
//! near p_hat, with the multiplier z switching between 5 and 6 along a
//! doubling schedule. The trapped fractions at the segment boundaries
//! obey exact rational lower bounds and alternate between 5/6 and 6/7.
//!
//! ```bash
//! cargo run --release -p nds --example newhouse_itinerary
//! ```

use nds::newhouse::{
    build_schedule, schedule_horizons, trapped_fraction, ItineraryParams, TrappedFraction,
};

fn main() {
    let params = ItineraryParams::default();
    println!("itinerary constants: z0 = {}, n0 = {}, k0 = {}", params.z0, params.n0, params.k0);

    let schedule = build_schedule(&params, 10, 5).unwrap();
    println!("switching schedule k(J'): {:?}", schedule.points);

    let horizons = schedule_horizons(&params, &schedule).unwrap();
    println!("\n J'   z*   horizon (steps)                      frac_p        bound        frac_phat");
    for jp in 1..=10usize {
        let z = params.z_star(jp);
        let f = trapped_fraction(&params, &schedule, 5, jp).unwrap();
        let bound = z as f64 / (z as f64 + 1.0) - 2f64.powi(-(jp as i32));
        let ok_p = TrappedFraction::at_least(f.numerator_p, f.denominator, z as u128, z as u128 + 1, jp);
        let ok_q = TrappedFraction::at_least(f.numerator_phat, f.denominator, 1, z as u128 + 1, jp);
        println!(
            "  {jp:2}    {z}   {:>34}   {:.9} >= {bound:.6} {}  {:.9} {}",
            horizons[jp - 1],
            f.frac_p(),
            if ok_p { "ok" } else { "VIOLATED" },
            f.frac_phat(),
            if ok_q { "ok" } else { "VIOLATED" },
        );
    }

    println!("\nlimiting fractions: z0/(z0+1) = {:.6} on odd segments,", 5.0 / 6.0);
    println!("                    (z0+1)/(z0+2) = {:.6} on even segments;", 6.0 / 7.0);
    println!("the averaged observable alternates between them with gap 1/42 = {:.6}", 1.0 / 42.0);
}
