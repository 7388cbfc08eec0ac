//! Saddle passages of the hybrid heteroclinic flow: closed-form passage
//! times, the geometric growth of successive crossings and the
//! delta-windows that eventually dominate every passage.
//!
//! ```bash
//! cargo run --release -p nds --example saddle_timing
//! ```

use nds::bowen::{crossing_times, delta_window, predicted_constants, saddle_passage, BowenParams};
use nds::driver::Target;

fn main() {
    println!("single saddle crossing, du = e_u u, ds = -e_s s, box half-width 0.5:");
    for h in [0.1, 0.01, 1e-6, 1e-12] {
        let (dur, exit) = saddle_passage(h, 1.0, 2.0, 0.5).unwrap();
        println!("  entry offset {h:8.0e}: duration {dur:8.3}, exit offset {exit:9.2e}");
    }

    let params = BowenParams::default();
    let c = predicted_constants(&params).unwrap();
    println!(
        "\npredicted constants: sigma1 = {}, sigma2 = {}, lambda1 = {:.4}, lambda2 = {:.4}",
        c.sigma1, c.sigma2, c.lambda1, c.lambda2
    );

    let records = crossing_times(&params, 26).unwrap();
    println!("\ncycle   T_p/T_phat      T_phat'/T_p     t_even");
    for j in [1usize, 3, 5, 10, 15, 20, 25] {
        let r = &records[j - 1];
        let ratio1 = r.passage_p.to_f64() / r.passage_phat.to_f64();
        let ratio2 = records[j].passage_phat.to_f64() / r.passage_p.to_f64();
        println!(
            "  {j:3}   {ratio1:12.8}   {ratio2:12.8}   {:.6e}",
            r.t_even.to_f64()
        );
    }

    println!("\nwindow share of each passage (delta = 0.05):");
    println!("cycle    near p      near p_hat");
    for j in [2usize, 5, 10, 20, 30] {
        let records = crossing_times(&params, j + 1).unwrap();
        let r = &records[j - 1];
        let share = |target| {
            delta_window(r, &params, 0.05, target)
                .map(|(w0, w1)| {
                    let len = w1.sub(w0).to_f64();
                    let passage = match target {
                        Target::P => r.passage_p.to_f64(),
                        Target::PHat => r.passage_phat.to_f64(),
                    };
                    format!("{:.6}", len / passage)
                })
                .unwrap_or_else(|| "  empty".into())
        };
        println!("  {j:3}   {}   {}", share(Target::P), share(Target::PHat));
    }
}
