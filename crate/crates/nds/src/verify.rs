//! Fast deterministic invariant suite behind `nds verify`.
//!
//! Each check re-derives one structural fact of the system from scratch —
//! affine exactness, containment, contraction rates, oracle agreement —
//! and reports a single pass/fail line. The fuzzed checks draw from a
//! SplitMix64 stream seeded by the caller, so a failing run is
//! reproducible from its seed.

use crate::analytics::count_trapped;
use crate::blocks::{merge_runs, BlockLabel, ItineraryBlock, MembershipRun};
use crate::bowen::{self, BowenParams};
use crate::circle::{circle_dist, CirclePoint, FiberMap, ObservableSpec, UnperturbedMap};
use crate::cocycle::{self, BlockEvalOptions, NdsInstance};
use crate::driver::{splitmix64, splitmix64_unit, Driver, IidDriver, RotationDriver, Target};
use crate::section;

/// One invariant outcome.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InvariantResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl InvariantResult {
    fn of(name: &str, pass: bool, detail: String) -> Self {
        InvariantResult { name: name.to_string(), pass, detail }
    }
}

/// Run the whole suite with the default noise level.
pub fn run_suite(seed: u64) -> Vec<InvariantResult> {
    run_suite_with(0.1, seed)
}

/// Run the suite at a chosen noise level; out-of-range levels make the
/// containment invariant fail visibly instead of erroring out.
pub fn run_suite_with(epsilon: f64, seed: u64) -> Vec<InvariantResult> {
    let map = UnperturbedMap::default();
    let mut out = Vec::new();

    out.push(affine_exactness(&map));
    out.push(fiber_containment(&map, epsilon));
    out.push(contraction_rate(&map, epsilon));
    out.push(fixed_point_residual(&map, epsilon, seed));
    out.push(derivative_positive(&map));
    out.push(splitmix_determinism(seed));
    out.push(cocycle_identity(epsilon, seed));
    out.push(block_oracle(epsilon, seed));
    out.push(contraction_bound_fuzz(epsilon, seed));
    out.push(trapped_count_oracle(seed));
    out.push(graph_transform_probe(epsilon));
    out.push(rotation_periodicity());
    out
}

fn affine_exactness(map: &UnperturbedMap) -> InvariantResult {
    let mut worst = 0.0f64;
    for i in 0..=10_000 {
        let x = 0.25 + 0.5 * i as f64 / 10_000.0;
        let p = CirclePoint::project(x).unwrap();
        let d = (map.eval(p).value() - (0.5 * x + 0.25)).abs();
        worst = worst.max(d);
    }
    InvariantResult::of(
        "affine branch bit-exact on I0",
        worst == 0.0,
        format!("max deviation {worst:.3e} over 10001 grid points"),
    )
}

fn fiber_containment(map: &UnperturbedMap, epsilon: f64) -> InvariantResult {
    let mut ok = true;
    let mut worst = String::new();
    'outer: for k in 0..1000 {
        let kappa = -1.0 + 2.0 * k as f64 / 999.0;
        for i in 0..=100 {
            let x = CirclePoint::project(0.25 + 0.5 * i as f64 / 100.0).unwrap();
            let y = CirclePoint::wrap(map.eval(x).value() + epsilon * kappa);
            if !y.in_i0() {
                ok = false;
                worst = format!("kappa {kappa:.3}, x {:.3} -> {:.4} left I0", x.value(), y.value());
                break 'outer;
            }
        }
    }
    InvariantResult::of(
        "fiber maps send I0 into I0",
        ok,
        if ok { format!("1000 kappa values, eps = {epsilon}") } else { worst },
    )
}

fn contraction_rate(map: &UnperturbedMap, epsilon: f64) -> InvariantResult {
    let eps_valid = epsilon > 0.0 && epsilon < 0.125;
    let f = FiberMap::new(if eps_valid { epsilon } else { 0.1 }, 0.7).unwrap();
    let mut worst = 0.0f64;
    for i in 0..200 {
        let x = CirclePoint::project(0.25 + 0.0025 * i as f64).unwrap();
        let y = CirclePoint::project(0.75 - 0.002 * i as f64).unwrap();
        let d0 = circle_dist(x, y);
        let d1 = circle_dist(f.apply(map, x), f.apply(map, y));
        worst = worst.max((d1 - 0.5 * d0).abs());
    }
    InvariantResult::of(
        "fiber contraction rate is exactly 1/2 on I0",
        worst <= 1e-15,
        format!("max |d1 - d0/2| = {worst:.3e}"),
    )
}

fn fixed_point_residual(map: &UnperturbedMap, epsilon: f64, seed: u64) -> InvariantResult {
    let eps = if epsilon > 0.0 && epsilon < 0.125 { epsilon } else { 0.1 };
    let mut state = seed ^ 0xA5A5_5A5A_0F0F_F0F0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let kappa = splitmix64_unit(&mut state);
        let f = FiberMap::new(eps, kappa).unwrap();
        let x = f.fixed_point();
        worst = worst.max(circle_dist(f.apply(map, x), x));
    }
    InvariantResult::of(
        "fiber fixed point residual below 1e-14",
        worst <= 1e-14,
        format!("max residual {worst:.3e} over 1000 kappa"),
    )
}

fn derivative_positive(map: &UnperturbedMap) -> InvariantResult {
    let mut min_d = f64::INFINITY;
    let mut fd_worst = 0.0f64;
    for i in 0..10_000 {
        let x = i as f64 / 10_000.0;
        let d = map.deriv(CirclePoint::project(x).unwrap());
        min_d = min_d.min(d);
        if x > 1e-4 && x < 0.9999 && (x - 0.25).abs() > 1e-4 && (x - 0.75).abs() > 1e-4 {
            let h = 1e-6;
            let fd = (map.eval(CirclePoint::project(x + h).unwrap()).value()
                - map.eval(CirclePoint::project(x - h).unwrap()).value())
                / (2.0 * h);
            fd_worst = fd_worst.max((fd - d).abs());
        }
    }
    InvariantResult::of(
        "unperturbed derivative positive, finite differences agree",
        min_d > 0.0 && fd_worst <= 1e-6,
        format!("min derivative {min_d:.4}, max fd deviation {fd_worst:.3e}"),
    )
}

fn splitmix_determinism(seed: u64) -> InvariantResult {
    let mut a = seed;
    let mut b = seed;
    let mut same = true;
    let mut in_range = true;
    for _ in 0..10_000 {
        let x = splitmix64_unit(&mut a);
        let y = splitmix64_unit(&mut b);
        same &= x == y;
        in_range &= (-1.0..1.0).contains(&x);
    }
    let mut s = 0u64;
    let first = splitmix64(&mut s);
    InvariantResult::of(
        "noise stream deterministic and in [-1, 1)",
        same && in_range && first == 0xE220_A839_7B1D_CDAF,
        "10^4 draws, reference vector checked".to_string(),
    )
}

fn cocycle_identity(epsilon: f64, seed: u64) -> InvariantResult {
    let eps = if epsilon > 0.0 && epsilon < 0.125 { epsilon } else { 0.1 };
    let nds = NdsInstance::with_default_map(eps).unwrap();
    let x0 = CirclePoint::project(0.4).unwrap();
    let mut ok = true;
    for (n, m) in [(10u128, 7u128), (100, 53), (1000, 999)] {
        let mut d1 = IidDriver::new(seed);
        let full = cocycle::iterate_naive(&nds, &mut d1, x0, &[n + m], false).unwrap();
        let mut d2 = IidDriver::new(seed);
        let head = cocycle::iterate_naive(&nds, &mut d2, x0, &[m], false).unwrap();
        let tail = cocycle::iterate_naive(&nds, &mut d2, head.points[0], &[n], false).unwrap();
        ok &= full.points[0].value() == tail.points[0].value();
    }
    InvariantResult::of(
        "cocycle composition identity bitwise",
        ok,
        "three (n, m) splits".to_string(),
    )
}

fn block_oracle(epsilon: f64, seed: u64) -> InvariantResult {
    let eps = if epsilon > 0.0 && epsilon < 0.125 { epsilon } else { 0.1 };
    let nds = NdsInstance::with_default_map(eps).unwrap();
    let obs = ObservableSpec::for_noise(eps, 1.0, -1.0).unwrap();
    let x0 = CirclePoint::project(0.5).unwrap();
    let n: u128 = 10_000;

    let mut worst_point = 0.0f64;
    let mut worst_sum = 0.0f64;

    // i.i.d. unit blocks
    let mut src = IidDriver::new(seed);
    let blocks: Vec<ItineraryBlock> = (0..n)
        .map(|_| {
            let b = ItineraryBlock::new(BlockLabel::Transit, src.kappa(), 1);
            src.step();
            b
        })
        .collect();
    let (xb, acc) =
        cocycle::iterate_blocks(&nds, &obs, blocks, x0, BlockEvalOptions::default()).unwrap();
    let mut d = IidDriver::new(seed);
    let mut x = x0;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += obs.phi0(x);
        x = nds.step(&mut d, x);
    }
    worst_point = worst_point.max((xb.value() - x.value()).abs());
    worst_sum = worst_sum.max((acc.ones as f64 + acc.partial - sum).abs() / n as f64);

    // hybrid flow blocks
    let params = BowenParams::default();
    let blocks = bowen::block_stream(&params, 0, 0.05, 6).unwrap();
    let horizon: u128 = blocks.iter().map(|b| b.len).sum();
    let (xb, acc) =
        cocycle::iterate_blocks(&nds, &obs, blocks, x0, BlockEvalOptions::default()).unwrap();
    let mut d = bowen::BowenDriver::new(params).unwrap();
    let mut x = x0;
    let mut sum = 0.0;
    for _ in 0..horizon {
        sum += obs.phi0(x);
        x = nds.step(&mut d, x);
    }
    worst_point = worst_point.max((xb.value() - x.value()).abs());
    worst_sum = worst_sum.max((acc.ones as f64 + acc.partial - sum).abs() / horizon as f64);

    InvariantResult::of(
        "run-length acceleration matches naive stepping",
        worst_point <= 1e-12 && worst_sum <= 1e-9,
        format!("max point gap {worst_point:.2e}, max sum gap {worst_sum:.2e} per step"),
    )
}

fn contraction_bound_fuzz(epsilon: f64, seed: u64) -> InvariantResult {
    let eps = if epsilon > 0.0 && epsilon < 0.125 { epsilon } else { 0.1 };
    let nds = NdsInstance::with_default_map(eps).unwrap();
    let mut state = seed ^ 0x1234_5678_9ABC_DEF0;
    let mut violations = 0u32;
    for _ in 0..1000 {
        let x = CirclePoint::project(0.25 + 0.5 * (splitmix64_unit(&mut state) + 1.0) / 2.0)
            .unwrap();
        let kp = splitmix64_unit(&mut state);
        let n = (splitmix64(&mut state) % 61) as u32;
        let mut d = IidDriver::new(splitmix64(&mut state));
        let r = cocycle::contraction_bound_check(&nds, &mut d, x, kp, n).unwrap();
        if !r.ok {
            violations += 1;
        }
    }
    InvariantResult::of(
        "one-step contraction estimate holds under fuzzing",
        violations == 0,
        format!("{violations} violations in 1000 samples"),
    )
}

fn trapped_count_oracle(seed: u64) -> InvariantResult {
    let mut state = seed ^ 0x0BAD_F00D_DEAD_BEEF;
    let mut ok = true;
    for _ in 0..100 {
        let len = 100 + (splitmix64(&mut state) % 1000) as usize;
        let members: Vec<bool> = (0..len).map(|_| splitmix64(&mut state) % 3 != 0).collect();
        let mut runs: Vec<MembershipRun> = Vec::new();
        let mut start = None;
        for (i, &m) in members.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i as u128),
                (false, Some(s)) => {
                    runs.push(MembershipRun::new(s, i as u128 - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(MembershipRun::new(s, len as u128 - 1));
        }
        let runs = merge_runs(runs);
        for nu in [0u32, 1, 5] {
            let mut brute = 0u128;
            for j in nu as usize..len {
                if members[j - nu as usize..=j].iter().all(|&m| m) {
                    brute += 1;
                }
            }
            ok &= count_trapped(&runs, nu, len as u128) == brute;
        }
    }
    InvariantResult::of(
        "run-length trapped counting matches enumeration",
        ok,
        "100 random membership strings, nu in {0, 1, 5}".to_string(),
    )
}

fn graph_transform_probe(epsilon: f64) -> InvariantResult {
    let eps = if epsilon > 0.0 && epsilon < 0.125 { epsilon } else { 0.1 };
    let nds = NdsInstance::with_default_map(eps).unwrap();
    let kappas: Vec<f64> = (0..16).map(|i| -1.0 + 2.0 * i as f64 / 15.0).collect();
    let b1 = vec![0.3; 16];
    let b2 = vec![0.62; 16];
    let r = section::contraction_probe(&nds, &kappas, &b1, &b2).unwrap();
    InvariantResult::of(
        "graph transform contracts sup-distance by exactly 1/2",
        (r - 0.5).abs() <= 1e-12,
        format!("probe ratio {r:.15}"),
    )
}

fn rotation_periodicity() -> InvariantResult {
    let mut r = RotationDriver::new(CirclePoint::project(0.0).unwrap(), 0.25).unwrap();
    for _ in 0..4 {
        r.step();
    }
    let back_to_start = r.omega().value() == 0.0;
    let mut g = RotationDriver::golden(CirclePoint::project(0.1).unwrap());
    let before = g.omega();
    g.step();
    g.step_back().unwrap();
    let inverse_ok = circle_dist(before, g.omega()) <= 1e-15;
    let membership_ok = {
        let d = RotationDriver::golden(CirclePoint::project(0.02).unwrap());
        d.in_neighborhood(Target::P, 0.05) && !d.in_neighborhood(Target::P, 0.01)
    };
    InvariantResult::of(
        "rotation driver steps, inverts and classifies correctly",
        back_to_start && inverse_ok && membership_ok,
        "rational rotation closes after 4 steps".to_string(),
    )
}
