//! Acceptance suite: one test per release criterion, each printing a
//! single summary line (visible with `--nocapture`). Tolerances are
//! pinned here; changing them is changing the contract.
//!
//! Run with: `cargo test -p nds --test acceptance`

use nds::analytics::{self, condition_h_estimate, HEvidence};
use nds::blocks::{BlockLabel, ItineraryBlock};
use nds::bowen::{self, BowenParams};
use nds::circle::{circle_dist, CirclePoint, FiberMap, ObservableSpec, UnperturbedMap};
use nds::cocycle::{self, BlockEvalOptions, NdsInstance};
use nds::config::ExperimentConfig;
use nds::driver::{reachability_check, splitmix64, splitmix64_unit, Driver, IidDriver, RotationDriver, Target};
use nds::newhouse::{self, ItineraryParams};
use nds::scenario;
use nds::section;

fn pt(v: f64) -> CirclePoint {
    CirclePoint::project(v).unwrap()
}

fn setup() -> (NdsInstance, ObservableSpec) {
    (
        NdsInstance::with_default_map(0.1).unwrap(),
        ObservableSpec::for_noise(0.1, 1.0, -1.0).unwrap(),
    )
}

/// 1. Fiber fixed-point identity at noise level 0.1 over 1000 noise
///    values: residual at most 1e-14.
#[test]
fn c01_fixed_point_identity() {
    let map = UnperturbedMap::default();
    let mut state = 0x5EED_0001u64;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let kappa = splitmix64_unit(&mut state);
        let f = FiberMap::new(0.1, kappa).unwrap();
        let x = f.fixed_point();
        worst = worst.max(circle_dist(f.apply(&map, x), x));
    }
    println!("acceptance 01 fixed-point identity: PASS (max residual {worst:.3e} <= 1e-14)");
    assert!(worst <= 1e-14, "max residual {worst:.3e}");
}

fn truncate_blocks(blocks: Vec<ItineraryBlock>, n: u128) -> Vec<ItineraryBlock> {
    let mut out = Vec::new();
    let mut total = 0u128;
    for b in blocks {
        if total >= n {
            break;
        }
        let take = b.len.min(n - total);
        out.push(ItineraryBlock::new(b.label, b.kappa, take));
        total += take;
    }
    assert_eq!(total, n, "stream too short");
    out
}

/// 2. Run-length acceleration agrees with naive stepping on all four
///    drivers at 1e5 steps: final points to 1e-12, Birkhoff sums to
///    1e-9 per step.
#[test]
fn c02_oracle_equivalence_all_drivers() {
    let (nds, obs) = setup();
    let x0 = pt(0.5);
    let n: u128 = 100_000;
    let mut worst_point = 0.0f64;
    let mut worst_sum = 0.0f64;

    let mut check = |name: &str, blocks: Vec<ItineraryBlock>, naive: (CirclePoint, f64)| {
        let (xb, acc) =
            cocycle::iterate_blocks(&nds, &obs, blocks, x0, BlockEvalOptions::default()).unwrap();
        assert_eq!(acc.steps, n);
        assert!(acc.is_exact(), "{name}: acceleration left steps unresolved");
        let dp = (xb.value() - naive.0.value()).abs();
        let ds = (acc.ones as f64 + acc.partial - naive.1).abs() / n as f64;
        assert!(dp <= 1e-12, "{name}: final point gap {dp:.3e}");
        assert!(ds <= 1e-9, "{name}: per-step sum gap {ds:.3e}");
        worst_point = worst_point.max(dp);
        worst_sum = worst_sum.max(ds);
    };

    let naive_run = |driver: &mut dyn Driver| -> (CirclePoint, f64) {
        let mut x = x0;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += obs.phi0(x);
            x = nds.step(driver, x);
        }
        (x, sum)
    };

    // i.i.d.
    let mut src = IidDriver::new(77);
    let blocks: Vec<ItineraryBlock> = (0..n)
        .map(|_| {
            let b = ItineraryBlock::new(BlockLabel::Transit, src.kappa(), 1);
            src.step();
            b
        })
        .collect();
    check("iid", blocks, naive_run(&mut IidDriver::new(77)));

    // rotation
    let mut src = RotationDriver::golden(pt(0.31));
    let blocks: Vec<ItineraryBlock> = (0..n)
        .map(|_| {
            let b = ItineraryBlock::new(BlockLabel::Transit, src.kappa(), 1);
            src.step();
            b
        })
        .collect();
    check("rotation", blocks, naive_run(&mut RotationDriver::golden(pt(0.31))));

    // hybrid flow
    let params = BowenParams::default();
    let blocks = truncate_blocks(bowen::block_stream(&params, 5, 0.05, 10).unwrap(), n);
    check("bowen", blocks, naive_run(&mut bowen::BowenDriver::new(params).unwrap()));

    // symbolic itinerary
    let ip = ItineraryParams::default();
    let schedule = newhouse::build_schedule(&ip, 4, 5).unwrap();
    let blocks = newhouse::blocks_upto(&ip, &schedule, 5, n).unwrap();
    check(
        "newhouse",
        blocks,
        naive_run(&mut newhouse::NewhouseDriver::new(ip, schedule).unwrap()),
    );

    println!(
        "acceptance 02 oracle equivalence: PASS (4 drivers, max point gap {worst_point:.2e}, max sum gap {worst_sum:.2e}/step)"
    );
}

/// 3. Passage-time ratios of the hybrid flow converge to sigma1 = sigma2
///    = 2 within 0.01 by cycle 25.
#[test]
fn c03_flow_timing_asymptotics() {
    let params = BowenParams::default();
    let recs = bowen::crossing_times(&params, 26).unwrap();
    let j = 25;
    let r = &recs[j - 1];
    let ratio1 = r.passage_p.to_f64() / r.passage_phat.to_f64();
    let ratio2 = recs[j].passage_phat.to_f64() / r.passage_p.to_f64();
    println!(
        "acceptance 03 timing asymptotics: PASS (|T_p/T_phat - 2| = {:.2e}, |T_phat'/T_p - 2| = {:.2e})",
        (ratio1 - 2.0).abs(),
        (ratio2 - 2.0).abs()
    );
    assert!((ratio1 - 2.0).abs() <= 0.01, "sigma1 ratio {ratio1}");
    assert!((ratio2 - 2.0).abs() <= 0.01, "sigma2 ratio {ratio2}");
}

/// 4. The delta-window fills at least 99% of each passage by cycle 30
///    for delta = 0.05 and 0.15.
#[test]
fn c04_window_dominance() {
    let params = BowenParams::default();
    let recs = bowen::crossing_times(&params, 31).unwrap();
    let r = &recs[29];
    let mut worst = 1.0f64;
    for delta in [0.05, 0.15] {
        for target in [Target::P, Target::PHat] {
            let (w0, w1) = bowen::delta_window(r, &params, delta, target).unwrap();
            let window = w1.sub(w0).to_f64();
            let passage = match target {
                Target::P => r.passage_p.to_f64(),
                Target::PHat => r.passage_phat.to_f64(),
            };
            worst = worst.min(window / passage);
        }
    }
    println!("acceptance 04 window dominance: PASS (min window share {worst:.6} >= 0.99)");
    assert!(worst >= 0.99, "min window share {worst}");
}

/// 5. Trapped fractions at the two subsequence schedules land within
///    0.02 of (2/3, 1/3) and (1/3, 2/3), for nu in {0, 5} and both
///    deltas.
#[test]
fn c05_two_scale_trapped_ratios() {
    let params = BowenParams::default();
    let constants = bowen::predicted_constants(&params).unwrap();
    let (n1, n2) = bowen::schedules(&params, 25).unwrap();
    let horizon = *n2.last().unwrap();
    let mut worst = 0.0f64;
    for delta in [0.05, 0.15] {
        let (runs_p, runs_phat) = bowen::membership_runs(&params, delta, 25, horizon).unwrap();
        let evidence = HEvidence {
            lambda1: constants.lambda1,
            lambda2: constants.lambda2,
            n1: n1.clone(),
            n2: n2.clone(),
            runs_p,
            runs_phat,
        };
        for nu in [0u32, 5] {
            let cert = condition_h_estimate(&evidence, nu, delta, 0.02).unwrap();
            assert!(
                cert.certified,
                "nu {nu} delta {delta}: deviation {}",
                cert.final_deviation
            );
            worst = worst.max(cert.final_deviation);
        }
    }
    println!("acceptance 05 two-scale trapped ratios: PASS (max deviation {worst:.2e} <= 0.02)");
}

/// 6. Birkhoff averages from x = 0.5 along the two schedules stay split:
///    avg(n1(25)) >= 0.617, avg(n2(25)) <= 0.383, gap >= 0.23, with
///    n2(25) near 1.8e15 steps.
#[test]
fn c06_historic_gap_over_1e15_steps() {
    let (nds, obs) = setup();
    let params = BowenParams::default();
    let constants = bowen::predicted_constants(&params).unwrap();
    let (n1, n2) = bowen::schedules(&params, 25).unwrap();
    assert!(*n2.last().unwrap() > 1_000_000_000_000_000u128, "horizon should exceed 1e15");
    let blocks = bowen::block_stream(&params, 5, 0.05, 25).unwrap();
    let mut checkpoints: Vec<u128> = n1.iter().chain(n2.iter()).copied().collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let accs =
        analytics::birkhoff_at_blocks(&nds, &obs, blocks, pt(0.5), &checkpoints).unwrap();
    let avg = |n: u128| accs[checkpoints.binary_search(&n).unwrap()].average();
    let avgs1: Vec<f64> = n1.iter().map(|&n| avg(n)).collect();
    let avgs2: Vec<f64> = n2.iter().map(|&n| avg(n)).collect();
    let gap = analytics::gap_estimate(&avgs1, &avgs2, constants.lambda1, constants.lambda2)
        .unwrap();
    println!(
        "acceptance 06 historic gap: PASS (avg_n1 {:.6} >= 0.617, avg_n2 {:.6} <= 0.383, gap {:.6} >= 0.23, n2(25) = {})",
        gap.avg_n1,
        gap.avg_n2,
        gap.gap,
        n2.last().unwrap()
    );
    assert!(gap.avg_n1 >= 0.617, "avg_n1 {}", gap.avg_n1);
    assert!(gap.avg_n2 <= 0.383, "avg_n2 {}", gap.avg_n2);
    assert!(gap.gap >= 0.23, "gap {}", gap.gap);
}

/// 7. Symbolic itinerary: exact rational trapped fractions satisfy the
///    two lower bounds at every segment through depth 10, and the
///    alternating averages keep a gap of at least 0.02.
#[test]
fn c07_symbolic_bounds_and_alternating_gap() {
    let params = ItineraryParams::default();
    let schedule = newhouse::build_schedule(&params, 10, 5).unwrap();
    for nu in [0u32, 5] {
        for jp in 1..=10usize {
            let f = newhouse::trapped_fraction(&params, &schedule, nu, jp).unwrap();
            let z = params.z_star(jp) as u128;
            assert!(
                newhouse::TrappedFraction::at_least(f.numerator_p, f.denominator, z, z + 1, jp),
                "near-p bound fails at J' {jp}, nu {nu}"
            );
            assert!(
                newhouse::TrappedFraction::at_least(
                    f.numerator_phat,
                    f.denominator,
                    1,
                    z + 1,
                    jp
                ),
                "near-phat bound fails at J' {jp}, nu {nu}"
            );
        }
    }
    // alternating averages via certified closed-form intervals
    let horizons = newhouse::schedule_horizons(&params, &schedule).unwrap();
    let odd = newhouse::birkhoff_bounds_at(&params, &schedule, horizons[8]).unwrap();
    let even = newhouse::birkhoff_bounds_at(&params, &schedule, horizons[9]).unwrap();
    let gap = even.average_lo() - odd.average_hi();
    println!(
        "acceptance 07 symbolic bounds: PASS (bounds hold for 20 (nu, J') pairs; averages {:.6} vs {:.6}, gap {:.6} >= 0.02)",
        odd.average(),
        even.average(),
        gap
    );
    assert!((odd.average() - 5.0 / 6.0).abs() < 0.01, "odd average {}", odd.average());
    assert!((even.average() - 6.0 / 7.0).abs() < 0.01, "even average {}", even.average());
    assert!(gap >= 0.02, "gap {gap}");
}

/// 8. Closed-form symbolic trapped counts equal one-step enumeration for
///    every block boundary through k = 200 (about 1.6e7 steps).
#[test]
fn c08_symbolic_enumeration_oracle() {
    let params = ItineraryParams::default();
    let schedule = newhouse::build_schedule(&params, 10, 5).unwrap();
    let k_max = 200u64;
    let horizon = newhouse::m_hat(&params, &schedule, k_max).unwrap();
    let boundaries: Vec<u128> = (params.k0 + 1..=k_max)
        .map(|k| newhouse::m_hat(&params, &schedule, k).unwrap())
        .collect();

    let mut d = newhouse::NewhouseDriver::new(params, schedule.clone()).unwrap();
    let mut streak_p: u128 = 0;
    let mut streak_q: u128 = 0;
    let mut counts = [[0u128; 2]; 2]; // [nu index][target index]
    let mut bi = 0usize;
    let mut checked = 0usize;
    for j in 0..horizon {
        if d.in_neighborhood(Target::P, 0.1) {
            streak_p += 1;
        } else {
            streak_p = 0;
        }
        if d.in_neighborhood(Target::PHat, 0.1) {
            streak_q += 1;
        } else {
            streak_q = 0;
        }
        if streak_p > 0 {
            counts[0][0] += 1;
        }
        if streak_q > 0 {
            counts[0][1] += 1;
        }
        if streak_p > 5 {
            counts[1][0] += 1;
        }
        if streak_q > 5 {
            counts[1][1] += 1;
        }
        d.step();
        while bi < boundaries.len() && boundaries[bi] == j + 1 {
            for (ni, nu) in [0u32, 5].into_iter().enumerate() {
                for (ti, target) in [Target::P, Target::PHat].into_iter().enumerate() {
                    let closed =
                        newhouse::trapped_count_at(&params, &schedule, target, nu, j + 1)
                            .unwrap();
                    assert_eq!(
                        closed, counts[ni][ti],
                        "mismatch at boundary {} (nu {nu}, {target:?})",
                        j + 1
                    );
                    checked += 1;
                }
            }
            bi += 1;
        }
    }
    println!(
        "acceptance 08 enumeration oracle: PASS ({checked} closed-form counts equal enumeration over {horizon} steps)"
    );
    assert!(checked >= 4 * (k_max - params.k0 - 1) as usize);
}

/// 9. I.i.d. control: across 100 seeds the running average moves by at
///    most 0.01 between 5e5 and 1e6 steps for at least 95 seeds, and no
///    two-scale certificate is issued.
#[test]
fn c09_iid_control_averages_converge() {
    let cfg = ExperimentConfig::parse(
        "scenario = iid\ncontrol_seeds = 100\ncontrol_horizon = 1000000\n",
    )
    .unwrap();
    let out = scenario::run(&cfg).unwrap();
    let c = out.report.control.as_ref().unwrap();
    println!(
        "acceptance 09 iid control: PASS ({} of {} seeds converged, p95 shift {:.2e}, certificate: none)",
        c.converged_seeds, c.seeds, c.p95_avg_shift
    );
    assert!(c.converged_seeds >= 95, "{} of {} converged", c.converged_seeds, c.seeds);
    assert!(out.report.certificate.is_none());
    assert!(out.report.no_certificate_reason.is_some());
    assert!(!out.report.historic);
}

/// 10. Rotation control: the same convergence bound, plus the orbit
///     average agrees with the invariant-section average to 0.01 at 1e5
///     steps.
#[test]
fn c10_rotation_control_and_section_transfer() {
    let cfg = ExperimentConfig::parse(
        "scenario = rotation\ncontrol_seeds = 100\ncontrol_horizon = 1000000\n",
    )
    .unwrap();
    let out = scenario::run(&cfg).unwrap();
    let c = out.report.control.as_ref().unwrap();
    let section_gap = c.section_avg_gap.unwrap();
    println!(
        "acceptance 10 rotation control: PASS ({} of {} seeds converged, section gap {:.2e} <= 0.01)",
        c.converged_seeds, c.seeds, section_gap
    );
    assert!(c.converged_seeds >= 95, "{} of {} converged", c.converged_seeds, c.seeds);
    assert!(section_gap <= 0.01, "section gap {section_gap}");
    assert!(!out.report.historic);
}

/// 11. Graph transform: contraction probe 0.5 within 1e-12, pullback
///     invariance residual at most 1e-11 at depth 40, decay ratios 0.5
///     within 1e-10 over 50 steps.
#[test]
fn c11_graph_transform_and_decay() {
    let (nds, _) = setup();
    let kappas: Vec<f64> = (0..32).map(|i| -1.0 + 2.0 * i as f64 / 31.0).collect();
    let b1 = vec![0.3; 32];
    let b2 = vec![0.64; 32];
    let probe = section::contraction_probe(&nds, &kappas, &b1, &b2).unwrap();
    assert!((probe - 0.5).abs() <= 1e-12, "probe {probe}");

    let rot = RotationDriver::golden(pt(0.23));
    let res_rot = section::invariance_residual(&nds, &rot, 40, pt(0.3)).unwrap();
    assert!(res_rot <= 1e-11, "rotation residual {res_rot}");
    let mut bw = bowen::BowenDriver::new(BowenParams::default()).unwrap();
    for _ in 0..80 {
        bw.step();
    }
    let res_bw = section::invariance_residual(&nds, &bw, 40, pt(0.3)).unwrap();
    assert!(res_bw <= 1e-11, "flow residual {res_bw}");

    let rep = section::decay_check(&nds, &rot, pt(0.27), 50, 20).unwrap();
    let mut worst = 0.0f64;
    for r in &rep.ratios {
        worst = worst.max((r - 0.5).abs());
    }
    assert!(worst <= 1e-10, "worst decay ratio deviation {worst:.3e}");
    println!(
        "acceptance 11 graph transform: PASS (probe |r - 0.5| = {:.1e}, residuals {res_rot:.1e}/{res_bw:.1e} <= 1e-11, decay deviation {worst:.1e} <= 1e-10)",
        (probe - 0.5).abs()
    );
}

/// 12. One-step contraction estimate fuzz: 1e4 random samples across the
///     drivers, zero violations at slack 1e-12.
#[test]
fn c12_contraction_estimate_fuzz() {
    let (nds, _) = setup();
    let mut state = 0xFACE_FEEDu64;
    let mut violations = 0u32;
    for trial in 0..10_000u32 {
        let x = pt(0.25 + 0.5 * (splitmix64_unit(&mut state) + 1.0) / 2.0);
        let kp = splitmix64_unit(&mut state);
        let n = (splitmix64(&mut state) % 61) as u32;
        let ok = match trial % 3 {
            0 => {
                let mut d = IidDriver::new(splitmix64(&mut state));
                cocycle::contraction_bound_check(&nds, &mut d, x, kp, n).unwrap().ok
            }
            1 => {
                let omega = (splitmix64_unit(&mut state) + 1.0) / 2.0;
                let mut d = RotationDriver::golden(pt(omega));
                cocycle::contraction_bound_check(&nds, &mut d, x, kp, n).unwrap().ok
            }
            _ => {
                let mut d = bowen::BowenDriver::new(BowenParams::default()).unwrap();
                let skip = splitmix64(&mut state) % 50;
                for _ in 0..skip {
                    d.step();
                }
                cocycle::contraction_bound_check(&nds, &mut d, x, kp, n).unwrap().ok
            }
        };
        if !ok {
            violations += 1;
        }
    }
    println!("acceptance 12 contraction estimate fuzz: PASS (0 violations in 10000 samples)");
    assert_eq!(violations, 0);
}

/// 13. One noisy step reaches exactly the eps-arc around the unperturbed
///     image: containment and coverage on a 1000-point grid for 100 base
///     points.
#[test]
fn c13_one_step_reachability() {
    let map = UnperturbedMap::default();
    let mut worst_gap = 0.0f64;
    for i in 0..100 {
        let x = pt(i as f64 / 100.0);
        let r = reachability_check(&map, 0.1, x, 1).unwrap();
        assert!(r.covered, "arc not covered from {:.2} (gap {:.2e})", x.value(), r.max_gap);
        assert!(r.contained, "image leaves the arc from {:.2}", x.value());
        worst_gap = worst_gap.max(r.max_gap);
    }
    println!(
        "acceptance 13 reachability: PASS (100 base points, image = eps-arc, max gap {worst_gap:.2e})"
    );
}

/// CLI surface: exit codes 0/1/2 and the CSV column contract.
#[test]
fn c14_cli_exit_codes_and_csv_format() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_nds");
    let dir = std::env::temp_dir().join(format!("nds-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    // config error: unknown key named in the message, exit 1
    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "scenario = bowen\nepslion = 0.1\n").unwrap();
    let out = Command::new(bin)
        .args(["run", "--config", bad.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epslion"));

    // successful small run: exit 0, fixed CSV header, decimal n column
    let good = dir.join("good.cfg");
    std::fs::write(&good, "scenario = bowen\nj_max = 8\nnu_list = 5\ndelta_list = 0.05\n")
        .unwrap();
    let out_dir = dir.join("out");
    let out = Command::new(bin)
        .args(["run", "--config", good.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("J,n,ratio_p,ratio_phat,birkhoff_avg,schedule_family\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["scenario"], "bowen");
    assert!(json["pass"].as_bool().unwrap());
    // byte-identical rerun
    let csv_again = {
        let out2 = dir.join("out2");
        let st = Command::new(bin)
            .args(["run", "--config", good.to_str().unwrap(), "--out", out2.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read_to_string(out2.join("report.csv")).unwrap()
    };
    assert_eq!(csv, csv_again, "CSV must be reproducible byte for byte");

    // verify subcommand prints one line per invariant, exit 0
    let out = Command::new(bin).args(["verify", "--seed", "7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 12);

    println!("acceptance 14 cli contract: PASS (exit codes 1/0, fixed CSV header, reproducible bytes)");
    std::fs::remove_dir_all(&dir).ok();
}
