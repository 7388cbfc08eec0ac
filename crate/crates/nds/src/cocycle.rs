//! Orbit composition over a driver, naive and block-accelerated.
//!
//! The composed map applies the fiber map of the current driver state,
//! then steps the driver. On `I0` each fiber map is affine with slope 1/2,
//! so a run of `m` steps under constant noise has the closed form
//! `x_m = X + 2^-m (x_0 - X)` around the run's fixed point `X`. Past 60
//! steps the offset term is below double resolution, so a block splits
//! into an explicit prefix of at most 60 steps plus a run-length remainder
//! that contributes `phi0(X) * (len - prefix)` to the Birkhoff sum with no
//! rounding at all. Birkhoff sums therefore carry an exact 128-bit integer
//! part next to a small floating part, which is what keeps averages
//! meaningful at horizons around 1e15 steps.

use crate::blocks::ItineraryBlock;
use crate::circle::{circle_dist, fiber_fixed_point, fiber_step, CirclePoint, ObservableSpec, UnperturbedMap};
use crate::driver::Driver;
use crate::error::Error;

/// Steps after which `2^-m * diam(I0)` falls below double-precision
/// resolution at the scale of `I0`.
pub const EXACT_PREFIX: u128 = 60;

/// Default budget for naive stepping.
pub const NAIVE_BUDGET: u128 = 10_000_000;

/// The composed system: unperturbed map plus noise level. Drivers are
/// passed per call so one instance serves every scenario.
#[derive(Debug, Clone)]
pub struct NdsInstance {
    pub map: UnperturbedMap,
    pub epsilon: f64,
}

impl NdsInstance {
    pub fn new(map: UnperturbedMap, epsilon: f64) -> Result<Self, Error> {
        if !(epsilon > 0.0 && epsilon < 0.125) {
            return Err(Error::InvalidParam(format!(
                "noise level must lie in (0, 1/8), got {epsilon}"
            )));
        }
        Ok(NdsInstance { map, epsilon })
    }

    pub fn with_default_map(epsilon: f64) -> Result<Self, Error> {
        Self::new(UnperturbedMap::default(), epsilon)
    }

    /// One composed step: apply the fiber map of the current driver state,
    /// then advance the driver.
    #[inline]
    pub fn step<D: Driver + ?Sized>(&self, driver: &mut D, x: CirclePoint) -> CirclePoint {
        let y = fiber_step(&self.map, self.epsilon, driver.kappa(), x);
        driver.step();
        y
    }
}

/// Orbit checkpoints recorded by naive iteration.
#[derive(Debug, Clone)]
pub struct OrbitRecord {
    /// Requested checkpoint times (strictly increasing).
    pub checkpoints: Vec<u128>,
    /// Orbit point at each checkpoint.
    pub points: Vec<CirclePoint>,
    /// Noise values consumed at each step up to the last checkpoint, if
    /// requested.
    pub kappas: Vec<f64>,
    /// Total steps taken.
    pub step_count: u128,
}

/// Naive left-to-right orbit fold, recording requested checkpoints.
///
/// `checkpoints` must be strictly increasing; a checkpoint `n` records the
/// point after `n` steps (so `0` records the initial point).
pub fn iterate_naive<D: Driver + ?Sized>(
    nds: &NdsInstance,
    driver: &mut D,
    x0: CirclePoint,
    checkpoints: &[u128],
    record_kappas: bool,
) -> Result<OrbitRecord, Error> {
    let n = checkpoints.last().copied().unwrap_or(0);
    if n > NAIVE_BUDGET {
        return Err(Error::StepBudget { requested: n, limit: NAIVE_BUDGET });
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("checkpoints must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut kappas = Vec::new();
    let mut x = x0;
    let mut next = 0usize;
    let mut j: u128 = 0;
    loop {
        while next < checkpoints.len() && checkpoints[next] == j {
            points.push(x);
            next += 1;
        }
        if j == n {
            break;
        }
        if record_kappas {
            kappas.push(driver.kappa());
        }
        x = nds.step(driver, x);
        j += 1;
    }
    Ok(OrbitRecord { checkpoints: checkpoints.to_vec(), points, kappas, step_count: n })
}

/// Birkhoff sum of the observable along an orbit, split into an exact
/// integer part (run-length contributions at observable value exactly 1),
/// a small floating part (explicitly evaluated steps), and an unresolved
/// step count whose contribution is only known to lie in `[0, 1]` per
/// step. Merging is associative, so partial sums can be combined.
#[derive(Debug, Clone, Copy, Default)]
pub struct BirkhoffAccumulator {
    pub steps: u128,
    pub ones: u128,
    pub partial: f64,
    pub unresolved: u128,
}

impl BirkhoffAccumulator {
    pub fn add_eval(&mut self, phi: f64) {
        self.steps += 1;
        self.partial += phi;
    }

    pub fn add_ones(&mut self, len: u128) {
        self.steps += len;
        self.ones += len;
    }

    pub fn add_zeros(&mut self, len: u128) {
        self.steps += len;
    }

    pub fn add_unresolved(&mut self, len: u128) {
        self.steps += len;
        self.unresolved += len;
    }

    pub fn merge(&mut self, other: BirkhoffAccumulator) {
        self.steps += other.steps;
        self.ones += other.ones;
        self.partial += other.partial;
        self.unresolved += other.unresolved;
    }

    /// Lower bound of the time average.
    pub fn average_lo(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        (self.ones as f64 + self.partial) / self.steps as f64
    }

    /// Upper bound of the time average.
    pub fn average_hi(&self) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        (self.ones as f64 + self.partial + self.unresolved as f64) / self.steps as f64
    }

    /// Midpoint estimate; equals the exact average when nothing was
    /// skipped.
    pub fn average(&self) -> f64 {
        0.5 * (self.average_lo() + self.average_hi())
    }

    pub fn is_exact(&self) -> bool {
        self.unresolved == 0
    }
}

/// Options for the block evaluator.
#[derive(Debug, Clone, Copy)]
pub struct BlockEvalOptions {
    /// Blocks no longer than this are stepped explicitly even when their
    /// observable contribution has no closed form.
    pub eval_limit: u128,
}

impl Default for BlockEvalOptions {
    fn default() -> Self {
        // long enough that every block of the flow itineraries and every
        // small-scale symbolic itinerary is evaluated exactly
        BlockEvalOptions { eval_limit: 1 << 20 }
    }
}

/// Evaluate an orbit over run-length blocks, accumulating the Birkhoff
/// sum of `obs` along the way.
///
/// Within a constant-noise block the orbit is `x_m = X + 2^-m (x_0 - X)`;
/// an explicit prefix of at most [`EXACT_PREFIX`] steps is stepped
/// one-by-one and the remainder contributes `phi0(X)` per step exactly
/// (the orbit sits within `2^-60` of `X` there, strictly inside a plateau
/// of the observable whenever `phi0(X)` is 0 or 1). Long blocks whose
/// per-step value has no closed form (noise ramps) are only bounded; they
/// show up in `unresolved`.
///
/// Requires `x0` in `I0`; the closed form is valid only on the invariant
/// interval.
pub fn iterate_blocks<I>(
    nds: &NdsInstance,
    obs: &ObservableSpec,
    blocks: I,
    x0: CirclePoint,
    opts: BlockEvalOptions,
) -> Result<(CirclePoint, BirkhoffAccumulator), Error>
where
    I: IntoIterator<Item = ItineraryBlock>,
{
    if !x0.in_i0() {
        return Err(Error::OutOfDomain(format!(
            "block acceleration needs a start in I0, got {}",
            x0.value()
        )));
    }
    let mut x = x0;
    let mut acc = BirkhoffAccumulator::default();
    for b in blocks {
        if b.len == 0 {
            continue;
        }
        apply_block(nds, obs, &b, &mut x, &mut acc, opts);
    }
    Ok((x, acc))
}

fn apply_block(
    nds: &NdsInstance,
    obs: &ObservableSpec,
    b: &ItineraryBlock,
    x: &mut CirclePoint,
    acc: &mut BirkhoffAccumulator,
    opts: BlockEvalOptions,
) {
    let fixed = fiber_fixed_point(nds.epsilon, b.kappa);
    let phi_fixed = obs.phi0(fixed);
    let closed_form = phi_fixed == 0.0 || phi_fixed == 1.0;

    let prefix = if closed_form || b.len <= opts.eval_limit {
        b.len.min(EXACT_PREFIX)
    } else {
        0
    };
    for _ in 0..prefix {
        acc.add_eval(obs.phi0(*x));
        *x = fiber_step(&nds.map, nds.epsilon, b.kappa, *x);
    }
    let rest = b.len - prefix;
    if rest == 0 {
        return;
    }
    if closed_form {
        // orbit parked at the fixed point for the remainder
        if rest >= EXACT_PREFIX {
            *x = fixed;
        } else {
            let scale = 0.5f64.powi(rest as i32);
            *x = CirclePoint::wrap(fixed.value() + scale * (x.value() - fixed.value()));
        }
        if phi_fixed == 1.0 {
            acc.add_ones(rest);
        } else {
            acc.add_zeros(rest);
        }
    } else if b.len <= opts.eval_limit {
        for _ in 0..rest {
            acc.add_eval(obs.phi0(*x));
            *x = fiber_step(&nds.map, nds.epsilon, b.kappa, *x);
        }
    } else {
        // no closed form and too long to step: bound the contribution and
        // park the orbit at the block's fixed point (correct to 2^-rest)
        acc.add_unresolved(rest);
        if rest >= EXACT_PREFIX {
            *x = fixed;
        } else {
            let scale = 0.5f64.powi(rest as i32);
            *x = CirclePoint::wrap(fixed.value() + scale * (x.value() - fixed.value()));
        }
    }
}

/// Left- and right-hand sides of the one-step contraction estimate
/// `d(f^n_omega(x), X_omega') <= 2^-n + 6 eps max_j |kappa_j - kappa'|`.
#[derive(Debug, Clone, Copy)]
pub struct ContractionBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Evaluate the contraction estimate along `n` steps of a driver.
pub fn contraction_bound_check<D: Driver + ?Sized>(
    nds: &NdsInstance,
    driver: &mut D,
    x0: CirclePoint,
    kappa_prime: f64,
    n: u32,
) -> Result<ContractionBound, Error> {
    if !x0.in_i0() {
        return Err(Error::OutOfDomain("contraction estimate needs x in I0".into()));
    }
    if n > 10_000 {
        return Err(Error::StepBudget { requested: n as u128, limit: 10_000 });
    }
    let mut x = x0;
    let mut max_dev: f64 = 0.0;
    for _ in 0..n {
        max_dev = max_dev.max((driver.kappa() - kappa_prime).abs());
        x = nds.step(driver, x);
    }
    let target = fiber_fixed_point(nds.epsilon, kappa_prime);
    let lhs = circle_dist(x, target);
    let rhs = 0.5f64.powi(n as i32) + 6.0 * nds.epsilon * max_dev;
    Ok(ContractionBound { lhs, rhs, ok: lhs <= rhs + 1e-12 })
}

/// Check that every trapped time of the orbit lands inside the target
/// plateau: distance to the target fixed point at most `(2/3) rho0`.
pub fn trapped_implies_plateau(
    obs: &ObservableSpec,
    orbit: &[CirclePoint],
    trapped_indices: &[usize],
    target: CirclePoint,
) -> bool {
    trapped_indices.iter().all(|&j| {
        j < orbit.len() && circle_dist(orbit[j], target) <= (2.0 / 3.0) * obs.rho0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockLabel;
    use crate::driver::{IidDriver, RotationDriver};

    fn setup() -> (NdsInstance, ObservableSpec) {
        let nds = NdsInstance::with_default_map(0.1).unwrap();
        let obs = ObservableSpec::for_noise(0.1, 1.0, -1.0).unwrap();
        (nds, obs)
    }

    fn pt(v: f64) -> CirclePoint {
        CirclePoint::project(v).unwrap()
    }

    /// Constant-noise driver for closed-form checks.
    struct ConstDriver(f64);
    impl Driver for ConstDriver {
        fn kappa(&self) -> f64 {
            self.0
        }
        fn step(&mut self) {}
        fn in_neighborhood(&self, _: crate::driver::Target, _: f64) -> bool {
            false
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let (nds, _) = setup();
        let mut d = ConstDriver(0.3);
        let rec = iterate_naive(&nds, &mut d, pt(0.4), &[0], false).unwrap();
        assert_eq!(rec.points[0].value(), 0.4);
        assert_eq!(rec.step_count, 0);
    }

    #[test]
    fn sink_is_fixed_under_zero_noise() {
        let (nds, _) = setup();
        let mut d = ConstDriver(0.0);
        let rec = iterate_naive(&nds, &mut d, pt(0.5), &[100], false).unwrap();
        assert_eq!(rec.points[0].value(), 0.5);
    }

    #[test]
    fn cocycle_identity_is_bitwise() {
        let (nds, _) = setup();
        let n = 137u128;
        let m = 89u128;
        let mut d1 = IidDriver::new(5);
        let full = iterate_naive(&nds, &mut d1, pt(0.33), &[n + m], true).unwrap();
        let mut d2 = IidDriver::new(5);
        let head = iterate_naive(&nds, &mut d2, pt(0.33), &[m], true).unwrap();
        let tail = iterate_naive(&nds, &mut d2, head.points[0], &[n], true).unwrap();
        assert_eq!(full.points[0].value(), tail.points[0].value());
        // recorded noise values split the same way
        assert_eq!(full.kappas.len() as u128, n + m);
        assert_eq!(&full.kappas[..m as usize], &head.kappas[..]);
        assert_eq!(&full.kappas[m as usize..], &tail.kappas[..]);
    }

    #[test]
    fn budget_is_enforced() {
        let (nds, _) = setup();
        let mut d = ConstDriver(0.0);
        assert!(iterate_naive(&nds, &mut d, pt(0.5), &[NAIVE_BUDGET + 1], false).is_err());
    }

    #[test]
    fn block_closed_form_matches_naive_ten_steps() {
        let (nds, obs) = setup();
        // run of ten steps at kappa = 1 from 0.5
        let block = ItineraryBlock::new(BlockLabel::Transit, 1.0, 10);
        let (x, acc) =
            iterate_blocks(&nds, &obs, [block], pt(0.5), BlockEvalOptions::default()).unwrap();
        let expect = 0.7 + (0.5 - 0.7) / 1024.0;
        assert!((x.value() - expect).abs() < 1e-12, "{} vs {expect}", x.value());
        let mut d = ConstDriver(1.0);
        let naive = iterate_naive(&nds, &mut d, pt(0.5), &[10], false).unwrap();
        assert!((x.value() - naive.points[0].value()).abs() < 1e-12);
        assert_eq!(acc.steps, 10);
        assert!(acc.is_exact());
    }

    #[test]
    fn empty_block_is_identity() {
        let (nds, obs) = setup();
        let block = ItineraryBlock::new(BlockLabel::Transit, 1.0, 0);
        let (x, acc) =
            iterate_blocks(&nds, &obs, [block], pt(0.4), BlockEvalOptions::default()).unwrap();
        assert_eq!(x.value(), 0.4);
        assert_eq!(acc.steps, 0);
    }

    #[test]
    fn fixed_point_stays_fixed_over_long_block() {
        let (nds, obs) = setup();
        let x0 = fiber_fixed_point(0.1, 1.0);
        let block = ItineraryBlock::new(BlockLabel::NearP, 1.0, 1_000_000_000_000u128);
        let (x, acc) = iterate_blocks(&nds, &obs, [block], x0, BlockEvalOptions::default()).unwrap();
        assert!((x.value() - x0.value()).abs() <= 1e-14);
        // all but the 60-step prefix count as exact ones, prefix evaluates to 1
        assert_eq!(acc.ones, 1_000_000_000_000 - 60);
        assert_eq!(acc.partial, 60.0);
        assert!(acc.is_exact());
        assert!((acc.average() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn acceleration_requires_start_in_i0() {
        let (nds, obs) = setup();
        let block = ItineraryBlock::new(BlockLabel::Transit, 0.0, 5);
        assert!(iterate_blocks(&nds, &obs, [block], pt(0.1), BlockEvalOptions::default()).is_err());
    }

    #[test]
    fn blocks_match_naive_over_iid_stream() {
        let (nds, obs) = setup();
        let n: u128 = 50_000;
        // unit blocks from a cloned driver
        let mut src = IidDriver::new(99);
        let mut blocks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            blocks.push(ItineraryBlock::new(BlockLabel::Transit, src.kappa(), 1));
            src.step();
        }
        let (x_blocks, acc) =
            iterate_blocks(&nds, &obs, blocks, pt(0.5), BlockEvalOptions::default()).unwrap();

        let mut d = IidDriver::new(99);
        let mut x = pt(0.5);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += obs.phi0(x);
            x = nds.step(&mut d, x);
        }
        assert!((x_blocks.value() - x.value()).abs() < 1e-12);
        let accel_sum = acc.ones as f64 + acc.partial;
        assert!((accel_sum - sum).abs() <= 1e-9 * n as f64, "{accel_sum} vs {sum}");
        assert!(acc.is_exact());
    }

    #[test]
    fn contraction_bound_constant_driver_is_pure_halving() {
        let (nds, _) = setup();
        let mut d = ConstDriver(0.5);
        let r = contraction_bound_check(&nds, &mut d, pt(0.26), 0.5, 20).unwrap();
        assert!(r.ok);
        assert!(r.lhs <= 0.5f64.powi(20) + 1e-15);
    }

    #[test]
    fn contraction_bound_base_case() {
        let (nds, _) = setup();
        let mut d = ConstDriver(0.0);
        let r = contraction_bound_check(&nds, &mut d, pt(0.3), 0.9, 0).unwrap();
        assert!(r.ok);
        assert!(r.lhs <= 0.5);
        assert!(r.rhs >= 1.0);
    }

    #[test]
    fn contraction_bound_fuzz_small() {
        let (nds, _) = setup();
        let mut seed = 0xDEADBEEFu64;
        for _ in 0..2000 {
            let a = crate::driver::splitmix64_unit(&mut seed);
            let b = crate::driver::splitmix64_unit(&mut seed);
            let c = crate::driver::splitmix64_unit(&mut seed);
            let x = pt(0.25 + 0.5 * (a + 1.0) / 2.0);
            let kp = b;
            let n = ((c + 1.0) * 30.0) as u32;
            let mut d = IidDriver::new(seed);
            let r = contraction_bound_check(&nds, &mut d, x, kp, n).unwrap();
            assert!(r.ok, "violated: lhs {} rhs {} n {n}", r.lhs, r.rhs);
        }
    }

    #[test]
    fn accumulator_merge_is_associative() {
        let mut a = BirkhoffAccumulator::default();
        a.add_ones(10);
        a.add_eval(0.5);
        let mut b = BirkhoffAccumulator::default();
        b.add_unresolved(4);
        b.add_eval(0.25);
        let mut ab = a;
        ab.merge(b);
        assert_eq!(ab.steps, 16);
        assert_eq!(ab.ones, 10);
        assert_eq!(ab.unresolved, 4);
        assert!((ab.average_hi() - ab.average_lo() - 4.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn plateau_check_vacuous_and_direct() {
        let (_, obs) = setup();
        let orbit = vec![pt(0.7), pt(0.69), pt(0.2)];
        assert!(trapped_implies_plateau(&obs, &orbit, &[], obs.x_p));
        assert!(trapped_implies_plateau(&obs, &orbit, &[0, 1], obs.x_p));
        assert!(!trapped_implies_plateau(&obs, &orbit, &[2], obs.x_p));
    }

    #[test]
    fn flow_trapped_indices_land_in_plateau() {
        use crate::bowen::{BowenDriver, BowenParams};
        use crate::driver::Target;
        let (nds, obs) = setup();
        let mut d = BowenDriver::new(BowenParams::default()).unwrap();
        let mut x = pt(0.5);
        let mut orbit = vec![x];
        let mut member = Vec::new();
        let n = 6000usize;
        for _ in 0..n {
            member.push(d.in_neighborhood(Target::P, 0.25));
            x = nds.step(&mut d, x);
            orbit.push(x);
        }
        // nu = 5 satisfies 2^-nu <= rho0/3; every trapped index must sit
        // inside the plateau ball of radius (2/3) rho0
        let trapped: Vec<usize> =
            (5..n).filter(|&j| member[j - 5..=j].iter().all(|&m| m)).collect();
        assert!(trapped.len() >= 1000, "only {} trapped indices", trapped.len());
        assert!(trapped_implies_plateau(&obs, &orbit, &trapped, obs.x_p));
        // nu = 0 is too shallow: the first steps inside a window still
        // carry the orbit near the other target
        let shallow: Vec<usize> = (0..n).filter(|&j| member[j]).collect();
        assert!(!trapped_implies_plateau(&obs, &orbit, &shallow, obs.x_p));
    }

    #[test]
    fn rotation_driver_naive_runs() {
        let (nds, obs) = setup();
        let mut d = RotationDriver::golden(pt(0.12));
        let mut x = pt(0.5);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            sum += obs.phi0(x);
            x = nds.step(&mut d, x);
        }
        let avg = sum / 10_000.0;
        assert!((0.0..=1.0).contains(&avg));
    }
}
