//! Symbolic block itinerary with switching run lengths.
//!
//! The driver walks an infinite concatenation of blocks indexed by
//! `k = k0+1, k0+2, ...`. Block `k` spends a long run of `z_k k^2 - 2 n0 + 1`
//! steps near `p`, then `k^2 - 2 n0 + 1` steps near `p_hat`, padded by
//! short noise ramps; its total length is `m_k = (z_k + 1) k^2 + a_k + b_k`
//! with paddings `a_k = b_k = k`. The run multiplier `z_k` is `z0` on odd
//! schedule segments and `z0 + 1` on even ones, so the fraction of time
//! spent near `p`, sampled at the segment boundaries, alternates between
//! two distinct limits `z0/(z0+1)` and `(z0+1)/(z0+2)` forever.
//!
//! Everything an experiment needs — cumulative block lengths, trapped-time
//! counts, Birkhoff-sum bounds — has a closed form in Faulhaber sums over
//! the schedule segments, evaluated in 128-bit integers. Stepping the
//! symbolic state one tick at a time exists as well and serves as the
//! enumeration oracle for those formulas.

use crate::blocks::{BlockLabel, ItineraryBlock, MembershipRun};
use crate::cocycle::EXACT_PREFIX;
use crate::driver::{Driver, Target};
use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Cumulative step counts above this are refused; comfortably inside
/// u128 so every downstream product stays representable.
const STEP_BUDGET: u128 = 1_000_000_000_000_000_000_000_000_000_000; // 1e30
/// Largest block index the closed forms accept; `m_hat` already exceeds
/// the step budget well before this, and `s2` stays far from u128 range.
const K_CAP: u64 = 10_000_000_000;

/// Free constants of the itinerary. Paddings are fixed to `a_k = b_k = k`,
/// which keeps `limsup a_k / k` finite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ItineraryParams {
    /// Base run multiplier; segments alternate between `z0` and `z0 + 1`.
    pub z0: u64,
    /// Transition padding inside each block.
    pub n0: u64,
    /// Blocks start at `k0 + 1`.
    pub k0: u64,
}

impl Default for ItineraryParams {
    fn default() -> Self {
        ItineraryParams { z0: 5, n0: 2, k0: 10 }
    }
}

impl ItineraryParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.z0 < 1 {
            return Err(Error::InvalidParam("z0 must be at least 1".into()));
        }
        if self.k0 < 1 {
            return Err(Error::InvalidParam("k0 must be at least 1".into()));
        }
        let k1 = (self.k0 + 1) as u128;
        if (self.z0 as u128) * k1 * k1 <= 2 * self.n0 as u128 {
            return Err(Error::InvalidParam(
                "first block too short: need z0 (k0+1)^2 > 2 n0".into(),
            ));
        }
        if k1 * k1 <= 2 * self.n0 as u128 {
            return Err(Error::InvalidParam(
                "first block too short: need (k0+1)^2 > 2 n0".into(),
            ));
        }
        Ok(())
    }

    /// `z*` for a segment index: `z0` on odd segments, `z0 + 1` on even.
    pub fn z_star(&self, j_prime: usize) -> u64 {
        if j_prime % 2 == 1 {
            self.z0
        } else {
            self.z0 + 1
        }
    }
}

// Faulhaber sums; k stays below ~3e9 so the products fit u128 easily.
fn s1(k: u128) -> u128 {
    k * (k + 1) / 2
}

fn s2(k: u128) -> u128 {
    k * (k + 1) * (2 * k + 1) / 6
}

/// The switching schedule: `points[J'-1] = k(J')`, with `k(0) = k0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub k0: u64,
    pub points: Vec<u64>,
}

impl Schedule {
    pub fn j_max(&self) -> usize {
        self.points.len()
    }

    pub fn k_of(&self, j_prime: usize) -> u64 {
        if j_prime == 0 {
            self.k0
        } else {
            self.points[j_prime - 1]
        }
    }

    /// Segment index `J'` with `k(J'-1) < k <= k(J')`; blocks beyond the
    /// last boundary keep the final parity.
    pub fn segment_of(&self, k: u64) -> usize {
        match self.points.binary_search(&k) {
            Ok(i) => i + 1,
            Err(i) => (i + 1).min(self.points.len().max(1)),
        }
    }
}

/// Run multiplier of block `k`.
pub fn z_of_k(params: &ItineraryParams, schedule: &Schedule, k: u64) -> Result<u64, Error> {
    if k <= params.k0 {
        return Err(Error::InvalidParam(format!(
            "blocks are indexed k > k0 = {}, got {k}",
            params.k0
        )));
    }
    Ok(params.z_star(schedule.segment_of(k)))
}

/// Internal layout of one block, lengths in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub k: u64,
    pub z: u64,
    /// head ramp, `a_k + n0` steps, noise rising -1 -> +1
    pub head: u128,
    /// near-`p` run at noise +1
    pub p_run: u128,
    /// middle ramp, `2 n0 - 1` steps (0 when `n0 = 0`)
    pub mid: u128,
    /// near-`p_hat` run at noise -1
    pub phat_run: u128,
    /// tail at noise -1
    pub tail: u128,
}

impl BlockLayout {
    pub fn total(&self) -> u128 {
        self.head + self.p_run + self.mid + self.phat_run + self.tail
    }

    /// Offset range of the near-`p` run within the block.
    pub fn p_range(&self) -> (u128, u128) {
        (self.head, self.head + self.p_run - 1)
    }

    /// Offset range of the near-`p_hat` run within the block.
    pub fn phat_range(&self) -> (u128, u128) {
        let start = self.head + self.p_run + self.mid;
        (start, start + self.phat_run - 1)
    }

    /// Noise value at an offset within the block.
    pub fn kappa_at(&self, offset: u128) -> f64 {
        debug_assert!(offset < self.total());
        if offset < self.head {
            return -1.0 + 2.0 * (offset + 1) as f64 / self.head as f64;
        }
        let o = offset - self.head;
        if o < self.p_run {
            return 1.0;
        }
        let o = o - self.p_run;
        if o < self.mid {
            return 1.0 - 2.0 * (o + 1) as f64 / (self.mid + 1) as f64;
        }
        -1.0
    }

    /// Neighborhood membership at an offset; delta-independent by
    /// construction of the symbolic model.
    pub fn membership_at(&self, offset: u128) -> Option<Target> {
        let (ps, pe) = self.p_range();
        if offset >= ps && offset <= pe {
            return Some(Target::P);
        }
        let (qs, qe) = self.phat_range();
        if offset >= qs && offset <= qe {
            return Some(Target::PHat);
        }
        None
    }
}

/// Layout of block `k`. The two runs and their paddings always sum to
/// `m_k = (z_k + 1) k^2 + a_k + b_k` exactly.
pub fn block_layout(
    params: &ItineraryParams,
    schedule: &Schedule,
    k: u64,
) -> Result<BlockLayout, Error> {
    let z = z_of_k(params, schedule, k)?;
    let k2 = (k as u128) * (k as u128);
    let n0 = params.n0 as u128;
    let a = k as u128;
    let b = k as u128;
    let head = a + n0;
    let (p_run, mid, phat_run) = if n0 == 0 {
        // degenerate padding-free case: the shared boundary step goes to
        // the near-p run
        (z as u128 * k2 + 1, 0, k2)
    } else {
        (z as u128 * k2 - 2 * n0 + 1, 2 * n0 - 1, k2 - 2 * n0 + 1)
    };
    let m = (z as u128 + 1) * k2 + a + b;
    let used = head + p_run + mid + phat_run;
    if used > m {
        return Err(Error::InvalidParam(format!("block {k} too short for its paddings")));
    }
    let layout = BlockLayout { k, z, head, p_run, mid, phat_run, tail: m - used };
    debug_assert_eq!(layout.total(), m);
    Ok(layout)
}

/// Cumulative steps through block `k_end` inclusive (`m_hat(k0) = 0`),
/// evaluated segment-wise in closed form.
pub fn m_hat(params: &ItineraryParams, schedule: &Schedule, k_end: u64) -> Result<u128, Error> {
    if k_end <= params.k0 {
        return Ok(0);
    }
    if k_end > K_CAP {
        return Err(Error::PrecisionBudget(format!("block index {k_end} beyond closed-form cap")));
    }
    let mut total: u128 = 0;
    let mut lo = params.k0; // exclusive
    let mut j = 1usize;
    while lo < k_end {
        let seg_hi = if j <= schedule.points.len() { schedule.k_of(j) } else { K_CAP };
        let hi = seg_hi.min(k_end);
        let z = params.z_star(seg_index_clamped(schedule, j)) as u128;
        total += seg_sum(z, lo, hi);
        if total > STEP_BUDGET {
            return Err(Error::PrecisionBudget(format!(
                "cumulative steps exceed budget at block {hi}"
            )));
        }
        lo = hi;
        j += 1;
    }
    Ok(total)
}

/// Schedule points as step horizons: `n(J') = m_hat(k(J'))`.
pub fn schedule_horizons(
    params: &ItineraryParams,
    schedule: &Schedule,
) -> Result<Vec<u128>, Error> {
    schedule.points.iter().map(|&k| m_hat(params, schedule, k)).collect()
}

/// Build the switching schedule: each `k(J')` is the smallest
/// power-of-two multiple of `k(J'-1)` for which all three correction
/// terms (trapping losses `Z1`, padding share `Z2`, and the carried-over
/// mass `m_hat(k(J'-1)) / m_hat(k(J'))`) are at most `2^(-J'-2)`. That
/// margin puts the trapped fractions within `2^-J'` of their limits.
pub fn build_schedule(
    params: &ItineraryParams,
    j_max: usize,
    nu_budget: u32,
) -> Result<Schedule, Error> {
    params.validate()?;
    if j_max < 1 {
        return Err(Error::InvalidParam("schedule depth must be at least 1".into()));
    }
    let mut schedule = Schedule { k0: params.k0, points: Vec::with_capacity(j_max) };
    let n0 = params.n0 as u128;
    for j in 1..=j_max {
        let prev = schedule.k_of(j - 1);
        let m_prev = m_hat(params, &schedule, prev)?;
        let mut mult: u64 = 2;
        let k_next = loop {
            let cand = prev
                .checked_mul(mult)
                .ok_or_else(|| Error::PrecisionBudget("schedule point overflow".into()))?;
            // evaluate the three corrections over (prev, cand]
            let cnt = (cand - prev) as u128;
            let sum_k2 = s2(cand as u128) - s2(prev as u128);
            let sum_k = s1(cand as u128) - s1(prev as u128);
            let scale = 1u128 << (j + 2);
            let z1_ok = (2 * n0 + nu_budget as u128) * cnt * scale <= sum_k2;
            let z2_ok = 2 * sum_k * scale <= sum_k2;
            let z = params.z_star(j) as u128;
            let m_cand = m_prev + (z + 1) * sum_k2 + 2 * sum_k;
            if m_cand > STEP_BUDGET {
                return Err(Error::PrecisionBudget(format!(
                    "schedule depth {j} exceeds the 128-bit step budget"
                )));
            }
            let ratio_ok = m_prev * scale <= m_cand;
            if z1_ok && z2_ok && ratio_ok {
                break cand;
            }
            mult = mult
                .checked_mul(2)
                .ok_or_else(|| Error::PrecisionBudget("schedule multiplier overflow".into()))?;
        };
        schedule.points.push(k_next);
    }
    Ok(schedule)
}

/// Blocks of one `k` as a run-length itinerary fragment (ramps become
/// unit blocks). `nu` trims the first `nu` steps of each run from its
/// trapped label, mirroring the trapping definition.
pub fn block_of_k(
    params: &ItineraryParams,
    schedule: &Schedule,
    k: u64,
    nu: u32,
) -> Result<Vec<ItineraryBlock>, Error> {
    let layout = block_layout(params, schedule, k)?;
    let mut out = Vec::new();
    for i in 0..layout.head {
        out.push(ItineraryBlock::new(BlockLabel::Transit, layout.kappa_at(i), 1));
    }
    push_run(&mut out, BlockLabel::NearP, 1.0, layout.p_run, nu);
    let mid_base = layout.head + layout.p_run;
    for i in 0..layout.mid {
        out.push(ItineraryBlock::new(BlockLabel::Transit, layout.kappa_at(mid_base + i), 1));
    }
    push_run(&mut out, BlockLabel::NearPHat, -1.0, layout.phat_run, nu);
    if layout.tail > 0 {
        out.push(ItineraryBlock::new(BlockLabel::Transit, -1.0, layout.tail));
    }
    Ok(out)
}

fn push_run(out: &mut Vec<ItineraryBlock>, label: BlockLabel, kappa: f64, len: u128, nu: u32) {
    if len == 0 {
        return;
    }
    let trim = (nu as u128).min(len);
    if trim > 0 {
        out.push(ItineraryBlock::new(BlockLabel::Transit, kappa, trim));
    }
    if len > trim {
        out.push(ItineraryBlock::new(label, kappa, len - trim));
    }
}

/// Materialized block stream clipped to `horizon` steps. Intended for the
/// oracle scales; the closed-form evaluators below handle large horizons.
pub fn blocks_upto(
    params: &ItineraryParams,
    schedule: &Schedule,
    nu: u32,
    horizon: u128,
) -> Result<Vec<ItineraryBlock>, Error> {
    if horizon > 100_000_000 {
        return Err(Error::StepBudget { requested: horizon, limit: 100_000_000 });
    }
    let mut out = Vec::new();
    let mut produced: u128 = 0;
    let mut k = params.k0 + 1;
    'outer: while produced < horizon {
        for b in block_of_k(params, schedule, k, nu)? {
            let take = b.len.min(horizon - produced);
            if take > 0 {
                out.push(ItineraryBlock::new(b.label, b.kappa, take));
                produced += take;
            }
            if produced == horizon {
                break 'outer;
            }
        }
        k += 1;
    }
    Ok(out)
}

/// Membership runs (global step indices) for both targets up to
/// `horizon`, for run-length trapped counting.
pub fn membership_runs(
    params: &ItineraryParams,
    schedule: &Schedule,
    horizon: u128,
) -> Result<(Vec<MembershipRun>, Vec<MembershipRun>), Error> {
    let mut p = Vec::new();
    let mut phat = Vec::new();
    let mut base: u128 = 0;
    let mut k = params.k0 + 1;
    while base < horizon {
        let layout = block_layout(params, schedule, k)?;
        let (ps, pe) = layout.p_range();
        let (qs, qe) = layout.phat_range();
        for (runs, s, e) in [(&mut p, ps, pe), (&mut phat, qs, qe)] {
            let gs = base + s;
            if gs >= horizon {
                continue;
            }
            runs.push(MembershipRun::new(gs, (base + e).min(horizon - 1)));
        }
        base += layout.total();
        k += 1;
    }
    Ok((p, phat))
}

/// Exact nu-trapped count for one target at horizon `n`, in closed form:
/// full schedule segments contribute Faulhaber sums, the block containing
/// `n` is handled explicitly.
pub fn trapped_count_at(
    params: &ItineraryParams,
    schedule: &Schedule,
    target: Target,
    nu: u32,
    n: u128,
) -> Result<u128, Error> {
    params.validate()?;
    // the closed form assumes every block's run outlasts nu
    let first = block_layout(params, schedule, params.k0 + 1)?;
    let first_len = match target {
        Target::P => first.p_run,
        Target::PHat => first.phat_run,
    };
    if (nu as u128) >= first_len {
        return Err(Error::InvalidParam(format!(
            "nu = {nu} exceeds the shortest run; closed form unavailable"
        )));
    }
    let mut total: u128 = 0;
    let mut lo = params.k0;
    let mut base: u128 = 0; // m_hat(lo)
    let mut j = 1usize;
    while lo < K_CAP {
        let seg_hi = if j <= schedule.points.len() { schedule.k_of(j) } else { K_CAP };
        let z = params.z_star(seg_index_clamped(schedule, j)) as u128;
        let seg_full_end = largest_full_block(z, lo, seg_hi, base, n);
        if seg_full_end > lo {
            total += run_sum(params, target, z, lo, seg_full_end, nu);
        }
        let new_base = base + seg_sum(z, lo, seg_full_end);
        if seg_full_end < seg_hi || new_base >= n {
            if new_base < n {
                let k = seg_full_end + 1;
                let layout = block_layout(params, schedule, k)?;
                total += partial_block_trapped(&layout, target, nu, n - new_base);
            }
            return Ok(total);
        }
        base = new_base;
        lo = seg_hi;
        j += 1;
    }
    Err(Error::PrecisionBudget(format!("horizon {n} beyond closed-form cap")))
}

/// Largest `K` in `[lo, seg_hi]` with `base + sum_{(lo, K]} m_k <= n`.
fn largest_full_block(z: u128, lo: u64, seg_hi: u64, base: u128, n: u128) -> u64 {
    let mut a = lo;
    let mut b = seg_hi;
    while a < b {
        let mid = a + (b - a).div_ceil(2);
        if base + seg_sum(z, lo, mid) <= n {
            a = mid;
        } else {
            b = mid - 1;
        }
    }
    a
}

/// Segment index for parity lookups; past the last boundary the final
/// segment's parity continues, matching `Schedule::segment_of`.
fn seg_index_clamped(schedule: &Schedule, j: usize) -> usize {
    j.min(schedule.points.len().max(1))
}

/// `sum_{k in (lo, hi]} m_k` for a fixed z.
fn seg_sum(z: u128, lo: u64, hi: u64) -> u128 {
    (z + 1) * (s2(hi as u128) - s2(lo as u128)) + 2 * (s1(hi as u128) - s1(lo as u128))
}

/// `sum_{k in (lo, hi]} (run_len(k) - nu)` for a fixed z, where
/// `run_len(k) = mult k^2 + base_len`.
fn run_sum(params: &ItineraryParams, target: Target, z: u128, lo: u64, hi: u64, nu: u32) -> u128 {
    let n0 = params.n0 as i128;
    let cnt = (hi - lo) as u128;
    let sum_k2 = s2(hi as u128) - s2(lo as u128);
    let (mult, base_len): (u128, i128) = match target {
        Target::P => (z, if n0 == 0 { 1 } else { 1 - 2 * n0 }),
        Target::PHat => (1, if n0 == 0 { 0 } else { 1 - 2 * n0 }),
    };
    let per_block_const = base_len - nu as i128;
    let total = mult * sum_k2;
    if per_block_const >= 0 {
        total + per_block_const as u128 * cnt
    } else {
        total - (-per_block_const) as u128 * cnt
    }
}

fn partial_block_trapped(layout: &BlockLayout, target: Target, nu: u32, steps: u128) -> u128 {
    // steps is the block-local horizon: offsets 0..steps-1 exist
    let (s, e) = match target {
        Target::P => layout.p_range(),
        Target::PHat => layout.phat_range(),
    };
    if steps == 0 {
        return 0;
    }
    let end = e.min(steps - 1);
    let start = s + nu as u128;
    if start > end {
        0
    } else {
        end - start + 1
    }
}

/// Exact rational trapped fractions at `n = m_hat(k(J'))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrappedFraction {
    pub numerator_p: u128,
    pub numerator_phat: u128,
    pub denominator: u128,
}

impl TrappedFraction {
    pub fn frac_p(&self) -> f64 {
        self.numerator_p as f64 / self.denominator as f64
    }

    pub fn frac_phat(&self) -> f64 {
        self.numerator_phat as f64 / self.denominator as f64
    }

    /// Exact comparison `num/den >= a/b - 2^-jp`.
    pub fn at_least(num: u128, den: u128, a: u128, b: u128, jp: usize) -> bool {
        // num/den >= (a 2^jp - b) / (b 2^jp)
        let scale = 1u128 << jp;
        let lhs = num.checked_mul(b).and_then(|v| v.checked_mul(scale));
        let rhs_factor = (a * scale).saturating_sub(b);
        let rhs = den.checked_mul(rhs_factor);
        match (lhs, rhs) {
            (Some(l), Some(r)) => l >= r,
            _ => panic!("trapped fraction comparison overflow"),
        }
    }
}

/// Trapped fractions for both targets at the `J'`-th schedule horizon.
pub fn trapped_fraction(
    params: &ItineraryParams,
    schedule: &Schedule,
    nu: u32,
    j_prime: usize,
) -> Result<TrappedFraction, Error> {
    if j_prime == 0 || j_prime > schedule.j_max() {
        return Err(Error::InvalidParam(format!(
            "schedule has {} segments, requested J' = {j_prime}",
            schedule.j_max()
        )));
    }
    let n = m_hat(params, schedule, schedule.k_of(j_prime))?;
    Ok(TrappedFraction {
        numerator_p: trapped_count_at(params, schedule, Target::P, nu, n)?,
        numerator_phat: trapped_count_at(params, schedule, Target::PHat, nu, n)?,
        denominator: n,
    })
}

/// Closed-form Birkhoff accumulator bounds at horizon `n` for the
/// canonical observable (1 near `p`, 0 near `p_hat`).
///
/// Long constant-noise runs contribute exactly: after the 60-step
/// settling prefix the orbit sits on the run's fixed point where the
/// observable is exactly 1 (near `p`) or 0 (near `p_hat`). Ramp steps and
/// settling prefixes are only bounded, so they surface as `unresolved`.
pub fn birkhoff_bounds_at(
    params: &ItineraryParams,
    schedule: &Schedule,
    n: u128,
) -> Result<crate::cocycle::BirkhoffAccumulator, Error> {
    params.validate()?;
    let first = block_layout(params, schedule, params.k0 + 1)?;
    if first.p_run <= EXACT_PREFIX || first.phat_run <= EXACT_PREFIX {
        return Err(Error::InvalidParam(
            "runs too short for closed-form Birkhoff bounds; use the block path".into(),
        ));
    }
    let mut acc = crate::cocycle::BirkhoffAccumulator::default();
    let n0 = params.n0 as u128;
    let mut lo = params.k0;
    let mut base: u128 = 0;
    let mut j = 1usize;
    while lo < K_CAP {
        let seg_hi = if j <= schedule.points.len() { schedule.k_of(j) } else { K_CAP };
        let z = params.z_star(seg_index_clamped(schedule, j)) as u128;
        let seg_full_end = largest_full_block(z, lo, seg_hi, base, n);
        if seg_full_end > lo {
            let cnt = (seg_full_end - lo) as u128;
            let sum_k2 = s2(seg_full_end as u128) - s2(lo as u128);
            let sum_k = s1(seg_full_end as u128) - s1(lo as u128);
            // near-p ones beyond the settling prefix
            let p_const =
                (if n0 == 0 { 1i128 } else { 1 - 2 * n0 as i128 }) - EXACT_PREFIX as i128;
            let ones = apply_const(z * sum_k2, p_const, cnt);
            // head + mid + tail ramp steps
            let ramps = if n0 == 0 {
                2 * sum_k - cnt // head = k, mid = 0, tail = k - 1
            } else {
                2 * sum_k + (4 * n0 - 2) * cnt // 2k + 4 n0 - 2 per block
            };
            // near-phat zeros beyond its prefix
            let q_const =
                (if n0 == 0 { 0i128 } else { 1 - 2 * n0 as i128 }) - EXACT_PREFIX as i128;
            let zeros = apply_const(sum_k2, q_const, cnt);
            acc.ones += ones;
            acc.unresolved += ramps + 2 * EXACT_PREFIX * cnt;
            acc.steps += ones + zeros + ramps + 2 * EXACT_PREFIX * cnt;
            debug_assert_eq!(acc.steps, base + seg_sum(z, lo, seg_full_end));
        }
        let new_base = base + seg_sum(z, lo, seg_full_end);
        if seg_full_end < seg_hi || new_base >= n {
            if new_base < n {
                let k = seg_full_end + 1;
                let layout = block_layout(params, schedule, k)?;
                partial_block_birkhoff(&layout, n - new_base, &mut acc);
            }
            debug_assert_eq!(acc.steps, n);
            return Ok(acc);
        }
        base = new_base;
        lo = seg_hi;
        j += 1;
    }
    Err(Error::PrecisionBudget(format!("horizon {n} beyond closed-form cap")))
}

fn apply_const(total: u128, per_block: i128, cnt: u128) -> u128 {
    if per_block >= 0 {
        total + per_block as u128 * cnt
    } else {
        total - (-per_block) as u128 * cnt
    }
}

fn partial_block_birkhoff(
    layout: &BlockLayout,
    steps: u128,
    acc: &mut crate::cocycle::BirkhoffAccumulator,
) {
    // walk the five sub-segments, clipping at `steps`
    let mut remaining = steps;
    let mut chunk = |len: u128, kind: u8, acc: &mut crate::cocycle::BirkhoffAccumulator| {
        if remaining == 0 {
            return;
        }
        let take = len.min(remaining);
        remaining -= take;
        match kind {
            0 => acc.add_unresolved(take),
            1 => {
                // near-p run: prefix unresolved, remainder exact ones
                let prefix = take.min(EXACT_PREFIX);
                acc.add_unresolved(prefix);
                acc.add_ones(take - prefix);
            }
            _ => {
                // near-phat run: prefix unresolved, remainder exact zeros
                let prefix = take.min(EXACT_PREFIX);
                acc.add_unresolved(prefix);
                acc.add_zeros(take - prefix);
            }
        }
    };
    chunk(layout.head, 0, acc);
    chunk(layout.p_run, 1, acc);
    chunk(layout.mid, 0, acc);
    chunk(layout.phat_run, 2, acc);
    chunk(layout.tail, 0, acc);
}

// ---------------------------------------------------------------------------
// Stepping driver
// ---------------------------------------------------------------------------

/// The symbolic itinerary as a driving system. Steps one tick at a time;
/// the past is bi-infinite by padding with copies of the first block, so
/// the driver is invertible.
#[derive(Debug, Clone)]
pub struct NewhouseDriver {
    params: ItineraryParams,
    schedule: Schedule,
    /// Block index: `>= 1` means block `k0 + index`; `<= 0` is a virtual
    /// past copy of block `k0 + 1`.
    block_index: i64,
    offset: u128,
    layout: BlockLayout,
}

impl NewhouseDriver {
    pub fn new(params: ItineraryParams, schedule: Schedule) -> Result<Self, Error> {
        params.validate()?;
        let layout = block_layout(&params, &schedule, params.k0 + 1)?;
        Ok(NewhouseDriver { params, schedule, block_index: 1, offset: 0, layout })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn k_of_index(&self, index: i64) -> u64 {
        if index >= 1 {
            self.params.k0 + index as u64
        } else {
            self.params.k0 + 1
        }
    }

    fn reload(&mut self) {
        let k = self.k_of_index(self.block_index);
        self.layout = block_layout(&self.params, &self.schedule, k)
            .expect("validated params produce layouts for every block");
    }

    /// Current global step index (0 at construction); negative when the
    /// driver has been stepped into the virtual past.
    pub fn position(&self) -> i128 {
        if self.block_index >= 1 {
            let k_prev = self.params.k0 + (self.block_index - 1) as u64;
            let base = m_hat(&self.params, &self.schedule, k_prev).unwrap();
            base as i128 + self.offset as i128
        } else {
            let first = block_layout(&self.params, &self.schedule, self.params.k0 + 1).unwrap();
            let depth = (1 - self.block_index) as i128;
            -(depth * first.total() as i128) + self.offset as i128
        }
    }
}

impl Driver for NewhouseDriver {
    fn kappa(&self) -> f64 {
        self.layout.kappa_at(self.offset)
    }

    fn step(&mut self) {
        self.offset += 1;
        if self.offset == self.layout.total() {
            self.offset = 0;
            self.block_index += 1;
            self.reload();
        }
    }

    fn in_neighborhood(&self, target: Target, _delta: f64) -> bool {
        self.layout.membership_at(self.offset) == Some(target)
    }

    fn step_back(&mut self) -> Result<(), Error> {
        if self.offset == 0 {
            self.block_index -= 1;
            self.reload();
            self.offset = self.layout.total() - 1;
        } else {
            self.offset -= 1;
        }
        Ok(())
    }

    fn invertible(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ItineraryParams, Schedule) {
        let params = ItineraryParams::default();
        let schedule = build_schedule(&params, 10, 5).unwrap();
        (params, schedule)
    }

    #[test]
    fn z_switches_with_segment_parity() {
        let (params, schedule) = setup();
        let k1 = schedule.k_of(1);
        assert_eq!(z_of_k(&params, &schedule, params.k0 + 1).unwrap(), 5);
        assert_eq!(z_of_k(&params, &schedule, k1).unwrap(), 5, "boundary belongs to its segment");
        assert_eq!(z_of_k(&params, &schedule, k1 + 1).unwrap(), 6);
        assert!(z_of_k(&params, &schedule, params.k0).is_err());
    }

    #[test]
    fn layout_sums_to_m_k() {
        let (params, schedule) = setup();
        for k in params.k0 + 1..params.k0 + 50 {
            let l = block_layout(&params, &schedule, k).unwrap();
            let k2 = (k as u128) * (k as u128);
            assert_eq!(l.total(), (l.z as u128 + 1) * k2 + 2 * k as u128);
        }
    }

    #[test]
    fn layout_example_frozen() {
        // z = 5, k = 100, n0 = 2, a = b = 100
        let params = ItineraryParams { z0: 5, n0: 2, k0: 10 };
        let schedule = Schedule { k0: 10, points: vec![1000] };
        let l = block_layout(&params, &schedule, 100).unwrap();
        assert_eq!(l.p_run, 50_000 - 3);
        assert_eq!(l.phat_run, 10_000 - 3);
        assert_eq!(l.head, 102);
        assert_eq!(l.mid, 3);
        assert_eq!(l.tail, 101);
    }

    #[test]
    fn padding_free_case() {
        let params = ItineraryParams { z0: 5, n0: 0, k0: 10 };
        let schedule = Schedule { k0: 10, points: vec![1000] };
        let l = block_layout(&params, &schedule, 20).unwrap();
        assert_eq!(l.p_run, 5 * 400 + 1);
        assert_eq!(l.mid, 0);
        assert_eq!(l.total(), 6 * 400 + 40);
    }

    #[test]
    fn m_hat_matches_loop() {
        let (params, schedule) = setup();
        let mut total: u128 = 0;
        for k in params.k0 + 1..=300 {
            total += block_layout(&params, &schedule, k).unwrap().total();
            assert_eq!(m_hat(&params, &schedule, k).unwrap(), total, "at k = {k}");
        }
    }

    #[test]
    fn schedule_corrections_within_bounds() {
        let (params, schedule) = setup();
        let n0 = params.n0 as u128;
        let nu = 5u128;
        for j in 1..=schedule.j_max() {
            let lo = schedule.k_of(j - 1) as u128;
            let hi = schedule.k_of(j) as u128;
            let cnt = hi - lo;
            let sum_k2 = s2(hi) - s2(lo);
            let sum_k = s1(hi) - s1(lo);
            let scale = 1u128 << (j + 2);
            assert!((2 * n0 + nu) * cnt * scale <= sum_k2, "Z1 at {j}");
            assert!(2 * sum_k * scale <= sum_k2, "Z2 at {j}");
            let m_prev = m_hat(&params, &schedule, schedule.k_of(j - 1)).unwrap();
            let m_cur = m_hat(&params, &schedule, schedule.k_of(j)).unwrap();
            assert!(m_prev * scale <= m_cur, "mass ratio at {j}");
        }
    }

    #[test]
    fn single_segment_schedule() {
        let params = ItineraryParams::default();
        let schedule = build_schedule(&params, 1, 5).unwrap();
        assert_eq!(schedule.j_max(), 1);
        for k in params.k0 + 1..=schedule.k_of(1) {
            assert_eq!(z_of_k(&params, &schedule, k).unwrap(), params.z0);
        }
    }

    #[test]
    fn explicit_doubling_schedule_satisfies_bounds() {
        // k(J') = k(J'-1) * 2^J'; check the correction terms directly
        let params = ItineraryParams::default();
        let mut points = Vec::new();
        let mut k = params.k0;
        for j in 1..=6usize {
            k *= 1 << j;
            points.push(k);
        }
        let schedule = Schedule { k0: params.k0, points };
        let n0 = params.n0 as u128;
        for j in 2..=6usize {
            let lo = schedule.k_of(j - 1) as u128;
            let hi = schedule.k_of(j) as u128;
            let cnt = hi - lo;
            let sum_k2 = s2(hi) - s2(lo);
            let scale = 1u128 << (j + 2);
            assert!((2 * n0 + 5) * cnt * scale <= sum_k2, "Z1 at {j}");
            let m_prev = m_hat(&params, &schedule, schedule.k_of(j - 1)).unwrap();
            let m_cur = m_hat(&params, &schedule, schedule.k_of(j)).unwrap();
            assert!(m_prev * scale <= m_cur, "ratio at {j}");
        }
    }

    #[test]
    fn trapped_counts_match_enumeration_small() {
        let (params, schedule) = setup();
        // enumerate the driver step by step through k = 45
        let horizon = m_hat(&params, &schedule, 45).unwrap();
        let driver = NewhouseDriver::new(params, schedule.clone()).unwrap();
        for nu in [0u32, 5] {
            let mut d = driver.clone();
            let mut hist_p: Vec<bool> = Vec::new();
            let mut hist_q: Vec<bool> = Vec::new();
            let mut count_p: u128 = 0;
            let mut count_q: u128 = 0;
            for j in 0..horizon {
                hist_p.push(d.in_neighborhood(Target::P, 0.1));
                hist_q.push(d.in_neighborhood(Target::PHat, 0.1));
                let ju = j as usize;
                if j >= nu as u128 {
                    if hist_p[ju - nu as usize..=ju].iter().all(|&m| m) {
                        count_p += 1;
                    }
                    if hist_q[ju - nu as usize..=ju].iter().all(|&m| m) {
                        count_q += 1;
                    }
                }
                d.step();
            }
            assert_eq!(
                trapped_count_at(&params, &schedule, Target::P, nu, horizon).unwrap(),
                count_p,
                "p count at nu {nu}"
            );
            assert_eq!(
                trapped_count_at(&params, &schedule, Target::PHat, nu, horizon).unwrap(),
                count_q,
                "phat count at nu {nu}"
            );
        }
        // also at a horizon that cuts a block mid-run
        let odd_horizon = m_hat(&params, &schedule, 30).unwrap() + 12_345;
        let c = trapped_count_at(&params, &schedule, Target::P, 0, odd_horizon).unwrap();
        let mut d = driver.clone();
        let mut cnt = 0u128;
        for _ in 0..odd_horizon {
            if d.in_neighborhood(Target::P, 0.1) {
                cnt += 1;
            }
            d.step();
        }
        assert_eq!(c, cnt);
    }

    #[test]
    fn membership_runs_agree_with_closed_form() {
        let (params, schedule) = setup();
        let horizon = m_hat(&params, &schedule, 60).unwrap() + 4321;
        let (p, phat) = membership_runs(&params, &schedule, horizon).unwrap();
        for nu in [0u32, 5] {
            for (runs, target) in [(&p, Target::P), (&phat, Target::PHat)] {
                assert_eq!(
                    crate::analytics::count_trapped(runs, nu, horizon),
                    trapped_count_at(&params, &schedule, target, nu, horizon).unwrap(),
                    "nu {nu}, {target:?}"
                );
            }
        }
    }

    #[test]
    fn trapped_fractions_respect_lower_bounds() {
        let (params, schedule) = setup();
        for nu in [0u32, 5] {
            for jp in 1..=schedule.j_max() {
                let f = trapped_fraction(&params, &schedule, nu, jp).unwrap();
                let z = params.z_star(jp) as u128;
                assert!(
                    TrappedFraction::at_least(f.numerator_p, f.denominator, z, z + 1, jp),
                    "p bound fails at J' = {jp}, nu = {nu}"
                );
                assert!(
                    TrappedFraction::at_least(f.numerator_phat, f.denominator, 1, z + 1, jp),
                    "phat bound fails at J' = {jp}, nu = {nu}"
                );
                assert!(f.numerator_p + f.numerator_phat <= f.denominator);
            }
        }
    }

    #[test]
    fn limiting_fractions_alternate() {
        let (params, schedule) = setup();
        let f9 = trapped_fraction(&params, &schedule, 5, 9).unwrap();
        let f10 = trapped_fraction(&params, &schedule, 5, 10).unwrap();
        assert!((f9.frac_p() - 5.0 / 6.0).abs() < 2f64.powi(-9) + 1e-3);
        assert!((f10.frac_p() - 6.0 / 7.0).abs() < 2f64.powi(-10) + 1e-3);
        assert!((f9.frac_phat() - 1.0 / 6.0).abs() < 2f64.powi(-9) + 1e-3);
        assert!((f10.frac_phat() - 1.0 / 7.0).abs() < 2f64.powi(-10) + 1e-3);
    }

    #[test]
    fn driver_steps_and_reverses() {
        let (params, schedule) = setup();
        let mut d = NewhouseDriver::new(params, schedule).unwrap();
        let kappas: Vec<f64> = (0..500)
            .map(|_| {
                let k = d.kappa();
                d.step();
                k
            })
            .collect();
        for _ in 0..500 {
            d.step_back().unwrap();
        }
        for (i, &k) in kappas.iter().enumerate() {
            assert_eq!(d.kappa(), k, "mismatch at replay step {i}");
            d.step();
        }
    }

    #[test]
    fn driver_walks_into_virtual_past() {
        let (params, schedule) = setup();
        let mut d = NewhouseDriver::new(params, schedule).unwrap();
        for _ in 0..5000 {
            d.step_back().unwrap();
        }
        assert!(d.kappa().abs() <= 1.0);
        assert!(d.position() < 0);
        for _ in 0..5000 {
            d.step();
        }
        assert_eq!(d.position(), 0);
    }

    #[test]
    fn blocks_match_driver_stepping() {
        let (params, schedule) = setup();
        let horizon: u128 = 60_000;
        let nu = 5u32;
        let blocks = blocks_upto(&params, &schedule, nu, horizon).unwrap();
        assert_eq!(blocks.iter().map(|b| b.len).sum::<u128>(), horizon);
        let mut d = NewhouseDriver::new(params, schedule).unwrap();
        let mut hist: Vec<bool> = Vec::new();
        let mut hist_q: Vec<bool> = Vec::new();
        let mut j: usize = 0;
        for b in &blocks {
            for _ in 0..b.len {
                assert!((d.kappa() - b.kappa).abs() < 1e-12, "kappa at {j}");
                hist.push(d.in_neighborhood(Target::P, 0.1));
                hist_q.push(d.in_neighborhood(Target::PHat, 0.1));
                let trapped_p = j >= nu as usize && hist[j - nu as usize..=j].iter().all(|&m| m);
                let trapped_q = j >= nu as usize && hist_q[j - nu as usize..=j].iter().all(|&m| m);
                let expect = if trapped_p {
                    BlockLabel::NearP
                } else if trapped_q {
                    BlockLabel::NearPHat
                } else {
                    BlockLabel::Transit
                };
                assert_eq!(b.label, expect, "label at {j}");
                d.step();
                j += 1;
            }
        }
    }

    #[test]
    fn birkhoff_bounds_consistent_with_counts() {
        let (params, schedule) = setup();
        for jp in [3usize, 6, 10] {
            let n = m_hat(&params, &schedule, schedule.k_of(jp)).unwrap();
            let acc = birkhoff_bounds_at(&params, &schedule, n).unwrap();
            assert_eq!(acc.steps, n);
            let f = trapped_fraction(&params, &schedule, 0, jp).unwrap();
            // ones undercount the visit count by at most the prefixes
            assert!(acc.ones <= f.numerator_p);
            assert!(acc.average_lo() <= f.frac_p());
            assert!(acc.average_hi() >= f.frac_p());
            // interval tightens with depth
            if jp == 10 {
                assert!(acc.average_hi() - acc.average_lo() < 1e-4);
            }
        }
        // partial horizon
        let n = m_hat(&params, &schedule, 40).unwrap() + 777;
        let acc = birkhoff_bounds_at(&params, &schedule, n).unwrap();
        assert_eq!(acc.steps, n);
    }

    #[test]
    fn schedule_budget_is_enforced() {
        let params = ItineraryParams::default();
        let err = build_schedule(&params, 40, 5);
        assert!(err.is_err(), "depth 40 must blow the 128-bit budget");
    }
}
