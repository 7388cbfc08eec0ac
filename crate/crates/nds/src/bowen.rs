//! Hybrid piecewise-linear model of a planar heteroclinic cycle.
//!
//! Two linear saddle boxes are joined by two affine transit tubes. Inside
//! a box the flow is `du/dt = e_u u`, `ds/dt = -e_s s`; a tube carries the
//! exit offset to the next box in constant time `tau`, scaled by `c`. All
//! passage times are closed-form logarithms, so the orbit can be advanced
//! exactly over any horizon with no integration error, and successive
//! passage durations obey the classical timing asymptotics
//! `T_p / T_phat -> sigma1 = beta_minus / alpha_plus` and
//! `T_phat' / T_p -> sigma2 = alpha_minus / beta_plus` by construction.
//!
//! Box-local coordinates are tracked as logarithms: a passage lasting 1e15
//! time units drives the stable offset to `exp(-2e15)`, far below any
//! floating-point range, while its log stays a perfectly ordinary number.
//! Cumulative crossing times are accumulated in double-double precision so
//! that integer step indices derived from them stay consistent out to
//! J = 40 cycles.

use crate::blocks::{merge_runs, BlockLabel, ItineraryBlock, MembershipRun};
use crate::dd::Dd;
use crate::driver::{Driver, Target};
use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Largest cycle count the double-double time accumulation supports.
pub const MAX_CYCLES: usize = 40;

/// Rates and geometry of the hybrid cycle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BowenParams {
    /// Expanding rate at `p`.
    pub alpha_plus: f64,
    /// Contracting rate at `p`.
    pub alpha_minus: f64,
    /// Expanding rate at `p_hat`.
    pub beta_plus: f64,
    /// Contracting rate at `p_hat`.
    pub beta_minus: f64,
    /// Box half-width `Delta`; local coordinates live in `(0, Delta]`.
    pub box_half_width: f64,
    /// Tube transit time `tau`.
    pub tube_transit: f64,
    /// Tube offset contraction `c` in `(0, 1]`.
    pub tube_contraction: f64,
    /// Entry offset of the first passage near `p`.
    pub initial_offset: f64,
}

impl Default for BowenParams {
    fn default() -> Self {
        BowenParams {
            alpha_plus: 1.0,
            alpha_minus: 2.0,
            beta_plus: 1.0,
            beta_minus: 2.0,
            box_half_width: 0.5,
            tube_transit: 1.0,
            tube_contraction: 1.0,
            initial_offset: 0.1,
        }
    }
}

impl BowenParams {
    /// Geometry checks only; the timing recursion is well-defined even at
    /// neutral rates (constant passages). The attracting condition is
    /// enforced where limit constants are consumed.
    pub fn validate_geometry(&self) -> Result<(), Error> {
        for (name, v) in [
            ("alpha_plus", self.alpha_plus),
            ("alpha_minus", self.alpha_minus),
            ("beta_plus", self.beta_plus),
            ("beta_minus", self.beta_minus),
            ("box_half_width", self.box_half_width),
            ("tube_transit", self.tube_transit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tube_contraction > 0.0 && self.tube_contraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "tube_contraction must lie in (0, 1], got {}",
                self.tube_contraction
            )));
        }
        if !(self.initial_offset > 0.0 && self.initial_offset < self.box_half_width) {
            return Err(Error::InvalidParam(format!(
                "initial_offset must lie in (0, box_half_width), got {}",
                self.initial_offset
            )));
        }
        Ok(())
    }

    /// Geometry plus the attracting condition.
    pub fn validate(&self) -> Result<(), Error> {
        self.validate_geometry()?;
        if self.alpha_minus * self.beta_minus <= self.alpha_plus * self.beta_plus {
            return Err(Error::InvalidParam(
                "cycle is not attracting: need alpha_minus * beta_minus > alpha_plus * beta_plus"
                    .into(),
            ));
        }
        Ok(())
    }

    fn rates(&self, region: Region) -> (f64, f64) {
        match region {
            Region::BoxP => (self.alpha_plus, self.alpha_minus),
            Region::BoxPhat => (self.beta_plus, self.beta_minus),
            _ => unreachable!("tubes have no saddle rates"),
        }
    }
}

/// Predicted limit ratios and average splittings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PredictedConstants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// `sigma1 = beta_minus/alpha_plus`, `sigma2 = alpha_minus/beta_plus`,
/// `lambda1 = 1/(1+sigma1)`, `lambda2 = sigma2/(1+sigma2)`; requires the
/// attracting condition, which is exactly `lambda1 < lambda2`.
pub fn predicted_constants(params: &BowenParams) -> Result<PredictedConstants, Error> {
    params.validate()?;
    let sigma1 = params.beta_minus / params.alpha_plus;
    let sigma2 = params.alpha_minus / params.beta_plus;
    Ok(PredictedConstants {
        sigma1,
        sigma2,
        lambda1: 1.0 / (1.0 + sigma1),
        lambda2: sigma2 / (1.0 + sigma2),
    })
}

/// Closed-form linear saddle crossing: enter at `(u, s) = (h, box)`,
/// leave through `u = box`.
///
/// Returns `(duration, exit_offset)` with `duration = ln(box/h) / e_u` and
/// `exit_offset = box * (h/box)^(e_s/e_u)`.
pub fn saddle_passage(h: f64, e_u: f64, e_s: f64, box_half_width: f64) -> Result<(f64, f64), Error> {
    if !(h > 0.0 && h < box_half_width) {
        return Err(Error::OutOfDomain(format!(
            "entry offset must lie in (0, {box_half_width}), got {h}"
        )));
    }
    if !(e_u > 0.0 && e_s > 0.0) {
        return Err(Error::InvalidParam("saddle rates must be positive".into()));
    }
    let duration = (box_half_width / h).ln() / e_u;
    let exit = box_half_width * (h / box_half_width).powf(e_s / e_u);
    Ok((duration, exit))
}

/// Region tags of the hybrid flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    BoxP,
    BoxPhat,
    /// Tube carrying orbits from the box at `p` to the box at `p_hat`.
    TubeToPhat,
    /// Tube carrying orbits from the box at `p_hat` back to the box at `p`.
    TubeToP,
}

impl Region {
    fn next(self) -> Region {
        match self {
            Region::BoxP => Region::TubeToPhat,
            Region::TubeToPhat => Region::BoxPhat,
            Region::BoxPhat => Region::TubeToP,
            Region::TubeToP => Region::BoxP,
        }
    }

    fn prev(self) -> Region {
        match self {
            Region::TubeToPhat => Region::BoxP,
            Region::BoxPhat => Region::TubeToPhat,
            Region::TubeToP => Region::BoxPhat,
            Region::BoxP => Region::TubeToP,
        }
    }

    pub fn is_box(self) -> bool {
        matches!(self, Region::BoxP | Region::BoxPhat)
    }
}

/// Flow state: region, when it was entered, and the entry offset in log
/// form. Local coordinates are derived, never stored, so advancing by
/// 1.0 twice equals advancing by 2.0 with no drift.
#[derive(Debug, Clone, Copy)]
pub struct FlowState {
    pub region: Region,
    /// Absolute time at which the current region was entered.
    pub entered_at: f64,
    /// Box: `ln(h/Delta)` of the unstable entry offset (stable entry
    /// coordinate is the full box). Tube: `ln(offset/Delta)` of the
    /// carried transverse offset.
    pub entry_log: f64,
    /// Current absolute time.
    pub abs_time: f64,
}

impl FlowState {
    /// Orbit entering the box at `p` with the configured initial offset,
    /// at time zero.
    pub fn initial(params: &BowenParams) -> Result<FlowState, Error> {
        params.validate_geometry()?;
        Ok(FlowState {
            region: Region::BoxP,
            entered_at: 0.0,
            entry_log: (params.initial_offset / params.box_half_width).ln(),
            abs_time: 0.0,
        })
    }

    /// Log of the unstable coordinate over the box half-width.
    pub fn log_u(&self, params: &BowenParams) -> f64 {
        debug_assert!(self.region.is_box());
        let (e_u, _) = params.rates(self.region);
        self.entry_log + e_u * (self.abs_time - self.entered_at)
    }

    /// Log of the stable coordinate over the box half-width.
    pub fn log_s(&self, params: &BowenParams) -> f64 {
        debug_assert!(self.region.is_box());
        let (_, e_s) = params.rates(self.region);
        -e_s * (self.abs_time - self.entered_at)
    }

    /// Unstable box coordinate; underflows to zero are impossible here
    /// (it grows), but the stable one may underflow, see `local_s`.
    pub fn local_u(&self, params: &BowenParams) -> f64 {
        params.box_half_width * self.log_u(params).exp()
    }

    /// Stable box coordinate; may underflow to 0.0 deep into a long
    /// passage, which is why membership tests use the log form.
    pub fn local_s(&self, params: &BowenParams) -> f64 {
        params.box_half_width * self.log_s(params).exp()
    }

    /// Progress through the current tube, in `[0, tau]`.
    pub fn tube_progress(&self) -> f64 {
        debug_assert!(!self.region.is_box());
        self.abs_time - self.entered_at
    }

    /// Noise readout: +1 throughout the box at `p`, -1 throughout the box
    /// at `p_hat`, linear ramp along each tube.
    pub fn kappa(&self, params: &BowenParams) -> f64 {
        match self.region {
            Region::BoxP => 1.0,
            Region::BoxPhat => -1.0,
            Region::TubeToPhat => 1.0 - 2.0 * self.tube_progress() / params.tube_transit,
            Region::TubeToP => -1.0 + 2.0 * self.tube_progress() / params.tube_transit,
        }
    }

    /// Sup-norm ball membership in box-local coordinates.
    pub fn in_neighborhood(&self, params: &BowenParams, target: Target, delta: f64) -> bool {
        let want = match target {
            Target::P => Region::BoxP,
            Target::PHat => Region::BoxPhat,
        };
        if self.region != want {
            return false;
        }
        let bound = (delta / params.box_half_width).ln();
        self.log_u(params) <= bound && self.log_s(params) <= bound
    }

    fn exit_time(&self, params: &BowenParams) -> f64 {
        if self.region.is_box() {
            let (e_u, _) = params.rates(self.region);
            self.entered_at - self.entry_log / e_u
        } else {
            self.entered_at + params.tube_transit
        }
    }

    fn transition(self, params: &BowenParams, at: f64) -> Result<FlowState, Error> {
        let next = self.region.next();
        let entry_log = match self.region {
            Region::BoxP => {
                let (e_u, e_s) = params.rates(Region::BoxP);
                self.entry_log * (e_s / e_u)
            }
            Region::BoxPhat => {
                let (e_u, e_s) = params.rates(Region::BoxPhat);
                self.entry_log * (e_s / e_u)
            }
            Region::TubeToPhat | Region::TubeToP => {
                self.entry_log + params.tube_contraction.ln()
            }
        };
        if entry_log >= 0.0 {
            return Err(Error::OutOfDomain(format!(
                "offset left the box on transition into {next:?}"
            )));
        }
        Ok(FlowState { region: next, entered_at: at, entry_log, abs_time: at })
    }

    /// Advance the semiflow by exactly `dt`, crossing region boundaries at
    /// their closed-form event times.
    pub fn advance(mut self, params: &BowenParams, dt: f64) -> Result<FlowState, Error> {
        if !(dt >= 0.0) {
            return Err(Error::InvalidParam(format!("advance needs dt >= 0, got {dt}")));
        }
        let target = self.abs_time + dt;
        loop {
            let exit = self.exit_time(params);
            if exit <= target {
                self = self.transition(params, exit)?;
            } else {
                self.abs_time = target;
                return Ok(self);
            }
        }
    }

    /// The time-one map of the flow.
    pub fn time_one(self, params: &BowenParams) -> Result<FlowState, Error> {
        self.advance(params, 1.0)
    }

    fn transition_back(self, params: &BowenParams) -> Result<FlowState, Error> {
        let prev = self.region.prev();
        let at = self.entered_at;
        match prev {
            Region::TubeToPhat | Region::TubeToP => {
                // current region is a box entered through a tube exit
                let entry_log = self.entry_log - params.tube_contraction.ln();
                if entry_log >= -1e-12 {
                    return Err(Error::OutOfDomain(
                        "backward orbit reaches the heteroclinic cycle".into(),
                    ));
                }
                Ok(FlowState {
                    region: prev,
                    entered_at: at - params.tube_transit,
                    entry_log,
                    abs_time: at,
                })
            }
            Region::BoxP | Region::BoxPhat => {
                // current region is a tube fed by a box exit; the tube's
                // carried offset is the box's stable exit coordinate
                let (e_u, e_s) = params.rates(prev);
                let entry_log = self.entry_log * (e_u / e_s);
                if entry_log >= -1e-12 {
                    return Err(Error::OutOfDomain(
                        "backward orbit reaches the heteroclinic cycle".into(),
                    ));
                }
                let duration = -entry_log / e_u;
                Ok(FlowState {
                    region: prev,
                    entered_at: at - duration,
                    entry_log,
                    abs_time: at,
                })
            }
        }
    }

    /// Run the flow backwards by `dt`. Fails when the reconstruction
    /// leaves the model domain or would cross time zero.
    pub fn rewind(mut self, params: &BowenParams, dt: f64) -> Result<FlowState, Error> {
        if !(dt >= 0.0) {
            return Err(Error::InvalidParam(format!("rewind needs dt >= 0, got {dt}")));
        }
        let target = self.abs_time - dt;
        if target < 0.0 {
            return Err(Error::OutOfDomain(
                "rewind would cross the initial time; advance the driver first".into(),
            ));
        }
        loop {
            if self.entered_at <= target {
                self.abs_time = target;
                return Ok(self);
            }
            self = self.transition_back(params)?;
        }
    }
}

// ---------------------------------------------------------------------------
// Crossing times and delta-windows
// ---------------------------------------------------------------------------

/// One full cycle of section crossings. Sections sit on the box exit
/// faces: odd crossings leave the box at `p`, even crossings leave the box
/// at `p_hat`, so `passage_phat = t_even - t_odd` spans the tube into the
/// `p_hat` box plus that passage, and `passage_p` spans the way back.
#[derive(Debug, Clone, Copy)]
pub struct CrossingRecord {
    /// Cycle index, 1-based.
    pub j: usize,
    /// `t_{2j-1}`: exit time of the j-th passage near `p`.
    pub t_odd: Dd,
    /// `t_{2j}`: exit time of the j-th passage near `p_hat`.
    pub t_even: Dd,
    /// `T^(p)_j = t_{2j+1} - t_{2j}`.
    pub passage_p: Dd,
    /// `T^(phat)_j = t_{2j} - t_{2j-1}`.
    pub passage_phat: Dd,
    /// Absolute entry time and duration of the box passage inside
    /// `passage_p` (the `j+1`-st visit to the box at `p`).
    pub box_p_enter: Dd,
    pub box_p_dur: Dd,
    /// Absolute entry time and duration of the box passage inside
    /// `passage_phat` (the `j`-th visit to the box at `p_hat`).
    pub box_phat_enter: Dd,
    pub box_phat_dur: Dd,
}

/// One region interval of the exact timeline.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub region: Region,
    pub start: Dd,
    pub end: Dd,
}

/// Exact event timeline over `cycles` full cycles (plus the leading
/// passage), in double-double time.
pub fn timeline(params: &BowenParams, cycles: usize) -> Result<Vec<Segment>, Error> {
    params.validate_geometry()?;
    if cycles > MAX_CYCLES {
        return Err(Error::PrecisionBudget(format!(
            "timeline supports at most {MAX_CYCLES} cycles, requested {cycles}"
        )));
    }
    let delta = params.box_half_width;
    let ln_c = params.tube_contraction.ln();
    let mut segments = Vec::with_capacity(4 * cycles + 4);
    let mut t = Dd::ZERO;
    // L = ln(Delta / h) at the upcoming box entry, kept in double-double;
    // it doubles (roughly) every passage and reaches ~1e15 by J = 25.
    let mut l = Dd::from_f64((delta / params.initial_offset).ln());
    let mut region = Region::BoxP;
    // one leading p-passage plus `cycles` full (phat, p) pairs
    let total_boxes = 2 * cycles + 2;
    for _ in 0..total_boxes {
        let (e_u, e_s) = params.rates(region);
        let dur = l.div_f64(e_u);
        let end = t.add(dur);
        if end.hi > 1e30 {
            return Err(Error::PrecisionBudget(format!(
                "cumulative time overflow at {:.3e}",
                end.hi
            )));
        }
        segments.push(Segment { region, start: t, end });
        t = end;
        // exit through u = Delta with stable offset log = -L * e_s / e_u
        let l_exit = l.mul_f64(e_s / e_u);
        let tube = region.next();
        let tube_end = t.add_f64(params.tube_transit);
        segments.push(Segment { region: tube, start: t, end: tube_end });
        t = tube_end;
        l = l_exit.sub_f64(ln_c);
        region = tube.next();
    }
    Ok(segments)
}

/// Crossing records for cycles `1..=j_max`, from the exact timeline.
pub fn crossing_times(params: &BowenParams, j_max: usize) -> Result<Vec<CrossingRecord>, Error> {
    if j_max < 1 {
        return Err(Error::InvalidParam("need at least one cycle".into()));
    }
    let segs = timeline(params, j_max)?;
    // box segments in order: p, phat, p, phat, ...
    let boxes: Vec<&Segment> = segs.iter().filter(|s| s.region.is_box()).collect();
    let mut records = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        // boxes[2j-1] is the j-th phat passage, boxes[2j] the (j+1)-st p
        let phat = boxes[2 * j - 1];
        let p_next = boxes[2 * j];
        let t_odd = boxes[2 * j - 2].end; // exit of j-th p passage
        let t_even = phat.end;
        records.push(CrossingRecord {
            j,
            t_odd,
            t_even,
            passage_p: p_next.end.sub(t_even),
            passage_phat: t_even.sub(t_odd),
            box_p_enter: p_next.start,
            box_p_dur: p_next.end.sub(p_next.start),
            box_phat_enter: phat.start,
            box_phat_dur: phat.end.sub(phat.start),
        });
    }
    Ok(records)
}

/// Exact time interval within one recorded passage during which both
/// box-local coordinates are at most `delta`. The stable coordinate drops
/// below `delta` a fixed `ln(Delta/delta) / e_s` after entry and the
/// unstable one exceeds it `ln(Delta/delta) / e_u` before exit; early
/// short passages yield `None`.
pub fn delta_window(
    record: &CrossingRecord,
    params: &BowenParams,
    delta: f64,
    target: Target,
) -> Option<(Dd, Dd)> {
    assert!(
        delta > 0.0 && delta <= params.box_half_width,
        "delta must lie in (0, box_half_width]"
    );
    let (e_u, e_s, enter, dur) = match target {
        Target::P => (params.alpha_plus, params.alpha_minus, record.box_p_enter, record.box_p_dur),
        Target::PHat => {
            (params.beta_plus, params.beta_minus, record.box_phat_enter, record.box_phat_dur)
        }
    };
    window_of(enter, dur, e_u, e_s, params.box_half_width, delta)
}

fn window_of(enter: Dd, dur: Dd, e_u: f64, e_s: f64, half_width: f64, delta: f64) -> Option<(Dd, Dd)> {
    let lead = (half_width / delta).ln();
    let start = enter.add_f64(lead / e_s);
    let end = enter.add(dur).sub_f64(lead / e_u);
    if end.lt(start) {
        None
    } else {
        Some((start, end))
    }
}

// ---------------------------------------------------------------------------
// Integer-time itinerary
// ---------------------------------------------------------------------------

/// Integer membership runs for both targets up to `horizon` steps, from
/// the exact delta-windows (runs separated by less than one step are
/// merged before any trapping arithmetic).
pub fn membership_runs(
    params: &BowenParams,
    delta: f64,
    cycles: usize,
    horizon: u128,
) -> Result<(Vec<MembershipRun>, Vec<MembershipRun>), Error> {
    let segs = timeline(params, cycles)?;
    let mut p_runs = Vec::new();
    let mut phat_runs = Vec::new();
    for seg in segs.iter().filter(|s| s.region.is_box()) {
        let (e_u, e_s) = params.rates(seg.region);
        let Some((w0, w1)) = window_of(
            seg.start,
            seg.end.sub(seg.start),
            e_u,
            e_s,
            params.box_half_width,
            delta,
        ) else {
            continue;
        };
        let a = w0.ceil_u128();
        if w1.lt(Dd::from_f64(0.0)) {
            continue;
        }
        let b = w1.floor_u128();
        if a > b || a >= horizon {
            continue;
        }
        let b = b.min(horizon - 1);
        let run = MembershipRun::new(a, b);
        match seg.region {
            Region::BoxP => p_runs.push(run),
            Region::BoxPhat => phat_runs.push(run),
            _ => unreachable!(),
        }
    }
    Ok((merge_runs(p_runs), merge_runs(phat_runs)))
}

/// Subsequence schedules: `n1[J-1] = floor(t_{2J-1})` (just after a
/// passage near `p` ends) and `n2[J-1] = floor(t_{2J})` (after a passage
/// near `p_hat`).
pub fn schedules(params: &BowenParams, j_max: usize) -> Result<(Vec<u128>, Vec<u128>), Error> {
    let records = crossing_times(params, j_max)?;
    let n1 = records.iter().map(|r| r.t_odd.floor_u128()).collect();
    let n2 = records.iter().map(|r| r.t_even.floor_u128()).collect();
    Ok((n1, n2))
}

/// Run-length blocks over integer time `[0, floor(t_{2 j_max}))`.
///
/// Box passages yield constant-noise blocks split at the nu-trapped
/// portion of their delta-window; tube steps carry ramped noise and come
/// out as unit blocks. Lengths sum exactly to the horizon.
pub fn block_stream(
    params: &BowenParams,
    nu: u32,
    delta: f64,
    j_max: usize,
) -> Result<Vec<ItineraryBlock>, Error> {
    let records = crossing_times(params, j_max)?;
    let horizon = records[j_max - 1].t_even.floor_u128();
    let segs = timeline(params, j_max)?;
    let (p_runs, phat_runs) = membership_runs(params, delta, j_max, horizon)?;
    let trapped_p = trapped_intervals(&p_runs, nu);
    let trapped_phat = trapped_intervals(&phat_runs, nu);

    let mut blocks = Vec::new();
    for seg in &segs {
        // integer steps j with seg.start <= j < seg.end, clipped
        let lo = seg.start.ceil_u128();
        if lo >= horizon {
            break;
        }
        let hi_excl = seg.end.ceil_u128().min(horizon);
        if hi_excl <= lo {
            continue;
        }
        let hi = hi_excl - 1; // inclusive
        match seg.region {
            Region::BoxP => emit_box_blocks(&mut blocks, lo, hi, 1.0, &trapped_p, BlockLabel::NearP),
            Region::BoxPhat => {
                emit_box_blocks(&mut blocks, lo, hi, -1.0, &trapped_phat, BlockLabel::NearPHat)
            }
            Region::TubeToPhat | Region::TubeToP => {
                let start = seg.start;
                for j in lo..=hi {
                    let progress = Dd::from_f64(j as f64).sub(start).to_f64();
                    let kappa = match seg.region {
                        Region::TubeToPhat => 1.0 - 2.0 * progress / params.tube_transit,
                        _ => -1.0 + 2.0 * progress / params.tube_transit,
                    };
                    blocks.push(ItineraryBlock::new(BlockLabel::Transit, kappa.clamp(-1.0, 1.0), 1));
                }
            }
        }
    }
    debug_assert_eq!(blocks.iter().map(|b| b.len).sum::<u128>(), horizon);
    Ok(blocks)
}

/// Nu-trapped sub-intervals of merged membership runs: the first `nu`
/// steps of each run only build up history.
fn trapped_intervals(runs: &[MembershipRun], nu: u32) -> Vec<MembershipRun> {
    runs.iter()
        .filter_map(|r| {
            let lo = r.start.saturating_add(nu as u128).max(nu as u128);
            if lo <= r.end {
                Some(MembershipRun::new(lo, r.end))
            } else {
                None
            }
        })
        .collect()
}

fn emit_box_blocks(
    blocks: &mut Vec<ItineraryBlock>,
    lo: u128,
    hi: u128,
    kappa: f64,
    trapped: &[MembershipRun],
    label: BlockLabel,
) {
    let mut cur = lo;
    for itv in trapped {
        if itv.end < cur || itv.start > hi {
            continue;
        }
        let s = itv.start.max(cur);
        let e = itv.end.min(hi);
        if s > cur {
            blocks.push(ItineraryBlock::new(BlockLabel::Transit, kappa, s - cur));
        }
        blocks.push(ItineraryBlock::new(label, kappa, e - s + 1));
        cur = e + 1;
        if cur > hi {
            break;
        }
    }
    if cur <= hi {
        blocks.push(ItineraryBlock::new(BlockLabel::Transit, kappa, hi - cur + 1));
    }
}

// ---------------------------------------------------------------------------
// Driver wrapper
// ---------------------------------------------------------------------------

/// The time-one map of the hybrid flow as a driving system.
#[derive(Debug, Clone)]
pub struct BowenDriver {
    params: BowenParams,
    state: FlowState,
}

impl BowenDriver {
    pub fn new(params: BowenParams) -> Result<Self, Error> {
        let state = FlowState::initial(&params)?;
        Ok(BowenDriver { params, state })
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn params(&self) -> &BowenParams {
        &self.params
    }
}

impl Driver for BowenDriver {
    fn kappa(&self) -> f64 {
        self.state.kappa(&self.params)
    }

    fn step(&mut self) {
        self.state = self
            .state
            .advance(&self.params, 1.0)
            .expect("forward time-one step cannot leave the domain");
    }

    fn in_neighborhood(&self, target: Target, delta: f64) -> bool {
        self.state.in_neighborhood(&self.params, target, delta)
    }

    fn step_back(&mut self) -> Result<(), Error> {
        self.state = self.state.rewind(&self.params, 1.0)?;
        Ok(())
    }

    fn invertible(&self) -> bool {
        true
    }
}
