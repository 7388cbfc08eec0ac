//! Run-length-encoded orbit itineraries.
//!
//! A block is a maximal run of integer driver times sharing one noise value
//! and one trapping label. Box passages of the hybrid flow and the long
//! near-saddle runs of the symbolic itinerary compress to single blocks
//! with lengths held in 128-bit integers, which is what makes orbit
//! horizons around 1e15 steps tractable; ramp segments arrive as
//! unit-length blocks.

use serde::{Deserialize, Serialize};

/// Trapping label of a block, relative to the `(nu, delta)` the stream was
/// built with: every step of a `NearP` block is a nu-trapped time for the
/// delta-neighborhood of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockLabel {
    NearP,
    NearPHat,
    Transit,
}

/// One run-length block of an integer-time itinerary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItineraryBlock {
    pub label: BlockLabel,
    /// Noise value, constant across the block.
    pub kappa: f64,
    /// Number of integer steps covered.
    pub len: u128,
}

impl ItineraryBlock {
    pub fn new(label: BlockLabel, kappa: f64, len: u128) -> Self {
        ItineraryBlock { label, kappa, len }
    }
}

/// Inclusive integer interval `[start, end]` of consecutive driver times
/// inside one target neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipRun {
    pub start: u128,
    pub end: u128,
}

impl MembershipRun {
    pub fn new(start: u128, end: u128) -> Self {
        debug_assert!(start <= end);
        MembershipRun { start, end }
    }

    pub fn len(&self) -> u128 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Merge runs whose integer ranges touch or overlap. Input need not be
/// disjoint but must be sorted by `start`.
pub fn merge_runs(mut runs: Vec<MembershipRun>) -> Vec<MembershipRun> {
    runs.sort_by_key(|r| r.start);
    let mut out: Vec<MembershipRun> = Vec::with_capacity(runs.len());
    for r in runs {
        match out.last_mut() {
            Some(last) if r.start <= last.end.saturating_add(1) => {
                last.end = last.end.max(r.end);
            }
            _ => out.push(r),
        }
    }
    out
}
