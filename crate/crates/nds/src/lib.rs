//! Nonautonomous circle dynamics under structured noise.
//!
//! A contracting circle map is driven by a base system that selects an
//! additive noise value at every step. When the base system spends
//! alternating, ever-longer stretches near two distinguished states, the
//! orbit's Birkhoff averages oscillate between two limits forever instead
//! of converging; under i.i.d. or uniquely ergodic driving they converge.
//! This crate provides:
//!
//! - the circle map, fiber maps, their fixed points and the test
//!   observable ([`circle`]);
//! - four drivers: a hybrid heteroclinic flow with closed-form passage
//!   times ([`bowen`]), a symbolic block itinerary with switching run
//!   lengths ([`newhouse`]), an i.i.d. SplitMix64 stream and an irrational
//!   rotation ([`driver`]);
//! - exact run-length acceleration of orbits and their Birkhoff sums over
//!   horizons far beyond naive stepping ([`cocycle`], [`blocks`]);
//! - trapped-time counting, subsequence schedules, averaged-gap reports
//!   and empirical two-scale certificates ([`analytics`]);
//! - pullback approximation of the invariant section, the graph-transform
//!   contraction probe and the exact decay identity ([`section`]);
//! - an experiment runner with CSV/JSON reports behind the `nds` binary
//!   ([`config`], [`scenario`], [`report`]), plus a fast invariant suite
//!   ([`verify`]).
//!
//! Start with the `examples/` directory; each example exercises one
//! capability end to end.

// Negated float comparisons like `!(x > 0.0)` are deliberate throughout:
// they reject NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod blocks;
pub mod bowen;
pub mod circle;
pub mod cocycle;
pub mod config;
pub mod dd;
pub mod driver;
pub mod error;
pub mod newhouse;
pub mod report;
pub mod scenario;
pub mod section;
pub mod verify;

pub use blocks::{BlockLabel, ItineraryBlock, MembershipRun};
pub use circle::{circle_dist, CirclePoint, FiberMap, ObservableSpec, UnperturbedMap};
pub use cocycle::{BirkhoffAccumulator, NdsInstance, OrbitRecord};
pub use driver::{Driver, IidDriver, RotationDriver, Target};
pub use error::Error;
