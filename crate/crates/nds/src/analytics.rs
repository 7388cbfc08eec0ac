//! Trapped-time counting, Birkhoff running averages, subsequence
//! schedules, the averaged-gap report and the empirical two-scale
//! certificate.
//!
//! A step `j` is nu-trapped for a neighborhood when the last `nu + 1`
//! driver states all sit inside it. Over run-length membership input a
//! run `[a, b]` contributes `max(0, b - max(a + nu, nu) + 1)` trapped
//! steps, so counts over horizons of 1e15 steps and more cost nothing;
//! the brute-force enumeration of the same definition lives in the tests
//! as the oracle.

use crate::blocks::{ItineraryBlock, MembershipRun};
use crate::circle::{CirclePoint, ObservableSpec};
use crate::cocycle::{BirkhoffAccumulator, BlockEvalOptions, NdsInstance};
use crate::driver::Driver;
use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Number of nu-trapped steps `j < n` given merged membership runs.
pub fn count_trapped(runs: &[MembershipRun], nu: u32, n: u128) -> u128 {
    let nu = nu as u128;
    let mut total = 0u128;
    for r in runs {
        if r.start >= n {
            break;
        }
        let end = r.end.min(n - 1);
        let start = (r.start + nu).max(nu);
        if start <= end {
            total += end - start + 1;
        }
    }
    total
}

/// Trapped counts of one target at several horizons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrappedCount {
    pub nu: u32,
    pub delta: f64,
    pub checkpoints: Vec<u128>,
    pub counts: Vec<u128>,
}

pub fn count_trapped_at(
    runs: &[MembershipRun],
    nu: u32,
    delta: f64,
    checkpoints: &[u128],
) -> TrappedCount {
    let counts = checkpoints.iter().map(|&n| count_trapped(runs, nu, n)).collect();
    TrappedCount { nu, delta, checkpoints: checkpoints.to_vec(), counts }
}

/// Birkhoff running accumulators at sorted checkpoints, evaluated over a
/// run-length block stream (blocks are split at checkpoint boundaries).
pub fn birkhoff_at_blocks<I>(
    nds: &NdsInstance,
    obs: &ObservableSpec,
    blocks: I,
    x0: CirclePoint,
    checkpoints: &[u128],
) -> Result<Vec<BirkhoffAccumulator>, Error>
where
    I: IntoIterator<Item = ItineraryBlock>,
{
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("checkpoints must be strictly increasing".into()));
    }
    let opts = BlockEvalOptions::default();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut x = x0;
    let mut acc = BirkhoffAccumulator::default();
    let mut next = 0usize;
    let mut blocks = blocks.into_iter();
    let mut pending: Option<ItineraryBlock> = None;
    while next < checkpoints.len() {
        if acc.steps == checkpoints[next] {
            out.push(acc);
            next += 1;
            continue;
        }
        let b = match pending.take().or_else(|| blocks.next()) {
            Some(b) => b,
            None => {
                return Err(Error::InvalidParam(format!(
                    "block stream ended at step {} before checkpoint {}",
                    acc.steps, checkpoints[next]
                )))
            }
        };
        let remaining = checkpoints[next] - acc.steps;
        let (take, rest) = if b.len > remaining {
            (
                ItineraryBlock::new(b.label, b.kappa, remaining),
                Some(ItineraryBlock::new(b.label, b.kappa, b.len - remaining)),
            )
        } else {
            (b, None)
        };
        let (nx, part) = crate::cocycle::iterate_blocks(nds, obs, [take], x, opts)?;
        x = nx;
        acc.merge(part);
        pending = rest;
    }
    Ok(out)
}

/// Birkhoff running averages at sorted checkpoints by naive stepping of a
/// driver. Returns the accumulators; averages are exact (nothing skipped).
pub fn birkhoff_at_naive<D: Driver + ?Sized>(
    nds: &NdsInstance,
    obs: &ObservableSpec,
    driver: &mut D,
    x0: CirclePoint,
    checkpoints: &[u128],
) -> Result<Vec<BirkhoffAccumulator>, Error> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("checkpoints must be strictly increasing".into()));
    }
    let n = checkpoints.last().copied().unwrap_or(0);
    if n > crate::cocycle::NAIVE_BUDGET {
        return Err(Error::StepBudget { requested: n, limit: crate::cocycle::NAIVE_BUDGET });
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = BirkhoffAccumulator::default();
    let mut x = x0;
    let mut next = 0usize;
    for j in 0..n {
        while next < checkpoints.len() && checkpoints[next] == j {
            out.push(acc);
            next += 1;
        }
        acc.add_eval(obs.phi0(x));
        x = nds.step(driver, x);
    }
    while next < checkpoints.len() {
        out.push(acc);
        next += 1;
    }
    Ok(out)
}

/// The two schedule families of a two-scale driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    N1,
    N2,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::N1 => "n1",
            Family::N2 => "n2",
        }
    }
}

/// Everything a driver must supply for the two-scale certificate:
/// predicted splittings, both subsequence schedules, and membership runs
/// covering the largest horizon.
#[derive(Debug, Clone)]
pub struct HEvidence {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n1: Vec<u128>,
    pub n2: Vec<u128>,
    pub runs_p: Vec<MembershipRun>,
    pub runs_phat: Vec<MembershipRun>,
}

/// Empirical trapped ratios at one schedule point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatioPoint {
    pub family: Family,
    pub j: usize,
    /// Step horizon; serialized as a decimal string, it can exceed what
    /// JSON consumers handle as a number.
    #[serde(serialize_with = "u128_as_string", deserialize_with = "u128_from_string")]
    pub n: u128,
    pub ratio_p: f64,
    pub ratio_phat: f64,
}

fn u128_as_string<S: serde::Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn u128_from_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
    use serde::Deserialize;
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// Outcome of the empirical two-scale estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionHCertificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: u32,
    pub delta: f64,
    pub points: Vec<RatioPoint>,
    /// Largest deviation of the final ratios from their predicted limits.
    pub final_deviation: f64,
    pub tolerance: f64,
    pub certified: bool,
}

/// Estimate the two-scale condition: along `n1` the trapped fraction near
/// `p` should approach `1 - lambda1` (and `lambda1` near `p_hat`), along
/// `n2` it should approach `1 - lambda2` (and `lambda2`). Certification
/// requires both final points within `tolerance` and distinct limits.
pub fn condition_h_estimate(
    evidence: &HEvidence,
    nu: u32,
    delta: f64,
    tolerance: f64,
) -> Result<ConditionHCertificate, Error> {
    if evidence.n1.is_empty() || evidence.n2.is_empty() {
        return Err(Error::InvalidParam("schedules must be non-empty".into()));
    }
    let mut points = Vec::with_capacity(evidence.n1.len() + evidence.n2.len());
    for (family, schedule) in [(Family::N1, &evidence.n1), (Family::N2, &evidence.n2)] {
        for (i, &n) in schedule.iter().enumerate() {
            let cp = count_trapped(&evidence.runs_p, nu, n);
            let cq = count_trapped(&evidence.runs_phat, nu, n);
            points.push(RatioPoint {
                family,
                j: i + 1,
                n,
                ratio_p: cp as f64 / n as f64,
                ratio_phat: cq as f64 / n as f64,
            });
        }
    }
    let last1 = points[evidence.n1.len() - 1];
    let last2 = points[points.len() - 1];
    let final_deviation = [
        (last1.ratio_p - (1.0 - evidence.lambda1)).abs(),
        (last1.ratio_phat - evidence.lambda1).abs(),
        (last2.ratio_p - (1.0 - evidence.lambda2)).abs(),
        (last2.ratio_phat - evidence.lambda2).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let certified = final_deviation <= tolerance && evidence.lambda1 != evidence.lambda2;
    Ok(ConditionHCertificate {
        lambda1: evidence.lambda1,
        lambda2: evidence.lambda2,
        nu,
        delta,
        points,
        final_deviation,
        tolerance,
        certified,
    })
}

/// Averaged-gap report from the last schedule point of each family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GapReport {
    /// Average at the last `n1` point.
    pub avg_n1: f64,
    /// Average at the last `n2` point.
    pub avg_n2: f64,
    pub sup_estimate: f64,
    pub inf_estimate: f64,
    /// `sup - inf`, nonnegative.
    pub gap: f64,
    /// Predicted `|lambda2 - lambda1|`.
    pub gap_predicted: f64,
}

/// Build the gap report. `avgs1`/`avgs2` are running averages along the
/// two families; at least three points each so the tail is meaningful.
pub fn gap_estimate(
    avgs1: &[f64],
    avgs2: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<GapReport, Error> {
    if avgs1.len() < 3 || avgs2.len() < 3 {
        return Err(Error::InvalidParam(
            "gap estimate needs at least three schedule points per family".into(),
        ));
    }
    let avg_n1 = *avgs1.last().unwrap();
    let avg_n2 = *avgs2.last().unwrap();
    let sup_estimate = avg_n1.max(avg_n2);
    let inf_estimate = avg_n1.min(avg_n2);
    Ok(GapReport {
        avg_n1,
        avg_n2,
        sup_estimate,
        inf_estimate,
        gap: sup_estimate - inf_estimate,
        gap_predicted: (lambda2 - lambda1).abs(),
    })
}
