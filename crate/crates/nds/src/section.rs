//! Pullback approximation of the invariant section and the graph
//! transform it is the fixed point of.
//!
//! The graph transform sends a section `b` to
//! `omega -> f_{theta^-1 omega}(b(theta^-1 omega))`; on `I0` each fiber
//! map has slope exactly 1/2, so the transform contracts sup-distance by
//! exactly 1/2 and its fixed point `Y` is approximated by pushing any
//! point forward along the past orbit: `Y_n(omega) = f^n_{theta^-n
//! omega}(x0)`, accurate to `2^-n diam(I0)`. Requires an invertible
//! driver; the i.i.d. shift has no inverse and is refused explicitly.
//!
//! The decay identity `|f^j(x) - Y(theta^j omega)| = 2^-j |x - Y(omega)|`
//! is checked by iterating both orbits in double-double arithmetic: near
//! step 50 the distance sits at the last bits of an f64, where plain
//! double subtraction would drown the ratio in rounding noise.

use crate::circle::{circle_dist, fiber_step, CirclePoint, ObservableSpec, I0_LEFT, I0_RIGHT};
use crate::cocycle::NdsInstance;
use crate::dd::Dd;
use crate::driver::Driver;
use crate::error::Error;

/// A pullback sample of the invariant section.
#[derive(Debug, Clone, Copy)]
pub struct SectionSample {
    pub value: CirclePoint,
    pub depth: u32,
}

/// `Y_depth` at the driver's current state: rewind `depth` steps, push
/// `x0` forward along the recovered past. The driver is cloned; the
/// original is untouched.
pub fn pullback<D: Driver + Clone>(
    nds: &NdsInstance,
    driver: &D,
    depth: u32,
    x0: CirclePoint,
) -> Result<SectionSample, Error> {
    if !x0.in_i0() {
        return Err(Error::OutOfDomain("pullback seeds must lie in I0".into()));
    }
    let mut past = driver.clone();
    for _ in 0..depth {
        past.step_back()?;
    }
    let mut x = x0;
    for _ in 0..depth {
        x = nds.step(&mut past, x);
    }
    Ok(SectionSample { value: x, depth })
}

/// Residual of the invariance identity `f_omega(Y(omega)) = Y(theta
/// omega)` at finite depth; bounded by `2^-depth diam(I0)` plus rounding.
pub fn invariance_residual<D: Driver + Clone>(
    nds: &NdsInstance,
    driver: &D,
    depth: u32,
    x0: CirclePoint,
) -> Result<f64, Error> {
    let here = pullback(nds, driver, depth, x0)?;
    let mut ahead = driver.clone();
    ahead.step();
    let next = pullback(nds, &ahead, depth, x0)?;
    let pushed = fiber_step(&nds.map, nds.epsilon, driver.kappa(), here.value);
    Ok(circle_dist(pushed, next.value))
}

/// Sup-norm contraction ratio of the graph transform on two finite
/// sections sampled over shared base states: `kappa_prev[i]` is the noise
/// at the i-th preimage state, `b1[i]`/`b2[i]` the section values there.
pub fn contraction_probe(
    nds: &NdsInstance,
    kappa_prev: &[f64],
    b1: &[f64],
    b2: &[f64],
) -> Result<f64, Error> {
    if kappa_prev.len() != b1.len() || b1.len() != b2.len() || b1.is_empty() {
        return Err(Error::InvalidParam("section samples must share their base states".into()));
    }
    for &v in b1.iter().chain(b2.iter()) {
        if !(I0_LEFT..=I0_RIGHT).contains(&v) {
            return Err(Error::OutOfDomain(format!("section value {v} outside I0")));
        }
    }
    let before = b1
        .iter()
        .zip(b2)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if before == 0.0 {
        return Err(Error::InvalidParam("sections coincide; ratio undefined".into()));
    }
    let after = kappa_prev
        .iter()
        .zip(b1.iter().zip(b2))
        .map(|(&k, (&a, &b))| {
            let x = CirclePoint::project(a).expect("finite");
            let y = CirclePoint::project(b).expect("finite");
            circle_dist(
                fiber_step(&nds.map, nds.epsilon, k, x),
                fiber_step(&nds.map, nds.epsilon, k, y),
            )
        })
        .fold(0.0f64, f64::max);
    Ok(after / before)
}

/// Per-step distances and ratios of the decay identity.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `|f^j(x) - Y(theta^j omega)|` for `j = 0..=n`.
    pub distances: Vec<f64>,
    /// `distances[j+1] / distances[j]` for `j = 0..n`.
    pub ratios: Vec<f64>,
    pub depth: u32,
}

/// Iterate the orbit of `x` and the section orbit side by side for `n`
/// steps and report the per-step contraction of their distance. The
/// section is seeded at `depth + n` below the driver state so its own
/// error stays far beneath the tracked distances; both orbits run in
/// double-double so the ratios remain meaningful when the distance
/// reaches the last bits of a double.
pub fn decay_check<D: Driver + Clone>(
    nds: &NdsInstance,
    driver: &D,
    x: CirclePoint,
    n: u32,
    depth: u32,
) -> Result<DecayReport, Error> {
    if !x.in_i0() {
        return Err(Error::OutOfDomain("decay check needs x in I0".into()));
    }
    let section = pullback(nds, driver, depth + n, x)?;
    let mut cur = driver.clone();
    let mut xd = Dd::from_f64(x.value());
    let mut yd = Dd::from_f64(section.value.value());
    let mut distances = vec![dd_dist(xd, yd)];
    for _ in 0..n {
        let kappa = cur.kappa();
        let shift = 0.25 + nds.epsilon * kappa;
        xd = xd.mul_f64(0.5).add_f64(shift);
        yd = yd.mul_f64(0.5).add_f64(shift);
        cur.step();
        distances.push(dd_dist(xd, yd));
    }
    let ratios = distances.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(DecayReport { distances, ratios, depth: depth + n })
}

fn dd_dist(a: Dd, b: Dd) -> f64 {
    a.sub(b).to_f64().abs()
}

/// One backward-forward pass comparing the Birkhoff average of the
/// observable along the orbit of `x` with the average along the section
/// orbit. When the driver is non-historic both converge to the same
/// limit; the difference at finite `n` is summable because the orbits
/// approach each other geometrically.
pub fn average_transfer<D: Driver + Clone>(
    nds: &NdsInstance,
    obs: &ObservableSpec,
    driver: &D,
    x: CirclePoint,
    n: u128,
    depth: u32,
) -> Result<(f64, f64), Error> {
    if n == 0 {
        return Err(Error::InvalidParam("need at least one step".into()));
    }
    let section = pullback(nds, driver, depth, x)?;
    let mut cur = driver.clone();
    let mut xv = x;
    let mut yv = section.value;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for _ in 0..n {
        sum_x += obs.phi0(xv);
        sum_y += obs.phi0(yv);
        let kappa = cur.kappa();
        xv = fiber_step(&nds.map, nds.epsilon, kappa, xv);
        yv = fiber_step(&nds.map, nds.epsilon, kappa, yv);
        cur.step();
    }
    Ok((sum_x / n as f64, sum_y / n as f64))
}
