//! Circle arithmetic, the unperturbed map, the noisy fiber maps and the
//! test observable.
//!
//! The phase space is the circle `R/Z`, represented by a canonical value in
//! `[0, 1)`. The unperturbed map is affine with slope 1/2 on the middle
//! interval `I0 = [1/4, 3/4]` and is completed to a C^1 circle
//! diffeomorphism by two monotone cubic Hermite blends with a single source
//! fixed point at 0. Fiber maps add a noise term `eps * kappa` mod 1; since
//! `eps < 1/8` they map `I0` strictly into itself and contract it with
//! exact rate 1/2, which is what every exactness claim downstream leans on.

use crate::error::Error;
use serde::{Deserialize, Serialize};

/// Left endpoint of the invariant interval `I0`.
pub const I0_LEFT: f64 = 0.25;
/// Right endpoint of the invariant interval `I0`.
pub const I0_RIGHT: f64 = 0.75;
/// Diameter of `I0`.
pub const I0_DIAM: f64 = 0.5;

/// A point of the circle `R/Z`, stored as its representative in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    /// Canonical projection of a real number onto the circle.
    pub fn project(raw: f64) -> Result<CirclePoint, Error> {
        if !raw.is_finite() {
            return Err(Error::NonFinite("circle projection"));
        }
        let mut v = raw.rem_euclid(1.0);
        // rem_euclid of a tiny negative rounds up to exactly 1.0
        if v >= 1.0 {
            v = 0.0;
        }
        Ok(CirclePoint(v))
    }

    /// Projection that panics on non-finite input; for internal arithmetic
    /// whose inputs are already validated.
    #[inline]
    pub(crate) fn wrap(raw: f64) -> CirclePoint {
        Self::project(raw).expect("finite circle value")
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn in_i0(self) -> bool {
        (I0_LEFT..=I0_RIGHT).contains(&self.0)
    }
}

/// Distance on the circle: infimum of `|x - y|` over representatives.
#[inline]
pub fn circle_dist(x: CirclePoint, y: CirclePoint) -> f64 {
    let d = (x.0 - y.0).abs();
    d.min(1.0 - d)
}

/// Coefficients of a cubic in the local variable `t in [0, 1]`,
/// `c0 + c1 t + c2 t^2 + c3 t^3`, over an interval of width `h`.
#[derive(Debug, Clone, Copy)]
struct HermiteSegment {
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    left: f64,
    h: f64,
}

impl HermiteSegment {
    /// Hermite data: values `va -> vb`, slopes `ma -> mb` over `[left, left+h]`.
    fn new(left: f64, h: f64, va: f64, vb: f64, ma: f64, mb: f64) -> Self {
        let c0 = va;
        let c1 = h * ma;
        let c2 = -3.0 * va + 3.0 * vb - 2.0 * h * ma - h * mb;
        let c3 = 2.0 * va - 2.0 * vb + h * ma + h * mb;
        HermiteSegment { c0, c1, c2, c3, left, h }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let t = (x - self.left) / self.h;
        self.c0 + t * (self.c1 + t * (self.c2 + t * self.c3))
    }

    #[inline]
    fn deriv(&self, x: f64) -> f64 {
        let t = (x - self.left) / self.h;
        (self.c1 + t * (2.0 * self.c2 + t * 3.0 * self.c3)) / self.h
    }
}

/// The unperturbed circle map: affine `x/2 + 1/4` on `I0`, blended to a
/// degree-one C^1 circle map with a single source at 0.
#[derive(Debug, Clone)]
pub struct UnperturbedMap {
    source_multiplier: f64,
    upper: HermiteSegment, // [3/4, 1]: 5/8 -> 1, slopes 1/2 -> s
    lower: HermiteSegment, // [0, 1/4]: 0 -> 3/8, slopes s -> 1/2
}

impl UnperturbedMap {
    /// Build with a given derivative at the source fixed point 0.
    ///
    /// The Fritsch-Carlson condition `alpha^2 + beta^2 <= 9` (endpoint
    /// slopes over the secant 3/2 on both blend intervals) guarantees the
    /// blends are strictly increasing, so the map is a C^1 diffeomorphism.
    pub fn with_source_multiplier(s: f64) -> Result<Self, Error> {
        if !(s > 1.0) {
            return Err(Error::InvalidParam(format!(
                "source multiplier must exceed 1, got {s}"
            )));
        }
        let secant = 1.5; // both blends rise 3/8 over width 1/4
        let alpha = s / secant;
        let beta = 0.5 / secant;
        if alpha * alpha + beta * beta > 9.0 {
            return Err(Error::InvalidParam(format!(
                "source multiplier {s} breaks blend monotonicity"
            )));
        }
        Ok(UnperturbedMap {
            source_multiplier: s,
            upper: HermiteSegment::new(0.75, 0.25, 0.625, 1.0, 0.5, s),
            lower: HermiteSegment::new(0.0, 0.25, 0.0, 0.375, s, 0.5),
        })
    }

    pub fn source_multiplier(&self) -> f64 {
        self.source_multiplier
    }

    /// Evaluate the map.
    pub fn eval(&self, x: CirclePoint) -> CirclePoint {
        let v = x.value();
        if (I0_LEFT..=I0_RIGHT).contains(&v) {
            // exact affine branch; the whole contraction analysis relies
            // on this being the literal formula
            return CirclePoint::wrap(0.5 * v + 0.25);
        }
        if v > I0_RIGHT {
            return CirclePoint::wrap(self.upper.eval(v));
        }
        CirclePoint::wrap(self.lower.eval(v))
    }

    /// Exact derivative of the piecewise definition.
    pub fn deriv(&self, x: CirclePoint) -> f64 {
        let v = x.value();
        if (I0_LEFT..=I0_RIGHT).contains(&v) {
            return 0.5;
        }
        if v > I0_RIGHT {
            return self.upper.deriv(v);
        }
        self.lower.deriv(v)
    }
}

impl Default for UnperturbedMap {
    fn default() -> Self {
        UnperturbedMap::with_source_multiplier(2.0).expect("default multiplier is valid")
    }
}

/// One fiber map `x -> f0(x) + eps * kappa mod 1`.
#[derive(Debug, Clone, Copy)]
pub struct FiberMap {
    pub epsilon: f64,
    pub kappa: f64,
}

impl FiberMap {
    pub fn new(epsilon: f64, kappa: f64) -> Result<Self, Error> {
        if !(epsilon > 0.0 && epsilon < 0.125) {
            return Err(Error::InvalidParam(format!(
                "noise level must lie in (0, 1/8), got {epsilon}"
            )));
        }
        if !(-1.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidParam(format!(
                "kappa must lie in [-1, 1], got {kappa}"
            )));
        }
        Ok(FiberMap { epsilon, kappa })
    }

    /// Apply the fiber map. Maps `I0` into its interior since `eps < 1/8`.
    #[inline]
    pub fn apply(&self, map: &UnperturbedMap, x: CirclePoint) -> CirclePoint {
        CirclePoint::wrap(map.eval(x).value() + self.epsilon * self.kappa)
    }

    /// The unique fixed point of the fiber map on `I0`:
    /// `X = 1/2 + 2 eps kappa`.
    #[inline]
    pub fn fixed_point(&self) -> CirclePoint {
        CirclePoint::wrap(0.5 + 2.0 * self.epsilon * self.kappa)
    }
}

/// Unit-step fiber application with explicit noise value; the hot path of
/// every naive orbit loop.
#[inline]
pub fn fiber_step(map: &UnperturbedMap, epsilon: f64, kappa: f64, x: CirclePoint) -> CirclePoint {
    CirclePoint::wrap(map.eval(x).value() + epsilon * kappa)
}

/// Fixed point of the fiber map with noise value `kappa`.
#[inline]
pub fn fiber_fixed_point(epsilon: f64, kappa: f64) -> CirclePoint {
    CirclePoint::wrap(0.5 + 2.0 * epsilon * kappa)
}

/// The observable: 1 on the closed `rho0`-ball around `x_p`, 0 on the one
/// around `x_phat`, linear in circle distance in between.
#[derive(Debug, Clone, Copy)]
pub struct ObservableSpec {
    pub x_p: CirclePoint,
    pub x_phat: CirclePoint,
    pub rho0: f64,
}

impl ObservableSpec {
    pub fn new(x_p: CirclePoint, x_phat: CirclePoint, rho0: f64) -> Result<Self, Error> {
        if !(rho0 > 0.0) {
            return Err(Error::InvalidParam(format!("rho0 must be positive, got {rho0}")));
        }
        if circle_dist(x_p, x_phat) <= 2.0 * rho0 {
            return Err(Error::InvalidParam(format!(
                "target balls overlap: dist {} <= 2 rho0 {}",
                circle_dist(x_p, x_phat),
                2.0 * rho0
            )));
        }
        Ok(ObservableSpec { x_p, x_phat, rho0 })
    }

    /// Canonical setup for noise level `eps` and extreme noise values
    /// `kappa_p`, `kappa_phat`: the two fiber fixed points with
    /// `rho0 = eps |kappa_p - kappa_phat| / 2`.
    pub fn for_noise(eps: f64, kappa_p: f64, kappa_phat: f64) -> Result<Self, Error> {
        let rho0 = eps * (kappa_p - kappa_phat).abs() / 2.0;
        Self::new(
            fiber_fixed_point(eps, kappa_p),
            fiber_fixed_point(eps, kappa_phat),
            rho0,
        )
    }

    /// Evaluate the observable; values in `[0, 1]`, continuous on the circle.
    pub fn phi0(&self, x: CirclePoint) -> f64 {
        let dp = circle_dist(x, self.x_p);
        if dp <= self.rho0 {
            return 1.0;
        }
        let dq = circle_dist(x, self.x_phat);
        if dq <= self.rho0 {
            return 0.0;
        }
        // Linear ramp between the two ball boundaries along either arc.
        let t = (dq - self.rho0) / ((dp - self.rho0) + (dq - self.rho0));
        t.clamp(0.0, 1.0)
    }

    /// Smallest integer `nu0` with `2^-nu0 <= rho0 / 3`.
    pub fn nu0(&self) -> u32 {
        let mut nu = 0u32;
        while 0.5f64.powi(nu as i32) > self.rho0 / 3.0 {
            nu += 1;
            assert!(nu < 64, "rho0 too small for an integer trapping depth");
        }
        nu
    }
}
