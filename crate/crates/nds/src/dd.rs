//! Double-double arithmetic: an unevaluated sum of two `f64`s giving
//! roughly 106 bits of mantissa.
//!
//! Crossing times of the hybrid heteroclinic flow grow like
//! `(sigma1*sigma2)^J`, which reaches ~1e24 at J = 40. Plain `f64` loses
//! integer resolution near 9e15, so cumulative times, window endpoints and
//! the integer step counts derived from them are tracked in this type.
//! The error-free transforms are the classical Dekker/Knuth ones; products
//! use the FMA-based split.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
///
/// Arithmetic is exposed as plain methods rather than operator traits;
/// call sites stay explicit about which precision they run in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// `a + b` with exact rounding error, `|b| <= |a|` not required.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// `a + b` assuming `|a| >= |b|`.
#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// `a * b` with exact rounding error via FMA.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

#[allow(clippy::should_implement_trait)]
impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (h, l) = fast_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let e = e + self.lo + rhs.lo;
        Dd::renorm(s, e)
    }

    #[inline]
    pub fn add_f64(self, rhs: f64) -> Dd {
        let (s, e) = two_sum(self.hi, rhs);
        Dd::renorm(s, e + self.lo)
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn sub_f64(self, rhs: f64) -> Dd {
        self.add_f64(-rhs)
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p, e) = two_prod(self.hi, rhs);
        Dd::renorm(p, e + self.lo * rhs)
    }

    pub fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
        Dd::renorm(p, e)
    }

    /// Division by an f64, one Newton correction on the f64 quotient.
    pub fn div_f64(self, rhs: f64) -> Dd {
        let q1 = self.hi / rhs;
        let (p, e) = two_prod(q1, rhs);
        let r = ((self.hi - p) - e) + self.lo;
        let q2 = r / rhs;
        Dd::renorm(q1, q2)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Largest integer <= self, as a Dd (exact for |self| < 2^106).
    pub fn floor(self) -> Dd {
        let fh = self.hi.floor();
        if fh < self.hi {
            // hi - fh is exact; lo can still pull the value across the
            // integer below when hi sits just above it.
            let frac = self.hi - fh;
            let adj = frac + self.lo;
            if adj < 0.0 {
                return Dd::renorm(fh, -1.0);
            }
            if adj >= 1.0 {
                return Dd::renorm(fh, 1.0);
            }
            return Dd { hi: fh, lo: 0.0 };
        }
        // hi integral: the fraction lives entirely in lo.
        let fl = self.lo.floor();
        Dd::renorm(fh, fl)
    }

    pub fn ceil(self) -> Dd {
        self.neg().floor().neg()
    }

    /// Floor as u128. Panics outside [0, ~2^127].
    pub fn floor_u128(self) -> u128 {
        let f = self.floor();
        assert!(f.hi >= 0.0 && f.hi < 1.7e38, "floor_u128 out of range: {}", f.hi);
        if f.hi < 9.0e15 {
            // exact in a single f64
            return f.to_f64() as u128;
        }
        let hi = f.hi as i128;
        let lo = f.lo as i128; // integral by construction of floor()
        (hi + lo) as u128
    }

    pub fn ceil_u128(self) -> u128 {
        let c = self.ceil();
        assert!(c.hi >= 0.0, "ceil_u128 of negative value: {}", c.hi);
        c.floor_u128()
    }

    #[inline]
    pub fn lt(self, rhs: Dd) -> bool {
        self.hi < rhs.hi || (self.hi == rhs.hi && self.lo < rhs.lo)
    }

    #[inline]
    pub fn le(self, rhs: Dd) -> bool {
        !rhs.lt(self)
    }

    #[inline]
    pub fn min(self, rhs: Dd) -> Dd {
        if self.lt(rhs) { self } else { rhs }
    }

    #[inline]
    pub fn max(self, rhs: Dd) -> Dd {
        if self.lt(rhs) { rhs } else { self }
    }
}
