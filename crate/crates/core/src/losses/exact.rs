//! Exact rational arithmetic over counts.
//!
//! Joint losses are evaluated over `Ratio<i128>` so that parity predicates and
//! swap comparisons are exact. Real parameters (`λ`, `p*`) enter through
//! [`exact_from_f64`], which picks the simplest continued-fraction convergent
//! that rounds to the same `f64`; `0.3` becomes `3/10`, not the binary
//! expansion.

use num_rational::Ratio;
use num_traits::{Float, Signed, ToPrimitive};

pub type Exact = Ratio<i128>;

/// Numeric type the loss formulas are written against.
pub trait Scalar: Clone + PartialOrd + Signed + Send + Sync + std::fmt::Debug {
    fn from_count(n: u64) -> Self;
    fn from_exact(q: &Exact) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for Exact {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }

    fn from_exact(q: &Exact) -> Self {
        *q
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn from_exact(q: &Exact) -> Self {
        Scalar::to_f64(q)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

pub fn ratio(num: u64, den: u64) -> Exact {
    Ratio::new(i128::from(num), i128::from(den))
}

const F64_EXACT_INT: i128 = 1 << 53;

/// Simplest rational whose nearest `f64` is `x`, or the exact binary value when
/// no convergent with 53-bit parts rounds to `x`. `None` for non-finite input
/// or magnitudes whose exact value does not fit in `i128`.
pub fn exact_from_f64(x: f64) -> Option<Exact> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(Ratio::from_integer(0));
    }
    let (mantissa, exponent, sign) = Float::integer_decode(x);
    let sign = i128::from(sign);
    if exponent >= 0 {
        if exponent > 70 {
            return None;
        }
        return Some(Ratio::from_integer(
            sign * (i128::from(mantissa) << exponent),
        ));
    }
    let shift = u32::try_from(-i32::from(exponent)).ok()?;
    if shift > 125 {
        return None;
    }
    let num = i128::from(mantissa);
    let den = 1i128 << shift;

    // Convergents h/k of num/den.
    let (mut a, mut b) = (num, den);
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    let target = x.abs();
    loop {
        let q = a / b;
        let r = a % b;
        let h_next = q.checked_mul(h)?.checked_add(h_prev)?;
        let k_next = q.checked_mul(k)?.checked_add(k_prev)?;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
        if h <= F64_EXACT_INT && k <= F64_EXACT_INT && (h as f64) / (k as f64) == target {
            return Some(Ratio::new(sign * h, k));
        }
        if r == 0 {
            return Some(Ratio::new(sign * num, den));
        }
        a = b;
        b = r;
    }
}
