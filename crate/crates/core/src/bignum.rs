//! Small helpers bridging arbitrary-precision integers and `f64`.

use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Natural logarithm of a positive big integer, accurate to a few ulps
/// regardless of magnitude.
pub(crate) fn ln_big(x: &BigUint) -> f64 {
    debug_assert!(!x.is_zero());
    let bits = x.bits();
    if bits <= 960 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * LN_2
}

/// `x * 2^exp` without intermediate overflow or premature underflow.
pub(crate) fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(exp as i32)
}

/// `num / den` rounded to `f64` (truncation error below 2^-63 relative).
pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    debug_assert!(!den.is_zero());
    if num.is_zero() {
        return 0.0;
    }
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let quotient = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    ldexp(quotient.to_f64().unwrap_or(f64::INFINITY), -shift)
}

/// Splits a finite positive `f64` into `(mantissa, exponent)` with
/// `x = mantissa * 2^exponent` exactly.
fn decompose(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & ((1u64 << 52) - 1);
    if exponent == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1u64 << 52), exponent - 1075)
    }
}

/// Exact `⌈e^{beta·q}⌉` for `beta > 0`, `q ≥ 1`, or `None` when the result
/// would need more than `budget_bits` bits.
///
/// The exponential is evaluated in fixed point: a Taylor series for
/// `e^{x/2^k}` followed by `k` squarings, with a rigorous running error bound.
/// Precision is raised until the error interval contains no integer.
pub(crate) fn exp_ceil(beta: f64, q: &BigUint, budget_bits: u64) -> Option<BigUint> {
    assert!(beta.is_finite() && beta > 0.0);
    let x_approx = beta * q.to_f64().unwrap_or(f64::INFINITY);
    if !x_approx.is_finite() {
        return None;
    }
    let bits_needed = (x_approx / LN_2).ceil() + 1.0;
    if bits_needed > budget_bits as f64 {
        return None;
    }
    let result_bits = bits_needed as u64;

    let (mantissa, exponent) = decompose(beta);
    let x_num = BigUint::from(mantissa) * q;
    // k halvings bring the argument below 2^-8.
    let k = (x_approx.max(1.0).log2().ceil() as i64 + 8).max(0) as u64;
    // y = x_num * 2^(exponent - k); exponent - k is strictly negative here.
    let y_shift = (k as i64 - exponent) as u64;

    let mut guard = 64u64;
    loop {
        let frac_bits = result_bits + k + guard;
        let one = BigUint::one() << frac_bits;

        let mut term = one.clone();
        let mut sum = one.clone();
        let mut n_terms = 0u64;
        for n in 1u64.. {
            term = ((term * &x_num) >> y_shift) / n;
            if term.is_zero() {
                break;
            }
            sum += &term;
            n_terms = n;
        }

        let mut value = sum;
        for _ in 0..k {
            value = (&value * &value) >> frac_bits;
        }

        // Relative error after k squarings is at most 2^(k+1) (2n + 3) 2^-F.
        let slack = BigUint::from(2 * n_terms + 3);
        let err = ((&value * slack) >> (frac_bits - k - 1)) + 2u32;
        let lo = if value > err {
            &value - &err
        } else {
            BigUint::zero()
        };
        let hi = &value + &err;
        let floor_lo = lo >> frac_bits;
        let floor_hi = hi >> frac_bits;
        if floor_lo == floor_hi {
            return Some(floor_lo + 1u32);
        }
        guard += 64;
    }
}
