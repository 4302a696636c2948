//! Scalar abstraction for the 3-adic distribution kernels: the same table
//! machinery runs over exact rationals (`BigRational`) or doubles.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::ops::{Add, AddAssign, Div, Mul, Sub};

pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + Send
    + Sync
{
    /// Exact 3^exp, with negative exponents giving 1/3^|exp|.
    fn pow3(exp: i32) -> Self;

    fn abs(&self) -> Self;

    fn to_f64(&self) -> f64;

    /// Sum a fiber of table entries in index order.  The float instance uses
    /// compensated summation so 3^n-term totals stay within tolerance.
    fn sum_fiber<I: Iterator<Item = Self>>(iter: I) -> Self;
}

impl Scalar for f64 {
    fn pow3(exp: i32) -> Self {
        3f64.powi(exp)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sum_fiber<I: Iterator<Item = Self>>(iter: I) -> Self {
        // Kahan summation.
        let mut sum = 0.0;
        let mut c = 0.0;
        for x in iter {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }
}

impl Scalar for BigRational {
    fn pow3(exp: i32) -> Self {
        let p = BigInt::from(BigUint::from(3u32).pow(exp.unsigned_abs()));
        if exp >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn sum_fiber<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut sum = BigRational::zero();
        for x in iter {
            sum += x;
        }
        sum
    }
}
