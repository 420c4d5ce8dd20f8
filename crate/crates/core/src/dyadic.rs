//! Exact dyadic rationals with an outer integer divisor.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// `numerator / (divisor * 2^scale)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: BigInt,
    scale: u32,
    divisor: u64,
}

impl DyadicRational {
    pub fn new(numerator: impl Into<BigInt>, scale: u32, divisor: u64) -> Self {
        assert!(divisor > 0, "divisor must be positive");
        let mut r = Self {
            numerator: numerator.into(),
            scale,
            divisor,
        };
        r.normalize();
        r
    }

    pub fn zero() -> Self {
        Self::new(0, 0, 1)
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(v, 0, 1)
    }

    /// `sign * 2^-exp`.
    pub fn signed_pow2_neg(negative: bool, exp: u32) -> Self {
        Self::new(if negative { -1 } else { 1 }, exp, 1)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn divisor(&self) -> u64 {
        self.divisor
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// Moves powers of two out of the divisor into the scale, then cancels
    /// common powers of two between numerator and scale.
    fn normalize(&mut self) {
        let tz = self.divisor.trailing_zeros();
        self.divisor >>= tz;
        self.scale += tz;
        if self.numerator.is_zero() {
            self.scale = 0;
            self.divisor = 1;
            return;
        }
        let ntz = self.numerator.trailing_zeros().unwrap_or(0) as u32;
        let k = ntz.min(self.scale);
        if k > 0 {
            self.numerator >>= k;
            self.scale -= k;
        }
    }

    pub fn to_rational(&self) -> BigRational {
        let den = BigInt::from(self.divisor) << self.scale;
        BigRational::new(self.numerator.clone(), den)
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.numerator.to_f64().unwrap_or(f64::NAN);
        n / self.divisor as f64 / (self.scale as f64).exp2()
    }

    pub fn abs(&self) -> Self {
        Self {
            numerator: self.numerator.abs(),
            ..self.clone()
        }
    }

    /// Both operands rewritten over `lcm-ish(divisor) * 2^max(scale)`.
    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32, u64) {
        let scale = self.scale.max(other.scale);
        let div = if self.divisor == other.divisor {
            self.divisor
        } else {
            self.divisor * other.divisor
        };
        let a = (&self.numerator << (scale - self.scale)) * BigInt::from(div / self.divisor);
        let b = (&other.numerator << (scale - other.scale)) * BigInt::from(div / other.divisor);
        (a, b, scale, div)
    }
}

impl Add for &DyadicRational {
    type Output = DyadicRational;

    fn add(self, rhs: &DyadicRational) -> DyadicRational {
        let (a, b, scale, div) = self.aligned(rhs);
        DyadicRational::new(a + b, scale, div)
    }
}

impl Sub for &DyadicRational {
    type Output = DyadicRational;

    fn sub(self, rhs: &DyadicRational) -> DyadicRational {
        let (a, b, scale, div) = self.aligned(rhs);
        DyadicRational::new(a - b, scale, div)
    }
}

impl Mul for &DyadicRational {
    type Output = DyadicRational;

    fn mul(self, rhs: &DyadicRational) -> DyadicRational {
        DyadicRational::new(
            &self.numerator * &rhs.numerator,
            self.scale + rhs.scale,
            self.divisor * rhs.divisor,
        )
    }
}

impl Neg for DyadicRational {
    type Output = DyadicRational;

    fn neg(self) -> DyadicRational {
        DyadicRational {
            numerator: -self.numerator,
            ..self
        }
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_rational().cmp(&other.to_rational())
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.divisor == 1 && self.scale == 0 {
            write!(f, "{}", self.numerator)
        } else if self.divisor == 1 {
            write!(f, "{}/2^{}", self.numerator, self.scale)
        } else {
            write!(f, "{}/({}*2^{})", self.numerator, self.divisor, self.scale)
        }
    }
}

/// Numeric carrier for the Haar energy sums: exact rationals or `f64`.
pub trait Scalar: Clone + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn from_u64(v: u64) -> Self;
    /// `numerator / (divisor * 2^scale)`.
    fn from_scaled(numerator: i128, scale: u32, divisor: u64) -> Self;
    /// `2^e` for any integer `e`.
    fn pow2(e: i32) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }

    fn from_u64(v: u64) -> Self {
        v as f64
    }

    fn from_scaled(numerator: i128, scale: u32, divisor: u64) -> Self {
        numerator as f64 / divisor as f64 / (scale as f64).exp2()
    }

    fn pow2(e: i32) -> Self {
        (e as f64).exp2()
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }

    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_scaled(numerator: i128, scale: u32, divisor: u64) -> Self {
        BigRational::new(BigInt::from(numerator), BigInt::from(divisor) << scale)
    }

    fn pow2(e: i32) -> Self {
        let p = BigInt::one() << e.unsigned_abs();
        if e >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}
