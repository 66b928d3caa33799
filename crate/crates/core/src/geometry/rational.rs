//! Exact rationals with a machine-word fast path.
//!
//! Most unfoldings of lattice-like tables (the square, the right isosceles
//! triangle, axis-parallel staircases) stay inside `i64 / i64` for the whole
//! enumeration horizon. Values are kept in that form until an operation would
//! overflow, at which point they are promoted to arbitrary precision and
//! demoted again whenever they fit.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An exact rational number. Always normalized (reduced, positive denominator).
#[derive(Clone)]
pub enum Rat {
    Small(i64, i64),
    Big(BigRational),
}

#[inline]
fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rat {
    pub const ZERO: Rat = Rat::Small(0, 1);
    pub const ONE: Rat = Rat::Small(1, 1);

    pub fn from_int(n: i64) -> Rat {
        Rat::Small(n, 1)
    }

    /// `num / den`; panics on a zero denominator.
    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0, "zero denominator");
        Rat::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Rat {
        let (mut n, mut d) = if den < 0 { (-num, -den) } else { (num, den) };
        if n == 0 {
            return Rat::ZERO;
        }
        let g = gcd_u128(n.unsigned_abs(), d as u128) as i128;
        if g > 1 {
            n /= g;
            d /= g;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Rat::Small(n, d),
            _ => Rat::Big(BigRational::new_raw(BigInt::from(n), BigInt::from(d))),
        }
    }

    pub fn from_big(r: BigRational) -> Rat {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            Rat::Small(n, d)
        } else {
            Rat::Big(r)
        }
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Rat::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Rat::Big(r) => r.clone(),
        }
    }

    /// The exact value of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Rat> {
        BigRational::from_float(x).map(Rat::from_big)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Rat::Small(n, d) => {
                if *d == 1 {
                    *n as f64
                } else {
                    *n as f64 / *d as f64
                }
            }
            Rat::Big(r) => big_to_f64(r),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Rat::Small(n, _) => n.signum() as i32,
            Rat::Big(r) => {
                if r.is_positive() {
                    1
                } else if r.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.signum() == 0
    }

    pub fn abs(&self) -> Rat {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Rat {
        match self {
            Rat::Small(n, d) => Rat::from_i128(*d as i128, *n as i128),
            Rat::Big(r) => Rat::from_big(r.recip()),
        }
    }

    pub fn is_small(&self) -> bool {
        matches!(self, Rat::Small(..))
    }

    /// Bits needed for numerator plus denominator; a size measure for tests.
    pub fn bits(&self) -> u64 {
        match self {
            Rat::Small(n, d) => (64 - n.unsigned_abs().leading_zeros() + 64 - d.leading_zeros()) as u64,
            Rat::Big(r) => r.numer().bits() + r.denom().bits(),
        }
    }

    pub fn min(a: Rat, b: Rat) -> Rat {
        if a <= b {
            a
        } else {
            b
        }
    }

    pub fn max(a: Rat, b: Rat) -> Rat {
        if a >= b {
            a
        } else {
            b
        }
    }
}

fn big_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both parts down to a common scale before dividing.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 60).max(0) as usize;
    let shift_d = (db - 60).max(0) as usize;
    let n = (r.numer() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

impl Default for Rat {
    fn default() -> Self {
        Rat::ZERO
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl From<i32> for Rat {
    fn from(n: i32) -> Self {
        Rat::from_int(n as i64)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $small:expr, $big:expr) => {
        impl<'a> $tr<&'a Rat> for &'a Rat {
            type Output = Rat;
            #[inline]
            fn $m(self, rhs: &'a Rat) -> Rat {
                if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, rhs) {
                    let f: fn(i128, i128, i128, i128) -> Option<Rat> = $small;
                    if let Some(r) = f(*a as i128, *b as i128, *c as i128, *d as i128) {
                        return r;
                    }
                }
                let f: fn(BigRational, BigRational) -> BigRational = $big;
                Rat::from_big(f(self.to_big(), rhs.to_big()))
            }
        }
        impl $tr<Rat> for Rat {
            type Output = Rat;
            #[inline]
            fn $m(self, rhs: Rat) -> Rat {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Rat> for Rat {
            type Output = Rat;
            #[inline]
            fn $m(self, rhs: &'a Rat) -> Rat {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Rat> for &'a Rat {
            type Output = Rat;
            #[inline]
            fn $m(self, rhs: Rat) -> Rat {
                self.$m(&rhs)
            }
        }
    };
}

binop!(
    Add,
    add,
    |a, b, c, d| {
        if b == d {
            return Some(Rat::from_i128(a + c, b));
        }
        let num = a.checked_mul(d)?.checked_add(c.checked_mul(b)?)?;
        Some(Rat::from_i128(num, b.checked_mul(d)?))
    },
    |x, y| x + y
);
binop!(
    Sub,
    sub,
    |a, b, c, d| {
        if b == d {
            return Some(Rat::from_i128(a - c, b));
        }
        let num = a.checked_mul(d)?.checked_sub(c.checked_mul(b)?)?;
        Some(Rat::from_i128(num, b.checked_mul(d)?))
    },
    |x, y| x - y
);
binop!(
    Mul,
    mul,
    |a, b, c, d| Some(Rat::from_i128(a.checked_mul(c)?, b.checked_mul(d)?)),
    |x, y| x * y
);
binop!(
    Div,
    div,
    |a, b, c, d| {
        assert!(c != 0, "division by zero");
        Some(Rat::from_i128(a.checked_mul(d)?, b.checked_mul(c)?))
    },
    |x, y| x / y
);

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match self {
            Rat::Small(n, d) if *n != i64::MIN => Rat::Small(-n, *d),
            _ => Rat::from_big(-self.to_big()),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rat {}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Rat::Small(a, b), Rat::Small(c, d)) => {
                ((*a as i128) * (*d as i128)).cmp(&((*c as i128) * (*b as i128)))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl std::hash::Hash for Rat {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        // Normalized forms are unique, but Small/Big may hold the same value
        // only if the Big one fits, which from_big prevents.
        match self {
            Rat::Small(n, d) => {
                n.hash(state);
                d.hash(state);
            }
            Rat::Big(r) => {
                r.numer().hash(state);
                r.denom().hash(state);
            }
        }
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rat::Small(n, 1) => write!(f, "{n}"),
            Rat::Small(n, d) => write!(f, "{n}/{d}"),
            Rat::Big(r) => write!(f, "{r}"),
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Error for malformed rational literals.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRatError(pub String);

impl FromStr for Rat {
    type Err = ParseRatError;

    /// Accepts `p/q`, integers, decimals and scientific notation; decimals are
    /// read exactly (`"0.1"` is one tenth, not the nearest double).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatError(s.to_string());
        let t = s.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: Rat = p.parse().map_err(|_| err())?;
            let q: Rat = q.parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            return Ok(p / q);
        }
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (neg, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let all: String = format!("{int_part}{frac_part}");
        let mut num: BigInt = all.parse().map_err(|_| err())?;
        if neg {
            num = -num;
        }
        let scale = exp - frac_part.len() as i32;
        let ten = BigInt::from(10);
        let r = if scale >= 0 {
            BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Rat::from_big(r))
    }
}

impl Zero for Rat {
    fn zero() -> Self {
        Rat::ZERO
    }
    fn is_zero(&self) -> bool {
        self.signum() == 0
    }
}

impl One for Rat {
    fn one() -> Self {
        Rat::ONE
    }
}

/// `a*b - c*d` without intermediate allocation on the small path.
#[inline]
pub fn det2(a: &Rat, b: &Rat, c: &Rat, d: &Rat) -> Rat {
    &(a * b) - &(c * d)
}

/// Sign of `a*b - c*d`.
#[inline]
pub fn det2_sign(a: &Rat, b: &Rat, c: &Rat, d: &Rat) -> i32 {
    if let (Rat::Small(an, ad), Rat::Small(bn, bd), Rat::Small(cn, cd), Rat::Small(dn, dd)) = (a, b, c, d) {
        // Compare an*bn/(ad*bd) with cn*dn/(cd*dd) by cross multiplication when it fits.
        let l = (*an as i128).checked_mul(*bn as i128);
        let r = (*cn as i128).checked_mul(*dn as i128);
        let ld = (*ad as i128).checked_mul(*bd as i128);
        let rd = (*cd as i128).checked_mul(*dd as i128);
        if let (Some(l), Some(r), Some(ld), Some(rd)) = (l, r, ld, rd) {
            if let (Some(x), Some(y)) = (l.checked_mul(rd), r.checked_mul(ld)) {
                return (x - y).signum() as i32;
            }
        }
    }
    det2(a, b, c, d).signum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!("2.2".parse::<Rat>().unwrap(), Rat::new(11, 5));
        assert_eq!("-0.5".parse::<Rat>().unwrap(), Rat::new(-1, 2));
        assert_eq!("3/6".parse::<Rat>().unwrap(), Rat::new(1, 2));
        assert_eq!("1e-3".parse::<Rat>().unwrap(), Rat::new(1, 1000));
        assert_eq!("12".parse::<Rat>().unwrap(), Rat::from_int(12));
        assert!("1/0".parse::<Rat>().is_err());
        assert!("abc".parse::<Rat>().is_err());
    }

    #[test]
    fn promotes_on_overflow_and_demotes_back() {
        let big = Rat::from_int(i64::MAX);
        let sq = &big * &big;
        assert!(!sq.is_small());
        let back = &sq / &big;
        assert!(back.is_small());
        assert_eq!(back, big);
    }

    proptest! {
        #[test]
        fn small_path_agrees_with_bigrational(a in -1_000_000i64..1_000_000, b in 1i64..10_000,
                                               c in -1_000_000i64..1_000_000, d in 1i64..10_000) {
            let x = Rat::new(a, b);
            let y = Rat::new(c, d);
            let (bx, by) = (x.to_big(), y.to_big());
            prop_assert_eq!((&x + &y).to_big(), &bx + &by);
            prop_assert_eq!((&x - &y).to_big(), &bx - &by);
            prop_assert_eq!((&x * &y).to_big(), &bx * &by);
            if c != 0 {
                prop_assert_eq!((&x / &y).to_big(), &bx / &by);
            }
            prop_assert_eq!(x.cmp(&y), bx.cmp(&by));
            prop_assert_eq!(det2_sign(&x, &y, &y, &x), 0);
        }
    }
}
