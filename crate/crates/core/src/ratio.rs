//! Exact non-negative rationals for counts over totals.
//!
//! Feature values and kept fractions are ratios of integers. Keeping them
//! exact until serialization makes every output bit-reproducible across
//! platforms; floats only appear where a consumer asks for them.

use std::fmt;

/// A non-negative rational `num / den` with `den >= 1`.
///
/// Not automatically reduced; equality compares cross-products.
#[derive(Clone, Copy, Debug)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "rational denominator must be nonzero");
        Rational { num, den }
    }

    pub fn zero() -> Self {
        Rational { num: 0, den: 1 }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn reduced(self) -> Self {
        let g = gcd(self.num.max(1), self.den);
        if self.num == 0 {
            return Rational { num: 0, den: 1 };
        }
        Rational {
            num: self.num / g,
            den: self.den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round(100 * self)` as an integer percentage, half away from zero.
    pub fn percent_rounded(self) -> u64 {
        let num = self.num as u128;
        let den = self.den as u128;
        ((200 * num + den) / (2 * den)) as u64
    }

    /// Fixed-point decimal with exactly 9 fractional digits, half-up.
    ///
    /// This is the canonical serialization for feature CSVs.
    pub fn format_decimal9(self) -> String {
        let num = self.num as u128;
        let den = self.den as u128;
        let scaled = (num * 1_000_000_000 + den / 2) / den;
        let int = scaled / 1_000_000_000;
        let frac = scaled % 1_000_000_000;
        format!("{int}.{frac:09}")
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl Eq for Rational {}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
