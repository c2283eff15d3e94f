//! Exact integer roots and comparisons against products of rational powers.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `⌊n^(1/k)⌋`.
pub fn iroot_floor(n: &BigUint, k: u32) -> BigUint {
    assert!(k >= 1, "root index must be positive");
    n.nth_root(k)
}

/// `⌈n^(1/k)⌉`.
pub fn iroot_ceil(n: &BigUint, k: u32) -> BigUint {
    let r = iroot_floor(n, k);
    if r.pow(k) == *n {
        r
    } else {
        r + 1u32
    }
}

pub fn iroot_ceil_u64(n: u128, k: u32) -> u64 {
    iroot_ceil(&BigUint::from(n), k)
        .to_u64()
        .expect("root of a u128 fits in u64 for k >= 2")
}

/// `∏ base_i^(w_i)` for nonnegative rational exponents, kept exactly as
/// `radicand^(1/degree)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalPowerProduct {
    pub radicand: BigUint,
    pub degree: u32,
}

impl RationalPowerProduct {
    pub fn new<'a>(factors: impl IntoIterator<Item = (u128, &'a BigRational)>) -> Self {
        let factors: Vec<(u128, &BigRational)> = factors.into_iter().collect();
        let mut degree = BigUint::one();
        for (_, w) in &factors {
            assert!(*w.numer() >= Zero::zero(), "negative exponent");
            degree = degree.lcm(w.denom().magnitude());
        }
        let degree_u32 = degree.to_u32().expect("exponent denominators are tiny");
        let mut radicand = BigUint::one();
        for (base, w) in &factors {
            let num = w.numer().magnitude() * (&degree / w.denom().magnitude());
            let e = num.to_u32().expect("exponent numerators are tiny");
            radicand *= BigUint::from(*base).pow(e);
        }
        RationalPowerProduct {
            radicand,
            degree: degree_u32,
        }
    }

    /// `n ≤ ∏ base_i^(w_i)`, decided exactly.
    pub fn admits(&self, n: &BigUint) -> bool {
        n.pow(self.degree) <= self.radicand
    }

    /// `n^e ≤ self` for a nonnegative integer `e`.
    pub fn admits_power(&self, n: &BigUint, e: u32) -> bool {
        n.pow(e * self.degree) <= self.radicand
    }

    pub fn is_integral(&self) -> bool {
        iroot_floor(&self.radicand, self.degree).pow(self.degree) == self.radicand
    }

    /// An upper bound with at most `2^-bits` absolute error.
    pub fn upper(&self, bits: u32) -> BigRational {
        let scale = BigUint::one() << (bits as usize * self.degree as usize);
        let r = iroot_ceil(&(&self.radicand * scale), self.degree);
        BigRational::new(r.into(), (BigUint::one() << bits as usize).into())
    }

    /// `⌈self⌉`.
    pub fn ceil(&self) -> BigUint {
        iroot_ceil(&self.radicand, self.degree)
    }
}
