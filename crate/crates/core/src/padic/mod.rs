//! Exact arithmetic in a fixed finite extension K of the p-adic field.
//!
//! K is presented with an Eisenstein uniformizer pi satisfying pi^e = p
//! exactly and an unramified part generated by a root w of a fixed
//! irreducible polynomial over F_p. The value group is (1/e)Z, represented
//! throughout as exact rationals. Elements track an absolute precision in
//! pi-digits; no operation ever claims more digits than it can prove.

pub mod ball;
pub mod elem;
pub mod residue;

pub use ball::UltraBall;
pub use elem::{Elem, Valuation};
pub use residue::{FqElem, ResidueField, MAX_F};

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::sync::Arc;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Default cap on e * f * N, the total digit budget of a context.
pub const DEFAULT_DIGIT_CAP: u64 = 1 << 26;

#[derive(Debug)]
pub struct ContextData {
    p: u64,
    f: usize,
    e: u64,
    /// Default absolute working precision, in pi-digits.
    prec_pi: i64,
    fq: ResidueField,
}

/// The working field K: immutable after creation, cheap to clone and share.
#[derive(Clone, Debug)]
pub struct Context(Arc<ContextData>);

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = 7u64;
    while d * d <= n {
        for step in [0, 4] {
            if n % (d + step) == 0 {
                return false;
            }
        }
        d += 6;
    }
    true
}

impl Context {
    pub fn new(p: u64, f: u64, e: u64, prec_digits: i64) -> Result<Context> {
        Self::with_cap(p, f, e, prec_digits, DEFAULT_DIGIT_CAP)
    }

    pub fn with_cap(p: u64, f: u64, e: u64, prec_digits: i64, cap: u64) -> Result<Context> {
        if !is_prime(p) {
            return Err(Error::InvalidContext(format!("p = {p} is not prime")));
        }
        if e == 0 || f == 0 || prec_digits < 1 {
            return Err(Error::InvalidContext(
                "e, f, N must all be >= 1".to_string(),
            ));
        }
        let budget = e
            .checked_mul(f)
            .and_then(|x| x.checked_mul(prec_digits as u64))
            .ok_or_else(|| Error::InvalidContext("digit budget overflow".into()))?;
        if budget > cap {
            return Err(Error::InvalidContext(format!(
                "digit budget e*f*N = {budget} exceeds cap {cap}"
            )));
        }
        let fq = ResidueField::new(p, f as usize)?;
        Ok(Context(Arc::new(ContextData {
            p,
            f: f as usize,
            e,
            prec_pi: prec_digits,
            fq,
        })))
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }

    pub fn f(&self) -> usize {
        self.0.f
    }

    pub fn e(&self) -> u64 {
        self.0.e
    }

    /// Default absolute precision in pi-digits.
    pub fn precision(&self) -> i64 {
        self.0.prec_pi
    }

    pub fn fq(&self) -> &ResidueField {
        &self.0.fq
    }

    pub fn same_as(&self, other: &Context) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.p() == other.p() && self.f() == other.f() && self.e() == other.e())
    }

    /// Convert a p-adic valuation (rational) to pi-digit units; the
    /// denominator must divide e.
    pub fn val_to_pi(&self, v: &Rat) -> Result<i64> {
        let scaled = v * Rat::from(BigInt::from(self.e()));
        if !scaled.denom().is_one() {
            return Err(Error::RadiusNotRepresentable(v.clone(), self.e()));
        }
        let n = scaled.to_integer();
        i64::try_from(&n)
            .map_err(|_| Error::InvalidContext(format!("valuation {v} out of i64 range")))
    }

    /// Convert pi-digit units back to a p-adic valuation.
    pub fn pi_to_val(&self, t: i64) -> Rat {
        Rat::new(BigInt::from(t), BigInt::from(self.e()))
    }

    /// p^k as a BigInt, k >= 0.
    pub fn p_pow(&self, k: u64) -> BigInt {
        BigInt::from(self.p()).pow(k as u32)
    }
}

/// p-adic valuation of a nonzero BigInt.
pub fn int_val_p(n: &BigInt, p: u64) -> u64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut v = 0u64;
    let mut cur = n.abs();
    loop {
        let (q, r) = num_integer::Integer::div_rem(&cur, &p);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        cur = q;
    }
}

/// p-adic valuation of a nonzero rational.
pub fn rat_val_p(q: &Rat, p: u64) -> i64 {
    int_val_p(q.numer(), p) as i64 - int_val_p(q.denom(), p) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(Context::new(4, 1, 1, 8).is_err());
        assert!(Context::new(2, 0, 1, 8).is_err());
        assert!(Context::with_cap(2, 1, 1 << 20, 1 << 10, 1 << 20).is_err());
    }

    #[test]
    fn valuation_units_round_trip() {
        let ctx = Context::new(2, 1, 16, 64).unwrap();
        let v = rat(15, 16);
        let t = ctx.val_to_pi(&v).unwrap();
        assert_eq!(t, 15);
        assert_eq!(ctx.pi_to_val(t), v);
        assert!(ctx.val_to_pi(&rat(1, 3)).is_err());
    }

    #[test]
    fn int_valuations() {
        assert_eq!(int_val_p(&BigInt::from(12), 2), 2);
        assert_eq!(rat_val_p(&rat(3, 4), 2), -2);
        assert_eq!(rat_val_p(&rat(9, 5), 3), 2);
    }
}
