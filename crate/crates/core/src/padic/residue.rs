//! Arithmetic in the residue field F_{p^f}, f <= 4.
//!
//! The field is realized as F_p[w]/(g(w)) for a fixed monic irreducible g,
//! chosen deterministically as the lexicographically smallest irreducible
//! monic polynomial of degree f (ordering constant coefficient first). The
//! choice is recomputed at context creation and never depends on runtime
//! state, so digit expansions are reproducible across runs.

use crate::error::{Error, Result};

pub const MAX_F: usize = 4;

/// An element of F_{p^f} as a polynomial in the generator `w` of degree < f.
/// Unused coefficient slots are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct FqElem(pub [u64; MAX_F]);

impl FqElem {
    pub const ZERO: FqElem = FqElem([0; MAX_F]);

    pub fn from_scalar(c: u64) -> FqElem {
        let mut a = [0; MAX_F];
        a[0] = c;
        FqElem(a)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Canonical integer encoding sum_k c_k p^k < p^f. This is also the
    /// enumeration order used whenever digits are tried "in a fixed total
    /// order".
    pub fn encode(&self, p: u64, f: usize) -> u64 {
        let mut n = 0u64;
        for k in (0..f).rev() {
            n = n * p + self.0[k];
        }
        n
    }

    pub fn decode(mut n: u64, p: u64, f: usize) -> FqElem {
        let mut a = [0; MAX_F];
        for slot in a.iter_mut().take(f) {
            *slot = n % p;
            n /= p;
        }
        FqElem(a)
    }
}

/// The residue field tables: modulus and reduction rows for w^f .. w^{2f-2}.
#[derive(Clone, Debug)]
pub struct ResidueField {
    pub p: u64,
    pub f: usize,
    /// Coefficients g_0..g_{f-1} of the monic modulus g = w^f + ... + g_0.
    pub modulus: [u64; MAX_F],
    /// red[t] = coefficients of w^{f+t} reduced mod g, t = 0..f-2.
    red: [[u64; MAX_F]; MAX_F],
}

fn poly_eval_mod(coeffs: &[u64], x: u64, p: u64) -> u64 {
    let mut acc = 0u64;
    for &c in coeffs.iter().rev() {
        acc = (acc * x + c) % p;
    }
    acc
}

/// Remainder of a monic degree-n polynomial under division by a monic
/// degree-m polynomial, all coefficients mod p. Coefficient order is
/// constant-first; both inputs include their leading 1.
fn poly_rem(mut num: Vec<u64>, den: &[u64], p: u64) -> Vec<u64> {
    let m = den.len() - 1;
    while num.len() > m {
        let lead = *num.last().unwrap() % p;
        let shift = num.len() - 1 - m;
        if lead != 0 {
            for k in 0..=m {
                let sub = (lead * den[k]) % p;
                let idx = shift + k;
                num[idx] = (num[idx] + p * p - sub) % p;
            }
        }
        num.pop();
    }
    num
}

fn is_irreducible(coeffs: &[u64], p: u64) -> bool {
    let f = coeffs.len() - 1;
    if f == 1 {
        return true;
    }
    // degree-1 factors
    for x in 0..p {
        if poly_eval_mod(coeffs, x, p) == 0 {
            return false;
        }
    }
    if f <= 3 {
        return true;
    }
    // f == 4: exclude products of two irreducible quadratics by trial division
    for b in 0..p {
        for c in 0..p {
            let den = vec![c, b, 1];
            let rem = poly_rem(coeffs.to_vec(), &den, p);
            if rem.iter().all(|&x| x % p == 0) {
                return false;
            }
        }
    }
    true
}

impl ResidueField {
    pub fn new(p: u64, f: usize) -> Result<ResidueField> {
        if f == 0 || f > MAX_F {
            return Err(Error::InvalidContext(format!(
                "residue degree f = {f} out of supported range 1..={MAX_F}"
            )));
        }
        let mut modulus = [0u64; MAX_F];
        if f > 1 {
            // lexicographically smallest irreducible, constant coefficient
            // varying fastest
            let total = p.pow(f as u32);
            let mut found = false;
            for n in 0..total {
                let mut coeffs = vec![0u64; f + 1];
                let mut m = n;
                for slot in coeffs.iter_mut().take(f) {
                    *slot = m % p;
                    m /= p;
                }
                coeffs[f] = 1;
                if is_irreducible(&coeffs, p) {
                    modulus[..f].copy_from_slice(&coeffs[..f]);
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::InvalidContext(format!(
                    "no irreducible polynomial of degree {f} over F_{p} found"
                )));
            }
        }
        let mut fq = ResidueField {
            p,
            f,
            modulus,
            red: [[0; MAX_F]; MAX_F],
        };
        // w^{f+t} rows
        if f > 1 {
            // w^f = -(g_0 + g_1 w + ...)
            let mut cur = [0u64; MAX_F];
            for k in 0..f {
                cur[k] = (p - modulus[k]) % p;
            }
            fq.red[0] = cur;
            for t in 1..f - 1 {
                // multiply cur by w and reduce
                let mut next = [0u64; MAX_F];
                let top = cur[f - 1];
                for k in (1..f).rev() {
                    next[k] = cur[k - 1];
                }
                next[0] = 0;
                if top != 0 {
                    for k in 0..f {
                        next[k] = (next[k] + top * fq.red[0][k]) % p;
                    }
                }
                fq.red[t] = next;
                cur = next;
            }
        }
        Ok(fq)
    }

    pub fn order(&self) -> u64 {
        self.p.pow(self.f as u32)
    }

    pub fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        let mut r = [0; MAX_F];
        for k in 0..self.f {
            r[k] = (a.0[k] + b.0[k]) % self.p;
        }
        FqElem(r)
    }

    pub fn neg(&self, a: &FqElem) -> FqElem {
        let mut r = [0; MAX_F];
        for k in 0..self.f {
            r[k] = (self.p - a.0[k] % self.p) % self.p;
        }
        FqElem(r)
    }

    pub fn sub(&self, a: &FqElem, b: &FqElem) -> FqElem {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        let f = self.f;
        let p = self.p;
        let mut wide = [0u64; 2 * MAX_F];
        for i in 0..f {
            if a.0[i] == 0 {
                continue;
            }
            for j in 0..f {
                wide[i + j] = (wide[i + j] + a.0[i] * b.0[j]) % p;
            }
        }
        let mut r = [0u64; MAX_F];
        r[..f].copy_from_slice(&wide[..f]);
        for t in 0..f.saturating_sub(1) {
            let c = wide[f + t];
            if c != 0 {
                for k in 0..f {
                    r[k] = (r[k] + c * self.red[t][k]) % p;
                }
            }
        }
        FqElem(r)
    }

    pub fn pow(&self, a: &FqElem, mut n: u64) -> FqElem {
        let mut base = *a;
        let mut acc = FqElem::from_scalar(1);
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            n >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: &FqElem) -> Result<FqElem> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.order() - 2))
    }

    /// The unique p-th root (inverse Frobenius): x -> x^{p^{f-1}}.
    pub fn pth_root(&self, a: &FqElem) -> FqElem {
        self.pow(a, self.p.pow(self.f as u32 - 1))
    }

    /// All field elements in the canonical enumeration order.
    pub fn elements(&self) -> impl Iterator<Item = FqElem> + '_ {
        (0..self.order()).map(move |n| FqElem::decode(n, self.p, self.f))
    }

    /// The modulus coefficients lifted to signed integers (for the exact
    /// representation over Qed).
    pub fn modulus_lift(&self) -> [i64; MAX_F] {
        let mut m = [0i64; MAX_F];
        for k in 0..self.f {
            m[k] = self.modulus[k] as i64;
        }
        m
    }
}
