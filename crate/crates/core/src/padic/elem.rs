//! Field elements of K as digit expansions in the uniformizer.
//!
//! Internally an element is a coordinate vector on the basis pi^j w^k,
//! 0 <= j < e, 0 <= k < f, in one of two forms:
//!
//! * `Exact`: rational coordinates. The element is known exactly; this is
//!   closed under ring operations and under inversion of rationals. All
//!   elements built from rationals and pi/w monomials stay here, which is
//!   what makes cancellation like 1 + (-1) detectable as the exact zero.
//! * `Approx`: integer coordinates known modulo a power of p, together with
//!   a base offset and an absolute precision in pi-digits. Root finding and
//!   every other composite pipeline produces these.
//!
//! Since pi^e = p exactly, the p-digit s of coordinate j sits at pi-position
//! base + j + e*s; positions are distinct mod e across coordinates, so
//! valuations decompose slot by slot and the isosceles principle is built
//! into the representation.

use super::residue::{FqElem, MAX_F};
use super::{int_val_p, rat_val_p, Context, Rat};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

/// Valuation of an element: an exact rational in (1/e)Z, or infinite for
/// the exact zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    Finite(Rat),
    Infinite,
}

impl Valuation {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Valuation::Finite(r) => Some(r),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Exact(Vec<Rat>),
    Approx {
        base: i64,
        coords: Vec<BigInt>,
        prec: i64,
    },
}

#[derive(Clone, Debug)]
pub struct Elem {
    ctx: Context,
    repr: Repr,
}

/// Pseudo-infinite pi-precision used for exact elements in min() computations.
pub const PREC_INF: i64 = i64::MAX / 4;

/// Bit budget per exact coordinate before an operation demotes its result
/// to the working precision.
const HEIGHT_CAP_BITS: u64 = 1 << 14;

fn modinv(a: &BigInt, m: &BigInt) -> BigInt {
    // extended Euclid; gcd(a, m) must be 1
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = r1;
        r1 = r2;
        let t2 = &t0 - &q * &t1;
        t0 = t1;
        t1 = t2;
    }
    debug_assert!(r0.is_one(), "modinv of non-unit");
    t0.mod_floor(m)
}

/// Signed reduction rows over Z: w^{f+t} = sum_k rows[t][k] w^k, valid
/// exactly in Z[w]/(g_lift).
fn omega_rows(ctx: &Context) -> Vec<Vec<BigInt>> {
    let f = ctx.f();
    if f <= 1 {
        return Vec::new();
    }
    let lift = ctx.fq().modulus_lift();
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(f - 1);
    let row0: Vec<BigInt> = (0..f).map(|k| BigInt::from(-lift[k])).collect();
    rows.push(row0);
    for t in 1..f - 1 {
        let prev = rows[t - 1].clone();
        let mut next = vec![BigInt::zero(); f];
        for k in (1..f).rev() {
            next[k] = prev[k - 1].clone();
        }
        let top = prev[f - 1].clone();
        for k in 0..f {
            next[k] += &top * &rows[0][k];
        }
        rows.push(next);
    }
    rows
}

fn window(prec: i64, base: i64, j: usize, e: u64) -> u64 {
    let avail = prec - base - j as i64;
    if avail <= 0 {
        0
    } else {
        (avail as u64).div_ceil(e)
    }
}

impl Elem {
    // ----- constructors -----

    pub fn zero(ctx: &Context) -> Elem {
        let n = ctx.e() as usize * ctx.f();
        Elem {
            ctx: ctx.clone(),
            repr: Repr::Exact(vec![Rat::zero(); n]),
        }
    }

    pub fn one(ctx: &Context) -> Elem {
        Elem::from_rational(ctx, Rat::one())
    }

    pub fn from_integer(ctx: &Context, n: i64) -> Elem {
        Elem::from_rational(ctx, Rat::from(BigInt::from(n)))
    }

    /// The canonical exact embedding of a rational.
    pub fn from_rational(ctx: &Context, q: Rat) -> Elem {
        let mut v = vec![Rat::zero(); ctx.e() as usize * ctx.f()];
        v[0] = q;
        Elem {
            ctx: ctx.clone(),
            repr: Repr::Exact(v),
        }
    }

    /// pi^t, exactly, for any integer t (negative allowed).
    pub fn uniformizer_pow(ctx: &Context, t: i64) -> Elem {
        let e = ctx.e() as i64;
        let j = t.rem_euclid(e);
        let s = (t - j) / e;
        let p = BigInt::from(ctx.p());
        let coeff = if s >= 0 {
            Rat::from(p.pow(s as u32))
        } else {
            Rat::new(BigInt::one(), p.pow((-s) as u32))
        };
        let mut v = vec![Rat::zero(); ctx.e() as usize * ctx.f()];
        v[j as usize * ctx.f()] = coeff;
        Elem {
            ctx: ctx.clone(),
            repr: Repr::Exact(v),
        }
    }

    /// The unramified generator w (requires f >= 2).
    pub fn omega(ctx: &Context) -> Result<Elem> {
        if ctx.f() < 2 {
            return Err(Error::InvalidContext(
                "omega requires residue degree f >= 2".into(),
            ));
        }
        let mut v = vec![Rat::zero(); ctx.e() as usize * ctx.f()];
        v[1] = Rat::one();
        Ok(Elem {
            ctx: ctx.clone(),
            repr: Repr::Exact(v),
        })
    }

    /// Raw digit constructor: value = sum_s digits[s] pi^{val_pi + s},
    /// known to absolute precision `prec`.
    pub fn from_digits(ctx: &Context, val_pi: i64, digits: &[FqElem], prec: i64) -> Elem {
        let e = ctx.e() as usize;
        let f = ctx.f();
        let mut coords = vec![BigInt::zero(); e * f];
        let p = BigInt::from(ctx.p());
        for (s, d) in digits.iter().enumerate() {
            let idx = s % e;
            let shift = (s / e) as u32;
            let pw = p.pow(shift);
            for k in 0..f {
                if d.0[k] != 0 {
                    coords[idx * f + k] += BigInt::from(d.0[k]) * &pw;
                }
            }
        }
        let mut el = Elem {
            ctx: ctx.clone(),
            repr: Repr::Approx {
                base: val_pi,
                coords,
                prec,
            },
        };
        el.reduce();
        el
    }

    /// A single-digit element d * pi^t known exactly (as an exact lift).
    pub fn digit_monomial(ctx: &Context, t: i64, d: &FqElem) -> Elem {
        let mut acc = Elem::zero(ctx);
        for k in 0..ctx.f() {
            if d.0[k] != 0 {
                let mono = Elem::uniformizer_pow(ctx, t);
                let mono = if k > 0 {
                    let mut w = Elem::omega(ctx).expect("f >= 2");
                    for _ in 1..k {
                        w = w.mul(&Elem::omega(ctx).unwrap());
                    }
                    mono.mul(&w)
                } else {
                    mono
                };
                let scaled = mono.mul(&Elem::from_integer(ctx, d.0[k] as i64));
                acc = acc.add(&scaled);
            }
        }
        acc
    }

    // ----- queries -----

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_))
    }

    pub fn is_exact_zero(&self) -> bool {
        match &self.repr {
            Repr::Exact(v) => v.iter().all(|q| q.is_zero()),
            _ => false,
        }
    }

    /// True if no digit is known to be nonzero (includes the exact zero).
    pub fn is_zero_at_prec(&self) -> bool {
        match &self.repr {
            Repr::Exact(v) => v.iter().all(|q| q.is_zero()),
            Repr::Approx { coords, .. } => coords.iter().all(|c| c.is_zero()),
        }
    }

    /// Absolute precision in pi-digits (PREC_INF for exact elements).
    pub fn prec_pi(&self) -> i64 {
        match &self.repr {
            Repr::Exact(_) => PREC_INF,
            Repr::Approx { prec, .. } => *prec,
        }
    }

    /// Exact pi-valuation if decidable: Ok(None) means the exact zero.
    pub fn val_pi(&self) -> Result<Option<i64>> {
        match &self.repr {
            Repr::Exact(v) => {
                let f = self.ctx.f();
                let mut best: Option<i64> = None;
                for (idx, q) in v.iter().enumerate() {
                    if q.is_zero() {
                        continue;
                    }
                    let j = (idx / f) as i64;
                    let t = j + self.ctx.e() as i64 * rat_val_p(q, self.ctx.p());
                    best = Some(best.map_or(t, |b: i64| b.min(t)));
                }
                Ok(best)
            }
            Repr::Approx {
                base,
                coords,
                prec,
            } => {
                let f = self.ctx.f();
                let mut best: Option<i64> = None;
                for (idx, c) in coords.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let j = (idx / f) as i64;
                    let t = base + j + self.ctx.e() as i64 * int_val_p(c, self.ctx.p()) as i64;
                    best = Some(best.map_or(t, |b: i64| b.min(t)));
                }
                match best {
                    Some(t) => Ok(Some(t)),
                    None => Err(Error::PrecisionLoss(format!(
                        "element indistinguishable from 0 at precision pi^{prec}"
                    ))),
                }
            }
        }
    }

    /// The valuation as an exact rational (p-adic units), or Infinite.
    pub fn valuation(&self) -> Result<Valuation> {
        match self.val_pi()? {
            None => Ok(Valuation::Infinite),
            Some(t) => Ok(Valuation::Finite(self.ctx.pi_to_val(t))),
        }
    }

    /// Lower bound on the pi-valuation that is always available.
    pub fn vlow_pi(&self) -> i64 {
        match self.val_pi() {
            Ok(Some(t)) => t,
            Ok(None) => PREC_INF,
            Err(_) => self.prec_pi(),
        }
    }

    // ----- precision management -----

    fn reduce(&mut self) {
        let e = self.ctx.e();
        let f = self.ctx.f();
        let p = BigInt::from(self.ctx.p());
        if let Repr::Approx {
            base,
            coords,
            prec,
        } = &mut self.repr
        {
            for j in 0..e as usize {
                let w = window(*prec, *base, j, e);
                for k in 0..f {
                    let c = &mut coords[j * f + k];
                    if w == 0 {
                        *c = BigInt::zero();
                    } else if !c.is_zero() {
                        let m = p.pow(w as u32);
                        *c = c.mod_floor(&m);
                    }
                }
            }
        }
    }

    /// Demote to an approximate element with absolute precision `prec`
    /// (pi-digits). On approximate input, precision can only shrink.
    pub fn demoted(&self, prec: i64) -> Elem {
        match &self.repr {
            Repr::Approx {
                base,
                coords,
                prec: own,
            } => {
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx {
                        base: *base,
                        coords: coords.clone(),
                        prec: (*own).min(prec),
                    },
                };
                el.reduce();
                el
            }
            Repr::Exact(v) => {
                let e = self.ctx.e() as usize;
                let f = self.ctx.f();
                let p = self.ctx.p();
                let pbig = BigInt::from(p);
                // base = minimum pi-position over nonzero coordinates
                let mut base: Option<i64> = None;
                for (idx, q) in v.iter().enumerate() {
                    if q.is_zero() {
                        continue;
                    }
                    let j = (idx / f) as i64;
                    let t = j + e as i64 * rat_val_p(q, p);
                    base = Some(base.map_or(t, |b: i64| b.min(t)));
                }
                let base = match base {
                    None => {
                        return Elem {
                            ctx: self.ctx.clone(),
                            repr: Repr::Approx {
                                base: 0,
                                coords: vec![BigInt::zero(); e * f],
                                prec,
                            },
                        }
                    }
                    Some(b) => b,
                };
                let mut coords = vec![BigInt::zero(); e * f];
                for (idx, q) in v.iter().enumerate() {
                    if q.is_zero() {
                        continue;
                    }
                    let j = (idx / f) as i64;
                    let k = idx % f;
                    let vq = rat_val_p(q, p);
                    let pos = j + e as i64 * vq;
                    let rel = pos - base;
                    debug_assert!(rel >= 0);
                    let slot = (rel % e as i64) as usize;
                    let shift = (rel / e as i64) as u32;
                    let w = window(prec, base, slot, e as u64);
                    if w == 0 || shift as u64 >= w {
                        continue;
                    }
                    // unit part a'/b' of q * p^{-vq}
                    let vnum = if q.numer().is_zero() {
                        0
                    } else {
                        int_val_p(q.numer(), p)
                    };
                    let vden = int_val_p(q.denom(), p);
                    let aa = q.numer() / pbig.pow(vnum as u32);
                    let bb = q.denom() / pbig.pow(vden as u32);
                    let m = pbig.pow(w as u32 - shift);
                    let c = (aa.mod_floor(&m) * modinv(&bb, &m)).mod_floor(&m);
                    coords[slot * f + k] += c * pbig.pow(shift);
                }
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx {
                        base,
                        coords,
                        prec,
                    },
                };
                el.reduce();
                el
            }
        }
    }

    /// Demote at the context's default working precision.
    pub fn working(&self) -> Elem {
        if self.is_exact() {
            self.demoted(self.ctx.precision())
        } else {
            self.clone()
        }
    }

    /// Claim precision `prec` even if the current window is shorter,
    /// treating unknown digits as zero. Only sound inside self-correcting
    /// iterations whose result is verified afterwards.
    fn with_forced_prec(&self, prec: i64) -> Elem {
        let el = self.demoted(prec);
        match el.repr {
            Repr::Approx { base, coords, .. } => {
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx {
                        base,
                        coords,
                        prec,
                    },
                };
                el.reduce();
                el
            }
            r => Elem {
                ctx: self.ctx.clone(),
                repr: r,
            },
        }
    }

    fn rebased(&self, new_base: i64, prec: i64) -> (Vec<BigInt>, i64) {
        // returns coordinates of self at base `new_base`, reduced to `prec`
        let e = self.ctx.e() as usize;
        let f = self.ctx.f();
        let p = BigInt::from(self.ctx.p());
        match &self.demoted(prec).repr {
            Repr::Approx {
                base,
                coords,
                ..
            } => {
                debug_assert!(new_base <= *base);
                let mut out = vec![BigInt::zero(); e * f];
                let delta = base - new_base;
                for (idx, c) in coords.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let j = (idx / f) as i64;
                    let k = idx % f;
                    let rel = delta + j;
                    let slot = (rel % e as i64) as usize;
                    let shift = (rel / e as i64) as u32;
                    out[slot * f + k] += c * p.pow(shift);
                }
                (out, prec)
            }
            _ => unreachable!("demoted returns Approx"),
        }
    }

    // ----- ring operations -----

    fn check_ctx(&self, other: &Elem) {
        assert!(
            self.ctx.same_as(&other.ctx),
            "elements from different contexts"
        );
    }

    fn exact_too_tall(v: &[Rat]) -> bool {
        v.iter().any(|q| {
            q.numer().bits() > HEIGHT_CAP_BITS || q.denom().bits() > HEIGHT_CAP_BITS
        })
    }

    pub fn add(&self, other: &Elem) -> Elem {
        self.check_ctx(other);
        match (&self.repr, &other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => {
                let v: Vec<Rat> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
                let el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Exact(v),
                };
                if let Repr::Exact(v) = &el.repr {
                    if Self::exact_too_tall(v) {
                        return el.demoted(self.ctx.precision());
                    }
                }
                el
            }
            _ => {
                // at least one side is approximate here
                let prec = self.prec_pi().min(other.prec_pi());
                let base = self
                    .demoted(prec)
                    .approx_base()
                    .min(other.demoted(prec).approx_base());
                let (ca, _) = self.rebased(base, prec);
                let (cb, _) = other.rebased(base, prec);
                let coords: Vec<BigInt> =
                    ca.into_iter().zip(cb).map(|(x, y)| x + y).collect();
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx { base, coords, prec },
                };
                el.reduce();
                el
            }
        }
    }

    fn approx_base(&self) -> i64 {
        match &self.repr {
            Repr::Approx { base, .. } => *base,
            Repr::Exact(_) => unreachable!("approx_base on exact"),
        }
    }

    pub fn neg(&self) -> Elem {
        match &self.repr {
            Repr::Exact(v) => Elem {
                ctx: self.ctx.clone(),
                repr: Repr::Exact(v.iter().map(|q| -q).collect()),
            },
            Repr::Approx {
                base,
                coords,
                prec,
            } => {
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx {
                        base: *base,
                        coords: coords.iter().map(|c| -c).collect(),
                        prec: *prec,
                    },
                };
                el.reduce();
                el
            }
        }
    }

    pub fn sub(&self, other: &Elem) -> Elem {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Elem) -> Elem {
        self.check_ctx(other);
        let e = self.ctx.e() as usize;
        let f = self.ctx.f();
        match (&self.repr, &other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => {
                if self.is_exact_zero() || other.is_exact_zero() {
                    return Elem::zero(&self.ctx);
                }
                let rows = omega_rows(&self.ctx);
                let p = Rat::from(BigInt::from(self.ctx.p()));
                let mut acc = vec![Rat::zero(); e * f];
                for j1 in 0..e {
                    for k1 in 0..f {
                        let x = &a[j1 * f + k1];
                        if x.is_zero() {
                            continue;
                        }
                        for j2 in 0..e {
                            for k2 in 0..f {
                                let y = &b[j2 * f + k2];
                                if y.is_zero() {
                                    continue;
                                }
                                let mut term = x * y;
                                let mut j = j1 + j2;
                                if j >= e {
                                    j -= e;
                                    term *= &p;
                                }
                                let kk = k1 + k2;
                                if kk < f {
                                    acc[j * f + kk] += term;
                                } else {
                                    for (k, r) in rows[kk - f].iter().enumerate() {
                                        if !r.is_zero() {
                                            acc[j * f + k] += &term * Rat::from(r.clone());
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Exact(acc),
                };
                if let Repr::Exact(v) = &el.repr {
                    if Self::exact_too_tall(v) {
                        return el.demoted(self.ctx.precision());
                    }
                }
                el
            }
            _ => {
                if self.is_exact_zero() || other.is_exact_zero() {
                    return Elem::zero(&self.ctx);
                }
                // demote an exact side just deep enough not to limit the
                // product precision min(px + vy, py + vx)
                let (wx, wy) = match (self.is_exact(), other.is_exact()) {
                    (true, false) => {
                        let vx = self.val_pi().expect("exact").expect("nonzero");
                        let d = other.prec_pi() + vx - other.vlow_pi() + 2;
                        (self.demoted(d.max(vx + 1)), other.clone())
                    }
                    (false, true) => {
                        let vy = other.val_pi().expect("exact").expect("nonzero");
                        let d = self.prec_pi() + vy - self.vlow_pi() + 2;
                        (self.clone(), other.demoted(d.max(vy + 1)))
                    }
                    _ => (self.clone(), other.clone()),
                };
                let vx = wx.vlow_pi();
                let vy = wy.vlow_pi();
                let prec = (wx.prec_pi() + vy).min(wy.prec_pi() + vx);
                let (bx, ca) = match &wx.repr {
                    Repr::Approx { base, coords, .. } => (*base, coords),
                    _ => unreachable!(),
                };
                let (by, cb) = match &wy.repr {
                    Repr::Approx { base, coords, .. } => (*base, coords),
                    _ => unreachable!(),
                };
                let rows = omega_rows(&self.ctx);
                let p = BigInt::from(self.ctx.p());
                let mut acc = vec![BigInt::zero(); e * f];
                let nz_a: Vec<usize> =
                    (0..e * f).filter(|&i| !ca[i].is_zero()).collect();
                let nz_b: Vec<usize> =
                    (0..e * f).filter(|&i| !cb[i].is_zero()).collect();
                for &i1 in &nz_a {
                    let (j1, k1) = (i1 / f, i1 % f);
                    for &i2 in &nz_b {
                        let (j2, k2) = (i2 / f, i2 % f);
                        let mut term = &ca[i1] * &cb[i2];
                        let mut j = j1 + j2;
                        if j >= e {
                            j -= e;
                            term *= &p;
                        }
                        let kk = k1 + k2;
                        if kk < f {
                            acc[j * f + kk] += term;
                        } else {
                            for (k, r) in rows[kk - f].iter().enumerate() {
                                if !r.is_zero() {
                                    acc[j * f + k] += &term * r;
                                }
                            }
                        }
                    }
                }
                let mut el = Elem {
                    ctx: self.ctx.clone(),
                    repr: Repr::Approx {
                        base: bx + by,
                        coords: acc,
                        prec,
                    },
                };
                el.reduce();
                el
            }
        }
    }

    pub fn pow_u(&self, n: u32) -> Elem {
        let mut acc = Elem::one(&self.ctx);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiply by pi^t; cheap shift for approximate elements.
    pub fn mul_pi_pow(&self, t: i64) -> Elem {
        match &self.repr {
            Repr::Approx {
                base,
                coords,
                prec,
            } => Elem {
                ctx: self.ctx.clone(),
                repr: Repr::Approx {
                    base: base + t,
                    coords: coords.clone(),
                    prec: prec + t,
                },
            },
            Repr::Exact(_) => self.mul(&Elem::uniformizer_pow(&self.ctx, t)),
        }
    }

    pub fn inv(&self) -> Result<Elem> {
        if self.is_exact_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Repr::Exact(v) = &self.repr {
            // pure rational (only the pi^0 w^0 coordinate): invert exactly
            let f = self.ctx.f();
            if v.iter().enumerate().all(|(i, q)| i == 0 || q.is_zero()) && f >= 1 {
                return Ok(Elem::from_rational(&self.ctx, v[0].recip()));
            }
        }
        let x = self.working();
        let v = match x.val_pi()? {
            Some(t) => t,
            None => return Err(Error::DivisionByZero),
        };
        let rel = x.prec_pi() - v; // relative precision to preserve
        let prec_y = x.prec_pi() - 2 * v;
        let (_, lead) = x.leading_digit()?;
        let l_inv = self.ctx.fq().inv(&lead)?;
        let mut y = Elem::digit_monomial(&self.ctx, -v, &l_inv).with_forced_prec(prec_y);
        let two = Elem::from_integer(&self.ctx, 2);
        let max_iter = 3 + (64 - (rel.max(2) as u64).leading_zeros()) as i64;
        for _ in 0..max_iter {
            let r = two.sub(&x.mul(&y));
            y = y.mul(&r).with_forced_prec(prec_y);
            let resid = x.mul(&y).sub(&Elem::one(&self.ctx));
            if resid.is_zero_at_prec() {
                return Ok(y);
            }
        }
        Err(Error::PrecisionLoss("inversion did not converge".into()))
    }

    pub fn div(&self, other: &Elem) -> Result<Elem> {
        Ok(self.mul(&other.inv()?))
    }

    // ----- digits and residues -----

    /// Residue-field image of a unit (valuation exactly 0).
    pub fn residue(&self) -> Result<FqElem> {
        match self.valuation()? {
            Valuation::Infinite => Err(Error::NotAUnit(Rat::zero())),
            Valuation::Finite(v) => {
                if !v.is_zero() {
                    return Err(Error::NotAUnit(v));
                }
                Ok(self.digit_at_pi(0))
            }
        }
    }

    /// Leading position and digit.
    pub fn leading_digit(&self) -> Result<(i64, FqElem)> {
        match self.val_pi()? {
            None => Err(Error::PrecisionLoss("leading digit of exact zero".into())),
            Some(t) => Ok((t, self.digit_at_pi(t))),
        }
    }

    /// The digit at pi-position t (zero if below the support).
    pub fn digit_at_pi(&self, t: i64) -> FqElem {
        let el = if self.is_exact() {
            self.demoted(t + 1)
        } else {
            self.clone()
        };
        match &el.repr {
            Repr::Approx {
                base,
                coords,
                ..
            } => {
                let e = self.ctx.e() as i64;
                let f = self.ctx.f();
                let d = t - base;
                if d < 0 {
                    return FqElem::ZERO;
                }
                let j = (d % e) as usize;
                let s = (d / e) as u32;
                let p = BigInt::from(self.ctx.p());
                let ps = p.pow(s);
                let mut out = [0u64; MAX_F];
                for (k, slot) in out.iter_mut().enumerate().take(f) {
                    let c = &coords[j * f + k];
                    if !c.is_zero() {
                        let digit = (c / &ps).mod_floor(&p);
                        *slot = digit.to_u64().unwrap_or(0);
                    }
                }
                FqElem(out)
            }
            _ => unreachable!(),
        }
    }

    /// Digits from the leading position up to the precision bound.
    pub fn digits_from_val(&self) -> Result<(i64, Vec<FqElem>)> {
        let t0 = match self.val_pi()? {
            None => return Ok((0, Vec::new())),
            Some(t) => t,
        };
        let hi = if self.is_exact() {
            t0 + self.ctx.precision()
        } else {
            self.prec_pi()
        };
        let mut digits = Vec::new();
        for t in t0..hi {
            digits.push(self.digit_at_pi(t));
        }
        // trim trailing zero digits; the precision marker carries the window
        while digits.len() > 1 && digits.last().is_some_and(|d| d.is_zero()) {
            digits.pop();
        }
        Ok((t0, digits))
    }

    // ----- serialization -----

    /// Render as "p^a * [d0,d1,...] @prec" with a and prec reduced
    /// fractions in p-adic units and digits integer-encoded.
    pub fn digit_string(&self) -> String {
        let p = self.ctx.p();
        let f = self.ctx.f();
        let prec_pi = if self.is_exact() {
            match self.val_pi().ok().flatten() {
                Some(t) => t + self.ctx.precision(),
                None => self.ctx.precision(),
            }
        } else {
            self.prec_pi()
        };
        let prec_str = fmt_rat(&self.ctx.pi_to_val(prec_pi));
        match self.val_pi() {
            Ok(Some(t)) => {
                let (t0, digits) = self.digits_from_val().expect("valuated element");
                debug_assert_eq!(t0, t);
                let ds: Vec<String> = digits
                    .iter()
                    .map(|d| d.encode(p, f).to_string())
                    .collect();
                format!(
                    "{}^{} * [{}] @{}",
                    p,
                    fmt_rat(&self.ctx.pi_to_val(t)),
                    ds.join(","),
                    prec_str
                )
            }
            _ => format!("{p}^inf * [] @{prec_str}"),
        }
    }

    /// Parse the digit-string format back into an (approximate) element.
    pub fn parse_digit_string(ctx: &Context, s: &str) -> Result<Elem> {
        let err = |m: &str| Error::Parse(format!("digit string {s:?}: {m}"));
        let (head, rest) = s.split_once('^').ok_or_else(|| err("missing ^"))?;
        let p: u64 = head.trim().parse().map_err(|_| err("bad prime"))?;
        if p != ctx.p() {
            return Err(err("prime does not match context"));
        }
        let (val_part, rest) = rest.split_once('*').ok_or_else(|| err("missing *"))?;
        let (digit_part, prec_part) = rest.split_once('@').ok_or_else(|| err("missing @"))?;
        let prec_rat = parse_rat(prec_part.trim()).ok_or_else(|| err("bad precision"))?;
        let prec_pi = ctx.val_to_pi(&prec_rat)?;
        let digit_part = digit_part.trim();
        let inner = digit_part
            .strip_prefix('[')
            .and_then(|x| x.strip_suffix(']'))
            .ok_or_else(|| err("missing digit brackets"))?;
        let val_part = val_part.trim();
        if val_part == "inf" {
            if !inner.trim().is_empty() {
                return Err(err("infinite valuation with digits"));
            }
            return Ok(Elem::from_digits(ctx, 0, &[], prec_pi));
        }
        let val_rat = parse_rat(val_part).ok_or_else(|| err("bad valuation"))?;
        let val_pi = ctx.val_to_pi(&val_rat)?;
        let mut digits = Vec::new();
        if !inner.trim().is_empty() {
            for tok in inner.split(',') {
                let n: u64 = tok.trim().parse().map_err(|_| err("bad digit"))?;
                if n >= ctx.fq().order() {
                    return Err(err("digit out of range"));
                }
                digits.push(FqElem::decode(n, ctx.p(), ctx.f()));
            }
        }
        Ok(Elem::from_digits(ctx, val_pi, &digits, prec_pi))
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Rat::from(n))
    }
}
